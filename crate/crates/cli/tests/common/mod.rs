#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

use scriptorium::commands::compose_page;
use scriptorium_core::corpus::{synthesize_line, GlyphSet};
use scriptorium_core::raster::{encode_png, BinaryImage};

pub fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_scriptorium")
}

pub fn run<I, S>(args: I) -> Output
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    Command::new(bin()).args(args).output().expect("binary runs")
}

/// Runs and asserts exit 0, returning stdout.
pub fn ok<I, S>(args: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<std::ffi::OsStr>,
{
    let out = run(args);
    assert!(
        out.status.success(),
        "exit {:?}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 stdout")
}

pub fn schema(name: &str) -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas").join(format!("{name}.schema.json"));
    serde_json::from_slice(&std::fs::read(&path).expect("schema file")).expect("schema is JSON")
}

pub fn assert_valid(name: &str, instance: &Value) {
    let validator = jsonschema::validator_for(&schema(name)).expect("schema compiles");
    let errors: Vec<String> = validator.iter_errors(instance).map(|e| format!("{} at {}", e, e.instance_path)).collect();
    assert!(errors.is_empty(), "{name}: {errors:#?}");
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))).expect("JSON")
}

pub fn digits() -> GlyphSet {
    GlyphSet::builtin_digits(1).unwrap()
}

/// Renders `texts` as stacked lines of built-in digits and writes a PNG.
pub fn write_page(path: &Path, texts: &[&str]) -> BinaryImage {
    let gs = digits();
    let lines: Vec<BinaryImage> = texts
        .iter()
        .map(|t| synthesize_line(&gs, &gs.from_text(t).unwrap(), 0.0, 0).unwrap().0)
        .collect();
    let refs: Vec<&BinaryImage> = lines.iter().collect();
    let page = compose_page(&refs, gs.height());
    std::fs::write(path, encode_png(&page.to_gray_printed())).unwrap();
    page
}

pub fn files_equal(a: &Path, b: &Path) -> bool {
    std::fs::read(a).unwrap() == std::fs::read(b).unwrap()
}

/// Synthesizes a small corpus and trains a model with the binary.
pub fn train_small(dir: &Path, seed: &str) -> PathBuf {
    let corpus = dir.join("corpus");
    ok(["synth", "--out", corpus.to_str().unwrap(), "--plan", "--random", "150", "--seed", seed]);
    let ckpt = dir.join("model.ckpt");
    ok([
        "train",
        "--manifest",
        corpus.join("manifest.jsonl").to_str().unwrap(),
        "--out",
        ckpt.to_str().unwrap(),
        "--epochs",
        "3",
        "--seed",
        seed,
    ]);
    ckpt
}
