//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Run alone with `cargo test -p scriptorium --test acceptance`.

mod common;
#[path = "../../core/tests/common/mod.rs"]
mod blobs;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::{assert_valid, ok, read_json, run};
use scriptorium_core::corpus::{add_salt, random_texts, synthesize_line, GlyphSet};
use scriptorium_core::eval::{cer, codepoints, edit_distance, EquivalenceMap};
use scriptorium_core::matching::{cluster_matrix, distance_matrix, shape_from_blob, Metric, Shape, DEFAULT_STARTS};
use scriptorium_core::outlines::{page_compression_ratio, rasterize, signed_area, trace_graph, trace_sweep};
use scriptorium_core::raster::BinaryImage;
use scriptorium_core::segmentation::{extract_blobs, segment_page, Connectivity, SegParams};
use scriptorium_core::sequence::{collapse, ctc_grad, ctc_loss, LogProbMatrix};
use scriptorium_core::skeleton::{first_full_block, skeletonize, to_graph};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn random_logits(rng: &mut ChaCha8Rng, t: usize, k: usize, scale: f64) -> Vec<f64> {
    (0..t * k).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn random_label(rng: &mut ChaCha8Rng, t: usize, a: usize, max_len: usize) -> Vec<u32> {
    loop {
        let len = rng.gen_range(0..=max_len);
        let label: Vec<u32> = (0..len).map(|_| rng.gen_range(1..=a as u32)).collect();
        let repeats = label.windows(2).filter(|w| w[0] == w[1]).count();
        if label.len() + repeats <= t {
            return label;
        }
    }
}

/// -log of the summed probability of every path that collapses to `label`.
fn brute_force_loss(p: &LogProbMatrix, label: &[u32]) -> f64 {
    let (t, k) = (p.rows(), p.cols());
    let mut terms = Vec::new();
    let mut path = vec![0u32; t];
    loop {
        if collapse(&path) == label {
            terms.push((0..t).map(|i| p.get(i, path[i] as usize)).sum::<f64>());
        }
        let mut i = 0;
        loop {
            if i == t {
                let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                return -(m + terms.iter().map(|v| (v - m).exp()).sum::<f64>().ln());
            }
            path[i] += 1;
            if (path[i] as usize) < k {
                break;
            }
            path[i] = 0;
            i += 1;
        }
    }
}

fn ctc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let t = rng.gen_range(1..=8);
        let a = rng.gen_range(1..=3);
        let label = random_label(&mut rng, t, a, 3);
        let p = LogProbMatrix::from_logits(t, a + 1, &random_logits(&mut rng, t, a + 1, 3.0)).unwrap();
        let dp = ctc_loss(&p, &label).unwrap();
        worst = worst.max((dp - brute_force_loss(&p, &label)).abs());
    }
    outcome(worst <= 1e-9, format!("500 instances, max |dp - brute force| = {worst:.2e} (tol 1e-9)"))
}

fn ctc_gradient() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let h = 1e-3;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let t = rng.gen_range(1..=12);
        let a = rng.gen_range(1..=5);
        let k = a + 1;
        let label = random_label(&mut rng, t, a, t);
        let z = random_logits(&mut rng, t, k, 2.0);
        let (_, grad) = ctc_grad(&LogProbMatrix::from_logits(t, k, &z).unwrap(), &label).unwrap();
        let f = |i: usize, d: f64| {
            let mut zz = z.clone();
            zz[i] += d;
            ctc_loss(&LogProbMatrix::from_logits(t, k, &zz).unwrap(), &label).unwrap()
        };
        for (i, g) in grad.iter().enumerate() {
            // five-point central difference, O(h^4)
            let fd = (f(i, -2.0 * h) - 8.0 * f(i, -h) + 8.0 * f(i, h) - f(i, 2.0 * h)) / (12.0 * h);
            let rel = (g - fd).abs() / g.abs().max(fd.abs()).max(1e-4);
            worst = worst.max(rel);
        }
    }
    outcome(worst <= 1e-5, format!("100 instances, max relative error = {worst:.2e} (tol 1e-5)"))
}

fn ctc_underflow() -> Outcome {
    let (t, a) = (50_000, 70);
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    let z = random_logits(&mut rng, t, a + 1, 0.01);
    let p = LogProbMatrix::from_logits(t, a + 1, &z).unwrap();
    let label: Vec<u32> = (0..1000).map(|i| 1 + (i * 7 % a) as u32).collect();
    let start = Instant::now();
    let loss = ctc_loss(&p, &label).unwrap();
    let el = start.elapsed();
    outcome(
        loss.is_finite() && el < Duration::from_secs(10),
        format!("T=50000, A=70, L=1000: loss {loss:.1} (probability e^-{loss:.0} is far below f64 range), {el:.2?}"),
    )
}

fn outline_lossless() -> (Outcome, Outcome) {
    let (mut exact, mut same, mut conserved) = (0, 0, 0);
    for seed in 0..200 {
        let (blob, w, h) = blobs::random_blob(10_000 + seed);
        let mask = blobs::blob_mask(&blob, w, h);
        let g = trace_graph(&blob);
        let s = trace_sweep(&blob);
        if rasterize(&g, w, h).unwrap() == mask && rasterize(&s, w, h).unwrap() == mask {
            exact += 1;
        }
        if g.canonical() == s.canonical() {
            same += 1;
        }
        let area: i64 = g.cycles.iter().map(|c| signed_area(&c.vertices)).sum();
        let area_s: i64 = s.cycles.iter().map(|c| signed_area(&c.vertices)).sum();
        if area == blob.area as i64 && area_s == blob.area as i64 {
            conserved += 1;
        }
    }
    (
        outcome(
            exact == 200 && same == 200,
            format!("200 blobs: exact rasterization {exact}/200 (both tracers), identical canonical cycles {same}/200"),
        ),
        outcome(conserved == 200, format!("200 blobs: sum of signed areas = pixel area in {conserved}/200 (both tracers)")),
    )
}

/// A4 at 300 dpi, one-inch margins, 1.5 line spacing, built-in digits
/// scaled x6 (cap height 42 px, about 12 pt). Line lengths are drawn from
/// `min_len..=max_len` and cut at the right margin.
fn text_page(min_len: usize, max_len: usize) -> (BinaryImage, usize) {
    let gs = GlyphSet::builtin_digits(1).unwrap();
    let (w, h, margin, scale) = (2480usize, 3508usize, 300usize, 6usize);
    let line_h = gs.height() * scale;
    let pitch = line_h * 3 / 2;
    let mut page = BinaryImage::new(w, h);
    let mut glyphs = 0;
    let mut y = margin;
    for text in random_texts(&gs, 200, min_len, max_len, 0.15, 42) {
        if y + line_h > h - margin {
            break;
        }
        let mut text = text;
        let mut img = synthesize_line(&gs, &text, 0.0, 0).unwrap().0.upscale(scale);
        while img.width() > w - 2 * margin {
            text.pop();
            while text.last() == Some(&gs.space_id) {
                text.pop();
            }
            img = synthesize_line(&gs, &text, 0.0, 0).unwrap().0.upscale(scale);
        }
        for (x, yy) in img.foreground_pixels() {
            page.set(margin + x, y + yy, true);
        }
        glyphs += text.iter().filter(|&&c| c != gs.space_id).count();
        y += pitch;
    }
    (page, glyphs)
}

fn compression_of(min_len: usize, max_len: usize) -> (usize, scriptorium_core::outlines::CompressionReport) {
    let (page, glyphs) = text_page(min_len, max_len);
    let seg = segment_page(&page, &SegParams::default());
    (glyphs, page_compression_ratio(&seg, page.width(), page.height()).unwrap())
}

/// Lines of 20 to 60 glyphs, the corpus line-length range, with ragged
/// right edges as in running text. Also reports a page packed edge to edge.
fn data_reduction() -> (Outcome, String) {
    let (glyphs, r) = compression_of(20, 60);
    let (packed_glyphs, packed) = compression_of(100, 100);
    (
        outcome(
            glyphs >= 200 && r.chain_code_bytes * 10 <= r.bitmap_bytes,
            format!(
                "{glyphs} glyphs on an A4 300 dpi page, lines of 20-60 glyphs: bitmap {} B, chain code {} B, ratio {:.2} (need >= 10)",
                r.bitmap_bytes, r.chain_code_bytes, r.ratio
            ),
        ),
        format!(
            "page packed edge to edge ({packed_glyphs} glyphs): chain code {} B, ratio {:.2}",
            packed.chain_code_bytes, packed.ratio
        ),
    )
}

fn skeleton_topology() -> (Outcome, String) {
    let (mut topo, mut thin, mut graph) = (0, 0, 0);
    for seed in 0..200 {
        let (blob, w, h) = blobs::random_stroke_blob(20_000 + seed);
        let img = blobs::blob_mask(&blob, w, h);
        let s = skeletonize(&img);
        if blobs::component_count(&s.mask) == blobs::component_count(&img)
            && blobs::hole_count(&s.mask) == blobs::hole_count(&img)
            && s.mask.foreground_pixels().all(|(x, y)| img.get(x, y))
        {
            topo += 1;
        }
        if first_full_block(&s.mask).is_none() {
            thin += 1;
        }
        if to_graph(&s).is_ok() {
            graph += 1;
        }
    }
    let (mut noise_topo, mut noise_thin) = (0, 0);
    for seed in 0..200 {
        let (blob, w, h) = blobs::random_blob(30_000 + seed);
        let img = blobs::blob_mask(&blob, w, h);
        let s = skeletonize(&img);
        if blobs::component_count(&s.mask) == blobs::component_count(&img) && blobs::hole_count(&s.mask) == blobs::hole_count(&img) {
            noise_topo += 1;
        }
        if first_full_block(&s.mask).is_none() {
            noise_thin += 1;
        }
    }
    (
        outcome(
            topo == 200 && thin == 200,
            format!("200 stroke blobs: topology kept {topo}/200, thin {thin}/200, graph built {graph}/200"),
        ),
        format!(
            "pixel-noise blobs: topology kept {noise_topo}/200, thin {noise_thin}/200 (reported only: thinness cannot be guaranteed on every pixel set)"
        ),
    )
}

fn noisy_digit_images(copies: usize, seed: u64) -> Vec<(BinaryImage, usize)> {
    let gs = GlyphSet::builtin_digits(0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (class, id) in gs.ids().enumerate() {
        let glyph = gs.glyph(id).unwrap().upscale(4);
        for _ in 0..copies {
            let mut canvas = glyph.crop(-3, -3, glyph.width() + 6, glyph.height() + 6);
            add_salt(&mut canvas, 0.02, rng.gen());
            out.push((canvas, class));
        }
    }
    out
}

fn largest_shape(img: &BinaryImage) -> Shape {
    let blobs = extract_blobs(img, Connectivity::Eight);
    let big = blobs.iter().max_by_key(|b| (b.area, std::cmp::Reverse(b.id))).unwrap();
    shape_from_blob(big, 64).unwrap()
}

/// Labels renumbered by first appearance, so equal partitions compare equal.
fn canonical_partition(labels: &[usize]) -> Vec<usize> {
    let mut map = HashMap::new();
    labels
        .iter()
        .map(|l| {
            let n = map.len();
            *map.entry(*l).or_insert(n)
        })
        .collect()
}

fn clustering() -> Outcome {
    const THRESHOLD: f64 = 0.08;
    let data = noisy_digit_images(20, 7);
    let classes: Vec<usize> = data.iter().map(|d| d.1).collect();
    let shapes: Vec<Shape> = data.iter().map(|d| largest_shape(&d.0)).collect();
    let c = cluster_matrix(&distance_matrix(&shapes, Metric::Dtw, DEFAULT_STARTS), THRESHOLD);
    let mut hits = 0;
    for k in 0..c.cluster_count() {
        let mut counts = HashMap::new();
        for (l, cl) in c.labels.iter().zip(&classes) {
            if *l == k {
                *counts.entry(cl).or_insert(0) += 1;
            }
        }
        hits += counts.values().copied().max().unwrap_or(0);
    }
    let purity = hits as f64 / data.len() as f64;

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let moved: Vec<Shape> = data
        .iter()
        .map(|(img, _)| {
            let big = img.upscale(2);
            let (dx, dy) = (rng.gen_range(0..25), rng.gen_range(0..25));
            largest_shape(&big.crop(-dx, -dy, big.width() + 40, big.height() + 40))
        })
        .collect();
    let m = cluster_matrix(&distance_matrix(&moved, Metric::Dtw, DEFAULT_STARTS), THRESHOLD);
    let invariant = canonical_partition(&c.labels) == canonical_partition(&m.labels);
    outcome(
        purity >= 0.99 && invariant,
        format!(
            "10 classes x 20 copies (salt 0.02): {} clusters, purity {purity:.4}; partition after x2 scale + translation {}",
            c.cluster_count(),
            if invariant { "identical" } else { "DIFFERENT" }
        ),
    )
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Trains through the binary on the plan plus 500 random lines and reads
/// 100 held-out lines (10 pages) back with `ocr`.
fn end_to_end(dir: &Path) -> (Outcome, PathBuf) {
    let train = dir.join("train");
    let held = dir.join("held");
    ok(["synth", "--out", s(&train), "--plan", "--random", "500", "--min-len", "20", "--max-len", "60", "--seed", "1"]);
    ok([
        "synth", "--out", s(&held), "--random", "100", "--min-len", "20", "--max-len", "60", "--seed", "2",
        "--lines-per-page", "10",
    ]);
    let ckpt = dir.join("model.ckpt");
    let start = Instant::now();
    let summary: Value = serde_json::from_str(&ok([
        "train", "--manifest", s(&train.join("manifest.jsonl")), "--out", s(&ckpt), "--epochs", "5", "--seed", "3",
    ]))
    .unwrap();
    let train_time = start.elapsed();
    assert_valid("train-summary", &summary);

    let (mut errors, mut symbols, mut lines) = (0u64, 0u64, 0usize);
    let mut failures = Vec::new();
    for p in 0..10 {
        let page = held.join(format!("pages/{p:05}.png"));
        let refs = held.join(format!("pages/{p:05}.txt"));
        let report = dir.join(format!("report{p}.json"));
        let out = run(["ocr", s(&page), "--model", s(&ckpt), "--refs", s(&refs), "--report", s(&report)]);
        if !out.status.success() {
            failures.push(format!("page {p}: {}", String::from_utf8_lossy(&out.stderr).trim()));
            continue;
        }
        let rep = read_json(&report);
        assert_valid("ocr-report", &rep);
        for l in rep["lines"].as_array().unwrap() {
            errors += l["distance"].as_u64().unwrap();
            symbols += l["reference"].as_array().unwrap().len() as u64;
            lines += 1;
        }
    }
    let accuracy = 1.0 - errors as f64 / symbols.max(1) as f64;
    let pass = failures.is_empty() && lines == 100 && accuracy >= 0.97 && train_time < Duration::from_secs(600);
    let mut detail = format!(
        "{} training lines, {} epochs in {:.1?}; held-out {lines} lines, {symbols} symbols, {errors} errors, accuracy {accuracy:.4} (need >= 0.97)",
        summary["samples"], summary["epochs"], train_time
    );
    if !failures.is_empty() {
        detail.push_str(&format!("; {}", failures.join("; ")));
    }
    (outcome(pass, detail), ckpt)
}

fn naive_distance(a: &[u32], b: &[u32], memo: &mut HashMap<(usize, usize), usize>) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    if let Some(&d) = memo.get(&(a.len(), b.len())) {
        return d;
    }
    let sub = naive_distance(&a[1..], &b[1..], memo) + usize::from(a[0] != b[0]);
    let del = naive_distance(&a[1..], b, memo) + 1;
    let ins = naive_distance(a, &b[1..], memo) + 1;
    let d = sub.min(del).min(ins);
    memo.insert((a.len(), b.len()), d);
    d
}

fn edit_distance_criterion() -> Outcome {
    let mut strings: Vec<Vec<u32>> = vec![vec![]];
    let mut frontier = vec![vec![]];
    for _ in 0..6 {
        frontier = frontier
            .iter()
            .flat_map(|s: &Vec<u32>| (0..3u32).map(move |c| [s.clone(), vec![c]].concat()))
            .collect();
        strings.extend(frontier.iter().cloned());
    }
    let eq = EquivalenceMap::identity();
    let mut mismatches = 0usize;
    let mut pairs = 0usize;
    for a in &strings {
        for b in &strings {
            pairs += 1;
            let mut memo = HashMap::new();
            if edit_distance(a, b, &eq) != naive_distance(a, b, &mut memo) {
                mismatches += 1;
            }
        }
    }
    let kitten = edit_distance(&codepoints("kitten"), &codepoints("sitting"), &eq);
    let line: Vec<u32> = (0..60).map(|i| i % 7).collect();
    let mut hyp = line.clone();
    hyp[30] = 99;
    let c = cer(&[line], &[hyp], &eq).unwrap();
    outcome(
        mismatches == 0 && kitten == 3 && (c - 0.0167).abs() <= 1e-4,
        format!(
            "{pairs} string pairs (length <= 6, 3 symbols): {mismatches} mismatches vs recursive oracle; kitten/sitting = {kitten}; one error in 60 = {c:.4}"
        ),
    )
}

fn files_under(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

/// Runs `args` twice, writing into `a` and `b`; returns whether stdout and
/// every file produced are byte-identical, plus the first stdout.
fn twice(a: &Path, b: &Path, args: impl Fn(&Path) -> Vec<String>) -> (bool, String) {
    std::fs::create_dir_all(a).unwrap();
    std::fs::create_dir_all(b).unwrap();
    let out_a = ok(args(a));
    let out_b = ok(args(b));
    let same_stdout = out_a.replace(s(a), "<out>") == out_b.replace(s(b), "<out>");
    (same_stdout && files_under(a) == files_under(b), out_a)
}

fn cli_determinism(dir: &Path, ckpt: &Path) -> Outcome {
    let mut same = Vec::new();
    let mut schemas = 0;
    let page = dir.join("held/pages/00000.png");
    let refs = dir.join("held/pages/00000.txt");
    let d = |n: &str| dir.join("det").join(n);
    let string = |p: &Path| p.to_str().unwrap().to_owned();

    let (eq, _) = twice(&d("synth-a"), &d("synth-b"), |o| {
        ["synth", "--out", s(o), "--plan", "--random", "20", "--noise", "0.01", "--seed", "9", "--lines-per-page", "5", "--save-atlas", s(&o.join("atlas"))]
            .map(String::from)
            .to_vec()
    });
    same.push(("synth", eq));
    for line in std::fs::read_to_string(d("synth-a").join("manifest.jsonl")).unwrap().lines() {
        assert_valid("manifest-record", &serde_json::from_str(line).unwrap());
    }
    assert_valid("atlas", &read_json(&d("synth-a").join("atlas/atlas.json")));
    schemas += 2;

    let manifest = d("synth-a").join("manifest.jsonl");
    let (eq, out) = twice(&d("train-a"), &d("train-b"), |o| {
        vec!["train".into(), "--manifest".into(), string(&manifest), "--out".into(), string(&o.join("m.ckpt")), "--epochs".into(), "2".into(), "--seed".into(), "4".into()]
    });
    same.push(("train", eq));
    assert_valid("train-summary", &serde_json::from_str(&out).unwrap());
    schemas += 1;

    let (eq, out) = twice(&d("segment-a"), &d("segment-b"), |o| {
        vec!["segment".into(), string(&page), "--out".into(), string(o), "--chain-code".into(), "--skeleton".into()]
    });
    same.push(("segment", eq));
    assert_valid("segment-summary", &serde_json::from_str(&out).unwrap());
    assert_valid("page-segmentation", &read_json(&d("segment-a").join("seg.json")));
    assert_valid("skeleton-graph", &read_json(&d("segment-a").join("skeleton.json")));
    schemas += 3;

    let ocr = |o: &Path| {
        vec!["ocr".into(), string(&page), "--model".into(), string(ckpt), "--refs".into(), string(&refs), "--report".into(), string(&o.join("r.json"))]
    };
    let (eq, _) = twice(&d("ocr-a"), &d("ocr-b"), ocr);
    same.push(("ocr", eq));
    assert_valid("ocr-report", &read_json(&d("ocr-a").join("r.json")));
    schemas += 1;

    let (eq, out) = twice(&d("cluster-a"), &d("cluster-b"), |o| {
        vec!["cluster".into(), string(&page), "--threshold".into(), "0.08".into(), "--matrix".into(), string(&o.join("m.csv"))]
    });
    same.push(("cluster", eq));
    assert_valid("clustering", &serde_json::from_str(&out).unwrap());
    schemas += 1;

    let hyps = d("hyps.txt");
    std::fs::write(&hyps, ok(["ocr", s(&page), "--model", s(ckpt)])).unwrap();
    let (eq, out) = twice(&d("eval-a"), &d("eval-b"), |_| {
        vec!["eval".into(), "--refs".into(), string(&refs), "--hyps".into(), string(&hyps)]
    });
    same.push(("eval", eq));
    assert_valid("eval-report", &serde_json::from_str(&out).unwrap());
    schemas += 1;

    same.push(("serve", serve_determinism(&page, &d("serve"))));
    schemas += 2;

    let differing: Vec<&str> = same.iter().filter(|(_, e)| !e).map(|(n, _)| *n).collect();
    outcome(
        differing.is_empty(),
        format!(
            "{} subcommands byte-identical on repeat ({}); {schemas} JSON artifacts schema-valid{}",
            same.len() - differing.len(),
            same.iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
            if differing.is_empty() { String::new() } else { format!("; differing: {}", differing.join(", ")) }
        ),
    )
}

fn serve_determinism(page: &Path, dir: &Path) -> bool {
    use axum::body::Body;
    use axum::http::Request;
    use http_body_util::BodyExt;
    use tower::ServiceExt;

    let images = dir.join("images");
    std::fs::create_dir_all(&images).unwrap();
    std::fs::copy(page, images.join("page.png")).unwrap();
    let state = Arc::new(scriptorium::server::AppState { images, params: RwLock::new(SegParams::default()) });
    let app = scriptorium::server::router(state, None);
    let rt = tokio::runtime::Builder::new_current_thread().build().unwrap();
    let fetch = |method: &str, uri: &str, body: &str| {
        let req = Request::builder().method(method).uri(uri).body(Body::from(body.to_owned())).unwrap();
        rt.block_on(async { app.clone().oneshot(req).await.unwrap().into_body().collect().await.unwrap().to_bytes().to_vec() })
    };
    let seg = r#"{"image_id": "page.png"}"#;
    let a = fetch("POST", "/api/segment", seg);
    let b = fetch("POST", "/api/segment", seg);
    let oa = fetch("GET", "/api/overlay/page.png?line_gap=6", "");
    let ob = fetch("GET", "/api/overlay/page.png?line_gap=6", "");
    let params = fetch("GET", "/api/params", "");
    assert_valid("page-segmentation", &serde_json::from_slice(&a).unwrap());
    assert_valid("seg-params", &serde_json::from_slice(&params).unwrap());
    let cli_out = dir.join("cli");
    ok(["segment", s(page), "--out", s(&cli_out)]);
    a == b && oa == ob && std::fs::read(cli_out.join("seg.json")).unwrap() == a
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let mut results: Vec<(&str, bool)> = Vec::new();
    let mut report = |name: &'static str, limit: Option<Duration>, o: Outcome, el: Duration| {
        let in_time = limit.is_none_or(|l| el <= l);
        let pass = o.pass && in_time;
        let budget = limit.map_or(String::new(), |l| format!(" (limit {l:.0?})"));
        println!("{} {name}: {} [{el:.1?}{budget}]", if pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((name, pass));
    };
    let time = |f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let o = f();
        (o, start.elapsed())
    };
    println!("acceptance suite");

    let (o, el) = time(&mut ctc_oracle);
    report("ctc-oracle-equivalence", Some(Duration::from_secs(30)), o, el);
    let (o, el) = time(&mut ctc_gradient);
    report("ctc-gradient-check", Some(Duration::from_secs(60)), o, el);
    let (o, el) = time(&mut ctc_underflow);
    report("ctc-underflow", Some(Duration::from_secs(10)), o, el);

    let mut conservation = None;
    let (o, el) = time(&mut || {
        let (l, c) = outline_lossless();
        conservation = Some(c);
        l
    });
    report("outline-losslessness", None, o, el);
    report("outline-area-conservation", None, conservation.unwrap(), el);
    let mut note = String::new();
    let (o, el) = time(&mut || {
        let (o, n) = data_reduction();
        note = n;
        o
    });
    report("chain-code-data-reduction", None, o, el);
    println!("INFO chain-code-data-reduction: {note}");

    let (o, el) = time(&mut || {
        let (o, n) = skeleton_topology();
        note = n;
        o
    });
    report("skeleton-topology-and-thinness", None, o, el);
    println!("INFO skeleton-topology-and-thinness: {note}");

    let (o, el) = time(&mut clustering);
    report("shape-clustering", None, o, el);

    let mut ckpt = PathBuf::new();
    let (o, el) = time(&mut || {
        let (o, c) = end_to_end(tmp.path());
        ckpt = c;
        o
    });
    report("end-to-end-toy-ocr", None, o, el);

    let (o, el) = time(&mut edit_distance_criterion);
    report("edit-distance", None, o, el);
    let (o, el) = time(&mut || cli_determinism(tmp.path(), &ckpt));
    report("cli-determinism-and-schemas", None, o, el);

    let failed: Vec<&str> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    println!("{} of {} criteria passed", results.len() - failed.len(), results.len());
    if !failed.is_empty() {
        eprintln!("failed: {}", failed.join(", "));
        std::process::exit(1);
    }
}
