//! The pipeline config file and the segmentation flags that override it.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::{Map, Value};

use scriptorium_core::corpus::GlyphSet;
use scriptorium_core::eval::EquivalenceMap;
use scriptorium_core::segmentation::SegParams;

use crate::{read_file, CliError, CliResult};

/// One JSON document:
/// `{"seg": {...}, "window": 7, "atlas": "dir", "model": "file", "eq": "file", "seed": 0}`.
/// Relative paths are resolved against the config file's directory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub seg: SegParams,
    pub window: usize,
    pub atlas: Option<PathBuf>,
    pub model: Option<PathBuf>,
    pub eq: Option<PathBuf>,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seg: SegParams::default(),
            window: 7,
            atlas: None,
            model: None,
            eq: None,
            seed: 0,
        }
    }
}

fn field_error(field: &str, message: impl std::fmt::Display) -> CliError {
    CliError::usage(format!("config: {field}: {message}"))
}

impl PipelineConfig {
    pub fn from_value(value: &Value, base: &Path) -> CliResult<PipelineConfig> {
        let obj = value.as_object().ok_or_else(|| CliError::usage("config: expected a JSON object"))?;
        let mut cfg = PipelineConfig::default();
        let path = |field: &str, v: &Value| -> CliResult<PathBuf> {
            let s = v.as_str().ok_or_else(|| field_error(field, "expected a path string"))?;
            Ok(base.join(s))
        };
        for (key, v) in obj {
            match key.as_str() {
                "seg" => cfg.seg = SegParams::from_json(v).map_err(|e| CliError::usage(format!("config: seg.{e}")))?,
                "window" => {
                    cfg.window = v
                        .as_u64()
                        .filter(|w| w % 2 == 1)
                        .ok_or_else(|| field_error("window", format!("must be an odd positive integer, got {v}")))?
                        as usize
                }
                "seed" => cfg.seed = v.as_u64().ok_or_else(|| field_error("seed", format!("must be a non-negative integer, got {v}")))?,
                "atlas" => cfg.atlas = Some(path("atlas", v)?),
                "model" => cfg.model = Some(path("model", v)?),
                "eq" => cfg.eq = Some(path("eq", v)?),
                other => return Err(field_error(other, "unknown field")),
            }
        }
        Ok(cfg)
    }

    /// Loads and validates a config file; referenced files must exist.
    pub fn load(path: &Path) -> CliResult<PipelineConfig> {
        let bytes = read_file(path)?;
        let value: Value = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = PipelineConfig::from_value(&value, base)?;
        for (name, p) in [("atlas", &cfg.atlas), ("model", &cfg.model), ("eq", &cfg.eq)] {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(CliError::io(format!("config: {name} {} does not exist", p.display())));
                }
            }
        }
        Ok(cfg)
    }

    pub fn load_or_default(path: Option<&Path>) -> CliResult<PipelineConfig> {
        path.map_or_else(|| Ok(PipelineConfig::default()), PipelineConfig::load)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    Ltr,
    Rtl,
}

/// Segmentation overrides shared by the subcommands that segment pages.
#[derive(Clone, Debug, Default, Args)]
pub struct SegArgs {
    /// SegParams JSON document (as exported by the tuner)
    #[arg(long, value_name = "FILE")]
    pub params: Option<PathBuf>,
    /// Blob connectivity, 4 or 8
    #[arg(long)]
    pub connectivity: Option<i64>,
    /// Blobs smaller than this many pixels are diacritic or noise candidates
    #[arg(long, allow_negative_numbers = true)]
    pub small_blob_area: Option<i64>,
    /// Largest centroid-height jump inside one text line, in pixels
    #[arg(long, allow_negative_numbers = true)]
    pub line_gap: Option<i64>,
    #[arg(long, value_enum)]
    pub reading_order: Option<OrderArg>,
}

impl SegArgs {
    /// Config file values, then the params file, then individual flags.
    pub fn resolve(&self, base: &SegParams) -> CliResult<SegParams> {
        let mut doc = match &self.params {
            Some(p) => {
                let bytes = read_file(p)?;
                let v: Value = serde_json::from_slice(&bytes)
                    .map_err(|e| CliError::usage(format!("params {}: {e}", p.display())))?;
                let parsed = SegParams::from_json(&v).map_err(|e| CliError::usage(format!("params: {e}")))?;
                serde_json::to_value(parsed).expect("params serialize")
            }
            None => serde_json::to_value(base).expect("params serialize"),
        };
        let obj: &mut Map<String, Value> = doc.as_object_mut().expect("params are an object");
        if let Some(c) = self.connectivity {
            obj.insert("connectivity".into(), c.into());
        }
        if let Some(a) = self.small_blob_area {
            obj.insert("small_blob_area".into(), a.into());
        }
        if let Some(g) = self.line_gap {
            obj.insert("line_gap".into(), g.into());
        }
        if let Some(o) = self.reading_order {
            let s = match o {
                OrderArg::Ltr => "ltr",
                OrderArg::Rtl => "rtl",
            };
            obj.insert("reading_order".into(), s.into());
        }
        SegParams::from_json(&doc).map_err(|e| CliError::usage(e.to_string()))
    }
}

/// How label sequences are written in text files.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum LabelFormat {
    /// Characters from the atlas (or Unicode code points for `eval`)
    #[default]
    Text,
    /// Whitespace-separated symbol ids
    Ids,
}

pub fn parse_ids(line: &str) -> CliResult<Vec<u32>> {
    line.split_whitespace()
        .map(|t| t.parse::<u32>().map_err(|_| CliError::usage(format!("`{t}` is not a symbol id"))))
        .collect()
}

pub fn format_ids(ids: &[u32]) -> String {
    ids.iter().map(u32::to_string).collect::<Vec<_>>().join(" ")
}

pub fn load_atlas(path: Option<&Path>) -> CliResult<GlyphSet> {
    match path {
        Some(p) => GlyphSet::load_atlas(p).map_err(|e| match e {
            scriptorium_core::corpus::CorpusError::Io(io) => CliError::io(format!("atlas {}: {io}", p.display())),
            other => CliError::usage(format!("atlas {}: {other}", p.display())),
        }),
        None => Ok(GlyphSet::builtin_digits(1).expect("builtin atlas is valid")),
    }
}

pub fn load_eq(path: Option<&Path>) -> CliResult<EquivalenceMap> {
    match path {
        Some(p) => serde_json::from_slice(&read_file(p)?)
            .map_err(|e| CliError::usage(format!("equivalence map {}: {e}", p.display()))),
        None => Ok(EquivalenceMap::identity()),
    }
}
