//! Subcommand definitions and their implementations.

use std::io::BufReader;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use scriptorium_core::corpus::{
    build_plan, random_texts, read_manifest, synthesize_corpus, write_manifest, GlyphSet, ManifestRecord,
};
use scriptorium_core::eval::{cer, codepoints, edit_distance, EquivalenceMap};
use scriptorium_core::matching::{cluster_matrix, distance_matrix, distance_matrix_csv, shape_from_blob, Metric, Shape};
use scriptorium_core::outlines::{compression_ratio, encode_chain_code, trace_page};
use scriptorium_core::overlay::overlay_png;
use scriptorium_core::raster::{binarize_otsu, encode_pgm_mask, encode_png, load_image, BinarizeReport, BinaryImage, RasterError};
use scriptorium_core::segmentation::{crop_line, extract_blobs, segment_page, BBox, PageSegmentation, ReadingOrder, SegParams};
use scriptorium_core::sequence::{
    fit_line_height, make_frames, train_toy_with, Alphabet, FrameSequence, ModelError, Sample, ToyModel, TrainConfig,
};
use scriptorium_core::skeleton::{skeletonize, to_graph};

use crate::config::{format_ids, load_atlas, load_eq, parse_ids, LabelFormat, PipelineConfig, SegArgs};
use crate::{read_file, read_text, to_json, write_file, CliError, CliResult};

/// Blank columns kept on each side of a line before framing.
pub const LINE_MARGIN: usize = 2;
/// Margin around a line's blobs when cropping it from a page.
pub const CROP_MARGIN: usize = 2;

#[derive(Debug, Parser)]
#[command(name = "scriptorium", version, about = "Document image analysis pipeline")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Binarize and segment a page into blobs and text lines
    Segment(SegmentArgs),
    /// Transcribe every text line of a page with a trained model
    Ocr(OcrArgs),
    /// Cluster the blobs of one or more pages by outline shape
    Cluster(ClusterArgs),
    /// Render a synthetic training corpus from a glyph atlas
    Synth(SynthArgs),
    /// Train the recognizer on a synthetic corpus
    Train(TrainArgs),
    /// Character error rate of hypotheses against references
    Eval(EvalArgs),
    /// Serve the segmentation HTTP API (and optionally the tuner UI)
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct SegmentArgs {
    /// Page image (PNG or binary PGM)
    pub image: PathBuf,
    /// Output directory for seg.json and overlay.png
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Pipeline config file
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub seg: SegArgs,
    /// Also write the outlines as chain code (outlines.scc)
    #[arg(long)]
    pub chain_code: bool,
    /// Also write the page skeleton (skeleton.pgm) and its graph (skeleton.json)
    #[arg(long)]
    pub skeleton: bool,
}

#[derive(Debug, Args)]
pub struct OcrArgs {
    pub image: PathBuf,
    /// Model checkpoint written by `train`
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Glyph atlas directory; the built-in digits when omitted
    #[arg(long)]
    pub atlas: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub seg: SegArgs,
    /// Reference transcript, one line per detected text line
    #[arg(long)]
    pub refs: Option<PathBuf>,
    /// Equivalence map for scoring against --refs
    #[arg(long)]
    pub eq: Option<PathBuf>,
    /// Write a JSON report with per-line distances
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: LabelFormat,
}

#[derive(Debug, Args)]
pub struct ClusterArgs {
    #[arg(required = true)]
    pub images: Vec<PathBuf>,
    /// Single-link merge threshold on normalized shape distance
    #[arg(long)]
    pub threshold: f64,
    /// Samples per outline cycle
    #[arg(long, default_value_t = 64)]
    pub samples: usize,
    /// DTW start rotations
    #[arg(long, default_value_t = 16)]
    pub starts: usize,
    #[arg(long, value_enum, default_value = "dtw")]
    pub metric: MetricArg,
    /// Ignore blobs smaller than this many pixels
    #[arg(long, default_value_t = 1)]
    pub min_area: usize,
    #[command(flatten)]
    pub seg: SegArgs,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the clustering JSON here instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write the distance matrix as CSV
    #[arg(long)]
    pub matrix: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
pub enum MetricArg {
    Dtw,
    DtwOrBroken,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory: lines/*.png and manifest.jsonl
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub atlas: Option<PathBuf>,
    /// Join overlap of the built-in digit atlas
    #[arg(long, default_value_t = 1)]
    pub overlap: usize,
    /// Save the atlas in use to this directory
    #[arg(long)]
    pub save_atlas: Option<PathBuf>,
    /// Include the unigram, bigram and spaced-trigram plan
    #[arg(long)]
    pub plan: bool,
    /// Extra strings appended to the plan, one per line
    #[arg(long)]
    pub extras: Option<PathBuf>,
    /// Texts to render, one per line
    #[arg(long)]
    pub texts: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    pub format: LabelFormat,
    /// Number of random lines to add
    #[arg(long, default_value_t = 0)]
    pub random: usize,
    #[arg(long, default_value_t = 20)]
    pub min_len: usize,
    #[arg(long, default_value_t = 60)]
    pub max_len: usize,
    #[arg(long, default_value_t = 0.15)]
    pub space_rate: f64,
    /// Salt-noise probability per background pixel
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also stack consecutive lines into pages (pages/*.png with transcripts)
    #[arg(long, default_value_t = 0)]
    pub lines_per_page: usize,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Checkpoint to write
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub atlas: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub lr: f64,
    #[arg(long, default_value_t = 8)]
    pub batch: usize,
    #[arg(long, default_value_t = 32)]
    pub state: usize,
    /// Frame window width (odd); overrides the config
    #[arg(long)]
    pub window: Option<usize>,
    #[arg(long, default_value_t = 5.0)]
    pub clip: f64,
    /// Seed for initialization and shuffling; overrides the config
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub reading_order: Option<crate::config::OrderArg>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub refs: PathBuf,
    #[arg(long)]
    pub hyps: PathBuf,
    #[arg(long)]
    pub eq: Option<PathBuf>,
    /// `text` compares Unicode code points, `ids` whitespace-separated ids
    #[arg(long, value_enum, default_value_t)]
    pub format: LabelFormat,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Directory of page images offered to the UI
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: String,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    /// Built tuner UI to serve at /
    #[arg(long)]
    pub ui: Option<PathBuf>,
    /// Initial SegParams JSON
    #[arg(long)]
    pub params: Option<PathBuf>,
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Segment(a) => cmd_segment(&a),
        Command::Ocr(a) => cmd_ocr(&a).map(|out| print!("{out}")),
        Command::Cluster(a) => cmd_cluster(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Train(a) => cmd_train(&a),
        Command::Eval(a) => cmd_eval(&a).map(|out| print!("{out}")),
        Command::Serve(a) => crate::server::serve(&a),
    }
}

pub fn raster_error(e: RasterError) -> CliError {
    CliError::io(e)
}

pub fn load_binary(path: &Path) -> CliResult<(BinaryImage, BinarizeReport)> {
    let gray = load_image(path).map_err(raster_error)?;
    Ok(binarize_otsu(&gray))
}

/// Crops each text line, brings it to the model's frame height and frames it.
pub fn prepare_line(line: &BinaryImage, height: usize, window: usize, order: ReadingOrder) -> CliResult<FrameSequence> {
    let fitted = fit_line_height(line, height, LINE_MARGIN);
    make_frames(&fitted, window, order).map_err(CliError::pipeline)
}

/// Checks that the checkpoint's output layer matches the atlas alphabet.
pub fn alphabet_for(model: &ToyModel, gs: &GlyphSet) -> CliResult<Alphabet> {
    let alphabet = Alphabet::new(gs.symbols()).map_err(CliError::usage)?;
    if model.output_dim != alphabet.classes() {
        return Err(CliError::pipeline(format!(
            "model has {} output classes but the atlas alphabet needs {} ({} symbols + blank)",
            model.output_dim,
            alphabet.classes(),
            alphabet.len()
        )));
    }
    Ok(alphabet)
}

/// Transcribes every detected line in reading order, as symbol ids.
pub fn transcribe_page(
    page: &BinaryImage,
    params: &SegParams,
    model: &ToyModel,
    alphabet: &Alphabet,
) -> CliResult<(PageSegmentation, Vec<Vec<u32>>)> {
    let seg = segment_page(page, params);
    let mut out = Vec::with_capacity(seg.lines.len());
    for line in &seg.lines {
        let crop = crop_line(page, line, &seg.blobs, CROP_MARGIN);
        let frames = prepare_line(&crop, model.frame_height, model.window, params.reading_order)?;
        let classes = model.transcribe(&frames).map_err(CliError::pipeline)?;
        out.push(alphabet.decode(&classes));
    }
    Ok((seg, out))
}

#[derive(Serialize)]
struct SegmentSummary {
    image: PathBuf,
    width: usize,
    height: usize,
    binarization: BinarizeReport,
    blobs: usize,
    lines: usize,
    noise: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    compression: Option<scriptorium_core::outlines::CompressionReport>,
}

pub fn cmd_segment(a: &SegmentArgs) -> CliResult<()> {
    let cfg = PipelineConfig::load_or_default(a.config.as_deref())?;
    let params = a.seg.resolve(&cfg.seg)?;
    let (page, report) = load_binary(&a.image)?;
    let seg = segment_page(&page, &params);
    write_file(&a.out.join("seg.json"), to_json(&seg))?;
    write_file(&a.out.join("overlay.png"), overlay_png(&page, &seg))?;
    let mut compression = None;
    if a.chain_code {
        let outlines = trace_page(&seg);
        write_file(&a.out.join("outlines.scc"), encode_chain_code(&outlines, page.width(), page.height()))?;
        compression = compression_ratio(&outlines, page.width(), page.height()).ok();
    }
    if a.skeleton {
        let skel = skeletonize(&page);
        write_file(&a.out.join("skeleton.pgm"), encode_pgm_mask(&skel.mask))?;
        let graph = to_graph(&skel).map_err(CliError::pipeline)?;
        write_file(&a.out.join("skeleton.json"), to_json(&graph))?;
    }
    let summary = SegmentSummary {
        image: a.image.clone(),
        width: page.width(),
        height: page.height(),
        binarization: report,
        blobs: seg.blobs.len(),
        lines: seg.lines.len(),
        noise: seg.noise_ids.len(),
        compression,
    };
    print!("{}", to_json(&summary));
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct OcrLine {
    pub index: usize,
    pub ids: Vec<u32>,
    pub text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<Vec<u32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub distance: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct OcrReport {
    pub image: PathBuf,
    pub lines: Vec<OcrLine>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cer: Option<f64>,
}

fn read_labels(path: &Path, format: LabelFormat, gs: &GlyphSet) -> CliResult<Vec<Vec<u32>>> {
    read_text(path)?
        .lines()
        .map(|l| match format {
            LabelFormat::Text => gs.from_text(l).map_err(|e| CliError::usage(format!("{}: {e}", path.display()))),
            LabelFormat::Ids => parse_ids(l),
        })
        .collect()
}

/// Runs OCR and returns the transcript as printed to stdout.
pub fn cmd_ocr(a: &OcrArgs) -> CliResult<String> {
    let cfg = PipelineConfig::load_or_default(a.config.as_deref())?;
    let params = a.seg.resolve(&cfg.seg)?;
    let model_path = a
        .model
        .clone()
        .or(cfg.model.clone())
        .ok_or_else(|| CliError::usage("ocr needs --model (or `model` in the config)"))?;
    let model = ToyModel::load(&model_path).map_err(|e| match e {
        ModelError::Io(io) => CliError::io(format!("{}: {io}", model_path.display())),
        other => CliError::pipeline(format!("{}: {other}", model_path.display())),
    })?;
    let gs = load_atlas(a.atlas.as_deref().or(cfg.atlas.as_deref()))?;
    let alphabet = alphabet_for(&model, &gs)?;
    let (page, _) = load_binary(&a.image)?;
    let (_, hyps) = transcribe_page(&page, &params, &model, &alphabet)?;

    let mut lines: Vec<OcrLine> = hyps
        .iter()
        .enumerate()
        .map(|(index, ids)| OcrLine { index, ids: ids.clone(), text: gs.to_text(ids), reference: None, distance: None })
        .collect();
    let mut score = None;
    if let Some(refs_path) = &a.refs {
        let refs = read_labels(refs_path, a.format, &gs)?;
        let eq = load_eq(a.eq.as_deref().or(cfg.eq.as_deref()))?;
        if refs.len() != hyps.len() {
            return Err(CliError::pipeline(format!(
                "{} has {} lines but {} text lines were detected",
                refs_path.display(),
                refs.len(),
                hyps.len()
            )));
        }
        for (line, r) in lines.iter_mut().zip(&refs) {
            line.distance = Some(edit_distance(r, &line.ids, &eq));
            line.reference = Some(r.clone());
        }
        score = Some(cer(&refs, &hyps, &eq).map_err(CliError::pipeline)?);
        if let Some(c) = score {
            eprintln!("cer {c:.6}");
        }
    }
    if let Some(report_path) = &a.report {
        let report = OcrReport { image: a.image.clone(), lines, cer: score };
        write_file(report_path, to_json(&report))?;
    }
    Ok(hyps.iter().map(|h| format_label(&gs, h, a.format) + "\n").collect())
}

#[derive(Debug, Serialize)]
pub struct ClusterItem {
    pub image: PathBuf,
    pub blob_id: usize,
    pub bbox: BBox,
    pub area: usize,
}

#[derive(Debug, Serialize)]
pub struct ClusterOutput {
    pub threshold: f64,
    pub clusters: usize,
    pub labels: Vec<usize>,
    pub items: Vec<ClusterItem>,
}

pub fn cmd_cluster(a: &ClusterArgs) -> CliResult<()> {
    if !(a.threshold.is_finite() && a.threshold >= 0.0) {
        return Err(CliError::usage("--threshold must be a non-negative number"));
    }
    if a.samples < 8 || a.starts == 0 {
        return Err(CliError::usage("--samples must be at least 8 and --starts at least 1"));
    }
    let cfg = PipelineConfig::load_or_default(a.config.as_deref())?;
    let params = a.seg.resolve(&cfg.seg)?;
    let mut items = Vec::new();
    let mut shapes: Vec<Shape> = Vec::new();
    for path in &a.images {
        let (page, _) = load_binary(path)?;
        for blob in extract_blobs(&page, params.connectivity) {
            if blob.area < a.min_area {
                continue;
            }
            let shape = shape_from_blob(&blob, a.samples).map_err(CliError::pipeline)?;
            shapes.push(shape);
            items.push(ClusterItem { image: path.clone(), blob_id: blob.id, bbox: blob.bbox, area: blob.area });
        }
    }
    let metric = match a.metric {
        MetricArg::Dtw => Metric::Dtw,
        MetricArg::DtwOrBroken => Metric::DtwOrBroken,
    };
    let distances = distance_matrix(&shapes, metric, a.starts);
    let clustering = cluster_matrix(&distances, a.threshold);
    if let Some(m) = &a.matrix {
        let ids: Vec<String> = items.iter().map(|it| format!("{}#{}", it.image.display(), it.blob_id)).collect();
        write_file(m, distance_matrix_csv(&ids, &distances))?;
    }
    let out = ClusterOutput {
        threshold: a.threshold,
        clusters: clustering.cluster_count(),
        labels: clustering.labels,
        items,
    };
    match &a.out {
        Some(p) => write_file(p, to_json(&out)),
        None => {
            print!("{}", to_json(&out));
            Ok(())
        }
    }
}

fn format_label(gs: &GlyphSet, ids: &[u32], format: LabelFormat) -> String {
    match format {
        LabelFormat::Text => gs.to_text(ids),
        LabelFormat::Ids => format_ids(ids),
    }
}

/// Stacks lines top to bottom, left aligned, with `spacing` blank rows
/// between lines and around the page.
pub fn compose_page(lines: &[&BinaryImage], spacing: usize) -> BinaryImage {
    let width = lines.iter().map(|l| l.width()).max().unwrap_or(0) + 2 * spacing;
    let height = lines.iter().map(|l| l.height() + spacing).sum::<usize>() + spacing;
    let mut page = BinaryImage::new(width.max(1), height.max(1));
    let mut top = spacing;
    for line in lines {
        for (x, y) in line.foreground_pixels() {
            page.set(spacing + x, top + y, true);
        }
        top += line.height() + spacing;
    }
    page
}

pub fn cmd_synth(a: &SynthArgs) -> CliResult<()> {
    if !(0.0..=1.0).contains(&a.noise) || !(0.0..=1.0).contains(&a.space_rate) {
        return Err(CliError::usage("--noise and --space-rate must lie in [0, 1]"));
    }
    if a.random > 0 && (a.min_len == 0 || a.min_len > a.max_len) {
        return Err(CliError::usage("need 1 <= --min-len <= --max-len"));
    }
    let gs = match &a.atlas {
        Some(_) => load_atlas(a.atlas.as_deref())?,
        None => GlyphSet::builtin_digits(a.overlap).map_err(CliError::usage)?,
    };
    if let Some(dir) = &a.save_atlas {
        gs.save_atlas(dir).map_err(|e| CliError::io(format!("{}: {e}", dir.display())))?;
    }
    let mut texts: Vec<Vec<u32>> = Vec::new();
    if a.plan || a.extras.is_some() {
        let extras = match &a.extras {
            Some(p) => read_labels(p, a.format, &gs)?,
            None => Vec::new(),
        };
        let plan = build_plan(&gs, &extras).map_err(CliError::usage)?;
        if a.plan {
            texts.extend(plan.strings);
        } else {
            texts.extend(extras);
        }
    }
    if let Some(p) = &a.texts {
        texts.extend(read_labels(p, a.format, &gs)?.into_iter().filter(|t| !t.is_empty()));
    }
    texts.extend(random_texts(&gs, a.random, a.min_len, a.max_len, a.space_rate, a.seed));
    if texts.is_empty() {
        return Err(CliError::usage("nothing to render: give --plan, --texts, --extras or --random"));
    }
    let lines = synthesize_corpus(&gs, &texts, a.noise, a.seed).map_err(CliError::usage)?;
    let mut records = Vec::with_capacity(lines.len());
    for (i, (img, label, seed)) in lines.iter().enumerate() {
        let rel = PathBuf::from("lines").join(format!("{i:05}.png"));
        write_file(&a.out.join(&rel), encode_png(&img.to_gray_printed()))?;
        records.push(ManifestRecord { image_path: rel, label_ids: label.clone(), seed: *seed });
    }
    let mut buf = Vec::new();
    write_manifest(&records, &mut buf).expect("writing to memory");
    write_file(&a.out.join("manifest.jsonl"), buf)?;
    if a.lines_per_page > 0 {
        for (p, chunk) in lines.chunks(a.lines_per_page).enumerate() {
            let imgs: Vec<&BinaryImage> = chunk.iter().map(|(img, _, _)| img).collect();
            let page = compose_page(&imgs, gs.height());
            write_file(&a.out.join(format!("pages/{p:05}.png")), encode_png(&page.to_gray_printed()))?;
            let text: String = chunk.iter().map(|(_, label, _)| format_label(&gs, label, a.format) + "\n").collect();
            write_file(&a.out.join(format!("pages/{p:05}.txt")), text)?;
        }
    }
    eprintln!("wrote {} lines to {}", records.len(), a.out.display());
    Ok(())
}

/// Loads a manifest and frames every line for training.
pub fn load_samples(
    manifest: &Path,
    gs: &GlyphSet,
    alphabet: &Alphabet,
    window: usize,
    order: ReadingOrder,
) -> CliResult<Vec<Sample>> {
    let file = std::fs::File::open(manifest).map_err(|e| CliError::io(format!("{}: {e}", manifest.display())))?;
    let records = read_manifest(BufReader::new(file)).map_err(|e| CliError::usage(format!("{}: {e}", manifest.display())))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut samples = Vec::with_capacity(records.len());
    let mut skipped = 0;
    for r in &records {
        let (img, _) = load_binary(&base.join(&r.image_path))?;
        let frames = prepare_line(&img, gs.height(), window, order)?;
        let label = alphabet
            .encode(&r.label_ids)
            .map_err(|e| CliError::usage(format!("{}: {e}", r.image_path.display())))?;
        let repeats = label.windows(2).filter(|w| w[0] == w[1]).count();
        if frames.len() < label.len() + repeats {
            skipped += 1;
            continue;
        }
        samples.push(Sample::new(&frames, label));
    }
    if skipped > 0 {
        eprintln!("skipped {skipped} lines too short for their labels");
    }
    if samples.is_empty() {
        return Err(CliError::usage(format!("{} has no usable lines", manifest.display())));
    }
    Ok(samples)
}

#[derive(Serialize)]
struct TrainSummary {
    checkpoint: PathBuf,
    samples: usize,
    parameters: usize,
    epochs: usize,
    loss_curve: Vec<f64>,
}

pub fn cmd_train(a: &TrainArgs) -> CliResult<()> {
    let cfg = PipelineConfig::load_or_default(a.config.as_deref())?;
    let window = a.window.unwrap_or(cfg.window);
    let seed = a.seed.unwrap_or(cfg.seed);
    if window.is_multiple_of(2) {
        return Err(CliError::usage("--window must be odd"));
    }
    if a.state == 0 || a.batch == 0 || a.lr.is_nan() || a.lr <= 0.0 || a.clip.is_nan() || a.clip <= 0.0 {
        return Err(CliError::usage("--state, --batch, --lr and --clip must be positive"));
    }
    let order = match a.reading_order {
        Some(crate::config::OrderArg::Rtl) => ReadingOrder::Rtl,
        Some(crate::config::OrderArg::Ltr) => ReadingOrder::Ltr,
        None => cfg.seg.reading_order,
    };
    let gs = load_atlas(a.atlas.as_deref().or(cfg.atlas.as_deref()))?;
    let alphabet = Alphabet::new(gs.symbols()).map_err(CliError::usage)?;
    let samples = load_samples(&a.manifest, &gs, &alphabet, window, order)?;
    let mut model = ToyModel::new(gs.height(), window, a.state, alphabet.classes(), seed);
    let tc = TrainConfig { epochs: a.epochs, learning_rate: a.lr, batch_size: a.batch, clip_norm: a.clip, seed };
    let result = train_toy_with(&mut model, &samples, &tc, |epoch, loss| {
        eprintln!("epoch {epoch} loss {loss:.6}");
    });
    match result {
        Ok(()) => {}
        Err(ModelError::Diverged { epoch, last_finite }) => {
            let mut keep = a.out.clone().into_os_string();
            keep.push(".last-finite");
            let keep = PathBuf::from(keep);
            write_file(&keep, last_finite.to_bytes())?;
            return Err(CliError::pipeline(format!(
                "training diverged at epoch {epoch}; last finite parameters saved to {}",
                keep.display()
            )));
        }
        Err(e) => return Err(CliError::pipeline(e)),
    }
    write_file(&a.out, model.to_bytes())?;
    let summary = TrainSummary {
        checkpoint: a.out.clone(),
        samples: samples.len(),
        parameters: model.parameter_count(),
        epochs: model.epoch,
        loss_curve: model.loss_curve.clone(),
    };
    print!("{}", to_json(&summary));
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct EvalReport {
    pub cer: f64,
    pub accuracy: f64,
    pub errors: usize,
    pub reference_symbols: usize,
    pub lines: usize,
}

pub fn score(refs: &[Vec<u32>], hyps: &[Vec<u32>], eq: &EquivalenceMap) -> CliResult<EvalReport> {
    let c = cer(refs, hyps, eq).map_err(CliError::pipeline)?;
    let errors = refs.iter().zip(hyps).map(|(r, h)| edit_distance(r, h, eq)).sum();
    Ok(EvalReport {
        cer: c,
        accuracy: 1.0 - c,
        errors,
        reference_symbols: refs.iter().map(Vec::len).sum(),
        lines: refs.len(),
    })
}

pub fn cmd_eval(a: &EvalArgs) -> CliResult<String> {
    let eq = load_eq(a.eq.as_deref())?;
    let parse = |p: &Path| -> CliResult<Vec<Vec<u32>>> {
        let text = String::from_utf8(read_file(p)?).map_err(|_| CliError::io(format!("{} is not UTF-8", p.display())))?;
        text.lines()
            .map(|l| match a.format {
                LabelFormat::Text => Ok(codepoints(l)),
                LabelFormat::Ids => parse_ids(l),
            })
            .collect()
    };
    let refs = parse(&a.refs)?;
    let hyps = parse(&a.hyps)?;
    Ok(to_json(&score(&refs, &hyps, &eq)?))
}
