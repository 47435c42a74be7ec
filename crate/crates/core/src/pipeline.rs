//! Stage driver: detection, tracking and alignment, fusion, binarization,
//! recognition and post-processing over a directory of frames, plus
//! evaluation of a run against corpus ground truth.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::binarize::{self, Binarizer, BinaryTextImage, HybridParams, Provenance, StrokeFilterBank};
use crate::detect::{self, DetectParams, TextRegion};
use crate::enhance::{self, EnhancedImage, FusionStatistic, Polarity};
use crate::error::{Error, Result};
use crate::glyphs::GlyphSet;
use crate::pnm;
use crate::postprocess::{self, Dictionary, IndexEntry, TrackText, DEFAULT_MAX_DISTANCE};
use crate::raster::{BitMask, Frame, Rect};
use crate::recognize::{self, OcrAdapterSpec, Recognition, TrackSpan};
use crate::synth::{self, GroundTruth, TruthFile};
use crate::track::{self, TextTrack, TrackParams, Tracker};

/// Fusion statistic, or `Auto` to pick minimum or maximum by polarity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum FusionMode {
    #[default]
    Auto,
    Fixed(FusionStatistic),
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "auto" => FusionMode::Auto,
            "min" => FusionMode::Fixed(FusionStatistic::Minimum),
            "mean" => FusionMode::Fixed(FusionStatistic::Mean),
            "median" => FusionMode::Fixed(FusionStatistic::Median),
            "max" => FusionMode::Fixed(FusionStatistic::Maximum),
            other => return Err(Error::Config(format!("unknown fusion {other:?}"))),
        })
    }
}

impl fmt::Display for FusionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FusionMode::Auto => "auto",
            FusionMode::Fixed(FusionStatistic::Minimum) => "min",
            FusionMode::Fixed(FusionStatistic::Mean) => "mean",
            FusionMode::Fixed(FusionStatistic::Median) => "median",
            FusionMode::Fixed(FusionStatistic::Maximum) => "max",
        })
    }
}

pub const DEFAULT_BINARIZER: Binarizer = Binarizer::Hybrid;
pub const DEFAULT_OCR_TIMEOUT: Duration = Duration::from_secs(30);

/// Parses `builtin` or `cmd:<template>`.
pub fn parse_ocr(s: &str, timeout: Duration) -> Result<Option<OcrAdapterSpec>> {
    if s == "builtin" {
        Ok(None)
    } else if let Some(t) = s.strip_prefix("cmd:") {
        OcrAdapterSpec::new(t, timeout).map(Some)
    } else {
        Err(Error::Config(format!("OCR engine must be builtin or cmd:<template>, got {s:?}")))
    }
}

/// Contents of a `--config` file. Every key is optional; `detect.*`,
/// `track.*` and `hybrid.*` may be written as dotted keys or tables.
#[derive(Clone, Debug, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub detect: Option<DetectParams>,
    pub track: Option<TrackParams>,
    pub hybrid: Option<HybridParams>,
    pub fusion: Option<String>,
    pub binarizer: Option<String>,
    pub filters: Option<PathBuf>,
    pub ocr: Option<String>,
    pub ocr_timeout: Option<f64>,
    pub dictionary: Option<PathBuf>,
    pub max_distance: Option<usize>,
    pub emit_intermediates: Option<bool>,
    pub jobs: Option<usize>,
    pub seed: Option<u64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Reads a config file. Relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = ConfigFile::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.input, &mut cfg.output, &mut cfg.filters, &mut cfg.dictionary]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub input: PathBuf,
    /// Index file; the run manifest and `debug/` go beside it.
    pub output: PathBuf,
    pub detect: DetectParams,
    pub track: TrackParams,
    pub fusion: FusionMode,
    pub binarizer: Binarizer,
    pub hybrid: HybridParams,
    /// Filter bank file; the built-in bank when absent.
    pub filters: Option<PathBuf>,
    pub ocr: Option<OcrAdapterSpec>,
    pub dictionary: Option<PathBuf>,
    pub max_distance: usize,
    pub emit_intermediates: bool,
    /// Worker threads; 0 means one per logical CPU.
    pub jobs: usize,
    /// Recorded in the manifest; no stage draws random numbers.
    pub seed: u64,
}

impl PipelineConfig {
    pub fn new(input: impl Into<PathBuf>, output: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            input: input.into(),
            output: output.into(),
            detect: DetectParams::default(),
            track: TrackParams::default(),
            fusion: FusionMode::Auto,
            binarizer: DEFAULT_BINARIZER,
            hybrid: HybridParams::default(),
            filters: None,
            ocr: None,
            dictionary: None,
            max_distance: DEFAULT_MAX_DISTANCE,
            emit_intermediates: false,
            jobs: 0,
            seed: 0,
        }
    }

    /// Overlays the keys present in `file`.
    pub fn apply(&mut self, file: &ConfigFile) -> Result<()> {
        if let Some(p) = &file.input {
            self.input = p.clone();
        }
        if let Some(p) = &file.output {
            self.output = p.clone();
        }
        if let Some(d) = file.detect {
            self.detect = d;
        }
        if let Some(t) = file.track {
            self.track = t;
        }
        if let Some(h) = file.hybrid {
            self.hybrid = h;
        }
        if let Some(f) = &file.fusion {
            self.fusion = f.parse()?;
        }
        if let Some(b) = &file.binarizer {
            self.binarizer = b.parse()?;
        }
        if let Some(p) = &file.filters {
            self.filters = Some(p.clone());
        }
        let timeout = match file.ocr_timeout {
            Some(s) if s > 0.0 && s.is_finite() => Duration::from_secs_f64(s),
            Some(s) => return Err(Error::Config(format!("ocr_timeout {s} must be positive"))),
            None => self.ocr.as_ref().map_or(DEFAULT_OCR_TIMEOUT, |o| o.timeout),
        };
        if let Some(o) = &file.ocr {
            self.ocr = parse_ocr(o, timeout)?;
        } else if let Some(o) = &mut self.ocr {
            o.timeout = timeout;
        }
        if let Some(p) = &file.dictionary {
            self.dictionary = Some(p.clone());
        }
        if let Some(m) = file.max_distance {
            self.max_distance = m;
        }
        if let Some(e) = file.emit_intermediates {
            self.emit_intermediates = e;
        }
        if let Some(j) = file.jobs {
            self.jobs = j;
        }
        if let Some(s) = file.seed {
            self.seed = s;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.detect.validate()?;
        self.track.validate()?;
        if !(self.hybrid.color_distance >= 0.0 && self.hybrid.color_distance.is_finite()) {
            return Err(Error::Config("hybrid.color_distance must be >= 0".into()));
        }
        for p in self.filters.iter().chain(&self.dictionary) {
            if !p.is_file() {
                return Err(Error::Config(format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn manifest_path(&self) -> PathBuf {
        manifest_path(&self.output)
    }

    pub fn debug_dir(&self) -> PathBuf {
        debug_dir(&self.output)
    }
}

/// `<index>.run.json`
pub fn manifest_path(index: &Path) -> PathBuf {
    let mut name = index.file_name().unwrap_or_default().to_os_string();
    name.push(".run.json");
    index.with_file_name(name)
}

/// `debug/` beside the index file.
pub fn debug_dir(index: &Path) -> PathBuf {
    index.parent().unwrap_or(Path::new("")).join("debug")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Detect,
    Track,
    Align,
    Fuse,
    Binarize,
    Recognize,
    Postprocess,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("stage serializes");
        f.write_str(s.as_str().expect("unit variant"))
    }
}

/// Failure of a pipeline run, classified for the exit-code contract.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("cannot read input: {0}")]
    Input(#[source] Error),
    #[error("invalid configuration: {0}")]
    Config(#[source] Error),
    #[error("{stage} stage failed: {source}")]
    Stage { stage: Stage, source: Error },
}

impl RunError {
    /// 2 for unreadable input, 3 for invalid configuration, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Input(_) => 2,
            RunError::Config(_) => 3,
            RunError::Stage { .. } => 1,
        }
    }
}

fn at(stage: Stage) -> impl Fn(Error) -> RunError {
    move |source| RunError::Stage { stage, source }
}

/// Resolved, ready-to-run stage settings.
#[derive(Clone, Debug)]
pub struct Stages<'a> {
    pub detect: DetectParams,
    pub track: TrackParams,
    pub fusion: FusionMode,
    pub binarizer: Binarizer,
    pub hybrid: HybridParams,
    pub bank: StrokeFilterBank,
    pub glyphs: &'a GlyphSet,
    pub ocr: Option<OcrAdapterSpec>,
    pub dictionary: Option<Dictionary>,
}

impl Stages<'static> {
    /// Defaults with the built-in bank and glyphs and no dictionary.
    pub fn builtin() -> Self {
        Stages {
            detect: DetectParams::default(),
            track: TrackParams::default(),
            fusion: FusionMode::Auto,
            binarizer: DEFAULT_BINARIZER,
            hybrid: HybridParams::default(),
            bank: StrokeFilterBank::builtin().clone(),
            glyphs: GlyphSet::builtin(),
            ocr: None,
            dictionary: None,
        }
    }
}

/// Everything produced for one track.
#[derive(Clone, Debug)]
pub struct TrackOutcome {
    pub track: TextTrack,
    /// Fused image with strokes dark.
    pub enhanced: EnhancedImage,
    pub polarity: Polarity,
    pub polarity_degenerate: bool,
    pub seed: Option<BitMask>,
    pub binary: BinaryTextImage,
    pub degraded: bool,
    pub recognition: Recognition,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    /// Detections per input frame, in frame order.
    pub detections: Vec<Vec<TextRegion>>,
    pub tracks: Vec<TrackOutcome>,
    pub index: Vec<IndexEntry>,
}

/// Runs every stage on in-memory frames, which must be sorted by index,
/// share one size and be non-empty. Parallel work uses the current rayon
/// pool; results do not depend on its size.
pub fn process_frames(frames: &[Frame], stages: &Stages) -> Result<RunOutput, RunError> {
    let (w, h) = (frames[0].width(), frames[0].height());
    let detections: Vec<Vec<TextRegion>> = frames
        .par_iter()
        .map(|f| detect::detect_frame(f, &stages.detect))
        .collect::<Result<_>>()
        .map_err(at(Stage::Detect))?;

    let mut tracker = Tracker::new(w, h, stages.track);
    for (f, dets) in frames.iter().zip(&detections) {
        tracker.associate(f.index(), dets).map_err(at(Stage::Track))?;
    }
    let tracks = tracker.finalize();

    let tracks: Vec<TrackOutcome> = tracks
        .into_par_iter()
        .map(|t| process_track(frames, t, stages))
        .collect::<Result<_, RunError>>()?;

    let items: Vec<TrackText> = tracks
        .iter()
        .map(|t| TrackText {
            recognition: t.recognition.clone(),
            rect: t.track.reference,
        })
        .collect();
    let index = postprocess::build_index(&items, stages.dictionary.as_ref());
    Ok(RunOutput {
        detections,
        tracks,
        index,
    })
}

fn process_track(frames: &[Frame], mut t: TextTrack, stages: &Stages) -> Result<TrackOutcome, RunError> {
    let alignment = track::align(frames, &t, &stages.track).map_err(at(Stage::Align))?;
    t.offsets = alignment.offsets;
    t.align_warning = alignment.warning;

    let fuse = |stat| enhance::fuse(frames, &t, stat).map_err(at(Stage::Fuse));
    let enh_min = fuse(FusionStatistic::Minimum)?;
    let enh_max = fuse(FusionStatistic::Maximum)?;
    let choice = enhance::choose_polarity(&enh_min, &enh_max);
    let fused = match stages.fusion {
        FusionMode::Auto => choice.image.clone(),
        FusionMode::Fixed(FusionStatistic::Minimum) => enh_min,
        FusionMode::Fixed(FusionStatistic::Maximum) => enh_max,
        FusionMode::Fixed(stat) => fuse(stat)?,
    };
    let enhanced = enhance::normalize_polarity(&fused, choice.polarity);

    let (binary, seed, degraded) = match stages.binarizer {
        Binarizer::Global => (binarize::global_binarize(&enhanced.gray, Polarity::Dark), None, false),
        Binarizer::Correlation => {
            let b = binarize::correlation_binarize(&enhanced.gray, &stages.bank).map_err(at(Stage::Binarize))?;
            let seed = b.mask.clone();
            (b, Some(seed), false)
        }
        Binarizer::Hybrid => {
            let o = binarize::hybrid_binarize(&enhanced, &stages.bank, &stages.hybrid).map_err(at(Stage::Binarize))?;
            (o.image, Some(o.seed), o.degraded)
        }
    };
    let binary = BinaryTextImage {
        polarity: choice.polarity,
        ..binary
    };

    let span = TrackSpan {
        track: t.id,
        first_frame: t.first_frame(),
        last_frame: t.last_frame(),
    };
    let recognition =
        recognize::recognize_track(&binary, stages.glyphs, stages.ocr.as_ref(), span).map_err(at(Stage::Recognize))?;
    Ok(TrackOutcome {
        track: t,
        enhanced,
        polarity: choice.polarity,
        polarity_degenerate: choice.degenerate,
        seed,
        binary,
        degraded,
        recognition,
    })
}

/// Per-track record in the run manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrackRecord {
    pub id: u32,
    pub reference: Rect,
    pub first_frame: u32,
    pub last_frame: u32,
    pub instances: usize,
    pub polarity: Polarity,
    pub provenance: Provenance,
    pub degraded: bool,
    pub align_warning: bool,
    pub raw_text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameDetections {
    pub frame: u32,
    pub rects: Vec<Rect>,
}

/// Written beside the index as `<index>.run.json`. Holds nothing that
/// depends on timing, thread count or the intermediates switch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub corpus_id: String,
    pub frames: usize,
    pub width: usize,
    pub height: usize,
    pub fusion: String,
    pub binarizer: Binarizer,
    pub seed: u64,
    pub detections: Vec<FrameDetections>,
    pub tracks: Vec<TrackRecord>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format("manifest", e.to_string()))
    }
}

/// Reads every frame of a directory (in parallel), sorted by index.
pub fn load_frames(dir: &Path) -> Result<Vec<Frame>> {
    if !dir.is_dir() {
        return Err(Error::io(dir, std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory")));
    }
    let listing = pnm::list_frames(dir)?;
    if listing.is_empty() {
        return Err(Error::Usage(format!("no frame_NNNNNN.ppm/pgm files in {}", dir.display())));
    }
    let frames: Vec<Frame> = listing
        .par_iter()
        .map(|(idx, path)| pnm::read_frame(path, *idx))
        .collect::<Result<_>>()?;
    let (w, h) = (frames[0].width(), frames[0].height());
    if let Some(f) = frames.iter().find(|f| (f.width(), f.height()) != (w, h)) {
        return Err(Error::InvalidRaster(format!(
            "frame {} is {}x{}, expected {w}x{h}",
            f.index(),
            f.width(),
            f.height()
        )));
    }
    Ok(frames)
}

/// Summary of a finished run.
#[derive(Clone, Debug)]
pub struct RunSummary {
    pub frames: usize,
    pub tracks: usize,
    pub entries: usize,
}

/// Runs the pipeline on disk: reads frames, writes the index, the manifest
/// and (when enabled) per-track intermediates under `debug/track_<id>/`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<RunSummary, RunError> {
    config.validate().map_err(RunError::Config)?;
    let bank = match &config.filters {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| RunError::Config(Error::io(p, e)))?;
            StrokeFilterBank::parse(&text).map_err(RunError::Config)?
        }
        None => StrokeFilterBank::builtin().clone(),
    };
    let dictionary = config
        .dictionary
        .as_deref()
        .map(|p| Dictionary::load(p, config.max_distance))
        .transpose()
        .map_err(RunError::Config)?;
    let stages = Stages {
        detect: config.detect,
        track: config.track,
        fusion: config.fusion,
        binarizer: config.binarizer,
        hybrid: config.hybrid,
        bank,
        glyphs: GlyphSet::builtin(),
        ocr: config.ocr.clone(),
        dictionary,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| RunError::Config(Error::Config(format!("worker pool: {e}"))))?;

    pool.install(|| {
        let frames = load_frames(&config.input).map_err(RunError::Input)?;
        log::info!("{} frames from {}", frames.len(), config.input.display());
        let out = process_frames(&frames, &stages)?;
        log::info!("{} tracks, {} index entries", out.tracks.len(), out.index.len());
        write_outputs(config, &frames, &out).map_err(at(Stage::Output))?;
        Ok(RunSummary {
            frames: frames.len(),
            tracks: out.tracks.len(),
            entries: out.index.len(),
        })
    })
}

fn write_outputs(config: &PipelineConfig, frames: &[Frame], out: &RunOutput) -> Result<()> {
    pnm::write_file(&config.output, &postprocess::encode_index(&out.index))?;
    let manifest = RunManifest {
        corpus_id: synth::corpus_id(frames),
        frames: frames.len(),
        width: frames[0].width(),
        height: frames[0].height(),
        fusion: config.fusion.to_string(),
        binarizer: config.binarizer,
        seed: config.seed,
        detections: frames
            .iter()
            .zip(&out.detections)
            .map(|(f, d)| FrameDetections {
                frame: f.index(),
                rects: d.iter().map(|r| r.rect).collect(),
            })
            .collect(),
        tracks: out
            .tracks
            .iter()
            .map(|t| TrackRecord {
                id: t.track.id,
                reference: t.track.reference,
                first_frame: t.track.first_frame(),
                last_frame: t.track.last_frame(),
                instances: t.track.len(),
                polarity: t.polarity,
                provenance: t.binary.provenance,
                degraded: t.degraded,
                align_warning: t.track.align_warning,
                raw_text: t.recognition.text.clone(),
            })
            .collect(),
    };
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    pnm::write_file(&config.manifest_path(), json.as_bytes())?;

    if config.emit_intermediates {
        let debug = config.debug_dir();
        for t in &out.tracks {
            let dir = debug.join(format!("track_{}", t.track.id));
            pnm::write_file(&dir.join("enhanced.pgm"), &pnm::encode_gray(&t.enhanced.gray))?;
            if let Some(seed) = &t.seed {
                pnm::write_file(&dir.join("seed.pbm"), &pnm::encode_bits(seed))?;
            }
            pnm::write_file(&dir.join("binary.pbm"), &pnm::encode_bits(&t.binary.mask))?;
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PixelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl PixelScores {
    /// Scores `predicted` against `truth`, counting only pixels inside
    /// `region`. Empty denominators score 0.
    pub fn compare(predicted: &BitMask, truth: &BitMask, region: Rect) -> Self {
        let (mut tp, mut pp, mut tt) = (0u64, 0u64, 0u64);
        for y in region.y..region.bottom() {
            for x in region.x..region.right() {
                let (p, t) = (predicted.get(x, y), truth.get(x, y));
                tp += u64::from(p && t);
                pp += u64::from(p);
                tt += u64::from(t);
            }
        }
        let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
        let (precision, recall) = (ratio(tp, pp), ratio(tp, tt));
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        PixelScores {
            precision,
            recall,
            f1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metrics {
    pub detection_recall: f64,
    pub detection_precision: f64,
    /// Present when the run's binary images were available.
    pub pixel: Option<PixelScores>,
    pub cer: f64,
    pub hypothesis: String,
    pub transcript: String,
}

/// Greedy one-to-one matching at IoU >= 0.5, best pairs first. Returns the
/// number of matched pairs.
pub fn match_rects(truth: &[Rect], predicted: &[Rect]) -> usize {
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (ti, t) in truth.iter().enumerate() {
        for (pi, p) in predicted.iter().enumerate() {
            let iou = t.iou(p);
            if iou >= 0.5 {
                pairs.push((iou, ti, pi));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0).then((a.1, a.2).cmp(&(b.1, b.2))));
    let mut t_used = vec![false; truth.len()];
    let mut p_used = vec![false; predicted.len()];
    let mut matched = 0;
    for (_, ti, pi) in pairs {
        if !t_used[ti] && !p_used[pi] {
            t_used[ti] = true;
            p_used[pi] = true;
            matched += 1;
        }
    }
    matched
}

/// Levenshtein distance over the transcript length; 0 or 1 for an empty
/// transcript.
pub fn character_error_rate(hypothesis: &str, transcript: &str) -> f64 {
    let n = transcript.chars().count();
    if n == 0 {
        return if hypothesis.is_empty() { 0.0 } else { 1.0 };
    }
    postprocess::levenshtein(hypothesis, transcript) as f64 / n as f64
}

/// The index texts in index order, joined by single spaces.
pub fn hypothesis(index: &[IndexEntry]) -> String {
    index.iter().map(|e| e.text.as_str()).collect::<Vec<_>>().join(" ")
}

/// Frame-sized union of track binaries placed at their reference rects.
pub fn place_binaries(width: usize, height: usize, binaries: &[(Rect, BitMask)]) -> BitMask {
    let mut mask = BitMask::empty(width, height);
    for (r, b) in binaries {
        for y in 0..b.height.min(r.h) {
            for x in 0..b.width.min(r.w) {
                if b.get(x, y) && r.x + x < width && r.y + y < height {
                    mask.set(r.x + x, r.y + y, true);
                }
            }
        }
    }
    mask
}

/// Scores a run against ground truth. Fails with a usage error when the
/// run was made on a different corpus.
pub fn evaluate(
    truth_file: &TruthFile,
    truth: &GroundTruth,
    manifest: &RunManifest,
    index: &[IndexEntry],
    binaries: Option<&[(Rect, BitMask)]>,
) -> Result<Metrics> {
    if truth_file.corpus_id != manifest.corpus_id {
        return Err(Error::Usage(format!(
            "run was made on corpus {} but the truth describes {}",
            manifest.corpus_id, truth_file.corpus_id
        )));
    }
    let (mut matched, mut n_truth, mut n_pred) = (0, 0, 0);
    for fd in &manifest.detections {
        let t: Vec<Rect> = truth.frame_indices.contains(&fd.frame).then_some(truth.rect).into_iter().collect();
        matched += match_rects(&t, &fd.rects);
        n_truth += t.len();
        n_pred += fd.rects.len();
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let pixel = binaries.map(|b| {
        let predicted = place_binaries(truth.mask.width, truth.mask.height, b);
        PixelScores::compare(&predicted, &truth.mask, truth.rect)
    });
    let hyp = hypothesis(index);
    Ok(Metrics {
        detection_recall: ratio(matched, n_truth),
        detection_precision: ratio(matched, n_pred),
        pixel,
        cer: character_error_rate(&hyp, &truth.transcript),
        hypothesis: hyp,
        transcript: truth.transcript.clone(),
    })
}

/// Loads the truth of a scene directory and the outputs of a run (index,
/// manifest, and `debug/track_<id>/binary.pbm` when present) and scores
/// them.
pub fn evaluate_paths(scene: &Path, index_path: &Path) -> Result<Metrics> {
    let (tf, gt) = synth::read_truth(scene)?;
    let manifest = RunManifest::load(&manifest_path(index_path))?;
    let index = postprocess::read_index(index_path)?;
    let debug = debug_dir(index_path);
    let mut binaries = Vec::new();
    for t in &manifest.tracks {
        let p = debug.join(format!("track_{}", t.id)).join("binary.pbm");
        if !p.is_file() {
            binaries.clear();
            break;
        }
        binaries.push((t.reference, pnm::read_bits(&p)?));
    }
    let have_binaries = !binaries.is_empty() || manifest.tracks.is_empty();
    evaluate(&tf, &gt, &manifest, &index, have_binaries.then_some(binaries.as_slice()))
}
