//! `vidocr`: caption extraction from frame directories, plus corpus
//! synthesis, filter training and evaluation.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};

use vidocr_core::binarize::{self, Binarizer, StrokeFilterBank};
use vidocr_core::corpus;
use vidocr_core::glyphs::GlyphSet;
use vidocr_core::pipeline::{self, ConfigFile, FusionMode, PipelineConfig, RunError};
use vidocr_core::pnm;
use vidocr_core::synth::{self, Background};
use vidocr_core::Error;

#[derive(Parser, Debug)]
#[command(name = "vidocr", version, about = "Extract overlay caption text from video frame sequences")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the pipeline on a directory of frame_NNNNNN.pgm/ppm files.
    Run(RunArgs),
    /// Generate a synthetic scene, or the whole standard corpus.
    Synth(SynthArgs),
    /// Train a stroke filter bank and write it as a .sfb file.
    TrainFilters(TrainArgs),
    /// Score a run against a synthetic scene's ground truth.
    Eval(EvalArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Frame directory.
    #[arg(short, long)]
    input: Option<PathBuf>,
    /// Index file (JSON Lines). The run manifest and debug/ go beside it.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// TOML file with any of the run settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (0 = one per logical CPU).
    #[arg(long)]
    jobs: Option<usize>,
    /// Write enhanced, seed and binary images under debug/track_<id>/.
    #[arg(long)]
    emit_intermediates: bool,
    /// auto, min, mean, median or max.
    #[arg(long)]
    fusion: Option<String>,
    /// correlation, global or hybrid.
    #[arg(long)]
    binarizer: Option<String>,
    /// Stroke filter bank file.
    #[arg(long)]
    filters: Option<PathBuf>,
    /// `builtin` or `cmd:<command with {in}>`.
    #[arg(long)]
    ocr: Option<String>,
    /// Seconds before an external OCR command is killed.
    #[arg(long)]
    ocr_timeout: Option<f64>,
    /// Word list for correction.
    #[arg(long)]
    dictionary: Option<PathBuf>,
    #[arg(long)]
    max_distance: Option<usize>,
    /// Recorded in the run manifest.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackgroundArg {
    Blocks,
    Solid,
    Gradient,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Output directory.
    #[arg(short, long)]
    output: PathBuf,
    /// Write every standard scene plus dictionary.txt instead of one scene.
    #[arg(long, conflicts_with = "text")]
    corpus: bool,
    /// Caption text (A-Z, 0-9, space).
    #[arg(long, default_value = "NEWS AT 9")]
    text: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    frames: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Number of 3x3 box blur passes.
    #[arg(long, default_value_t = 0)]
    blur: usize,
    #[arg(long, value_enum, default_value = "blocks")]
    background: BackgroundArg,
    /// Light text on a dark background.
    #[arg(long)]
    invert: bool,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Output .sfb file.
    #[arg(short, long)]
    output: PathBuf,
    /// Directory with one subdirectory of PGM patches per direction
    /// (horizontal, vertical, left-diagonal, right-diagonal). Without it,
    /// strokes are marked automatically on the built-in glyphs.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Kernel size (odd).
    #[arg(short, long, default_value_t = 5)]
    k: usize,
    /// Response threshold for all four filters.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Scene directory (or its truth.json).
    #[arg(long)]
    truth: PathBuf,
    /// Index file of the run; its manifest and debug/ are read from beside it.
    #[arg(long)]
    index: PathBuf,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // clap's own usage errors exit 2, which here means unreadable input
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(3);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Synth(a) => synth_cmd(a).map_err(Failure::from),
        Command::TrainFilters(a) => train(a).map_err(Failure::from),
        Command::Eval(a) => eval(a).map_err(Failure::from),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("vidocr: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

struct Failure {
    code: u8,
    message: String,
}

impl From<RunError> for Failure {
    fn from(e: RunError) -> Self {
        Failure {
            code: e.exit_code() as u8,
            message: e.to_string(),
        }
    }
}

/// Outside `run`: unreadable input is 2, bad settings are 3, anything else 1.
impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } | Error::Format { .. } | Error::InvalidRaster(_) => 2,
            Error::Config(_) | Error::Usage(_) | Error::Charset(_) | Error::Layout(_) | Error::Training(_) => 3,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn config_error(e: Error) -> Failure {
    RunError::Config(e).into()
}

fn run(a: RunArgs) -> Result<(), Failure> {
    let file = match &a.config {
        Some(p) => ConfigFile::load(p).map_err(config_error)?,
        None => ConfigFile::default(),
    };
    let input = a.input.clone().or_else(|| file.input.clone());
    let output = a.output.clone().or_else(|| file.output.clone());
    let (Some(input), Some(output)) = (input, output) else {
        return Err(config_error(Error::Config(
            "both an input directory and an output path are required".into(),
        )));
    };
    let mut cfg = PipelineConfig::new(input, output);
    cfg.apply(&file).map_err(config_error)?;
    apply_flags(&mut cfg, &a).map_err(config_error)?;
    let summary = pipeline::run_pipeline(&cfg)?;
    log::info!(
        "{} frames, {} tracks, {} entries -> {}",
        summary.frames,
        summary.tracks,
        summary.entries,
        cfg.output.display()
    );
    Ok(())
}

fn apply_flags(cfg: &mut PipelineConfig, a: &RunArgs) -> vidocr_core::Result<()> {
    if let Some(j) = a.jobs {
        cfg.jobs = j;
    }
    if a.emit_intermediates {
        cfg.emit_intermediates = true;
    }
    if let Some(f) = &a.fusion {
        cfg.fusion = f.parse::<FusionMode>()?;
    }
    if let Some(b) = &a.binarizer {
        cfg.binarizer = b.parse::<Binarizer>()?;
    }
    if let Some(p) = &a.filters {
        cfg.filters = Some(p.clone());
    }
    let timeout = match a.ocr_timeout {
        Some(s) if s > 0.0 && s.is_finite() => Some(Duration::from_secs_f64(s)),
        Some(s) => return Err(Error::Config(format!("--ocr-timeout {s} must be positive"))),
        None => None,
    };
    if let Some(o) = &a.ocr {
        let t = timeout
            .or(cfg.ocr.as_ref().map(|o| o.timeout))
            .unwrap_or(pipeline::DEFAULT_OCR_TIMEOUT);
        cfg.ocr = pipeline::parse_ocr(o, t)?;
    } else if let (Some(t), Some(o)) = (timeout, cfg.ocr.as_mut()) {
        o.timeout = t;
    }
    if let Some(p) = &a.dictionary {
        cfg.dictionary = Some(p.clone());
    }
    if let Some(m) = a.max_distance {
        cfg.max_distance = m;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    Ok(())
}

fn synth_cmd(a: SynthArgs) -> vidocr_core::Result<()> {
    if a.corpus {
        let names = corpus::write_standard_corpus(&a.output)?;
        log::info!("wrote {} scenes to {}", names.len(), a.output.display());
        return Ok(());
    }
    if a.text.len() > corpus::MAX_TRANSCRIPT {
        return Err(Error::Layout(format!(
            "text is {} characters; at most {} fit the scene",
            a.text.len(),
            corpus::MAX_TRANSCRIPT
        )));
    }
    let glyphs = GlyphSet::builtin();
    if let Some(c) = a.text.chars().find(|&c| !glyphs.contains(c)) {
        return Err(Error::Charset(c));
    }
    let mut spec = corpus::scene(&a.text, a.seed, a.frames, a.noise, a.blur);
    spec.invert = a.invert;
    spec.background = match a.background {
        BackgroundArg::Blocks => corpus::BLOCKS,
        BackgroundArg::Solid => Background::Solid { level: 200 },
        BackgroundArg::Gradient => Background::ScrollGradient {
            lo: 150,
            hi: 230,
            period: 96,
            speed: 3,
        },
    };
    let (frames, truth) = synth::synth_sequence(&spec, glyphs)?;
    synth::write_scene(&a.output, &frames, &truth)
}

fn train(a: TrainArgs) -> vidocr_core::Result<()> {
    let bank = match &a.samples {
        Some(dir) => {
            if !dir.is_dir() {
                return Err(Error::Io {
                    path: dir.clone(),
                    source: std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
                });
            }
            let samples = binarize::read_samples(dir)?;
            log::info!("{} samples from {}", samples.len(), dir.display());
            binarize::train_filters(&samples, a.k)?
        }
        None => binarize::glyph_bank(GlyphSet::builtin(), a.k)?,
    };
    let bank: StrokeFilterBank = match a.threshold {
        Some(t) => bank.with_thresholds([t; 4])?,
        None => bank,
    };
    pnm::write_file(&a.output, bank.to_text().as_bytes())
}

fn eval(a: EvalArgs) -> vidocr_core::Result<()> {
    let metrics = pipeline::evaluate_paths(&a.truth, &a.index)?;
    println!("{}", serde_json::to_string_pretty(&metrics).expect("metrics serialize"));
    Ok(())
}
