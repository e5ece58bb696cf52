use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use cxr_curate::lung::{ClassicalParams, MaskBackend};
use cxr_curate::metrics::Aggregate;
use cxr_curate::pipeline::{self, exit_code, PipelineError, RunConfig, StageOutcome};
use cxr_curate::splits::Grouping;
use cxr_curate::triage::DEFAULT_RULES_TOML;

/// Curate chest-radiograph DICOM collections into a standardized image dataset.
#[derive(Parser, Debug)]
#[command(name = "cxrcurate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Scan the input root and write manifest.csv and skipped.csv.
    Ingest,
    /// Assign views; exclude lateral and abdominal images, quarantine unknowns.
    Triage,
    /// Normalize, segment, mask and crop frontal images into the output frame.
    Preprocess,
    /// Write the cross-validation fold file.
    Split,
    /// Score prediction files against the fold file.
    Evaluate,
    /// Write report.txt and report.json.
    Report,
    /// Every stage in order (evaluate only when predictions are given).
    Run,
    /// Rule table operations.
    Rules {
        #[command(subcommand)]
        action: RulesAction,
    },
    /// Print the file format reference.
    Schema,
}

#[derive(Subcommand, Debug)]
enum RulesAction {
    /// Print the built-in rule table.
    Dump,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BackendKind {
    Classical,
    External,
    Neural,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum AggregateArg {
    Mean,
    Pooled,
}

/// Flags override the config file field of the same name.
#[derive(Args, Debug, Default)]
struct Overrides {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    input: Option<PathBuf>,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Rule table file (default: built-in).
    #[arg(long, global = true)]
    rules: Option<PathBuf>,
    /// Labels CSV: patient_id,sop_instance_uid,covid_label.
    #[arg(long, global = true)]
    labels: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    mask_backend: Option<BackendKind>,
    /// Directory of <image_uid>.png masks (external backend).
    #[arg(long, global = true)]
    mask_dir: Option<PathBuf>,
    /// Segmentation model file (neural backend).
    #[arg(long, global = true)]
    mask_model: Option<PathBuf>,
    /// Probability threshold for the neural backend.
    #[arg(long, global = true)]
    mask_threshold: Option<f32>,
    #[arg(long, global = true)]
    frame_width: Option<usize>,
    #[arg(long, global = true)]
    frame_height: Option<usize>,
    /// Pad to preserve aspect ratio instead of stretching.
    #[arg(long, global = true)]
    letterbox: bool,
    #[arg(long, global = true)]
    window_lo: Option<f64>,
    #[arg(long, global = true)]
    window_hi: Option<f64>,
    /// Pixels added around the mask bounding box before cropping.
    #[arg(long, global = true)]
    margin: Option<usize>,
    #[arg(short, long, global = true)]
    k: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// One fold group per image instead of per patient.
    #[arg(long, global = true)]
    ungrouped: bool,
    /// Decision threshold on prediction scores.
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true, value_enum)]
    aggregate: Option<AggregateArg>,
    /// Prediction CSV (repeatable).
    #[arg(long = "predictions", global = true)]
    predictions: Vec<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    follow_symlinks: bool,
}

impl Overrides {
    fn apply(self, mut c: RunConfig) -> anyhow::Result<RunConfig> {
        macro_rules! set {
            ($($field:ident => $target:ident),*) => {
                $(if let Some(v) = self.$field { c.$target = v; })*
            };
        }
        set!(frame_width => frame_width, frame_height => frame_height, window_lo => window_lo,
             window_hi => window_hi, margin => crop_margin, k => k, seed => seed,
             threshold => threshold, workers => workers);
        if self.input.is_some() {
            c.input_root = self.input;
        }
        if self.output.is_some() {
            c.output_root = self.output;
        }
        if self.rules.is_some() {
            c.rules = self.rules;
        }
        if self.labels.is_some() {
            c.labels = self.labels;
        }
        c.letterbox |= self.letterbox;
        c.follow_symlinks |= self.follow_symlinks;
        if self.ungrouped {
            c.grouping = Grouping::Image;
        }
        if let Some(a) = self.aggregate {
            c.aggregate = match a {
                AggregateArg::Mean => Aggregate::Mean,
                AggregateArg::Pooled => Aggregate::Pooled,
            };
        }
        if !self.predictions.is_empty() {
            c.predictions = self.predictions;
        }
        c.mask = match (self.mask_backend, c.mask) {
            (Some(BackendKind::Classical), MaskBackend::Classical(p)) => MaskBackend::Classical(p),
            (Some(BackendKind::Classical), _) => MaskBackend::Classical(ClassicalParams::default()),
            (Some(BackendKind::External), prev) => {
                let dir = match (self.mask_dir, prev) {
                    (Some(d), _) | (None, MaskBackend::External { dir: d }) => d,
                    _ => bail!("--mask-backend external needs --mask-dir"),
                };
                MaskBackend::External { dir }
            }
            (Some(BackendKind::Neural), prev) => {
                let (model, threshold) = match (self.mask_model, prev) {
                    (Some(m), MaskBackend::Neural { threshold, .. }) => (m, threshold),
                    (Some(m), _) => (m, cxr_curate::lung::DEFAULT_THRESHOLD),
                    (None, MaskBackend::Neural { model, threshold }) => (model, threshold),
                    _ => bail!("--mask-backend neural needs --mask-model"),
                };
                MaskBackend::Neural { model, threshold: self.mask_threshold.unwrap_or(threshold) }
            }
            (None, MaskBackend::External { dir }) => MaskBackend::External { dir: self.mask_dir.unwrap_or(dir) },
            (None, MaskBackend::Neural { model, threshold }) => MaskBackend::Neural {
                model: self.mask_model.unwrap_or(model),
                threshold: self.mask_threshold.unwrap_or(threshold),
            },
            (None, prev) => prev,
        };
        Ok(c)
    }
}

fn load_config(o: Overrides) -> anyhow::Result<RunConfig> {
    let base = match &o.config {
        Some(path) => RunConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        None => RunConfig::default(),
    };
    o.apply(base)
}

fn print_outcomes(result: &Result<Vec<StageOutcome>, PipelineError>) {
    match result {
        Ok(outcomes) => {
            for o in outcomes {
                eprintln!("{}: {} processed, {} warnings", o.stage, o.processed, o.warnings.len());
                for w in &o.warnings {
                    eprintln!("  warning: {w}");
                }
            }
        }
        Err(e) => eprintln!("error: {e}"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let stage: fn(&RunConfig) -> Result<StageOutcome, PipelineError> = match cli.command {
        Command::Rules { action: RulesAction::Dump } => {
            print!("{DEFAULT_RULES_TOML}");
            return ExitCode::SUCCESS;
        }
        Command::Schema => {
            print!("{}", pipeline::schema_text());
            return ExitCode::SUCCESS;
        }
        Command::Ingest => pipeline::ingest,
        Command::Triage => pipeline::triage,
        Command::Preprocess => pipeline::preprocess,
        Command::Split => pipeline::split,
        Command::Evaluate => pipeline::evaluate,
        Command::Report => pipeline::report,
        Command::Run => {
            let result = load_config(cli.overrides).map_err(|e| PipelineError::Config(format!("{e:#}")));
            let result = result.and_then(|c| pipeline::run(&c));
            print_outcomes(&result);
            return ExitCode::from(exit_code(&result) as u8);
        }
    };
    let result = load_config(cli.overrides)
        .map_err(|e| PipelineError::Config(format!("{e:#}")))
        .and_then(|c| stage(&c).map(|o| vec![o]));
    print_outcomes(&result);
    ExitCode::from(exit_code(&result) as u8)
}
