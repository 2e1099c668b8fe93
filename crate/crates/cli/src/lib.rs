//! `uiforge` command line: convert, denoise, taskgen, evaluate and stats over
//! JSON Lines corpora.
//!
//! Exit codes: 0 on success, 1 when input, output or configuration cannot be
//! read or written, 2 when records are malformed or fail conversion or
//! evaluation.

mod cmd;
pub mod config;
pub mod io;

use std::fmt;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use uiforge_core::{RuleMask, Source};

pub use cmd::{convert, denoise, evaluate, stats, taskgen};

#[derive(Debug, Parser)]
#[command(name = "uiforge", version, about = "Build and score GUI agent training data")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores). Output does not depend on it.
    #[arg(long, short = 'j', global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Convert source-native episodes into unified episodes.
    Convert(ConvertArgs),
    /// Remove noisy elements or steps and write an audit report.
    Denoise(DenoiseArgs),
    /// Generate training samples from screens, episodes and Q&A records.
    Taskgen(TaskgenArgs),
    /// Score predictions against gold episodes or grounding cases.
    Evaluate(EvaluateArgs),
    /// Count samples per task kind.
    Stats(StatsArgs),
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Source episodes, one JSON object per line.
    #[arg(long, short)]
    pub input: PathBuf,
    /// Unified episodes are written here.
    #[arg(long, short)]
    pub output: PathBuf,
    /// Source of records that do not name one.
    #[arg(long)]
    pub source: Option<Source>,
    /// Mapping manifest replacing the builtin one for its source (repeatable).
    #[arg(long, value_name = "TOML")]
    pub manifest: Vec<PathBuf>,
    /// Per-record conversion errors as JSON Lines.
    #[arg(long)]
    pub errors: Option<PathBuf>,
    #[arg(long)]
    pub tap_threshold: Option<f64>,
    #[arg(long)]
    pub no_invert_scroll: bool,
}

#[derive(Debug, Args)]
pub struct DenoiseArgs {
    /// Screen records (element corpus) or unified episodes.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Audit report as JSON (default: OUTPUT with `.audit.json` appended).
    #[arg(long)]
    pub audit: Option<PathBuf>,
    /// Per-element or per-step verdicts as JSON Lines.
    #[arg(long)]
    pub verdicts: Option<PathBuf>,
    /// Element rules to apply, e.g. `1,2,3,5`.
    #[arg(long)]
    pub rules: Option<RuleMask>,
    /// Screenshot directory; enables the blank-region checks.
    #[arg(long)]
    pub images: Option<PathBuf>,
    /// OCR command run as `CMD <region.png>`; enables the invisible-text check.
    #[arg(long, env = "UIFORGE_OCR_CMD")]
    pub ocr_cmd: Option<String>,
    /// Reasoning keyword table (`phrase => action, ...` per line).
    #[arg(long)]
    pub keywords: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TaskgenArgs {
    /// Screen records, unified episodes and captioning/qa records, mixed freely.
    #[arg(long, short)]
    pub input: PathBuf,
    #[arg(long, short)]
    pub output: PathBuf,
    /// Prompt template file (default: builtin templates).
    #[arg(long)]
    pub templates: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Prior actions shown in agent prompts.
    #[arg(long)]
    pub history_window: Option<usize>,
    #[arg(long)]
    pub no_grounding: bool,
    #[arg(long)]
    pub no_referring: bool,
    #[arg(long)]
    pub no_widget_listing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EvalMode {
    /// Gold unified episodes; predictions keyed by `<episode>#<step>`.
    Agent,
    /// Gold `{id, screenshot, target_bbox}` cases; predictions hold a point.
    Grounding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClickRuleArg {
    BboxContainment,
    BboxThenRadius,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub gold: PathBuf,
    /// `{step_id, output}` per line.
    #[arg(long)]
    pub predictions: PathBuf,
    #[arg(long, value_enum, default_value_t = EvalMode::Agent)]
    pub mode: EvalMode,
    #[arg(long)]
    pub report_json: Option<PathBuf>,
    #[arg(long)]
    pub report_md: Option<PathBuf>,
    /// Per-step outcomes as JSON Lines.
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub click_rule: Option<ClickRuleArg>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Fuzzy text matching at this similarity (0-100) instead of exact.
    #[arg(long)]
    pub fuzzy_text: Option<f64>,
    #[arg(long)]
    pub compare_swipe_distance: bool,
    #[arg(long)]
    pub ignore_answer: bool,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Training samples, one per line.
    #[arg(long, short)]
    pub input: PathBuf,
}

/// A failed command: exit code plus message.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: 1,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: 2,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Runs a parsed command line, writing the summary to `out` and diagnostics
/// to `err`. Returns the process exit code.
pub fn run(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> i32 {
    let result = config::PipelineConfig::load(cli.config.as_deref()).and_then(|cfg| {
        let jobs = cfg.jobs(cli.jobs);
        match &cli.command {
            Command::Convert(a) => convert::run(a, &cfg, jobs, out, err),
            Command::Denoise(a) => denoise::run(a, &cfg, jobs, out, err),
            Command::Taskgen(a) => taskgen::run(a, &cfg, jobs, out, err),
            Command::Evaluate(a) => evaluate::run(a, &cfg, jobs, out, err),
            Command::Stats(a) => stats::run(a, out, err),
        }
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code
        }
    }
}
