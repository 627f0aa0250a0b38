//! `skillsight`: synthetic data, training, evaluation, gaze analytics and
//! power estimates from one binary.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 when the configuration
//! or command line is invalid.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use skillsight::synth::TaskKind;

#[derive(Parser)]
#[command(name = "skillsight", version, about = "Gaze-based skill assessment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic synthetic dataset.
    Synth(SynthArgs),
    /// Train the video+gaze teacher.
    TrainTeacher(TrainTeacherArgs),
    /// Train the gaze-only student, distilling from a teacher checkpoint.
    TrainStudent(TrainStudentArgs),
    /// Evaluate a teacher or student checkpoint with the 10-clip protocol.
    Eval(EvalArgs),
    /// Per-group gaze statistics and histograms.
    Analyze(AnalyzeArgs),
    /// Analytic power estimate for one or more architectures.
    Power(PowerArgs),
}

#[derive(Args)]
pub struct SynthArgs {
    #[arg(long, value_parser = parse_task)]
    pub task: TaskKind,
    /// Recordings per class.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// JSON list of per-class profiles replacing the task defaults.
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub subtasks: usize,
    /// Training-label noise; defaults to the task's own setting.
    #[arg(long)]
    pub label_noise: Option<f64>,
    /// Skip writing frames (gaze-only dataset).
    #[arg(long)]
    pub no_frames: bool,
}

#[derive(Args)]
pub struct TrainTeacherArgs {
    /// TOML or JSON experiment config.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainStudentArgs {
    /// Teacher checkpoint; not needed with --no-distill.
    #[arg(long)]
    pub teacher: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub no_distill: bool,
    #[arg(long)]
    pub no_action: bool,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::Test)]
    pub split: SplitArg,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// ROI definitions; defaults to `rois.json` in the data directory.
    #[arg(long)]
    pub roi_spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = GroupBy::Gt)]
    pub group_by: GroupBy,
    /// Checkpoint providing predictions for `--group-by pred`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = SplitArg::All)]
    pub split: SplitArg,
    #[arg(long)]
    pub dispersion_deg: Option<f64>,
    #[arg(long)]
    pub min_fixation_s: Option<f64>,
}

#[derive(Args)]
pub struct PowerArgs {
    /// Architecture JSON file, or `builtin:student-full` /
    /// `builtin:timesformer-base`. Repeatable.
    #[arg(long, required = true)]
    pub arch: Vec<String>,
    /// Comma-separated sensors; give one list for all architectures or one
    /// per `--arch`.
    #[arg(long, default_value = "eye")]
    pub sensors: Vec<String>,
    /// Seconds between inferences.
    #[arg(long, default_value_t = skillsight::power::DEFAULT_INTERVAL_S)]
    pub interval: f64,
    /// Experiment config whose `power` section overrides the constants.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Class count for the builtin architectures.
    #[arg(long, default_value_t = 2)]
    pub k: u64,
    /// Report path (`.json`, CSV written beside it) or a directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Val,
    Test,
    All,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupBy {
    Gt,
    Pred,
}

fn parse_task(s: &str) -> Result<TaskKind, String> {
    s.parse().map_err(|e: skillsight::Error| e.to_string())
}

/// Failure classes mapped to exit codes.
#[derive(Debug)]
pub enum Failure {
    /// Invalid configuration or arguments, reported before any compute.
    Schema(String),
    Runtime(String),
}

impl From<skillsight::Error> for Failure {
    fn from(e: skillsight::Error) -> Self {
        match e {
            skillsight::Error::Config(m) => Failure::Schema(m),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let argv: Vec<String> = std::env::args().collect();
    let result = match cli.command {
        Command::Synth(a) => commands::synth(a, &argv),
        Command::TrainTeacher(a) => commands::train_teacher(a, &argv),
        Command::TrainStudent(a) => commands::train_student(a, &argv),
        Command::Eval(a) => commands::eval(a, &argv),
        Command::Analyze(a) => commands::analyze(a, &argv),
        Command::Power(a) => commands::power(a, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Schema(m)) => {
            eprintln!("error: invalid configuration: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
