//! `uavplan`: calibrate, price, evaluate, search, decide and simulate UAV
//! detection missions from the command line.

mod commands;
mod report;

use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use report::{RunContext, RunReport};

/// Directory holding a default `profiles.json` and `tables/`.
pub const PROFILE_DIR_ENV: &str = "UAVPLAN_PROFILE_DIR";

#[derive(Debug, Parser)]
#[command(name = "uavplan", version, about = "Energy-aware flight planning for UAV object detection")]
pub struct Cli {
    /// Write the machine-readable run report to this path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Leave the wall-clock duration out of the report.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit camera or UAV coefficients from logs.
    #[command(subcommand)]
    Calibrate(Calibrate),
    /// Energy breakdown of one flight and the altitude-range analysis.
    Energy(EnergyArgs),
    /// Precision and recall of a detection trace against annotated tracks.
    Metrics(MetricsArgs),
    /// Search the lowest sampling rate that reaches the best recall.
    SearchRate(SearchArgs),
    /// Recommend model, altitude, speed and sampling rate.
    Decide(DecideArgs),
    /// Generate synthetic traces, logs and performance tables.
    Simulate(SimulateArgs),
    /// Energy savings of a recommended flight against measured alternatives.
    Compare(CompareArgs),
}

#[derive(Debug, Subcommand)]
pub enum Calibrate {
    /// Fit theta from a footprint log (columns h_m, l_m).
    Camera {
        #[arg(long)]
        log: PathBuf,
    },
    /// Fit alpha from an endurance log (columns h_m, v_mps, t_s, E_wh).
    Uav {
        #[arg(long)]
        log: PathBuf,
        /// Camera coefficient; read from the profiles when omitted.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        profiles: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
pub struct EnergyArgs {
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub model: String,
    /// Altitude, m.
    #[arg(long)]
    pub alt: f64,
    /// Speed, m/s.
    #[arg(long)]
    pub speed: f64,
    /// Sampling rate, Hz.
    #[arg(long)]
    pub rate: f64,
    /// Altitude grid for the range analysis.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    /// Energy density target for the equal-energy altitude, Wh/km².
    #[arg(long)]
    pub p_target: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MetricsArgs {
    #[arg(long)]
    pub trace: PathBuf,
    #[arg(long)]
    pub truth: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    /// Re-sample the trace at this rate before evaluating.
    #[arg(long)]
    pub rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Starting rate, Hz.
    #[arg(long)]
    pub r1: Option<f64>,
    /// Distance to the farthest detected object, m; with --speed gives r1.
    #[arg(long)]
    pub d_far: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    #[arg(long)]
    pub r_limit: Option<f64>,
    /// Stored trace to re-sample (with --truth).
    #[arg(long, requires = "truth")]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long, default_value_t = 0.5)]
    pub iou: f64,
    /// Scene for a simulated oracle (with --detectability, --model, --alt, --speed).
    #[arg(long, conflicts_with = "trace")]
    pub scene: Option<PathBuf>,
    #[arg(long)]
    pub detectability: Option<PathBuf>,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub alt: Option<f64>,
    #[arg(long)]
    pub speed: Option<f64>,
    /// Number of scene seeds averaged per probe.
    #[arg(long, default_value_t = 10)]
    pub seeds: u64,
}

#[derive(Debug, Args)]
pub struct DecideArgs {
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    /// Directory of performance tables (*.json).
    #[arg(long)]
    pub tables: Option<PathBuf>,
    #[arg(long)]
    pub perf_min: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    /// Altitude selection range in grid steps.
    #[arg(long)]
    pub n: Option<usize>,
    /// Also run both exhaustive references and report pruning regret.
    #[arg(long)]
    pub audit: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub scene: PathBuf,
    #[arg(long)]
    pub detectability: PathBuf,
    #[arg(long)]
    pub profiles: Option<PathBuf>,
    #[arg(long)]
    pub out_dir: PathBuf,
    /// Models to simulate; defaults to every model with detectability entries.
    #[arg(long, value_delimiter = ',')]
    pub model: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub altitudes: Option<Vec<f64>>,
    /// Rate grid for performance tables; no tables are built without it.
    #[arg(long, value_delimiter = ',')]
    pub rates: Option<Vec<f64>>,
    #[arg(long, default_value_t = 30)]
    pub seeds: u64,
    #[arg(long, default_value_t = 5.0)]
    pub benchmark_speed: f64,
    /// One flight as ALT,SPEED,RATE; writes trace.json and truth.json.
    #[arg(long, value_delimiter = ',')]
    pub flight: Option<Vec<f64>>,
    /// Speeds for the endurance log.
    #[arg(long, value_delimiter = ',')]
    pub speeds: Option<Vec<f64>>,
    /// Relative Gaussian noise on the footprint and endurance logs.
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
    #[arg(long, default_value_t = 1)]
    pub log_seed: u64,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long = "input", required = true)]
    pub inputs: Vec<PathBuf>,
}

/// Result of a command: structured output, human-readable text, and whether
/// the task turned out to be infeasible.
pub struct Outcome {
    pub output: serde_json::Value,
    pub text: String,
    pub infeasible: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let started = Instant::now();
    let mut ctx = RunContext::default();
    let result = commands::run(&cli.command, &mut ctx);
    let (status, output, code) = match result {
        Ok(outcome) => {
            let _ = writeln!(std::io::stdout(), "{}", outcome.text);
            if outcome.infeasible {
                ("infeasible", outcome.output, 1)
            } else {
                ("ok", outcome.output, 0)
            }
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ("error", serde_json::json!({ "error": format!("{err:#}") }), 2)
        }
    };
    let report = RunReport {
        command: std::env::args().skip(1).collect(),
        status,
        inputs: ctx.inputs,
        output,
        warnings: ctx.warnings,
        duration_ms: (!cli.deterministic).then_some(started.elapsed().as_secs_f64() * 1e3),
    };
    if let Some(path) = &cli.out {
        let text = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
        if let Err(e) = std::fs::write(path, text) {
            eprintln!("error: cli: cannot write {}: {e}", path.display());
            return ExitCode::from(2);
        }
    }
    ExitCode::from(code)
}
