use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use crn_harness::frame::FrameStrategy;
use crn_harness::row::render;
use crn_harness::validate::{validate, ValidateOptions};
use crn_harness::{ExperimentKind, ExperimentSpec, Format, HarnessError, Result};
use crn_share::ergodic_solver::{train_offline, Strategy, TrainingSetup};
use crn_share::frame_solver::{SolveStatus, SolverOptions};
use crn_share::netmodel::{ChannelModel, Nsi, SystemConfig};

#[derive(Parser)]
#[command(name = "crn-share", version, about = "Relay-assisted spectrum sharing with CTMC ad-hoc traffic")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Experiment {
    Frame,
    Ergodic,
    Varsigma,
    SensingError,
    Validate,
}

impl From<Experiment> for ExperimentKind {
    fn from(e: Experiment) -> Self {
        match e {
            Experiment::Frame => ExperimentKind::FrameSweep,
            Experiment::Ergodic => ExperimentKind::ErgodicSweep,
            Experiment::Varsigma => ExperimentKind::VarsigmaSweep,
            Experiment::SensingError => ExperimentKind::SensingErrorSweep,
            Experiment::Validate => ExperimentKind::Validate,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameMode {
    Proposed,
    RelayFree,
    SensingFree,
}

#[derive(Clone, Copy, ValueEnum)]
enum TrainMode {
    TwoSensing,
    Phase1Only,
    SensingFree,
    RelayFree,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one frame-level problem and print the solver report as JSON.
    SolveFrame {
        /// System configuration JSON; the frame reference setting by default.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Network state JSON; the reference state by default.
        #[arg(long)]
        nsi: Option<PathBuf>,
        /// Overrides the rate target, bits/s/Hz per sub-channel.
        #[arg(long)]
        efficiency: Option<f64>,
        #[arg(long, value_enum, default_value = "proposed")]
        strategy: FrameMode,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train long-term multipliers and print the policy as JSON.
    Train {
        /// System configuration JSON; the ergodic reference setting by default.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        efficiency: Option<f64>,
        #[arg(long, value_enum, default_value = "two-sensing")]
        strategy: TrainMode,
        /// Network states in the training sample.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment and write its result rows.
    Run {
        #[arg(long, value_enum)]
        experiment: Experiment,
        /// Experiment specification JSON; the built-in default by default.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        frames: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: OutputFormat,
    },
    /// Run the oracle checks; exits with status 1 if any fails.
    Validate {
        #[arg(long)]
        seed: Option<u64>,
        /// Paths per Monte Carlo comparison.
        #[arg(long)]
        frames: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<OutputFormat>,
        /// Perturbs the traffic rate seen by the closed forms; the checks must fail.
        #[arg(long, hide = true)]
        mutate_phi: bool,
    },
    /// Print the default experiment specification.
    EmitConfigTemplate {
        #[arg(long, value_enum, default_value = "frame")]
        experiment: Experiment,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| HarnessError::BadInput(format!("{}: {e}", path.display())))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => Ok(fs::write(path, text)?),
        None => {
            let mut stdout = io::stdout().lock();
            let newline = if text.ends_with('\n') { "" } else { "\n" };
            match write!(stdout, "{text}{newline}").and_then(|_| stdout.flush()) {
                Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(e.into()),
                _ => Ok(()),
            }
        }
    }
}

fn load_config(path: Option<&Path>, default: SystemConfig, efficiency: Option<f64>) -> Result<SystemConfig> {
    let cfg = match path {
        Some(p) => SystemConfig::from_json(&read(p)?)?,
        None => default,
    };
    let cfg = match efficiency {
        Some(e) if !(e.is_finite() && e >= 0.0) => return Err(HarnessError::BadInput(format!("invalid efficiency {e}"))),
        Some(e) => cfg.with_spectral_efficiency(e),
        None => cfg,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run_validation(
    seed: Option<u64>,
    frames: Option<u64>,
    out: Option<PathBuf>,
    format: Option<OutputFormat>,
    mutate_phi: bool,
) -> Result<()> {
    let mut opts = ValidateOptions {
        mutate_phi,
        ..ValidateOptions::default()
    };
    if let Some(s) = seed {
        opts.seed = s;
    }
    if let Some(f) = frames {
        if f < 2 {
            return Err(HarnessError::BadInput("at least two paths are needed".into()));
        }
        opts.mc_paths = f;
    }
    let report = validate(&opts)?;
    let text = match format {
        Some(OutputFormat::Json) => serde_json::to_string_pretty(&report).expect("report serializes"),
        Some(OutputFormat::Csv) | None => report.to_string(),
    };
    emit(&text, out.as_deref())?;
    report.into_result().map(|_| ())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::SolveFrame {
            config,
            nsi,
            efficiency,
            strategy,
            out,
        } => {
            let cfg = load_config(config.as_deref(), SystemConfig::frame_example(0.3), efficiency)?;
            let nsi = match nsi {
                Some(p) => serde_json::from_str::<Nsi>(&read(&p)?).map_err(|e| HarnessError::BadInput(e.to_string()))?,
                None => Nsi::frame_example(),
            };
            nsi.validate(&cfg)?;
            let strategy = match strategy {
                FrameMode::Proposed => FrameStrategy::Proposed,
                FrameMode::RelayFree => FrameStrategy::RelayFree,
                FrameMode::SensingFree => FrameStrategy::SensingFree,
            };
            let report = strategy.solve(&nsi, &cfg, &SolverOptions::default())?;
            emit(&report.to_json(), out.as_deref())?;
            if report.status == SolveStatus::Infeasible {
                return Err(HarnessError::Infeasible("the rate target cannot be met".into()));
            }
            Ok(())
        }
        Command::Train {
            config,
            efficiency,
            strategy,
            samples,
            seed,
            out,
        } => {
            let cfg = load_config(config.as_deref(), SystemConfig::ergodic_example(1.7), efficiency)?;
            if samples == 0 {
                return Err(HarnessError::BadInput("samples must be at least 1".into()));
            }
            let strategy = match strategy {
                TrainMode::TwoSensing => Strategy::TwoSensing,
                TrainMode::Phase1Only => Strategy::Phase1Only,
                TrainMode::SensingFree => Strategy::SensingFree,
                TrainMode::RelayFree => Strategy::RelayFree,
            };
            let setup = TrainingSetup {
                strategy,
                channel: ChannelModel::default(),
                seed,
                samples,
            };
            let policy = train_offline(&cfg, &setup, &SolverOptions::default())?;
            emit(&policy.to_json(), out.as_deref())?;
            if !policy.is_feasible() {
                return Err(HarnessError::Infeasible("the average rate target cannot be met".into()));
            }
            Ok(())
        }
        Command::Run {
            experiment,
            config,
            seed,
            frames,
            out,
            format,
        } => {
            let kind = ExperimentKind::from(experiment);
            if kind == ExperimentKind::Validate {
                return run_validation(seed, frames.map(|f| f as u64), out, Some(format), false);
            }
            let mut spec = match config {
                Some(p) => ExperimentSpec::from_json(&read(&p)?)?,
                None => ExperimentSpec::default_for(kind),
            };
            if spec.kind != kind {
                return Err(HarnessError::BadInput(format!(
                    "the specification describes a {} experiment",
                    spec.kind.label()
                )));
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(f) = frames {
                spec.frames = f;
            }
            spec.validate()?;
            let rows = crn_harness::run(&spec)?;
            let format = match format {
                OutputFormat::Csv => Format::Csv,
                OutputFormat::Json => Format::Json,
            };
            let out = out.or(spec.output.clone());
            emit(&render(&rows, format)?, out.as_deref())
        }
        Command::Validate {
            seed,
            frames,
            out,
            format,
            mutate_phi,
        } => run_validation(seed, frames, out, format, mutate_phi),
        Command::EmitConfigTemplate { experiment, out } => {
            emit(&ExperimentSpec::default_for(experiment.into()).to_json(), out.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
