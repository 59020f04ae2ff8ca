//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use locfuse_core::eval::{self, compute_errors, dense_gt, flp_polyline, VariantReport};
use locfuse_core::geo::Legend;
use locfuse_core::synth::{self, CorridorGrid, CorruptionSpec, TrainingOptions};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::run::{self, BackendConfig, PipelineConfig, RunError};
use crate::{exchange, floorplan, io, plot};

#[derive(Debug, Parser)]
#[command(name = "locfuse", version, about = "Fuse inertial trajectories with sparse position fixes and floorplans")]
pub struct Cli {
    /// JSON settings for the subcommand (pipeline config for `run`, synth config for `synth`).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, short, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Geo-localize a trajectory and refine it with correction flows.
    Run(RunArgs),
    /// Synthetic floorplans, trajectories, fixes and training samples.
    #[command(subcommand)]
    Synth(SynthCommand),
    /// Error statistics of an estimate against ground truth.
    Eval(EvalArgs),
    /// Draw a trajectory over its floorplan.
    Plot(PlotArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BackendKind {
    None,
    Oracle,
    External,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub trajectory: Option<PathBuf>,
    #[arg(long)]
    pub fixes: Option<PathBuf>,
    /// Floorplan JSON config.
    #[arg(long)]
    pub floorplan: Option<PathBuf>,
    /// Ground-truth positions; enables error reports and the oracle backend.
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub backend: Option<BackendKind>,
    /// External flow command; `{dir}`, `{iteration}` and `{checkpoint}` are substituted.
    #[arg(long, num_args = 1.., allow_hyphen_values = true)]
    pub flow_command: Vec<String>,
    #[arg(long)]
    pub exchange_dir: Option<PathBuf>,
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub save_segments: bool,
    /// Also write `plot.png` to the output directory.
    #[arg(long)]
    pub plot: bool,
}

#[derive(Debug, Subcommand)]
pub enum SynthCommand {
    /// Render a corridor-grid floorplan (PNG + JSON).
    Plan {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value = "plan")]
        stem: String,
    },
    /// Constant-speed spline walk on the corridor grid.
    Trajectory {
        /// Ground-truth positions CSV.
        #[arg(long)]
        gt: PathBuf,
        /// Clean inertial trajectory CSV.
        #[arg(long)]
        inertial: PathBuf,
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Add heading drift and speed scale errors.
    Corrupt {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        drift_deg_per_s: Option<f64>,
        #[arg(long)]
        walk_deg_per_sqrt_s: Option<f64>,
        #[arg(long)]
        scale: Option<f64>,
    },
    /// Simulated position fixes from ground truth.
    Flp {
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        interval: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        accuracy: Option<f64>,
    },
    /// Training samples in the exchange format.
    Samples {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        floorplan: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long)]
        n: Option<usize>,
    },
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub estimate: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// Adds the fix-polyline baseline.
    #[arg(long)]
    pub fixes: Option<PathBuf>,
    #[arg(long)]
    pub json: Option<PathBuf>,
    /// Writes a PNG plot; needs `--floorplan`.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    #[arg(long)]
    pub floorplan: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub positions: PathBuf,
    #[arg(long)]
    pub floorplan: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub gt: Option<PathBuf>,
    #[arg(long)]
    pub fixes: Option<PathBuf>,
}

/// Settings for the `synth` subcommands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub grid: CorridorGrid,
    pub pixels_per_meter: f64,
    pub speed: f64,
    pub rate: f64,
    pub duration: f64,
    /// Fixed corruption; drawn from the seed when absent.
    pub corruption: Option<CorruptionSpec>,
    pub fix_interval: f64,
    pub fix_noise: f64,
    pub fix_accuracy: f64,
    pub samples_per_trajectory: usize,
    pub training: TrainingOptions,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            grid: CorridorGrid::default(),
            pixels_per_meter: 2.5,
            speed: 1.2,
            rate: 50.0,
            duration: 600.0,
            corruption: None,
            fix_interval: synth::DEFAULT_FLP_INTERVAL,
            fix_noise: synth::DEFAULT_FLP_NOISE_STD,
            fix_accuracy: synth::DEFAULT_FLP_ACCURACY,
            samples_per_trajectory: synth::DEFAULT_SAMPLES_PER_TRAJECTORY,
            training: TrainingOptions::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Input(#[from] crate::Error),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Run(e) => e.exit_code(),
            CliError::Input(_) | CliError::Invalid(_) => 2,
        }
    }
}

impl From<locfuse_core::Error> for CliError {
    fn from(e: locfuse_core::Error) -> Self {
        CliError::Input(e.into())
    }
}

fn load_config<T: Default + serde::de::DeserializeOwned>(path: &Option<PathBuf>) -> Result<T, CliError> {
    match path {
        Some(p) => Ok(io::read_json(p)?),
        None => Ok(T::default()),
    }
}

pub fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(load_config(&cli.config)?, args),
        Command::Synth(cmd) => cmd_synth(load_config(&cli.config)?, cmd, cli.seed),
        Command::Eval(args) => cmd_eval(args),
        Command::Plot(args) => cmd_plot(args),
    }
}

fn cmd_run(mut config: PipelineConfig, args: RunArgs) -> Result<(), CliError> {
    macro_rules! set {
        ($field:expr, $value:expr) => {
            if let Some(v) = $value {
                $field = v.into();
            }
        };
    }
    set!(config.trajectory, args.trajectory);
    set!(config.fixes, args.fixes);
    set!(config.floorplan, args.floorplan);
    set!(config.ground_truth, args.gt);
    set!(config.checkpoint, args.checkpoint);
    set!(config.out_dir, args.out);
    set!(config.settings.iterations, args.iterations);
    set!(config.settings.stride, args.stride);
    config.save_segments |= args.save_segments;
    if let Some(kind) = args.backend {
        config.backend = match kind {
            BackendKind::None => BackendConfig::None,
            BackendKind::Oracle => BackendConfig::Oracle,
            BackendKind::External => BackendConfig::External {
                command: Vec::new(),
                exchange_dir: None,
                timeout_s: crate::backend::DEFAULT_TIMEOUT.as_secs_f64(),
            },
        };
    }
    if let BackendConfig::External {
        command,
        exchange_dir,
        timeout_s,
    } = &mut config.backend
    {
        if !args.flow_command.is_empty() {
            *command = args.flow_command;
        }
        set!(*exchange_dir, args.exchange_dir.map(Some));
        set!(*timeout_s, args.timeout);
    }
    let summary = run::run(&config)?;
    if let Some(rows) = &summary.report.errors {
        print!("{}", eval::format_table(rows));
    }
    for it in &summary.report.iterations {
        log::info!(
            "iteration {}: {} constraints, cost {:.3} -> {:.3} in {} steps ({:?})",
            it.iteration,
            it.constraints,
            it.solver.initial_cost,
            it.solver.final_cost,
            it.solver.iterations,
            it.solver.termination
        );
    }
    if args.plot {
        let plan = floorplan::load_floorplan(config.floorplan.as_deref().unwrap_or(Path::new("")))?;
        let gt = match &config.ground_truth {
            Some(p) => dense_gt(&io::read_positions(p)?),
            None => Vec::new(),
        };
        let fixes = io::read_fixes(config.fixes.as_deref().unwrap_or(Path::new("")))?;
        let img = plot::render(&plan, summary.output.positions(), &gt, &fixes, &plot::PlotOptions::default());
        plot::save(&config.out_dir.join("plot.png"), &img)?;
    }
    Ok(())
}

fn corruption_for(config: &SynthConfig, seed: u64) -> CorruptionSpec {
    config.corruption.unwrap_or_else(|| CorruptionSpec::random(seed))
}

fn cmd_synth(config: SynthConfig, cmd: SynthCommand, seed: u64) -> Result<(), CliError> {
    match cmd {
        SynthCommand::Plan { out_dir, stem } => {
            let plan = config.grid.render(config.pixels_per_meter, seed)?;
            let path = floorplan::save_floorplan(&out_dir, &stem, &plan, &Legend::default())?;
            log::info!("wrote {}", path.display());
        }
        SynthCommand::Trajectory { gt, inertial, duration } => {
            let duration = duration.unwrap_or(config.duration);
            if !(duration > 0.0) {
                return Err(CliError::Invalid("duration must be positive".into()));
            }
            let waypoints = config.grid.random_walk(config.speed * duration + 2.0 * config.grid.spacing_m, seed)?;
            let t = synth::generate_spline_trajectory(&waypoints, config.speed, config.rate)?.truncated(duration)?;
            io::write_positions(&gt, &t.ground_truth)?;
            io::write_trajectory(&inertial, &t.inertial)?;
        }
        SynthCommand::Corrupt {
            input,
            out,
            drift_deg_per_s,
            walk_deg_per_sqrt_s,
            scale,
        } => {
            let mut spec = corruption_for(&config, seed);
            spec.seed = seed;
            if let Some(d) = drift_deg_per_s {
                spec.heading_drift_rate = d.to_radians();
            }
            if let Some(w) = walk_deg_per_sqrt_s {
                spec.drift_walk_std = w.to_radians();
            }
            if let Some(s) = scale {
                spec.scale_factor = s;
            }
            log::info!("corruption {spec:?}");
            let traj = io::read_trajectory(&input)?;
            io::write_trajectory(&out, &synth::corrupt(&traj, &spec)?)?;
        }
        SynthCommand::Flp {
            gt,
            out,
            interval,
            noise,
            accuracy,
        } => {
            let gt = io::read_positions(&gt)?;
            let fixes = synth::simulate_flp(
                &gt,
                interval.unwrap_or(config.fix_interval),
                noise.unwrap_or(config.fix_noise),
                accuracy.unwrap_or(config.fix_accuracy),
                seed,
            )?;
            io::write_fixes(&out, &fixes)?;
        }
        SynthCommand::Samples {
            trajectory,
            gt,
            floorplan: plan_path,
            out_dir,
            n,
        } => {
            let traj = io::read_trajectory(&trajectory)?;
            let gt = io::read_positions(&gt)?;
            let plan = floorplan::load_floorplan(&plan_path)?;
            let samples = synth::make_training_samples(
                &traj,
                &gt,
                &plan,
                n.unwrap_or(config.samples_per_trajectory),
                seed,
                &config.training,
            )?;
            exchange::write_training_samples(&out_dir, &samples)?;
            log::info!("wrote {} samples to {}", samples.len(), out_dir.display());
        }
    }
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let estimate = io::read_positions(&args.estimate)?;
    let gt = dense_gt(&io::read_positions(&args.gt)?);
    let mut rows = vec![VariantReport {
        name: "estimate".into(),
        report: compute_errors(&estimate, &gt)?,
    }];
    let fixes = match &args.fixes {
        Some(p) => io::read_fixes(p)?,
        None => Vec::new(),
    };
    if !fixes.is_empty() {
        let times: Vec<f64> = gt.iter().map(|g| g.0).collect();
        rows.push(VariantReport {
            name: "flp_linear".into(),
            report: compute_errors(&flp_polyline(&fixes, &times)?, &gt)?,
        });
    }
    print!("{}", eval::format_table(&rows));
    if let Some(path) = &args.json {
        io::write_json(path, &rows)?;
    }
    if let Some(path) = &args.plot {
        let plan_path = args
            .floorplan
            .as_ref()
            .ok_or_else(|| CliError::Invalid("--plot needs --floorplan".into()))?;
        let plan = floorplan::load_floorplan(plan_path)?;
        let img = plot::render(&plan, &estimate, &gt, &fixes, &plot::PlotOptions::default());
        plot::save(path, &img)?;
    }
    Ok(())
}

fn cmd_plot(args: PlotArgs) -> Result<(), CliError> {
    let plan = floorplan::load_floorplan(&args.floorplan)?;
    let positions = io::read_positions(&args.positions)?;
    let gt = match &args.gt {
        Some(p) => dense_gt(&io::read_positions(p)?),
        None => Vec::new(),
    };
    let fixes = match &args.fixes {
        Some(p) => io::read_fixes(p)?,
        None => Vec::new(),
    };
    let img = plot::render(&plan, &positions, &gt, &fixes, &plot::PlotOptions::default());
    plot::save(&args.out, &img)?;
    Ok(())
}
