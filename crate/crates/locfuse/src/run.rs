//! File-driven pipeline runs.

use std::path::{Path, PathBuf};
use std::time::Duration;

use locfuse_core::eval::{dense_gt, VariantReport};
use locfuse_core::optimizer::SolveReport;
use locfuse_core::pipeline::{self, FlowBackend, OracleFlow, PipelineOutput, PipelineSettings};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{ExternalFlow, Recording};
use crate::error::Error;
use crate::{floorplan, io};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    None,
    /// Flows from the supplied ground truth.
    Oracle,
    External {
        #[serde(default)]
        command: Vec<String>,
        /// Defaults to `<out_dir>/segments`.
        #[serde(default)]
        exchange_dir: Option<PathBuf>,
        #[serde(default = "default_timeout")]
        timeout_s: f64,
    },
}

fn default_timeout() -> f64 {
    crate::backend::DEFAULT_TIMEOUT.as_secs_f64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub trajectory: Option<PathBuf>,
    pub fixes: Option<PathBuf>,
    /// Floorplan JSON config; the image path is resolved from it.
    pub floorplan: Option<PathBuf>,
    pub ground_truth: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub settings: PipelineSettings,
    pub backend: BackendConfig,
    /// Also save oracle inputs and flows under `segments/`.
    pub save_segments: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            trajectory: None,
            fixes: None,
            floorplan: None,
            ground_truth: None,
            checkpoint: None,
            out_dir: PathBuf::from("out"),
            settings: PipelineSettings::default(),
            backend: BackendConfig::None,
            save_segments: false,
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("input: {0}")]
    Input(#[from] Error),
    #[error("solver: {0}")]
    Solver(locfuse_core::Error),
    #[error("flow backend: {0}")]
    Backend(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Input(_) => 2,
            RunError::Solver(_) => 3,
            RunError::Backend(_) => 4,
        }
    }
}

impl From<locfuse_core::Error> for RunError {
    fn from(e: locfuse_core::Error) -> Self {
        match e {
            locfuse_core::Error::Backend(msg) => RunError::Backend(msg),
            other => RunError::Solver(other),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationReport {
    pub iteration: usize,
    pub constraints: usize,
    pub segments: usize,
    pub solver: SolveReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub frames: usize,
    pub fixes: usize,
    pub backend: BackendConfig,
    pub settings: PipelineSettings,
    pub iterations: Vec<IterationReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors: Option<Vec<VariantReport>>,
}

pub struct RunSummary {
    pub output: PipelineOutput,
    pub report: RunReport,
}

fn required<'a>(path: &'a Option<PathBuf>, what: &str) -> Result<&'a Path, RunError> {
    match path {
        Some(p) => Ok(p),
        None => Err(RunError::Input(Error::Format {
            path: PathBuf::from(what),
            message: "no path given".into(),
        })),
    }
}

/// Loads inputs, runs the pipeline and writes `positions.csv`,
/// `solver_iter<n>.json` and `report.json` under `out_dir`.
pub fn run(config: &PipelineConfig) -> Result<RunSummary, RunError> {
    let traj = io::read_trajectory(required(&config.trajectory, "trajectory")?)?;
    let fixes = io::read_fixes(required(&config.fixes, "fixes")?)?;
    let plan = floorplan::load_floorplan(required(&config.floorplan, "floorplan")?)?;
    let gt = match &config.ground_truth {
        Some(p) => Some(io::read_positions(p)?),
        None => None,
    };
    config.settings.optimizer.validate().map_err(RunError::Solver)?;

    let segments_dir = config.out_dir.join("segments");
    let mut backend: Option<Box<dyn FlowBackend>> = match &config.backend {
        BackendConfig::None => None,
        BackendConfig::Oracle => {
            let gt = gt
                .clone()
                .ok_or_else(|| RunError::Backend("the oracle backend needs ground truth".into()))?;
            let oracle = OracleFlow::new(gt, plan.registration);
            if config.save_segments {
                Some(Box::new(Recording {
                    inner: oracle,
                    root: segments_dir.clone(),
                }))
            } else {
                Some(Box::new(oracle))
            }
        }
        BackendConfig::External {
            command,
            exchange_dir,
            timeout_s,
        } => {
            let mut ext = ExternalFlow::new(exchange_dir.clone().unwrap_or(segments_dir.clone()));
            ext.command = command.clone();
            ext.checkpoint = config.checkpoint.clone();
            ext.timeout = Duration::from_secs_f64(timeout_s.max(0.0));
            Some(Box::new(ext))
        }
    };

    let output = pipeline::run_pipeline(&traj, &fixes, &plan, &config.settings, backend.as_mut().map(|b| &mut **b as &mut dyn FlowBackend))?;

    let iterations: Vec<IterationReport> = output
        .iterations
        .iter()
        .enumerate()
        .map(|(i, it)| IterationReport {
            iteration: i + 1,
            constraints: it.constraints.len(),
            segments: it.segments,
            solver: it.solution.report.clone(),
        })
        .collect();
    let errors = match &gt {
        Some(gt) => Some(pipeline::compare_baselines(&output, &fixes, &dense_gt(gt))?),
        None => None,
    };
    let report = RunReport {
        frames: traj.len(),
        fixes: fixes.len(),
        backend: config.backend.clone(),
        settings: config.settings.clone(),
        iterations,
        errors,
    };

    let out = &config.out_dir;
    io::write_positions(&out.join("positions.csv"), output.positions())?;
    for it in &report.iterations {
        io::write_json(&out.join(format!("solver_iter{}.json", it.iteration)), it)?;
    }
    io::write_json(&out.join("report.json"), &report)?;
    Ok(RunSummary { output, report })
}
