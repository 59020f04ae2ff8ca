//! Geo-localization of an inertial trajectory against sparse position fixes.
//!
//! The cost stacks three residual blocks over the knot corrections:
//!
//! * position fixes, a hinge `max(‖P_f − P_fix‖ − r_fix, 0)` that is zero inside
//!   the reported accuracy disk;
//! * scale regularization `√w1 · max(Δs, 1/Δs)` per scale knot;
//! * heading smoothness, first differences weighted by `√w2` and second
//!   differences by `√(w2 · gain)`.
//!
//! The sum of squared residuals is minimized with a bounded
//! Levenberg-Marquardt loop (see [`lm`]).

mod align;
mod lm;
mod problem;

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Vec2;
use crate::trajectory::{nearest_index, CorrectionParams, InertialTrajectory, PositionSeries};

pub use align::{initial_alignment, RigidTransform};
pub use lm::Termination;
pub use problem::{CorrectionProblem, CostBreakdown};

/// A timestamped absolute position with its reported accuracy radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlpFix {
    pub t: f64,
    pub position: Vec2,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub w1: f64,
    pub w2: f64,
    pub second_order_gain: f64,
    pub scale_interval: f64,
    pub angle_interval: f64,
    pub scale_lower_bound: f64,
    pub scale_upper_bound: f64,
    pub max_iterations: usize,
    pub convergence_tol: f64,
    pub initial_damping: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            w1: 10.0,
            w2: 200.0,
            second_order_gain: 1.5,
            scale_interval: crate::trajectory::DEFAULT_SCALE_INTERVAL,
            angle_interval: crate::trajectory::DEFAULT_ANGLE_INTERVAL,
            scale_lower_bound: 0.1,
            scale_upper_bound: 10.0,
            max_iterations: 500,
            convergence_tol: 1e-8,
            initial_damping: 1e-3,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.w1 >= 0.0
            && self.w2 >= 0.0
            && self.second_order_gain >= 0.0
            && self.scale_interval > 0.0
            && self.angle_interval > 0.0
            && self.scale_lower_bound > 0.0
            && self.scale_upper_bound > self.scale_lower_bound
            && self.convergence_tol >= 0.0
            && self.initial_damping > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("invalid optimizer configuration".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub initial_cost: f64,
    pub final_cost: f64,
    pub initial_breakdown: CostBreakdown,
    pub final_breakdown: CostBreakdown,
    pub converged: bool,
    pub termination: Termination,
    pub fixes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSolution {
    pub params: CorrectionParams,
    pub report: SolveReport,
}

/// Frame index matched to each fix (temporally nearest, ties to the earlier frame).
pub fn match_fixes(timestamps: &[f64], fixes: &[FlpFix]) -> Vec<usize> {
    fixes.iter().map(|f| nearest_index(timestamps, f.t)).collect()
}

/// Hinge residual for one fix: the distance beyond the accuracy radius.
pub fn hinge(distance: f64, accuracy: f64) -> f64 {
    (distance - accuracy).max(0.0)
}

/// One residual per fix: `max(‖P_f − P_fix‖ − r_fix, 0)`.
pub fn flp_residuals(positions: &PositionSeries, fixes: &[FlpFix]) -> Vec<f64> {
    if positions.is_empty() {
        return Vec::new();
    }
    match_fixes(&positions.timestamps, fixes)
        .into_iter()
        .zip(fixes)
        .map(|(frame, fix)| hinge(positions.positions[frame].distance(fix.position), fix.accuracy))
        .collect()
}

/// `√w1 · max(Δs, 1/Δs)` per scale knot.
pub fn scale_residuals(params: &CorrectionParams, w1: f64) -> Result<Vec<f64>> {
    if let Some(s) = params.scale_knots.iter().find(|s| !(**s > 0.0)) {
        return Err(Error::InvalidArgument(alloc::format!("scale correction must be positive, got {s}")));
    }
    let k = libm::sqrt(w1);
    Ok(params.scale_knots.iter().map(|&s| k * s.max(1.0 / s)).collect())
}

/// First-difference residuals followed by second-difference residuals of the
/// heading knots.
pub fn angle_residuals(params: &CorrectionParams, w2: f64, gain: f64) -> Vec<f64> {
    let a = &params.angle_knots;
    let k1 = libm::sqrt(w2);
    let k2 = libm::sqrt(w2 * gain);
    let first = a.windows(2).map(|w| k1 * (w[1] - w[0]));
    let second = a.windows(3).map(|w| k2 * (w[2] - 2.0 * w[1] + w[0]));
    first.chain(second).collect()
}

/// Minimizes the stacked cost starting from `init`.
pub fn solve(
    traj: &InertialTrajectory,
    fixes: &[FlpFix],
    config: &OptimizerConfig,
    init: &CorrectionParams,
) -> Result<CorrectionSolution> {
    if fixes.is_empty() {
        return Err(Error::NoFixes);
    }
    config.validate()?;
    if !init.covers(traj) {
        return Err(Error::InvalidArgument("initial parameters do not cover the trajectory".into()));
    }
    if init.scale_knots.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::InvalidArgument("initial scale corrections must be positive".into()));
    }
    if fixes.iter().any(|f| !(f.accuracy >= 0.0)) {
        return Err(Error::InvalidArgument("fix accuracy must be non-negative".into()));
    }
    let problem = CorrectionProblem::new(traj, fixes, config, init.scale_knots.len(), init.angle_knots.len());
    let mut x0 = problem.pack(init);
    problem.project(&mut x0);
    let initial_breakdown = problem.breakdown(&x0);
    let outcome = lm::minimize(&problem, x0, config);
    let final_breakdown = problem.breakdown(&outcome.x);
    let params = problem.unpack(&outcome.x);
    Ok(CorrectionSolution {
        params,
        report: SolveReport {
            iterations: outcome.iterations,
            initial_cost: initial_breakdown.total(),
            final_cost: final_breakdown.total(),
            initial_breakdown,
            final_breakdown,
            converged: outcome.termination.converged(),
            termination: outcome.termination,
            fixes: fixes.len(),
        },
    })
}

/// Rigid initialization followed by [`solve`] over a growing time horizon.
///
/// Large accumulated heading drift makes the full problem multi-modal (the
/// heading knots can settle a full turn away from the truth). The fixes are
/// therefore admitted in time order: the first stage is seeded by the
/// Procrustes fit of the first two fixes, every later stage starts from the
/// previous solution with one more fix, and the last stage is the full
/// problem.
pub fn geolocalize(traj: &InertialTrajectory, fixes: &[FlpFix], config: &OptimizerConfig) -> Result<CorrectionSolution> {
    if fixes.is_empty() {
        return Err(Error::NoFixes);
    }
    let mut sorted = fixes.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let raw = crate::trajectory::integrate(
        traj,
        &CorrectionParams::identity(traj, config.scale_interval, config.angle_interval),
    )?;
    let first = sorted.len().min(2);
    let rigid = initial_alignment(&raw, &sorted[..first])?;
    let mut params = CorrectionParams::rigid(
        traj,
        config.scale_interval,
        config.angle_interval,
        rigid.rotation,
        rigid.translation,
    );
    let initial = {
        let problem = CorrectionProblem::new(traj, fixes, config, params.scale_knots.len(), params.angle_knots.len());
        problem.breakdown(&problem.pack(&params))
    };
    let mut iterations = 0;
    for k in first..sorted.len() {
        let stage = solve(traj, &sorted[..k], config, &params)?;
        iterations += stage.report.iterations;
        params = stage.params;
    }
    let mut last = solve(traj, &sorted, config, &params)?;
    last.report.iterations += iterations;
    last.report.initial_cost = initial.total();
    last.report.initial_breakdown = initial;
    Ok(last)
}
