//! The two-pass refinement loop: geo-localize against fixes, refine with
//! correction flows, then re-solve against the refined history and refine
//! again.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{compute_errors, flp_polyline, VariantReport};
use crate::geo::{FloorplanRaster, GeoRegistration, Vec2};
use crate::optimizer::{self, initial_alignment, CorrectionSolution, FlpFix, OptimizerConfig};
use crate::raster::{self, FlowField, SegmentSample};
use crate::trajectory::{integrate, subsample_constraints, CorrectionParams, InertialTrajectory, PositionSeries};

/// Produces one correction flow per segment sample.
pub trait FlowBackend {
    fn predict(&mut self, iteration: usize, samples: &[SegmentSample], estimate: &PositionSeries) -> Result<Vec<FlowField>>;
}

/// Flows computed from known reference positions.
pub struct OracleFlow {
    reference: PositionSeries,
    registration: GeoRegistration,
}

impl OracleFlow {
    pub fn new(reference: PositionSeries, registration: GeoRegistration) -> Self {
        Self {
            reference,
            registration,
        }
    }
}

impl FlowBackend for OracleFlow {
    fn predict(&mut self, _iteration: usize, samples: &[SegmentSample], estimate: &PositionSeries) -> Result<Vec<FlowField>> {
        let reference: Vec<Vec2> = estimate.timestamps.iter().map(|t| self.reference.position_at(*t)).collect();
        Ok(samples
            .iter()
            .map(|s| raster::oracle_flow(s, &reference, &estimate.positions, &self.registration))
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineSettings {
    pub optimizer: OptimizerConfig,
    pub iterations: usize,
    /// Frames between self-constraints in later iterations.
    pub stride: usize,
    /// Accuracy radius (m) of the self-constraints.
    pub self_radius: f64,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        Self {
            optimizer: OptimizerConfig::default(),
            iterations: 2,
            stride: 200,
            self_radius: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationResult {
    pub constraints: Vec<FlpFix>,
    pub solution: CorrectionSolution,
    pub optimized: PositionSeries,
    /// Flow-refined history, when a backend is present.
    pub refined: Option<PositionSeries>,
    pub segments: usize,
}

impl IterationResult {
    pub fn output(&self) -> &PositionSeries {
        self.refined.as_ref().unwrap_or(&self.optimized)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    /// Rigidly aligned, otherwise uncorrected trajectory.
    pub rigid: PositionSeries,
    pub iterations: Vec<IterationResult>,
}

impl PipelineOutput {
    pub fn positions(&self) -> &PositionSeries {
        self.iterations.last().map(IterationResult::output).unwrap_or(&self.rigid)
    }
}

/// Applies the backend's flows to `estimate` and stitches the segments.
pub fn refine_with_flow(
    estimate: &PositionSeries,
    plan: &FloorplanRaster,
    backend: &mut dyn FlowBackend,
    iteration: usize,
) -> Result<(PositionSeries, usize)> {
    let samples = raster::build_samples(estimate, plan)?;
    let flows = backend.predict(iteration, &samples, estimate)?;
    if flows.len() != samples.len() {
        return Err(Error::Backend(alloc::format!(
            "expected {} flows, got {}",
            samples.len(),
            flows.len()
        )));
    }
    let corrections = samples
        .iter()
        .zip(&flows)
        .map(|(s, f)| raster::apply_flow(s, f, &plan.registration))
        .collect::<Result<Vec<_>>>()?;
    let stitched = raster::stitch(&estimate.timestamps, &samples, &corrections)?;
    Ok((estimate.displaced(&stitched)?, samples.len()))
}

pub fn run_pipeline(
    traj: &InertialTrajectory,
    fixes: &[FlpFix],
    plan: &FloorplanRaster,
    settings: &PipelineSettings,
    mut backend: Option<&mut dyn FlowBackend>,
) -> Result<PipelineOutput> {
    if settings.iterations == 0 || settings.stride == 0 {
        return Err(Error::InvalidArgument("iterations and stride must be at least 1".into()));
    }
    let cfg = &settings.optimizer;
    let identity = CorrectionParams::identity(traj, cfg.scale_interval, cfg.angle_interval);
    let raw = integrate(traj, &identity)?;
    let rigid_tf = initial_alignment(&raw, fixes)?;
    let mut init = CorrectionParams::rigid(
        traj,
        cfg.scale_interval,
        cfg.angle_interval,
        rigid_tf.rotation,
        rigid_tf.translation,
    );
    let rigid = integrate(traj, &init)?;

    let mut constraints = fixes.to_vec();
    let mut iterations = Vec::with_capacity(settings.iterations);
    for it in 0..settings.iterations {
        let solution = if it == 0 {
            optimizer::geolocalize(traj, &constraints, cfg)?
        } else {
            optimizer::solve(traj, &constraints, cfg, &init)?
        };
        let optimized = integrate(traj, &solution.params)?;
        let (refined, segments) = match backend.as_deref_mut() {
            Some(b) => {
                let (r, n) = refine_with_flow(&optimized, plan, b, it)?;
                (Some(r), n)
            }
            None => (None, 0),
        };
        init = solution.params.clone();
        let result = IterationResult {
            constraints: core::mem::take(&mut constraints),
            solution,
            optimized,
            refined,
            segments,
        };
        constraints = subsample_constraints(result.output(), settings.stride, settings.self_radius)?;
        iterations.push(result);
    }
    Ok(PipelineOutput { rigid, iterations })
}

/// Error reports for each variant the pipeline output contains: the rigid
/// alignment, the fix polyline, the first optimization, the first flow
/// refinement and the final result.
pub fn compare_baselines(output: &PipelineOutput, fixes: &[FlpFix], gt: &[(f64, Vec2)]) -> Result<Vec<VariantReport>> {
    let mut rows = Vec::new();
    let mut push = |name: &str, est: &PositionSeries| -> Result<()> {
        rows.push(VariantReport {
            name: String::from(name),
            report: compute_errors(est, gt)?,
        });
        Ok(())
    };
    push("uncorrected", &output.rigid)?;
    let gt_times: Vec<f64> = gt.iter().map(|g| g.0).collect();
    push("flp_linear", &flp_polyline(fixes, &gt_times)?)?;
    if let Some(first) = output.iterations.first() {
        push("optimized", &first.optimized)?;
        if let Some(r) = &first.refined {
            push("optimized_flow", r)?;
        }
    }
    if output.iterations.len() > 1 {
        push("full", output.positions())?;
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{self, CorridorGrid};

    fn scenario() -> (synth::SyntheticTrajectory, FloorplanRaster) {
        let grid = CorridorGrid::default();
        let plan = grid.render(2.5, 1).unwrap();
        let wps = grid.random_walk(200.0, 3).unwrap();
        let t = synth::generate_spline_trajectory(&wps, 1.2, 10.0).unwrap().truncated(150.0).unwrap();
        (t, plan)
    }

    #[test]
    fn identity_scenario_all_variants_near_zero() {
        let (t, plan) = scenario();
        let fixes = synth::simulate_flp(&t.ground_truth, 30.0, 0.0, 0.0, 0).unwrap();
        let mut oracle = OracleFlow::new(t.ground_truth.clone(), plan.registration);
        let out = run_pipeline(&t.inertial, &fixes, &plan, &PipelineSettings::default(), Some(&mut oracle)).unwrap();
        let gt = crate::eval::dense_gt(&t.ground_truth);
        let rows = compare_baselines(&out, &fixes, &gt).unwrap();
        assert_eq!(rows.len(), 5);
        for r in &rows[2..] {
            assert!(r.report.mean < 0.05, "{}: {}", r.name, r.report.mean);
        }
        assert!(rows[0].report.mean < 0.05);
    }

    #[test]
    fn iteration_two_uses_strided_self_constraints() {
        let (t, plan) = scenario();
        let fixes = synth::simulate_flp(&t.ground_truth, 30.0, 0.0, 0.0, 0).unwrap();
        let settings = PipelineSettings {
            stride: 50,
            ..PipelineSettings::default()
        };
        let out = run_pipeline(&t.inertial, &fixes, &plan, &settings, None).unwrap();
        assert_eq!(out.iterations.len(), 2);
        let n = t.inertial.len();
        assert_eq!(out.iterations[1].constraints.len(), (n - 1) / 50 + 1);
        assert!(out.iterations[1].constraints.iter().all(|c| c.accuracy == 2.0));
        assert!(out.iterations[0].refined.is_none());
    }

    #[test]
    fn zero_iterations_rejected() {
        let (t, plan) = scenario();
        let fixes = synth::simulate_flp(&t.ground_truth, 30.0, 0.0, 0.0, 0).unwrap();
        let settings = PipelineSettings {
            iterations: 0,
            ..PipelineSettings::default()
        };
        assert!(run_pipeline(&t.inertial, &fixes, &plan, &settings, None).is_err());
        assert!(run_pipeline(&t.inertial, &[], &plan, &PipelineSettings::default(), None).is_err());
    }
}
