//! Inertial trajectories and the knot-based correction model applied to them.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Vec2;
use crate::optimizer::FlpFix;

pub const DEFAULT_SCALE_INTERVAL: f64 = 100.0;
pub const DEFAULT_ANGLE_INTERVAL: f64 = 20.0;

/// Per-frame relative motion: displacement magnitude (meters per frame) and
/// motion direction (radians).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InertialTrajectory {
    timestamps: Vec<f64>,
    speeds: Vec<f64>,
    headings: Vec<f64>,
}

impl InertialTrajectory {
    pub fn new(timestamps: Vec<f64>, speeds: Vec<f64>, headings: Vec<f64>) -> Result<Self> {
        if timestamps.is_empty() {
            return Err(Error::Empty("trajectory"));
        }
        for (what, len) in [("speeds", speeds.len()), ("headings", headings.len())] {
            if len != timestamps.len() {
                return Err(Error::LengthMismatch {
                    what,
                    left: len,
                    right: timestamps.len(),
                });
            }
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument(alloc::format!(
                "timestamps not strictly increasing at frame {}",
                i + 1
            )));
        }
        if let Some(i) = speeds.iter().position(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(alloc::format!("invalid speed at frame {i}")));
        }
        if headings.iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidArgument("non-finite heading".into()));
        }
        Ok(Self {
            timestamps,
            speeds,
            headings,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn speeds(&self) -> &[f64] {
        &self.speeds
    }

    pub fn headings(&self) -> &[f64] {
        &self.headings
    }

    pub fn start_time(&self) -> f64 {
        self.timestamps[0]
    }

    pub fn duration(&self) -> f64 {
        self.timestamps[self.len() - 1] - self.timestamps[0]
    }

    pub fn path_length(&self) -> f64 {
        self.speeds.iter().sum()
    }

    /// Temporally nearest frame; ties go to the earlier frame.
    pub fn nearest_frame(&self, t: f64) -> usize {
        nearest_index(&self.timestamps, t)
    }
}

pub(crate) fn nearest_index(timestamps: &[f64], t: f64) -> usize {
    let idx = timestamps.partition_point(|&x| x < t);
    if idx == 0 {
        return 0;
    }
    if idx >= timestamps.len() {
        return timestamps.len() - 1;
    }
    if t - timestamps[idx - 1] <= timestamps[idx] - t {
        idx - 1
    } else {
        idx
    }
}

/// Timestamped world positions (meters).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionSeries {
    pub timestamps: Vec<f64>,
    pub positions: Vec<Vec2>,
}

impl PositionSeries {
    pub fn new(timestamps: Vec<f64>, positions: Vec<Vec2>) -> Result<Self> {
        if timestamps.len() != positions.len() {
            return Err(Error::LengthMismatch {
                what: "positions",
                left: positions.len(),
                right: timestamps.len(),
            });
        }
        Ok(Self { timestamps, positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Linear interpolation in time, clamped at both ends.
    pub fn position_at(&self, t: f64) -> Vec2 {
        let ts = &self.timestamps;
        let idx = ts.partition_point(|&x| x < t);
        if idx == 0 {
            return self.positions[0];
        }
        if idx >= ts.len() {
            return self.positions[ts.len() - 1];
        }
        let a = (t - ts[idx - 1]) / (ts[idx] - ts[idx - 1]);
        self.positions[idx - 1].lerp(self.positions[idx], a)
    }

    /// Adds per-frame displacements.
    pub fn displaced(&self, corrections: &[Vec2]) -> Result<Self> {
        if corrections.len() != self.len() {
            return Err(Error::LengthMismatch {
                what: "corrections",
                left: corrections.len(),
                right: self.len(),
            });
        }
        Ok(Self {
            timestamps: self.timestamps.clone(),
            positions: self.positions.iter().zip(corrections).map(|(p, c)| *p + *c).collect(),
        })
    }
}

/// Knot corrections: a scale factor every `scale_interval` seconds, a heading
/// offset every `angle_interval` seconds (both linearly interpolated), and the
/// displacement of the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionParams {
    pub scale_knots: Vec<f64>,
    pub angle_knots: Vec<f64>,
    pub start_offset: Vec2,
    pub scale_interval: f64,
    pub angle_interval: f64,
}

pub fn knot_count(duration: f64, interval: f64) -> usize {
    libm::ceil(duration / interval) as usize + 1
}

impl CorrectionParams {
    /// The identity correction covering `traj`.
    pub fn identity(traj: &InertialTrajectory, scale_interval: f64, angle_interval: f64) -> Self {
        let d = traj.duration();
        Self {
            scale_knots: alloc::vec![1.0; knot_count(d, scale_interval)],
            angle_knots: alloc::vec![0.0; knot_count(d, angle_interval)],
            start_offset: Vec2::ZERO,
            scale_interval,
            angle_interval,
        }
    }

    /// Rigid correction: constant rotation, unit scale, given start.
    pub fn rigid(traj: &InertialTrajectory, scale_interval: f64, angle_interval: f64, rotation: f64, start: Vec2) -> Self {
        let mut p = Self::identity(traj, scale_interval, angle_interval);
        p.angle_knots.iter_mut().for_each(|a| *a = rotation);
        p.start_offset = start;
        p
    }

    pub fn covers(&self, traj: &InertialTrajectory) -> bool {
        let d = traj.duration();
        self.scale_interval > 0.0
            && self.angle_interval > 0.0
            && !self.scale_knots.is_empty()
            && !self.angle_knots.is_empty()
            && (self.scale_knots.len() - 1) as f64 * self.scale_interval >= d - 1e-9 * self.scale_interval
            && (self.angle_knots.len() - 1) as f64 * self.angle_interval >= d - 1e-9 * self.angle_interval
    }

    pub fn scale_at(&self, t: f64) -> f64 {
        let s = KnotWeight::locate(self.scale_knots.len(), self.scale_interval, t);
        s.eval(&self.scale_knots)
    }

    pub fn angle_at(&self, t: f64) -> f64 {
        let s = KnotWeight::locate(self.angle_knots.len(), self.angle_interval, t);
        s.eval(&self.angle_knots)
    }
}

/// Linear-interpolation stencil into a knot array: value = (1−frac)·k[lo] + frac·k[hi].
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct KnotWeight {
    pub lo: usize,
    pub hi: usize,
    pub frac: f64,
}

impl KnotWeight {
    pub fn locate(len: usize, interval: f64, t: f64) -> Self {
        debug_assert!(len > 0);
        let last = len - 1;
        let u = (t / interval).max(0.0);
        let k = libm::floor(u);
        if k >= last as f64 {
            return Self {
                lo: last,
                hi: last,
                frac: 0.0,
            };
        }
        let lo = k as usize;
        Self {
            lo,
            hi: lo + 1,
            frac: u - k,
        }
    }

    pub fn eval(&self, knots: &[f64]) -> f64 {
        if self.frac == 0.0 {
            knots[self.lo]
        } else {
            (1.0 - self.frac) * knots[self.lo] + self.frac * knots[self.hi]
        }
    }
}

/// Correction value at time `t` (seconds after the first knot). Values past the
/// last knot clamp to it.
pub fn interpolate_correction(knots: &[f64], interval: f64, t: f64) -> Result<f64> {
    if knots.is_empty() {
        return Err(Error::Empty("knot array"));
    }
    if !(interval > 0.0) {
        return Err(Error::InvalidArgument("knot interval must be positive".into()));
    }
    Ok(KnotWeight::locate(knots.len(), interval, t).eval(knots))
}

/// Dead-reckons the corrected trajectory. Position of frame `f` is the start
/// offset plus the corrected displacements of frames `0..=f`.
pub fn integrate(traj: &InertialTrajectory, params: &CorrectionParams) -> Result<PositionSeries> {
    if !params.covers(traj) {
        return Err(Error::LengthMismatch {
            what: "correction knots vs trajectory duration",
            left: params.angle_knots.len(),
            right: knot_count(traj.duration(), params.angle_interval),
        });
    }
    let t0 = traj.start_time();
    let mut p = params.start_offset;
    let mut positions = Vec::with_capacity(traj.len());
    for ((&t, &s), &h) in traj.timestamps.iter().zip(&traj.speeds).zip(&traj.headings) {
        let rel = t - t0;
        let scale = params.scale_at(rel);
        let angle = params.angle_at(rel);
        p += Vec2::from_angle(h + angle) * (s * scale);
        positions.push(p);
    }
    Ok(PositionSeries {
        timestamps: traj.timestamps.clone(),
        positions,
    })
}

/// Pseudo-fixes at frames `0, stride, 2·stride, …` each carrying `radius`.
pub fn subsample_constraints(series: &PositionSeries, stride: usize, radius: f64) -> Result<Vec<FlpFix>> {
    if series.is_empty() {
        return Err(Error::Empty("position series"));
    }
    if stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    Ok((0..series.len())
        .step_by(stride)
        .map(|i| FlpFix {
            t: series.timestamps[i],
            position: series.positions[i],
            accuracy: radius,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_PI_2;
    use proptest::prelude::*;

    #[test]
    fn stride_200_on_half_hour_at_50hz() {
        let n = 90_000;
        let series = PositionSeries::new(
            (0..n).map(|i| i as f64 / 50.0).collect(),
            alloc::vec![Vec2::ZERO; n],
        )
        .unwrap();
        let c = subsample_constraints(&series, 200, 2.0).unwrap();
        assert_eq!(c.len(), 450);
        assert_eq!(c.len(), (n - 1) / 200 + 1);
        assert!(c.iter().all(|f| f.accuracy == 2.0));
        assert_eq!(c[1].t, 4.0);
    }

    fn straight(n: usize) -> InertialTrajectory {
        InertialTrajectory::new(
            (0..n).map(|i| i as f64 * 0.02).collect(),
            alloc::vec![1.0; n],
            alloc::vec![0.0; n],
        )
        .unwrap()
    }

    #[test]
    fn interpolation_examples() {
        assert_eq!(interpolate_correction(&[1.0, 2.0], 100.0, 50.0).unwrap(), 1.5);
        assert_eq!(interpolate_correction(&[1.0, 2.0, 7.0], 10.0, 20.0).unwrap(), 7.0);
        assert_eq!(interpolate_correction(&[1.0, 2.0, 7.0], 10.0, 10.0).unwrap(), 2.0);
        assert_eq!(interpolate_correction(&[1.0, 2.0], 100.0, 1e6).unwrap(), 2.0);
        assert!(interpolate_correction(&[], 100.0, 0.0).is_err());
    }

    #[test]
    fn integrate_examples() {
        let traj = straight(10);
        let mut params = CorrectionParams::identity(&traj, 100.0, 20.0);
        let out = integrate(&traj, &params).unwrap();
        for (i, p) in out.positions.iter().enumerate() {
            assert_eq!(*p, Vec2::new((i + 1) as f64, 0.0));
        }

        params.angle_knots.iter_mut().for_each(|a| *a = FRAC_PI_2);
        let out = integrate(&traj, &params).unwrap();
        for (i, p) in out.positions.iter().enumerate() {
            assert!(p.distance(Vec2::new(0.0, (i + 1) as f64)) < 1e-12);
        }

        let mut params = CorrectionParams::identity(&traj, 100.0, 20.0);
        params.scale_knots.iter_mut().for_each(|s| *s = 2.0);
        let out = integrate(&traj, &params).unwrap();
        for (i, p) in out.positions.iter().enumerate() {
            assert_eq!(*p, Vec2::new(2.0 * (i + 1) as f64, 0.0));
        }
    }

    #[test]
    fn integrate_rejects_short_params() {
        let traj = InertialTrajectory::new(alloc::vec![0.0, 50.0], alloc::vec![1.0; 2], alloc::vec![0.0; 2]).unwrap();
        let mut params = CorrectionParams::identity(&traj, 20.0, 20.0);
        assert_eq!(params.angle_knots.len(), 4);
        params.angle_knots.truncate(2);
        assert!(integrate(&traj, &params).is_err());
    }

    #[test]
    fn trajectory_validation() {
        assert!(InertialTrajectory::new(alloc::vec![0.0, 0.0], alloc::vec![1.0; 2], alloc::vec![0.0; 2]).is_err());
        assert!(InertialTrajectory::new(alloc::vec![0.0, 1.0], alloc::vec![-1.0, 1.0], alloc::vec![0.0; 2]).is_err());
        assert!(InertialTrajectory::new(alloc::vec![0.0], alloc::vec![1.0; 2], alloc::vec![0.0; 2]).is_err());
        assert!(InertialTrajectory::new(Vec::new(), Vec::new(), Vec::new()).is_err());
    }

    #[test]
    fn knot_counts_cover_partial_interval() {
        assert_eq!(knot_count(600.0, 20.0), 31);
        assert_eq!(knot_count(600.0, 100.0), 7);
        assert_eq!(knot_count(601.0, 100.0), 8);
        assert_eq!(knot_count(0.0, 100.0), 1);
    }

    #[test]
    fn nearest_frame_ties_to_earlier() {
        let traj = InertialTrajectory::new(alloc::vec![0.0, 1.0, 2.0], alloc::vec![1.0; 3], alloc::vec![0.0; 3]).unwrap();
        assert_eq!(traj.nearest_frame(0.5), 0);
        assert_eq!(traj.nearest_frame(0.51), 1);
        assert_eq!(traj.nearest_frame(-4.0), 0);
        assert_eq!(traj.nearest_frame(9.0), 2);
    }

    #[test]
    fn subsample_examples() {
        let traj = straight(1000);
        let series = integrate(&traj, &CorrectionParams::identity(&traj, 100.0, 20.0)).unwrap();
        let fixes = subsample_constraints(&series, 200, 2.0).unwrap();
        assert_eq!(fixes.len(), 5);
        for (k, f) in fixes.iter().enumerate() {
            assert_eq!(f.t, series.timestamps[200 * k]);
            assert_eq!(f.accuracy, 2.0);
        }
        assert_eq!(subsample_constraints(&series, 1, 2.0).unwrap().len(), 1000);
        let single = subsample_constraints(&series, 5000, 2.0).unwrap();
        assert_eq!(single.len(), 1);
        assert_eq!(single[0].t, series.timestamps[0]);
        assert!(subsample_constraints(&PositionSeries::new(Vec::new(), Vec::new()).unwrap(), 1, 1.0).is_err());
        for n in [1usize, 199, 200, 201, 1234] {
            let s = PositionSeries::new(alloc::vec![0.0; n], alloc::vec![Vec2::ZERO; n]).unwrap();
            assert_eq!(subsample_constraints(&s, 200, 2.0).unwrap().len(), (n - 1) / 200 + 1);
        }
    }

    fn arbitrary_traj() -> impl Strategy<Value = InertialTrajectory> {
        (2usize..400).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.001..0.2f64, n),
                proptest::collection::vec(0.0..0.05f64, n),
                proptest::collection::vec(-3.2..3.2f64, n),
            )
                .prop_map(|(dts, speeds, headings)| {
                    let mut t = 0.0;
                    let ts = dts
                        .iter()
                        .map(|dt| {
                            t += dt;
                            t
                        })
                        .collect();
                    InertialTrajectory::new(ts, speeds, headings).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn identity_matches_raw_dead_reckoning(traj in arbitrary_traj()) {
            let out = integrate(&traj, &CorrectionParams::identity(&traj, 5.0, 2.0)).unwrap();
            let mut p = Vec2::ZERO;
            for i in 0..traj.len() {
                p += Vec2::new(libm::cos(traj.headings()[i]), libm::sin(traj.headings()[i])) * traj.speeds()[i];
                prop_assert_eq!(out.positions[i], p);
            }
        }

        #[test]
        fn constant_angle_offset_rotates_about_start(
            traj in arbitrary_traj(), c in -3.2..3.2f64, sx in -10.0..10.0f64, sy in -10.0..10.0f64,
            knots in proptest::collection::vec(-0.5..0.5f64, 40),
        ) {
            let mut base = CorrectionParams::identity(&traj, 5.0, 2.0);
            base.start_offset = Vec2::new(sx, sy);
            for (k, a) in base.angle_knots.iter_mut().enumerate() {
                *a = knots[k % knots.len()];
            }
            let mut rotated = base.clone();
            rotated.angle_knots.iter_mut().for_each(|a| *a += c);
            let p0 = integrate(&traj, &base).unwrap();
            let p1 = integrate(&traj, &rotated).unwrap();
            for (a, b) in p0.positions.iter().zip(&p1.positions) {
                let expect = base.start_offset + (*a - base.start_offset).rotate(c);
                prop_assert!(expect.distance(*b) < 1e-9);
            }
        }

        #[test]
        fn path_length_ignores_angle_corrections(
            traj in arbitrary_traj(),
            scales in proptest::collection::vec(0.5..2.0f64, 40),
            angles in proptest::collection::vec(-3.0..3.0f64, 40),
        ) {
            let mut params = CorrectionParams::identity(&traj, 5.0, 2.0);
            for (k, s) in params.scale_knots.iter_mut().enumerate() { *s = scales[k % 40]; }
            for (k, a) in params.angle_knots.iter_mut().enumerate() { *a = angles[k % 40]; }
            let out = integrate(&traj, &params).unwrap();
            let mut len = out.positions[0].distance(params.start_offset);
            len += out.positions.windows(2).map(|w| w[0].distance(w[1])).sum::<f64>();
            let t0 = traj.start_time();
            let expect: f64 = traj.timestamps().iter().zip(traj.speeds())
                .map(|(t, s)| s * params.scale_at(t - t0)).sum();
            prop_assert!((len - expect).abs() < 1e-9 * (1.0 + expect));
        }

        #[test]
        fn interpolation_is_piecewise_linear(
            knots in proptest::collection::vec(-5.0..5.0f64, 2..20),
            interval in 1.0..100.0f64, seg in 0usize..19, h in 0.001..0.3f64,
        ) {
            let k = seg % (knots.len() - 1);
            let t = (k as f64 + 0.5) * interval;
            let dt = h * interval;
            let f = |t| interpolate_correction(&knots, interval, t).unwrap();
            let second = f(t - dt) - 2.0 * f(t) + f(t + dt);
            prop_assert!(second.abs() < 1e-12 * (1.0 + knots.iter().map(|k| k.abs()).sum::<f64>()));
        }
    }
}
