use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{match_fixes, FlpFix, OptimizerConfig};
use crate::geo::Vec2;
use crate::trajectory::{CorrectionParams, InertialTrajectory, KnotWeight};

/// Cost split by residual block. `total()` is the minimized objective.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub flp: f64,
    pub scale: f64,
    pub angle_first: f64,
    pub angle_second: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.flp + self.scale + self.angle_first + self.angle_second
    }
}

/// The stacked least-squares problem over a packed parameter vector
/// `[ΔP₀.x, ΔP₀.y, Δs_0 … Δs_{S−1}, Δθ_0 … Δθ_{A−1}]`.
///
/// Each fix contributes a 2-vector residual `d·(1 − r/‖d‖)` (zero inside the
/// accuracy disk) whose squared norm is the squared hinge
/// `max(‖d‖ − r, 0)²`, so both directions of the position error are visible
/// to the Gauss-Newton model.
pub struct CorrectionProblem<'a> {
    traj: &'a InertialTrajectory,
    fixes: &'a [FlpFix],
    /// Fix indices ordered by matched frame.
    order: Vec<usize>,
    frames: Vec<usize>,
    scale_stencil: Vec<KnotWeight>,
    angle_stencil: Vec<KnotWeight>,
    n_scale: usize,
    n_angle: usize,
    scale_interval: f64,
    angle_interval: f64,
    sqrt_w1: f64,
    sqrt_w2: f64,
    sqrt_w2_gain: f64,
    scale_bounds: (f64, f64),
}

impl<'a> CorrectionProblem<'a> {
    pub fn new(
        traj: &'a InertialTrajectory,
        fixes: &'a [FlpFix],
        config: &OptimizerConfig,
        n_scale: usize,
        n_angle: usize,
    ) -> Self {
        let frames = match_fixes(traj.timestamps(), fixes);
        let mut order: Vec<usize> = (0..fixes.len()).collect();
        order.sort_by_key(|&j| (frames[j], j));
        let last = frames.iter().copied().max().map_or(0, |f| f + 1);
        let t0 = traj.start_time();
        let rel = traj.timestamps()[..last].iter().map(|t| t - t0);
        let scale_stencil = rel
            .clone()
            .map(|t| KnotWeight::locate(n_scale, config.scale_interval, t))
            .collect();
        let angle_stencil = rel.map(|t| KnotWeight::locate(n_angle, config.angle_interval, t)).collect();
        Self {
            traj,
            fixes,
            order,
            frames,
            scale_stencil,
            angle_stencil,
            n_scale,
            n_angle,
            scale_interval: config.scale_interval,
            angle_interval: config.angle_interval,
            sqrt_w1: libm::sqrt(config.w1),
            sqrt_w2: libm::sqrt(config.w2),
            sqrt_w2_gain: libm::sqrt(config.w2 * config.second_order_gain),
            scale_bounds: (config.scale_lower_bound, config.scale_upper_bound),
        }
    }

    pub fn n_params(&self) -> usize {
        2 + self.n_scale + self.n_angle
    }

    pub fn n_residuals(&self) -> usize {
        2 * self.fixes.len() + self.n_scale + self.n_angle.saturating_sub(1) + self.n_angle.saturating_sub(2)
    }

    fn scale_col(&self) -> usize {
        2
    }

    fn angle_col(&self) -> usize {
        2 + self.n_scale
    }

    pub fn pack(&self, p: &CorrectionParams) -> DVector<f64> {
        let mut x = DVector::zeros(self.n_params());
        x[0] = p.start_offset.x;
        x[1] = p.start_offset.y;
        for (i, s) in p.scale_knots.iter().enumerate() {
            x[self.scale_col() + i] = *s;
        }
        for (i, a) in p.angle_knots.iter().enumerate() {
            x[self.angle_col() + i] = *a;
        }
        x
    }

    pub fn unpack(&self, x: &DVector<f64>) -> CorrectionParams {
        CorrectionParams {
            scale_knots: x.rows(self.scale_col(), self.n_scale).iter().copied().collect(),
            angle_knots: x.rows(self.angle_col(), self.n_angle).iter().copied().collect(),
            start_offset: Vec2::new(x[0], x[1]),
            scale_interval: self.scale_interval,
            angle_interval: self.angle_interval,
        }
    }

    /// Clamps the scale knots into their box bounds.
    pub fn project(&self, x: &mut DVector<f64>) {
        let (lo, hi) = self.scale_bounds;
        for i in 0..self.n_scale {
            let v = &mut x[self.scale_col() + i];
            *v = v.clamp(lo, hi);
        }
    }

    pub(crate) fn at_lower_bound(&self, x: &DVector<f64>, col: usize) -> Option<bool> {
        if col < self.scale_col() || col >= self.angle_col() {
            return None;
        }
        let (lo, hi) = self.scale_bounds;
        if x[col] <= lo {
            Some(true)
        } else if x[col] >= hi {
            Some(false)
        } else {
            None
        }
    }

    /// Positions at the fix frames and, optionally, their derivatives with
    /// respect to every scale and angle knot.
    fn forward(&self, x: &DVector<f64>, mut jac: Option<&mut DMatrix<f64>>) -> Vec<Vec2> {
        let sc = self.scale_col();
        let ac = self.angle_col();
        let speeds = self.traj.speeds();
        let headings = self.traj.headings();
        let mut fix_pos = alloc::vec![Vec2::ZERO; self.fixes.len()];
        let mut d_scale = alloc::vec![Vec2::ZERO; if jac.is_some() { self.n_scale } else { 0 }];
        let mut d_angle = alloc::vec![Vec2::ZERO; if jac.is_some() { self.n_angle } else { 0 }];
        let mut p = Vec2::new(x[0], x[1]);
        let mut next = 0;
        for (i, (sw, aw)) in self.scale_stencil.iter().zip(&self.angle_stencil).enumerate() {
            let scale = (1.0 - sw.frac) * x[sc + sw.lo] + sw.frac * x[sc + sw.hi];
            let angle = (1.0 - aw.frac) * x[ac + aw.lo] + aw.frac * x[ac + aw.hi];
            let dir = Vec2::from_angle(headings[i] + angle);
            let s = speeds[i];
            p += dir * (s * scale);
            if jac.is_some() {
                let ds = dir * s;
                d_scale[sw.lo] += ds * (1.0 - sw.frac);
                if sw.frac != 0.0 {
                    d_scale[sw.hi] += ds * sw.frac;
                }
                let da = dir.perp() * (s * scale);
                d_angle[aw.lo] += da * (1.0 - aw.frac);
                if aw.frac != 0.0 {
                    d_angle[aw.hi] += da * aw.frac;
                }
            }
            while next < self.order.len() && self.frames[self.order[next]] == i {
                let j = self.order[next];
                fix_pos[j] = p;
                if let Some(jac) = jac.as_deref_mut() {
                    let Some(m) = self.hinge_jacobian(p, &self.fixes[j]) else {
                        next += 1;
                        continue;
                    };
                    let r = 2 * j;
                    let mut put = |col: usize, v: Vec2| {
                        jac[(r, col)] = m[0] * v.x + m[1] * v.y;
                        jac[(r + 1, col)] = m[2] * v.x + m[3] * v.y;
                    };
                    put(0, Vec2::new(1.0, 0.0));
                    put(1, Vec2::new(0.0, 1.0));
                    for (k, v) in d_scale.iter().enumerate() {
                        put(sc + k, *v);
                    }
                    for (k, v) in d_angle.iter().enumerate() {
                        put(ac + k, *v);
                    }
                }
                next += 1;
            }
        }
        fix_pos
    }

    /// d(residual)/d(position) as a row-major 2×2, or `None` inside the disk.
    fn hinge_jacobian(&self, p: Vec2, fix: &FlpFix) -> Option<[f64; 4]> {
        let d = p - fix.position;
        let rho = d.norm();
        if rho <= fix.accuracy || rho == 0.0 {
            return None;
        }
        let r = fix.accuracy;
        let a = 1.0 - r / rho;
        let b = r / (rho * rho * rho);
        Some([a + b * d.x * d.x, b * d.x * d.y, b * d.y * d.x, a + b * d.y * d.y])
    }

    fn hinge_residual(p: Vec2, fix: &FlpFix) -> Vec2 {
        let d = p - fix.position;
        let rho = d.norm();
        if rho <= fix.accuracy || rho == 0.0 {
            Vec2::ZERO
        } else {
            d * (1.0 - fix.accuracy / rho)
        }
    }

    pub fn residuals(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut r = DVector::zeros(self.n_residuals());
        let pos = self.forward(x, None);
        for (j, (p, fix)) in pos.iter().zip(self.fixes).enumerate() {
            let e = Self::hinge_residual(*p, fix);
            r[2 * j] = e.x;
            r[2 * j + 1] = e.y;
        }
        let mut row = 2 * self.fixes.len();
        let sc = self.scale_col();
        for k in 0..self.n_scale {
            let s = x[sc + k];
            r[row] = self.sqrt_w1 * s.max(1.0 / s);
            row += 1;
        }
        let ac = self.angle_col();
        for k in 0..self.n_angle.saturating_sub(1) {
            r[row] = self.sqrt_w2 * (x[ac + k + 1] - x[ac + k]);
            row += 1;
        }
        for k in 1..self.n_angle.saturating_sub(1) {
            r[row] = self.sqrt_w2_gain * (x[ac + k + 1] - 2.0 * x[ac + k] + x[ac + k - 1]);
            row += 1;
        }
        r
    }

    /// Analytic Jacobian of [`Self::residuals`]. At the kinks (hinge boundary,
    /// `Δs = 1`) the zero branch is used.
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(self.n_residuals(), self.n_params());
        self.forward(x, Some(&mut j));
        let mut row = 2 * self.fixes.len();
        let sc = self.scale_col();
        for k in 0..self.n_scale {
            let s = x[sc + k];
            j[(row, sc + k)] = if s > 1.0 {
                self.sqrt_w1
            } else if s < 1.0 {
                -self.sqrt_w1 / (s * s)
            } else {
                0.0
            };
            row += 1;
        }
        let ac = self.angle_col();
        for k in 0..self.n_angle.saturating_sub(1) {
            j[(row, ac + k)] = -self.sqrt_w2;
            j[(row, ac + k + 1)] = self.sqrt_w2;
            row += 1;
        }
        for k in 1..self.n_angle.saturating_sub(1) {
            j[(row, ac + k - 1)] = self.sqrt_w2_gain;
            j[(row, ac + k)] = -2.0 * self.sqrt_w2_gain;
            j[(row, ac + k + 1)] = self.sqrt_w2_gain;
            row += 1;
        }
        j
    }

    pub fn cost(&self, x: &DVector<f64>) -> f64 {
        self.residuals(x).norm_squared()
    }

    pub fn breakdown(&self, x: &DVector<f64>) -> CostBreakdown {
        let r = self.residuals(x);
        let nf = 2 * self.fixes.len();
        let n1 = self.n_angle.saturating_sub(1);
        let sq = |a: usize, n: usize| r.rows(a, n).norm_squared();
        CostBreakdown {
            flp: sq(0, nf),
            scale: sq(nf, self.n_scale),
            angle_first: sq(nf + self.n_scale, n1),
            angle_second: sq(nf + self.n_scale + n1, self.n_angle.saturating_sub(2)),
        }
    }
}
