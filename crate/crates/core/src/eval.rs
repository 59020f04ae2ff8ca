//! Localization error metrics.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::Vec2;
use crate::optimizer::FlpFix;
use crate::trajectory::PositionSeries;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub mean: f64,
    pub q1: f64,
    pub q3: f64,
    pub rmse: f64,
    pub count: usize,
    pub per_gt_errors: Vec<(f64, f64)>,
}

/// Quantile by linear interpolation between order statistics at `q·(n−1)`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = libm::floor(pos) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

impl ErrorReport {
    pub fn from_errors(per_gt_errors: Vec<(f64, f64)>) -> Result<Self> {
        if per_gt_errors.is_empty() {
            return Err(Error::Empty("ground truth"));
        }
        let n = per_gt_errors.len() as f64;
        let mut sorted: Vec<f64> = per_gt_errors.iter().map(|e| e.1).collect();
        sorted.sort_by(f64::total_cmp);
        let mean = sorted.iter().sum::<f64>() / n;
        let rmse = libm::sqrt(sorted.iter().map(|e| e * e).sum::<f64>() / n);
        Ok(Self {
            mean,
            q1: quantile(&sorted, 0.25),
            q3: quantile(&sorted, 0.75),
            rmse,
            count: per_gt_errors.len(),
            per_gt_errors,
        })
    }
}

/// Error of `estimate`, interpolated in time, at every ground-truth point.
/// Ground-truth times may exceed the estimate's range by at most one frame.
pub fn compute_errors(estimate: &PositionSeries, gt: &[(f64, Vec2)]) -> Result<ErrorReport> {
    if gt.is_empty() {
        return Err(Error::Empty("ground truth"));
    }
    if estimate.is_empty() {
        return Err(Error::Empty("estimate"));
    }
    let ts = &estimate.timestamps;
    let n = ts.len();
    let (lo_slack, hi_slack) = if n > 1 {
        (ts[1] - ts[0], ts[n - 1] - ts[n - 2])
    } else {
        (0.0, 0.0)
    };
    let errors = gt
        .iter()
        .map(|&(t, p)| {
            if t < ts[0] - lo_slack - 1e-9 || t > ts[n - 1] + hi_slack + 1e-9 {
                Err(Error::OutOfRange(t))
            } else {
                Ok((t, estimate.position_at(t).distance(p)))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    ErrorReport::from_errors(errors)
}

/// Samples a dense series at `rate` Hz from its first timestamp.
pub fn resample(series: &PositionSeries, rate: f64) -> Vec<(f64, Vec2)> {
    if series.is_empty() {
        return Vec::new();
    }
    let t0 = series.timestamps[0];
    let t1 = series.timestamps[series.len() - 1];
    let count = libm::floor((t1 - t0) * rate + 1e-9) as usize + 1;
    (0..count)
        .map(|k| {
            let t = t0 + k as f64 / rate;
            (t, series.position_at(t))
        })
        .collect()
}

/// Dense ground truth reduced to 1 Hz.
pub fn dense_gt(series: &PositionSeries) -> Vec<(f64, Vec2)> {
    resample(series, 1.0)
}

/// The piecewise-linear path through the fixes, evaluated at `timestamps`
/// (held constant before the first and after the last fix).
pub fn flp_polyline(fixes: &[FlpFix], timestamps: &[f64]) -> Result<PositionSeries> {
    if fixes.is_empty() {
        return Err(Error::NoFixes);
    }
    let mut sorted: Vec<FlpFix> = fixes.to_vec();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let knots = PositionSeries {
        timestamps: sorted.iter().map(|f| f.t).collect(),
        positions: sorted.iter().map(|f| f.position).collect(),
    };
    PositionSeries::new(timestamps.to_vec(), timestamps.iter().map(|t| knots.position_at(*t)).collect())
}

/// One row of a baseline comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantReport {
    pub name: String,
    pub report: ErrorReport,
}

/// Fixed-width text table of `mean / q1 / q3 / rmse` per variant.
pub fn format_table(rows: &[VariantReport]) -> String {
    use core::fmt::Write;
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(7).max(7);
    let mut s = String::new();
    let _ = writeln!(s, "{:<width$}  {:>8}  {:>8}  {:>8}  {:>8}  {:>6}", "variant", "mean", "q1", "q3", "rmse", "n");
    for r in rows {
        let e = &r.report;
        let _ = writeln!(
            s,
            "{:<width$}  {:>8.3}  {:>8.3}  {:>8.3}  {:>8.3}  {:>6}",
            r.name, e.mean, e.q1, e.q3, e.rmse, e.count
        );
    }
    s
}
