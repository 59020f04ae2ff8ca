use serde::{Deserialize, Serialize};

use super::{match_fixes, FlpFix};
use crate::error::{Error, Result};
use crate::geo::Vec2;
use crate::trajectory::PositionSeries;

/// `p ↦ R(rotation)·p + translation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub rotation: f64,
    pub translation: Vec2,
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: 0.0,
        translation: Vec2::ZERO,
    };

    pub fn apply(&self, p: Vec2) -> Vec2 {
        p.rotate(self.rotation) + self.translation
    }
}

/// Least-squares rotation and translation taking the trajectory frames matched
/// to each fix onto the fix positions (2D orthogonal Procrustes, no scale).
///
/// With a single fix, or when either point set has no spread, only the
/// centroid translation is solved.
pub fn initial_alignment(positions: &PositionSeries, fixes: &[FlpFix]) -> Result<RigidTransform> {
    if fixes.is_empty() {
        return Err(Error::NoFixes);
    }
    if positions.is_empty() {
        return Err(Error::Empty("position series"));
    }
    let frames = match_fixes(&positions.timestamps, fixes);
    let n = fixes.len() as f64;
    let mut src_c = Vec2::ZERO;
    let mut dst_c = Vec2::ZERO;
    for (f, fix) in frames.iter().zip(fixes) {
        src_c += positions.positions[*f];
        dst_c += fix.position;
    }
    src_c = src_c * (1.0 / n);
    dst_c = dst_c * (1.0 / n);

    let (mut dot, mut cross, mut src_var, mut dst_var) = (0.0, 0.0, 0.0, 0.0);
    for (f, fix) in frames.iter().zip(fixes) {
        let p = positions.positions[*f] - src_c;
        let q = fix.position - dst_c;
        dot += p.dot(q);
        cross += p.cross(q);
        src_var += p.dot(p);
        dst_var += q.dot(q);
    }
    let scale = src_var.max(dst_var).max(1.0);
    let rotation = if fixes.len() < 2 || src_var <= 1e-18 * scale || dst_var <= 1e-18 * scale {
        0.0
    } else {
        libm::atan2(cross, dot)
    };
    Ok(RigidTransform {
        rotation,
        translation: dst_c - src_c.rotate(rotation),
    })
}
