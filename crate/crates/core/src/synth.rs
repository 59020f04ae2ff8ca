//! Synthetic ground truth, inertial corruptions, simulated position fixes and
//! training samples for the correction-flow model.
//!
//! All randomness comes from ChaCha8 generators seeded by `(seed, stream)`,
//! so every generator is reproducible on its own.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{FloorplanRaster, GeoRegistration, Legend, PixelClass, Vec2};
use crate::optimizer::FlpFix;
use crate::raster::{self, FlowField, SegmentSample, CROP};
use crate::spline::PlanarSpline;
use crate::trajectory::{integrate, CorrectionParams, InertialTrajectory, PositionSeries};

/// Named random streams.
pub mod stream {
    pub const CORRUPT: u64 = 1;
    pub const FLP: u64 = 2;
    pub const SAMPLES: u64 = 3;
    pub const WAYPOINTS: u64 = 4;
    pub const PLAN: u64 = 5;
    pub const CORRUPTION_SPEC: u64 = 6;
}

pub fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn gaussian(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    if std <= 0.0 {
        return 0.0;
    }
    Normal::new(0.0, std).map(|n| n.sample(rng)).unwrap_or(0.0)
}

/// Ground truth and the matching clean inertial trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrajectory {
    pub inertial: InertialTrajectory,
    pub ground_truth: PositionSeries,
    /// Position before the first frame's displacement.
    pub start: Vec2,
}

impl SyntheticTrajectory {
    /// Keeps the frames with `t − t0 ≤ duration`.
    pub fn truncated(&self, duration: f64) -> Result<Self> {
        let t0 = self.inertial.start_time();
        let n = self.inertial.timestamps().partition_point(|t| t - t0 <= duration + 1e-9);
        let cut = |v: &[f64]| v[..n].to_vec();
        Ok(Self {
            inertial: InertialTrajectory::new(
                cut(self.inertial.timestamps()),
                cut(self.inertial.speeds()),
                cut(self.inertial.headings()),
            )?,
            ground_truth: PositionSeries::new(
                self.ground_truth.timestamps[..n].to_vec(),
                self.ground_truth.positions[..n].to_vec(),
            )?,
            start: self.start,
        })
    }
}

/// Constant-speed walk along the natural cubic spline through `waypoints`.
///
/// Frame `k` sits at arc length `speed·k/rate` and time `k/rate`; frame 0 is
/// the first waypoint with zero displacement. Per-frame speed and heading
/// are the chord from the previous frame, so dead-reckoning them from the
/// first waypoint reproduces the positions.
pub fn generate_spline_trajectory(waypoints: &[Vec2], speed: f64, rate: f64) -> Result<SyntheticTrajectory> {
    if !(speed > 0.0) || !(rate > 0.0) {
        return Err(Error::InvalidArgument("speed and rate must be positive".into()));
    }
    let spline = PlanarSpline::through(waypoints)?;
    let step = speed / rate;
    let frames = libm::floor(spline.length() / step + 1e-9) as usize + 1;
    let mut ts = Vec::with_capacity(frames);
    let mut speeds = Vec::with_capacity(frames);
    let mut headings = Vec::with_capacity(frames);
    let mut positions = Vec::with_capacity(frames);
    let start = spline.point(0.0);
    let mut prev = start;
    for k in 0..frames {
        let p = if k == 0 {
            start
        } else {
            spline.point(spline.param_at_arc(step * k as f64))
        };
        let d = p - prev;
        ts.push(k as f64 / rate);
        if k == 0 {
            speeds.push(0.0);
            headings.push(spline.tangent(0.0).angle());
        } else {
            speeds.push(d.norm());
            headings.push(d.angle());
        }
        positions.push(p);
        prev = p;
    }
    // Re-derive positions by dead reckoning so the pair is exactly consistent.
    let inertial = InertialTrajectory::new(ts.clone(), speeds, headings)?;
    let mut params = CorrectionParams::identity(&inertial, 100.0, 20.0);
    params.start_offset = start;
    let ground_truth = integrate(&inertial, &params)?;
    Ok(SyntheticTrajectory {
        inertial,
        ground_truth,
        start,
    })
}

/// Inertial error model: a heading bias that grows linearly plus a random
/// walk, and a constant speed scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorruptionSpec {
    /// rad/s
    pub heading_drift_rate: f64,
    /// rad/√s
    pub drift_walk_std: f64,
    pub scale_factor: f64,
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        Self {
            heading_drift_rate: 0.0,
            drift_walk_std: 0.0,
            scale_factor: 1.0,
            seed: 0,
        }
    }
}

impl CorruptionSpec {
    /// Drift uniform in ±1°/s, walk 0.05°/√s, scale uniform in [0.85, 1.2].
    pub fn random(seed: u64) -> Self {
        let mut r = rng(seed, stream::CORRUPTION_SPEC);
        Self {
            heading_drift_rate: r.random_range(-1.0..=1.0f64).to_radians(),
            drift_walk_std: 0.05f64.to_radians(),
            scale_factor: r.random_range(0.85..=1.2),
            seed,
        }
    }
}

pub fn corrupt(traj: &InertialTrajectory, spec: &CorruptionSpec) -> Result<InertialTrajectory> {
    if !(spec.scale_factor > 0.0) {
        return Err(Error::InvalidArgument("scale factor must be positive".into()));
    }
    let mut r = rng(spec.seed, stream::CORRUPT);
    let t0 = traj.start_time();
    let mut walk = 0.0;
    let mut prev_t = t0;
    let headings = traj
        .timestamps()
        .iter()
        .zip(traj.headings())
        .map(|(&t, &h)| {
            walk += gaussian(&mut r, spec.drift_walk_std * libm::sqrt(t - prev_t));
            prev_t = t;
            h + spec.heading_drift_rate * (t - t0) + walk
        })
        .collect();
    let speeds = traj.speeds().iter().map(|s| s * spec.scale_factor).collect();
    InertialTrajectory::new(traj.timestamps().to_vec(), speeds, headings)
}

pub const DEFAULT_FLP_NOISE_STD: f64 = 5.0;
pub const DEFAULT_FLP_ACCURACY: f64 = 10.0;
pub const DEFAULT_FLP_INTERVAL: f64 = 60.0;

/// Fixes every `interval` seconds from the first ground-truth timestamp,
/// endpoints inclusive, with isotropic Gaussian position noise.
pub fn simulate_flp(
    gt: &PositionSeries,
    interval: f64,
    noise_std: f64,
    reported_accuracy: f64,
    seed: u64,
) -> Result<Vec<FlpFix>> {
    if !(interval > 0.0) {
        return Err(Error::InvalidArgument("fix interval must be positive".into()));
    }
    if gt.is_empty() {
        return Err(Error::Empty("ground truth"));
    }
    let mut r = rng(seed, stream::FLP);
    let t0 = gt.timestamps[0];
    let t1 = gt.timestamps[gt.len() - 1];
    let count = libm::floor((t1 - t0) / interval + 1e-9) as usize + 1;
    Ok((0..count)
        .map(|k| {
            let t = t0 + k as f64 * interval;
            let noise = Vec2::new(gaussian(&mut r, noise_std), gaussian(&mut r, noise_std));
            FlpFix {
                t,
                position: gt.position_at(t) + noise,
                accuracy: reported_accuracy,
            }
        })
        .collect())
}

/// A rectangular corridor grid used to synthesize floorplans and walks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorridorGrid {
    pub width_m: f64,
    pub height_m: f64,
    pub spacing_m: f64,
    pub corridor_width_m: f64,
}

impl Default for CorridorGrid {
    fn default() -> Self {
        Self {
            width_m: 250.0,
            height_m: 250.0,
            spacing_m: 50.0,
            corridor_width_m: 4.0,
        }
    }
}

impl CorridorGrid {
    fn lines(extent: f64, spacing: f64) -> Vec<f64> {
        let mut v = Vec::new();
        let mut x = 0.5 * spacing;
        while x < extent {
            v.push(x);
            x += spacing;
        }
        v
    }

    pub fn columns(&self) -> Vec<f64> {
        Self::lines(self.width_m, self.spacing_m)
    }

    pub fn rows(&self) -> Vec<f64> {
        Self::lines(self.height_m, self.spacing_m)
    }

    /// Registration placing world `(0, height)` at pixel `(0, 0)`, y up.
    pub fn registration(&self, pixels_per_meter: f64) -> GeoRegistration {
        GeoRegistration {
            origin_world: Vec2::new(0.0, self.height_m),
            pixels_per_meter,
            rotation: 0.0,
            flip_y: true,
        }
    }

    /// Renders corridors (white), rooms (yellow) behind walls (black) with
    /// doorways (brown), and some unwalkable blocks (grey).
    pub fn render(&self, pixels_per_meter: f64, seed: u64) -> Result<FloorplanRaster> {
        let legend = Legend::default();
        let reg = self.registration(pixels_per_meter);
        let w = libm::ceil(self.width_m * pixels_per_meter) as usize;
        let h = libm::ceil(self.height_m * pixels_per_meter) as usize;
        let cols = self.columns();
        let rows = self.rows();
        let half = 0.5 * self.corridor_width_m;
        let wall = 1.0 / pixels_per_meter;
        let mut r = rng(seed, stream::PLAN);
        let blocks_x = cols.len() + 1;
        let blocks_y = rows.len() + 1;
        let block_kind: Vec<bool> = (0..blocks_x * blocks_y).map(|_| r.random_bool(0.8)).collect();
        let color = |c| legend.color_of(c);
        let mut rgb = Vec::with_capacity(w * h);
        for v in 0..h {
            for u in 0..w {
                let p = reg.pixel_to_world(Vec2::new(u as f64 + 0.5, v as f64 + 0.5));
                let dx = cols.iter().map(|c| (p.x - c).abs()).fold(f64::INFINITY, f64::min);
                let dy = rows.iter().map(|c| (p.y - c).abs()).fold(f64::INFINITY, f64::min);
                let class = if dx <= half || dy <= half {
                    PixelClass::Corridor
                } else if dx <= half + wall || dy <= half + wall {
                    // Doorways every spacing/2 along each wall.
                    let along = if dx <= half + wall { p.y } else { p.x };
                    let phase = libm::fmod(along, 0.5 * self.spacing_m);
                    if (phase - 0.25 * self.spacing_m).abs() < 1.0 {
                        PixelClass::OpenBoundary
                    } else {
                        PixelClass::Wall
                    }
                } else {
                    let bx = cols.partition_point(|c| *c < p.x);
                    let by = rows.partition_point(|c| *c < p.y);
                    if block_kind[by * blocks_x + bx] {
                        PixelClass::Room
                    } else {
                        PixelClass::Unwalkable
                    }
                };
                rgb.push(color(class));
            }
        }
        FloorplanRaster::from_rgb(w, h, rgb, &legend, reg)
    }

    /// Random walk over corridor intersections, never immediately reversing,
    /// until the polyline is at least `min_length` meters long.
    pub fn random_walk(&self, min_length: f64, seed: u64) -> Result<Vec<Vec2>> {
        let cols = self.columns();
        let rows = self.rows();
        if cols.len() < 2 || rows.len() < 2 {
            return Err(Error::InvalidArgument("corridor grid needs at least 2x2 intersections".into()));
        }
        let mut r = rng(seed, stream::WAYPOINTS);
        let mut at = (r.random_range(0..cols.len()), r.random_range(0..rows.len()));
        let mut prev: Option<(usize, usize)> = None;
        let node = |(i, j): (usize, usize)| Vec2::new(cols[i], rows[j]);
        let mut path = alloc::vec![node(at)];
        let mut length = 0.0;
        while length < min_length {
            let (i, j) = at;
            let mut options: Vec<(usize, usize)> = Vec::with_capacity(4);
            if i > 0 {
                options.push((i - 1, j));
            }
            if i + 1 < cols.len() {
                options.push((i + 1, j));
            }
            if j > 0 {
                options.push((i, j - 1));
            }
            if j + 1 < rows.len() {
                options.push((i, j + 1));
            }
            if options.len() > 1 {
                options.retain(|o| Some(*o) != prev);
            }
            let next = options[r.random_range(0..options.len())];
            length += node(at).distance(node(next));
            prev = Some(at);
            at = next;
            path.push(node(at));
        }
        Ok(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Augmentation {
    /// Random horizontal flip and rotation uniform in `[0, 2π)`.
    Random,
    Fixed { flip: bool, rotation: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingOptions {
    /// Std-dev of the endpoint perturbation, in pixels.
    pub perturb_std_px: f64,
    /// Cropping stops this close to the window border, in pixels.
    pub border_margin_px: f64,
    /// Reference frames are drawn from this leading fraction of the trajectory.
    pub reference_fraction: f64,
    pub min_frames: usize,
    pub max_attempts: usize,
    pub augmentation: Augmentation,
}

impl Default for TrainingOptions {
    fn default() -> Self {
        Self {
            perturb_std_px: 25.0,
            border_margin_px: 5.0,
            reference_fraction: 0.85,
            min_frames: 10,
            max_attempts: 100,
            augmentation: Augmentation::Random,
        }
    }
}

pub const DEFAULT_SAMPLES_PER_TRAJECTORY: usize = 20;

/// An input image with its target correction flow.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub input: SegmentSample,
    pub target: FlowField,
    /// Pixel displacement from each warped frame to its ground truth.
    pub frame_targets: Vec<Vec2>,
    /// Ground-truth crop-pixel position of each frame.
    pub frame_truth: Vec<Vec2>,
    pub flipped: bool,
    pub rotation: f64,
}

/// Similarity `z ↦ b0 + (z − a0)·(b1 − b0)/(a1 − a0)` on complex numbers.
fn two_point_similarity(a0: Vec2, a1: Vec2, b0: Vec2, b1: Vec2) -> impl Fn(Vec2) -> Vec2 {
    let da = a1 - a0;
    let db = b1 - b0;
    let den = da.dot(da);
    let (re, im) = if den > 1e-18 {
        ((db.x * da.x + db.y * da.y) / den, (db.y * da.x - db.x * da.y) / den)
    } else {
        (1.0, 0.0)
    };
    let shift = if den > 1e-18 { b0 } else { (b0 + b1) * 0.5 - (a0 + a1) * 0.5 + a0 };
    move |z: Vec2| {
        let d = z - a0;
        shift + Vec2::new(re * d.x - im * d.y, re * d.y + im * d.x)
    }
}

fn motion_direction(positions: &[Vec2], from: usize, min_dist: f64) -> Option<Vec2> {
    let p = positions[from];
    positions[from + 1..]
        .iter()
        .find(|q| q.distance(p) >= min_dist)
        .map(|q| *q - p)
}

/// Generates `n` training samples from one inertial trajectory and its
/// frame-aligned ground truth on `plan`.
pub fn make_training_samples(
    traj: &InertialTrajectory,
    gt: &PositionSeries,
    plan: &FloorplanRaster,
    n: usize,
    seed: u64,
    options: &TrainingOptions,
) -> Result<Vec<TrainingSample>> {
    if gt.len() != traj.len() {
        return Err(Error::LengthMismatch {
            what: "ground truth frames",
            left: gt.len(),
            right: traj.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let raw = integrate(traj, &CorrectionParams::identity(traj, 100.0, 20.0))?;
    let reg = &plan.registration;
    let ppm = reg.pixels_per_meter;
    let last_ref = libm::floor(options.reference_fraction * traj.len() as f64) as usize;
    if last_ref == 0 || traj.len() < options.min_frames.max(2) {
        return Err(Error::TooShort);
    }
    let mut r = rng(seed, stream::SAMPLES);
    let mut out = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n {
        attempts += 1;
        if attempts > options.max_attempts * n {
            return Err(Error::TooShort);
        }
        let reference = r.random_range(0..last_ref);
        let noise0 = Vec2::new(gaussian(&mut r, options.perturb_std_px), gaussian(&mut r, options.perturb_std_px));
        let noise1 = Vec2::new(gaussian(&mut r, options.perturb_std_px), gaussian(&mut r, options.perturb_std_px));
        let (flip, rotation) = match options.augmentation {
            Augmentation::Random => (r.random_bool(0.5), r.random_range(0.0..core::f64::consts::TAU)),
            Augmentation::Fixed { flip, rotation } => (flip, rotation),
        };
        let min_dist = 0.5 / ppm;
        let (Some(raw_dir), Some(gt_dir)) = (
            motion_direction(&raw.positions, reference, min_dist),
            motion_direction(&gt.positions, reference, min_dist),
        ) else {
            continue;
        };
        let phi = gt_dir.angle() - raw_dir.angle();
        let anchor_raw = raw.positions[reference];
        let anchor_gt = gt.positions[reference];
        let aligned = |i: usize| anchor_gt + (raw.positions[i] - anchor_raw).rotate(phi);

        // Follow until the last frame or the window border.
        let center = reg.world_to_pixel(anchor_gt);
        let limit = 0.5 * CROP as f64 - options.border_margin_px;
        let mut end = reference + 1;
        while end < traj.len() {
            let d = reg.world_to_pixel(aligned(end)) - center;
            if d.x.abs() > limit || d.y.abs() > limit {
                break;
            }
            end += 1;
        }
        if end - reference < options.min_frames {
            continue;
        }

        // Warp by the similarity taking the endpoints to their perturbed copies.
        let a0 = reg.world_to_pixel(aligned(reference));
        let a1 = reg.world_to_pixel(aligned(end - 1));
        let warp = two_point_similarity(a0, a1, a0 + noise0, a1 + noise1);
        let warped: Vec<Vec2> = (reference..end).map(|i| warp(reg.world_to_pixel(aligned(i)))).collect();
        let truth: Vec<Vec2> = (reference..end).map(|i| reg.world_to_pixel(gt.positions[i])).collect();

        // Shared flip + rotation about the crop centre.
        let (mut lo, mut hi) = (warped[0], warped[0]);
        for p in &warped {
            lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
            hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
        }
        let mid = lo.lerp(hi, 0.5);
        let offset = (
            libm::floor(mid.x - 0.5 * CROP as f64) as i64,
            libm::floor(mid.y - 0.5 * CROP as f64) as i64,
        );
        let c = Vec2::new(offset.0 as f64, offset.1 as f64) + Vec2::new(0.5 * CROP as f64, 0.5 * CROP as f64);
        let linear = |v: Vec2| {
            let f = if flip { Vec2::new(-v.x, v.y) } else { v };
            f.rotate(rotation)
        };
        let inverse = |v: Vec2| {
            let f = v.rotate(-rotation);
            if flip {
                Vec2::new(-f.x, f.y)
            } else {
                f
            }
        };
        let local = |p: Vec2| linear(p - c) + Vec2::new(0.5 * CROP as f64, 0.5 * CROP as f64);
        let mut pixels: Vec<Vec2> = warped.iter().map(|p| local(*p)).collect();
        let keep = pixels
            .iter()
            .position(|p| !(p.x >= 0.0 && p.y >= 0.0 && p.x < CROP as f64 && p.y < CROP as f64))
            .unwrap_or(pixels.len());
        if keep < options.min_frames {
            continue;
        }
        pixels.truncate(keep);
        let frame_truth: Vec<Vec2> = truth[..keep].iter().map(|p| local(*p)).collect();
        let frame_targets: Vec<Vec2> = frame_truth.iter().zip(&pixels).map(|(t, p)| *t - *p).collect();

        let mut crop = Vec::with_capacity(raster::PLANE);
        let half = Vec2::new(0.5 * CROP as f64, 0.5 * CROP as f64);
        for v in 0..CROP {
            for u in 0..CROP {
                let q = c + inverse(Vec2::new(u as f64 + 0.5, v as f64 + 0.5) - half);
                crop.push(plan.rgb_or_background(libm::floor(q.x) as i64, libm::floor(q.y) as i64));
            }
        }
        let frames = reference..reference + keep;
        let input = raster::render_sample(&crop, offset, frames.clone(), pixels, &traj.timestamps()[frames])?;
        let target = raster::paint_flow(&input.frame_pixels, &frame_targets);
        out.push(TrainingSample {
            input,
            target,
            frame_targets,
            frame_truth,
            flipped: flip,
            rotation,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
