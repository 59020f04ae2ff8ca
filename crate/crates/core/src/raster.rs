//! Image samples for the correction-flow model: segmentation of long
//! trajectories, floorplan crops, time-coloured trajectory plots, flow
//! read-back and Gaussian stitching of overlapping segments.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::Range;

use crate::error::{Error, Result};
use crate::geo::{FloorplanRaster, GeoRegistration, Vec2};
use crate::trajectory::PositionSeries;

/// Side of the square sample image, in pixels.
pub const CROP: usize = 250;
/// Longest segment, in seconds.
pub const MAX_SEGMENT_SECONDS: f64 = 240.0;
/// Radius of the plotted trajectory disks and of the masked-pixel search.
pub const DISK_RADIUS: f64 = 3.0;
/// Segments are capped below the full crop so every frame pixel lands inside
/// `[0, CROP)` after integer crop placement.
pub const MAX_SEGMENT_EXTENT: f64 = CROP as f64 - 2.0;

pub const INPUT_CHANNELS: usize = 6;
pub const PLANE: usize = CROP * CROP;

/// One segment rendered for the flow model.
#[derive(Debug, Clone, PartialEq)]
pub struct SegmentSample {
    /// Channel-major `6 × 250 × 250` in `[0, 1]`: floorplan RGB, then
    /// trajectory RGB.
    pub image: Vec<f32>,
    /// Full-floorplan pixel coordinates of the crop's top-left corner.
    pub crop_offset: (i64, i64),
    /// Frames covered by the segment.
    pub frame_range: Range<usize>,
    /// Continuous crop-pixel position of every frame in `frame_range`.
    pub frame_pixels: Vec<Vec2>,
    /// Duration of the segment in seconds.
    pub span: f64,
}

impl SegmentSample {
    pub fn trajectory_mask(&self) -> Vec<bool> {
        let base = 3 * PLANE;
        (0..PLANE)
            .map(|i| (0..3).any(|c| self.image[base + c * PLANE + i] != 0.0))
            .collect()
    }
}

/// Two-channel pixel displacement with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    /// Channel-major `2 × 250 × 250`: x then y displacement in pixels.
    pub flow: Vec<f32>,
    pub mask: Vec<bool>,
}

impl FlowField {
    pub fn zeros() -> Self {
        Self {
            flow: alloc::vec![0.0; 2 * PLANE],
            mask: alloc::vec![false; PLANE],
        }
    }

    pub fn uniform(v: Vec2, mask: Vec<bool>) -> Self {
        let mut flow = alloc::vec![v.x as f32; 2 * PLANE];
        flow[PLANE..].iter_mut().for_each(|f| *f = v.y as f32);
        Self { flow, mask }
    }

    pub fn at(&self, u: usize, v: usize) -> Vec2 {
        let i = v * CROP + u;
        Vec2::new(f64::from(self.flow[i]), f64::from(self.flow[PLANE + i]))
    }

    pub fn set(&mut self, u: usize, v: usize, d: Vec2) {
        let i = v * CROP + u;
        self.flow[i] = d.x as f32;
        self.flow[PLANE + i] = d.y as f32;
        self.mask[i] = true;
    }

    pub fn scaled(&self, k: f32) -> Self {
        Self {
            flow: self.flow.iter().map(|f| f * k).collect(),
            mask: self.mask.clone(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.flow.len() != 2 * PLANE || self.mask.len() != PLANE {
            return Err(Error::LengthMismatch {
                what: "flow field",
                left: self.flow.len(),
                right: 2 * PLANE,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct BBox {
    min: Vec2,
    max: Vec2,
}

impl BBox {
    fn of(points: impl IntoIterator<Item = Vec2>) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let mut b = BBox { min: first, max: first };
        for p in it {
            b.include(p);
        }
        Some(b)
    }

    fn include(&mut self, p: Vec2) {
        self.min.x = self.min.x.min(p.x);
        self.min.y = self.min.y.min(p.y);
        self.max.x = self.max.x.max(p.x);
        self.max.y = self.max.y.max(p.y);
    }

    fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// Splits a trajectory into overlapping segments.
///
/// Each segment grows until it spans more than four minutes or its pixel
/// bounding box no longer fits the crop. The next segment starts after the
/// first three quarters of the previous one, so the last quarter overlaps.
pub fn segment_trajectory(series: &PositionSeries, reg: &GeoRegistration) -> Vec<Range<usize>> {
    let n = series.len();
    if n == 0 {
        return Vec::new();
    }
    let pixels: Vec<Vec2> = series.positions.iter().map(|p| reg.world_to_pixel(*p)).collect();
    let ts = &series.timestamps;
    let mut out = Vec::new();
    let mut start = 0;
    loop {
        let mut bbox = BBox {
            min: pixels[start],
            max: pixels[start],
        };
        let mut end = start + 1;
        while end < n {
            if ts[end] - ts[start] > MAX_SEGMENT_SECONDS {
                break;
            }
            let mut grown = bbox;
            grown.include(pixels[end]);
            if grown.width() > MAX_SEGMENT_EXTENT || grown.height() > MAX_SEGMENT_EXTENT {
                break;
            }
            bbox = grown;
            end += 1;
        }
        out.push(start..end);
        if end == n {
            break;
        }
        let len = end - start;
        start += (3 * len / 4).max(1);
    }
    out
}

/// A `250 × 250` RGB crop of the floorplan and its top-left pixel offset.
#[derive(Debug, Clone, PartialEq)]
pub struct FloorplanCrop {
    pub rgb: Vec<[u8; 3]>,
    pub offset: (i64, i64),
}

fn crop_axis(min: f64, max: f64, image_extent: usize) -> i64 {
    let crop = CROP as i64;
    let centered = libm::floor(0.5 * (min + max) - 0.5 * CROP as f64) as i64;
    // Stay inside the image when it is large enough...
    let in_image = if image_extent as i64 >= crop {
        centered.clamp(0, image_extent as i64 - crop)
    } else {
        centered
    };
    // ...but never at the expense of the segment itself.
    let lo = libm::floor(max) as i64 - (crop - 1);
    let hi = libm::floor(min) as i64;
    if lo <= hi {
        in_image.clamp(lo, hi)
    } else {
        in_image
    }
}

/// Crops the floorplan around the bounding box of `positions`, padding
/// outside the plan with the background colour.
pub fn crop_floorplan(plan: &FloorplanRaster, positions: &[Vec2]) -> Result<FloorplanCrop> {
    let reg = &plan.registration;
    let bbox = BBox::of(positions.iter().map(|p| reg.world_to_pixel(*p))).ok_or(Error::Empty("segment"))?;
    if bbox.width() > CROP as f64 || bbox.height() > CROP as f64 {
        return Err(Error::BBoxTooLarge {
            width: bbox.width(),
            height: bbox.height(),
        });
    }
    let ox = crop_axis(bbox.min.x, bbox.max.x, plan.width());
    let oy = crop_axis(bbox.min.y, bbox.max.y, plan.height());
    Ok(FloorplanCrop {
        rgb: crop_pixels(plan, (ox, oy)),
        offset: (ox, oy),
    })
}

pub(crate) fn crop_pixels(plan: &FloorplanRaster, offset: (i64, i64)) -> Vec<[u8; 3]> {
    let mut rgb = Vec::with_capacity(PLANE);
    for v in 0..CROP as i64 {
        for u in 0..CROP as i64 {
            rgb.push(plan.rgb_or_background(offset.0 + u, offset.1 + v));
        }
    }
    rgb
}

/// Rainbow colour for normalized time `x ∈ [0, 1]`: hue sweeps 240° → 0°
/// (blue to red) at full saturation and value.
pub fn colormap(x: f64) -> [f32; 3] {
    let hue = 240.0 * (1.0 - x.clamp(0.0, 1.0));
    let sector = hue / 60.0;
    let i = libm::floor(sector).min(5.0);
    let f = sector - i;
    let (r, g, b) = match i as u32 {
        0 => (1.0, f, 0.0),
        1 => (1.0 - f, 1.0, 0.0),
        2 => (0.0, 1.0, f),
        3 => (0.0, 1.0 - f, 1.0),
        _ => (f, 0.0, 1.0),
    };
    [r as f32, g as f32, b as f32]
}

/// Pixel containing a continuous crop coordinate.
pub fn pixel_of(p: Vec2) -> (i64, i64) {
    (libm::floor(p.x) as i64, libm::floor(p.y) as i64)
}

/// Pixels whose centres lie within [`DISK_RADIUS`] of `p`, clipped to the crop.
pub fn disk_pixels(p: Vec2) -> impl Iterator<Item = (usize, usize)> {
    let r = DISK_RADIUS;
    let u0 = (libm::floor(p.x - r) as i64).max(0);
    let u1 = (libm::ceil(p.x + r) as i64).min(CROP as i64 - 1);
    let v0 = (libm::floor(p.y - r) as i64).max(0);
    let v1 = (libm::ceil(p.y + r) as i64).min(CROP as i64 - 1);
    (v0..=v1).flat_map(move |v| {
        (u0..=u1).filter_map(move |u| {
            let dx = u as f64 + 0.5 - p.x;
            let dy = v as f64 + 0.5 - p.y;
            (dx * dx + dy * dy <= r * r).then_some((u as usize, v as usize))
        })
    })
}

fn inside_crop(p: Vec2) -> bool {
    p.x >= 0.0 && p.y >= 0.0 && p.x < CROP as f64 && p.y < CROP as f64
}

/// Continuous crop-pixel coordinates of world positions.
pub fn crop_coordinates(positions: &[Vec2], reg: &GeoRegistration, offset: (i64, i64)) -> Vec<Vec2> {
    let o = Vec2::new(offset.0 as f64, offset.1 as f64);
    positions.iter().map(|p| reg.world_to_pixel(*p) - o).collect()
}

/// Renders frame pixels over a black background with time-coloured disks
/// (later frames on top) and stacks the result under the floorplan crop.
pub fn render_sample(
    crop_rgb: &[[u8; 3]],
    crop_offset: (i64, i64),
    frame_range: Range<usize>,
    frame_pixels: Vec<Vec2>,
    timestamps: &[f64],
) -> Result<SegmentSample> {
    if crop_rgb.len() != PLANE {
        return Err(Error::LengthMismatch {
            what: "floorplan crop",
            left: crop_rgb.len(),
            right: PLANE,
        });
    }
    if timestamps.len() != frame_pixels.len() || frame_range.len() != frame_pixels.len() {
        return Err(Error::LengthMismatch {
            what: "segment frames",
            left: frame_pixels.len(),
            right: frame_range.len(),
        });
    }
    if frame_pixels.is_empty() {
        return Err(Error::Empty("segment"));
    }
    if let Some(i) = frame_pixels.iter().position(|p| !inside_crop(*p)) {
        return Err(Error::FrameOutsideCrop {
            frame: frame_range.start + i,
        });
    }
    let mut image = alloc::vec![0.0f32; INPUT_CHANNELS * PLANE];
    for (i, c) in crop_rgb.iter().enumerate() {
        for k in 0..3 {
            image[k * PLANE + i] = f32::from(c[k]) / 255.0;
        }
    }
    let t0 = timestamps[0];
    let span = timestamps[timestamps.len() - 1] - t0;
    for (p, t) in frame_pixels.iter().zip(timestamps) {
        let x = if span > 0.0 { (t - t0) / span } else { 0.0 };
        let color = colormap(x);
        for (u, v) in disk_pixels(*p) {
            let i = v * CROP + u;
            for k in 0..3 {
                image[(3 + k) * PLANE + i] = color[k];
            }
        }
    }
    Ok(SegmentSample {
        image,
        crop_offset,
        frame_range,
        frame_pixels,
        span,
    })
}

/// Rasterizes the frames of `range` from `series` onto `crop`.
pub fn rasterize_segment(
    series: &PositionSeries,
    range: Range<usize>,
    crop: &FloorplanCrop,
    reg: &GeoRegistration,
) -> Result<SegmentSample> {
    if range.end > series.len() || range.is_empty() {
        return Err(Error::InvalidArgument("segment range outside the series".into()));
    }
    let pixels = crop_coordinates(&series.positions[range.clone()], reg, crop.offset);
    render_sample(&crop.rgb, crop.offset, range.clone(), pixels, &series.timestamps[range])
}

/// Segments, crops and rasterizes a whole trajectory.
pub fn build_samples(series: &PositionSeries, plan: &FloorplanRaster) -> Result<Vec<SegmentSample>> {
    segment_trajectory(series, &plan.registration)
        .into_iter()
        .map(|range| {
            let crop = crop_floorplan(plan, &series.positions[range.clone()])?;
            rasterize_segment(series, range, &crop, &plan.registration)
        })
        .collect()
}

/// Paints a per-frame pixel displacement with the same disks and painter's
/// order as the trajectory plot.
pub fn paint_flow(frame_pixels: &[Vec2], displacements: &[Vec2]) -> FlowField {
    let mut field = FlowField::zeros();
    for (p, d) in frame_pixels.iter().zip(displacements) {
        for (u, v) in disk_pixels(*p) {
            field.set(u, v, *d);
        }
    }
    field
}

/// Ground-truth flow for a sample: the pixel displacement from the sampled
/// estimate to the reference position of each frame.
pub fn oracle_flow(sample: &SegmentSample, reference: &[Vec2], estimate: &[Vec2], reg: &GeoRegistration) -> FlowField {
    let displacements: Vec<Vec2> = sample
        .frame_range
        .clone()
        .map(|f| reg.vector_to_pixel(reference[f] - estimate[f]))
        .collect();
    let mut field = paint_flow(&sample.frame_pixels, &displacements);
    // Each frame reads its own pixel, so store there the mean over the
    // frames centred in it instead of whichever disk was painted last.
    let mut sums: BTreeMap<(usize, usize), (Vec2, f64)> = BTreeMap::new();
    for (p, d) in sample.frame_pixels.iter().zip(&displacements) {
        let (u, v) = pixel_of(*p);
        if u >= 0 && v >= 0 && u < CROP as i64 && v < CROP as i64 {
            let e = sums.entry((u as usize, v as usize)).or_insert((Vec2::ZERO, 0.0));
            e.0 += *d;
            e.1 += 1.0;
        }
    }
    for ((u, v), (sum, n)) in sums {
        field.set(u, v, sum * (1.0 / n));
    }
    field
}

fn read_flow(flow: &FlowField, p: Vec2) -> Vec2 {
    let (u, v) = pixel_of(p);
    let (u, v) = (u.clamp(0, CROP as i64 - 1), v.clamp(0, CROP as i64 - 1));
    if flow.mask[v as usize * CROP + u as usize] {
        return flow.at(u as usize, v as usize);
    }
    let r = DISK_RADIUS as i64;
    let mut best: Option<(i64, usize, usize)> = None;
    for dv in -r..=r {
        for du in -r..=r {
            let d2 = du * du + dv * dv;
            if d2 > r * r {
                continue;
            }
            let (x, y) = (u + du, v + dv);
            if x < 0 || y < 0 || x >= CROP as i64 || y >= CROP as i64 {
                continue;
            }
            if flow.mask[y as usize * CROP + x as usize] && best.is_none_or(|(b, _, _)| d2 < b) {
                best = Some((d2, x as usize, y as usize));
            }
        }
    }
    best.map_or(Vec2::ZERO, |(_, x, y)| flow.at(x, y))
}

/// Per-frame world corrections (meters) read from a flow field.
///
/// Each frame reads the flow at its own pixel; if that pixel is unmasked the
/// nearest masked pixel within the disk radius is used instead, else zero.
pub fn apply_flow(sample: &SegmentSample, flow: &FlowField, reg: &GeoRegistration) -> Result<Vec<Vec2>> {
    flow.check()?;
    Ok(sample
        .frame_pixels
        .iter()
        .map(|p| reg.vector_to_world(read_flow(flow, *p)))
        .collect())
}

/// Gaussian time weight of a frame `offset` seconds into a segment of length `span`.
pub fn stitch_weight(offset: f64, span: f64) -> f64 {
    if span <= 0.0 {
        return 1.0;
    }
    let mean = 0.5 * span;
    let sd = 0.25 * span;
    let z = (offset - mean) / sd;
    libm::exp(-0.5 * z * z) / (sd * libm::sqrt(2.0 * core::f64::consts::PI))
}

/// Weighted average of overlapping per-segment corrections.
pub fn stitch(timestamps: &[f64], segments: &[SegmentSample], corrections: &[Vec<Vec2>]) -> Result<Vec<Vec2>> {
    if segments.len() != corrections.len() {
        return Err(Error::LengthMismatch {
            what: "segment corrections",
            left: corrections.len(),
            right: segments.len(),
        });
    }
    let n = timestamps.len();
    let mut sum = alloc::vec![Vec2::ZERO; n];
    let mut weight = alloc::vec![0.0; n];
    for (seg, corr) in segments.iter().zip(corrections) {
        if corr.len() != seg.frame_range.len() || seg.frame_range.end > n {
            return Err(Error::LengthMismatch {
                what: "segment correction frames",
                left: corr.len(),
                right: seg.frame_range.len(),
            });
        }
        let t0 = timestamps[seg.frame_range.start];
        for (f, c) in seg.frame_range.clone().zip(corr) {
            let w = stitch_weight(timestamps[f] - t0, seg.span);
            sum[f] += *c * w;
            weight[f] += w;
        }
    }
    sum.iter()
        .zip(&weight)
        .enumerate()
        .map(|(f, (s, w))| if *w > 0.0 { Ok(*s * (1.0 / w)) } else { Err(Error::UncoveredFrame(f)) })
        .collect()
}
