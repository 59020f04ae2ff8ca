//! Trajectory-over-floorplan PNG rendering.

use std::path::Path;

use image::{Rgb, RgbImage};
use locfuse_core::optimizer::FlpFix;
use locfuse_core::raster::colormap;
use locfuse_core::{FloorplanRaster, PositionSeries, Vec2};

use crate::error::{Error, Result};
use crate::io;

const GT_COLOR: Rgb<u8> = Rgb([255, 0, 255]);
const FIX_COLOR: Rgb<u8> = Rgb([0, 160, 0]);

#[derive(Debug, Clone, Copy)]
pub struct PlotOptions {
    /// Floorplan brightness, 0 to 1, so the overlays stand out.
    pub plan_brightness: f32,
    pub dot_radius: i64,
}

impl Default for PlotOptions {
    fn default() -> Self {
        Self {
            plan_brightness: 0.5,
            dot_radius: 1,
        }
    }
}

fn put(img: &mut RgbImage, x: i64, y: i64, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

/// The estimate is colored blue to red by time and drawn over the magenta
/// ground-truth crosses; fixes are green squares.
pub fn render(
    plan: &FloorplanRaster,
    estimate: &PositionSeries,
    gt: &[(f64, Vec2)],
    fixes: &[FlpFix],
    options: &PlotOptions,
) -> RgbImage {
    let (w, h) = (plan.width() as u32, plan.height() as u32);
    let mut img = RgbImage::from_fn(w, h, |x, y| {
        let c = plan.rgb_at(x as usize, y as usize);
        Rgb(c.map(|v| (f32::from(v) * options.plan_brightness) as u8))
    });
    let reg = &plan.registration;
    for (_, p) in gt {
        let q = reg.world_to_pixel(*p);
        let (u, v) = (q.x.floor() as i64, q.y.floor() as i64);
        for d in -2..=2 {
            put(&mut img, u + d, v + d, GT_COLOR);
            put(&mut img, u + d, v - d, GT_COLOR);
        }
    }
    let (t0, t1) = match (estimate.timestamps.first(), estimate.timestamps.last()) {
        (Some(a), Some(b)) => (*a, *b),
        _ => (0.0, 0.0),
    };
    let span = (t1 - t0).max(f64::MIN_POSITIVE);
    for (t, p) in estimate.timestamps.iter().zip(&estimate.positions) {
        let rgb = colormap((t - t0) / span).map(|v| (v * 255.0).round() as u8);
        let q = reg.world_to_pixel(*p);
        let (u, v) = (q.x.floor() as i64, q.y.floor() as i64);
        let r = options.dot_radius;
        for dv in -r..=r {
            for du in -r..=r {
                if du * du + dv * dv <= r * r {
                    put(&mut img, u + du, v + dv, Rgb(rgb));
                }
            }
        }
    }
    for f in fixes {
        let q = reg.world_to_pixel(f.position);
        let (u, v) = (q.x.floor() as i64, q.y.floor() as i64);
        for d in -4..=4 {
            put(&mut img, u + d, v - 4, FIX_COLOR);
            put(&mut img, u + d, v + 4, FIX_COLOR);
            put(&mut img, u - 4, v + d, FIX_COLOR);
            put(&mut img, u + 4, v + d, FIX_COLOR);
        }
    }
    img
}

pub fn save(path: &Path, img: &RgbImage) -> Result<()> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .map_err(|e| Error::format(path, e.to_string()))?;
    io::write_atomic(path, |w| w.write_all(buf.get_ref()))
}
