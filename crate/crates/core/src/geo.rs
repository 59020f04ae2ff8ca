//! Metric frames, floorplan rasters and the world/pixel registration.

use alloc::vec::Vec;
use core::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 2D point or displacement. Meters in the world frame, pixels in the
/// raster frame.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    /// Unit vector at `angle` radians from the +x axis.
    pub fn from_angle(angle: f64) -> Self {
        Self::new(libm::cos(angle), libm::sin(angle))
    }

    pub fn norm(self) -> f64 {
        libm::hypot(self.x, self.y)
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Vec2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn angle(self) -> f64 {
        libm::atan2(self.y, self.x)
    }

    /// Counter-clockwise rotation by `angle` radians.
    pub fn rotate(self, angle: f64) -> Self {
        let (s, c) = (libm::sin(angle), libm::cos(angle));
        Self::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn perp(self) -> Self {
        Self::new(-self.y, self.x)
    }

    pub fn distance(self, o: Vec2) -> f64 {
        (self - o).norm()
    }

    pub fn lerp(self, o: Vec2, a: f64) -> Self {
        self + (o - self) * a
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, o: Vec2) {
        self.x += o.x;
        self.y += o.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// Similarity transform from the local metric frame onto floorplan pixels.
///
/// `pixel = F · s · R(rotation) · (world − origin_world)` where `F` negates
/// the y coordinate when `flip_y` is set (raster rows grow downward).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoRegistration {
    pub origin_world: Vec2,
    pub pixels_per_meter: f64,
    pub rotation: f64,
    pub flip_y: bool,
}

impl Default for GeoRegistration {
    fn default() -> Self {
        Self {
            origin_world: Vec2::ZERO,
            pixels_per_meter: 2.5,
            rotation: 0.0,
            flip_y: false,
        }
    }
}

impl GeoRegistration {
    pub fn new(origin_world: Vec2, pixels_per_meter: f64, rotation: f64, flip_y: bool) -> Result<Self> {
        let reg = Self {
            origin_world,
            pixels_per_meter,
            rotation,
            flip_y,
        };
        reg.validate()?;
        Ok(reg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pixels_per_meter.is_finite() && self.pixels_per_meter > 0.0) {
            return Err(Error::InvalidArgument(alloc::format!(
                "pixels_per_meter must be positive, got {}",
                self.pixels_per_meter
            )));
        }
        if !self.rotation.is_finite() || !self.origin_world.x.is_finite() || !self.origin_world.y.is_finite() {
            return Err(Error::InvalidArgument("non-finite registration".into()));
        }
        Ok(())
    }

    /// Maps a world displacement (meters) to a pixel displacement.
    pub fn vector_to_pixel(&self, v: Vec2) -> Vec2 {
        let r = v.rotate(self.rotation) * self.pixels_per_meter;
        if self.flip_y {
            Vec2::new(r.x, -r.y)
        } else {
            r
        }
    }

    /// Maps a pixel displacement to a world displacement (meters).
    pub fn vector_to_world(&self, v: Vec2) -> Vec2 {
        let f = if self.flip_y { Vec2::new(v.x, -v.y) } else { v };
        (f * (1.0 / self.pixels_per_meter)).rotate(-self.rotation)
    }

    pub fn world_to_pixel(&self, p: Vec2) -> Vec2 {
        self.vector_to_pixel(p - self.origin_world)
    }

    pub fn pixel_to_world(&self, p: Vec2) -> Vec2 {
        self.origin_world + self.vector_to_world(p)
    }
}

pub fn world_to_pixel(p: Vec2, reg: &GeoRegistration) -> Vec2 {
    reg.world_to_pixel(p)
}

pub fn pixel_to_world(p: Vec2, reg: &GeoRegistration) -> Vec2 {
    reg.pixel_to_world(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PixelClass {
    Corridor,
    Room,
    Unwalkable,
    OpenBoundary,
    Wall,
    Background,
}

impl PixelClass {
    pub fn is_walkable(self) -> bool {
        matches!(self, PixelClass::Corridor | PixelClass::Room)
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "corridor" => PixelClass::Corridor,
            "room" => PixelClass::Room,
            "unwalkable" => PixelClass::Unwalkable,
            "open_boundary" => PixelClass::OpenBoundary,
            "wall" => PixelClass::Wall,
            "background" => PixelClass::Background,
            _ => return None,
        })
    }
}

pub const DEFAULT_MATCH_THRESHOLD: f64 = 60.0;

/// Ordered colour-to-class table. Earlier entries win distance ties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Legend {
    pub entries: Vec<(PixelClass, [u8; 3])>,
    /// Maximum RGB distance for a match; farther pixels become `Background`.
    pub threshold: f64,
    /// Colour used to pad crops that reach beyond the plan.
    pub background_rgb: [u8; 3],
}

impl Default for Legend {
    fn default() -> Self {
        Self {
            entries: alloc::vec![
                (PixelClass::Corridor, [255, 255, 255]),
                (PixelClass::Room, [255, 255, 0]),
                (PixelClass::Unwalkable, [128, 128, 128]),
                (PixelClass::OpenBoundary, [150, 75, 0]),
                (PixelClass::Wall, [0, 0, 0]),
            ],
            threshold: DEFAULT_MATCH_THRESHOLD,
            background_rgb: [0, 0, 0],
        }
    }
}

impl Legend {
    pub fn classify(&self, rgb: [u8; 3]) -> PixelClass {
        let mut best: Option<(PixelClass, f64)> = None;
        for &(class, c) in &self.entries {
            let d2: f64 = (0..3)
                .map(|i| {
                    let d = f64::from(rgb[i]) - f64::from(c[i]);
                    d * d
                })
                .sum();
            if best.is_none_or(|(_, b)| d2 < b) {
                best = Some((class, d2));
            }
        }
        match best {
            Some((class, d2)) if libm::sqrt(d2) <= self.threshold => class,
            _ => PixelClass::Background,
        }
    }

    pub fn color_of(&self, class: PixelClass) -> [u8; 3] {
        self.entries
            .iter()
            .find(|(c, _)| *c == class)
            .map(|(_, rgb)| *rgb)
            .unwrap_or(self.background_rgb)
    }
}

/// A classified, geo-registered floorplan image. Immutable after construction.
#[derive(Debug, Clone)]
pub struct FloorplanRaster {
    width: usize,
    height: usize,
    classes: Vec<PixelClass>,
    rgb: Vec<[u8; 3]>,
    background_rgb: [u8; 3],
    pub registration: GeoRegistration,
}

impl FloorplanRaster {
    /// Classifies a row-major RGB image with the legend.
    pub fn from_rgb(
        width: usize,
        height: usize,
        rgb: Vec<[u8; 3]>,
        legend: &Legend,
        registration: GeoRegistration,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Empty("floorplan image"));
        }
        if rgb.len() != width * height {
            return Err(Error::LengthMismatch {
                what: "floorplan pixels",
                left: rgb.len(),
                right: width * height,
            });
        }
        if legend.entries.is_empty() {
            return Err(Error::Empty("legend"));
        }
        registration.validate()?;
        let classes = rgb.iter().map(|&c| legend.classify(c)).collect();
        Ok(Self {
            width,
            height,
            classes,
            rgb,
            background_rgb: legend.background_rgb,
            registration,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn class_at(&self, x: usize, y: usize) -> PixelClass {
        self.classes[y * self.width + x]
    }

    pub fn rgb_at(&self, x: usize, y: usize) -> [u8; 3] {
        self.rgb[y * self.width + x]
    }

    /// RGB at signed pixel coordinates, padded outside the image.
    pub fn rgb_or_background(&self, x: i64, y: i64) -> [u8; 3] {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            self.background_rgb
        } else {
            self.rgb_at(x as usize, y as usize)
        }
    }

    pub fn background_rgb(&self) -> [u8; 3] {
        self.background_rgb
    }

    pub fn classes(&self) -> &[PixelClass] {
        &self.classes
    }

    pub fn rgb(&self) -> &[[u8; 3]] {
        &self.rgb
    }

    pub fn background_count(&self) -> usize {
        self.classes.iter().filter(|c| **c == PixelClass::Background).count()
    }
}
