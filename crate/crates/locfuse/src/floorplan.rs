//! Floorplan images with their JSON legend and registration.

use std::path::{Path, PathBuf};

use locfuse_core::geo::{Legend, PixelClass, DEFAULT_MATCH_THRESHOLD};
use locfuse_core::{FloorplanRaster, GeoRegistration, Vec2};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::io;

/// `{"pixels_per_meter": 2.5, "origin_world": [x, y], "rotation_rad": 0.0,
/// "flip_y": true, "legend": {"corridor": [255, 255, 255], ...}}`
///
/// Legend order is the file order and breaks color ties. `image` is
/// resolved against the config's directory and defaults to the config path
/// with a `.png` extension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloorplanConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<PathBuf>,
    pub pixels_per_meter: f64,
    pub origin_world: [f64; 2],
    #[serde(default)]
    pub rotation_rad: f64,
    #[serde(default)]
    pub flip_y: bool,
    #[serde(default = "default_legend")]
    pub legend: Map<String, Value>,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

fn default_threshold() -> f64 {
    DEFAULT_MATCH_THRESHOLD
}

fn default_legend() -> Map<String, Value> {
    legend_to_json(&Legend::default())
}

fn class_name(class: PixelClass) -> &'static str {
    match class {
        PixelClass::Corridor => "corridor",
        PixelClass::Room => "room",
        PixelClass::Unwalkable => "unwalkable",
        PixelClass::OpenBoundary => "open_boundary",
        PixelClass::Wall => "wall",
        PixelClass::Background => "background",
    }
}

pub fn legend_to_json(legend: &Legend) -> Map<String, Value> {
    legend
        .entries
        .iter()
        .map(|(class, rgb)| (class_name(*class).to_string(), Value::from(rgb.to_vec())))
        .collect()
}

impl FloorplanConfig {
    pub fn from_registration(reg: &GeoRegistration, legend: &Legend, image: Option<PathBuf>) -> Self {
        Self {
            image,
            pixels_per_meter: reg.pixels_per_meter,
            origin_world: [reg.origin_world.x, reg.origin_world.y],
            rotation_rad: reg.rotation,
            flip_y: reg.flip_y,
            legend: legend_to_json(legend),
            threshold: legend.threshold,
        }
    }

    pub fn registration(&self) -> locfuse_core::Result<GeoRegistration> {
        GeoRegistration::new(
            Vec2::new(self.origin_world[0], self.origin_world[1]),
            self.pixels_per_meter,
            self.rotation_rad,
            self.flip_y,
        )
    }

    pub fn legend(&self, path: &Path) -> Result<Legend> {
        let mut entries = Vec::with_capacity(self.legend.len());
        for (name, value) in &self.legend {
            let class =
                PixelClass::from_name(name).ok_or_else(|| Error::format(path, format!("unknown legend class `{name}`")))?;
            let rgb: [u8; 3] = serde_json::from_value(value.clone())
                .map_err(|e| Error::format(path, format!("legend entry `{name}`: {e}")))?;
            entries.push((class, rgb));
        }
        if entries.is_empty() {
            return Err(Error::format(path, "empty legend"));
        }
        Ok(Legend {
            entries,
            threshold: self.threshold,
            ..Legend::default()
        })
    }
}

pub fn image_path(config_path: &Path, config: &FloorplanConfig) -> PathBuf {
    match &config.image {
        Some(p) if p.is_absolute() => p.clone(),
        Some(p) => config_path.parent().unwrap_or(Path::new(".")).join(p),
        None => config_path.with_extension("png"),
    }
}

pub fn load_floorplan(config_path: &Path) -> Result<FloorplanRaster> {
    let config: FloorplanConfig = io::read_json(config_path)?;
    let image = image_path(config_path, &config);
    let legend = config.legend(config_path)?;
    let reg = config.registration().map_err(|e| Error::format(config_path, e.to_string()))?;
    let img = image::open(&image)
        .map_err(|e| Error::format(&image, e.to_string()))?
        .to_rgb8();
    let (w, h) = img.dimensions();
    let rgb = img.pixels().map(|p| p.0).collect();
    Ok(FloorplanRaster::from_rgb(w as usize, h as usize, rgb, &legend, reg)?)
}

pub fn write_png(path: &Path, width: usize, height: usize, rgb: &[[u8; 3]]) -> Result<()> {
    let flat: Vec<u8> = rgb.iter().flatten().copied().collect();
    let img = image::RgbImage::from_raw(width as u32, height as u32, flat)
        .ok_or_else(|| Error::format(path, "pixel buffer does not match the image size"))?;
    io::write_atomic(path, |w| {
        let mut buf = std::io::Cursor::new(Vec::new());
        img.write_to(&mut buf, image::ImageFormat::Png).map_err(std::io::Error::other)?;
        w.write_all(buf.get_ref())
    })
}

/// Writes `<stem>.png` and `<stem>.json` next to each other; returns the JSON path.
pub fn save_floorplan(dir: &Path, stem: &str, plan: &FloorplanRaster, legend: &Legend) -> Result<PathBuf> {
    let png = dir.join(format!("{stem}.png"));
    write_png(&png, plan.width(), plan.height(), plan.rgb())?;
    let json = dir.join(format!("{stem}.json"));
    let config = FloorplanConfig::from_registration(&plan.registration, legend, Some(PathBuf::from(format!("{stem}.png"))));
    io::write_json(&json, &config)?;
    Ok(json)
}
