//! CSV files for trajectories, positions and fixes, and atomic writes.

use std::fs;
use std::io::Write;
use std::path::Path;

use locfuse_core::optimizer::FlpFix;
use locfuse_core::{InertialTrajectory, PositionSeries, Vec2};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Larger gaps between consecutive timestamps are reported as warnings.
pub const MAX_GAP_SECONDS: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub t: f64,
    pub speed: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FixRecord {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub accuracy: f64,
}

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, fill: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf).map_err(|e| Error::io(path, e))?;
        buf.flush().map_err(|e| Error::io(path, e))?;
    }
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_records<T: DeserializeOwned>(path: &Path, columns: &[&str]) -> Result<Vec<(u64, T)>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let found: Vec<&str> = headers.iter().collect();
    if found != columns {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header `{}`, found `{}`", columns.join(","), found.join(",")),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let value = record.deserialize(Some(&headers)).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            line,
            message: e.to_string(),
        })?;
        out.push((line, value));
    }
    Ok(out)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Schema {
            path: path.to_path_buf(),
            line,
            message: format!("{other:?}"),
        },
    }
}

fn schema(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn check_times(path: &Path, rows: &[(u64, f64)]) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::format(path, "no records"));
    }
    for pair in rows.windows(2) {
        if !(pair[1].1 > pair[0].1) {
            return Err(schema(
                path,
                pair[1].0,
                format!("timestamp {} does not increase (previous {})", pair[1].1, pair[0].1),
            ));
        }
    }
    Ok(())
}

fn check_finite(path: &Path, line: u64, values: &[f64]) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(schema(path, line, "non-finite value"))
    }
}

/// Gaps longer than [`MAX_GAP_SECONDS`], as human-readable messages.
pub fn gap_warnings(timestamps: &[f64]) -> Vec<String> {
    timestamps
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] - w[0] > MAX_GAP_SECONDS)
        .map(|(i, w)| format!("gap of {:.3} s after frame {i} (t = {})", w[1] - w[0], w[0]))
        .collect()
}

fn warn_gaps(path: &Path, timestamps: &[f64]) {
    for w in gap_warnings(timestamps) {
        log::warn!("{}: {w}", path.display());
    }
}

pub fn read_trajectory(path: &Path) -> Result<InertialTrajectory> {
    let rows: Vec<(u64, TrajectoryRecord)> = read_records(path, &["t", "speed", "heading"])?;
    for (line, r) in &rows {
        check_finite(path, *line, &[r.t, r.speed, r.heading])?;
        if r.speed < 0.0 {
            return Err(schema(path, *line, "negative speed"));
        }
    }
    let times: Vec<(u64, f64)> = rows.iter().map(|(l, r)| (*l, r.t)).collect();
    check_times(path, &times)?;
    let ts: Vec<f64> = rows.iter().map(|(_, r)| r.t).collect();
    warn_gaps(path, &ts);
    Ok(InertialTrajectory::new(
        ts,
        rows.iter().map(|(_, r)| r.speed).collect(),
        rows.iter().map(|(_, r)| r.heading).collect(),
    )?)
}

pub fn read_positions(path: &Path) -> Result<PositionSeries> {
    let rows: Vec<(u64, PositionRecord)> = read_records(path, &["t", "x", "y"])?;
    for (line, r) in &rows {
        check_finite(path, *line, &[r.t, r.x, r.y])?;
    }
    let times: Vec<(u64, f64)> = rows.iter().map(|(l, r)| (*l, r.t)).collect();
    check_times(path, &times)?;
    let ts: Vec<f64> = rows.iter().map(|(_, r)| r.t).collect();
    warn_gaps(path, &ts);
    Ok(PositionSeries::new(
        ts,
        rows.iter().map(|(_, r)| Vec2::new(r.x, r.y)).collect(),
    )?)
}

/// Fixes need not be evenly spaced, so only ordering and accuracy are checked.
pub fn read_fixes(path: &Path) -> Result<Vec<FlpFix>> {
    let rows: Vec<(u64, FixRecord)> = read_records(path, &["t", "x", "y", "accuracy"])?;
    for (line, r) in &rows {
        check_finite(path, *line, &[r.t, r.x, r.y, r.accuracy])?;
        if r.accuracy < 0.0 {
            return Err(schema(path, *line, format!("negative accuracy {}", r.accuracy)));
        }
    }
    let times: Vec<(u64, f64)> = rows.iter().map(|(l, r)| (*l, r.t)).collect();
    check_times(path, &times)?;
    Ok(rows
        .into_iter()
        .map(|(_, r)| FlpFix {
            t: r.t,
            position: Vec2::new(r.x, r.y),
            accuracy: r.accuracy,
        })
        .collect())
}

fn write_records<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    write_atomic(path, |w| {
        let mut writer = csv::Writer::from_writer(w);
        for row in rows {
            writer.serialize(row).map_err(std::io::Error::other)?;
        }
        writer.flush()
    })
}

pub fn write_trajectory(path: &Path, traj: &InertialTrajectory) -> Result<()> {
    write_records(
        path,
        (0..traj.len()).map(|i| TrajectoryRecord {
            t: traj.timestamps()[i],
            speed: traj.speeds()[i],
            heading: traj.headings()[i],
        }),
    )
}

pub fn write_positions(path: &Path, series: &PositionSeries) -> Result<()> {
    write_records(
        path,
        series.timestamps.iter().zip(&series.positions).map(|(t, p)| PositionRecord {
            t: *t,
            x: p.x,
            y: p.y,
        }),
    )
}

pub fn write_fixes(path: &Path, fixes: &[FlpFix]) -> Result<()> {
    write_records(
        path,
        fixes.iter().map(|f| FixRecord {
            t: f.t,
            x: f.position.x,
            y: f.position.y,
            accuracy: f.accuracy,
        }),
    )
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
        w.write_all(b"\n")
    })
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Schema {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}
