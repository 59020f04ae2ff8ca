//! Segment files shared with the flow network.
//!
//! Each file is a 256-byte JSON header padded with spaces, followed by
//! little-endian `f32` values in channel-major order. Inputs carry 6
//! channels, flows and targets carry `dx, dy, mask`.

use std::fs;
use std::path::{Path, PathBuf};

use locfuse_core::raster::{FlowField, SegmentSample, CROP, INPUT_CHANNELS, PLANE};
use locfuse_core::synth::TrainingSample;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

pub const MAGIC: &str = "FDHL1";
pub const HEADER_LEN: usize = 256;
pub const FLOW_CHANNELS: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub magic: String,
    pub crop_offset: [i64; 2],
    /// First and last frame, inclusive.
    pub frame_range: [usize; 2],
    pub span_s: f64,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Header {
    pub fn for_sample(sample: &SegmentSample, channels: usize) -> Self {
        Self {
            magic: MAGIC.into(),
            crop_offset: [sample.crop_offset.0, sample.crop_offset.1],
            frame_range: [sample.frame_range.start, sample.frame_range.end - 1],
            span_s: sample.span,
            channels,
            height: CROP,
            width: CROP,
        }
    }

    fn encode(&self, path: &Path) -> Result<[u8; HEADER_LEN]> {
        let json = serde_json::to_vec(self).map_err(|e| Error::format(path, e.to_string()))?;
        if json.len() > HEADER_LEN {
            return Err(Error::format(path, "header does not fit in 256 bytes"));
        }
        let mut out = [b' '; HEADER_LEN];
        out[..json.len()].copy_from_slice(&json);
        Ok(out)
    }
}

pub fn input_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("seg_{k}_input.bin"))
}

pub fn flow_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("seg_{k}_flow.bin"))
}

pub fn target_path(dir: &Path, k: usize) -> PathBuf {
    dir.join(format!("seg_{k}_target.bin"))
}

pub fn write_tensor(path: &Path, header: &Header, data: &[f32]) -> Result<()> {
    if data.len() != header.channels * header.height * header.width {
        return Err(Error::format(path, "tensor size does not match header"));
    }
    let head = header.encode(path)?;
    io::write_atomic(path, |w| {
        w.write_all(&head)?;
        let mut bytes = Vec::with_capacity(4 * data.len());
        for v in data {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes)
    })
}

pub fn read_tensor(path: &Path) -> Result<(Header, Vec<f32>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < HEADER_LEN {
        return Err(Error::format(path, "file shorter than its header"));
    }
    let header: Header = serde_json::from_slice(bytes[..HEADER_LEN].trim_ascii_end())
        .map_err(|e| Error::format(path, format!("bad header: {e}")))?;
    if header.magic != MAGIC {
        return Err(Error::format(path, format!("bad magic `{}`", header.magic)));
    }
    let body = &bytes[HEADER_LEN..];
    let expected = header.channels * header.height * header.width;
    if body.len() != 4 * expected {
        return Err(Error::format(
            path,
            format!("expected {} payload bytes, found {}", 4 * expected, body.len()),
        ));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((header, data))
}

pub fn flow_tensor(flow: &FlowField) -> Vec<f32> {
    let mut data = Vec::with_capacity(FLOW_CHANNELS * PLANE);
    data.extend_from_slice(&flow.flow);
    data.extend(flow.mask.iter().map(|m| if *m { 1.0 } else { 0.0 }));
    data
}

pub fn write_input(dir: &Path, k: usize, sample: &SegmentSample) -> Result<()> {
    write_tensor(&input_path(dir, k), &Header::for_sample(sample, INPUT_CHANNELS), &sample.image)
}

pub fn write_flow(path: &Path, sample: &SegmentSample, flow: &FlowField) -> Result<()> {
    write_tensor(path, &Header::for_sample(sample, FLOW_CHANNELS), &flow_tensor(flow))
}

pub fn read_flow(path: &Path) -> Result<(Header, FlowField)> {
    let (header, data) = read_tensor(path)?;
    if header.channels != FLOW_CHANNELS || header.height != CROP || header.width != CROP {
        return Err(Error::format(
            path,
            format!("expected a {FLOW_CHANNELS}×{CROP}×{CROP} flow"),
        ));
    }
    let mut mask = Vec::with_capacity(PLANE);
    for v in &data[2 * PLANE..] {
        match *v {
            0.0 => mask.push(false),
            1.0 => mask.push(true),
            other => return Err(Error::format(path, format!("mask value {other} is not 0 or 1"))),
        }
    }
    let flow = data[..2 * PLANE].to_vec();
    if flow.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(path, "non-finite flow value"));
    }
    Ok((header, FlowField { flow, mask }))
}

/// Writes the input and target of each training sample.
pub fn write_training_samples(dir: &Path, samples: &[TrainingSample]) -> Result<()> {
    for (k, s) in samples.iter().enumerate() {
        write_input(dir, k, &s.input)?;
        write_flow(&target_path(dir, k), &s.input, &s.target)?;
    }
    Ok(())
}
