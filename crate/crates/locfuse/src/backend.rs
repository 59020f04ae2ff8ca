//! Flow producers that live outside this process.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::thread;
use std::time::{Duration, Instant};

use locfuse_core::pipeline::FlowBackend;
use locfuse_core::raster::{FlowField, SegmentSample};
use locfuse_core::PositionSeries;

use crate::exchange;

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(600);

fn backend_err(msg: impl Into<String>) -> locfuse_core::Error {
    locfuse_core::Error::Backend(msg.into())
}

/// Writes segment inputs to `<root>/iter_<n>/` and collects the flows.
///
/// With a command, it is run once per iteration after `{dir}`, `{iteration}`
/// and `{checkpoint}` in its arguments are substituted; without
/// `{dir}` the directory is appended. Without a command the directory is
/// polled until every flow file exists.
#[derive(Debug, Clone)]
pub struct ExternalFlow {
    pub root: PathBuf,
    pub command: Vec<String>,
    pub checkpoint: Option<PathBuf>,
    pub timeout: Duration,
    pub poll_interval: Duration,
}

impl ExternalFlow {
    pub fn new(root: PathBuf) -> Self {
        Self {
            root,
            command: Vec::new(),
            checkpoint: None,
            timeout: DEFAULT_TIMEOUT,
            poll_interval: Duration::from_millis(200),
        }
    }

    pub fn iteration_dir(&self, iteration: usize) -> PathBuf {
        self.root.join(format!("iter_{}", iteration + 1))
    }

    fn run_command(&self, dir: &Path, iteration: usize) -> locfuse_core::Result<()> {
        let checkpoint = self.checkpoint.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let mut has_dir = false;
        let args: Vec<String> = self
            .command
            .iter()
            .map(|a| {
                has_dir |= a.contains("{dir}");
                a.replace("{dir}", &dir.display().to_string())
                    .replace("{iteration}", &(iteration + 1).to_string())
                    .replace("{checkpoint}", &checkpoint)
            })
            .collect();
        let mut cmd = Command::new(&args[0]);
        cmd.args(&args[1..]);
        if !has_dir {
            cmd.arg(dir);
        }
        log::info!("running flow command {:?}", cmd);
        let mut child = cmd.spawn().map_err(|e| backend_err(format!("cannot start `{}`: {e}", args[0])))?;
        let start = Instant::now();
        loop {
            match child.try_wait() {
                Ok(Some(status)) if status.success() => return Ok(()),
                Ok(Some(status)) => return Err(backend_err(format!("flow command failed with {status}"))),
                Ok(None) if start.elapsed() > self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(backend_err(format!("flow command timed out after {:?}", self.timeout)));
                }
                Ok(None) => thread::sleep(self.poll_interval.min(Duration::from_millis(50))),
                Err(e) => return Err(backend_err(e.to_string())),
            }
        }
    }

    fn wait_for_flows(&self, dir: &Path, count: usize) -> locfuse_core::Result<()> {
        let start = Instant::now();
        loop {
            let missing = (0..count).filter(|k| !exchange::flow_path(dir, *k).exists()).count();
            if missing == 0 {
                return Ok(());
            }
            if start.elapsed() > self.timeout {
                return Err(backend_err(format!(
                    "{missing} of {count} flows missing in {} after {:?}",
                    dir.display(),
                    self.timeout
                )));
            }
            thread::sleep(self.poll_interval);
        }
    }
}

impl FlowBackend for ExternalFlow {
    fn predict(
        &mut self,
        iteration: usize,
        samples: &[SegmentSample],
        _estimate: &PositionSeries,
    ) -> locfuse_core::Result<Vec<FlowField>> {
        let dir = self.iteration_dir(iteration);
        for (k, s) in samples.iter().enumerate() {
            exchange::write_input(&dir, k, s).map_err(|e| backend_err(e.to_string()))?;
        }
        if self.command.is_empty() {
            self.wait_for_flows(&dir, samples.len())?;
        } else {
            self.run_command(&dir, iteration)?;
        }
        samples
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let path = exchange::flow_path(&dir, k);
                let (header, flow) = exchange::read_flow(&path).map_err(|e| backend_err(e.to_string()))?;
                let expected = exchange::Header::for_sample(s, exchange::FLOW_CHANNELS);
                if header.frame_range != expected.frame_range || header.crop_offset != expected.crop_offset {
                    return Err(backend_err(format!("{} belongs to a different segment", path.display())));
                }
                Ok(flow)
            })
            .collect()
    }
}

/// Wraps a backend and saves every input and flow under `<root>/iter_<n>/`.
pub struct Recording<B> {
    pub inner: B,
    pub root: PathBuf,
}

impl<B: FlowBackend> FlowBackend for Recording<B> {
    fn predict(
        &mut self,
        iteration: usize,
        samples: &[SegmentSample],
        estimate: &PositionSeries,
    ) -> locfuse_core::Result<Vec<FlowField>> {
        let flows = self.inner.predict(iteration, samples, estimate)?;
        let dir = self.root.join(format!("iter_{}", iteration + 1));
        for (k, (s, f)) in samples.iter().zip(&flows).enumerate() {
            exchange::write_input(&dir, k, s).map_err(|e| backend_err(e.to_string()))?;
            exchange::write_flow(&exchange::flow_path(&dir, k), s, f).map_err(|e| backend_err(e.to_string()))?;
        }
        Ok(flows)
    }
}
