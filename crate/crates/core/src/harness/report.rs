//! Sweep results, their CSV rendering and the JSON run manifest.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{Metrics, SweepSpec, Tally, ThresholdMode};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::mud::ThroughputSummary;

pub const CSV_COLUMNS: &[&str] = &[
    "swept_value",
    "eer",
    "throughput",
    "fail_activity",
    "fail_data",
    "false_alarms",
    "frames",
    "seconds",
    "eer_stderr",
    "throughput_stderr",
    "threshold",
];

/// Results of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct PointReport {
    pub swept_value: Option<f64>,
    pub config: SystemConfig,
    pub frames: u64,
    pub element_errors: u64,
    /// `element_errors / (N_s N_p frames)`
    pub eer: f64,
    pub eer_stderr: f64,
    /// Present when throughput was requested.
    pub packets: Option<ThroughputSummary>,
    /// Decision threshold used by a linear baseline.
    pub threshold: Option<f64>,
    pub seconds: f64,
}

impl PointReport {
    pub(super) fn new(
        swept_value: Option<f64>,
        config: SystemConfig,
        tally: Tally,
        metrics: Metrics,
        threshold: Option<f64>,
        seconds: f64,
    ) -> Self {
        let per_frame = (config.n_devices * config.n_slots) as f64;
        let n = tally.frames as f64;
        let eer = tally.element_errors as f64 / (per_frame * n);
        let eer_stderr = if tally.frames > 1 {
            let mean = tally.element_errors as f64 / n;
            let var = (tally.element_errors_sq as f64 / n - mean * mean).max(0.0) * n / (n - 1.0);
            (var / n).sqrt() / per_frame
        } else {
            0.0
        };
        Self {
            swept_value,
            config,
            frames: tally.frames,
            element_errors: tally.element_errors,
            eer,
            eer_stderr,
            packets: (metrics == Metrics::EerAndThroughput).then_some(tally.packets),
            threshold,
            seconds,
        }
    }
}

/// All points of one sweep plus what is needed to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub param: Option<String>,
    pub detector: &'static str,
    pub threshold_mode: ThresholdMode,
    pub base: SystemConfig,
    pub points: Vec<PointReport>,
}

impl RunReport {
    pub(super) fn new(spec: &SweepSpec, points: Vec<PointReport>) -> Self {
        Self {
            param: spec.param.clone(),
            detector: spec.detector.kind().name(),
            threshold_mode: spec.threshold,
            base: spec.base.clone(),
            points,
        }
    }

    /// One row per point in [`CSV_COLUMNS`] order. Columns that do not apply
    /// are left empty; `seconds` is filled only with `timing`, so that
    /// repeated runs produce identical bytes.
    pub fn write_csv<W: Write>(&self, out: W, timing: bool) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS)?;
        for p in &self.points {
            let num = |v: f64| v.to_string();
            let opt = |v: Option<String>| v.unwrap_or_default();
            let pk = p.packets.as_ref();
            w.write_record([
                opt(p.swept_value.map(num)),
                num(p.eer),
                opt(pk.map(|t| num(t.throughput()))),
                opt(pk.map(|t| t.fail_activity.to_string())),
                opt(pk.map(|t| t.fail_data.to_string())),
                opt(pk.map(|t| t.false_alarms.to_string())),
                p.frames.to_string(),
                if timing {
                    format!("{:.3}", p.seconds)
                } else {
                    String::new()
                },
                num(p.eer_stderr),
                opt(pk.map(|t| num(t.throughput_stderr()))),
                opt(p.threshold.map(num)),
            ])?;
        }
        w.flush().map_err(Error::Stream)?;
        Ok(())
    }

    pub fn csv_string(&self, timing: bool) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, timing)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    pub fn manifest(&self) -> Manifest {
        let (threshold, calibration_frames) = match self.threshold_mode {
            ThresholdMode::Fixed(t) => (Some(t), None),
            ThresholdMode::Calibrated { frames } => (None, Some(frames)),
        };
        Manifest {
            tool: "fsra",
            version: env!("CARGO_PKG_VERSION"),
            git_revision: git_revision(),
            seed: self.base.rng_seed,
            detector: self.detector,
            swept_param: self.param.clone(),
            swept_values: self.points.iter().filter_map(|p| p.swept_value).collect(),
            frames_per_point: self.points.first().map_or(0, |p| p.frames),
            fixed_threshold: threshold,
            calibration_frames,
            calibrated_thresholds: self.points.iter().filter_map(|p| p.threshold).collect(),
            config: self.base.clone(),
            csv_columns: CSV_COLUMNS,
        }
    }

    /// Write `path` and its manifest `path.manifest.json`.
    pub fn save(&self, path: &Path, timing: bool) -> Result<PathBuf> {
        let file = std::fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        self.write_csv(std::io::BufWriter::new(file), timing)?;
        let manifest_path = manifest_path(path);
        let json = serde_json::to_string_pretty(&self.manifest())?;
        std::fs::write(&manifest_path, json + "\n").map_err(|source| Error::Io {
            path: manifest_path.clone(),
            source,
        })?;
        Ok(manifest_path)
    }
}

/// Sidecar describing how a CSV was produced.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub git_revision: Option<String>,
    pub seed: u64,
    pub detector: &'static str,
    pub swept_param: Option<String>,
    pub swept_values: Vec<f64>,
    pub frames_per_point: u64,
    pub fixed_threshold: Option<f64>,
    pub calibration_frames: Option<u64>,
    pub calibrated_thresholds: Vec<f64>,
    pub config: SystemConfig,
    pub csv_columns: &'static [&'static str],
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    let mut name = csv.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

fn git_revision() -> Option<String> {
    let out = std::process::Command::new("git")
        .args(["rev-parse", "--short", "HEAD"])
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .ok()?;
    out.status
        .success()
        .then(|| String::from_utf8_lossy(&out.stdout).trim().to_string())
}
