//! Monte-Carlo experiment driver.
//!
//! A [`SweepSpec`] names a base configuration, one config field to sweep and
//! the detector to evaluate. Frame `f` of every sweep point is synthesized from
//! `FrameSeed::new(seed, f)`, so points share their random draws where their
//! dimensions agree, and all aggregation is over integer counts, which makes a
//! report independent of thread scheduling.

pub mod dataset;
pub mod plot;
pub mod report;

use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;

use crate::baselines::{
    default_threshold_grid, row_constrained_decision, Baseline, ThresholdSweep,
};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::{synthesize_frame, BinaryMatrix, Frame};
use crate::mpad::{detect, DetectorParams, WeightSet};
use crate::mud::{classify_packets, recover_frame, ThroughputSummary};
use crate::rng::{derive_master, FrameSeed};

pub use report::{PointReport, RunReport};

/// Salt that separates threshold-calibration frames from evaluation frames.
const CALIBRATION_SALT: u64 = 0xCA11_B8A7;

/// Activity detector under evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Detector {
    Mpad,
    MpadWeighted(WeightSet),
    Lmmse,
    MatchedFilter,
    /// Perfect activity detection; isolates the data-recovery stage.
    Oracle,
}

/// Detector names accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectorKind {
    Mpad,
    MpadWeighted,
    Lmmse,
    MatchedFilter,
    Oracle,
}

impl DetectorKind {
    pub const NAMES: &'static [&'static str] = &["mpad", "mpad_weighted", "lmmse", "mf", "oracle"];

    pub fn name(&self) -> &'static str {
        match self {
            DetectorKind::Mpad => "mpad",
            DetectorKind::MpadWeighted => "mpad_weighted",
            DetectorKind::Lmmse => "lmmse",
            DetectorKind::MatchedFilter => "mf",
            DetectorKind::Oracle => "oracle",
        }
    }

    /// Build the detector, loading the weight file when one is needed.
    pub fn build(self, weights: Option<&Path>) -> Result<Detector> {
        Ok(match (self, weights) {
            (DetectorKind::MpadWeighted, Some(path)) => {
                Detector::MpadWeighted(WeightSet::load(path)?)
            }
            (DetectorKind::MpadWeighted, None) => {
                return Err(Error::InvalidConfig(
                    "mpad_weighted needs a weight file".into(),
                ))
            }
            (_, Some(_)) => {
                return Err(Error::InvalidConfig(format!(
                    "detector `{}` takes no weight file",
                    self.name()
                )))
            }
            (DetectorKind::Mpad, None) => Detector::Mpad,
            (DetectorKind::Lmmse, None) => Detector::Lmmse,
            (DetectorKind::MatchedFilter, None) => Detector::MatchedFilter,
            (DetectorKind::Oracle, None) => Detector::Oracle,
        })
    }
}

impl FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "mpad" => DetectorKind::Mpad,
            "mpad_weighted" => DetectorKind::MpadWeighted,
            "lmmse" => DetectorKind::Lmmse,
            "mf" => DetectorKind::MatchedFilter,
            "oracle" => DetectorKind::Oracle,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown detector `{other}`, expected one of {}",
                    DetectorKind::NAMES.join(", ")
                )))
            }
        })
    }
}

impl Detector {
    pub fn kind(&self) -> DetectorKind {
        match self {
            Detector::Mpad => DetectorKind::Mpad,
            Detector::MpadWeighted(_) => DetectorKind::MpadWeighted,
            Detector::Lmmse => DetectorKind::Lmmse,
            Detector::MatchedFilter => DetectorKind::MatchedFilter,
            Detector::Oracle => DetectorKind::Oracle,
        }
    }

    fn baseline(&self) -> Option<Baseline> {
        match self {
            Detector::Lmmse => Some(Baseline::Lmmse),
            Detector::MatchedFilter => Some(Baseline::MatchedFilter),
            _ => None,
        }
    }

    /// Hard activity decision for one frame. `threshold` is used by the
    /// linear baselines only.
    pub fn decide(
        &self,
        frame: &Frame,
        config: &SystemConfig,
        threshold: f64,
    ) -> Result<BinaryMatrix> {
        self.decide_with(
            frame,
            config,
            &DetectorParams::from_config(config),
            threshold,
        )
    }

    /// [`Detector::decide`] with explicit message-passing parameters.
    pub fn decide_with(
        &self,
        frame: &Frame,
        config: &SystemConfig,
        params: &DetectorParams,
        threshold: f64,
    ) -> Result<BinaryMatrix> {
        let rx = &frame.rx_fixed;
        match self {
            Detector::Mpad => Ok(detect(&rx.y, &rx.h_csi, config, params, None)?.s_hat),
            Detector::MpadWeighted(w) => {
                Ok(detect(&rx.y, &rx.h_csi, config, params, Some(w))?.s_hat)
            }
            Detector::Lmmse | Detector::MatchedFilter => {
                let baseline = self.baseline().expect("linear detector");
                let scores = baseline.soft(&rx.y, &rx.h_csi, config)?;
                Ok(row_constrained_decision(&scores, threshold).to_binary())
            }
            Detector::Oracle => Ok(frame.indicator.to_binary()),
        }
    }
}

/// How the linear baselines pick their decision threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode {
    Fixed(f64),
    /// Grid search over 0.01..0.99 on this many separately seeded frames,
    /// redone at every sweep point.
    Calibrated {
        frames: u64,
    },
}

impl Default for ThresholdMode {
    fn default() -> Self {
        ThresholdMode::Fixed(0.5)
    }
}

/// Which metrics each point computes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metrics {
    Eer,
    /// EER plus data recovery and packet accounting.
    EerAndThroughput,
}

/// One sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: SystemConfig,
    /// Swept config field; `None` evaluates the base config once.
    pub param: Option<String>,
    pub values: Vec<f64>,
    pub frames: u64,
    pub detector: Detector,
    pub threshold: ThresholdMode,
    pub metrics: Metrics,
    /// Message-passing decisions keep at most one slot per device.
    pub row_constraint: bool,
}

impl SweepSpec {
    pub fn new(base: SystemConfig, detector: Detector, frames: u64) -> Self {
        Self {
            base,
            param: None,
            values: Vec::new(),
            frames,
            detector,
            threshold: ThresholdMode::default(),
            metrics: Metrics::Eer,
            row_constraint: false,
        }
    }

    pub fn sweep(mut self, param: &str, values: &[f64]) -> Self {
        self.param = Some(param.to_string());
        self.values = values.to_vec();
        self
    }

    /// Configuration of every point, validated.
    pub fn points(&self) -> Result<Vec<(Option<f64>, SystemConfig)>> {
        self.base.validate()?;
        if self.frames == 0 {
            return Err(Error::InvalidConfig("frames must be at least 1".into()));
        }
        if let ThresholdMode::Calibrated { frames: 0 } = self.threshold {
            return Err(Error::InvalidConfig(
                "calibration needs at least 1 frame".into(),
            ));
        }
        match &self.param {
            None => Ok(vec![(None, self.base.clone())]),
            Some(name) => {
                if self.values.is_empty() {
                    return Err(Error::InvalidConfig(format!(
                        "no values given for `{name}`"
                    )));
                }
                self.values
                    .iter()
                    .map(|&v| {
                        let mut config = self.base.clone();
                        config.set_field(name, v)?;
                        Ok((Some(v), config))
                    })
                    .collect()
            }
        }
    }
}

/// Parse `param=v1,v2,...`.
pub fn parse_sweep(arg: &str) -> Result<(String, Vec<f64>)> {
    let (name, values) = arg.split_once('=').ok_or_else(|| {
        Error::InvalidConfig(format!("sweep `{arg}` is not of the form param=v1,v2"))
    })?;
    let name = name.trim();
    if !crate::config::FIELD_NAMES.contains(&name) {
        return Err(Error::InvalidConfig(format!(
            "unknown config field `{name}`, expected one of {}",
            crate::config::FIELD_NAMES.join(", ")
        )));
    }
    let values = values
        .split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidConfig(format!("sweep value `{v}` is not a number")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((name.to_string(), values))
}

/// Integer tallies of one point, summed over frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Tally {
    pub frames: u64,
    pub element_errors: u64,
    /// Sum of squared per-frame element errors.
    pub element_errors_sq: u64,
    pub packets: ThroughputSummary,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        self.frames += other.frames;
        self.element_errors += other.element_errors;
        self.element_errors_sq += other.element_errors_sq;
        self.packets = self.packets.merge(&other.packets);
        self
    }
}

/// Evaluate one frame.
pub fn evaluate_frame(
    frame: &Frame,
    config: &SystemConfig,
    detector: &Detector,
    threshold: f64,
    metrics: Metrics,
) -> Result<Tally> {
    let params = DetectorParams::from_config(config);
    evaluate_frame_with(frame, config, &params, detector, threshold, metrics)
}

/// [`evaluate_frame`] with explicit message-passing parameters.
pub fn evaluate_frame_with(
    frame: &Frame,
    config: &SystemConfig,
    params: &DetectorParams,
    detector: &Detector,
    threshold: f64,
    metrics: Metrics,
) -> Result<Tally> {
    let s_hat = detector.decide_with(frame, config, params, threshold)?;
    let truth = frame.indicator.to_binary();
    let errors = truth.hamming(&s_hat) as u64;
    let mut tally = Tally {
        frames: 1,
        element_errors: errors,
        element_errors_sq: errors * errors,
        packets: ThroughputSummary::default(),
    };
    if metrics == Metrics::EerAndThroughput {
        let recoveries = recover_frame(frame, &s_hat)?;
        let outcomes =
            classify_packets(&frame.indicator, &s_hat, &recoveries, config.mse_threshold);
        tally.packets.add_frame(&outcomes);
    }
    Ok(tally)
}

/// Grid-searched baseline threshold on frames seeded apart from the
/// evaluation frames.
pub fn calibrate_threshold(
    config: &SystemConfig,
    baseline: Baseline,
    frames: u64,
) -> Result<(f64, f64)> {
    let master = derive_master(config.rng_seed, CALIBRATION_SALT);
    let grid = default_threshold_grid();
    let sweep = (0..frames)
        .into_par_iter()
        .try_fold(
            || ThresholdSweep::new(grid.clone()),
            |mut acc, f| -> Result<ThresholdSweep> {
                let frame = synthesize_frame(config, FrameSeed::new(master, f));
                let rx = &frame.rx_fixed;
                acc.add(&baseline.soft(&rx.y, &rx.h_csi, config)?, &frame.indicator);
                Ok(acc)
            },
        )
        .try_reduce(|| ThresholdSweep::new(grid.clone()), |a, b| Ok(a.merge(&b)))?;
    Ok(sweep.best())
}

fn run_point(
    spec: &SweepSpec,
    swept_value: Option<f64>,
    config: SystemConfig,
) -> Result<PointReport> {
    let start = Instant::now();
    let threshold = match (spec.detector.baseline(), spec.threshold) {
        (None, _) => None,
        (Some(_), ThresholdMode::Fixed(t)) => Some(t),
        (Some(b), ThresholdMode::Calibrated { frames }) => {
            Some(calibrate_threshold(&config, b, frames)?.0)
        }
    };
    let theta = threshold.unwrap_or(0.5);
    let seed = config.rng_seed;
    let params = DetectorParams {
        row_constraint: spec.row_constraint,
        ..DetectorParams::from_config(&config)
    };
    let tally = (0..spec.frames)
        .into_par_iter()
        .try_fold(Tally::default, |acc, f| -> Result<Tally> {
            let frame = synthesize_frame(&config, FrameSeed::new(seed, f));
            Ok(acc.merge(evaluate_frame_with(
                &frame,
                &config,
                &params,
                &spec.detector,
                theta,
                spec.metrics,
            )?))
        })
        .try_reduce(Tally::default, |a, b| Ok(a.merge(b)))?;
    Ok(PointReport::new(
        swept_value,
        config,
        tally,
        spec.metrics,
        threshold,
        start.elapsed().as_secs_f64(),
    ))
}

/// Evaluate every point of `spec` with the metrics it requests.
pub fn run_sweep(spec: &SweepSpec) -> Result<RunReport> {
    let points = spec
        .points()?
        .into_iter()
        .map(|(value, config)| run_point(spec, value, config))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunReport::new(spec, points))
}

/// EER per point.
pub fn run_eer_sweep(spec: &SweepSpec) -> Result<RunReport> {
    run_sweep(&SweepSpec {
        metrics: Metrics::Eer,
        ..spec.clone()
    })
}

/// EER, throughput and failure attribution per point.
pub fn run_throughput_sweep(spec: &SweepSpec) -> Result<RunReport> {
    run_sweep(&SweepSpec {
        metrics: Metrics::EerAndThroughput,
        ..spec.clone()
    })
}

/// EER against the CSI error level. The sweep must be over
/// `channel_error_std`.
pub fn run_robustness_sweep(spec: &SweepSpec) -> Result<RunReport> {
    if spec.param.as_deref() != Some("channel_error_std") {
        return Err(Error::InvalidConfig(
            "robustness sweeps run over channel_error_std".into(),
        ));
    }
    run_eer_sweep(spec)
}
