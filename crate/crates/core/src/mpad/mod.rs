//! Message-passing activity detection on the sum-node / variable-node /
//! check-node factor graph.
//!
//! One sum node per received real sample `y[m, p]`, one variable node per
//! indicator entry `s[s, p]` and one check node per device. Messages are
//! Bernoulli LLRs `log P(s = 1) / P(s = 0)`. Each iteration runs the four
//! flooding updates in order (sum nodes, variable-to-check, check nodes,
//! variable-to-sum); the decision combines the last sum-node and check-node
//! messages with the prior. Passing a [`WeightSet`] evaluates the unfolded,
//! per-edge weighted version of the same computation.

pub mod kernels;
pub mod weights;

use nalgebra::DMatrix;

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::BinaryMatrix;

pub use kernels::Observation;
pub use weights::{WeightDims, WeightSet};

/// Iteration count and the numerical guards that keep every update total.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    pub iterations: usize,
    /// Every stored message is clipped to `[-llr_clip, llr_clip]`.
    pub llr_clip: f64,
    /// The check-node log-probability is clamped to `<= -cn_log_clip`.
    pub cn_log_clip: f64,
    /// Floor on the Gaussian interference variance.
    pub min_variance: f64,
    /// Keep at most one slot per device (the largest non-negative LLR) when
    /// hardening. Off by default.
    pub row_constraint: bool,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            iterations: 10,
            llr_clip: 50.0,
            cn_log_clip: 1e-10,
            min_variance: 1e-12,
            row_constraint: false,
        }
    }
}

impl DetectorParams {
    pub fn from_config(config: &SystemConfig) -> Self {
        Self {
            iterations: config.iterations,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidConfig("iterations must be positive".into()));
        }
        for (name, v) in [
            ("llr_clip", self.llr_clip),
            ("cn_log_clip", self.cn_log_clip),
            ("min_variance", self.min_variance),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// All edge messages of one detection run.
///
/// Per-antenna arrays are row-major over `(s, p, m)`; per-entry arrays over
/// `(s, p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MessageState {
    pub n_devices: usize,
    pub n_slots: usize,
    /// Real-stacked antenna count M.
    pub n_antennas: usize,
    pub sn_to_vn: Vec<f64>,
    pub vn_to_cn: Vec<f64>,
    pub cn_to_vn: Vec<f64>,
    pub vn_to_sn: Vec<f64>,
    /// `log(p_0 / (1 - p_0))`, clipped.
    pub prior_llr: f64,
}

impl MessageState {
    /// Zero messages everywhere, which is the start of the first iteration.
    pub fn new(
        n_devices: usize,
        n_slots: usize,
        n_antennas: usize,
        entry_prior: f64,
        llr_clip: f64,
    ) -> Self {
        let per_antenna = n_devices * n_slots * n_antennas;
        let per_entry = n_devices * n_slots;
        let prior_llr = (entry_prior / (1.0 - entry_prior))
            .ln()
            .clamp(-llr_clip, llr_clip);
        Self {
            n_devices,
            n_slots,
            n_antennas,
            sn_to_vn: vec![0.0; per_antenna],
            vn_to_cn: vec![0.0; per_entry],
            cn_to_vn: vec![0.0; per_entry],
            vn_to_sn: vec![0.0; per_antenna],
            prior_llr,
        }
    }

    #[inline]
    pub fn idx3(&self, s: usize, p: usize, m: usize) -> usize {
        (s * self.n_slots + p) * self.n_antennas + m
    }

    pub fn all_within(&self, bound: f64) -> bool {
        [
            &self.sn_to_vn,
            &self.vn_to_cn,
            &self.cn_to_vn,
            &self.vn_to_sn,
        ]
        .iter()
        .all(|a| a.iter().all(|v| v.is_finite() && v.abs() <= bound))
    }
}

/// Outcome of one detection run.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub s_hat: BinaryMatrix,
    /// Output LLRs, `N_s x N_p`.
    pub llr: DMatrix<f64>,
    /// Output LLRs after each of the first `L - 1` iterations, computed with
    /// the plain (unweighted) output rule. Empty unless requested.
    pub snapshots: Vec<DMatrix<f64>>,
}

/// Elementwise hard decision: one iff the LLR is non-negative.
pub fn harden(llr: &DMatrix<f64>) -> BinaryMatrix {
    BinaryMatrix::from_fn(llr.nrows(), llr.ncols(), |s, p| llr[(s, p)] >= 0.0)
}

/// Hard decision allowing at most one slot per device: the slot with the
/// largest LLR, if that LLR is non-negative. Ties go to the lower slot.
pub fn harden_row_constrained(llr: &DMatrix<f64>) -> BinaryMatrix {
    let mut out = BinaryMatrix::zeros(llr.nrows(), llr.ncols());
    for s in 0..llr.nrows() {
        let (p, best) =
            (0..llr.ncols())
                .map(|p| (p, llr[(s, p)]))
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, x| if x.1 > acc.1 { x } else { acc },
                );
        if best >= 0.0 {
            out.set(s, p, true);
        }
    }
    out
}

/// Called after each kernel with `(iteration, kernel name, state)`.
pub type KernelObserver<'a> = &'a mut dyn FnMut(usize, &'static str, &MessageState);

/// What one call to [`run`] should record.
#[derive(Default)]
pub struct Trace<'a> {
    pub snapshots: bool,
    pub observer: Option<KernelObserver<'a>>,
}

/// Detection on the real-stacked observation.
pub fn detect(
    y: &DMatrix<f64>,
    h_csi: &DMatrix<f64>,
    config: &SystemConfig,
    params: &DetectorParams,
    weights: Option<&WeightSet>,
) -> Result<DetectionResult> {
    run(y, h_csi, config, params, weights, Trace::default())
}

/// [`detect`] with optional per-iteration snapshots and a kernel observer.
pub fn run(
    y: &DMatrix<f64>,
    h_csi: &DMatrix<f64>,
    config: &SystemConfig,
    params: &DetectorParams,
    weights: Option<&WeightSet>,
    mut trace: Trace<'_>,
) -> Result<DetectionResult> {
    params.validate()?;
    let (ns, np, m) = (config.n_devices, config.n_slots, config.n_antennas_real());
    check_shape("received matrix", y, m, np)?;
    check_shape("CSI matrix", h_csi, m, ns)?;
    if y.iter().chain(h_csi.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("received samples or CSI"));
    }
    let l = params.iterations;
    if let Some(w) = weights {
        w.ensure_dims(WeightDims {
            n_devices: ns,
            n_slots: np,
            n_antennas: m,
            iterations: l,
        })?;
    }

    let obs = Observation {
        y,
        h: h_csi,
        noise_var: config.noise_var_real(),
        activation_prob: config.activation_prob,
    };
    let mut state = MessageState::new(ns, np, m, config.entry_prior(), params.llr_clip);
    let mut snapshots = Vec::new();
    let mut notify = |i: usize, kernel: &'static str, state: &MessageState| {
        if let Some(observer) = trace.observer.as_mut() {
            observer(i, kernel, state);
        }
    };

    for i in 0..l {
        kernels::sn_update(&mut state, &obs, params, weights.map(|w| &w.sum[i]))?;
        notify(i, "sn", &state);
        kernels::vn_to_cn_update(&mut state, params, weights.map(|w| &w.to_check[i]));
        notify(i, "vn_to_cn", &state);
        kernels::cn_update(
            &mut state,
            obs.activation_prob,
            params,
            weights.map(|w| &w.check[i]),
        );
        notify(i, "cn", &state);
        // The last iteration feeds the output layer directly.
        if i + 1 < l {
            if trace.snapshots {
                snapshots.push(kernels::output_llr(&state, None));
            }
            kernels::vn_to_sn_update(&mut state, params, weights.map(|w| &w.to_sum[i]));
            notify(i, "vn_to_sn", &state);
        }
    }

    let llr = kernels::output_llr(&state, weights.map(|w| &w.output));
    let s_hat = if params.row_constraint {
        harden_row_constrained(&llr)
    } else {
        harden(&llr)
    };
    Ok(DetectionResult {
        s_hat,
        llr,
        snapshots,
    })
}

fn check_shape(context: &'static str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::DimensionMismatch {
            context,
            expected: format!("{rows}x{cols}"),
            actual: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::synthesize_frame;
    use crate::rng::FrameSeed;

    #[test]
    fn harden_threshold_is_inclusive() {
        let llr = DMatrix::from_row_slice(1, 3, &[0.0, -0.1, 50.0]);
        let s = harden(&llr);
        assert!(s.get(0, 0));
        assert!(!s.get(0, 1));
        assert!(s.get(0, 2));
    }

    #[test]
    fn row_constraint_keeps_best_slot() {
        let llr = DMatrix::from_row_slice(3, 3, &[2.0, 5.0, 1.0, -1.0, -0.5, -3.0, 0.0, -1.0, 0.0]);
        let s = harden_row_constrained(&llr);
        assert_eq!(
            s.to_string(),
            harden(&DMatrix::from_row_slice(
                3,
                3,
                &[-1.0, 1.0, -1.0, -1.0, -1.0, -1.0, 1.0, -1.0, -1.0]
            ))
            .to_string()
        );
    }

    #[test]
    fn row_constraint_only_removes_detections() {
        let config = SystemConfig {
            n_devices: 30,
            n_slots: 4,
            n_antennas_complex: 4,
            activation_prob: 0.3,
            snr_db: 0.0,
            ..Default::default()
        };
        let plain_params = DetectorParams::from_config(&config);
        let params = DetectorParams {
            row_constraint: true,
            ..plain_params
        };
        for f in 0..10 {
            let frame = synthesize_frame(&config, FrameSeed::new(9, f));
            let (y, h) = (&frame.rx_fixed.y, &frame.rx_fixed.h_csi);
            let plain = detect(y, h, &config, &plain_params, None).unwrap();
            let constrained = detect(y, h, &config, &params, None).unwrap();
            assert_eq!(plain.llr, constrained.llr);
            for s in 0..30 {
                assert!(constrained.s_hat.row_sum(s) <= 1);
                for p in 0..4 {
                    assert!(!constrained.s_hat.get(s, p) || plain.s_hat.get(s, p));
                }
                assert_eq!(
                    constrained.s_hat.row_sum(s) == 0,
                    plain.s_hat.row_sum(s) == 0
                );
            }
        }
    }

    #[test]
    fn noise_free_single_device_is_detected() {
        let config = SystemConfig {
            n_devices: 1,
            n_slots: 1,
            n_antennas_complex: 2,
            activation_prob: 1.0,
            snr_db: f64::INFINITY,
            ..Default::default()
        };
        let frame = synthesize_frame(&config, FrameSeed::new(1, 0));
        assert!(frame.indicator.get(0, 0));
        let out = detect(
            &frame.rx_fixed.y,
            &frame.rx_fixed.h_csi,
            &config,
            &DetectorParams::from_config(&config),
            None,
        )
        .unwrap();
        assert!(out.s_hat.get(0, 0));
        assert!(out.llr[(0, 0)] > 20.0, "{}", out.llr[(0, 0)]);
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        let config = SystemConfig {
            n_devices: 3,
            n_slots: 2,
            n_antennas_complex: 2,
            ..Default::default()
        };
        let params = DetectorParams::from_config(&config);
        let y = DMatrix::zeros(4, 2);
        let h = DMatrix::zeros(4, 3);
        assert!(detect(&y, &h, &config, &params, None).is_ok());
        assert!(matches!(
            detect(&DMatrix::zeros(4, 3), &h, &config, &params, None),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut bad = h.clone();
        bad[(1, 1)] = f64::NAN;
        assert!(matches!(
            detect(&y, &bad, &config, &params, None),
            Err(Error::NonFinite(_))
        ));
        let weights = WeightSet::unit(WeightDims {
            n_devices: 3,
            n_slots: 2,
            n_antennas: 4,
            iterations: 3,
        });
        assert!(matches!(
            detect(&y, &h, &config, &params, Some(&weights)),
            Err(Error::WeightFormat(_))
        ));
    }

    #[test]
    fn snapshots_cover_all_but_last_iteration() {
        let config = SystemConfig {
            n_devices: 6,
            n_slots: 3,
            n_antennas_complex: 3,
            activation_prob: 0.4,
            iterations: 4,
            snr_db: 10.0,
            ..Default::default()
        };
        let frame = synthesize_frame(&config, FrameSeed::new(2, 0));
        let params = DetectorParams::from_config(&config);
        let out = run(
            &frame.rx_fixed.y,
            &frame.rx_fixed.h_csi,
            &config,
            &params,
            None,
            Trace {
                snapshots: true,
                observer: None,
            },
        )
        .unwrap();
        assert_eq!(out.snapshots.len(), 3);
        assert!(out.snapshots.iter().all(|s| s.shape() == (6, 3)));
    }
}
