//! Per-slot data recovery and packet accounting.
//!
//! After activity detection, each slot's buffered data symbols are jointly
//! estimated for the devices detected in that slot with the linear MMSE
//! estimator, using the base station's CSI. A transmitted packet counts as
//! received only if the slot's detected device set is exactly right and the
//! recovered symbols are within the MSE threshold.

use nalgebra::{Cholesky, DMatrix, Dyn};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{BinaryMatrix, Frame, IndicatorMatrix};

/// Recovery of one slot for the devices detected in it.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecovery {
    pub slot: usize,
    /// Detected devices, ascending.
    pub devices: Vec<usize>,
    /// Recovered symbols, one row per entry of `devices`.
    pub symbols: DMatrix<Complex64>,
    /// Payload-averaged squared error for detected devices that actually
    /// transmitted in this slot; `None` for false alarms.
    pub mse: Vec<Option<f64>>,
}

impl SlotRecovery {
    pub fn mse_of(&self, device: usize) -> Option<f64> {
        self.devices
            .iter()
            .position(|&d| d == device)
            .and_then(|i| self.mse[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PacketStatus {
    Success,
    FailActivityDetection,
    FailDataRecovery,
    /// A device detected in a slot it did not use; its estimate is accepted.
    FalseAlarmAcceptance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketOutcome {
    pub device: usize,
    pub slot: usize,
    pub status: PacketStatus,
}

/// `X = P H^H (P H H^H + sigma^2 I)^-1 Y`, evaluated in the `K x K` form
/// `(P H^H H + sigma^2 I)^-1 P H^H Y`.
pub fn mmse_recover(
    y_slot: &DMatrix<Complex64>,
    h_sub: &DMatrix<Complex64>,
    noise_var: f64,
    power: f64,
) -> Result<DMatrix<Complex64>> {
    let k = h_sub.ncols();
    if k == 0 {
        return Ok(DMatrix::zeros(0, y_slot.ncols()));
    }
    if h_sub.nrows() != y_slot.nrows() {
        return Err(Error::DimensionMismatch {
            context: "MMSE slot observation rows",
            expected: h_sub.nrows().to_string(),
            actual: y_slot.nrows().to_string(),
        });
    }
    let hh = h_sub.adjoint();
    let scale = Complex64::new(power, 0.0);
    let mut gram = &hh * h_sub * scale;
    for i in 0..k {
        gram[(i, i)] += noise_var;
    }
    let chol = hermitian_cholesky(gram)?;
    Ok(chol.solve(&(hh * y_slot * scale)))
}

fn hermitian_cholesky(mut a: DMatrix<Complex64>) -> Result<Cholesky<Complex64, Dyn>> {
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(chol);
    }
    for i in 0..a.nrows() {
        a[(i, i)] += crate::baselines::RIDGE;
    }
    Cholesky::new(a).ok_or(Error::Singular("MMSE Gram matrix"))
}

/// Recover every slot of `frame` for the devices set in `s_hat`, using the
/// CSI `H + H_e` and unit received power.
pub fn recover_frame(frame: &Frame, s_hat: &BinaryMatrix) -> Result<Vec<SlotRecovery>> {
    let csi = frame.channel.csi();
    (0..frame.indicator.n_slots())
        .map(|p| {
            let devices = s_hat.ones_in_col(p);
            let h_sub = csi.select_columns(devices.iter());
            let symbols = mmse_recover(&frame.rx_data[p], &h_sub, frame.noise_var, 1.0)?;
            let mse = devices
                .iter()
                .enumerate()
                .map(|(row, &d)| {
                    frame.indicator.get(d, p).then(|| {
                        let sent = frame.tx_data[d].as_ref().expect("active device has data");
                        let err: f64 = sent
                            .iter()
                            .zip(symbols.row(row).iter())
                            .map(|(x, xh)| (x - xh).norm_sqr())
                            .sum();
                        err / sent.len() as f64
                    })
                })
                .collect();
            Ok(SlotRecovery {
                slot: p,
                devices,
                symbols,
                mse,
            })
        })
        .collect()
}

/// Tag every transmitted packet and every false alarm with one status.
///
/// A transmitted packet fails on activity detection whenever its slot's
/// detected set differs from the true set, which takes precedence over the
/// MSE check.
pub fn classify_packets(
    truth: &IndicatorMatrix,
    s_hat: &BinaryMatrix,
    recoveries: &[SlotRecovery],
    mse_threshold: f64,
) -> Vec<PacketOutcome> {
    let truth_bin = truth.to_binary();
    let mut out = Vec::new();
    for p in 0..truth.n_slots() {
        let column_ok = truth_bin.col_eq(s_hat, p);
        let recovery = recoveries.iter().find(|r| r.slot == p);
        for s in 0..truth.n_devices() {
            let sent = truth.get(s, p);
            let detected = s_hat.get(s, p);
            let status = match (sent, detected) {
                (true, _) if !column_ok => PacketStatus::FailActivityDetection,
                (true, _) => {
                    let mse = recovery.and_then(|r| r.mse_of(s));
                    match mse {
                        Some(e) if e < mse_threshold => PacketStatus::Success,
                        _ => PacketStatus::FailDataRecovery,
                    }
                }
                (false, true) => PacketStatus::FalseAlarmAcceptance,
                (false, false) => continue,
            };
            out.push(PacketOutcome {
                device: s,
                slot: p,
                status,
            });
        }
    }
    out
}

/// Packet counts accumulated over frames.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ThroughputSummary {
    pub frames: u64,
    pub true_packets: u64,
    pub successes: u64,
    pub fail_activity: u64,
    pub fail_data: u64,
    pub false_alarms: u64,
    /// Sum over frames of squared per-frame success counts.
    pub successes_sq: u64,
}

impl ThroughputSummary {
    pub fn add_frame(&mut self, outcomes: &[PacketOutcome]) {
        let mut successes = 0u64;
        for o in outcomes {
            match o.status {
                PacketStatus::Success => successes += 1,
                PacketStatus::FailActivityDetection => self.fail_activity += 1,
                PacketStatus::FailDataRecovery => self.fail_data += 1,
                PacketStatus::FalseAlarmAcceptance => self.false_alarms += 1,
            }
            if o.status != PacketStatus::FalseAlarmAcceptance {
                self.true_packets += 1;
            }
        }
        self.frames += 1;
        self.successes += successes;
        self.successes_sq += successes * successes;
    }

    pub fn merge(mut self, other: &ThroughputSummary) -> Self {
        self.frames += other.frames;
        self.true_packets += other.true_packets;
        self.successes += other.successes;
        self.fail_activity += other.fail_activity;
        self.fail_data += other.fail_data;
        self.false_alarms += other.false_alarms;
        self.successes_sq += other.successes_sq;
        self
    }

    /// Mean successfully received packets per frame.
    pub fn throughput(&self) -> f64 {
        self.successes as f64 / self.frames.max(1) as f64
    }

    /// Standard error of [`Self::throughput`].
    pub fn throughput_stderr(&self) -> f64 {
        if self.frames < 2 {
            return 0.0;
        }
        let n = self.frames as f64;
        let mean = self.throughput();
        let var = (self.successes_sq as f64 / n - mean * mean).max(0.0) * n / (n - 1.0);
        (var / n).sqrt()
    }
}

/// Aggregate per-frame outcome lists.
pub fn throughput(frames: &[Vec<PacketOutcome>]) -> ThroughputSummary {
    let mut summary = ThroughputSummary::default();
    for outcomes in frames {
        summary.add_frame(outcomes);
    }
    summary
}
