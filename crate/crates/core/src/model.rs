//! Random-access frame synthesis.
//!
//! Every active device picks one slot and transmits a unit fixed symbol
//! followed by Gaussian data symbols. The base station observes, per slot, the
//! superposition of the active devices' channel columns plus complex AWGN:
//! `Y = H S + N` with `Y` of size `M* x N_p`. Detection runs on the real
//! stacked form, where real parts sit above imaginary parts and the antenna
//! count doubles to `M = 2 M*`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::rng::{FrameSeed, Stream};

/// Device-slot indicator with at most one slot per device.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndicatorMatrix {
    n_slots: usize,
    slot_of: Vec<Option<usize>>,
}

impl IndicatorMatrix {
    pub fn inactive(n_devices: usize, n_slots: usize) -> Self {
        Self {
            n_slots,
            slot_of: vec![None; n_devices],
        }
    }

    pub fn from_slots(n_slots: usize, slot_of: Vec<Option<usize>>) -> Result<Self> {
        if let Some(bad) = slot_of.iter().flatten().find(|&&p| p >= n_slots) {
            return Err(Error::DimensionMismatch {
                context: "indicator slot index",
                expected: format!("< {n_slots}"),
                actual: bad.to_string(),
            });
        }
        Ok(Self { n_slots, slot_of })
    }

    pub fn n_devices(&self) -> usize {
        self.slot_of.len()
    }

    pub fn n_slots(&self) -> usize {
        self.n_slots
    }

    pub fn slot_of(&self, device: usize) -> Option<usize> {
        self.slot_of[device]
    }

    pub fn slots(&self) -> &[Option<usize>] {
        &self.slot_of
    }

    pub fn get(&self, device: usize, slot: usize) -> bool {
        self.slot_of[device] == Some(slot)
    }

    pub fn set_slot(&mut self, device: usize, slot: Option<usize>) {
        assert!(slot.is_none_or(|p| p < self.n_slots));
        self.slot_of[device] = slot;
    }

    /// Devices transmitting in `slot`, ascending.
    pub fn devices_in_slot(&self, slot: usize) -> Vec<usize> {
        (0..self.n_devices())
            .filter(|&s| self.get(s, slot))
            .collect()
    }

    pub fn active_count(&self) -> usize {
        self.slot_of.iter().flatten().count()
    }

    pub fn to_binary(&self) -> BinaryMatrix {
        let mut out = BinaryMatrix::zeros(self.n_devices(), self.n_slots);
        for (s, slot) in self.slot_of.iter().enumerate() {
            if let Some(p) = slot {
                out.set(s, *p, true);
            }
        }
        out
    }

    /// Dense real 0/1 matrix, `N_s x N_p`.
    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n_devices(), self.n_slots, |s, p| {
            if self.get(s, p) {
                1.0
            } else {
                0.0
            }
        })
    }
}

/// General binary `rows x cols` matrix, row-major. Hard decisions of the
/// message-passing detector use this type because they carry no row constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<u8>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut out = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                out.set(r, c, f(r, c));
            }
        }
        out
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.cols + col] != 0
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.data[row * self.cols + col] = u8::from(value);
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }

    pub fn row_sum(&self, row: usize) -> usize {
        self.data[row * self.cols..(row + 1) * self.cols]
            .iter()
            .map(|&v| v as usize)
            .sum()
    }

    /// Rows set in column `col`, ascending.
    pub fn ones_in_col(&self, col: usize) -> Vec<usize> {
        (0..self.rows).filter(|&r| self.get(r, col)).collect()
    }

    pub fn col_eq(&self, other: &BinaryMatrix, col: usize) -> bool {
        (0..self.rows).all(|r| self.get(r, col) == other.get(r, col))
    }

    /// Number of entries that differ from `other`.
    pub fn hamming(&self, other: &BinaryMatrix) -> usize {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(a, b)| a != b)
            .count()
    }
}

impl std::fmt::Display for BinaryMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in 0..self.rows {
            for c in 0..self.cols {
                if c > 0 {
                    f.write_str(" ")?;
                }
                f.write_str(if self.get(r, c) { "1" } else { "0" })?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// True channel and the additive estimation error, both `M* x N_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexChannel {
    pub h: DMatrix<Complex64>,
    pub error: DMatrix<Complex64>,
}

impl ComplexChannel {
    /// CSI available at the base station, `H + H_e`.
    pub fn csi(&self) -> DMatrix<Complex64> {
        &self.h + &self.error
    }
}

/// Real-stacked view of one frame's fixed-symbol observation.
#[derive(Debug, Clone, PartialEq)]
pub struct StackedReal {
    /// `M x N_p`
    pub y: DMatrix<f64>,
    /// True channel, `M x N_s`.
    pub h: DMatrix<f64>,
    /// CSI used by the detectors, `M x N_s`.
    pub h_csi: DMatrix<f64>,
}

/// One synthesized random-access frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub indicator: IndicatorMatrix,
    pub channel: ComplexChannel,
    pub rx_fixed: StackedReal,
    /// Received data symbols per slot, each `M* x payload_len`.
    pub rx_data: Vec<DMatrix<Complex64>>,
    /// Transmitted data per device; `None` for inactive devices.
    pub tx_data: Vec<Option<Vec<Complex64>>>,
    /// Complex noise variance.
    pub noise_var: f64,
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

/// Column-major `rows x cols` matrix of i.i.d. CN(0, variance) entries.
fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    variance: f64,
) -> DMatrix<Complex64> {
    if variance == 0.0 {
        return DMatrix::zeros(rows, cols);
    }
    let data: Vec<Complex64> = (0..rows * cols)
        .map(|_| complex_gaussian(rng, variance))
        .collect();
    DMatrix::from_vec(rows, cols, data)
}

/// Each device activates with probability `p_a` and picks a slot uniformly.
pub fn make_indicator<R: Rng + ?Sized>(config: &SystemConfig, rng: &mut R) -> IndicatorMatrix {
    let slot_of = (0..config.n_devices)
        .map(|_| {
            let active = rng.random::<f64>() < config.activation_prob;
            active.then(|| rng.random_range(0..config.n_slots))
        })
        .collect();
    IndicatorMatrix {
        n_slots: config.n_slots,
        slot_of,
    }
}

/// Rayleigh channel `H ~ CN(0, 1)` and independent CSI error `H_e ~ CN(0, sigma_e^2)`.
pub fn draw_channel<R1, R2>(
    config: &SystemConfig,
    channel_rng: &mut R1,
    error_rng: &mut R2,
) -> ComplexChannel
where
    R1: Rng + ?Sized,
    R2: Rng + ?Sized,
{
    let (rows, cols) = (config.n_antennas_complex, config.n_devices);
    let sigma_e = config.channel_error_std;
    ComplexChannel {
        h: complex_gaussian_matrix(channel_rng, rows, cols, 1.0),
        error: complex_gaussian_matrix(error_rng, rows, cols, sigma_e * sigma_e),
    }
}

/// Noise-free fixed-symbol observation `H S`, summing channel columns of the
/// devices in each slot in ascending device order.
pub fn fixed_symbol_mean(
    indicator: &IndicatorMatrix,
    h: &DMatrix<Complex64>,
) -> Result<DMatrix<Complex64>> {
    if h.ncols() != indicator.n_devices() {
        return Err(Error::DimensionMismatch {
            context: "channel columns vs devices",
            expected: indicator.n_devices().to_string(),
            actual: h.ncols().to_string(),
        });
    }
    let mut y = DMatrix::zeros(h.nrows(), indicator.n_slots());
    for (s, slot) in indicator.slots().iter().enumerate() {
        if let Some(p) = *slot {
            for m in 0..h.nrows() {
                y[(m, p)] += h[(m, s)];
            }
        }
    }
    Ok(y)
}

/// `Y = H S + N` with `N` i.i.d. CN(0, noise_var).
pub fn synthesize_fixed_symbol_rx<R: Rng + ?Sized>(
    indicator: &IndicatorMatrix,
    h: &DMatrix<Complex64>,
    noise_var: f64,
    rng: &mut R,
) -> Result<DMatrix<Complex64>> {
    let mean = fixed_symbol_mean(indicator, h)?;
    let noise = complex_gaussian_matrix(rng, mean.nrows(), mean.ncols(), noise_var);
    Ok(mean + noise)
}

/// Real parts above imaginary parts: `r x c` complex becomes `2r x c` real.
pub fn stack(m: &DMatrix<Complex64>) -> DMatrix<f64> {
    let rows = m.nrows();
    DMatrix::from_fn(2 * rows, m.ncols(), |i, j| {
        if i < rows {
            m[(i, j)].re
        } else {
            m[(i - rows, j)].im
        }
    })
}

/// Inverse of [`stack`].
pub fn unstack(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    assert!(
        m.nrows().is_multiple_of(2),
        "stacked matrix needs an even row count"
    );
    let rows = m.nrows() / 2;
    DMatrix::from_fn(rows, m.ncols(), |i, j| {
        Complex64::new(m[(i, j)], m[(i + rows, j)])
    })
}

pub fn stack_real(
    y: &DMatrix<Complex64>,
    h: &DMatrix<Complex64>,
    h_csi: &DMatrix<Complex64>,
) -> StackedReal {
    StackedReal {
        y: stack(y),
        h: stack(h),
        h_csi: stack(h_csi),
    }
}

/// Compose a full frame from the seed's independent substreams.
pub fn synthesize_frame(config: &SystemConfig, seed: FrameSeed) -> Frame {
    let indicator = make_indicator(config, &mut seed.stream(Stream::Activity));
    let channel = draw_channel(
        config,
        &mut seed.stream(Stream::Channel),
        &mut seed.stream(Stream::ChannelError),
    );
    let noise_var = config.noise_var();
    let y = synthesize_fixed_symbol_rx(
        &indicator,
        &channel.h,
        noise_var,
        &mut seed.stream(Stream::Noise),
    )
    .expect("dimensions come from one config");
    let rx_fixed = stack_real(&y, &channel.h, &channel.csi());

    let mut data_rng = seed.stream(Stream::Data);
    let tx_data: Vec<Option<Vec<Complex64>>> = indicator
        .slots()
        .iter()
        .map(|slot| {
            slot.map(|_| {
                (0..config.payload_len)
                    .map(|_| complex_gaussian(&mut data_rng, 1.0))
                    .collect()
            })
        })
        .collect();

    let mut data_noise_rng = seed.stream(Stream::DataNoise);
    let rx_data = (0..config.n_slots)
        .map(|p| {
            let mut rx = complex_gaussian_matrix(
                &mut data_noise_rng,
                config.n_antennas_complex,
                config.payload_len,
                noise_var,
            );
            for s in indicator.devices_in_slot(p) {
                let symbols = tx_data[s].as_ref().expect("active device has data");
                for (t, x) in symbols.iter().enumerate() {
                    for m in 0..config.n_antennas_complex {
                        rx[(m, t)] += channel.h[(m, s)] * x;
                    }
                }
            }
            rx
        })
        .collect();

    Frame {
        indicator,
        channel,
        rx_fixed,
        rx_data,
        tx_data,
        noise_var,
    }
}
