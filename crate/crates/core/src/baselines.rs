//! Linear reference detectors for the indicator matrix.
//!
//! Both produce a soft estimate of `S` from the real-stacked observation and
//! then take a hard decision that keeps at most one slot per device: the
//! largest score in each row wins if it reaches the threshold.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::IndicatorMatrix;

/// Added to the diagonal when the system matrix is not positive definite.
pub const RIDGE: f64 = 1e-12;

/// Soft estimate of the indicator matrix, `N_s x N_p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftScoreMatrix {
    pub scores: DMatrix<f64>,
}

/// Mean and variance of the i.i.d. prior on each indicator entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmmsePrior {
    pub mean: f64,
    pub variance: f64,
}

impl LmmsePrior {
    /// Bernoulli(p_0) entries.
    pub fn bernoulli(p0: f64) -> Self {
        Self {
            mean: p0,
            variance: p0 * (1.0 - p0),
        }
    }

    /// Zero-mean prior, i.e. no centering.
    pub fn uncentered(variance: f64) -> Self {
        Self {
            mean: 0.0,
            variance,
        }
    }
}

fn cholesky_with_ridge(mut a: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if let Some(chol) = Cholesky::new(a.clone()) {
        return Ok(chol);
    }
    for i in 0..a.nrows() {
        a[(i, i)] += RIDGE;
    }
    Cholesky::new(a).ok_or(Error::Singular("LMMSE system matrix"))
}

/// LMMSE estimate `mean + C H^T (H C H^T + sigma^2 I)^-1 (Y - mean H 1 1^T)`
/// with `C = variance * I`.
///
/// The inverse is taken in whichever of the `M x M` or `N_s x N_s` forms is
/// smaller; the two are equal by the push-through identity.
pub fn lmmse_soft(
    y: &DMatrix<f64>,
    h: &DMatrix<f64>,
    noise_var: f64,
    prior: LmmsePrior,
) -> Result<SoftScoreMatrix> {
    let (m, ns) = h.shape();
    if y.nrows() != m {
        return Err(Error::DimensionMismatch {
            context: "LMMSE observation rows",
            expected: m.to_string(),
            actual: y.nrows().to_string(),
        });
    }
    let c = prior.variance;
    let row_sums = h.column_sum();
    let mut centered = y.clone();
    for mut col in centered.column_iter_mut() {
        col.axpy(-prior.mean, &row_sums, 1.0);
    }

    let gain = if m <= ns {
        let mut g = h * h.transpose() * c;
        for i in 0..m {
            g[(i, i)] += noise_var;
        }
        let chol = cholesky_with_ridge(g)?;
        h.transpose() * chol.solve(&centered) * c
    } else {
        let mut k = h.transpose() * h * c;
        for i in 0..ns {
            k[(i, i)] += noise_var;
        }
        let chol = cholesky_with_ridge(k)?;
        chol.solve(&(h.transpose() * centered * c))
    };
    Ok(SoftScoreMatrix {
        scores: gain.add_scalar(prior.mean),
    })
}

/// Matched filter `h_s^T y_p / |h_s|^2`.
pub fn mf_soft(y: &DMatrix<f64>, h: &DMatrix<f64>) -> Result<SoftScoreMatrix> {
    if y.nrows() != h.nrows() {
        return Err(Error::DimensionMismatch {
            context: "matched filter observation rows",
            expected: h.nrows().to_string(),
            actual: y.nrows().to_string(),
        });
    }
    let mut scores = h.transpose() * y;
    for (s, col) in h.column_iter().enumerate() {
        let energy = col.norm_squared();
        if energy == 0.0 {
            return Err(Error::ZeroNormColumn(s));
        }
        scores.row_mut(s).scale_mut(1.0 / energy);
    }
    Ok(SoftScoreMatrix { scores })
}

/// Per row: the largest score (lowest index on ties) becomes a one if it is
/// at least `threshold`; everything else is zero.
pub fn row_constrained_decision(scores: &SoftScoreMatrix, threshold: f64) -> IndicatorMatrix {
    let s = &scores.scores;
    let slots = (0..s.nrows())
        .map(|row| {
            let (best, value) = row_argmax(s, row);
            (value >= threshold).then_some(best)
        })
        .collect();
    IndicatorMatrix::from_slots(s.ncols(), slots).expect("argmax lies inside the row")
}

fn row_argmax(s: &DMatrix<f64>, row: usize) -> (usize, f64) {
    let mut best = 0;
    let mut value = s[(row, 0)];
    for p in 1..s.ncols() {
        if s[(row, p)] > value {
            best = p;
            value = s[(row, p)];
        }
    }
    (best, value)
}

/// Which linear detector to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    Lmmse,
    MatchedFilter,
}

impl Baseline {
    pub fn soft(
        &self,
        y: &DMatrix<f64>,
        h: &DMatrix<f64>,
        config: &SystemConfig,
    ) -> Result<SoftScoreMatrix> {
        match self {
            Baseline::Lmmse => lmmse_soft(
                y,
                h,
                config.noise_var_real(),
                LmmsePrior::bernoulli(config.entry_prior()),
            ),
            Baseline::MatchedFilter => mf_soft(y, h),
        }
    }
}

/// Thresholds 0.01, 0.02, ..., 0.99.
pub fn default_threshold_grid() -> Vec<f64> {
    (1..100).map(|i| i as f64 / 100.0).collect()
}

/// Element errors of [`row_constrained_decision`] at every threshold of
/// `grid`, accumulated over `(scores, truth)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSweep {
    pub grid: Vec<f64>,
    pub errors: Vec<u64>,
    pub elements: u64,
}

impl ThresholdSweep {
    pub fn new(grid: Vec<f64>) -> Self {
        let errors = vec![0; grid.len()];
        Self {
            grid,
            errors,
            elements: 0,
        }
    }

    pub fn add(&mut self, scores: &SoftScoreMatrix, truth: &IndicatorMatrix) {
        let s = &scores.scores;
        self.elements += s.len() as u64;
        for row in 0..s.nrows() {
            let (best, value) = row_argmax(s, row);
            let truth_slot = truth.slot_of(row);
            let if_set = match truth_slot {
                Some(p) if p == best => 0,
                Some(_) => 2,
                None => 1,
            };
            let if_clear = u64::from(truth_slot.is_some());
            for (t, errors) in self.grid.iter().zip(self.errors.iter_mut()) {
                *errors += if value >= *t { if_set } else { if_clear };
            }
        }
    }

    pub fn merge(mut self, other: &ThresholdSweep) -> Self {
        assert_eq!(self.grid, other.grid);
        for (a, b) in self.errors.iter_mut().zip(&other.errors) {
            *a += b;
        }
        self.elements += other.elements;
        self
    }

    /// Threshold with the fewest errors (first on ties) and its error rate.
    pub fn best(&self) -> (f64, f64) {
        let (i, errors) = self
            .errors
            .iter()
            .enumerate()
            .min_by_key(|(_, e)| **e)
            .expect("non-empty grid");
        (self.grid[i], *errors as f64 / self.elements.max(1) as f64)
    }

    pub fn rate_at(&self, threshold: f64) -> Option<f64> {
        self.grid
            .iter()
            .position(|&t| t == threshold)
            .map(|i| self.errors[i] as f64 / self.elements.max(1) as f64)
    }
}
