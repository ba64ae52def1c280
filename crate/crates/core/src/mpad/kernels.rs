//! The four message updates and the output combination, in the LLR domain.
//!
//! Each kernel reads the previous layer's arrays of a [`MessageState`] and
//! overwrites exactly one array. When a weight block is supplied the kernel
//! evaluates the weighted (unfolded) form. Exclusive sums are computed with
//! prefix/suffix sums, and the weighted form adds `sum (w - 1) x` on top of the
//! plain exclusive sum. With all-ones weights every correction is an exact
//! zero, so weighted and plain evaluation agree bit for bit.

use nalgebra::DMatrix;

use super::weights::{CheckWeights, OutputWeights, SumLayerWeights, ToCheckWeights, ToSumWeights};
use super::{DetectorParams, MessageState};
use crate::error::{Error, Result};

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `(sigmoid(x), sigmoid(-x))` from a single exponential.
#[inline]
fn sigmoid_pair(x: f64) -> (f64, f64) {
    let e = (-x.abs()).exp();
    let big = 1.0 / (1.0 + e);
    let small = e * big;
    if x >= 0.0 {
        (big, small)
    } else {
        (small, big)
    }
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `log(e^x - 1)` for `x > 0`.
pub(crate) fn log_expm1(x: f64) -> f64 {
    if x > 30.0 {
        x + (-(-x).exp()).ln_1p()
    } else {
        x.exp_m1().ln()
    }
}

#[inline]
fn clip(x: f64, bound: f64) -> f64 {
    x.clamp(-bound, bound)
}

/// Fixed-symbol observation in real-stacked form.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    /// `M x N_p`
    pub y: &'a DMatrix<f64>,
    /// CSI, `M x N_s`.
    pub h: &'a DMatrix<f64>,
    /// Noise variance of one real component.
    pub noise_var: f64,
    pub activation_prob: f64,
}

/// Exclusive sums `out[i] = sum_{j != i} x[j]` over `n` blocks of `width`
/// contiguous lanes: a backward pass leaves the suffix sums in `out`, a
/// forward pass adds the prefix sums. `acc` is scratch of length `width`.
fn exclusive_sums(x: &[f64], n: usize, width: usize, out: &mut [f64], acc: &mut Vec<f64>) {
    let x = &x[..n * width];
    let out = &mut out[..n * width];
    acc.clear();
    acc.resize(width, 0.0);
    for (o, xi) in out.chunks_exact_mut(width).zip(x.chunks_exact(width)).rev() {
        for ((o, a), v) in o.iter_mut().zip(acc.iter_mut()).zip(xi) {
            *o = *a;
            *a += v;
        }
    }
    acc.fill(0.0);
    for (o, xi) in out.chunks_exact_mut(width).zip(x.chunks_exact(width)) {
        for ((o, a), v) in o.iter_mut().zip(acc.iter_mut()).zip(xi) {
            *o += *a;
            *a += v;
        }
    }
}

/// [`exclusive_sums`] with `width == 1`.
fn exclusive_sums_flat(x: &[f64], out: &mut [f64]) {
    let mut acc = 0.0;
    for (o, v) in out.iter_mut().zip(x).rev() {
        *o = acc;
        acc += v;
    }
    acc = 0.0;
    for (o, v) in out.iter_mut().zip(x) {
        *o += acc;
        acc += v;
    }
}

/// Index of the `k`-th element of `0..n` that is not `skip`.
#[inline]
fn other(k: usize, skip: usize) -> usize {
    if k < skip {
        k
    } else {
        k + 1
    }
}

/// Sum-node update: Gaussian approximation of the interference from the other
/// devices' current activity probabilities, then the LLR of `y` under
/// "device active" against "device inactive".
pub fn sn_update(
    state: &mut MessageState,
    obs: &Observation<'_>,
    params: &DetectorParams,
    weights: Option<&SumLayerWeights>,
) -> Result<()> {
    let (ns, np, m) = (state.n_devices, state.n_slots, state.n_antennas);
    if state.vn_to_sn.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("variable-to-sum messages"));
    }
    let y = obs.y.as_slice();
    let h = obs.h.as_slice();
    let lane = ns * m;
    let mut mean_terms = vec![0.0; lane];
    let mut var_terms = vec![0.0; lane];
    let mut mean_excl = vec![0.0; lane];
    let mut var_excl = vec![0.0; lane];
    let mut scratch = Vec::new();

    for p in 0..np {
        for s in 0..ns {
            let e0 = state.idx3(s, p, 0);
            let incoming = &state.vn_to_sn[e0..e0 + m];
            let lanes = s * m..(s + 1) * m;
            for (((l, g), mt), vt) in incoming
                .iter()
                .zip(&h[lanes.clone()])
                .zip(&mut mean_terms[lanes.clone()])
                .zip(&mut var_terms[lanes])
            {
                let (prob, comp) = sigmoid_pair(*l);
                *mt = g * prob;
                *vt = g * g * prob * comp;
            }
        }
        exclusive_sums(&mean_terms, ns, m, &mut mean_excl, &mut scratch);
        exclusive_sums(&var_terms, ns, m, &mut var_excl, &mut scratch);

        let yp = &y[p * m..(p + 1) * m];
        let (clip_at, floor) = (params.llr_clip, params.min_variance);
        for s in 0..ns {
            let e0 = state.idx3(s, p, 0);
            let lanes = s * m..(s + 1) * m;
            let Some(w) = weights else {
                let out = &mut state.sn_to_vn[e0..e0 + m];
                for ((((o, g), u), ve), yv) in out
                    .iter_mut()
                    .zip(&h[lanes.clone()])
                    .zip(&mean_excl[lanes.clone()])
                    .zip(&var_excl[lanes])
                    .zip(yp)
                {
                    let v = (ve + obs.noise_var).max(floor);
                    *o = clip((2.0 * (yv - u) * g - g * g) / (2.0 * v), clip_at);
                }
                continue;
            };
            for a in 0..m {
                let e = e0 + a;
                let g = h[s * m + a];
                let mut u = mean_excl[s * m + a];
                let mut v = var_excl[s * m + a];
                let base = e * (ns - 1);
                let mut du = 0.0;
                let mut dv = 0.0;
                for k in 0..ns - 1 {
                    let j = other(k, s);
                    du += (w.w_u[base + k] - 1.0) * mean_terms[j * m + a];
                    dv += (w.w_v[base + k] - 1.0) * var_terms[j * m + a];
                }
                u += du;
                v += dv;
                v += w.w_sigma2[e] * obs.noise_var;
                let yv = w.w_y[e] * yp[a];
                let v = v.max(floor);
                state.sn_to_vn[e] = clip((2.0 * (yv - u) * g - g * g) / (2.0 * v), clip_at);
            }
        }
    }
    Ok(())
}

/// Variable-node to check-node update: all sum-node messages plus the prior.
pub fn vn_to_cn_update(
    state: &mut MessageState,
    params: &DetectorParams,
    weights: Option<&ToCheckWeights>,
) {
    let (ns, np, m) = (state.n_devices, state.n_slots, state.n_antennas);
    for s in 0..ns {
        for p in 0..np {
            let e = s * np + p;
            let row = &state.sn_to_vn[e * m..(e + 1) * m];
            let llr = match weights {
                None => row.iter().sum::<f64>() + state.prior_llr,
                Some(w) => {
                    let wa = &w.w_a2b[e * m..(e + 1) * m];
                    row.iter().zip(wa).map(|(l, w)| w * l).sum::<f64>()
                        + w.wb_b[e] * state.prior_llr
                }
            };
            state.vn_to_cn[e] = clip(llr, params.llr_clip);
        }
    }
}

/// Check-node update enforcing "at most one slot per device".
pub fn cn_update(
    state: &mut MessageState,
    activation_prob: f64,
    params: &DetectorParams,
    weights: Option<&CheckWeights>,
) {
    let (ns, np) = (state.n_devices, state.n_slots);
    let log_pa = activation_prob.ln().max(-params.llr_clip);
    for s in 0..ns {
        let soft: Vec<f64> = (0..np)
            .map(|k| softplus(state.vn_to_cn[s * np + k]))
            .collect();
        for p in 0..np {
            let e = s * np + p;
            let pre = match weights {
                None => {
                    let acc: f64 = (0..np - 1).map(|k| soft[other(k, p)]).sum();
                    log_pa - acc
                }
                Some(w) => {
                    let acc: f64 = (0..np - 1)
                        .map(|k| w.w_b2c[e * (np - 1) + k] * soft[other(k, p)])
                        .sum();
                    w.w_pa[e] * log_pa - acc
                }
            };
            let pre = pre.min(-params.cn_log_clip);
            state.cn_to_vn[e] = clip(-log_expm1(-pre), params.llr_clip);
        }
    }
}

/// Variable-node to sum-node update: every other antenna's message, the prior
/// and the check-node message.
pub fn vn_to_sn_update(
    state: &mut MessageState,
    params: &DetectorParams,
    weights: Option<&ToSumWeights>,
) {
    let (ns, np, m) = (state.n_devices, state.n_slots, state.n_antennas);
    let mut excl = vec![0.0; m];
    for s in 0..ns {
        for p in 0..np {
            let e = s * np + p;
            let row = &state.sn_to_vn[e * m..(e + 1) * m];
            exclusive_sums_flat(row, &mut excl);
            let Some(w) = weights else {
                let bias = state.prior_llr;
                let check = state.cn_to_vn[e];
                for (o, x) in state.vn_to_sn[e * m..(e + 1) * m].iter_mut().zip(&excl) {
                    *o = clip(x + bias + check, params.llr_clip);
                }
                continue;
            };
            for a in 0..m {
                let base = (e * m + a) * (m - 1);
                let mut corr = 0.0;
                for k in 0..m - 1 {
                    corr += (w.w_a2d[base + k] - 1.0) * row[other(k, a)];
                }
                let llr = excl[a]
                    + corr
                    + w.wb_d[e] * state.prior_llr
                    + w.w_c2d[e * m + a] * state.cn_to_vn[e];
                state.vn_to_sn[e * m + a] = clip(llr, params.llr_clip);
            }
        }
    }
}

/// Output LLR of every indicator entry, `N_s x N_p`. Not clipped.
pub fn output_llr(state: &MessageState, weights: Option<&OutputWeights>) -> DMatrix<f64> {
    let (ns, np, m) = (state.n_devices, state.n_slots, state.n_antennas);
    DMatrix::from_fn(ns, np, |s, p| {
        let e = s * np + p;
        let row = &state.sn_to_vn[e * m..(e + 1) * m];
        match weights {
            None => row.iter().sum::<f64>() + state.prior_llr + state.cn_to_vn[e],
            Some(w) => {
                let wa = &w.w_a2dec[e * m..(e + 1) * m];
                row.iter().zip(wa).map(|(l, w)| w * l).sum::<f64>()
                    + w.wb_dec[e] * state.prior_llr
                    + w.w_c2dec[e] * state.cn_to_vn[e]
            }
        }
    })
}
