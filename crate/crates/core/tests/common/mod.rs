//! Shared oracles for the integration tests. Everything here is written in the
//! probability domain with literal products and Gaussian densities, so it
//! shares no code path with the LLR kernels it checks.
#![allow(dead_code)]

use fsra::config::SystemConfig;
use fsra::mpad::MessageState;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sigma(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A randomly populated detector state with its observation.
pub struct RandomCase {
    pub state: MessageState,
    pub y: DMatrix<f64>,
    pub h: DMatrix<f64>,
    pub noise_var: f64,
    pub activation_prob: f64,
}

pub fn random_case(rng: &mut ChaCha8Rng, max_abs_llr: f64) -> RandomCase {
    let ns = rng.random_range(2..=6);
    let np = rng.random_range(2..=4);
    let m = rng.random_range(2..=6);
    let p0 = rng.random_range(0.005..0.3);
    let mut state = MessageState::new(ns, np, m, p0, 50.0);
    let mut fill = |v: &mut Vec<f64>| {
        for x in v.iter_mut() {
            *x = rng.random_range(-max_abs_llr..=max_abs_llr);
        }
    };
    fill(&mut state.sn_to_vn);
    fill(&mut state.vn_to_cn);
    fill(&mut state.cn_to_vn);
    fill(&mut state.vn_to_sn);
    let h = DMatrix::from_fn(m, ns, |_, _| rng.random_range(-1.0..1.0));
    let y = DMatrix::from_fn(m, np, |_, _| rng.random_range(-2.0..2.0));
    RandomCase {
        state,
        y,
        h,
        noise_var: rng.random_range(0.2..2.0),
        activation_prob: rng.random_range(0.01..0.9),
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn gauss_pdf(x: f64, mean: f64, var: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
}

/// Normalized `(P(s = 1), P(s = 0))` from unnormalized weights.
fn normalize(one: f64, zero: f64) -> (f64, f64) {
    (one / (one + zero), zero / (one + zero))
}

/// Sum node (m, p) to variable node (s, p).
pub fn sn_oracle(c: &RandomCase, s: usize, p: usize, m: usize) -> (f64, f64) {
    let st = &c.state;
    let (mut u, mut v) = (0.0, c.noise_var);
    for i in 0..st.n_devices {
        if i == s {
            continue;
        }
        let pi = sigma(st.vn_to_sn[st.idx3(i, p, m)]);
        let qi = sigma(-st.vn_to_sn[st.idx3(i, p, m)]);
        u += c.h[(m, i)] * pi;
        v += c.h[(m, i)].powi(2) * pi * qi;
    }
    let y = c.y[(m, p)];
    normalize(gauss_pdf(y, c.h[(m, s)] + u, v), gauss_pdf(y, u, v))
}

/// Variable node (s, p) to its check node.
pub fn vn_to_cn_oracle(c: &RandomCase, p0: f64, s: usize, p: usize) -> (f64, f64) {
    let st = &c.state;
    let (mut one, mut zero) = (p0, 1.0 - p0);
    for m in 0..st.n_antennas {
        let l = st.sn_to_vn[st.idx3(s, p, m)];
        one *= sigma(l);
        zero *= sigma(-l);
    }
    normalize(one, zero)
}

/// Check node of device s to variable node (s, p).
pub fn cn_oracle(c: &RandomCase, s: usize, p: usize) -> (f64, f64) {
    let st = &c.state;
    let mut one = c.activation_prob;
    for k in 0..st.n_slots {
        if k != p {
            one *= sigma(-st.vn_to_cn[s * st.n_slots + k]);
        }
    }
    (one, 1.0 - one)
}

/// Variable node (s, p) to sum node (m, p).
pub fn vn_to_sn_oracle(c: &RandomCase, p0: f64, s: usize, p: usize, m: usize) -> (f64, f64) {
    let st = &c.state;
    let lc = st.cn_to_vn[s * st.n_slots + p];
    let (mut one, mut zero) = (p0 * sigma(lc), (1.0 - p0) * sigma(-lc));
    for j in 0..st.n_antennas {
        if j != m {
            let l = st.sn_to_vn[st.idx3(s, p, j)];
            one *= sigma(l);
            zero *= sigma(-l);
        }
    }
    normalize(one, zero)
}

/// Output belief of entry (s, p).
pub fn output_oracle(c: &RandomCase, p0: f64, s: usize, p: usize) -> (f64, f64) {
    let st = &c.state;
    let lc = st.cn_to_vn[s * st.n_slots + p];
    let (mut one, mut zero) = (p0 * sigma(lc), (1.0 - p0) * sigma(-lc));
    for m in 0..st.n_antennas {
        let l = st.sn_to_vn[st.idx3(s, p, m)];
        one *= sigma(l);
        zero *= sigma(-l);
    }
    normalize(one, zero)
}

/// Compare an LLR against an oracle probability pair. Both `sigma(l)` and
/// `sigma(-l)` must match to relative tolerance `rtol`, which bounds the LLR
/// error without being fooled by cancellation near zero. When the oracle is
/// beyond the clip the LLR must sit on the clip.
pub fn check_llr(llr: f64, (one, zero): (f64, f64), clip: f64, rtol: f64) -> Result<(), String> {
    let exact = one.ln() - zero.ln();
    if exact.abs() >= clip {
        return if (llr - clip * exact.signum()).abs() <= 1e-9 * clip {
            Ok(())
        } else {
            Err(format!("oracle {exact} beyond clip, kernel {llr}"))
        };
    }
    // Both halves of the pair without cancellation.
    let e = (-llr.abs()).exp();
    let (big, small) = (1.0 / (1.0 + e), e / (1.0 + e));
    let (a, b) = if llr >= 0.0 {
        (big, small)
    } else {
        (small, big)
    };
    let ok = (a - one).abs() <= rtol * one && (b - zero).abs() <= rtol * zero;
    if ok {
        Ok(())
    } else {
        Err(format!(
            "kernel llr {llr} -> ({a:e}, {b:e}), oracle ({one:e}, {zero:e}), oracle llr {exact}"
        ))
    }
}

/// Exhaustive posterior marginals `P(s_sp = 1 | Y)` for small systems using
/// the real-stacked model with known channel.
pub fn map_marginals(y: &DMatrix<f64>, h: &DMatrix<f64>, config: &SystemConfig) -> DMatrix<f64> {
    let (ns, np) = (config.n_devices, config.n_slots);
    let m = y.nrows();
    let var = config.noise_var_real();
    let choices = np + 1;
    let total = choices.pow(ns as u32);
    let mut log_weights = Vec::with_capacity(total);
    let mut patterns = Vec::with_capacity(total);
    for code in 0..total {
        // digit 0 = inactive, digit k = slot k - 1
        let mut slots = Vec::with_capacity(ns);
        let mut c = code;
        let mut log_prior = 0.0;
        for _ in 0..ns {
            let d = c % choices;
            c /= choices;
            slots.push(d.checked_sub(1));
            log_prior += if d == 0 {
                (1.0 - config.activation_prob).ln()
            } else {
                (config.activation_prob / np as f64).ln()
            };
        }
        let mut log_lik = 0.0;
        for p in 0..np {
            for row in 0..m {
                let mut mean = 0.0;
                for (s, slot) in slots.iter().enumerate() {
                    if *slot == Some(p) {
                        mean += h[(row, s)];
                    }
                }
                log_lik -= (y[(row, p)] - mean).powi(2) / (2.0 * var);
            }
        }
        log_weights.push(log_prior + log_lik);
        patterns.push(slots);
    }
    let max = log_weights
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut marg = DMatrix::zeros(ns, np);
    let mut norm = 0.0;
    for (lw, slots) in log_weights.iter().zip(&patterns) {
        let w = (lw - max).exp();
        norm += w;
        for (s, slot) in slots.iter().enumerate() {
            if let Some(p) = slot {
                marg[(s, *p)] += w;
            }
        }
    }
    marg / norm
}

/// Run every LLR kernel on `cases` random states and compare each produced
/// message with its probability-domain oracle. Returns the number of checked
/// messages and the first few mismatches.
pub fn kernel_duality(cases: usize, seed: u64) -> (usize, Vec<String>) {
    use fsra::mpad::kernels::{
        cn_update, output_llr, sn_update, vn_to_cn_update, vn_to_sn_update, Observation,
    };
    use fsra::mpad::DetectorParams;

    let params = DetectorParams::default();
    let clip = params.llr_clip;
    let mut rng = rng(seed);
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut record = |what: &str, r: Result<(), String>| {
        checked += 1;
        if let Err(e) = r {
            if failures.len() < 10 {
                failures.push(format!("{what}: {e}"));
            }
        }
    };
    for _ in 0..cases {
        let c = random_case(&mut rng, 20.0);
        let (ns, np, m) = (c.state.n_devices, c.state.n_slots, c.state.n_antennas);
        let p0 = sigma(c.state.prior_llr);
        let obs = Observation {
            y: &c.y,
            h: &c.h,
            noise_var: c.noise_var,
            activation_prob: c.activation_prob,
        };

        let mut st = c.state.clone();
        sn_update(&mut st, &obs, &params, None).expect("finite state");
        for s in 0..ns {
            for p in 0..np {
                for a in 0..m {
                    record(
                        "sum node",
                        check_llr(
                            st.sn_to_vn[st.idx3(s, p, a)],
                            sn_oracle(&c, s, p, a),
                            clip,
                            1e-9,
                        ),
                    );
                }
            }
        }

        let mut st = c.state.clone();
        vn_to_cn_update(&mut st, &params, None);
        for s in 0..ns {
            for p in 0..np {
                record(
                    "variable to check",
                    check_llr(
                        st.vn_to_cn[s * np + p],
                        vn_to_cn_oracle(&c, p0, s, p),
                        clip,
                        1e-9,
                    ),
                );
            }
        }

        let mut st = c.state.clone();
        cn_update(&mut st, c.activation_prob, &params, None);
        for s in 0..ns {
            for p in 0..np {
                record(
                    "check node",
                    check_llr(st.cn_to_vn[s * np + p], cn_oracle(&c, s, p), clip, 1e-6),
                );
            }
        }

        let mut st = c.state.clone();
        vn_to_sn_update(&mut st, &params, None);
        for s in 0..ns {
            for p in 0..np {
                for a in 0..m {
                    record(
                        "variable to sum",
                        check_llr(
                            st.vn_to_sn[st.idx3(s, p, a)],
                            vn_to_sn_oracle(&c, p0, s, p, a),
                            clip,
                            1e-9,
                        ),
                    );
                }
            }
        }

        let out = output_llr(&c.state, None);
        for s in 0..ns {
            for p in 0..np {
                record(
                    "output",
                    check_llr(
                        out[(s, p)],
                        output_oracle(&c, p0, s, p),
                        f64::INFINITY,
                        1e-9,
                    ),
                );
            }
        }
    }
    (checked, failures)
}

/// Fraction of frames on which MP-AD decisions equal the elementwise MAP
/// decisions, and the fraction of noise-free frames recovered exactly.
pub fn map_agreement(frames: u64, seed: u64) -> (f64, f64) {
    use fsra::mpad::{detect, DetectorParams};
    use fsra::{synthesize_frame, FrameSeed};

    let config = SystemConfig {
        n_devices: 3,
        n_slots: 2,
        n_antennas_complex: 4,
        activation_prob: 0.2,
        snr_db: 10.0,
        ..Default::default()
    };
    let params = DetectorParams::from_config(&config);
    let mut agree = 0;
    for f in 0..frames {
        let frame = synthesize_frame(&config, FrameSeed::new(seed, f));
        let rx = &frame.rx_fixed;
        let out = detect(&rx.y, &rx.h_csi, &config, &params, None).expect("valid frame");
        let marg = map_marginals(&rx.y, &rx.h_csi, &config);
        let same = (0..3).all(|s| (0..2).all(|p| out.s_hat.get(s, p) == (marg[(s, p)] >= 0.5)));
        agree += u64::from(same);
    }

    let clean = SystemConfig {
        snr_db: f64::INFINITY,
        ..config
    };
    let mut recovered = 0;
    for f in 0..frames {
        let frame = synthesize_frame(&clean, FrameSeed::new(seed, f));
        let rx = &frame.rx_fixed;
        let out = detect(&rx.y, &rx.h_csi, &clean, &params, None).expect("valid frame");
        recovered += u64::from(out.s_hat == frame.indicator.to_binary());
    }
    (
        agree as f64 / frames as f64,
        recovered as f64 / frames as f64,
    )
}

/// Run the plain and the all-ones weighted detector on `frames` frames and
/// compare every intermediate message array and the output bit for bit.
pub fn unit_weight_identity(frames: u64, seed: u64) -> Result<(), String> {
    use fsra::mpad::{run, DetectorParams, MessageState, Trace, WeightDims, WeightSet};
    use fsra::{synthesize_frame, FrameSeed};

    let config = SystemConfig {
        n_devices: 24,
        n_slots: 3,
        n_antennas_complex: 6,
        activation_prob: 0.2,
        snr_db: 5.0,
        iterations: 6,
        channel_error_std: 0.1,
        ..Default::default()
    };
    let params = DetectorParams::from_config(&config);
    let weights = WeightSet::unit(WeightDims {
        n_devices: config.n_devices,
        n_slots: config.n_slots,
        n_antennas: config.n_antennas_real(),
        iterations: config.iterations,
    });
    for f in 0..frames {
        let frame = synthesize_frame(&config, FrameSeed::new(seed, f));
        let rx = &frame.rx_fixed;
        let mut traces: [Vec<(usize, &'static str, MessageState)>; 2] = Default::default();
        let mut results = Vec::new();
        for (trace, w) in traces.iter_mut().zip([None, Some(&weights)]) {
            let mut observer =
                |i: usize, k: &'static str, s: &MessageState| trace.push((i, k, s.clone()));
            let out = run(
                &rx.y,
                &rx.h_csi,
                &config,
                &params,
                w,
                Trace {
                    snapshots: true,
                    observer: Some(&mut observer),
                },
            )
            .map_err(|e| e.to_string())?;
            results.push(out);
        }
        let [plain, weighted] = &traces;
        if plain.len() != weighted.len() || plain.len() != 4 * config.iterations - 1 {
            return Err(format!(
                "frame {f}: trace lengths {} and {}",
                plain.len(),
                weighted.len()
            ));
        }
        for (a, b) in plain.iter().zip(weighted) {
            let bits = |s: &MessageState| -> Vec<u64> {
                [&s.sn_to_vn, &s.vn_to_cn, &s.cn_to_vn, &s.vn_to_sn]
                    .iter()
                    .flat_map(|v| v.iter().map(|x| x.to_bits()))
                    .collect()
            };
            if a.0 != b.0 || a.1 != b.1 || bits(&a.2) != bits(&b.2) {
                return Err(format!(
                    "frame {f}: iteration {} kernel {} differs",
                    a.0, a.1
                ));
            }
        }
        let llr_bits = |m: &DMatrix<f64>| m.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        if llr_bits(&results[0].llr) != llr_bits(&results[1].llr)
            || results[0].s_hat != results[1].s_hat
        {
            return Err(format!("frame {f}: outputs differ"));
        }
    }
    Ok(())
}

/// Run the built CLI, returning stdout; panics with stderr on failure.
pub fn fsra(args: &[&str]) -> String {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_fsra"))
        .args(args)
        .output()
        .expect("spawn fsra");
    assert!(
        out.status.success(),
        "fsra {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf-8 output")
}

/// Repeat each CSV-producing subcommand with the same seed and compare the
/// files byte for byte. Returns the subcommands that differed.
pub fn cli_determinism(dir: &std::path::Path) -> Vec<String> {
    let config = dir.join("small.toml");
    std::fs::write(
        &config,
        "n_devices = 30\nn_slots = 3\nn_antennas_complex = 6\nactivation_prob = 0.1\nsnr_db = 5.0\n",
    )
    .unwrap();
    let config = config.to_str().unwrap().to_string();
    let runs: [(&str, Vec<&str>); 4] = [
        ("eer", vec!["--sweep", "n_antennas_complex=4,6"]),
        ("throughput", vec!["--sweep", "snr_db=10,20"]),
        ("robustness", vec![]),
        (
            "eer",
            vec!["--detector", "lmmse", "--calibration-frames", "20"],
        ),
    ];
    let mut differing = Vec::new();
    for (i, (cmd, extra)) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let out = dir.join(format!("{cmd}-{i}-{rep}.csv"));
            let mut args = vec![*cmd, "--config", &config, "--frames", "40", "--seed", "17"];
            args.extend(extra.iter().copied());
            let out_str = out.to_str().unwrap().to_string();
            args.extend(["--out", &out_str]);
            fsra(&args);
            outputs.push(std::fs::read(&out).unwrap());
        }
        if outputs[0] != outputs[1] || outputs[0].is_empty() {
            differing.push(format!("{cmd} {extra:?}"));
        }
    }
    differing
}
