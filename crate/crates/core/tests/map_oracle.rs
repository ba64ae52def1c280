mod common;

use fsra::config::SystemConfig;
use nalgebra::DMatrix;

#[test]
fn marginals_of_single_device_match_closed_form() {
    let config = SystemConfig {
        n_devices: 1,
        n_slots: 2,
        n_antennas_complex: 1,
        activation_prob: 0.3,
        snr_db: 0.0,
        ..Default::default()
    };
    let h = DMatrix::from_row_slice(2, 1, &[0.8, -0.4]);
    let y = DMatrix::from_row_slice(2, 2, &[0.7, 0.1, -0.5, 0.2]);
    let var = config.noise_var_real();
    let lik = |p: Option<usize>| -> f64 {
        (0..2)
            .map(|r| {
                (0..2)
                    .map(|q| {
                        let mean: f64 = if Some(q) == p { h[(r, 0)] } else { 0.0 };
                        (-(y[(r, q)] - mean).powi(2) / (2.0 * var)).exp()
                    })
                    .product::<f64>()
            })
            .product()
    };
    let w = [0.7 * lik(None), 0.15 * lik(Some(0)), 0.15 * lik(Some(1))];
    let total: f64 = w.iter().sum();
    let marg = common::map_marginals(&y, &h, &config);
    assert!((marg[(0, 0)] - w[1] / total).abs() < 1e-14);
    assert!((marg[(0, 1)] - w[2] / total).abs() < 1e-14);
}

#[test]
fn detector_agrees_with_exhaustive_map() {
    let (agree, recovered) = common::map_agreement(1000, 77);
    println!("agreement {agree}, noise-free recovery {recovered}");
    assert!(agree >= 0.95, "agreement {agree}");
    assert!(recovered >= 0.99, "noise-free recovery {recovered}");
}
