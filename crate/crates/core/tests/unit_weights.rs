mod common;

use fsra::config::SystemConfig;
use fsra::mpad::{detect, DetectorParams, WeightDims, WeightSet};
use fsra::{synthesize_frame, FrameSeed};

#[test]
fn all_ones_weights_reproduce_plain_detector_exactly() {
    common::unit_weight_identity(100, 5).unwrap();
}

#[test]
fn weights_are_actually_applied() {
    let config = SystemConfig {
        n_devices: 10,
        n_slots: 2,
        n_antennas_complex: 4,
        activation_prob: 0.3,
        snr_db: 5.0,
        iterations: 3,
        ..Default::default()
    };
    let dims = WeightDims {
        n_devices: 10,
        n_slots: 2,
        n_antennas: 8,
        iterations: 3,
    };
    let frame = synthesize_frame(&config, FrameSeed::new(1, 0));
    let rx = &frame.rx_fixed;
    let params = DetectorParams::from_config(&config);
    let plain = detect(&rx.y, &rx.h_csi, &config, &params, None).unwrap();

    // Each family, perturbed on its own, must move the output.
    type Perturb = Box<dyn Fn(&mut WeightSet)>;
    let perturbations: Vec<(&str, Perturb)> = vec![
        ("w_y", Box::new(|w| w.sum[0].w_y[0] = 1.5)),
        ("w_u", Box::new(|w| w.sum[0].w_u[0] = 0.5)),
        ("w_v", Box::new(|w| w.sum[1].w_v[3] = 3.0)),
        ("w_sigma2", Box::new(|w| w.sum[0].w_sigma2[0] = 2.0)),
        ("w_A2B", Box::new(|w| w.to_check[0].w_a2b[0] = 0.2)),
        ("wb_B", Box::new(|w| w.to_check[0].wb_b[0] = 3.0)),
        ("w_pa", Box::new(|w| w.check[2].w_pa[0] = 0.5)),
        ("w_B2C", Box::new(|w| w.check[2].w_b2c[0] = 4.0)),
        ("w_A2D", Box::new(|w| w.to_sum[0].w_a2d[0] = 0.1)),
        ("w_C2D", Box::new(|w| w.to_sum[0].w_c2d[0] = 5.0)),
        ("wb_D", Box::new(|w| w.to_sum[1].wb_d[0] = 5.0)),
        ("w_A2dec", Box::new(|w| w.output.w_a2dec[0] = 2.0)),
        ("w_C2dec", Box::new(|w| w.output.w_c2dec[0] = 2.0)),
        ("wb_dec", Box::new(|w| w.output.wb_dec[0] = 2.0)),
    ];
    for (name, perturb) in perturbations {
        let mut w = WeightSet::unit(dims);
        perturb(&mut w);
        let out = detect(&rx.y, &rx.h_csi, &config, &params, Some(&w)).unwrap();
        assert_ne!(out.llr, plain.llr, "{name} had no effect");
    }
}
