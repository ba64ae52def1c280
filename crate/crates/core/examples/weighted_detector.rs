//! Build a weight set, store it in the text weight format, load it back and
//! run the weighted detector. All-ones weights reproduce plain message
//! passing exactly; scaling the output prior bias moves the decisions.

use fsra::mpad::WeightDims;
use fsra::{detect, synthesize_frame, DetectorParams, FrameSeed, SystemConfig, WeightSet};

fn main() -> fsra::Result<()> {
    let config = SystemConfig {
        n_devices: 20,
        n_slots: 3,
        n_antennas_complex: 6,
        activation_prob: 0.1,
        snr_db: 0.0,
        iterations: 5,
        ..Default::default()
    };
    let dims = WeightDims {
        n_devices: config.n_devices,
        n_slots: config.n_slots,
        n_antennas: config.n_antennas_real(),
        iterations: config.iterations,
    };
    let dir = std::env::temp_dir().join("fsra-weighted-example");
    std::fs::create_dir_all(&dir).map_err(|source| fsra::Error::Io {
        path: dir.clone(),
        source,
    })?;
    let path = dir.join("unit.weights");
    WeightSet::unit(dims).save(&path)?;
    let weights = WeightSet::load_for(&path, dims)?;
    println!(
        "{} trainable weights written to {}",
        weights.parameter_count(),
        path.display()
    );

    let params = DetectorParams::from_config(&config);
    let frame = synthesize_frame(&config, FrameSeed::new(3, 0));
    let (y, h) = (&frame.rx_fixed.y, &frame.rx_fixed.h_csi);
    let plain = detect(y, h, &config, &params, None)?;
    let unit = detect(y, h, &config, &params, Some(&weights))?;
    println!(
        "unit weights identical to plain detector: {}",
        plain.llr == unit.llr
    );

    let mut biased = weights.clone();
    biased.output.wb_dec.iter_mut().for_each(|w| *w = 3.0);
    let shifted = detect(y, h, &config, &params, Some(&biased))?;
    let diff = (&shifted.llr - &plain.llr).abs().max();
    println!("tripled output prior bias shifts LLRs by up to {diff:.2}");
    Ok(())
}
