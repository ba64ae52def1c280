//! Run message-passing activity detection on one frame and compare the
//! decision with the true indicator matrix.

use fsra::{detect, synthesize_frame, DetectorParams, FrameSeed, SystemConfig};

fn main() -> fsra::Result<()> {
    let config = SystemConfig {
        n_devices: 40,
        n_slots: 4,
        n_antennas_complex: 12,
        activation_prob: 0.1,
        snr_db: 5.0,
        ..Default::default()
    };
    let frame = synthesize_frame(&config, FrameSeed::new(7, 0));
    let result = detect(
        &frame.rx_fixed.y,
        &frame.rx_fixed.h_csi,
        &config,
        &DetectorParams::from_config(&config),
        None,
    )?;

    let truth = frame.indicator.to_binary();
    println!(
        "{} devices active, {} detected",
        truth.count_ones(),
        result.s_hat.count_ones()
    );
    println!("element errors: {}", truth.hamming(&result.s_hat));
    for s in 0..config.n_devices {
        if let Some(p) = frame.indicator.slot_of(s) {
            println!("  device {s:2} slot {p}: LLR {:7.2}", result.llr[(s, p)]);
        }
    }
    Ok(())
}
