//! Draw one random-access frame and look at what the receiver sees.

use fsra::{synthesize_frame, FrameSeed, SystemConfig};

fn main() {
    let config = SystemConfig {
        n_devices: 12,
        n_slots: 3,
        n_antennas_complex: 4,
        activation_prob: 0.3,
        snr_db: 10.0,
        ..Default::default()
    };
    let frame = synthesize_frame(&config, FrameSeed::new(config.rng_seed, 0));

    println!("active devices: {}", frame.indicator.active_count());
    for (device, slot) in frame.indicator.slots().iter().enumerate() {
        if let Some(p) = slot {
            println!("  device {device:2} -> slot {p}");
        }
    }
    println!(
        "indicator S (rows = devices, cols = slots):\n{}",
        frame.indicator.to_binary()
    );
    println!(
        "fixed-symbol observation Y: {} x {} real-stacked, CSI: {} x {}",
        frame.rx_fixed.y.nrows(),
        frame.rx_fixed.y.ncols(),
        frame.rx_fixed.h_csi.nrows(),
        frame.rx_fixed.h_csi.ncols()
    );
    println!("complex noise variance: {:.4}", frame.noise_var);
    println!(
        "data blocks per slot: {:?}",
        frame.rx_data.iter().map(|d| d.shape()).collect::<Vec<_>>()
    );
}
