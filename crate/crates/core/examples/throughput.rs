//! Full receiver chain on a few frames: activity detection, per-slot MMSE
//! data recovery and packet classification.

use fsra::mud::{classify_packets, recover_frame, throughput, PacketStatus};
use fsra::{detect, synthesize_frame, DetectorParams, FrameSeed, SystemConfig};

fn main() -> fsra::Result<()> {
    let config = SystemConfig {
        n_devices: 80,
        n_slots: 4,
        n_antennas_complex: 32,
        activation_prob: 0.05,
        snr_db: 25.0,
        ..Default::default()
    };
    let params = DetectorParams::from_config(&config);
    let mut frames = Vec::new();
    for f in 0..50 {
        let frame = synthesize_frame(&config, FrameSeed::new(config.rng_seed, f));
        let s_hat = detect(
            &frame.rx_fixed.y,
            &frame.rx_fixed.h_csi,
            &config,
            &params,
            None,
        )?
        .s_hat;
        let recoveries = recover_frame(&frame, &s_hat)?;
        let outcomes =
            classify_packets(&frame.indicator, &s_hat, &recoveries, config.mse_threshold);
        if f == 0 {
            for o in &outcomes {
                println!(
                    "frame 0: device {:2} slot {} -> {:?}",
                    o.device, o.slot, o.status
                );
            }
        }
        frames.push(outcomes);
    }
    let summary = throughput(&frames);
    println!(
        "{} frames: throughput {:.2} packets/frame, {} sent, {} ok, {} activity failures, {} data failures, {} false alarms",
        summary.frames,
        summary.throughput(),
        summary.true_packets,
        summary.successes,
        summary.fail_activity,
        summary.fail_data,
        summary.false_alarms
    );
    let failed = frames
        .iter()
        .flatten()
        .filter(|o| o.status != PacketStatus::Success)
        .count();
    println!("non-successful outcomes (including false alarms): {failed}");
    Ok(())
}
