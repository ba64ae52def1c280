//! Element error rate as the channel estimate gets worse.

use fsra::harness::{run_robustness_sweep, Detector, SweepSpec};
use fsra::SystemConfig;

fn main() -> fsra::Result<()> {
    let config = SystemConfig {
        n_devices: 50,
        n_slots: 4,
        n_antennas_complex: 12,
        activation_prob: 0.1,
        snr_db: 0.0,
        ..Default::default()
    };
    let spec = SweepSpec::new(config, Detector::Mpad, 300)
        .sweep("channel_error_std", &[0.0, 0.1, 0.3, 0.5]);
    for p in run_robustness_sweep(&spec)?.points {
        println!(
            "sigma_e = {:.1}: EER {:.3e} +/- {:.1e}",
            p.swept_value.unwrap_or_default(),
            p.eer,
            p.eer_stderr
        );
    }
    Ok(())
}
