//! Sweep the antenna count and print the element error rate as CSV, the same
//! output `fsra eer` produces.

use fsra::harness::{run_eer_sweep, Detector, SweepSpec};
use fsra::SystemConfig;

fn main() -> fsra::Result<()> {
    let config = SystemConfig {
        n_devices: 60,
        n_slots: 4,
        activation_prob: 0.05,
        snr_db: 0.0,
        ..Default::default()
    };
    let spec = SweepSpec::new(config, Detector::Mpad, 200)
        .sweep("n_antennas_complex", &[6.0, 10.0, 14.0, 18.0]);
    let report = run_eer_sweep(&spec)?;
    report.write_csv(std::io::stdout().lock(), false)?;
    Ok(())
}
