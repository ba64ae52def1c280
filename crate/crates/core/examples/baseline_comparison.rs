//! Compare message passing with the LMMSE and matched-filter baselines.
//! The baselines' decision thresholds are calibrated on separate frames.

use fsra::harness::{run_eer_sweep, Detector, SweepSpec, ThresholdMode};
use fsra::SystemConfig;

fn main() -> fsra::Result<()> {
    let config = SystemConfig {
        n_devices: 60,
        n_slots: 4,
        n_antennas_complex: 16,
        activation_prob: 0.05,
        snr_db: 0.0,
        ..Default::default()
    };
    for detector in [Detector::Mpad, Detector::Lmmse, Detector::MatchedFilter] {
        let name = detector.kind().name();
        let mut spec = SweepSpec::new(config.clone(), detector, 300);
        spec.threshold = ThresholdMode::Calibrated { frames: 300 };
        let point = &run_eer_sweep(&spec)?.points[0];
        match point.threshold {
            Some(t) => println!("{name:6} EER {:.3e} (threshold {t})", point.eer),
            None => println!("{name:6} EER {:.3e}", point.eer),
        }
    }
    Ok(())
}
