//! Scenario parameters shared by frame synthesis, detection and the sweep driver.
//!
//! A scenario file is flat TOML whose keys are exactly the [`SystemConfig`]
//! field names. Missing keys take the defaults below; unknown keys are an error.
//!
//! ```toml
//! n_devices = 200
//! n_slots = 4
//! n_antennas_complex = 30
//! activation_prob = 0.05
//! snr_db = 0.0
//! channel_error_std = 0.0
//! iterations = 10
//! mse_threshold = 2e-4
//! rng_seed = 1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Number of devices N_s.
    pub n_devices: usize,
    /// Slots per random-access frame N_p.
    pub n_slots: usize,
    /// Complex receive antennas M*. The detector works on M = 2 M* real rows.
    pub n_antennas_complex: usize,
    /// Per-frame device activation probability p_a.
    pub activation_prob: f64,
    /// SNR in dB with unit mean received power. `inf` gives noise-free frames.
    pub snr_db: f64,
    /// Standard deviation of the additive CSI error.
    pub channel_error_std: f64,
    /// Message-passing iterations L.
    pub iterations: usize,
    /// Per-packet MSE threshold for data recovery.
    pub mse_threshold: f64,
    pub rng_seed: u64,
    /// Gaussian data symbols per packet after the fixed symbol.
    pub payload_len: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self {
            n_devices: 200,
            n_slots: 4,
            n_antennas_complex: 30,
            activation_prob: 0.05,
            snr_db: 0.0,
            channel_error_std: 0.0,
            iterations: 10,
            mse_threshold: 2e-4,
            rng_seed: 0,
            payload_len: 10,
        }
    }
}

/// Names accepted by [`SystemConfig::set_field`] and the `--sweep` flag.
pub const FIELD_NAMES: &[&str] = &[
    "n_devices",
    "n_slots",
    "n_antennas_complex",
    "activation_prob",
    "snr_db",
    "channel_error_std",
    "iterations",
    "mse_threshold",
    "rng_seed",
    "payload_len",
];

impl SystemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: SystemConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("n_devices", self.n_devices),
            ("n_slots", self.n_slots),
            ("n_antennas_complex", self.n_antennas_complex),
            ("iterations", self.iterations),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(0.0..=1.0).contains(&self.activation_prob) {
            return Err(Error::InvalidConfig(format!(
                "activation_prob must lie in [0, 1], got {}",
                self.activation_prob
            )));
        }
        if self.snr_db.is_nan() || self.snr_db == f64::NEG_INFINITY {
            return Err(Error::InvalidConfig(format!(
                "snr_db must be a number or +inf, got {}",
                self.snr_db
            )));
        }
        if !(self.channel_error_std >= 0.0 && self.channel_error_std.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "channel_error_std must be finite and >= 0, got {}",
                self.channel_error_std
            )));
        }
        if self.mse_threshold.is_nan() || self.mse_threshold <= 0.0 {
            return Err(Error::InvalidConfig(format!(
                "mse_threshold must be > 0, got {}",
                self.mse_threshold
            )));
        }
        Ok(())
    }

    /// Real-stacked antenna count M = 2 M*.
    pub fn n_antennas_real(&self) -> usize {
        2 * self.n_antennas_complex
    }

    /// Prior probability p_0 = p_a / N_p that a single indicator entry is one.
    pub fn entry_prior(&self) -> f64 {
        self.activation_prob / self.n_slots as f64
    }

    /// Complex noise variance for unit received power.
    pub fn noise_var(&self) -> f64 {
        10f64.powf(-self.snr_db / 10.0)
    }

    /// Noise variance of each real-stacked component.
    pub fn noise_var_real(&self) -> f64 {
        self.noise_var() / 2.0
    }

    /// Overwrite one field by name, as used by parameter sweeps.
    pub fn set_field(&mut self, name: &str, value: f64) -> Result<()> {
        let as_count = |value: f64| -> Result<usize> {
            if value.fract() != 0.0 || value < 0.0 || !value.is_finite() {
                return Err(Error::InvalidConfig(format!(
                    "{name} takes a non-negative integer, got {value}"
                )));
            }
            Ok(value as usize)
        };
        match name {
            "n_devices" => self.n_devices = as_count(value)?,
            "n_slots" => self.n_slots = as_count(value)?,
            "n_antennas_complex" => self.n_antennas_complex = as_count(value)?,
            "activation_prob" => self.activation_prob = value,
            "snr_db" => self.snr_db = value,
            "channel_error_std" => self.channel_error_std = value,
            "iterations" => self.iterations = as_count(value)?,
            "mse_threshold" => self.mse_threshold = value,
            "rng_seed" => self.rng_seed = as_count(value)? as u64,
            "payload_len" => self.payload_len = as_count(value)?,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown config field `{other}`"
                )))
            }
        }
        self.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_quantities() {
        let config = SystemConfig {
            n_antennas_complex: 35,
            activation_prob: 0.05,
            n_slots: 4,
            snr_db: 10.0,
            ..Default::default()
        };
        assert_eq!(config.n_antennas_real(), 70);
        assert!((config.entry_prior() - 0.0125).abs() < 1e-15);
        assert!((config.noise_var() - 0.1).abs() < 1e-15);
        assert!((config.noise_var_real() - 0.05).abs() < 1e-15);
    }

    #[test]
    fn infinite_snr_is_noise_free() {
        let config = SystemConfig {
            snr_db: f64::INFINITY,
            ..Default::default()
        };
        config.validate().unwrap();
        assert_eq!(config.noise_var(), 0.0);
    }

    #[test]
    fn parses_flat_toml_and_rejects_unknown_keys() {
        let config = SystemConfig::from_toml_str(
            "n_devices = 70\nn_antennas_complex = 35\nsnr_db = -5.0\nrng_seed = 9\n",
        )
        .unwrap();
        assert_eq!(config.n_devices, 70);
        assert_eq!(config.snr_db, -5.0);
        assert_eq!(config.n_slots, 4);
        assert_eq!(config.rng_seed, 9);

        let err = SystemConfig::from_toml_str("n_devices = 70\nantennas = 3\n").unwrap_err();
        assert!(err.to_string().contains("antennas"), "{err}");
    }

    #[test]
    fn toml_round_trip() {
        let config = SystemConfig {
            snr_db: f64::INFINITY,
            rng_seed: u64::MAX >> 2,
            ..Default::default()
        };
        let back = SystemConfig::from_toml_str(&config.to_toml_string()).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn validation_errors() {
        let bad = [
            SystemConfig {
                n_slots: 0,
                ..Default::default()
            },
            SystemConfig {
                activation_prob: 1.5,
                ..Default::default()
            },
            SystemConfig {
                snr_db: f64::NAN,
                ..Default::default()
            },
            SystemConfig {
                channel_error_std: -0.1,
                ..Default::default()
            },
            SystemConfig {
                mse_threshold: 0.0,
                ..Default::default()
            },
        ];
        for config in bad {
            assert!(config.validate().is_err(), "{config:?}");
        }
    }

    #[test]
    fn set_field_by_name() {
        let mut config = SystemConfig::default();
        config.set_field("n_antennas_complex", 50.0).unwrap();
        config.set_field("snr_db", -10.0).unwrap();
        assert_eq!(config.n_antennas_complex, 50);
        assert_eq!(config.snr_db, -10.0);
        assert!(config.set_field("n_devices", 2.5).is_err());
        assert!(config.set_field("bogus", 1.0).is_err());
        for name in FIELD_NAMES {
            let mut c = SystemConfig::default();
            let v = if *name == "activation_prob" { 0.5 } else { 3.0 };
            c.set_field(name, v).unwrap();
        }
    }
}
