//! Training-set export for the unfolded detector.
//!
//! The file is line-delimited JSON. The first line is a [`DatasetHeader`];
//! every following line is one [`Record`]. Matrices are flattened row-major:
//!
//! * `y`: real-stacked fixed-symbol observation, `M x N_p`, index `m * N_p + p`
//! * `h_csi`: real-stacked CSI, `M x N_s`, index `m * N_s + s`
//! * `s`: indicator label, `N_s x N_p`, index `s * N_p + p`
//!
//! `noise_var` is the complex noise variance σ_n²; each real component of
//! `y` carries σ_n²/2. Record `i` is frame `i` of the header's seed, so a
//! re-export with the same config is byte-identical.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::model::synthesize_frame;
use crate::rng::FrameSeed;

pub const DATASET_FORMAT: &str = "fsra-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: u32,
    pub samples: u64,
    pub seed: u64,
    pub n_devices: usize,
    pub n_slots: usize,
    /// Real-stacked antenna count M = 2 M*.
    pub n_antennas: usize,
    pub snr_db: f64,
    pub channel_error_std: f64,
    pub noise_var: f64,
    pub activation_prob: f64,
    pub entry_prior: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub y: Vec<f64>,
    pub h_csi: Vec<f64>,
    pub s: Vec<u8>,
    pub noise_var: f64,
    pub activation_prob: f64,
    pub entry_prior: f64,
}

impl Record {
    pub fn y_matrix(&self, header: &DatasetHeader) -> DMatrix<f64> {
        DMatrix::from_row_slice(header.n_antennas, header.n_slots, &self.y)
    }

    pub fn h_matrix(&self, header: &DatasetHeader) -> DMatrix<f64> {
        DMatrix::from_row_slice(header.n_antennas, header.n_devices, &self.h_csi)
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

/// Stream `samples` records to `out`. Nothing beyond one frame is held in
/// memory.
pub fn write_dataset<W: Write>(config: &SystemConfig, samples: u64, out: W) -> Result<()> {
    config.validate()?;
    // Data symbols are not part of a training record.
    let config = SystemConfig {
        payload_len: 0,
        ..config.clone()
    };
    let mut out = BufWriter::new(out);
    let header = DatasetHeader {
        format: DATASET_FORMAT.into(),
        version: DATASET_VERSION,
        samples,
        seed: config.rng_seed,
        n_devices: config.n_devices,
        n_slots: config.n_slots,
        n_antennas: config.n_antennas_real(),
        snr_db: config.snr_db,
        channel_error_std: config.channel_error_std,
        noise_var: config.noise_var(),
        activation_prob: config.activation_prob,
        entry_prior: config.entry_prior(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for i in 0..samples {
        let frame = synthesize_frame(&config, FrameSeed::new(config.rng_seed, i));
        let s = frame.indicator.to_binary();
        let record = Record {
            y: row_major(&frame.rx_fixed.y),
            h_csi: row_major(&frame.rx_fixed.h_csi),
            s: (0..config.n_devices)
                .flat_map(|d| (0..config.n_slots).map(move |p| (d, p)))
                .map(|(d, p)| u8::from(s.get(d, p)))
                .collect(),
            noise_var: header.noise_var,
            activation_prob: header.activation_prob,
            entry_prior: header.entry_prior,
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn export_dataset(config: &SystemConfig, samples: u64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_dataset(config, samples, file)
}

/// Streaming reader over an exported file.
pub struct DatasetReader<R> {
    header: DatasetHeader,
    lines: std::io::Lines<R>,
    line: usize,
}

impl DatasetReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::new(BufReader::new(file))
    }
}

impl<R: BufRead> DatasetReader<R> {
    pub fn new(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let first = lines
            .next()
            .transpose()?
            .ok_or_else(|| Error::InvalidConfig("dataset file is empty".into()))?;
        let header: DatasetHeader = serde_json::from_str(&first)?;
        if header.format != DATASET_FORMAT || header.version != DATASET_VERSION {
            return Err(Error::InvalidConfig(format!(
                "expected {DATASET_FORMAT} version {DATASET_VERSION}, found {} version {}",
                header.format, header.version
            )));
        }
        Ok(Self {
            header,
            lines,
            line: 1,
        })
    }

    pub fn header(&self) -> &DatasetHeader {
        &self.header
    }

    fn check(&self, r: &Record) -> Result<()> {
        let h = &self.header;
        let expect = [
            ("y", r.y.len(), h.n_antennas * h.n_slots),
            ("h_csi", r.h_csi.len(), h.n_antennas * h.n_devices),
            ("s", r.s.len(), h.n_devices * h.n_slots),
        ];
        for (name, actual, expected) in expect {
            if actual != expected {
                return Err(Error::DimensionMismatch {
                    context: "dataset record",
                    expected: format!("{expected} values in `{name}`"),
                    actual: format!("{actual} on line {}", self.line),
                });
            }
        }
        Ok(())
    }
}

impl<R: BufRead> Iterator for DatasetReader<R> {
    type Item = Result<Record>;

    fn next(&mut self) -> Option<Self::Item> {
        let line = match self.lines.next()? {
            Ok(line) => line,
            Err(e) => return Some(Err(e.into())),
        };
        self.line += 1;
        let record = serde_json::from_str::<Record>(&line)
            .map_err(Error::from)
            .and_then(|r| self.check(&r).map(|_| r));
        Some(record)
    }
}
