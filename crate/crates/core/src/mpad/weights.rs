//! Per-edge, per-iteration weights of the unfolded detector and their text
//! file format.
//!
//! The network built from `L` iterations has `4L - 1` hidden layers:
//! A (sum node to variable node), B (variable node to check node),
//! C (check node to variable node) and D (variable node to sum node) for
//! every iteration except the last, which stops after C and feeds the output
//! layer. Arrays are flat and row-major over `(s, p, m[, k])`, where the
//! trailing index `k` enumerates the *other* devices, slots or antennas in
//! ascending order.
//!
//! File layout (all lines whitespace separated):
//!
//! ```text
//! fsra-weights
//! version 1
//! n_s 4
//! n_p 3
//! m 4
//! l 2
//! w_y iter=1 48
//! 1 1 1 ...
//! w_u iter=1 144
//! ...
//! wb_dec output 12
//! 1 1 ...
//! ```
//!
//! Every section is a header `<name> <layer> <count>` followed by one line
//! holding exactly `count` numbers. Sections appear in a fixed order: per
//! iteration `w_y w_u w_v w_sigma2 w_A2B wb_B w_pa w_B2C` and, except for the
//! last iteration, `w_A2D w_C2D wb_D`; then `w_A2dec w_C2dec wb_dec`.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result, WeightFileError};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "fsra-weights";

/// Graph dimensions a weight set was built for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WeightDims {
    pub n_devices: usize,
    pub n_slots: usize,
    /// Real-stacked antenna count M.
    pub n_antennas: usize,
    pub iterations: usize,
}

impl std::fmt::Display for WeightDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "N_s={} N_p={} M={} L={}",
            self.n_devices, self.n_slots, self.n_antennas, self.iterations
        )
    }
}

/// Layer A: sum node to variable node.
#[derive(Debug, Clone, PartialEq)]
pub struct SumLayerWeights {
    /// Scales the received sample, `(s, p, m)`.
    pub w_y: Vec<f64>,
    /// Interference mean terms, `(s, p, m, other device)`.
    pub w_u: Vec<f64>,
    /// Interference variance terms, `(s, p, m, other device)`.
    pub w_v: Vec<f64>,
    /// Noise variance bias, `(s, p, m)`.
    pub w_sigma2: Vec<f64>,
}

/// Layer B: variable node to check node.
#[derive(Debug, Clone, PartialEq)]
pub struct ToCheckWeights {
    /// `(s, p, m)`
    pub w_a2b: Vec<f64>,
    /// Prior bias, `(s, p)`.
    pub wb_b: Vec<f64>,
}

/// Layer C: check node to variable node.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckWeights {
    /// Activation-probability bias, `(s, p)`.
    pub w_pa: Vec<f64>,
    /// `(s, p, other slot)`
    pub w_b2c: Vec<f64>,
}

/// Layer D: variable node to sum node.
#[derive(Debug, Clone, PartialEq)]
pub struct ToSumWeights {
    /// `(s, p, m, other antenna)`
    pub w_a2d: Vec<f64>,
    /// `(s, p, m)`
    pub w_c2d: Vec<f64>,
    /// Prior bias, `(s, p)`.
    pub wb_d: Vec<f64>,
}

/// Output (decision) layer.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputWeights {
    /// `(s, p, m)`
    pub w_a2dec: Vec<f64>,
    /// `(s, p)`
    pub w_c2dec: Vec<f64>,
    /// Prior bias, `(s, p)`.
    pub wb_dec: Vec<f64>,
}

/// Every trainable weight of the unfolded detector.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    dims: WeightDims,
    pub sum: Vec<SumLayerWeights>,
    pub to_check: Vec<ToCheckWeights>,
    pub check: Vec<CheckWeights>,
    /// One entry per iteration except the last.
    pub to_sum: Vec<ToSumWeights>,
    pub output: OutputWeights,
}

struct SectionRef<'a> {
    name: &'static str,
    layer: String,
    values: &'a [f64],
}

struct SectionMut<'a> {
    name: &'static str,
    layer: String,
    values: &'a mut Vec<f64>,
}

impl WeightSet {
    /// All-ones weights, under which the weighted updates reduce to plain
    /// message passing.
    pub fn unit(dims: WeightDims) -> Self {
        let WeightDims {
            n_devices: ns,
            n_slots: np,
            n_antennas: m,
            iterations: l,
        } = dims;
        assert!(
            ns > 0 && np > 0 && m > 0 && l > 0,
            "dimensions must be positive"
        );
        let ones = |n: usize| vec![1.0; n];
        let edges = ns * np;
        Self {
            dims,
            sum: (0..l)
                .map(|_| SumLayerWeights {
                    w_y: ones(edges * m),
                    w_u: ones(edges * m * (ns - 1)),
                    w_v: ones(edges * m * (ns - 1)),
                    w_sigma2: ones(edges * m),
                })
                .collect(),
            to_check: (0..l)
                .map(|_| ToCheckWeights {
                    w_a2b: ones(edges * m),
                    wb_b: ones(edges),
                })
                .collect(),
            check: (0..l)
                .map(|_| CheckWeights {
                    w_pa: ones(edges),
                    w_b2c: ones(edges * (np - 1)),
                })
                .collect(),
            to_sum: (0..l - 1)
                .map(|_| ToSumWeights {
                    w_a2d: ones(edges * m * (m - 1)),
                    w_c2d: ones(edges * m),
                    wb_d: ones(edges),
                })
                .collect(),
            output: OutputWeights {
                w_a2dec: ones(edges * m),
                w_c2dec: ones(edges),
                wb_dec: ones(edges),
            },
        }
    }

    pub fn dims(&self) -> WeightDims {
        self.dims
    }

    /// Total number of trainable scalars.
    pub fn parameter_count(&self) -> usize {
        self.sections().iter().map(|s| s.values.len()).sum()
    }

    fn sections(&self) -> Vec<SectionRef<'_>> {
        let mut out = Vec::new();
        let l = self.dims.iterations;
        for i in 0..l {
            let layer = format!("iter={}", i + 1);
            let a = &self.sum[i];
            let b = &self.to_check[i];
            let c = &self.check[i];
            let mut entries: Vec<(&'static str, &[f64])> = vec![
                ("w_y", &a.w_y),
                ("w_u", &a.w_u),
                ("w_v", &a.w_v),
                ("w_sigma2", &a.w_sigma2),
                ("w_A2B", &b.w_a2b),
                ("wb_B", &b.wb_b),
                ("w_pa", &c.w_pa),
                ("w_B2C", &c.w_b2c),
            ];
            if i + 1 < l {
                let d = &self.to_sum[i];
                entries.push(("w_A2D", &d.w_a2d));
                entries.push(("w_C2D", &d.w_c2d));
                entries.push(("wb_D", &d.wb_d));
            }
            out.extend(entries.into_iter().map(|(name, values)| SectionRef {
                name,
                layer: layer.clone(),
                values,
            }));
        }
        let o = &self.output;
        for (name, values) in [
            ("w_A2dec", &o.w_a2dec),
            ("w_C2dec", &o.w_c2dec),
            ("wb_dec", &o.wb_dec),
        ] {
            out.push(SectionRef {
                name,
                layer: "output".into(),
                values,
            });
        }
        out
    }

    fn sections_mut(&mut self) -> Vec<SectionMut<'_>> {
        let mut out = Vec::new();
        let l = self.dims.iterations;
        let mut to_sum = self.to_sum.iter_mut();
        for (i, ((a, b), c)) in self
            .sum
            .iter_mut()
            .zip(self.to_check.iter_mut())
            .zip(self.check.iter_mut())
            .enumerate()
        {
            let layer = format!("iter={}", i + 1);
            let mut entries: Vec<(&'static str, &mut Vec<f64>)> = vec![
                ("w_y", &mut a.w_y),
                ("w_u", &mut a.w_u),
                ("w_v", &mut a.w_v),
                ("w_sigma2", &mut a.w_sigma2),
                ("w_A2B", &mut b.w_a2b),
                ("wb_B", &mut b.wb_b),
                ("w_pa", &mut c.w_pa),
                ("w_B2C", &mut c.w_b2c),
            ];
            if i + 1 < l {
                let d = to_sum.next().expect("L-1 layer-D blocks");
                entries.push(("w_A2D", &mut d.w_a2d));
                entries.push(("w_C2D", &mut d.w_c2d));
                entries.push(("wb_D", &mut d.wb_d));
            }
            out.extend(entries.into_iter().map(|(name, values)| SectionMut {
                name,
                layer: layer.clone(),
                values,
            }));
        }
        let o = &mut self.output;
        out.push(SectionMut {
            name: "w_A2dec",
            layer: "output".into(),
            values: &mut o.w_a2dec,
        });
        out.push(SectionMut {
            name: "w_C2dec",
            layer: "output".into(),
            values: &mut o.w_c2dec,
        });
        out.push(SectionMut {
            name: "wb_dec",
            layer: "output".into(),
            values: &mut o.wb_dec,
        });
        out
    }

    /// Reject any NaN or infinite weight.
    pub fn check_finite(&self) -> Result<(), WeightFileError> {
        for section in self.sections() {
            if section.values.iter().any(|v| !v.is_finite()) {
                return Err(WeightFileError::NonFinite {
                    name: section.name,
                    layer: section.layer,
                });
            }
        }
        Ok(())
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let d = self.dims;
        writeln!(out, "{MAGIC}")?;
        writeln!(out, "version {FORMAT_VERSION}")?;
        writeln!(out, "n_s {}", d.n_devices)?;
        writeln!(out, "n_p {}", d.n_slots)?;
        writeln!(out, "m {}", d.n_antennas)?;
        writeln!(out, "l {}", d.iterations)?;
        for section in self.sections() {
            writeln!(
                out,
                "{} {} {}",
                section.name,
                section.layer,
                section.values.len()
            )?;
            let mut first = true;
            for v in section.values {
                if !first {
                    out.write_all(b" ")?;
                }
                first = false;
                // `{:?}` prints the shortest string that parses back to the same bits.
                write!(out, "{v:?}")?;
            }
            writeln!(out)?;
        }
        out.flush()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = std::fs::File::create(path).map_err(io_err)?;
        self.write_to(BufWriter::new(file)).map_err(io_err)
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self> {
        let mut lines = BufReader::new(input)
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l));
        let mut next_line = || -> Result<Option<(usize, String)>> {
            match lines.next() {
                None => Ok(None),
                Some((n, line)) => Ok(Some((n, line?))),
            }
        };

        match next_line()? {
            Some((_, line)) if line.trim() == MAGIC => {}
            Some((n, _)) => {
                return Err(WeightFileError::Syntax {
                    line: n,
                    message: format!("expected `{MAGIC}`"),
                }
                .into())
            }
            None => return Err(WeightFileError::MissingHeader("fsra-weights").into()),
        }

        let mut header = |key: &'static str| -> Result<usize> {
            let (n, line) = next_line()?.ok_or(WeightFileError::MissingHeader(key))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(WeightFileError::MissingHeader(key).into());
            }
            parts.next().and_then(|v| v.parse().ok()).ok_or_else(|| {
                WeightFileError::Syntax {
                    line: n,
                    message: format!("`{key}` needs a non-negative integer"),
                }
                .into()
            })
        };
        let version = header("version")?;
        if version != FORMAT_VERSION as usize {
            return Err(WeightFileError::VersionMismatch {
                found: version as u32,
                expected: FORMAT_VERSION,
            }
            .into());
        }
        let dims = WeightDims {
            n_devices: header("n_s")?,
            n_slots: header("n_p")?,
            n_antennas: header("m")?,
            iterations: header("l")?,
        };
        if dims.n_devices == 0 || dims.n_slots == 0 || dims.n_antennas == 0 || dims.iterations == 0
        {
            return Err(WeightFileError::Dimensions {
                file: dims.to_string(),
                expected: "positive dimensions".into(),
            }
            .into());
        }

        let mut set = WeightSet::unit(dims);
        for section in set.sections_mut() {
            let missing = || WeightFileError::MissingSection {
                name: section.name,
                layer: section.layer.clone(),
            };
            let (n, head) = next_line()?.ok_or_else(missing)?;
            let mut parts = head.split_whitespace();
            let (name, layer, count) = (parts.next(), parts.next(), parts.next());
            if name != Some(section.name) || layer != Some(section.layer.as_str()) {
                return Err(WeightFileError::UnexpectedSection {
                    found: head.trim().to_string(),
                    expected: section.name,
                    layer: section.layer.clone(),
                }
                .into());
            }
            let count: usize =
                count
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| WeightFileError::Syntax {
                        line: n,
                        message: "section header needs a value count".into(),
                    })?;
            let expected = section.values.len();
            if count != expected {
                return Err(WeightFileError::SectionLength {
                    name: section.name,
                    layer: section.layer.clone(),
                    expected,
                    actual: count,
                }
                .into());
            }
            let body = match next_line()? {
                Some((_, body)) => body,
                None if expected == 0 => String::new(),
                None => return Err(missing().into()),
            };
            let mut values = Vec::with_capacity(expected);
            for token in body.split_whitespace() {
                let v: f64 = token.parse().map_err(|_| WeightFileError::Syntax {
                    line: n + 1,
                    message: format!("`{token}` is not a number"),
                })?;
                if !v.is_finite() {
                    return Err(WeightFileError::NonFinite {
                        name: section.name,
                        layer: section.layer.clone(),
                    }
                    .into());
                }
                values.push(v);
            }
            if values.len() != expected {
                return Err(WeightFileError::SectionLength {
                    name: section.name,
                    layer: section.layer.clone(),
                    expected,
                    actual: values.len(),
                }
                .into());
            }
            *section.values = values;
        }
        Ok(set)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::read_from(file)
    }

    /// Load and require the given dimensions.
    pub fn load_for(path: impl AsRef<Path>, dims: WeightDims) -> Result<Self> {
        let set = Self::load(path)?;
        set.ensure_dims(dims)?;
        Ok(set)
    }

    pub fn ensure_dims(&self, dims: WeightDims) -> Result<(), WeightFileError> {
        if self.dims != dims {
            return Err(WeightFileError::Dimensions {
                file: self.dims.to_string(),
                expected: dims.to_string(),
            });
        }
        Ok(())
    }
}
