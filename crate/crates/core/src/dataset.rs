//! Labelled samples mapping substation ripple magnitudes to fault position.

use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::circuit::{solve_network, NetworkScenario};
use crate::{format_f64, Error, Result};

pub const N_FEATURES: usize = 4;
/// Features plus target.
pub const N_COLUMNS: usize = N_FEATURES + 1;
pub const CSV_HEADER: &str = "vp_mag,vn_mag,ip_mag,in_mag,lf_km";
pub const NORM_PREFIX: &str = "#norm ";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    /// `|v_p|, |v_n|, |i_p|, |i_n|`
    pub features: [f64; N_FEATURES],
    /// Fault position in km.
    pub target: f64,
}

impl Sample {
    fn column(&self, c: usize) -> f64 {
        if c < N_FEATURES {
            self.features[c]
        } else {
            self.target
        }
    }

    fn column_mut(&mut self, c: usize) -> &mut f64 {
        if c < N_FEATURES {
            &mut self.features[c]
        } else {
            &mut self.target
        }
    }
}

/// Per-column `(min, max)` of the physical values, target last.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormParams {
    pub ranges: [(f64, f64); N_COLUMNS],
}

impl NormParams {
    pub fn fit(samples: &[Sample]) -> Self {
        let mut ranges = [(f64::INFINITY, f64::NEG_INFINITY); N_COLUMNS];
        for s in samples {
            for (c, r) in ranges.iter_mut().enumerate() {
                let v = s.column(c);
                r.0 = r.0.min(v);
                r.1 = r.1.max(v);
            }
        }
        Self { ranges }
    }

    pub fn check_nondegenerate(&self) -> Result<()> {
        match self.ranges.iter().position(|(lo, hi)| !(hi > lo)) {
            Some(c) => Err(Error::ConstantColumn(c)),
            None => Ok(()),
        }
    }

    pub fn to_unit(&self, column: usize, v: f64) -> f64 {
        let (lo, hi) = self.ranges[column];
        2.0 * (v - lo) / (hi - lo) - 1.0
    }

    pub fn from_unit(&self, column: usize, u: f64) -> f64 {
        let (lo, hi) = self.ranges[column];
        lo + (u + 1.0) * 0.5 * (hi - lo)
    }

    pub fn denormalize_target(&self, y_norm: f64) -> f64 {
        self.from_unit(N_FEATURES, y_norm)
    }

    /// `#norm min0 max0 ... min4 max4`
    pub fn to_line(&self) -> String {
        let mut line = String::from(NORM_PREFIX.trim_end());
        for (lo, hi) in &self.ranges {
            line.push(' ');
            line.push_str(&format_f64(*lo));
            line.push(' ');
            line.push_str(&format_f64(*hi));
        }
        line
    }

    pub fn parse_line(line: &str, line_no: usize) -> Result<Self> {
        let err = |msg: String| Error::Parse { line: line_no, msg };
        let rest = line
            .strip_prefix(NORM_PREFIX)
            .ok_or_else(|| err(format!("expected a line starting with '{NORM_PREFIX}'")))?;
        let values = rest
            .split(' ')
            .map(|t| t.parse::<f64>().map_err(|e| err(format!("bad number '{t}': {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != 2 * N_COLUMNS {
            return Err(err(format!("expected {} values, found {}", 2 * N_COLUMNS, values.len())));
        }
        let mut ranges = [(0.0, 0.0); N_COLUMNS];
        for (c, r) in ranges.iter_mut().enumerate() {
            *r = (values[2 * c], values[2 * c + 1]);
            if !(r.0 <= r.1) {
                return Err(err(format!("column {c}: min {} exceeds max {}", r.0, r.1)));
            }
        }
        Ok(Self { ranges })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub norm: NormParams,
    /// Whether `samples` hold values mapped to [−1, 1] by `norm`.
    pub normalized: bool,
    pub seed: u64,
}

impl Dataset {
    /// Wraps raw physical samples, fitting the normalization ranges.
    pub fn from_samples(samples: Vec<Sample>, seed: u64) -> Self {
        Self {
            norm: NormParams::fit(&samples),
            samples,
            normalized: false,
            seed,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn targets(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.target).collect()
    }

    fn raw_samples(&self) -> Vec<Sample> {
        if !self.normalized {
            return self.samples.clone();
        }
        self.samples
            .iter()
            .map(|s| {
                let mut raw = *s;
                for c in 0..N_COLUMNS {
                    *raw.column_mut(c) = self.norm.from_unit(c, s.column(c));
                }
                raw
            })
            .collect()
    }

    /// Writes physical values; a normalized dataset is mapped back first.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        writeln!(out, "{}", self.norm.to_line())?;
        for s in self.raw_samples() {
            let row: Vec<String> = (0..N_COLUMNS).map(|c| format_f64(s.column(c))).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads a file written by [`Dataset::write_csv`]. The samples come back
    /// raw, with the stored normalization ranges.
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| -> Result<(usize, String)> {
            match lines.next() {
                Some((n, l)) => Ok((n, l?)),
                None => Err(Error::Parse { line: 0, msg: format!("missing {what}") }),
            }
        };
        let (n, header) = next("header")?;
        if header.trim_end() != CSV_HEADER {
            return Err(Error::Parse { line: n, msg: format!("expected header '{CSV_HEADER}'") });
        }
        let (n, norm_line) = next("normalization line")?;
        let norm = NormParams::parse_line(norm_line.trim_end(), n)?;
        let mut samples = Vec::new();
        for (n, line) in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let values = line
                .trim_end()
                .split(',')
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|e| Error::Parse { line: n, msg: format!("bad number '{t}': {e}") })
                })
                .collect::<Result<Vec<_>>>()?;
            if values.len() != N_COLUMNS {
                return Err(Error::Parse {
                    line: n,
                    msg: format!("expected {N_COLUMNS} columns, found {}", values.len()),
                });
            }
            samples.push(Sample {
                features: [values[0], values[1], values[2], values[3]],
                target: values[4],
            });
        }
        Ok(Self { samples, norm, normalized: false, seed: 0 })
    }
}

/// Sweeps the fault over `n_points` interior grid points of the line,
/// holding everything else in `template` fixed.
pub fn generate(
    template: &NetworkScenario,
    n_points: usize,
    noise_std_rel: f64,
    seed: u64,
) -> Result<Dataset> {
    if n_points < 2 {
        return Err(Error::Config(format!("need at least 2 points, got {n_points}")));
    }
    if !(0.0..1.0).contains(&noise_std_rel) {
        return Err(Error::Config(format!("relative noise {noise_std_rel} outside [0, 1)")));
    }
    let length = template.line_length_km;
    let positions: Vec<f64> = (1..=n_points)
        .map(|k| length * k as f64 / (n_points + 1) as f64)
        .collect();

    let rows = positions
        .par_iter()
        .map(|&x| {
            solve_network(&template.with_fault_at(x))
                .map(|m| Sample { features: m.magnitudes(), target: x })
                .map_err(|e| Error::GenerationFailed { position_km: x, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut samples = rows;
    if noise_std_rel > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for s in &mut samples {
            for f in &mut s.features {
                let z: f64 = StandardNormal.sample(&mut rng);
                *f = (*f * (1.0 + noise_std_rel * z)).abs();
            }
        }
    }
    Ok(Dataset::from_samples(samples, seed))
}

/// Maps every column to [−1, 1] using freshly fitted ranges.
pub fn normalize(d: &Dataset) -> Result<Dataset> {
    let raw = Dataset::from_samples(
        if d.normalized { d.raw_samples() } else { d.samples.clone() },
        d.seed,
    );
    normalize_with(&raw, &raw.norm)
}

/// Maps a raw dataset to [−1, 1] with externally supplied ranges (for
/// example those stored alongside the data or a trained model).
pub fn normalize_with(d: &Dataset, norm: &NormParams) -> Result<Dataset> {
    norm.check_nondegenerate()?;
    let raw = if d.normalized { d.raw_samples() } else { d.samples.clone() };
    let samples = raw
        .iter()
        .map(|s| {
            let mut u = *s;
            for c in 0..N_COLUMNS {
                *u.column_mut(c) = norm.to_unit(c, s.column(c));
            }
            u
        })
        .collect();
    Ok(Dataset { samples, norm: *norm, normalized: true, seed: d.seed })
}

pub fn denormalize_target(d: &Dataset, y_norm: f64) -> f64 {
    d.norm.denormalize_target(y_norm)
}

/// Seeded shuffle, then the first `⌈f·N⌉` rows train and the rest test.
/// Each part keeps the original row order.
pub fn split(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::DegenerateSplit(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    let n = d.len();
    let n_train = (train_fraction * n as f64).ceil() as usize;
    if n_train == 0 || n_train >= n {
        return Err(Error::DegenerateSplit(format!("{n} samples give parts of {n_train} and {}", n - n_train.min(n))));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (mut train_idx, mut test_idx) = (order[..n_train].to_vec(), order[n_train..].to_vec());
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let part = |idx: &[usize]| Dataset {
        samples: idx.iter().map(|&i| d.samples[i]).collect(),
        norm: d.norm,
        normalized: d.normalized,
        seed: d.seed,
    };
    Ok((part(&train_idx), part(&test_idx)))
}
