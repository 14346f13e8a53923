//! Input generators and loss-file I/O.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded via
//! `seed_from_u64`, which is specified bit-for-bit and therefore reproduces
//! identical streams on every platform.
//!
//! Loss files are CSV: one round per line, `m` comma-separated decimals in
//! `[0, 1]`, with an optional first line `# m=<int> n=<int>`. Binary
//! sequences are a single line of `0`/`1` characters.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::protocol::LossMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mix `index` into `base` to get an independent child seed (SplitMix64).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinarySequence {
    bits: Vec<bool>,
}

impl BinarySequence {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn from_bits<I: IntoIterator<Item = u8>>(bits: I) -> Result<Self> {
        bits.into_iter()
            .enumerate()
            .map(|(i, b)| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(Error::InvalidParameter(format!(
                    "bit {} is {other}, expected 0 or 1",
                    i + 1
                ))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn mean(&self) -> f64 {
        self.ones() as f64 / self.len() as f64
    }

    /// Loss of the better constant prediction, `min{sum y, n - sum y}`.
    pub fn hindsight_loss(&self) -> usize {
        let ones = self.ones();
        ones.min(self.len() - ones)
    }
}

impl std::str::FromStr for BinarySequence {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.trim()
            .chars()
            .enumerate()
            .map(|(i, c)| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse {
                    line: 1,
                    message: format!("character {} is {other:?}, expected 0 or 1", i + 1),
                }),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl std::fmt::Display for BinarySequence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for &b in &self.bits {
            f.write_char(if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// I.i.d. Bernoulli(`p`) bits.
pub fn gen_bernoulli(n: usize, p: f64, seed: u64) -> Result<BinarySequence> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "Bernoulli parameter must be in [0, 1], got {p}"
        )));
    }
    let mut rng = rng(seed);
    Ok(BinarySequence::new(
        (0..n).map(|_| rng.random::<f64>() < p).collect(),
    ))
}

/// Whether the empirical mean of `seq` lies within four standard errors of `p`.
pub fn within_sampling_band(seq: &BinarySequence, p: f64) -> bool {
    let band = 4.0 * (p * (1.0 - p) / seq.len() as f64).sqrt();
    (seq.mean() - p).abs() <= band
}

/// `c` pairs `(0, 1)` followed by `n - 2c` ones.
pub fn gen_lead_change(n: usize, c: usize) -> Result<BinarySequence> {
    if 2 * c > n {
        return Err(Error::InvalidParameter(format!(
            "lead-change count {c} needs 2c <= n = {n}"
        )));
    }
    let mut bits = Vec::with_capacity(n);
    for _ in 0..c {
        bits.extend([false, true]);
    }
    bits.resize(n, true);
    Ok(BinarySequence::new(bits))
}

/// `1, 0, 1, 0, ...`
pub fn gen_alternating(n: usize) -> BinarySequence {
    BinarySequence::new((0..n).map(|t| t % 2 == 0).collect())
}

/// Uniform `[0, 1]` losses for `n` rounds and `m` experts.
pub fn gen_uniform_losses(n: usize, m: usize, seed: u64) -> Result<LossMatrix> {
    let mut rng = rng(seed);
    LossMatrix::from_flat(n, m, (0..n * m).map(|_| rng.random::<f64>()).collect())
}

/// Embed bits as two experts: row `t` is `(y_t, 1 - y_t)`.
pub fn binary_to_losses(y: &BinarySequence) -> Result<LossMatrix> {
    let entries = y
        .bits()
        .iter()
        .flat_map(|&b| if b { [1.0, 0.0] } else { [0.0, 1.0] })
        .collect();
    LossMatrix::from_flat(y.len(), 2, entries)
}

pub fn format_losses(losses: &LossMatrix) -> String {
    let mut out = format!("# m={} n={}\n", losses.experts(), losses.rounds());
    for row in losses.rows() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

pub fn parse_losses(text: &str) -> Result<LossMatrix> {
    let mut header: Option<(usize, usize, usize)> = None;
    let mut width: Option<usize> = None;
    let mut entries = Vec::new();
    let mut rounds = 0usize;

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            if rounds > 0 || header.is_some() {
                return Err(parse_err(line_no, "header must precede all rows"));
            }
            let (m, n) = parse_header(rest).ok_or_else(|| {
                parse_err(line_no, "expected header of the form '# m=<int> n=<int>'")
            })?;
            header = Some((m, n, line_no));
            continue;
        }
        let row = line
            .split(',')
            .map(|field| {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| parse_err(line_no, &format!("bad number {field:?}: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let expected = *width.get_or_insert(header.map_or(row.len(), |(m, _, _)| m));
        if row.len() != expected {
            return Err(parse_err(
                line_no,
                &format!("expected {expected} entries, found {}", row.len()),
            ));
        }
        if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(parse_err(line_no, &format!("loss {v} outside [0, 1]")));
        }
        entries.extend(row);
        rounds += 1;
    }

    if let Some((_, n, line_no)) = header {
        if n != rounds {
            return Err(parse_err(
                line_no,
                &format!("header declares n={n} but file has {rounds} rows"),
            ));
        }
    }
    LossMatrix::from_flat(rounds, width.unwrap_or(0), entries)
}

fn parse_header(rest: &str) -> Option<(usize, usize)> {
    let mut m = None;
    let mut n = None;
    for token in rest.split_whitespace() {
        let (key, value) = token.split_once('=')?;
        let value = value.parse().ok()?;
        match key {
            "m" => m = Some(value),
            "n" => n = Some(value),
            _ => return None,
        }
    }
    Some((m?, n?))
}

fn parse_err(line: usize, message: &str) -> Error {
    Error::Parse {
        line,
        message: message.to_string(),
    }
}

pub fn save_losses(path: impl AsRef<Path>, losses: &LossMatrix) -> Result<()> {
    fs::write(path, format_losses(losses))?;
    Ok(())
}

pub fn load_losses(path: impl AsRef<Path>) -> Result<LossMatrix> {
    parse_losses(&fs::read_to_string(path)?)
}

pub fn save_bits(path: impl AsRef<Path>, y: &BinarySequence) -> Result<()> {
    fs::write(path, format!("{y}\n"))?;
    Ok(())
}

pub fn load_bits(path: impl AsRef<Path>) -> Result<BinarySequence> {
    fs::read_to_string(path)?.parse()
}
