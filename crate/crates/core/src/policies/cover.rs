//! Cover's minimax predictor for binary sequences.
//!
//! The predictor realizes the loss function
//! `phi(y^n) = min{sum y, n - sum y} + f_n` on every sequence, where `f_n` is
//! the Rademacher complexity `E|Z_1 + ... + Z_n| / 2` for fair signs. With
//! `s` ones seen in the first `t - 1` rounds and `B ~ Binomial(n - t, 1/2)`
//! standing in for the unseen bits,
//!
//! ```text
//! a_t = (1 + E[m(s + B)] - E[m(s + 1 + B)]) / 2,    m(k) = min{k, n - k}.
//! ```
//!
//! `m(k + 1) - m(k)` is `+1` below the midpoint, `-1` at or above it and `0`
//! on the odd-`n` middle step, so both expectations reduce to two binomial
//! tail probabilities. Those come from a shared Pascal-recurrence CDF table
//! for short remaining horizons and a log-space sum otherwise.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::numeric::{binomial_u128, half_binomial_pmf, KahanSum, EXACT_BINOMIAL_MAX_N};
use crate::protocol::Policy;

/// Longest horizon accepted by [`Cover`].
pub const COVER_MAX_HORIZON: usize = 20_000;

/// Rows `r <= CDF_TABLE_MAX` of the Binomial(r, 1/2) CDF are tabulated.
const CDF_TABLE_MAX: usize = 2048;

#[derive(Debug, Clone)]
pub struct Cover {
    horizon: usize,
    ones: usize,
    seen: usize,
}

impl Cover {
    pub fn new(horizon: usize) -> Result<Self> {
        if horizon == 0 || horizon > COVER_MAX_HORIZON {
            return Err(Error::InvalidParameter(format!(
                "Cover horizon must be in 1..={COVER_MAX_HORIZON}, got {horizon}"
            )));
        }
        Ok(Self {
            horizon,
            ones: 0,
            seen: 0,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of bits observed so far.
    pub fn seen(&self) -> usize {
        self.seen
    }

    /// Number of ones observed so far.
    pub fn ones(&self) -> usize {
        self.ones
    }

    pub fn observe_bit(&mut self, bit: bool) -> Result<()> {
        if self.seen >= self.horizon {
            return Err(Error::HorizonExceeded {
                round: self.seen + 1,
                horizon: self.horizon,
            });
        }
        self.seen += 1;
        self.ones += usize::from(bit);
        Ok(())
    }

    /// `phi_t(y^{t-1} 0) - phi_t(y^{t-1} 1)` for the upcoming round `t`.
    pub fn conditional_gap(&self) -> Result<f64> {
        if self.seen >= self.horizon {
            return Err(Error::HorizonExceeded {
                round: self.seen + 1,
                horizon: self.horizon,
            });
        }
        let n = self.horizon as i64;
        let s = self.ones as i64;
        let unseen = self.horizon - self.seen - 1;
        // E[m(s+1+B)] - E[m(s+B)] = P[2(s+B) <= n-2] - P[2(s+B) >= n]
        let rising = half_binomial_cdf(unseen, (n - 2).div_euclid(2) - s);
        let falling = 1.0 - half_binomial_cdf(unseen, (n + 1).div_euclid(2) - s - 1);
        Ok(falling - rising)
    }
}

/// Probability that Cover predicts 1 in the upcoming round.
pub fn cover_action(state: &Cover) -> Result<f64> {
    Ok(((1.0 + state.conditional_gap()?) / 2.0).clamp(0.0, 1.0))
}

impl Policy for Cover {
    fn experts(&self) -> usize {
        2
    }

    fn act(&mut self) -> Result<Vec<f64>> {
        let a = cover_action(self)?;
        Ok(vec![1.0 - a, a])
    }

    fn observe(&mut self, row: &[f64]) -> Result<()> {
        let bit = match row {
            [y, z] if *y == 1.0 && *z == 0.0 => true,
            [y, z] if *y == 0.0 && *z == 1.0 => false,
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "Cover needs binary rows (y, 1 - y), got {row:?}"
                )))
            }
        };
        self.observe_bit(bit)
    }
}

/// `P[B <= j]` for `B ~ Binomial(r, 1/2)`.
pub(crate) fn half_binomial_cdf(r: usize, j: i64) -> f64 {
    if j < 0 {
        return 0.0;
    }
    if j >= r as i64 {
        return 1.0;
    }
    let j = j as usize;
    if r <= CDF_TABLE_MAX {
        return cdf_table().row(r)[j];
    }
    // Sum the shorter tail; the two tails are mirror images.
    if 2 * j < r {
        lower_tail(r, j)
    } else {
        1.0 - lower_tail(r, r - j - 1)
    }
}

fn lower_tail(r: usize, j: usize) -> f64 {
    (0..=j as u64)
        .map(|k| half_binomial_pmf(r as u64, k))
        .collect::<KahanSum>()
        .value()
}

struct CdfTable {
    // Row r occupies offsets[r]..offsets[r] + r + 1.
    values: Vec<f64>,
}

impl CdfTable {
    fn build(max: usize) -> Self {
        let mut values = Vec::with_capacity((max + 1) * (max + 2) / 2);
        values.push(1.0);
        let mut start = 0;
        for r in 1..=max {
            let prev = start;
            start = values.len();
            for j in 0..=r {
                let same = if j < r { values[prev + j] } else { 1.0 };
                let below = if j > 0 { values[prev + j - 1] } else { 0.0 };
                values.push(0.5 * (same + below));
            }
        }
        Self { values }
    }

    fn row(&self, r: usize) -> &[f64] {
        let start = r * (r + 1) / 2;
        &self.values[start..start + r + 1]
    }
}

fn cdf_table() -> &'static CdfTable {
    static TABLE: OnceLock<CdfTable> = OnceLock::new();
    TABLE.get_or_init(|| CdfTable::build(CDF_TABLE_MAX))
}

/// `f_n = E|Z_1 + ... + Z_n| / 2` for i.i.d. fair signs.
///
/// Exact rational arithmetic for small `n`, a compensated log-space
/// binomial sum beyond that.
pub fn rademacher_fn(n: usize) -> f64 {
    let n64 = n as u64;
    if n64 <= EXACT_BINOMIAL_MAX_N {
        let total: u128 = (0..=n64)
            .map(|k| (2 * k).abs_diff(n64) as u128 * binomial_u128(n64, k).expect("within cap"))
            .sum();
        return total as f64 / 2f64.powi(n as i32 + 1);
    }
    let sum: KahanSum = (0..=n64)
        .map(|k| (2 * k).abs_diff(n64) as f64 * half_binomial_pmf(n64, k))
        .collect();
    sum.value() / 2.0
}
