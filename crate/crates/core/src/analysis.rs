//! Line crossings of simple random walks and the lower-bound constant.
//!
//! For bits `y`, the walk is `S_j = 2 sum_{i <= j} y_i - j` and every `j` with
//! `S_j = 0` (including `j = 0`) is a line crossing. FTL's binary regret is
//! half the number of crossings of `y^{n-1}`.
//!
//! `p_{n,k}` is the probability that a fair walk of even length `n` has
//! exactly `k + 1` crossings, i.e. `k` returns to zero after the origin:
//! `p_{n,k} = 2^{-(n-k)} C(n - k, n/2)`.

use std::f64::consts::{FRAC_1_PI, PI};

use rand::Rng;

use crate::error::{Error, Result};
use crate::numeric::{binomial_u128, half_binomial_pmf, KahanSum};
use crate::par::{self, Exec};
use crate::policies::{cover_action, rademacher_fn, Cover, Ftl};
use crate::protocol::{run_policy, LossMatrix};
use crate::sequences::{derive_seed, rng};
use crate::smart::ftl_trace;

/// Number of `j in 0..=len` with `S_j = 0`.
pub fn line_crossings(bits: &[bool]) -> usize {
    let mut walk: i64 = 0;
    let mut count = 1;
    for &b in bits {
        walk += if b { 1 } else { -1 };
        count += usize::from(walk == 0);
    }
    count
}

fn require_even(n: usize) -> Result<()> {
    if !n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "walk length must be even, got {n}"
        )));
    }
    Ok(())
}

/// `p_{n,k} = P[c(eps^n) = k + 1]` for even `n`; zero for `k > n/2`.
pub fn pnk_exact(n: usize, k: usize) -> Result<f64> {
    require_even(n)?;
    if 2 * k > n {
        return Ok(0.0);
    }
    let len = (n - k) as u64;
    let half = (n / 2) as u64;
    if len <= 64 {
        let c = binomial_u128(len, half).expect("fits in u128");
        return Ok(c as f64 / 2f64.powi(len as i32));
    }
    Ok(half_binomial_pmf(len, half))
}

/// The full law of `c(eps^n) - 1` for one even `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossingDistribution {
    n: usize,
    probs: Vec<f64>,
}

impl CrossingDistribution {
    pub fn new(n: usize) -> Result<Self> {
        require_even(n)?;
        let probs = (0..=n / 2)
            .map(|k| pnk_exact(n, k))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, probs })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `p_{n,k}`; zero beyond `n/2`.
    pub fn p(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    /// `p_{n,0..=n/2}`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().copied().collect::<KahanSum>().value()
    }
}

/// Observed range of `p_{n,k} / (sqrt(2 / n pi) e^{-k^2 / 2n})` over
/// `k <= C sqrt(n)`, with the admissible bracket.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketReport {
    pub n: usize,
    pub c: f64,
    pub lower: f64,
    pub upper: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

impl BracketReport {
    pub fn holds(&self) -> bool {
        self.lower <= self.min_ratio && self.max_ratio <= self.upper
    }
}

/// Check the Gaussian approximation of `p_{n,k}` against its bracket
/// `e^{-16C^3/sqrt n} <= ratio <= sqrt((1 - C/sqrt n)/(1 - 2C/sqrt n)) e^{16C^3/sqrt n}`.
pub fn pnk_bound_check(n: usize, c: f64) -> Result<BracketReport> {
    require_even(n)?;
    if !(c > 0.0) || (n as f64) < 32.0 * c * c {
        return Err(Error::InvalidParameter(format!(
            "need C > 0 and n >= 32 C^2, got n={n}, C={c}"
        )));
    }
    let nf = n as f64;
    let root = nf.sqrt();
    let slack = (16.0 * c.powi(3) / root).exp();
    let lower = 1.0 / slack;
    let upper = ((1.0 - c / root) / (1.0 - 2.0 * c / root)).sqrt() * slack;
    let scale = (2.0 / (nf * PI)).sqrt();
    let kmax = (c * root).floor() as usize;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = f64::NEG_INFINITY;
    for k in 0..=kmax {
        let kf = k as f64;
        let ratio = pnk_exact(n, k)? / (scale * (-kf * kf / (2.0 * nf)).exp());
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
    }
    Ok(BracketReport {
        n,
        c,
        lower,
        upper,
        min_ratio,
        max_ratio,
    })
}

/// `2 f_{n+1} / E[min{c(eps^n), 2 f_{n+1}}]` for even `n`.
///
/// Terms with `k + 1 >= 2 f_{n+1}` are saturated, so their mass enters as one
/// minus the unsaturated CDF.
pub fn finite_n_ratio(n: usize) -> Result<f64> {
    require_even(n)?;
    if n == 0 {
        return Err(Error::InvalidParameter(
            "walk length must be positive".into(),
        ));
    }
    let cap = 2.0 * rademacher_fn(n + 1);
    let mut head = KahanSum::new();
    let mut mass = KahanSum::new();
    let mut k = 0;
    while 2 * k <= n && ((k + 1) as f64) < cap {
        let p = pnk_exact(n, k)?;
        head.add((k + 1) as f64 * p);
        mass.add(p);
        k += 1;
    }
    let tail = (1.0 - mass.value()).max(0.0);
    Ok(cap / (head.value() + cap * tail))
}

/// `Q(x) = P[N(0,1) > x]`.
pub fn gaussian_q(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LowerBoundReport {
    /// `1 / (1 - e^{-1/pi} + 2 Q(sqrt(2/pi)))`.
    pub gamma_inf: f64,
    pub exp_term: f64,
    pub q_term: f64,
    /// `(n, finite_n_ratio(n))`.
    pub ratios: Vec<(usize, f64)>,
}

/// Horizons reported by [`lower_bound_constant`].
pub const DEFAULT_RATIO_HORIZONS: [usize; 6] = [2, 10, 100, 1_000, 10_000, 100_000];

pub fn lower_bound_constant() -> LowerBoundReport {
    lower_bound_report(&DEFAULT_RATIO_HORIZONS).expect("default horizons are even")
}

pub fn lower_bound_report(horizons: &[usize]) -> Result<LowerBoundReport> {
    let exp_term = (-FRAC_1_PI).exp();
    let q_term = gaussian_q((2.0 * FRAC_1_PI).sqrt());
    let ratios = horizons
        .iter()
        .map(|&n| Ok((n, finite_n_ratio(n)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(LowerBoundReport {
        gamma_inf: 1.0 / (1.0 - exp_term + 2.0 * q_term),
        exp_term,
        q_term,
        ratios,
    })
}

/// `|Reg(FTL) - Sigma_n|` from a direct FTL run and the regret trace.
pub fn verify_ftl_identity(losses: &LossMatrix) -> Result<f64> {
    let direct = run_policy(&mut Ftl::new(losses.experts()), losses)?.regret;
    Ok((direct - ftl_trace(losses).current()).abs())
}

/// Worst deviations of Cover's predictor over all `2^n` sequences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AchievabilityReport {
    pub n: usize,
    /// `max |loss - (min{sum y, n - sum y} + f_n)|`.
    pub balance_error: f64,
    /// `max |phi_t(y^{t-1} 0) - phi_t(y^{t-1} 1)|`.
    pub stability_gap: f64,
}

/// Largest horizon [`cover_achievability`] enumerates.
pub const ACHIEVABILITY_MAX_N: usize = 20;

/// Enumerate every sequence of length `n`, running Cover on each and
/// rebuilding `phi_t` by averaging over the next bit.
pub fn cover_achievability(n: usize) -> Result<AchievabilityReport> {
    if n == 0 || n > ACHIEVABILITY_MAX_N {
        return Err(Error::InvalidParameter(format!(
            "enumeration horizon must be in 1..={ACHIEVABILITY_MAX_N}, got {n}"
        )));
    }
    let f_n = rademacher_fn(n);
    // Level t holds phi_t for every prefix; bit i of the index is y_{i+1}.
    let mut phi: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    phi[n] = (0u32..1 << n)
        .map(|mask| {
            let ones = mask.count_ones() as usize;
            ones.min(n - ones) as f64 + f_n
        })
        .collect();
    for t in (0..n).rev() {
        let next = &phi[t + 1];
        phi[t] = (0usize..1 << t)
            .map(|mask| (next[mask] + next[mask | 1 << t]) / 2.0)
            .collect();
    }
    let mut stability_gap: f64 = 0.0;
    for t in 0..n {
        for prefix in 0usize..1 << t {
            let gap = phi[t + 1][prefix] - phi[t + 1][prefix | 1 << t];
            stability_gap = stability_gap.max(gap.abs());
        }
    }
    let mut balance_error: f64 = 0.0;
    for mask in 0u32..1 << n {
        let mut cover = Cover::new(n)?;
        let mut loss = 0.0;
        for t in 0..n {
            let bit = mask >> t & 1 == 1;
            let a = cover_action(&cover)?;
            loss += if bit { 1.0 - a } else { a };
            cover.observe_bit(bit)?;
        }
        balance_error = balance_error.max((loss - phi[n][mask as usize]).abs());
    }
    Ok(AchievabilityReport {
        n,
        balance_error,
        stability_gap,
    })
}

/// Histogram of `c(eps^n) - 1` over `samples` fair walks of length `n`.
///
/// Samples are drawn in fixed-size blocks with per-block seeds, so the result
/// is identical for every `exec`.
pub fn sample_crossing_histogram(n: usize, samples: usize, seed: u64, exec: Exec) -> Vec<u64> {
    const BLOCK: usize = 4096;
    let blocks = samples.div_ceil(BLOCK);
    let partial = par::map_indexed(exec, blocks, |b| {
        let mut rng = rng(derive_seed(seed, b as u64));
        let mut hist = vec![0u64; n / 2 + 1];
        let count = BLOCK.min(samples - b * BLOCK);
        let mut bits = vec![false; n];
        for _ in 0..count {
            for bit in bits.iter_mut() {
                *bit = rng.random::<bool>();
            }
            // Crossings of eps^n exclude the origin via the offset.
            hist[line_crossings(&bits) - 1] += 1;
        }
        hist
    });
    let mut hist = vec![0u64; n / 2 + 1];
    for h in partial {
        for (acc, x) in hist.iter_mut().zip(h) {
            *acc += x;
        }
    }
    hist
}
