//! The online learning protocol over the experts simplex.
//!
//! Each round a [`Policy`] commits to a point on the `m`-simplex, then the
//! loss row for that round is revealed. Losses are always accounted as the
//! *expected* loss of the mixed action, so every regret identity in this
//! crate is exact rather than statistical.
//!
//! Binary prediction is the `m = 2` case: row `t` is `(y_t, 1 - y_t)`, with
//! expert 0 meaning "always predict 0" and expert 1 "always predict 1".

use crate::error::{Error, Result};

/// Absolute tolerance on the simplex constraint `sum(w) = 1`.
pub const SIMPLEX_TOLERANCE: f64 = 1e-12;

/// `n` rounds by `m` experts of losses in `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMatrix {
    rounds: usize,
    experts: usize,
    entries: Vec<f64>,
}

impl LossMatrix {
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or(Error::NoRounds)?;
        let experts = first.as_ref().len();
        let mut entries = Vec::with_capacity(rows.len() * experts);
        for (t, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != experts {
                return Err(Error::RowWidth {
                    round: t + 1,
                    expected: experts,
                    found: row.len(),
                });
            }
            entries.extend_from_slice(row);
        }
        Self::from_flat(rows.len(), experts, entries)
    }

    pub fn from_flat(rounds: usize, experts: usize, entries: Vec<f64>) -> Result<Self> {
        if rounds == 0 {
            return Err(Error::NoRounds);
        }
        if experts < 2 {
            return Err(Error::TooFewExperts(experts));
        }
        if entries.len() != rounds * experts {
            return Err(Error::DimensionMismatch {
                expected: rounds * experts,
                found: entries.len(),
            });
        }
        for (i, &value) in entries.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::LossOutOfRange {
                    round: i / experts + 1,
                    expert: i % experts,
                    value,
                });
            }
        }
        Ok(Self {
            rounds,
            experts,
            entries,
        })
    }

    pub fn zeros(rounds: usize, experts: usize) -> Result<Self> {
        Self::from_flat(rounds, experts, vec![0.0; rounds * experts])
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    pub fn experts(&self) -> usize {
        self.experts
    }

    /// Loss row of round `t`, zero-based.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.entries[t * self.experts..(t + 1) * self.experts]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.entries.chunks_exact(self.experts)
    }

    /// Rounds `start..end` (zero-based, half-open) as a new matrix.
    pub fn window(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.rounds {
            return Err(Error::InvalidParameter(format!(
                "window {start}..{end} is empty or exceeds {} rounds",
                self.rounds
            )));
        }
        Ok(Self {
            rounds: end - start,
            experts: self.experts,
            entries: self.entries[start * self.experts..end * self.experts].to_vec(),
        })
    }

    /// Per-expert totals over all rounds, accumulated in round order.
    pub fn totals(&self) -> CumulativeLoss {
        let mut cum = CumulativeLoss::new(self.experts);
        for row in self.rows() {
            cum.observe(row);
        }
        cum
    }

    /// Loss of the best fixed expert in hindsight.
    pub fn best_expert_loss(&self) -> f64 {
        self.totals().hindsight_optimum().1
    }
}

/// A point on the `m`-simplex.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionDistribution {
    weights: Vec<f64>,
}

impl ActionDistribution {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if let Some((j, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(0.0..=1.0).contains(*w))
        {
            return Err(Error::NotSimplex(format!("weight {j} is {w}")));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOLERANCE {
            return Err(Error::NotSimplex(format!("weights sum to {sum}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(experts: usize) -> Self {
        Self {
            weights: vec![1.0 / experts as f64; experts],
        }
    }

    /// Uniform over `support`, which must be non-empty and in range.
    pub fn uniform_over(experts: usize, support: &[usize]) -> Self {
        let mut weights = vec![0.0; experts];
        let w = 1.0 / support.len() as f64;
        for &j in support {
            weights[j] = w;
        }
        Self { weights }
    }

    pub fn point(experts: usize, j: usize) -> Self {
        Self::uniform_over(experts, &[j])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.weights
    }
}

/// `a^T row`: the expected loss of playing `a` against `row`.
pub fn expected_round_loss(a: &ActionDistribution, row: &[f64]) -> Result<f64> {
    if row.len() != a.weights.len() {
        return Err(Error::DimensionMismatch {
            expected: a.weights.len(),
            found: row.len(),
        });
    }
    Ok(dot(&a.weights, row))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Per-expert running totals `L_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativeLoss {
    totals: Vec<f64>,
    round: usize,
}

impl CumulativeLoss {
    pub fn new(experts: usize) -> Self {
        Self {
            totals: vec![0.0; experts],
            round: 0,
        }
    }

    pub fn observe(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.totals.len());
        for (total, &l) in self.totals.iter_mut().zip(row) {
            *total += l;
        }
        self.round += 1;
    }

    pub fn totals(&self) -> &[f64] {
        &self.totals
    }

    /// Number of rounds observed.
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn experts(&self) -> usize {
        self.totals.len()
    }

    /// All experts attaining the minimum total, and that minimum.
    ///
    /// Ties are exact float equality; every caller accumulates in round
    /// order so symmetric inputs tie bit-for-bit.
    pub fn hindsight_optimum(&self) -> (Vec<usize>, f64) {
        let min = self.min();
        let argmin = self
            .totals
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == min)
            .map(|(j, _)| j)
            .collect();
        (argmin, min)
    }

    pub fn min(&self) -> f64 {
        self.totals.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// A stateful online policy: propose weights, then observe the loss row.
pub trait Policy {
    fn experts(&self) -> usize;

    /// Weights for the upcoming round, before its losses are revealed.
    fn act(&mut self) -> Result<Vec<f64>>;

    /// Reveal the loss row of the round just played.
    fn observe(&mut self, row: &[f64]) -> Result<()>;
}

impl<P: Policy + ?Sized> Policy for Box<P> {
    fn experts(&self) -> usize {
        (**self).experts()
    }

    fn act(&mut self) -> Result<Vec<f64>> {
        (**self).act()
    }

    fn observe(&mut self, row: &[f64]) -> Result<()> {
        (**self).observe(row)
    }
}

/// Full per-round accounting of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub actions: Vec<ActionDistribution>,
    pub round_losses: Vec<f64>,
    pub total_loss: f64,
    pub regret: f64,
    /// Last round (one-based) played by the first policy before a switch.
    /// Empty when the run never switched.
    pub switch_times: Vec<usize>,
    /// One-based start rounds of each epoch; empty for non-epoch runs.
    pub epoch_starts: Vec<usize>,
    /// Threshold the run compared its regret trace against, if any.
    pub threshold: Option<f64>,
}

impl RunRecord {
    pub(crate) fn new(rounds: usize) -> Self {
        Self {
            actions: Vec::with_capacity(rounds),
            round_losses: Vec::with_capacity(rounds),
            total_loss: 0.0,
            regret: 0.0,
            switch_times: Vec::new(),
            epoch_starts: Vec::new(),
            threshold: None,
        }
    }

    pub(crate) fn push(&mut self, action: ActionDistribution, loss: f64) {
        self.actions.push(action);
        self.round_losses.push(loss);
    }

    pub(crate) fn finish(&mut self, losses: &LossMatrix) {
        self.total_loss = self.round_losses.iter().sum();
        self.regret = self.total_loss - losses.best_expert_loss();
    }

    /// Switch round, or `n` when the run never switched.
    pub fn switch_time(&self) -> usize {
        self.switch_times
            .first()
            .copied()
            .unwrap_or(self.round_losses.len())
    }
}

/// Drive `policy` through every round of `losses`.
pub fn run_policy<P: Policy + ?Sized>(policy: &mut P, losses: &LossMatrix) -> Result<RunRecord> {
    if policy.experts() != losses.experts() {
        return Err(Error::DimensionMismatch {
            expected: losses.experts(),
            found: policy.experts(),
        });
    }
    let mut record = RunRecord::new(losses.rounds());
    for (t, row) in losses.rows().enumerate() {
        let action = checked_action(policy, t + 1)?;
        let loss = dot(action.weights(), row);
        policy.observe(row)?;
        record.push(action, loss);
    }
    record.finish(losses);
    Ok(record)
}

/// Query `policy` and validate its output as a simplex point for `round`.
pub(crate) fn checked_action<P: Policy + ?Sized>(
    policy: &mut P,
    round: usize,
) -> Result<ActionDistribution> {
    let weights = policy.act()?;
    if weights.len() != policy.experts() {
        return Err(Error::InvalidAction {
            round,
            reason: format!("{} weights for {} experts", weights.len(), policy.experts()),
        });
    }
    ActionDistribution::new(weights).map_err(|e| Error::InvalidAction {
        round,
        reason: e.to_string(),
    })
}
