//! Switching via monotone adapted regret traces.
//!
//! SMART plays follow-the-leader while FTL's anytime regret `Sigma_t` stays at
//! or below a threshold `theta`, then switches once to a worst-case policy
//! that starts fresh on the remaining rounds. `Sigma_t` is the running sum of
//! `L_t(a^FTL_t) - min_j L_{t,j}`, which equals FTL's regret on the prefix
//! `l^t`; it only depends on rounds seen so far and never decreases.
//!
//! With `theta = g(n)` the regret is at most `2 min{Reg(FTL), g(n)} + 1`. A
//! threshold drawn as `g(n) ln(1 + (e - 1) U)` with `U ~ Uniform[0, 1]`
//! improves the factor to `e / (e - 1)` in expectation, exactly as in
//! randomized ski rental.

use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::{E, PI};
use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::policies::{ftl_action, rademacher_fn, Cover, Hedge, HedgeConfig};
use crate::protocol::{checked_action, dot, CumulativeLoss, LossMatrix, Policy, RunRecord};
use crate::sequences::{derive_seed, rng};

/// FTL's anytime regret `Sigma_0 = 0, Sigma_1, ..., Sigma_t`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RegretTrace {
    values: Vec<f64>,
}

impl RegretTrace {
    pub fn new() -> Self {
        Self { values: vec![0.0] }
    }

    /// `Sigma_t` for the last observed round.
    pub fn current(&self) -> f64 {
        *self.values.last().expect("trace starts at Sigma_0")
    }

    /// Rounds folded into the trace.
    pub fn rounds(&self) -> usize {
        self.values.len() - 1
    }

    /// `Sigma_0..=Sigma_t`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum of increments over rounds `from..=to` (one-based).
    pub fn segment(&self, from: usize, to: usize) -> f64 {
        if to < from {
            return 0.0;
        }
        self.values[to] - self.values[from - 1]
    }
}

/// `sum_j ftl_j (L_{t,j} - min L_t)`, a sum of nonnegative terms.
///
/// `cum` must already include round `t`; `ftl` is the leader action that was
/// (or would have been) played in round `t`.
pub fn trace_increment(cum: &CumulativeLoss, ftl: &[f64]) -> f64 {
    let min = cum.min();
    ftl.iter()
        .zip(cum.totals())
        .map(|(w, l)| w * (l - min))
        .sum()
}

/// Fold one round into the trace and return the new `Sigma_t`.
pub fn trace_update(trace: &mut RegretTrace, cum: &CumulativeLoss, ftl: &[f64]) -> f64 {
    let next = trace.current() + trace_increment(cum, ftl);
    trace.values.push(next);
    next
}

/// FTL's anytime regret over every prefix of `losses`.
pub fn ftl_trace(losses: &LossMatrix) -> RegretTrace {
    let mut cum = CumulativeLoss::new(losses.experts());
    let mut trace = RegretTrace::new();
    for row in losses.rows() {
        let leader = ftl_action(&cum);
        cum.observe(row);
        trace_update(&mut trace, &cum, leader.weights());
    }
    trace
}

/// `g_n ln(1 + (e - 1) u)`: inverse CDF of `F(x) = (e^{x/g_n} - 1) / (e - 1)`.
pub fn sample_threshold(g_n: f64, u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::InvalidParameter(format!(
            "uniform draw must be in [0, 1], got {u}"
        )));
    }
    if !(g_n >= 0.0) || !g_n.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "worst-case bound must be finite and nonnegative, got {g_n}"
        )));
    }
    Ok((g_n * ((E - 1.0) * u).ln_1p()).min(g_n))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThresholdMode {
    Deterministic,
    Randomized,
}

/// The worst-case regret bound `g` of the fallback policy, as a function of
/// horizon.
#[derive(Clone)]
pub enum WorstCaseBound {
    /// Cover's exact minimax regret `f_n`.
    CoverExact,
    /// `sqrt(n / 2 pi)`, the asymptotic form of `f_n`.
    CoverAsymptotic,
    Custom(Arc<dyn Fn(usize) -> f64 + Send + Sync>),
}

impl WorstCaseBound {
    pub fn eval(&self, horizon: usize) -> f64 {
        match self {
            Self::CoverExact => rademacher_fn(horizon),
            Self::CoverAsymptotic => (horizon as f64 / (2.0 * PI)).sqrt(),
            Self::Custom(g) => g(horizon),
        }
    }
}

impl fmt::Debug for WorstCaseBound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::CoverExact => f.write_str("CoverExact"),
            Self::CoverAsymptotic => f.write_str("CoverAsymptotic"),
            Self::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Builds the fallback policy from `(remaining horizon, experts)`.
pub type PolicyFactory = Arc<dyn Fn(usize, usize) -> Result<Box<dyn Policy + Send>> + Send + Sync>;

pub fn cover_factory() -> PolicyFactory {
    Arc::new(|horizon, experts| {
        if experts != 2 {
            return Err(Error::InvalidParameter(format!(
                "Cover needs two experts, got {experts}"
            )));
        }
        Ok(Box::new(Cover::new(horizon)?) as Box<dyn Policy + Send>)
    })
}

pub fn hedge_factory(config: HedgeConfig) -> PolicyFactory {
    Arc::new(move |_, experts| Ok(Box::new(Hedge::new(experts, config)?) as Box<dyn Policy + Send>))
}

#[derive(Clone)]
pub struct SmartConfig {
    pub mode: ThresholdMode,
    pub bound: WorstCaseBound,
    pub worst_case: PolicyFactory,
    pub seed: u64,
}

impl SmartConfig {
    /// Cover as the fallback with the given bound form.
    pub fn cover(mode: ThresholdMode, bound: WorstCaseBound) -> Self {
        Self {
            mode,
            bound,
            worst_case: cover_factory(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    /// The switching threshold for horizon `n` under this configuration.
    pub fn threshold(&self, n: usize) -> Result<f64> {
        self.threshold_for(self.bound.eval(n))
    }

    /// The switching threshold given a precomputed `g(n)`.
    pub fn threshold_for(&self, g_n: f64) -> Result<f64> {
        match self.mode {
            ThresholdMode::Deterministic => sample_threshold(g_n, 1.0).map(|_| g_n),
            ThresholdMode::Randomized => {
                let u: f64 = rng(self.seed).random();
                sample_threshold(g_n, u)
            }
        }
    }
}

impl fmt::Debug for SmartConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmartConfig")
            .field("mode", &self.mode)
            .field("bound", &self.bound)
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

/// Run SMART on `losses`; the threshold is drawn from `cfg`.
pub fn smart_run(losses: &LossMatrix, cfg: &SmartConfig) -> Result<SmartRun> {
    let theta = cfg.threshold(losses.rounds())?;
    smart_run_with_threshold(losses, &cfg.worst_case, theta)
}

/// A SMART run with its regret trace.
#[derive(Debug, Clone)]
pub struct SmartRun {
    pub record: RunRecord,
    pub trace: RegretTrace,
}

/// Run SMART with an explicit threshold `theta`.
pub fn smart_run_with_threshold(
    losses: &LossMatrix,
    worst_case: &PolicyFactory,
    theta: f64,
) -> Result<SmartRun> {
    let n = losses.rounds();
    let m = losses.experts();
    let mut record = RunRecord::new(n);
    record.threshold = Some(theta);
    let mut cum = CumulativeLoss::new(m);
    let mut trace = RegretTrace::new();
    let mut fallback: Option<Box<dyn Policy + Send>> = None;

    for (t, row) in losses.rows().enumerate() {
        let leader = ftl_action(&cum);
        if fallback.is_none() && trace.current() > theta {
            // Rounds 1..=t were FTL; the fallback sees only t+1..=n.
            record.switch_times.push(t);
            fallback = Some((worst_case)(n - t, m)?);
        }
        let action = match fallback.as_mut() {
            Some(policy) => checked_action(policy, t + 1)?,
            None => leader.clone(),
        };
        let loss = dot(action.weights(), row);
        if let Some(policy) = fallback.as_mut() {
            policy.observe(row)?;
        }
        cum.observe(row);
        trace_update(&mut trace, &cum, leader.weights());
        record.push(action, loss);
    }
    record.finish(losses);
    Ok(SmartRun { record, trace })
}

/// Outcome of one randomized-threshold draw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrawOutcome {
    pub seed: u64,
    pub threshold: f64,
    pub regret: f64,
    /// Last FTL round, or `n` if the draw never switched.
    pub switch_time: usize,
}

/// Evaluates SMART on fixed losses for many thresholds.
///
/// A run depends on `theta` only through its switch time, so each distinct
/// switch time costs one fallback run. Round losses are summed in round order,
/// which makes every regret bitwise equal to [`smart_run_with_threshold`].
pub struct SwitchEvaluator<'a> {
    losses: &'a LossMatrix,
    worst_case: PolicyFactory,
    trace: RegretTrace,
    ftl_losses: Vec<f64>,
    best: f64,
}

impl<'a> SwitchEvaluator<'a> {
    pub fn new(losses: &'a LossMatrix, worst_case: PolicyFactory) -> Self {
        let mut cum = CumulativeLoss::new(losses.experts());
        let mut trace = RegretTrace::new();
        let mut ftl_losses = Vec::with_capacity(losses.rounds());
        for row in losses.rows() {
            let leader = ftl_action(&cum);
            ftl_losses.push(dot(leader.weights(), row));
            cum.observe(row);
            trace_update(&mut trace, &cum, leader.weights());
        }
        Self {
            losses,
            worst_case,
            trace,
            ftl_losses,
            best: losses.best_expert_loss(),
        }
    }

    pub fn trace(&self) -> &RegretTrace {
        &self.trace
    }

    /// Last FTL round for `theta`: the first `t < n` with `Sigma_t > theta`,
    /// or `n` if there is none.
    pub fn switch_time(&self, theta: f64) -> usize {
        let n = self.losses.rounds();
        self.trace.values()[..n].partition_point(|&v| v <= theta)
    }

    /// Regret of the run whose last FTL round is `t_sw`.
    pub fn regret_at(&self, t_sw: usize) -> Result<f64> {
        let n = self.losses.rounds();
        let mut total = 0.0;
        for &loss in &self.ftl_losses[..t_sw] {
            total += loss;
        }
        if t_sw < n {
            let mut policy = (self.worst_case)(n - t_sw, self.losses.experts())?;
            for (i, row) in self.losses.rows().enumerate().skip(t_sw) {
                let action = checked_action(&mut policy, i + 1)?;
                total += dot(action.weights(), row);
                policy.observe(row)?;
            }
        }
        Ok(total - self.best)
    }
}

/// `draws` independent randomized-threshold runs; draw `i` uses
/// `derive_seed(cfg.seed, i)`.
pub fn randomized_draws(
    losses: &LossMatrix,
    cfg: &SmartConfig,
    draws: usize,
    exec: Exec,
) -> Result<Vec<DrawOutcome>> {
    let cfg = SmartConfig {
        mode: ThresholdMode::Randomized,
        ..cfg.clone()
    };
    let eval = SwitchEvaluator::new(losses, cfg.worst_case.clone());
    let g_n = cfg.bound.eval(losses.rounds());
    let mut draws_out = Vec::with_capacity(draws);
    for i in 0..draws {
        let seed = derive_seed(cfg.seed, i as u64);
        let threshold = cfg.clone().with_seed(seed).threshold_for(g_n)?;
        draws_out.push((seed, threshold, eval.switch_time(threshold)));
    }
    let distinct: Vec<usize> = draws_out
        .iter()
        .map(|d| d.2)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let regrets = par::map(exec, &distinct, |&t| eval.regret_at(t))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let regret_of: BTreeMap<usize, f64> = distinct.into_iter().zip(regrets).collect();
    Ok(draws_out
        .into_iter()
        .map(|(seed, threshold, switch_time)| DrawOutcome {
            seed,
            threshold,
            regret: regret_of[&switch_time],
            switch_time,
        })
        .collect())
}
