//! Epoch-doubling SMART against a small-loss bound.
//!
//! Epoch `z` guesses `L*_z = 2^z ln m`. It plays FTL while the epoch's trace
//! `Sigma_{t_z:t-1}` is at most `g(L*_z)`, then a fresh small-loss policy
//! while the loss incurred since `t_z` stays within
//! `L*_z + 2 min{Sigma_{t_z:t}, g(L*_z)} + 1`. Breaking that budget opens
//! epoch `z + 1`. FTL always follows the global cumulative loss.
//!
//! Epoch counts and the summation limits of the explicit bound use `log2`;
//! every other logarithm is natural.

use crate::error::{Error, Result};
use crate::policies::{ftl_action, HedgeConfig, DEFAULT_KAPPA};
use crate::protocol::{
    checked_action, dot, run_policy, CumulativeLoss, LossMatrix, Policy, RunRecord,
};
use crate::smart::{
    ftl_trace, hedge_factory, trace_increment, trace_update, PolicyFactory, RegretTrace,
};

/// `2 sqrt(2 L* ln m) + kappa ln m`.
pub fn small_loss_g(lstar: f64, m: usize, kappa: f64) -> f64 {
    let ln_m = (m as f64).ln();
    2.0 * (2.0 * lstar.max(0.0) * ln_m).sqrt() + kappa * ln_m
}

#[derive(Clone)]
pub struct SmallLossConfig {
    pub kappa: f64,
    pub worst_case: PolicyFactory,
}

impl SmallLossConfig {
    /// Small-loss Hedge as the fallback, with `g` using the same `kappa`.
    pub fn hedge(kappa: f64) -> Self {
        Self {
            kappa,
            worst_case: hedge_factory(HedgeConfig::small_loss(kappa)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0) || !self.kappa.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        Ok(())
    }
}

impl Default for SmallLossConfig {
    fn default() -> Self {
        Self::hedge(DEFAULT_KAPPA)
    }
}

impl std::fmt::Debug for SmallLossConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmallLossConfig")
            .field("kappa", &self.kappa)
            .finish_non_exhaustive()
    }
}

/// One epoch; rounds are one-based and inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    /// Last FTL round `tau_z`, if the epoch switched.
    pub switch: Option<usize>,
    pub guess: f64,
    pub bound: f64,
}

impl Epoch {
    /// Last round played by FTL.
    pub fn last_ftl_round(&self) -> usize {
        self.switch.unwrap_or(self.end)
    }
}

#[derive(Debug, Clone)]
pub struct SmallLossRun {
    pub record: RunRecord,
    pub trace: RegretTrace,
    pub epochs: Vec<Epoch>,
}

impl SmallLossRun {
    /// Index of the final epoch.
    pub fn last_epoch(&self) -> usize {
        self.epochs.len() - 1
    }
}

pub fn small_loss_smart_run(losses: &LossMatrix, cfg: &SmallLossConfig) -> Result<SmallLossRun> {
    cfg.validate()?;
    let n = losses.rounds();
    let m = losses.experts();
    let ln_m = (m as f64).ln();
    let mut record = RunRecord::new(n);
    let mut cum = CumulativeLoss::new(m);
    let mut trace = RegretTrace::new();
    let mut epochs: Vec<Epoch> = Vec::new();

    let mut z = 0usize;
    let mut t = 1usize;
    while t <= n {
        let guess = 2f64.powi(z as i32) * ln_m;
        let g = small_loss_g(guess, m, cfg.kappa);
        let mut epoch = Epoch {
            index: z,
            start: t,
            end: t,
            switch: None,
            guess,
            bound: g,
        };
        record.epoch_starts.push(t);
        let mut sigma = 0.0;
        let mut incurred = 0.0;
        let mut fallback: Option<Box<dyn Policy + Send>> = None;

        while t <= n {
            let leader = ftl_action(&cum);
            if fallback.is_none() && sigma > g {
                epoch.switch = Some(t - 1);
                record.switch_times.push(t - 1);
                fallback = Some((cfg.worst_case)(n - t + 1, m)?);
            }
            if fallback.is_some() && incurred > guess + 2.0 * sigma.min(g) + 1.0 {
                break;
            }
            let row = losses.row(t - 1);
            let action = match fallback.as_mut() {
                Some(policy) => checked_action(policy, t)?,
                None => leader.clone(),
            };
            let loss = dot(action.weights(), row);
            if let Some(policy) = fallback.as_mut() {
                policy.observe(row)?;
            }
            cum.observe(row);
            trace_update(&mut trace, &cum, leader.weights());
            sigma += trace_increment(&cum, leader.weights());
            incurred += loss;
            record.push(action, loss);
            epoch.end = t;
            t += 1;
        }
        epochs.push(epoch);
        z += 1;
    }
    record.finish(losses);
    Ok(SmallLossRun {
        record,
        trace,
        epochs,
    })
}

/// Upper index of the `z` sum in the explicit bound:
/// `floor(log2(1 + L*/ln m)) + 1`.
pub fn epoch_sum_limit(lstar: f64, m: usize) -> usize {
    let ratio = 1.0 + lstar.max(0.0) / (m as f64).ln();
    ratio.log2().floor() as usize + 1
}

/// `sum_{z=0}^{limit} g(2^z ln m)`.
pub fn epoch_g_sum(lstar: f64, m: usize, kappa: f64) -> f64 {
    let ln_m = (m as f64).ln();
    (0..=epoch_sum_limit(lstar, m))
        .map(|z| small_loss_g(2f64.powi(z as i32) * ln_m, m, kappa))
        .sum()
}

/// `2 min{reg_ftl, sum_z g(2^z ln m)} + 2 log2(1 + L*/ln m) + 2`.
pub fn explicit_regret_bound(reg_ftl: f64, lstar: f64, m: usize, kappa: f64) -> f64 {
    let ratio = 1.0 + lstar.max(0.0) / (m as f64).ln();
    2.0 * reg_ftl.min(epoch_g_sum(lstar, m, kappa)) + 2.0 * ratio.log2() + 2.0
}

/// Largest admissible final epoch index: `log2(L*/ln m) + 1` when
/// `L* > ln m`, and `0` otherwise.
pub fn epoch_index_bound(lstar: f64, m: usize) -> f64 {
    let ln_m = (m as f64).ln();
    if lstar > ln_m {
        (lstar / ln_m).log2() + 1.0
    } else {
        0.0
    }
}

/// `2 min{reg_ftl, 10 sqrt(2 L* ln m)} + c max{1, ln L*} ln m`.
pub fn sqrt_lstar_bound(reg_ftl: f64, lstar: f64, m: usize, c: f64) -> f64 {
    let ln_m = (m as f64).ln();
    let root = 10.0 * (2.0 * lstar.max(0.0) * ln_m).sqrt();
    2.0 * reg_ftl.min(root) + c * lstar.ln().max(1.0) * ln_m
}

/// Per-epoch pieces of the alternating-play regret decomposition, each
/// measured by an independent re-run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochTerms {
    /// `Sigma_{t_z : tau_z - 1}`.
    pub ftl_trace: f64,
    /// Regret of a fresh fallback on rounds `tau_z + 1 ..= t_{z+1} - 1`.
    pub fallback_regret: f64,
}

pub fn decomposition_terms(
    losses: &LossMatrix,
    run: &SmallLossRun,
    worst_case: &PolicyFactory,
) -> Result<Vec<EpochTerms>> {
    let trace = ftl_trace(losses);
    run.epochs
        .iter()
        .map(|e| {
            let tau = e.last_ftl_round();
            let fallback_regret = if tau < e.end {
                let window = losses.window(tau, e.end)?;
                let mut policy = worst_case(window.rounds(), losses.experts())?;
                run_policy(&mut policy, &window)?.regret
            } else {
                0.0
            };
            Ok(EpochTerms {
                ftl_trace: trace.segment(e.start, tau - 1),
                fallback_regret,
            })
        })
        .collect()
}

/// Right-hand side of the decomposition: `sum_z (trace + fallback + 1)`.
pub fn decomposition_bound(terms: &[EpochTerms]) -> f64 {
    terms
        .iter()
        .map(|e| e.ftl_trace + e.fallback_regret + 1.0)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::Ftl;
    use crate::sequences::{binary_to_losses, gen_alternating, gen_bernoulli};

    #[test]
    fn g_examples() {
        let ln2 = 2f64.ln();
        assert!((small_loss_g(0.0, 2, 1.0) - ln2).abs() < 1e-15);
        let v = small_loss_g(8.0, 2, 1.0);
        assert!((v - (2.0 * (16.0 * ln2).sqrt() + ln2)).abs() < 1e-12);
        assert!((v - 7.35).abs() < 5e-3);
        let root = |l: f64| small_loss_g(l, 5, 1.0) - 5f64.ln();
        assert!((root(6.0) / root(3.0) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn all_ones_single_epoch() {
        let m = binary_to_losses(&"1".repeat(300).parse().unwrap()).unwrap();
        let run = small_loss_smart_run(&m, &SmallLossConfig::default()).unwrap();
        assert_eq!(run.epochs.len(), 1);
        assert!(run.record.switch_times.is_empty());
        assert_eq!(run.record.regret, 0.5);
        assert_eq!(run.record.epoch_starts, vec![1]);
    }

    #[test]
    fn epochs_tile_the_horizon() {
        let m = binary_to_losses(&gen_alternating(1000)).unwrap();
        let run = small_loss_smart_run(&m, &SmallLossConfig::default()).unwrap();
        assert!(run.epochs.len() > 1);
        let mut next = 1;
        for (z, e) in run.epochs.iter().enumerate() {
            assert_eq!(e.index, z);
            assert_eq!(e.start, next);
            assert!(e.end >= e.start);
            next = e.end + 1;
        }
        assert_eq!(next, 1001);
        for w in run.epochs.windows(2) {
            assert_eq!(w[1].guess, 2.0 * w[0].guess);
            // Only the last epoch may end without having switched.
            assert!(w[0].switch.is_some());
        }
    }

    #[test]
    fn epoch_traces_respect_guard() {
        let m = binary_to_losses(&gen_alternating(600)).unwrap();
        let run = small_loss_smart_run(&m, &SmallLossConfig::default()).unwrap();
        for e in &run.epochs {
            let tau = e.last_ftl_round();
            assert!(run.trace.segment(e.start, tau - 1) <= e.bound + 1e-9);
            if e.switch.is_some() {
                assert!(run.trace.segment(e.start, tau) > e.bound - 1e-9);
            }
        }
    }

    #[test]
    fn trace_matches_plain_ftl_trace() {
        let y = gen_bernoulli(400, 0.3, 5).unwrap();
        let m = binary_to_losses(&y).unwrap();
        let run = small_loss_smart_run(&m, &SmallLossConfig::default()).unwrap();
        assert_eq!(run.trace, ftl_trace(&m));
    }

    #[test]
    fn decomposition_bounds_regret() {
        let cfg = SmallLossConfig::default();
        for seed in 0..5 {
            let y = gen_bernoulli(500, 0.45, seed).unwrap();
            let m = binary_to_losses(&y).unwrap();
            let run = small_loss_smart_run(&m, &cfg).unwrap();
            let terms = decomposition_terms(&m, &run, &cfg.worst_case).unwrap();
            assert!(run.record.regret <= decomposition_bound(&terms) + 1e-9);
        }
    }

    #[test]
    fn sum_limit_examples() {
        let ln2 = 2f64.ln();
        assert_eq!(epoch_sum_limit(0.0, 2), 1);
        assert_eq!(epoch_sum_limit(ln2, 2), 2);
        assert_eq!(epoch_sum_limit(3.0 * ln2, 2), 3);
        assert_eq!(epoch_index_bound(ln2, 2), 0.0);
        assert!((epoch_index_bound(4.0 * ln2, 2) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn no_switch_runs_match_ftl() {
        let m = binary_to_losses(&"0".repeat(50).parse().unwrap()).unwrap();
        let run = small_loss_smart_run(&m, &SmallLossConfig::default()).unwrap();
        let ftl = run_policy(&mut Ftl::new(2), &m).unwrap();
        assert_eq!(run.record.round_losses, ftl.round_losses);
    }
}
