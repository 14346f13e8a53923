//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

mod common;

use std::f64::consts::{E, PI};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use smart_core::analysis::{
    finite_n_ratio, line_crossings, lower_bound_constant, pnk_bound_check, pnk_exact,
    sample_crossing_histogram, verify_ftl_identity, CrossingDistribution,
};
use smart_core::par::{self, Exec};
use smart_core::policies::{cover_action, rademacher_fn, Cover, Ftl, DEFAULT_KAPPA};
use smart_core::sequences::{
    binary_to_losses, gen_alternating, gen_bernoulli, gen_lead_change, gen_uniform_losses, rng,
    BinarySequence,
};
use smart_core::smallloss::{
    epoch_index_bound, explicit_regret_bound, small_loss_smart_run, SmallLossConfig,
};
use smart_core::smart::{
    ftl_trace, randomized_draws, smart_run, smart_run_with_threshold, SmartConfig, ThresholdMode,
    WorstCaseBound,
};
use smart_core::{run_policy, LossMatrix};

use rand::Rng;

type Outcome = Result<String, String>;

fn ftl_regret(losses: &LossMatrix) -> f64 {
    run_policy(&mut Ftl::new(losses.experts()), losses)
        .unwrap()
        .regret
}

/// Bernoulli p-grid x 40 seeds, lead-change c in 1..=100, alternating.
fn bound_corpus() -> Vec<(String, BinarySequence)> {
    let n = common::N;
    let mut out = Vec::new();
    for i in 1..=10 {
        let p = i as f64 * 0.05;
        for seed in 0..40 {
            out.push((
                format!("bernoulli p={p:.2} seed={seed}"),
                gen_bernoulli(n, p, seed).unwrap(),
            ));
        }
    }
    for c in 1..=100 {
        out.push((format!("lead-change c={c}"), gen_lead_change(n, c).unwrap()));
    }
    out.push(("alternating".into(), gen_alternating(n)));
    out
}

fn criterion_1() -> Outcome {
    let corpus = bound_corpus();
    let n = common::N;
    let g = (n as f64 / (2.0 * PI)).sqrt();
    let cfg = SmartConfig::cover(
        ThresholdMode::Deterministic,
        WorstCaseBound::CoverAsymptotic,
    );
    let slacks = par::map(Exec::Parallel, &corpus, |(name, y)| {
        let losses = binary_to_losses(y).unwrap();
        let reg = smart_run(&losses, &cfg).unwrap().record.regret;
        let bound = 2.0 * ftl_regret(&losses).min(g) + 1.0;
        (bound + 1e-9 - reg, name.clone())
    });
    let (slack, name) = slacks
        .into_iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap();
    let msg = format!("{} sequences, min slack {slack:.4} ({name})", corpus.len());
    if slack >= 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_2() -> Outcome {
    let n = common::N;
    let draws = 10_000;
    let mut seqs: Vec<(String, BinarySequence)> = (1..=10)
        .map(|i| {
            let p = i as f64 * 0.05;
            (
                format!("bernoulli p={p:.2}"),
                gen_bernoulli(n, p, 100 + i).unwrap(),
            )
        })
        .collect();
    for c in [1, 5, 10, 15, 20, 30, 45, 60, 80] {
        seqs.push((format!("lead-change c={c}"), gen_lead_change(n, c).unwrap()));
    }
    seqs.push(("alternating".into(), gen_alternating(n)));

    let ratio = E / (E - 1.0);
    let g = rademacher_fn(n);
    let mut worst = (f64::INFINITY, String::new());
    for (i, (name, y)) in seqs.iter().enumerate() {
        let losses = binary_to_losses(y).unwrap();
        let cfg = SmartConfig::cover(ThresholdMode::Randomized, WorstCaseBound::CoverExact)
            .with_seed(7_000 + i as u64);
        let regrets: Vec<f64> = randomized_draws(&losses, &cfg, draws, Exec::Parallel)
            .unwrap()
            .iter()
            .map(|d| d.regret)
            .collect();
        let mean = regrets.iter().sum::<f64>() / draws as f64;
        let var = regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (draws - 1) as f64;
        let sem = (var / draws as f64).sqrt();
        let bound = ratio * ftl_regret(&losses).min(g) + 1.0 + 3.0 * sem;
        if bound - mean < worst.0 {
            worst = (bound - mean, name.clone());
        }
    }
    let msg = format!(
        "{} sequences x {draws} draws, min slack {:.4} ({})",
        seqs.len(),
        worst.0,
        worst.1
    );
    if worst.0 >= 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_3() -> Outcome {
    let n = 500;
    let seqs: Vec<BinarySequence> = (0..1000u64)
        .map(|seed| {
            let p = rng(seed ^ 0x5eed).random::<f64>();
            gen_bernoulli(n, p, seed).unwrap()
        })
        .collect();
    let binary_gap = par::map(Exec::Parallel, &seqs, |y| {
        let losses = binary_to_losses(y).unwrap();
        let direct = ftl_regret(&losses);
        let trace = ftl_trace(&losses).current();
        let crossings = line_crossings(&y.bits()[..n - 1]) as f64 / 2.0;
        (direct - trace)
            .abs()
            .max((direct - crossings).abs())
            .max((trace - crossings).abs())
    })
    .into_iter()
    .fold(0.0, f64::max);

    let instances: Vec<LossMatrix> = (0..100u64)
        .map(|i| gen_uniform_losses(200, [2, 5, 10][i as usize % 3], 9_000 + i).unwrap())
        .collect();
    let expert_gap = par::map(Exec::Parallel, &instances, |l| {
        verify_ftl_identity(l).unwrap()
    })
    .into_iter()
    .fold(0.0, f64::max);
    let msg = format!("binary max gap {binary_gap:.2e}, experts max gap {expert_gap:.2e}");
    if binary_gap <= 1e-9 && expert_gap <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

/// Walk every prefix tree of depth `n`, returning the max balance error and
/// the max stability gap, with `phi_t` rebuilt by backward averaging.
fn cover_tree(n: usize) -> (f64, f64, f64) {
    let f_n = rademacher_fn(n);
    // phi[t][mask] for prefixes of length t; mask bit i is y_{i+1}.
    let mut phi: Vec<Vec<f64>> = vec![Vec::new(); n + 1];
    phi[n] = (0u32..1 << n)
        .map(|mask| {
            let ones = mask.count_ones() as usize;
            ones.min(n - ones) as f64 + f_n
        })
        .collect();
    for t in (0..n).rev() {
        phi[t] = (0u32..1 << t)
            .map(|mask| (phi[t + 1][mask as usize] + phi[t + 1][(mask | 1 << t) as usize]) / 2.0)
            .collect();
    }

    let mut balance: f64 = 0.0;
    let mut stability: f64 = 0.0;
    let mut predictor: f64 = 0.0;
    for mask in 0u32..1 << n {
        let mut cover = Cover::new(n).unwrap();
        let mut loss = 0.0;
        for t in 0..n {
            let prefix = mask & ((1 << t) - 1);
            let gap = phi[t + 1][prefix as usize] - phi[t + 1][(prefix | 1 << t) as usize];
            stability = stability.max(gap.abs());
            let a = cover_action(&cover).unwrap();
            predictor = predictor.max((a - (1.0 + gap) / 2.0).abs());
            let bit = mask >> t & 1 == 1;
            loss += (a - if bit { 1.0 } else { 0.0 }).abs();
            cover.observe_bit(bit).unwrap();
        }
        balance = balance.max((loss - phi[n][mask as usize]).abs());
    }
    (balance, stability, predictor)
}

fn criterion_4() -> Outcome {
    let results = par::map_indexed(Exec::Parallel, 14, |i| cover_tree(i + 1));
    let balance = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let stability = results.iter().map(|r| r.1).fold(0.0, f64::max);
    let predictor = results.iter().map(|r| r.2).fold(0.0, f64::max);
    let msg = format!(
        "n<=14: max balance error {balance:.2e}, max stability gap {stability:.6}, \
         predictor vs phi_t {predictor:.2e}"
    );
    if balance <= 1e-9 && stability <= 1.0 + 1e-12 && predictor <= 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_5() -> Outcome {
    let report = lower_bound_constant();
    let gamma = report.gamma_inf;
    let big = finite_n_ratio(1_000_000).map_err(|e| e.to_string())?;
    let two = finite_n_ratio(2).map_err(|e| e.to_string())?;
    let msg = format!("gamma_inf {gamma:.6}, ratio(10^6) {big:.6}, ratio(2) {two}");
    if (gamma - 1.4335).abs() <= 5e-4 && (big - 1.4335).abs() <= 0.02 && two == 1.2 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_6() -> Outcome {
    let norm = par::map_indexed(Exec::Parallel, 1000, |i| {
        let d = CrossingDistribution::new(2 * (i + 1)).unwrap();
        (d.total() - 1.0).abs()
    })
    .into_iter()
    .fold(0.0, f64::max);

    let brackets: Vec<_> = [4096, 16384]
        .iter()
        .map(|&n| pnk_bound_check(n, 2.0).unwrap())
        .collect();
    let brackets_ok = brackets.iter().all(|b| b.holds());

    let n = 200;
    let samples = 100_000;
    let hist = sample_crossing_histogram(n, samples, 20_240_601, Exec::Parallel);
    let mut worst_z: f64 = 0.0;
    for (k, &count) in hist.iter().enumerate().take(31) {
        let p = pnk_exact(n, k).unwrap();
        let sigma = (p * (1.0 - p) / samples as f64).sqrt();
        worst_z = worst_z.max((count as f64 / samples as f64 - p).abs() / sigma);
    }
    let msg = format!(
        "max normalization error {norm:.2e}; ratio ranges {}; histogram max |z| {worst_z:.2}",
        brackets
            .iter()
            .map(|b| format!(
                "n={} [{:.4}, {:.4}] in [{:.4}, {:.4}]",
                b.n, b.min_ratio, b.max_ratio, b.lower, b.upper
            ))
            .collect::<Vec<_>>()
            .join(", ")
    );
    if norm <= 1e-9 && brackets_ok && worst_z <= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_7() -> Outcome {
    let mut instances = common::all_losses();
    for seed in 0..20 {
        let y = gen_bernoulli(common::N, 0.1, 500 + seed).unwrap();
        instances.push((
            format!("bernoulli p=0.10 seed={}", 500 + seed),
            binary_to_losses(&y).unwrap(),
        ));
    }
    let cfg = SmallLossConfig::hedge(DEFAULT_KAPPA);
    let checks = par::map(Exec::Parallel, &instances, |(name, losses)| {
        let run = small_loss_smart_run(losses, &cfg).unwrap();
        let m = losses.experts();
        let lstar = losses.best_expert_loss();
        let bound = explicit_regret_bound(ftl_regret(losses), lstar, m, DEFAULT_KAPPA);
        let epochs_ok = run.last_epoch() as f64 <= epoch_index_bound(lstar, m) + 1e-12;
        (bound - run.record.regret, epochs_ok, name.clone())
    });
    let (slack, _, name) = checks
        .iter()
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .unwrap()
        .clone();
    let epoch_failures: Vec<&str> = checks
        .iter()
        .filter(|c| !c.1)
        .map(|c| c.2.as_str())
        .collect();

    // Figure reproduction: SMART tracks FTL on easy Bernoulli inputs.
    let n = common::N;
    let g = rademacher_fn(n);
    let det = SmartConfig::cover(ThresholdMode::Deterministic, WorstCaseBound::CoverExact);
    let mut figure_worst = (f64::INFINITY, 0.0);
    for i in 1..=8 {
        let p = i as f64 * 0.05;
        let mut smart_sum = 0.0;
        let mut ftl_sum = 0.0;
        let mut count = 0;
        for seed in 0..10 {
            let losses = binary_to_losses(&gen_bernoulli(n, p, seed).unwrap()).unwrap();
            let ftl = ftl_regret(&losses);
            if ftl < g {
                ftl_sum += ftl;
                smart_sum += smart_run(&losses, &det).unwrap().record.regret;
                count += 1;
            }
        }
        if count > 0 {
            let slack = 2.0 * ftl_sum / count as f64 + 1.0 - smart_sum / count as f64;
            if slack < figure_worst.0 {
                figure_worst = (slack, p);
            }
        }
    }

    let msg = format!(
        "{} instances, min bound slack {slack:.4} ({name}), epoch-count violations {}; \
         figure min slack {:.4} (p={:.2})",
        instances.len(),
        epoch_failures.len(),
        figure_worst.0,
        figure_worst.1
    );
    if slack >= 0.0 && epoch_failures.is_empty() && figure_worst.0 >= 0.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn criterion_8() -> Outcome {
    let instances: Vec<(LossMatrix, f64)> = (0..200u64)
        .map(|i| {
            let mut r = rng(31_337 + i);
            let n = r.random_range(2..=150);
            let losses = if i % 2 == 0 {
                let y = gen_bernoulli(n, r.random::<f64>(), i).unwrap();
                binary_to_losses(&y).unwrap()
            } else {
                gen_uniform_losses(n, r.random_range(2..=6), i).unwrap()
            };
            (losses, r.random::<f64>() * 6.0)
        })
        .collect();
    let hedge = SmartConfig {
        mode: ThresholdMode::Deterministic,
        bound: WorstCaseBound::CoverExact,
        worst_case: smart_core::smart::hedge_factory(Default::default()),
        seed: 0,
    };
    let failures = par::map(Exec::Parallel, &instances, |(losses, theta)| {
        let run = smart_run_with_threshold(losses, &hedge.worst_case, *theta).unwrap();
        let mut ok = run.record.switch_times.len() <= 1;
        for t in 1..=losses.rounds() {
            let prefix = losses.window(0, t).unwrap();
            let truncated = smart_run_with_threshold(&prefix, &hedge.worst_case, *theta).unwrap();
            ok &= truncated.trace.values() == &run.trace.values()[..=t];
        }
        usize::from(!ok)
    })
    .into_iter()
    .sum::<usize>();
    let msg = format!("{} instances, {failures} failures", instances.len());
    if failures == 0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn main() -> ExitCode {
    type Criterion = (&'static str, fn() -> Outcome);
    let criteria: [Criterion; 8] = [
        ("deterministic threshold bound", criterion_1),
        ("randomized threshold bound", criterion_2),
        ("FTL regret oracle equivalence", criterion_3),
        ("Cover balance and stability", criterion_4),
        ("lower-bound constant", criterion_5),
        ("crossing distribution", criterion_6),
        ("small-loss epochs", criterion_7),
        ("single switch and adaptedness", criterion_8),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = fmt_secs(start.elapsed());
        match outcome {
            Ok(msg) => println!("PASS {} {name}: {msg} [{elapsed}]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {} {name}: {msg} [{elapsed}]", i + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn fmt_secs(d: Duration) -> String {
    format!("{:.1}s", d.as_secs_f64())
}
