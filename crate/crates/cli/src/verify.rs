//! `smart verify` and `smart lowerbound`: invariant suites as JSON reports.

use std::path::PathBuf;

use clap::Args;
use rand::Rng;
use serde::Serialize;

use smart_core::analysis::{
    cover_achievability, gaussian_q, line_crossings, lower_bound_report, pnk_bound_check,
    pnk_exact, sample_crossing_histogram, verify_ftl_identity, CrossingDistribution,
    ACHIEVABILITY_MAX_N, DEFAULT_RATIO_HORIZONS,
};
use smart_core::par::{self, Exec};
use smart_core::policies::{Ftl, DEFAULT_KAPPA};
use smart_core::sequences::{
    binary_to_losses, derive_seed, gen_bernoulli, gen_uniform_losses, rng,
};
use smart_core::smallloss::{
    epoch_index_bound, explicit_regret_bound, small_loss_smart_run, sqrt_lstar_bound,
    SmallLossConfig,
};
use smart_core::smart::ftl_trace;
use smart_core::{run_policy, LossMatrix};

use crate::config::ConfigFile;
use crate::grid::Suite;
use crate::{emit, Common, Status, UsageError};

/// Reference value of the lower-bound constant.
pub const GAMMA_REFERENCE: f64 = 1.4335;
const GAMMA_TOLERANCE: f64 = 5e-4;
const IDENTITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    /// identity, cover, crossings, lowerbound, smallloss or all
    pub suite: Suite,
    #[command(flatten)]
    pub common: Common,
    /// Base seed for random instances [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Random instances per suite [default: 100]
    #[arg(long)]
    pub instances: Option<usize>,
    /// Horizon of random instances [default: 500]
    #[arg(long)]
    pub n: Option<usize>,
    /// Largest horizon enumerated by the cover suite [default: 14]
    #[arg(long)]
    pub cover_n: Option<usize>,
    /// Walk length of the crossing histogram, even [default: 200]
    #[arg(long)]
    pub walk: Option<usize>,
    /// Monte Carlo walks for the crossing histogram [default: 100000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Small-loss additive constant [default: 2]
    #[arg(long)]
    pub kappa: Option<f64>,
    /// Also check Reg <= 2 min{Reg(FTL), 10 sqrt(2 L* ln m)} + C max{1, ln L*} ln m
    #[arg(long)]
    pub sqrt_c: Option<f64>,
    /// JSON report path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyConfig {
    pub suite: &'static str,
    pub seed: u64,
    pub instances: usize,
    pub n: usize,
    pub cover_n: usize,
    pub walk: usize,
    pub samples: usize,
    pub kappa: f64,
    pub sqrt_c: Option<f64>,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

impl VerifyArgs {
    pub fn resolve(self) -> Result<VerifyConfig, UsageError> {
        let mut file = ConfigFile::load(self.common.config.as_deref())?;
        let seed = file.merge(self.seed, "seed")?.unwrap_or(0);
        let instances = file.merge(self.instances, "instances")?.unwrap_or(100);
        let n = file.merge(self.n, "n")?.unwrap_or(500);
        let cover_n = file.merge(self.cover_n, "cover-n")?.unwrap_or(14);
        let walk = file.merge(self.walk, "walk")?.unwrap_or(200);
        let samples = file.merge(self.samples, "samples")?.unwrap_or(100_000);
        let kappa = file.merge(self.kappa, "kappa")?.unwrap_or(DEFAULT_KAPPA);
        let sqrt_c = file.merge(self.sqrt_c, "sqrt-c")?;
        let out = file.merge(self.out, "out")?;
        file.finish()?;

        if instances == 0 || n < 2 {
            return Err(UsageError::new("need instances >= 1 and n >= 2"));
        }
        if cover_n == 0 || cover_n > ACHIEVABILITY_MAX_N {
            return Err(UsageError::new(format!(
                "cover-n must be in 1..={ACHIEVABILITY_MAX_N}"
            )));
        }
        if walk == 0 || !walk.is_multiple_of(2) || samples == 0 {
            return Err(UsageError::new(
                "walk must be even and positive, samples positive",
            ));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(UsageError::new("kappa must be positive"));
        }
        if sqrt_c.is_some_and(|c| !(c >= 0.0) || !c.is_finite()) {
            return Err(UsageError::new("sqrt-c must be nonnegative"));
        }
        Ok(VerifyConfig {
            suite: self.suite.as_str(),
            seed,
            instances,
            n,
            cover_n,
            walk,
            samples,
            kappa,
            sqrt_c,
            out,
        })
    }
}

/// One invariant: `pass` iff `measured` is on the right side of `limit`.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct CheckResult {
    pub suite: &'static str,
    pub name: String,
    pub pass: bool,
    pub measured: f64,
    pub limit: f64,
    /// Distance to the limit; negative on failure.
    pub slack: f64,
}

fn at_most(suite: &'static str, name: impl Into<String>, measured: f64, limit: f64) -> CheckResult {
    CheckResult {
        suite,
        name: name.into(),
        pass: measured <= limit,
        measured,
        limit,
        slack: limit - measured,
    }
}

fn at_least(
    suite: &'static str,
    name: impl Into<String>,
    measured: f64,
    limit: f64,
) -> CheckResult {
    CheckResult {
        suite,
        name: name.into(),
        pass: measured >= limit,
        measured,
        limit,
        slack: measured - limit,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub config: VerifyConfig,
    pub checks: Vec<CheckResult>,
    pub pass: bool,
}

fn max(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}

/// Binary instances at random `p`, then uniform instances with `m` cycling
/// through 2, 5, 10.
type Instances = (Vec<(Vec<bool>, LossMatrix)>, Vec<LossMatrix>);

fn instances(cfg: &VerifyConfig, stream: u64) -> Result<Instances, UsageError> {
    let base = derive_seed(cfg.seed, stream);
    let mut binary = Vec::with_capacity(cfg.instances);
    let mut experts = Vec::with_capacity(cfg.instances);
    for i in 0..cfg.instances as u64 {
        let seed = derive_seed(base, i);
        let p = rng(seed).random::<f64>();
        let y = gen_bernoulli(cfg.n, p, derive_seed(seed, 1))?;
        binary.push((y.bits().to_vec(), binary_to_losses(&y)?));
        experts.push(gen_uniform_losses(
            cfg.n,
            [2, 5, 10][i as usize % 3],
            derive_seed(seed, 2),
        )?);
    }
    Ok((binary, experts))
}

fn identity(cfg: &VerifyConfig) -> Result<Vec<CheckResult>, UsageError> {
    const S: &str = "identity";
    let (binary, experts) = instances(cfg, 1)?;
    let n = cfg.n;
    let binary_gap = par::map(Exec::Parallel, &binary, |(bits, losses)| {
        let direct = run_policy(&mut Ftl::new(2), losses)?.regret;
        let trace = ftl_trace(losses).current();
        let crossings = line_crossings(&bits[..n - 1]) as f64 / 2.0;
        Ok::<_, smart_core::Error>((direct - trace).abs().max((direct - crossings).abs()))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let binary_gap = max(binary_gap);
    let expert_gap = par::map(Exec::Parallel, &experts, verify_ftl_identity)
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(vec![
        at_most(
            S,
            "binary: FTL regret = trace = crossings/2",
            binary_gap,
            IDENTITY_TOLERANCE,
        ),
        at_most(
            S,
            "experts: FTL regret = trace",
            max(expert_gap),
            IDENTITY_TOLERANCE,
        ),
    ])
}

fn cover(cfg: &VerifyConfig) -> Result<Vec<CheckResult>, UsageError> {
    const S: &str = "cover";
    let reports = par::map_indexed(Exec::Parallel, cfg.cover_n, |i| cover_achievability(i + 1))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    Ok(vec![
        at_most(
            S,
            format!("achievability gap, n <= {}", cfg.cover_n),
            max(reports.iter().map(|r| r.balance_error)),
            IDENTITY_TOLERANCE,
        ),
        at_most(
            S,
            format!("stability |phi(y0) - phi(y1)| <= 1, n <= {}", cfg.cover_n),
            max(reports.iter().map(|r| r.stability_gap)),
            1.0 + 1e-12,
        ),
    ])
}

fn crossings(cfg: &VerifyConfig) -> Result<Vec<CheckResult>, UsageError> {
    const S: &str = "crossings";
    let norm = par::map_indexed(Exec::Parallel, 1000, |i| {
        CrossingDistribution::new(2 * (i + 1)).map(|d| (d.total() - 1.0).abs())
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let mut checks = vec![at_most(
        S,
        "sum_k p_{n,k} = 1, even n <= 2000",
        max(norm),
        1e-9,
    )];
    for n in [4096, 16384] {
        let b = pnk_bound_check(n, 2.0)?;
        checks.push(at_least(
            S,
            format!("p_{{n,k}} ratio lower bracket, n={n}, C=2"),
            b.min_ratio,
            b.lower,
        ));
        checks.push(at_most(
            S,
            format!("p_{{n,k}} ratio upper bracket, n={n}, C=2"),
            b.max_ratio,
            b.upper,
        ));
    }
    let n = cfg.walk;
    let samples = cfg.samples;
    let hist = sample_crossing_histogram(n, samples, derive_seed(cfg.seed, 3), Exec::Parallel);
    let mut worst_z: f64 = 0.0;
    let mut bins = 0;
    for (k, &count) in hist.iter().enumerate().take(HISTOGRAM_BINS) {
        let p = pnk_exact(n, k)?;
        if p <= 0.0 || p >= 1.0 {
            continue;
        }
        bins += 1;
        let sigma = (p * (1.0 - p) / samples as f64).sqrt();
        worst_z = worst_z.max((count as f64 / samples as f64 - p).abs() / sigma);
    }
    checks.push(at_most(
        S,
        format!("Monte Carlo histogram max |z| over {bins} bins, n={n}"),
        worst_z,
        family_z(bins),
    ));
    Ok(checks)
}

/// Bins `k = 0..HISTOGRAM_BINS` of the crossing histogram are tested.
const HISTOGRAM_BINS: usize = 31;

/// Two-sided per-bin z limit such that all `bins` stay inside with the
/// probability a single bin stays inside 3 sigma (Sidak correction).
pub fn family_z(bins: usize) -> f64 {
    let single = 2.0 * gaussian_q(3.0);
    let per_bin = 1.0 - (1.0 - single).powf(1.0 / bins.max(1) as f64);
    // 2 Q(z) is decreasing in z.
    let (mut lo, mut hi) = (0.0, 40.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 2.0 * gaussian_q(mid) > per_bin {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

fn lowerbound(_: &VerifyConfig) -> Result<Vec<CheckResult>, UsageError> {
    const S: &str = "lowerbound";
    let report = lower_bound_report(&DEFAULT_RATIO_HORIZONS)?;
    let mut checks = vec![at_most(
        S,
        format!(
            "|gamma_inf - {GAMMA_REFERENCE}| (gamma_inf = {:.6})",
            report.gamma_inf
        ),
        (report.gamma_inf - GAMMA_REFERENCE).abs(),
        GAMMA_TOLERANCE,
    )];
    for (n, ratio) in report.ratios {
        checks.push(at_least(
            S,
            format!("finite-horizon ratio, n={n}"),
            ratio,
            1.0,
        ));
    }
    Ok(checks)
}

fn smallloss(cfg: &VerifyConfig) -> Result<Vec<CheckResult>, UsageError> {
    const S: &str = "smallloss";
    let (binary, experts) = instances(cfg, 4)?;
    let all: Vec<&LossMatrix> = binary
        .iter()
        .map(|(_, l)| l)
        .chain(experts.iter())
        .collect();
    let run_cfg = SmallLossConfig::hedge(cfg.kappa);
    let outcomes = par::map(Exec::Parallel, &all, |losses| -> Result<_, UsageError> {
        let run = small_loss_smart_run(losses, &run_cfg)?;
        let ftl = run_policy(&mut Ftl::new(losses.experts()), losses)?.regret;
        let m = losses.experts();
        let lstar = losses.best_expert_loss();
        let reg = run.record.regret;
        let explicit = explicit_regret_bound(ftl, lstar, m, cfg.kappa) - reg;
        let epochs = epoch_index_bound(lstar, m) - run.last_epoch() as f64;
        let sqrt = cfg.sqrt_c.map(|c| sqrt_lstar_bound(ftl, lstar, m, c) - reg);
        Ok((explicit, epochs, sqrt))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let min = |xs: &mut dyn Iterator<Item = f64>| xs.fold(f64::INFINITY, f64::min);
    let mut checks = vec![
        at_least(
            S,
            "explicit regret bound, min slack",
            min(&mut outcomes.iter().map(|o| o.0)),
            -1e-9,
        ),
        at_least(
            S,
            "epoch index bound, min slack",
            min(&mut outcomes.iter().map(|o| o.1)),
            -1e-12,
        ),
    ];
    if let Some(c) = cfg.sqrt_c {
        checks.push(at_least(
            S,
            format!("sqrt(L*) regret bound with C={c}, min slack"),
            min(&mut outcomes.iter().filter_map(|o| o.2)),
            -1e-9,
        ));
    }
    Ok(checks)
}

pub fn execute(cfg: &VerifyConfig) -> Result<Report, UsageError> {
    let suite: Suite = cfg.suite.parse().map_err(UsageError::new)?;
    let suites: &[Suite] = match suite {
        Suite::All => &[
            Suite::Identity,
            Suite::Cover,
            Suite::Crossings,
            Suite::LowerBound,
            Suite::SmallLoss,
        ],
        ref s => std::slice::from_ref(s),
    };
    let mut checks = Vec::new();
    for s in suites {
        checks.extend(match s {
            Suite::Identity => identity(cfg)?,
            Suite::Cover => cover(cfg)?,
            Suite::Crossings => crossings(cfg)?,
            Suite::LowerBound => lowerbound(cfg)?,
            Suite::SmallLoss => smallloss(cfg)?,
            Suite::All => unreachable!("expanded above"),
        });
    }
    let pass = checks.iter().all(|c| c.pass);
    Ok(Report {
        config: cfg.clone(),
        checks,
        pass,
    })
}

pub fn run(args: VerifyArgs) -> anyhow::Result<Status> {
    let cfg = args.resolve()?;
    let report = execute(&cfg)?;
    emit(
        cfg.out.as_deref(),
        &(serde_json::to_string_pretty(&report)? + "\n"),
    )?;
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!(
            "invariant failed: {}: {} (measured {}, limit {})",
            c.suite, c.name, c.measured, c.limit
        );
    }
    Ok(Status::from_pass(report.pass))
}

#[derive(Debug, Clone, Args)]
pub struct LowerboundArgs {
    #[command(flatten)]
    pub common: Common,
    /// Even horizons for the finite-n ratio, comma-separated
    /// [default: 2,10,100,1000,10000,100000]
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// JSON output path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RatioRow {
    pub n: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LowerboundOutput {
    pub gamma_inf: f64,
    pub exp_term: f64,
    pub q_term: f64,
    pub reference: f64,
    pub deviation: f64,
    pub ratios: Vec<RatioRow>,
    pub pass: bool,
}

pub fn lowerbound_output(horizons: &[usize]) -> Result<LowerboundOutput, UsageError> {
    let report = lower_bound_report(horizons)?;
    let pass = report.gamma_inf >= 1.0 && report.ratios.iter().all(|&(_, r)| r >= 1.0);
    Ok(LowerboundOutput {
        gamma_inf: report.gamma_inf,
        exp_term: report.exp_term,
        q_term: report.q_term,
        reference: GAMMA_REFERENCE,
        deviation: (report.gamma_inf - GAMMA_REFERENCE).abs(),
        ratios: report
            .ratios
            .into_iter()
            .map(|(n, ratio)| RatioRow { n, ratio })
            .collect(),
        pass,
    })
}

pub fn run_lowerbound(args: LowerboundArgs) -> anyhow::Result<Status> {
    let mut file = ConfigFile::load(args.common.config.as_deref())?;
    let from_file: Option<String> = file.take("n")?;
    let out = file.merge(args.out, "out")?;
    file.finish()?;
    let horizons = match (args.n, from_file) {
        (Some(n), _) => n,
        (None, Some(list)) => list
            .split(',')
            .map(|s| s.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| UsageError::new(format!("config n: {e}")))?,
        (None, None) => DEFAULT_RATIO_HORIZONS.to_vec(),
    };
    let output = lowerbound_output(&horizons)?;
    emit(
        out.as_deref(),
        &(serde_json::to_string_pretty(&output)? + "\n"),
    )?;
    Ok(Status::from_pass(output.pass))
}
