//! `smart sweep`: regret of a policy roster over a sequence grid.
//!
//! One CSV row per (parameter, seed, policy), sorted in that order. For
//! random sequence kinds the seed selects the sequence; for every kind it
//! also selects the randomized threshold through
//! `derive_seed(seed, THRESHOLD_STREAM)`.

use std::collections::HashMap;
use std::f64::consts::E;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::Serialize;

use smart_core::par::{self, Exec};
use smart_core::policies::{Cover, Ftl, Hedge, HedgeConfig, COVER_MAX_HORIZON, DEFAULT_KAPPA};
use smart_core::run_policy;
use smart_core::sequences::{
    binary_to_losses, derive_seed, gen_alternating, gen_bernoulli, gen_lead_change, BinarySequence,
};
use smart_core::smallloss::{
    epoch_index_bound, explicit_regret_bound, small_loss_smart_run, SmallLossConfig,
};
use smart_core::smart::{SmartConfig, SwitchEvaluator, ThresholdMode, WorstCaseBound};

use crate::config::ConfigFile;
use crate::grid::{
    parse_int_grid, parse_real_grid, parse_roster, BoundArg, PolicyName, SequenceKind, ThresholdArg,
};
use crate::{emit, Common, Status, UsageError};

/// Stream index mixed into each seed for threshold draws.
pub const THRESHOLD_STREAM: u64 = 1;

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    /// bernoulli, lead-change or alternating [default: bernoulli]
    #[arg(long)]
    pub kind: Option<SequenceKind>,
    /// Horizon [default: 1000]
    #[arg(long)]
    pub n: Option<usize>,
    /// start:end:step or v1,v2,... (p for bernoulli, c for lead-change)
    #[arg(long)]
    pub grid: Option<String>,
    /// Seeds per grid point [default: 1]
    #[arg(long)]
    pub seeds: Option<usize>,
    /// First seed [default: 0]
    #[arg(long)]
    pub seed_base: Option<u64>,
    /// Comma-separated roster of ftl, cover, hedge, smart, smallloss
    /// [default: ftl,cover,smart]
    #[arg(long)]
    pub policies: Option<String>,
    /// deterministic or randomized SMART threshold [default: deterministic]
    #[arg(long)]
    pub threshold: Option<ThresholdArg>,
    /// Worst-case bound g(n): exact f_n or asymptotic sqrt(n/2pi) [default: exact]
    #[arg(long)]
    pub bound: Option<BoundArg>,
    /// Small-loss additive constant for hedge and smallloss
    #[arg(long)]
    pub kappa: Option<f64>,
    /// CSV output path [default: stdout]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON summary path [default: <out>.json when --out is given]
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// A fully validated sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    #[serde(serialize_with = "as_text")]
    pub kind: SequenceKind,
    pub n: usize,
    pub grid: Vec<f64>,
    pub seeds: usize,
    pub seed_base: u64,
    #[serde(serialize_with = "roster_text")]
    pub roster: Vec<PolicyName>,
    #[serde(serialize_with = "as_text")]
    pub threshold: ThresholdArg,
    #[serde(serialize_with = "as_text")]
    pub bound: BoundArg,
    pub kappa: f64,
    #[serde(skip)]
    pub out: Option<PathBuf>,
    #[serde(skip)]
    pub summary: Option<PathBuf>,
}

fn as_text<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

fn roster_text<S: serde::Serializer>(v: &[PolicyName], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|p| p.as_str()))
}

impl SweepConfig {
    fn mode(&self) -> ThresholdMode {
        match self.threshold {
            ThresholdArg::Deterministic => ThresholdMode::Deterministic,
            ThresholdArg::Randomized => ThresholdMode::Randomized,
        }
    }

    fn worst_case_bound(&self) -> WorstCaseBound {
        match self.bound {
            BoundArg::Exact => WorstCaseBound::CoverExact,
            BoundArg::Asymptotic => WorstCaseBound::CoverAsymptotic,
        }
    }
}

impl SweepArgs {
    pub fn resolve(self) -> Result<SweepConfig, UsageError> {
        let mut file = ConfigFile::load(self.common.config.as_deref())?;
        let kind = file
            .merge(self.kind, "kind")?
            .unwrap_or(SequenceKind::Bernoulli);
        let n = file.merge(self.n, "n")?.unwrap_or(1000);
        let grid_spec = file.merge(self.grid, "grid")?;
        let seeds = file.merge(self.seeds, "seeds")?.unwrap_or(1);
        let seed_base = file.merge(self.seed_base, "seed-base")?.unwrap_or(0);
        let policies = file
            .merge(self.policies, "policies")?
            .unwrap_or_else(|| "ftl,cover,smart".into());
        let threshold = file
            .merge(self.threshold, "threshold")?
            .unwrap_or(ThresholdArg::Deterministic);
        let bound = file.merge(self.bound, "bound")?.unwrap_or(BoundArg::Exact);
        let kappa = file.merge(self.kappa, "kappa")?.unwrap_or(DEFAULT_KAPPA);
        let out = file.merge(self.out, "out")?;
        let summary = file.merge(self.summary, "summary")?;
        file.finish()?;

        if n == 0 {
            return Err(UsageError::new("n must be positive"));
        }
        if n > COVER_MAX_HORIZON {
            return Err(UsageError::new(format!(
                "n must be at most {COVER_MAX_HORIZON}"
            )));
        }
        if seeds == 0 {
            return Err(UsageError::new("seeds must be positive"));
        }
        if !(kappa > 0.0) || !kappa.is_finite() {
            return Err(UsageError::new("kappa must be positive"));
        }
        let roster = parse_roster(&policies).map_err(UsageError::new)?;
        let grid = match kind {
            SequenceKind::Bernoulli => {
                let g = parse_real_grid(grid_spec.as_deref().unwrap_or("0.05:0.5:0.05"))
                    .map_err(UsageError::new)?;
                if let Some(p) = g.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return Err(UsageError::new(format!("p={p} is outside [0, 1]")));
                }
                g
            }
            SequenceKind::LeadChange => {
                let g = parse_int_grid(grid_spec.as_deref().unwrap_or("1:100:1"))
                    .map_err(UsageError::new)?;
                if let Some(c) = g.iter().find(|&&c| 2 * c > n) {
                    return Err(UsageError::new(format!("c={c} needs 2c <= n={n}")));
                }
                g.into_iter().map(|c| c as f64).collect()
            }
            SequenceKind::Alternating => {
                if grid_spec.is_some() {
                    return Err(UsageError::new("alternating sequences take no grid"));
                }
                vec![f64::NAN]
            }
        };
        Ok(SweepConfig {
            kind,
            n,
            grid,
            seeds,
            seed_base,
            roster,
            threshold,
            bound,
            kappa,
            out,
            summary,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub sequence_kind: &'static str,
    pub param: String,
    pub seed: u64,
    pub policy: &'static str,
    pub regret: f64,
    pub switch_time: Option<usize>,
    pub threshold_draw: Option<f64>,
}

/// Per-row data needed by the summary checks but not written to CSV.
#[derive(Debug, Clone)]
struct Extra {
    param_index: usize,
    policy_index: usize,
    ftl_regret: f64,
    smallloss_bound: Option<(f64, bool)>,
}

fn format_param(kind: SequenceKind, value: f64) -> String {
    match kind {
        SequenceKind::Alternating => String::new(),
        _ => format!("{value}"),
    }
}

fn sequence(
    kind: SequenceKind,
    n: usize,
    value: f64,
    seed: u64,
) -> Result<BinarySequence, UsageError> {
    Ok(match kind {
        SequenceKind::Bernoulli => gen_bernoulli(n, value, seed)?,
        SequenceKind::LeadChange => gen_lead_change(n, value as usize)?,
        SequenceKind::Alternating => gen_alternating(n),
    })
}

/// A sequence and the seeds that share it.
struct Unit {
    param_index: usize,
    seeds: Vec<u64>,
}

fn units(cfg: &SweepConfig) -> Vec<Unit> {
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| cfg.seed_base + i).collect();
    let mut out = Vec::new();
    for param_index in 0..cfg.grid.len() {
        if cfg.kind == SequenceKind::Bernoulli {
            out.extend(seeds.iter().map(|&s| Unit {
                param_index,
                seeds: vec![s],
            }));
        } else {
            out.push(Unit {
                param_index,
                seeds: seeds.clone(),
            });
        }
    }
    out
}

fn run_unit(cfg: &SweepConfig, unit: &Unit) -> Result<Vec<(Row, Extra)>, UsageError> {
    let kind = cfg.kind;
    let value = cfg.grid[unit.param_index];
    let param = format_param(kind, value);
    let y = sequence(kind, cfg.n, value, unit.seeds[0])?;
    let losses = binary_to_losses(&y)?;
    let m = losses.experts();
    let ftl = run_policy(&mut Ftl::new(m), &losses)?.regret;

    let smart_cfg = SmartConfig::cover(cfg.mode(), cfg.worst_case_bound());
    let g_n = smart_cfg.bound.eval(cfg.n);
    let evaluator = SwitchEvaluator::new(&losses, smart_cfg.worst_case.clone());
    let mut smart_cache: HashMap<usize, f64> = HashMap::new();

    // Seed-independent policies run once per sequence.
    // (regret, switch time, small-loss (bound slack, epoch count ok)).
    type Fixed = (f64, Option<usize>, Option<(f64, bool)>);
    let mut fixed: HashMap<PolicyName, Fixed> = HashMap::new();
    for &p in &cfg.roster {
        let entry = match p {
            PolicyName::Ftl => (ftl, None, None),
            PolicyName::Cover => (
                run_policy(&mut Cover::new(cfg.n)?, &losses)?.regret,
                None,
                None,
            ),
            PolicyName::Hedge => {
                let mut h = Hedge::new(m, HedgeConfig::small_loss(cfg.kappa))?;
                (run_policy(&mut h, &losses)?.regret, None, None)
            }
            PolicyName::SmallLoss => {
                let run = small_loss_smart_run(&losses, &SmallLossConfig::hedge(cfg.kappa))?;
                let lstar = losses.best_expert_loss();
                let bound = explicit_regret_bound(ftl, lstar, m, cfg.kappa);
                let epochs_ok = run.last_epoch() as f64 <= epoch_index_bound(lstar, m) + 1e-12;
                let regret = run.record.regret;
                let first_switch = Some(run.record.switch_time());
                (regret, first_switch, Some((bound - regret, epochs_ok)))
            }
            PolicyName::Smart => continue,
        };
        fixed.insert(p, entry);
    }

    let mut rows = Vec::new();
    for &seed in &unit.seeds {
        for (policy_index, &p) in cfg.roster.iter().enumerate() {
            let extra = Extra {
                param_index: unit.param_index,
                policy_index,
                ftl_regret: ftl,
                smallloss_bound: None,
            };
            let row = |regret, switch_time, threshold_draw| Row {
                sequence_kind: kind.as_str(),
                param: param.clone(),
                seed,
                policy: p.as_str(),
                regret,
                switch_time,
                threshold_draw,
            };
            if p == PolicyName::Smart {
                let theta = smart_cfg
                    .clone()
                    .with_seed(derive_seed(seed, THRESHOLD_STREAM))
                    .threshold_for(g_n)?;
                let t_sw = evaluator.switch_time(theta);
                let regret = match smart_cache.get(&t_sw) {
                    Some(&r) => r,
                    None => {
                        let r = evaluator.regret_at(t_sw)?;
                        smart_cache.insert(t_sw, r);
                        r
                    }
                };
                rows.push((row(regret, Some(t_sw), Some(theta)), extra));
            } else {
                let (regret, switch_time, bound) = fixed[&p];
                rows.push((
                    row(regret, switch_time, None),
                    Extra {
                        smallloss_bound: bound,
                        ..extra
                    },
                ));
            }
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize)]
pub struct CellSummary {
    pub param: String,
    pub policy: &'static str,
    pub count: usize,
    pub mean_regret: f64,
    pub sem: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Reference {
    pub param: String,
    pub mean_ftl: f64,
    /// `2 mean Reg(FTL)`.
    pub two_ftl: f64,
    /// `e/(e-1) mean Reg(FTL)`.
    pub ratio_ftl: f64,
    pub g_n: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub violations: usize,
    pub cases: usize,
    pub min_slack: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub config: SweepConfig,
    pub rows: usize,
    pub cells: Vec<CellSummary>,
    pub reference: Vec<Reference>,
    pub checks: Vec<Check>,
    pub pass: bool,
}

fn mean_sem(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

struct CheckAcc {
    name: String,
    violations: usize,
    cases: usize,
    min_slack: f64,
}

impl CheckAcc {
    fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            violations: 0,
            cases: 0,
            min_slack: f64::INFINITY,
        }
    }

    fn record(&mut self, slack: f64, ok: bool) {
        self.cases += 1;
        self.min_slack = self.min_slack.min(slack);
        self.violations += usize::from(!ok);
    }

    fn finish(self) -> Check {
        Check {
            name: self.name,
            pass: self.violations == 0,
            violations: self.violations,
            cases: self.cases,
            min_slack: self.min_slack,
        }
    }
}

fn summarize(cfg: &SweepConfig, rows: &[(Row, Extra)]) -> Summary {
    let g_n = SmartConfig::cover(cfg.mode(), cfg.worst_case_bound())
        .bound
        .eval(cfg.n);
    let ratio = E / (E - 1.0);
    let mut cells = Vec::new();
    let mut reference = Vec::new();
    let mut det = CheckAcc::new("deterministic threshold bound (rowwise)");
    let mut rand = CheckAcc::new("randomized threshold bound (mean over seeds, 3 SEM)");
    let mut small = CheckAcc::new("small-loss explicit bound (rowwise)");
    let mut epochs = CheckAcc::new("small-loss epoch count (rowwise)");

    let kind = cfg.kind;
    // Rows are sorted, so each parameter owns one contiguous run.
    let mut rest = rows;
    for (param_index, &value) in cfg.grid.iter().enumerate() {
        let param = format_param(kind, value);
        let len = rest.partition_point(|(_, e)| e.param_index == param_index);
        let (group, tail) = rest.split_at(len);
        rest = tail;
        // One FTL regret per seed.
        let ftl_by_seed: Vec<f64> = group
            .iter()
            .filter(|(_, e)| e.policy_index == 0)
            .map(|(_, e)| e.ftl_regret)
            .collect();
        let mean_ftl = ftl_by_seed.iter().sum::<f64>() / ftl_by_seed.len() as f64;
        reference.push(Reference {
            param: param.clone(),
            mean_ftl,
            two_ftl: 2.0 * mean_ftl,
            ratio_ftl: ratio * mean_ftl,
            g_n,
        });
        for &p in &cfg.roster {
            let cell: Vec<&(Row, Extra)> = group
                .iter()
                .filter(|(r, _)| r.policy == p.as_str())
                .collect();
            let regrets: Vec<f64> = cell.iter().map(|(r, _)| r.regret).collect();
            let (mean, sem) = mean_sem(&regrets);
            cells.push(CellSummary {
                param: param.clone(),
                policy: p.as_str(),
                count: regrets.len(),
                mean_regret: mean,
                sem,
            });
            match p {
                PolicyName::Smart if cfg.mode() == ThresholdMode::Deterministic => {
                    for (r, e) in &cell {
                        let slack = 2.0 * e.ftl_regret.min(g_n) + 1.0 + 1e-9 - r.regret;
                        det.record(slack, slack >= 0.0);
                    }
                }
                PolicyName::Smart if cell.len() >= 2 => {
                    let bound = cell
                        .iter()
                        .map(|(_, e)| ratio * e.ftl_regret.min(g_n) + 1.0)
                        .sum::<f64>()
                        / cell.len() as f64;
                    let slack = bound + 3.0 * sem - mean;
                    rand.record(slack, slack >= 0.0);
                }
                PolicyName::SmallLoss => {
                    for (_, e) in &cell {
                        if let Some((slack, epochs_ok)) = e.smallloss_bound {
                            small.record(slack, slack >= -1e-9);
                            epochs.record(if epochs_ok { 0.0 } else { -1.0 }, epochs_ok);
                        }
                    }
                }
                _ => {}
            }
        }
    }
    let checks: Vec<Check> = [det, rand, small, epochs]
        .into_iter()
        .filter(|c| c.cases > 0)
        .map(CheckAcc::finish)
        .collect();
    let pass = checks.iter().all(|c| c.pass);
    Summary {
        config: cfg.clone(),
        rows: rows.len(),
        cells,
        reference,
        checks,
        pass,
    }
}

/// Run the sweep; rows come back in (parameter, seed, policy) order.
pub fn execute(cfg: &SweepConfig, exec: Exec) -> Result<(Vec<Row>, Summary), UsageError> {
    let units = units(cfg);
    let mut rows = Vec::new();
    for part in par::map(exec, &units, |u| run_unit(cfg, u)) {
        rows.extend(part?);
    }
    // Bernoulli units are per seed; restore (parameter, seed, policy) order.
    rows.sort_by_key(|(r, e)| (e.param_index, r.seed, e.policy_index));
    let summary = summarize(cfg, &rows);
    Ok((rows.into_iter().map(|(r, _)| r).collect(), summary))
}

/// RFC 4180 CSV with LF line endings.
pub fn to_csv(rows: &[Row]) -> Result<String, UsageError> {
    let mut writer = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| UsageError::new(e.to_string()))?;
    }
    if rows.is_empty() {
        writer
            .write_record([
                "sequence_kind",
                "param",
                "seed",
                "policy",
                "regret",
                "switch_time",
                "threshold_draw",
            ])
            .map_err(|e| UsageError::new(e.to_string()))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| UsageError::new(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| UsageError::new(e.to_string()))
}

fn summary_path(cfg: &SweepConfig) -> Option<PathBuf> {
    cfg.summary.clone().or_else(|| {
        cfg.out.as_ref().map(|p| {
            let mut s = p.clone().into_os_string();
            s.push(".json");
            PathBuf::from(s)
        })
    })
}

pub fn run(args: SweepArgs) -> anyhow::Result<Status> {
    let cfg = args.resolve()?;
    let (rows, summary) = execute(&cfg, Exec::Parallel)?;
    emit(cfg.out.as_deref(), &to_csv(&rows)?)?;
    if let Some(path) = summary_path(&cfg) {
        let json = serde_json::to_string_pretty(&summary)? + "\n";
        emit(Some(Path::new(&path)), &json)?;
    }
    for check in summary.checks.iter().filter(|c| !c.pass) {
        eprintln!(
            "invariant failed: {} ({} of {} cases, min slack {})",
            check.name, check.violations, check.cases, check.min_slack
        );
    }
    Ok(Status::from_pass(summary.pass))
}
