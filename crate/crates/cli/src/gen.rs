//! `smart gen`: write a generated sequence to a file.
//!
//! `bits` writes one line of `0`/`1`; `losses` writes the loss-matrix text
//! format. Uniform losses exist only in the `losses` format.

use std::path::PathBuf;

use clap::Args;

use smart_core::sequences::{
    binary_to_losses, format_losses, gen_alternating, gen_bernoulli, gen_lead_change,
    gen_uniform_losses,
};

use crate::config::ConfigFile;
use crate::grid::{GenFormat, GenKind};
use crate::{emit, Common, Status, UsageError};

#[derive(Debug, Clone, Args)]
pub struct GenArgs {
    #[command(flatten)]
    pub common: Common,
    /// bernoulli, lead-change, alternating or uniform [default: bernoulli]
    #[arg(long)]
    pub kind: Option<GenKind>,
    /// Horizon [default: 1000]
    #[arg(long)]
    pub n: Option<usize>,
    /// Bernoulli parameter [default: 0.5]
    #[arg(long)]
    pub p: Option<f64>,
    /// Lead changes for lead-change [default: 1]
    #[arg(long)]
    pub c: Option<usize>,
    /// Experts for uniform [default: 2]
    #[arg(long)]
    pub m: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// bits or losses [default: bits, losses for uniform]
    #[arg(long)]
    pub format: Option<GenFormat>,
    /// Output path
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// The file contents `args` describe, and where they go.
pub fn render(args: GenArgs) -> Result<(String, PathBuf), UsageError> {
    let mut file = ConfigFile::load(args.common.config.as_deref())?;
    let kind = file.merge(args.kind, "kind")?.unwrap_or(GenKind::Bernoulli);
    let n = file.merge(args.n, "n")?.unwrap_or(1000);
    let p = file.merge(args.p, "p")?.unwrap_or(0.5);
    let c = file.merge(args.c, "c")?.unwrap_or(1);
    let m = file.merge(args.m, "m")?.unwrap_or(2);
    let seed = file.merge(args.seed, "seed")?.unwrap_or(0);
    let format = file.merge(args.format, "format")?;
    let out = file.merge(args.out, "out")?;
    file.finish()?;
    let out = out.ok_or_else(|| UsageError::new("gen needs --out"))?;
    if n == 0 {
        return Err(UsageError::new("n must be positive"));
    }

    let bits = match kind {
        GenKind::Bernoulli => Some(gen_bernoulli(n, p, seed)?),
        GenKind::LeadChange => Some(gen_lead_change(n, c)?),
        GenKind::Alternating => Some(gen_alternating(n)),
        GenKind::Uniform => None,
    };
    let text = match (bits, format) {
        (Some(y), None | Some(GenFormat::Bits)) => format!("{y}\n"),
        (Some(y), Some(GenFormat::Losses)) => format_losses(&binary_to_losses(&y)?),
        (None, None | Some(GenFormat::Losses)) => format_losses(&gen_uniform_losses(n, m, seed)?),
        (None, Some(GenFormat::Bits)) => {
            return Err(UsageError::new("uniform losses have no bits format"))
        }
    };
    Ok((text, out))
}

pub fn run(args: GenArgs) -> anyhow::Result<Status> {
    let (text, out) = render(args)?;
    emit(Some(&out), &text)?;
    Ok(Status::Pass)
}
