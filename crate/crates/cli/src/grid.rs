//! Parsing of sweep grids and enumerated option values.

use std::fmt;
use std::str::FromStr;

/// Digits kept when materializing a fractional grid, so `0.05 * 3` prints as
/// `0.15`.
const GRID_DECIMALS: i32 = 12;

/// `a:b:step` (inclusive) or `v1,v2,...`.
pub fn parse_real_grid(spec: &str) -> Result<Vec<f64>, String> {
    let values = if let Some((start, rest)) = spec.split_once(':') {
        let (end, step) = rest
            .split_once(':')
            .ok_or_else(|| format!("range {spec:?} must be start:end:step"))?;
        let (start, end, step) = (real(start)?, real(end)?, real(step)?);
        if !(step > 0.0) || end < start {
            return Err(format!("range {spec:?} needs step > 0 and end >= start"));
        }
        let count = ((end - start) / step + 1e-9).floor() as usize + 1;
        let scale = 10f64.powi(GRID_DECIMALS);
        (0..count)
            .map(|i| ((start + i as f64 * step) * scale).round() / scale)
            .collect()
    } else {
        spec.split(',').map(real).collect::<Result<Vec<_>, _>>()?
    };
    if values.is_empty() {
        return Err("grid is empty".into());
    }
    Ok(values)
}

fn real(s: &str) -> Result<f64, String> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| format!("{s:?} is not a number"))?;
    if !v.is_finite() {
        return Err(format!("{s:?} is not finite"));
    }
    Ok(v)
}

/// Like [`parse_real_grid`] but every value must be a nonnegative integer.
pub fn parse_int_grid(spec: &str) -> Result<Vec<usize>, String> {
    parse_real_grid(spec)?
        .into_iter()
        .map(|v| {
            if v >= 0.0 && v.fract() == 0.0 {
                Ok(v as usize)
            } else {
                Err(format!("{v} is not a nonnegative integer"))
            }
        })
        .collect()
}

macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown value {other:?}; expected one of: {}",
                        [$($text),+].join(", ")
                    )),
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

named_enum!(SequenceKind {
    Bernoulli => "bernoulli",
    LeadChange => "lead-change",
    Alternating => "alternating",
});

named_enum!(
    /// Roster entries of a sweep.
    PolicyName {
        Ftl => "ftl",
        Cover => "cover",
        Hedge => "hedge",
        Smart => "smart",
        SmallLoss => "smallloss",
    }
);

named_enum!(ThresholdArg {
    Deterministic => "deterministic",
    Randomized => "randomized",
});

named_enum!(BoundArg {
    Exact => "exact",
    Asymptotic => "asymptotic",
});

named_enum!(
    /// Verification suites.
    Suite {
        Identity => "identity",
        Cover => "cover",
        Crossings => "crossings",
        LowerBound => "lowerbound",
        SmallLoss => "smallloss",
        All => "all",
    }
);

named_enum!(
    /// Sequences `gen` can write.
    GenKind {
        Bernoulli => "bernoulli",
        LeadChange => "lead-change",
        Alternating => "alternating",
        Uniform => "uniform",
    }
);

named_enum!(GenFormat {
    Bits => "bits",
    Losses => "losses",
});

/// Comma-separated roster without duplicates, in the given order.
pub fn parse_roster(spec: &str) -> Result<Vec<PolicyName>, String> {
    let mut roster = Vec::new();
    for part in spec.split(',') {
        let p: PolicyName = part.parse()?;
        if roster.contains(&p) {
            return Err(format!("policy {p} listed twice"));
        }
        roster.push(p);
    }
    Ok(roster)
}
