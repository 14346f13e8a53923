//! Baseline policies: follow-the-leader, exponential weights, and Cover's
//! exact minimax predictor for binary sequences.

mod cover;
mod ftl;
mod hedge;

pub use cover::{cover_action, rademacher_fn, Cover, COVER_MAX_HORIZON};
pub use ftl::{ftl_action, Ftl};
pub use hedge::{hedge_action, Hedge, HedgeConfig, LearningRate, DEFAULT_KAPPA};
