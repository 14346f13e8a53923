//! Instance-optimal online learning.
//!
//! [`smart`] switches once from follow-the-leader to a worst-case policy when
//! FTL's anytime regret crosses a (possibly randomized) threshold.
//! [`smallloss`] extends that to small-loss bounds by doubling epochs.
//! [`policies`] holds FTL, Hedge and Cover's exact minimax binary predictor;
//! [`analysis`] holds the random-walk machinery behind the lower bound.

// `!(x > 0.0)` is the NaN-rejecting form of `x <= 0.0`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod numeric;
pub mod par;
pub mod policies;
pub mod protocol;
pub mod sequences;
pub mod smallloss;
pub mod smart;

pub use error::{Error, Result};
pub use par::Exec;
pub use protocol::{
    expected_round_loss, run_policy, ActionDistribution, CumulativeLoss, LossMatrix, Policy,
    RunRecord,
};
