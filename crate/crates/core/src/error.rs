//! Error types shared across the crate.

use thiserror::Error;

use crate::sim::PartialTrial;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong when configuring or running the toolkit.
///
/// Numeric preconditions are validated once, at the boundary where a value
/// enters the system (channel construction, stopping configuration, solver
/// specs); downstream code trusts validated types.
#[derive(Debug, Error)]
pub enum Error {
    /// Crossover probability outside the open interval (0, 1/2).
    ///
    /// The analysis assumes the channel is noisy but better than a coin
    /// flip. A caller holding p > 1/2 should flip the output labels and
    /// pass 1−p instead.
    #[error("crossover probability must lie in (0, 1/2) and be finite, got {0}")]
    InvalidCrossover(f64),

    /// Message-set size below the smallest meaningful alphabet.
    #[error("message count must be at least 2, got {0}")]
    InvalidMessageCount(u64),

    /// Target error probability outside (0, 1/2).
    #[error("error tolerance must lie in (0, 1/2), got {0}")]
    InvalidEpsilon(f64),

    /// A partition does not line up with the belief state it claims to
    /// split: wrong group count, per-group members that do not sum to the
    /// group size, an empty side, or the true message placed on a side with
    /// no members of its group.
    #[error("partition inconsistent with belief state: {0}")]
    PartitionMismatch(String),

    /// The midpoint-interval baseline encoder operates on a dense posterior
    /// vector and is capped at a moderate alphabet size.
    #[error("dense baseline encoder supports at most {limit} messages, got {m}")]
    DenseLimitExceeded { m: u64, limit: u64 },

    /// First-passage chain length must be positive.
    #[error("first-passage chain needs at least one transient state, got n = {0}")]
    InvalidChainLength(u32),

    /// Self-loop weight of the leftmost chain state must be finite and
    /// nonnegative.
    #[error("self-loop weight must be finite and nonnegative, got {0}")]
    InvalidSelfLoopWeight(f64),

    /// The general blocklength bound contains log₂ log₂(M/ε), which is only
    /// defined when log₂(M/ε) > 1.
    #[error("general upper bound undefined: log2(M/epsilon) must exceed 1, got M = {m}, epsilon = {epsilon}")]
    LogLogDomain { m: u64, epsilon: f64 },

    /// A trial ran past its safety guard without reaching the final
    /// stopping rule. The partial record is preserved so that callers can
    /// count and report these events instead of silently dropping them.
    #[error("trial exceeded max_steps = {max_steps} before stopping")]
    MaxStepsExceeded {
        max_steps: u64,
        partial: Box<PartialTrial>,
    },
}
