//! Simulator and analytic toolkit for variable-length coding over the
//! binary symmetric channel with full noiseless feedback.
//!
//! The transmitter sends one of `M` messages across a BSC with crossover
//! probability `p < 1/2` and sees every channel output; it keeps
//! re-partitioning the message set so that the two halves carry as equal
//! posterior mass as possible, sends the true message's half, and both
//! ends run the same Bayes update. Transmission stops the first time some
//! message's posterior reaches `1−ε`. This crate provides:
//!
//! * [`channel`] — the BSC and its three constants: capacity `C`, the
//!   per-step KL divergence `C1`, and the maximum log-likelihood step
//!   `C2 = log2(q/p)`.
//! * [`belief`] — exact posterior tracking. After `t` steps every
//!   posterior is `(1/M)·q^a·p^(t−a)` for some integer `a`, so beliefs
//!   are stored as weight groups keyed by `a` and updates cost `O(t)`
//!   regardless of `M`; a dense companion representation serves as the
//!   brute-force oracle and powers the baseline encoder.
//! * [`encoder`] — the small-enough-difference (SED) partitioner and the
//!   classical posterior-interval (Horstein) baseline.
//! * [`sim`] — trial simulation with four stopping times, regime-split
//!   increment statistics, deterministic parallel sweeps, and the
//!   empirical checks behind the analysis (bounded steps, `±C2`
//!   confirmation walk, regime conditional means).
//! * [`firstpassage`] — expected absorption times of the confirmation
//!   random walk: closed form, an independent linear-system oracle, an
//!   exact-rational variant of both, and a Monte Carlo cross-check.
//! * [`bounds`] — the four analytic expected-blocklength bounds, the
//!   stop-feedback baseline rate curve, and the crossover threshold
//!   `ε*(p)` between the two tightest bounds.
//! * [`seeding`] — splittable deterministic RNG streams so sweeps are
//!   bit-reproducible at any worker count.
//!
//! Everything uses base-2 logarithms; rates are bits per channel use.

pub mod belief;
pub mod bounds;
pub mod channel;
pub mod encoder;
pub mod error;
pub mod firstpassage;
pub mod seeding;
pub mod sim;

pub use belief::{uniform_init, BeliefState, DenseBelief, Group, LogLikelihoodRatio};
pub use bounds::{
    compare_bounds, compute_bounds, epsilon_star, BoundSet, ComparisonPoint, ComparisonReport,
    EpsilonStar,
};
pub use channel::{derive_params, transmit, ChannelParams};
pub use encoder::{check_partition, sed_channel_input, sed_partition, Partition};
pub use error::{Error, Result};
pub use firstpassage::{
    simulate_chain, solve_closed_form, solve_closed_form_exact, solve_linear_system,
    solve_linear_system_exact, ChainSimulation, FirstPassageResult, FirstPassageSpec,
};
pub use sim::{
    increment_checks, run_point, run_sweep, run_trial, verify_increments, AggregateStats,
    CheckResult, EncoderKind, IncrementReport, IncrementSummary, PartialTrial, StoppingConfig,
    SweepConfig, ThetaMode, TrialRecord,
};
