//! Trial-level simulation of the feedback scheme, stopping-time
//! bookkeeping, and Monte Carlo aggregation.
//!
//! A trial transmits one message over the BSC with full feedback: each
//! step the encoder partitions the message set (see [`crate::encoder`]),
//! sends the true message's side, and both ends run the Bayes update on
//! the observed output. Four stopping times are recorded per trial:
//!
//! * `tau` — the operational rule: first step at which some message's
//!   posterior reaches `1−ε`. The decoder's decision is snapshotted here.
//! * `tau_theta_eps` — the genie rule: first step at which the *true*
//!   message's posterior reaches `1−ε`.
//! * `tau_theta_half` — first step at which the true message's posterior
//!   reaches 1/2 (the communication→confirmation handover).
//! * `tau_star_eps` — the position-invariant rule: first step at which
//!   `⌊U_θ/C2⌋` reaches `n = ⌈log((1−ε)/ε)/C2⌉`.
//!
//! The chain `tau ≤ tau_theta_eps ≤ tau_star_eps` holds on every path
//! (never just on average), and the implementation makes that structural:
//! all three are evaluated in log-likelihood-ratio form against the same
//! target, and the position-invariant test additionally requires the
//! genie target so float noise in the division can never reorder them.
//! The trial keeps running after `tau` fires and stops the loop only at
//! `tau_star_eps`, so every record carries all four times.
//!
//! # Which message is "true"
//!
//! The grouped belief state deliberately forgets message indices, so the
//! simulator cannot follow "message 1" through the within-group shuffling
//! of an index-addressed encoder. Two resolutions are offered:
//!
//! * [`ThetaMode::Uniform`] (default) — the true message is uniformly
//!   random. Conditioned on the observation history the true message is
//!   uniform over its weight group, so drawing its side as
//!   `Bernoulli(s1_count/group_count)` whenever its group straddles the
//!   partition reproduces the uniform-message process *exactly*; this is
//!   the mode whose statistics are quoted against the analytic bounds.
//! * [`ThetaMode::Pinned`] — a deterministic convention: the true message
//!   always occupies its group's side-1 slot when one exists. No draw is
//!   consumed, trials are reproducible from the channel stream alone, and
//!   the dense-oracle tests mirror the same convention member-for-member.
//!   Every conditional step inequality (bounded steps, regime means,
//!   stopping ordering) still holds, but the absolute stopping-time law
//!   is mildly optimistic because the pinned slot is always on the
//!   lighter side — use it for replay and equivalence checks, not for
//!   quoting rates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::belief::{uniform_init, BeliefState, DenseBelief};
use crate::bounds::{compute_bounds, confirmation_steps, confirmation_target_llr, floor_tol};
use crate::channel::{transmit, ChannelParams};
use crate::encoder::{horstein_input, horstein_likelihoods, sed_channel_input, sed_partition};
use crate::error::{Error, Result};
use crate::seeding::{derive_subseed, stream_rng, STREAM_CHANNEL, STREAM_ENCODER, STREAM_MESSAGE};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Stopping-rule parameters for one simulated point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StoppingConfig {
    /// Message-set size `M ≥ 2`.
    pub m: u64,
    /// Posterior target: stop once some posterior reaches `1−ε`.
    pub epsilon: f64,
    /// Hard per-trial step guard; exceeding it is an error, not a clamp.
    pub max_steps: u64,
}

impl StoppingConfig {
    /// Validates and constructs a configuration.
    pub fn new(m: u64, epsilon: f64, max_steps: u64) -> Result<StoppingConfig> {
        let config = StoppingConfig {
            m,
            epsilon,
            max_steps,
        };
        config.validate()?;
        Ok(config)
    }

    /// Constructs a configuration with the default safety guard of
    /// [`default_max_steps`].
    pub fn with_default_guard(
        m: u64,
        epsilon: f64,
        params: &ChannelParams,
    ) -> Result<StoppingConfig> {
        StoppingConfig::new(m, epsilon, default_max_steps(m, epsilon, params)?)
    }

    /// Re-checks the domain constraints (fields are public).
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidMessageCount(self.m));
        }
        if !self.epsilon.is_finite() || self.epsilon <= 0.0 || self.epsilon >= 0.5 {
            return Err(Error::InvalidEpsilon(self.epsilon));
        }
        debug_assert!(self.max_steps >= 1, "max_steps must be positive");
        Ok(())
    }
}

/// Default per-trial guard: 100× the analytic expected-blocklength bound
/// for the point. Generous enough never to clip realistic tails; small
/// enough that a non-terminating bug surfaces as a loud error.
pub fn default_max_steps(m: u64, epsilon: f64, params: &ChannelParams) -> Result<u64> {
    let bound = compute_bounds(m, epsilon, params)?.two_phase_upper;
    Ok((100.0 * bound).ceil() as u64)
}

/// Which encoder drives the trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    /// Grouped small-enough-difference partition encoder.
    #[default]
    Sed,
    /// Posterior-interval midpoint baseline (dense state, capped alphabet).
    Horstein,
}

impl std::fmt::Display for EncoderKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EncoderKind::Sed => write!(f, "sed"),
            EncoderKind::Horstein => write!(f, "horstein"),
        }
    }
}

/// How the true message is chosen (see the module docs).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ThetaMode {
    /// Uniformly random message, realized exactly by cohort sampling.
    #[default]
    Uniform,
    /// Deterministic side-1-slot convention (replay / mirror tests).
    Pinned,
}

impl std::fmt::Display for ThetaMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ThetaMode::Uniform => write!(f, "uniform"),
            ThetaMode::Pinned => write!(f, "pinned"),
        }
    }
}

// ---------------------------------------------------------------------------
// Per-step increment accounting
// ---------------------------------------------------------------------------

/// Running tallies of the true message's log-likelihood-ratio increments,
/// split by regime: *communication* steps start from `U_θ < 0`,
/// *confirmation* steps from `U_θ ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct IncrementSummary {
    /// Steps taken from `U_θ < 0`, with their sum and sum of squares.
    pub comm_steps: u64,
    pub comm_sum: f64,
    pub comm_sumsq: f64,
    /// Steps taken from `U_θ ≥ 0`, with their sum and sum of squares.
    pub conf_steps: u64,
    pub conf_sum: f64,
    pub conf_sumsq: f64,
    /// Confirmation steps that moved up (expected frequency `q`).
    pub conf_up: u64,
    /// Confirmation steps that moved down (expected frequency `p`).
    pub conf_down: u64,
    /// Largest `|ΔU_θ|` seen anywhere.
    pub max_abs_step: f64,
    /// Largest deviation of a confirmation step from an exact `±C2`.
    pub max_conf_step_dev: f64,
    /// Steps whose magnitude exceeded `C2` beyond float tolerance.
    pub step_bound_violations: u64,
    /// Steps spent below 0 re-climbing after a fallback (excursion time).
    pub excursion_steps_total: u64,
}

impl IncrementSummary {
    fn record(&mut self, u_before: f64, delta: f64, params: &ChannelParams) {
        let c2 = params.llr_step_c2;
        let abs = delta.abs();
        if abs > self.max_abs_step {
            self.max_abs_step = abs;
        }
        if abs > c2 * (1.0 + 1e-12) + 1e-12 {
            self.step_bound_violations += 1;
        }
        if u_before >= 0.0 {
            self.conf_steps += 1;
            self.conf_sum += delta;
            self.conf_sumsq += delta * delta;
            if delta > 0.0 {
                self.conf_up += 1;
            } else {
                self.conf_down += 1;
            }
            let dev = (abs - c2).abs();
            if dev > self.max_conf_step_dev {
                self.max_conf_step_dev = dev;
            }
        } else {
            self.comm_steps += 1;
            self.comm_sum += delta;
            self.comm_sumsq += delta * delta;
        }
    }

    /// Folds another summary into this one (order-sensitive float sums;
    /// callers fold in fixed trial order for bit-stable aggregates).
    pub fn merge(&mut self, other: &IncrementSummary) {
        self.comm_steps += other.comm_steps;
        self.comm_sum += other.comm_sum;
        self.comm_sumsq += other.comm_sumsq;
        self.conf_steps += other.conf_steps;
        self.conf_sum += other.conf_sum;
        self.conf_sumsq += other.conf_sumsq;
        self.conf_up += other.conf_up;
        self.conf_down += other.conf_down;
        self.max_abs_step = self.max_abs_step.max(other.max_abs_step);
        self.max_conf_step_dev = self.max_conf_step_dev.max(other.max_conf_step_dev);
        self.step_bound_violations += other.step_bound_violations;
        self.excursion_steps_total += other.excursion_steps_total;
    }

    /// Total recorded steps across both regimes.
    pub fn total_steps(&self) -> u64 {
        self.comm_steps + self.conf_steps
    }

    /// Mean increment over communication-regime steps.
    pub fn comm_mean(&self) -> f64 {
        self.comm_sum / self.comm_steps as f64
    }

    /// Mean increment over confirmation-regime steps.
    pub fn conf_mean(&self) -> f64 {
        self.conf_sum / self.conf_steps as f64
    }

    /// Mean increment over all steps.
    pub fn unconditional_mean(&self) -> f64 {
        (self.comm_sum + self.conf_sum) / self.total_steps() as f64
    }

    /// Standard error of the communication-regime mean.
    pub fn comm_stderr(&self) -> f64 {
        stderr_from_moments(self.comm_sum, self.comm_sumsq, self.comm_steps)
    }

    /// Standard error of the confirmation-regime mean.
    pub fn conf_stderr(&self) -> f64 {
        stderr_from_moments(self.conf_sum, self.conf_sumsq, self.conf_steps)
    }

    /// Standard error of the unconditional mean.
    pub fn unconditional_stderr(&self) -> f64 {
        stderr_from_moments(
            self.comm_sum + self.conf_sum,
            self.comm_sumsq + self.conf_sumsq,
            self.total_steps(),
        )
    }
}

fn stderr_from_moments(sum: f64, sumsq: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    let n = n as f64;
    let mean = sum / n;
    let variance = (sumsq / n - mean * mean).max(0.0);
    (variance / n).sqrt()
}

// ---------------------------------------------------------------------------
// Trial records
// ---------------------------------------------------------------------------

/// One `(U_θ before the step, ΔU_θ)` sample of an increment trace.
pub type IncrementSample = (f64, f64);

/// Everything measured in a single completed trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    /// Operational stopping time (some posterior reached `1−ε`).
    pub tau: u64,
    /// Genie stopping time (true posterior reached `1−ε`).
    pub tau_theta_eps: u64,
    /// First crossing of the true posterior above 1/2.
    pub tau_theta_half: u64,
    /// Position-invariant stopping time (the loop's exit point).
    pub tau_star_eps: u64,
    /// Whether the decoder's choice at `tau` was the true message.
    pub decoded_correctly: bool,
    /// Number of confirmation→communication returns of `U_θ`.
    pub fallback_count: u64,
    /// Regime-split increment tallies for this trial.
    pub increments: IncrementSummary,
    /// Optional per-step trace, populated when requested.
    pub increment_log: Option<Vec<IncrementSample>>,
}

/// What was measured before a trial hit its step guard; carried inside
/// [`Error::MaxStepsExceeded`] so the event can be counted, inspected,
/// and reported rather than silently dropped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartialTrial {
    /// Steps actually simulated (= the guard value).
    pub steps: u64,
    pub tau: Option<u64>,
    pub tau_theta_eps: Option<u64>,
    pub tau_theta_half: Option<u64>,
    pub fallback_count: u64,
    pub increments: IncrementSummary,
}

// ---------------------------------------------------------------------------
// Single trial
// ---------------------------------------------------------------------------

/// Runs one trial to `tau_star_eps` and returns the full record.
/// Deterministic given `trial_seed`; the channel, the encoder's internal
/// randomness, and the message draw use separate named streams.
pub fn run_trial(
    config: &StoppingConfig,
    params: &ChannelParams,
    encoder: EncoderKind,
    theta: ThetaMode,
    trial_seed: u64,
    log_increments: bool,
) -> Result<TrialRecord> {
    config.validate()?;
    match encoder {
        EncoderKind::Sed => run_trial_grouped(config, params, theta, trial_seed, log_increments),
        EncoderKind::Horstein => run_trial_dense(config, params, theta, trial_seed, log_increments),
    }
}

/// Shared stopping/bookkeeping state for both trial loops.
struct TrialTracker {
    target: f64,
    n_states: f64,
    c2: f64,
    tau: Option<u64>,
    tau_theta_eps: Option<u64>,
    tau_theta_half: Option<u64>,
    tau_star_eps: Option<u64>,
    decoded_correctly: bool,
    fallback_count: u64,
    in_excursion: bool,
    u_prev: f64,
    increments: IncrementSummary,
    log: Option<Vec<IncrementSample>>,
}

impl TrialTracker {
    fn new(config: &StoppingConfig, params: &ChannelParams, u0: f64, log: bool) -> TrialTracker {
        TrialTracker {
            target: confirmation_target_llr(config.epsilon),
            n_states: f64::from(confirmation_steps(config.epsilon, params)),
            c2: params.llr_step_c2,
            tau: None,
            tau_theta_eps: None,
            tau_theta_half: None,
            tau_star_eps: None,
            decoded_correctly: false,
            fallback_count: 0,
            in_excursion: false,
            u_prev: u0,
            increments: IncrementSummary::default(),
            log: if log { Some(Vec::new()) } else { None },
        }
    }

    /// Records one step. `u` and `max_u` are the true message's and the
    /// best message's log-likelihood ratios *after* the step; `decoded`
    /// lazily evaluates the decoder so it only runs at `tau`. Returns
    /// true when the trial is over.
    fn step(
        &mut self,
        t: u64,
        u: f64,
        max_u: f64,
        params: &ChannelParams,
        decoded: impl FnOnce() -> bool,
    ) -> bool {
        let delta = u - self.u_prev;
        self.increments.record(self.u_prev, delta, params);
        if let Some(log) = &mut self.log {
            log.push((self.u_prev, delta));
        }
        if self.in_excursion {
            self.increments.excursion_steps_total += 1;
            if u >= 0.0 {
                self.in_excursion = false;
            }
        } else if self.u_prev >= 0.0 && u < 0.0 {
            self.fallback_count += 1;
            self.in_excursion = true;
        }
        if self.tau.is_none() && max_u >= self.target {
            self.tau = Some(t);
            self.decoded_correctly = decoded();
        }
        if self.tau_theta_half.is_none() && u >= 0.0 {
            self.tau_theta_half = Some(t);
        }
        if self.tau_theta_eps.is_none() && u >= self.target {
            self.tau_theta_eps = Some(t);
        }
        // The genie conjunct is mathematically implied; it is kept so the
        // 1e−9 snap in floor_tol can never fire this rule first.
        if self.tau_star_eps.is_none()
            && u >= self.target
            && floor_tol(u / self.c2) >= self.n_states
        {
            self.tau_star_eps = Some(t);
        }
        self.u_prev = u;
        self.tau_star_eps.is_some()
    }

    fn finish(self, max_steps: u64) -> Result<TrialRecord> {
        match self.tau_star_eps {
            Some(tau_star_eps) => {
                let tau = self.tau.expect("operational rule fires by tau_star");
                let tau_theta_eps = self.tau_theta_eps.expect("genie rule fires by tau_star");
                let tau_theta_half = self
                    .tau_theta_half
                    .expect("half crossing precedes the genie rule");
                debug_assert!(tau <= tau_theta_eps && tau_theta_eps <= tau_star_eps);
                debug_assert!(tau_theta_half <= tau_theta_eps);
                Ok(TrialRecord {
                    tau,
                    tau_theta_eps,
                    tau_theta_half,
                    tau_star_eps,
                    decoded_correctly: self.decoded_correctly,
                    fallback_count: self.fallback_count,
                    increments: self.increments,
                    increment_log: self.log,
                })
            }
            None => Err(Error::MaxStepsExceeded {
                max_steps,
                partial: Box::new(PartialTrial {
                    steps: max_steps,
                    tau: self.tau,
                    tau_theta_eps: self.tau_theta_eps,
                    tau_theta_half: self.tau_theta_half,
                    fallback_count: self.fallback_count,
                    increments: self.increments,
                }),
            }),
        }
    }
}

fn run_trial_grouped(
    config: &StoppingConfig,
    params: &ChannelParams,
    theta: ThetaMode,
    trial_seed: u64,
    log_increments: bool,
) -> Result<TrialRecord> {
    let mut channel_rng = stream_rng(trial_seed, STREAM_CHANNEL);
    let mut message_rng = stream_rng(trial_seed, STREAM_MESSAGE);
    let mut state = uniform_init(config.m)?;
    let mut tracker = TrialTracker::new(config, params, state.true_llr().bits, log_increments);

    for t in 1..=config.max_steps {
        let mut partition = sed_partition(&state);
        if theta == ThetaMode::Uniform {
            // Cohort sampling: conditioned on history the true message is
            // uniform over its group, so its side follows the group's
            // split proportions.
            let g = state.theta_group_index();
            let (c0, c1) = (partition.s0_counts[g], partition.s1_counts[g]);
            partition.true_msg_side = if c0 == 0 {
                1
            } else if c1 == 0 {
                0
            } else {
                u8::from(message_rng.gen_range(0..c0 + c1) < c1)
            };
        }
        let x = sed_channel_input(&partition);
        let y = transmit(x, channel_rng.gen(), params);
        state = state.bayes_update(&partition, y, params)?;
        let done = tracker.step(
            t,
            state.true_llr().bits,
            state.max_member_llr().bits,
            params,
            || decode_grouped(&state),
        );
        if done {
            break;
        }
    }
    tracker.finish(config.max_steps)
}

/// Decoder decision on a grouped state at the operational stopping time:
/// the best message is the sole member of the highest-key group (a
/// posterior above 1/2 forces that group to be a singleton), so decoding
/// is correct iff the true message carries that key.
fn decode_grouped(state: &BeliefState) -> bool {
    let top = state.groups().last().expect("states are never empty");
    debug_assert_eq!(top.count, 1, "a >1/2 posterior forces a singleton group");
    top.count == 1 && state.theta_q_count() == top.q_count
}

fn run_trial_dense(
    config: &StoppingConfig,
    params: &ChannelParams,
    theta: ThetaMode,
    trial_seed: u64,
    log_increments: bool,
) -> Result<TrialRecord> {
    let mut channel_rng = stream_rng(trial_seed, STREAM_CHANNEL);
    let mut encoder_rng = stream_rng(trial_seed, STREAM_ENCODER);
    let theta_index = match theta {
        ThetaMode::Pinned => 0,
        ThetaMode::Uniform => {
            stream_rng(trial_seed, STREAM_MESSAGE).gen_range(0..config.m) as usize
        }
    };
    let mut dense = DenseBelief::uniform(config.m, theta_index)?;
    let mut tracker = TrialTracker::new(config, params, dense.true_llr().bits, log_increments);

    for t in 1..=config.max_steps {
        let x = horstein_input(&dense, encoder_rng.gen());
        let y = transmit(x, channel_rng.gen(), params);
        let likelihoods = horstein_likelihoods(&dense, y, params);
        dense.update_with_likelihoods(&likelihoods);
        let done = tracker.step(
            t,
            dense.true_llr().bits,
            dense.max_member_llr().bits,
            params,
            || dense.argmax() == dense.theta(),
        );
        if done {
            break;
        }
    }
    tracker.finish(config.max_steps)
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

/// Moments of all four stopping times plus error/fallback counts for one
/// sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateStats {
    /// `log2(M)` rounded to the nearest integer (exact for power-of-two
    /// alphabets, which is all the sweep driver produces).
    pub k: u32,
    pub m: u64,
    pub p: f64,
    pub epsilon: f64,
    pub encoder: EncoderKind,
    pub theta: ThetaMode,
    pub trials: u64,
    /// Seed this point's trial seeds were derived from.
    pub point_seed: u64,
    pub mean_tau: f64,
    pub stderr_tau: f64,
    pub mean_tau_theta_eps: f64,
    pub stderr_tau_theta_eps: f64,
    pub mean_tau_theta_half: f64,
    pub stderr_tau_theta_half: f64,
    pub mean_tau_star_eps: f64,
    pub stderr_tau_star_eps: f64,
    /// Trials whose decoder decision at `tau` was wrong.
    pub error_count: u64,
    /// Empirical error probability `error_count / trials`.
    pub p_e: f64,
    /// Wilson-score half width (z = 1) of the error probability.
    pub wilson_half_width: f64,
    /// Empirical rate `log2(M) / mean_tau` in bits per channel use.
    pub rate: f64,
    /// Mean fallbacks per trial.
    pub fallback_rate: f64,
    /// Mean steps per fallback excursion, when any fallback occurred.
    pub mean_excursion_steps: Option<f64>,
    /// Conditional mean increment over communication-regime steps.
    pub comm_mean_increment: f64,
    /// Conditional mean increment over confirmation-regime steps.
    pub conf_mean_increment: f64,
    /// Pooled increment tallies across all trials of the point.
    pub increments: IncrementSummary,
    /// Trials violating `tau ≤ tau_theta_eps ≤ tau_star_eps` or
    /// `tau_theta_half ≤ tau_theta_eps` (expected: structurally zero).
    pub ordering_violations: u64,
    /// Trials aborted by the step guard (excluded from every mean above).
    pub max_steps_exceeded: u64,
}

/// Wilson-score half width at one standard score for `errors` failures in
/// `trials` attempts.
pub fn wilson_half_width(errors: u64, trials: u64) -> f64 {
    assert!(trials > 0, "half width needs at least one trial");
    let n = trials as f64;
    let p_hat = errors as f64 / n;
    let z = 1.0f64;
    let z2 = z * z;
    z * (p_hat * (1.0 - p_hat) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n)
}

/// Runs all trials of one point in parallel and folds them in trial-index
/// order, so the aggregate is bit-identical regardless of worker count.
/// Guard-tripped trials are counted, not dropped and not averaged.
pub fn run_point(
    config: &StoppingConfig,
    params: &ChannelParams,
    encoder: EncoderKind,
    theta: ThetaMode,
    point_seed: u64,
    trials: u64,
) -> Result<AggregateStats> {
    config.validate()?;
    assert!(trials > 0, "a point needs at least one trial");
    let outcomes: Vec<Result<TrialRecord>> = (0..trials)
        .into_par_iter()
        .map(|trial_index| {
            run_trial(
                config,
                params,
                encoder,
                theta,
                derive_subseed(point_seed, trial_index),
                false,
            )
        })
        .collect();

    let mut sums = [0.0f64; 4];
    let mut sumsqs = [0.0f64; 4];
    let mut completed = 0u64;
    let mut error_count = 0u64;
    let mut fallback_total = 0u64;
    let mut increments = IncrementSummary::default();
    let mut ordering_violations = 0u64;
    let mut max_steps_exceeded = 0u64;
    for outcome in outcomes {
        match outcome {
            Ok(record) => {
                let ordered = record.tau <= record.tau_theta_eps
                    && record.tau_theta_eps <= record.tau_star_eps
                    && record.tau_theta_half <= record.tau_theta_eps;
                ordering_violations += u64::from(!ordered);
                let times = [
                    record.tau,
                    record.tau_theta_eps,
                    record.tau_theta_half,
                    record.tau_star_eps,
                ];
                for (i, &t) in times.iter().enumerate() {
                    let t = t as f64;
                    sums[i] += t;
                    sumsqs[i] += t * t;
                }
                completed += 1;
                error_count += u64::from(!record.decoded_correctly);
                fallback_total += record.fallback_count;
                increments.merge(&record.increments);
            }
            Err(Error::MaxStepsExceeded { .. }) => max_steps_exceeded += 1,
            Err(other) => return Err(other),
        }
    }
    assert!(
        completed > 0,
        "every trial hit the step guard; the guard or the dynamics are wrong"
    );
    let n = completed as f64;
    let mean = |i: usize| sums[i] / n;
    let stderr = |i: usize| stderr_from_moments(sums[i], sumsqs[i], completed);
    let mean_tau = mean(0);
    Ok(AggregateStats {
        k: (config.m as f64).log2().round() as u32,
        m: config.m,
        p: params.p,
        epsilon: config.epsilon,
        encoder,
        theta,
        trials,
        point_seed,
        mean_tau,
        stderr_tau: stderr(0),
        mean_tau_theta_eps: mean(1),
        stderr_tau_theta_eps: stderr(1),
        mean_tau_theta_half: mean(2),
        stderr_tau_theta_half: stderr(2),
        mean_tau_star_eps: mean(3),
        stderr_tau_star_eps: stderr(3),
        error_count,
        p_e: error_count as f64 / n,
        wilson_half_width: wilson_half_width(error_count, completed),
        rate: (config.m as f64).log2() / mean_tau,
        fallback_rate: fallback_total as f64 / n,
        mean_excursion_steps: (fallback_total > 0)
            .then(|| increments.excursion_steps_total as f64 / fallback_total as f64),
        comm_mean_increment: increments.comm_mean(),
        conf_mean_increment: increments.conf_mean(),
        increments,
        ordering_violations,
        max_steps_exceeded,
    })
}

// ---------------------------------------------------------------------------
// Sweeps
// ---------------------------------------------------------------------------

/// A rate-versus-blocklength sweep over alphabet sizes `M = 2^k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Alphabet exponents; each contributes one point with `M = 2^k`.
    pub k_values: Vec<u32>,
    pub p: f64,
    pub epsilon: f64,
    pub trials_per_point: u64,
    pub master_seed: u64,
    pub encoder: EncoderKind,
    pub theta: ThetaMode,
    /// Per-trial guard expressed as a multiple of the analytic bound.
    pub max_steps_factor: f64,
}

impl SweepConfig {
    /// A sweep with the default encoder, message mode, and guard factor.
    pub fn new(
        k_values: Vec<u32>,
        p: f64,
        epsilon: f64,
        trials_per_point: u64,
        master_seed: u64,
    ) -> SweepConfig {
        SweepConfig {
            k_values,
            p,
            epsilon,
            trials_per_point,
            master_seed,
            encoder: EncoderKind::default(),
            theta: ThetaMode::default(),
            max_steps_factor: 100.0,
        }
    }
}

/// Runs one aggregate per `k`. Point seeds are derived from the master
/// seed by point index, and trial seeds from the point seed by trial
/// index, so any subset of points can be reproduced in isolation.
pub fn run_sweep(config: &SweepConfig) -> Result<Vec<AggregateStats>> {
    assert!(
        config.max_steps_factor >= 1.0,
        "a guard below the bound itself would bias tails"
    );
    let params = crate::channel::derive_params(config.p)?;
    config
        .k_values
        .iter()
        .enumerate()
        .map(|(point_index, &k)| {
            let m = 1u64
                .checked_shl(k)
                .ok_or(Error::InvalidMessageCount(u64::MAX))?;
            let bound = compute_bounds(m, config.epsilon, &params)?.two_phase_upper;
            let max_steps = (config.max_steps_factor * bound).ceil() as u64;
            let stopping = StoppingConfig::new(m, config.epsilon, max_steps)?;
            run_point(
                &stopping,
                &params,
                config.encoder,
                config.theta,
                derive_subseed(config.master_seed, point_index as u64),
                config.trials_per_point,
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Increment-law verification
// ---------------------------------------------------------------------------

/// One named empirical check with its outcome and the measured margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Report of the increment-law checks over a batch of trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementReport {
    /// Pooled tallies the checks were computed from.
    pub increments: IncrementSummary,
    pub trials: u64,
    pub fallback_total: u64,
    /// Mean excursion length per fallback, when any occurred.
    pub mean_excursion_steps: Option<f64>,
    /// Analytic ceiling on the mean excursion length used by the
    /// two-phase bound: `1 + (C1+C2)/C`. Informational comparison only.
    pub excursion_bound: f64,
    pub checks: Vec<CheckResult>,
}

impl IncrementReport {
    /// True iff every check passed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Evaluates the six step-law checks against pooled increment tallies:
///
/// 1. every step satisfies `|ΔU_θ| ≤ C2`;
/// 2. confirmation-regime steps are exactly `±C2`;
/// 3. their up-frequency matches `q` within 3 binomial standard errors;
/// 4. their conditional mean matches `C1 = (q−p)·C2` within 3 standard
///    errors;
/// 5. the communication-regime conditional mean is at least `C` minus 3
///    standard errors;
/// 6. the unconditional mean lies in `[C, C1]` widened by 3 standard
///    errors.
///
/// The tallies may come from a single [`run_point`] call or be merged
/// across many (see [`IncrementSummary::merge`]); the statistical checks
/// only sharpen as more steps are pooled.
pub fn increment_checks(inc: &IncrementSummary, params: &ChannelParams) -> Vec<CheckResult> {
    let c = params.capacity_c;
    let c1 = params.kl_c1;
    let mut checks = Vec::new();

    checks.push(CheckResult {
        name: "bounded_step".to_string(),
        passed: inc.step_bound_violations == 0,
        detail: format!(
            "max |dU| = {:.12} vs C2 = {:.12}, violations = {}",
            inc.max_abs_step, params.llr_step_c2, inc.step_bound_violations
        ),
    });

    checks.push(CheckResult {
        name: "confirmation_steps_exact".to_string(),
        passed: inc.conf_steps > 0 && inc.max_conf_step_dev < 1e-9,
        detail: format!(
            "max | |dU| - C2 | = {:.3e} over {} confirmation steps",
            inc.max_conf_step_dev, inc.conf_steps
        ),
    });

    let up_freq = inc.conf_up as f64 / inc.conf_steps as f64;
    let binom_stderr = (params.p * params.q / inc.conf_steps as f64).sqrt();
    checks.push(CheckResult {
        name: "confirmation_up_frequency".to_string(),
        passed: (up_freq - params.q).abs() <= 3.0 * binom_stderr,
        detail: format!(
            "up frequency {up_freq:.6} vs q = {:.6} (3 sigma = {:.6})",
            params.q,
            3.0 * binom_stderr
        ),
    });

    let conf_gap = (inc.conf_mean() - c1).abs();
    checks.push(CheckResult {
        name: "confirmation_mean".to_string(),
        passed: conf_gap <= 3.0 * inc.conf_stderr(),
        detail: format!(
            "conditional mean {:.6} vs C1 = {c1:.6} (3 sigma = {:.6})",
            inc.conf_mean(),
            3.0 * inc.conf_stderr()
        ),
    });

    checks.push(CheckResult {
        name: "communication_mean".to_string(),
        passed: inc.comm_steps > 0 && inc.comm_mean() >= c - 3.0 * inc.comm_stderr(),
        detail: format!(
            "conditional mean {:.6} vs C = {c:.6} (3 sigma = {:.6})",
            inc.comm_mean(),
            3.0 * inc.comm_stderr()
        ),
    });

    let overall = inc.unconditional_mean();
    let overall_sigma = 3.0 * inc.unconditional_stderr();
    checks.push(CheckResult {
        name: "unconditional_mean".to_string(),
        passed: overall >= c - overall_sigma && overall <= c1 + overall_sigma,
        detail: format!("mean {overall:.6} vs [C, C1] = [{c:.6}, {c1:.6}]"),
    });

    checks
}

/// Runs `trials` trials of the partition encoder and applies
/// [`increment_checks`] to the pooled step tallies.
///
/// The report also carries the mean fallback-excursion length next to its
/// analytic ceiling `1 + (C1+C2)/C` for inspection (not a pass/fail item:
/// the ceiling concerns the full return time, and a trial that ends at
/// the final stopping rule can truncate its last excursion).
pub fn verify_increments(
    config: &StoppingConfig,
    params: &ChannelParams,
    trials: u64,
    master_seed: u64,
) -> Result<IncrementReport> {
    let stats = run_point(
        config,
        params,
        EncoderKind::Sed,
        ThetaMode::Uniform,
        master_seed,
        trials,
    )?;
    let inc = stats.increments;
    let checks = increment_checks(&inc, params);

    Ok(IncrementReport {
        increments: inc,
        trials,
        fallback_total: (stats.fallback_rate * stats.trials as f64).round() as u64,
        mean_excursion_steps: stats.mean_excursion_steps,
        excursion_bound: 1.0 + (params.kl_c1 + params.llr_step_c2) / params.capacity_c,
        checks,
    })
}
