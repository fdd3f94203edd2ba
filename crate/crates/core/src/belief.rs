//! Bayesian posterior tracking over the message set.
//!
//! The receiver's belief after `t` channel outputs is a posterior vector
//! `ρ(t)` over `M` messages. Tracking it densely costs O(M) per step, which
//! is hopeless at `M = 2^25`. This module exploits the structure of the BSC:
//! every update multiplies a message's unnormalized weight by either `q`
//! (its side of the partition matched the output) or `p` (it did not), so
//! after `t` steps every weight has the form
//!
//! ```text
//!     w = (1/M) · q^a · p^(t−a)
//! ```
//!
//! for an integer `a` — the number of `q`-multiplications in that message's
//! history. Messages sharing the same `a` are interchangeable, so the state
//! is a short list of groups keyed by `a` with a member count. After `t`
//! steps there are at most `t + 1` groups regardless of `M`.
//!
//! Merging is exact: two groups coincide iff their integer keys match, so
//! no floating-point tolerance is involved. Group log-weights are
//! recomputed canonically from the integer key each step, which keeps them
//! bit-identical across different multiplication orders. Normalization is
//! implicit — all queries are ratios evaluated with log-sum-exp — so
//! nothing underflows even when `t` is large.
//!
//! The distinguished transmitted message θ is tracked by its own key. Where
//! an individual identity inside a group is needed (partitioning), θ is by
//! convention the *last* member of its group to be assigned; see the
//! encoder module.
//!
//! A [`DenseBelief`] companion type stores the full posterior vector. It
//! backs the midpoint-interval baseline encoder (which is inherently
//! position-dependent) and serves as the brute-force oracle the grouped
//! representation is tested against.

use serde::{Deserialize, Serialize};

use crate::channel::ChannelParams;
use crate::encoder::Partition;
use crate::error::{Error, Result};

/// Messages whose posteriors are identical because they share the same
/// multiplication history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Group {
    /// Number of `q`-multiplications in this group's history (the group
    /// key). The number of `p`-multiplications is `t − q_count`.
    pub q_count: u32,
    /// How many messages share this history.
    pub count: u64,
    /// Canonical unnormalized log₂-weight
    /// `−log₂ M + q_count·log₂ q + (t − q_count)·log₂ p` of one member.
    pub log_weight: f64,
}

/// Grouped posterior state over `M` messages after `step` channel outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefState {
    step: u32,
    /// Non-empty, sorted by strictly ascending `q_count` (equivalently by
    /// ascending posterior), counts ≥ 1 summing to `m`.
    groups: Vec<Group>,
    /// Group key of the transmitted message θ.
    theta_q_count: u32,
    m: u64,
}

/// Log-likelihood ratio `U = log₂(ρ/(1−ρ))` of a single message's
/// posterior, in bits.
///
/// `U ≥ 0` iff `ρ ≥ 1/2`; the sign splits the scheme's two regimes
/// (communication below zero, confirmation at or above).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LogLikelihoodRatio {
    /// The ratio value in bits.
    pub bits: f64,
}

impl LogLikelihoodRatio {
    /// Evaluates `log₂(ρ/(1−ρ))`, accurate for ρ near both endpoints.
    pub fn from_posterior(rho: f64) -> Self {
        debug_assert!((0.0..=1.0).contains(&rho));
        let bits = (rho.ln() - (-rho).ln_1p()) / std::f64::consts::LN_2;
        LogLikelihoodRatio { bits }
    }

    /// Inverts the map: `ρ = 1/(1 + 2^{−U})`.
    pub fn posterior(self) -> f64 {
        1.0 / (1.0 + (-self.bits).exp2())
    }

    /// Whether this value sits in the confirmation regime (`U ≥ 0`).
    pub fn is_confirmation(self) -> bool {
        self.bits >= 0.0
    }
}

/// Builds the uniform prior over `m ≥ 2` messages: a single group with
/// weight `1/m` containing every message including θ.
pub fn uniform_init(m: u64) -> Result<BeliefState> {
    if m < 2 {
        return Err(Error::InvalidMessageCount(m));
    }
    let log_weight = -(m as f64).log2();
    Ok(BeliefState {
        step: 0,
        groups: vec![Group {
            q_count: 0,
            count: m,
            log_weight,
        }],
        theta_q_count: 0,
        m,
    })
}

impl BeliefState {
    /// Builds a state directly from `(q_count, count)` pairs, for synthetic
    /// states in tests and benchmarks.
    ///
    /// Keys must be strictly ascending and at most `step`; counts must be
    /// positive and sum to at least 2; `theta_q_count` must be one of the
    /// keys. Log-weights are derived canonically from the keys.
    pub fn from_group_spec(
        step: u32,
        groups: &[(u32, u64)],
        theta_q_count: u32,
        params: &ChannelParams,
    ) -> Result<BeliefState> {
        let m: u64 = groups.iter().map(|&(_, c)| c).sum();
        if m < 2 {
            return Err(Error::InvalidMessageCount(m));
        }
        let log_p = params.p.log2();
        let log_q = params.q.log2();
        let minus_log_m = -(m as f64).log2();
        let mut built = Vec::with_capacity(groups.len());
        let mut theta_seen = false;
        for (i, &(a, c)) in groups.iter().enumerate() {
            assert!(a <= step, "group key {a} exceeds step {step}");
            assert!(c >= 1, "group counts must be positive");
            if i > 0 {
                assert!(a > groups[i - 1].0, "group keys must be strictly ascending");
            }
            theta_seen |= a == theta_q_count;
            built.push(Group {
                q_count: a,
                count: c,
                log_weight: minus_log_m + a as f64 * log_q + (step - a) as f64 * log_p,
            });
        }
        assert!(
            theta_seen,
            "theta_q_count {theta_q_count} is not a group key"
        );
        Ok(BeliefState {
            step,
            groups: built,
            theta_q_count,
            m,
        })
    }

    /// Channel outputs incorporated so far.
    pub fn step(&self) -> u32 {
        self.step
    }

    /// Total message count `M`.
    pub fn total_messages(&self) -> u64 {
        self.m
    }

    /// The posterior groups, ascending in `q_count` (and thus in
    /// posterior value).
    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// Group key of the transmitted message.
    pub fn theta_q_count(&self) -> u32 {
        self.theta_q_count
    }

    /// Index into [`Self::groups`] of θ's group.
    pub fn theta_group_index(&self) -> usize {
        self.groups
            .binary_search_by_key(&self.theta_q_count, |g| g.q_count)
            .expect("theta's group must exist")
    }

    /// log₂ of the unnormalized total weight, via log-sum-exp.
    pub fn log_normalizer(&self) -> f64 {
        self.log_sum(None)
    }

    /// Posterior of one member of group `idx`.
    pub fn member_posterior(&self, idx: usize) -> f64 {
        (self.groups[idx].log_weight - self.log_normalizer()).exp2()
    }

    /// Largest single-message posterior (a member of the last group).
    pub fn max_posterior(&self) -> f64 {
        self.member_posterior(self.groups.len() - 1)
    }

    /// Posterior of the transmitted message.
    pub fn true_posterior(&self) -> f64 {
        self.member_posterior(self.theta_group_index())
    }

    /// Σ count·ρ over groups; 1 up to roundoff. Exposed for invariant
    /// checks.
    pub fn posterior_sum(&self) -> f64 {
        let log_z = self.log_normalizer();
        self.groups
            .iter()
            .map(|g| g.count as f64 * (g.log_weight - log_z).exp2())
            .sum()
    }

    /// Log-likelihood ratio of one member of group `idx`, computed as
    /// `log₂(w / (Z − w))` where the excluded-mass sum `Z − w` is a fresh
    /// log-sum-exp over everyone else. This stays exact when the member
    /// holds nearly all the mass, where forming `1 − ρ` would cancel.
    pub fn member_llr(&self, idx: usize) -> LogLikelihoodRatio {
        let bits = self.groups[idx].log_weight - self.log_sum(Some(idx));
        LogLikelihoodRatio { bits }
    }

    /// `U_θ`, the log-likelihood ratio of the transmitted message.
    pub fn true_llr(&self) -> LogLikelihoodRatio {
        self.member_llr(self.theta_group_index())
    }

    /// Log-likelihood ratio of the best-placed message; `max ρ ≥ ρ*` is
    /// equivalently `max_member_llr ≥ log₂(ρ*/(1−ρ*))`.
    pub fn max_member_llr(&self) -> LogLikelihoodRatio {
        self.member_llr(self.groups.len() - 1)
    }

    /// log₂ Σ count·2^{log_weight}, with one member of group `exclude`
    /// removed when given.
    fn log_sum(&self, exclude: Option<usize>) -> f64 {
        let effective = |i: usize, g: &Group| -> f64 {
            if exclude == Some(i) {
                (g.count - 1) as f64
            } else {
                g.count as f64
            }
        };
        let mut max_term = f64::NEG_INFINITY;
        for (i, g) in self.groups.iter().enumerate() {
            let c = effective(i, g);
            if c > 0.0 {
                let term = g.log_weight + c.log2();
                if term > max_term {
                    max_term = term;
                }
            }
        }
        debug_assert!(max_term.is_finite(), "excluding one member must leave mass");
        let mut acc = 0.0;
        for (i, g) in self.groups.iter().enumerate() {
            let c = effective(i, g);
            if c > 0.0 {
                acc += (g.log_weight + c.log2() - max_term).exp2();
            }
        }
        max_term + acc.log2()
    }

    /// Incorporates channel output `y` given the partition used for the
    /// transmission.
    ///
    /// Members on side `y` multiply their weight by `q`, the rest by `p`;
    /// groups whose integer histories now coincide are merged exactly, and
    /// θ follows its recorded side.
    ///
    /// # Errors
    ///
    /// Rejects partitions that do not line up with this state's groups.
    pub fn bayes_update(
        &self,
        partition: &Partition,
        y: u8,
        params: &ChannelParams,
    ) -> Result<BeliefState> {
        debug_assert!(y <= 1);
        let n = self.groups.len();
        if partition.s0_counts.len() != n || partition.s1_counts.len() != n {
            return Err(Error::PartitionMismatch(format!(
                "partition covers {} groups, state has {n}",
                partition.s0_counts.len()
            )));
        }
        let mut total_s0 = 0u64;
        let mut total_s1 = 0u64;
        for (i, g) in self.groups.iter().enumerate() {
            let (s0, s1) = (partition.s0_counts[i], partition.s1_counts[i]);
            if s0 + s1 != g.count {
                return Err(Error::PartitionMismatch(format!(
                    "group {i} has {} members but the partition assigns {}",
                    g.count,
                    s0 + s1
                )));
            }
            total_s0 += s0;
            total_s1 += s1;
        }
        if total_s0 == 0 || total_s1 == 0 {
            return Err(Error::PartitionMismatch(
                "both sides of the partition must be non-empty".to_string(),
            ));
        }
        let theta_idx = self.theta_group_index();
        let theta_side_count = if partition.true_msg_side == 0 {
            partition.s0_counts[theta_idx]
        } else {
            partition.s1_counts[theta_idx]
        };
        if theta_side_count == 0 {
            return Err(Error::PartitionMismatch(format!(
                "true message placed on side {} but its group has no members there",
                partition.true_msg_side
            )));
        }

        // Members whose side equals y multiply by q: their q_count
        // increments. The two contribution streams (unshifted keys from the
        // non-matching side, keys+1 from the matching side) are each
        // ascending, so a two-pointer merge produces the new sorted groups.
        let matching = |i: usize| -> u64 {
            if y == 0 {
                partition.s0_counts[i]
            } else {
                partition.s1_counts[i]
            }
        };
        let other = |i: usize| -> u64 {
            if y == 0 {
                partition.s1_counts[i]
            } else {
                partition.s0_counts[i]
            }
        };
        let new_step = self.step + 1;
        let log_p = params.p.log2();
        let log_q = params.q.log2();
        let minus_log_m = -(self.m as f64).log2();
        let canonical =
            |a: u32| -> f64 { minus_log_m + a as f64 * log_q + (new_step - a) as f64 * log_p };

        let mut merged: Vec<Group> = Vec::with_capacity(n + 1);
        let push = |a: u32, c: u64, merged: &mut Vec<Group>| {
            if c == 0 {
                return;
            }
            if let Some(last) = merged.last_mut() {
                if last.q_count == a {
                    last.count += c;
                    return;
                }
            }
            merged.push(Group {
                q_count: a,
                count: c,
                log_weight: canonical(a),
            });
        };
        let (mut i, mut k) = (0usize, 0usize);
        while i < n || k < n {
            let key_i = if i < n {
                self.groups[i].q_count
            } else {
                u32::MAX
            };
            let key_k = if k < n {
                self.groups[k].q_count + 1
            } else {
                u32::MAX
            };
            if key_i <= key_k {
                push(key_i, other(i), &mut merged);
                i += 1;
            } else {
                push(key_k, matching(k), &mut merged);
                k += 1;
            }
        }

        let theta_q_count = self.theta_q_count + u32::from(partition.true_msg_side == y);
        debug_assert!(merged.len() as u64 <= new_step as u64 + 1);
        debug_assert!(merged.iter().map(|g| g.count).sum::<u64>() == self.m);
        debug_assert!(merged
            .binary_search_by_key(&theta_q_count, |g| g.q_count)
            .is_ok());
        Ok(BeliefState {
            step: new_step,
            groups: merged,
            theta_q_count,
            m: self.m,
        })
    }
}

// ---------------------------------------------------------------------------
// Dense companion state
// ---------------------------------------------------------------------------

/// Largest alphabet the dense representation accepts.
pub const DENSE_LIMIT: u64 = 1 << 16;

/// Full posterior vector over a small message set, with θ at a fixed index.
///
/// Used by the midpoint-interval baseline encoder (message *position* on
/// the unit interval matters there) and as the test oracle for the grouped
/// representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseBelief {
    posteriors: Vec<f64>,
    theta: usize,
}

impl DenseBelief {
    /// Uniform prior over `m` messages with the transmitted message at
    /// index `theta`.
    pub fn uniform(m: u64, theta: usize) -> Result<DenseBelief> {
        if m < 2 {
            return Err(Error::InvalidMessageCount(m));
        }
        if m > DENSE_LIMIT {
            return Err(Error::DenseLimitExceeded {
                m,
                limit: DENSE_LIMIT,
            });
        }
        assert!((theta as u64) < m, "theta index {theta} out of range");
        Ok(DenseBelief {
            posteriors: vec![1.0 / m as f64; m as usize],
            theta,
        })
    }

    /// The posterior vector (sums to 1).
    pub fn posteriors(&self) -> &[f64] {
        &self.posteriors
    }

    /// Index of the transmitted message.
    pub fn theta(&self) -> usize {
        self.theta
    }

    /// Multiplies each posterior by its likelihood `P(y | θ = i)` and
    /// renormalizes.
    pub fn update_with_likelihoods(&mut self, likelihoods: &[f64]) {
        assert_eq!(likelihoods.len(), self.posteriors.len());
        let mut z = 0.0;
        for (w, lik) in self.posteriors.iter_mut().zip(likelihoods) {
            debug_assert!(*lik >= 0.0 && lik.is_finite());
            *w *= lik;
            z += *w;
        }
        debug_assert!(z > 0.0, "posterior mass vanished");
        for w in &mut self.posteriors {
            *w /= z;
        }
    }

    /// Largest posterior value.
    pub fn max_posterior(&self) -> f64 {
        self.posteriors
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index attaining the largest posterior; ties resolve to the lowest
    /// index, a deliberate deterministic choice.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.posteriors.iter().enumerate() {
            if w > self.posteriors[best] {
                best = i;
            }
        }
        best
    }

    /// Posterior of the transmitted message.
    pub fn true_posterior(&self) -> f64 {
        self.posteriors[self.theta]
    }

    /// `U` of message `i`, with `1 − ρ` formed as the explicit sum over
    /// the other messages.
    pub fn member_llr(&self, i: usize) -> LogLikelihoodRatio {
        let others: f64 = self
            .posteriors
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, &w)| w)
            .sum();
        LogLikelihoodRatio {
            bits: (self.posteriors[i] / others).log2(),
        }
    }

    /// `U_θ` of the transmitted message.
    pub fn true_llr(&self) -> LogLikelihoodRatio {
        self.member_llr(self.theta)
    }

    /// `U` of the best-placed message.
    pub fn max_member_llr(&self) -> LogLikelihoodRatio {
        self.member_llr(self.argmax())
    }
}
