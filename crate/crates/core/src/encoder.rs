//! Channel-input encoders: the SED partitioner and the midpoint-interval
//! baseline.
//!
//! # SED partitioning
//!
//! The small-enough-difference (SED) rule splits the message set into
//! `(S0, S1)` with masses `π0 ≥ π1` such that
//!
//! ```text
//!     0 ≤ π0 − π1 ≤ min_{i ∈ S0} ρ_i ,
//! ```
//!
//! i.e. moving any single member out of the heavy side would overshoot the
//! balance. The transmitter then sends 0 iff θ lies in `S0`. Whenever one
//! message already holds a majority (`max ρ ≥ 1/2`), the only split
//! satisfying the rule is the singleton `S0 = {argmax}` — that is what
//! makes the confirmation phase a ±C2 random walk.
//!
//! The rule does not pin a unique partition; any satisfying split yields
//! the same guarantees. This module uses a deterministic greedy sweep:
//! members are taken in descending posterior order and each goes to the
//! currently lighter side. A standard exchange argument shows the final
//! imbalance is at most the last element added to the heavy side, which —
//! because the sweep is descending — is that side's minimum, exactly the
//! SED condition (with equality possible at ties, hence the non-strict
//! form above).
//!
//! The sweep runs over posterior groups, not individual messages: a run of
//! equal-mass members alternates sides after at most one catch-up run, so
//! a whole group is placed in O(1) using run lengths plus an exact
//! pair-cancellation step that leaves the running imbalance untouched.
//! The per-call cost is O(#groups), independent of `M`.
//!
//! Within a group, members are interchangeable; where an individual
//! identity is needed the convention is: a group's members fill `S0`
//! first, and θ is the *last* member of its group to be placed (so θ takes
//! `S1` exactly when its group has any `S1` assignment). The dense test
//! oracle mirrors the same convention.
//!
//! # Midpoint-interval baseline
//!
//! The classical Horstein scheme for comparison runs: messages occupy
//! consecutive subintervals of `[0,1)` in index order, sized by their
//! posteriors. The encoder sends 0 if θ's subinterval lies below the
//! midpoint, 1 if above, and randomizes proportionally when it straddles.
//! It operates on the dense representation only.

use serde::{Deserialize, Serialize};

use crate::belief::{BeliefState, DenseBelief};
use crate::channel::ChannelParams;

/// A two-way split of the message set, expressed per posterior group.
///
/// `s0_counts[i] + s1_counts[i]` equals the member count of group `i` of
/// the state this partition was built for; both sides are non-empty
/// overall.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    /// Members of each group assigned to `S0`.
    pub s0_counts: Vec<u64>,
    /// Members of each group assigned to `S1`.
    pub s1_counts: Vec<u64>,
    /// Posterior mass of `S0`; `π0 ≥ π1` by construction.
    pub pi0: f64,
    /// Posterior mass of `S1`; `π0 + π1 = 1`.
    pub pi1: f64,
    /// Side holding the transmitted message (0 or 1).
    pub true_msg_side: u8,
}

/// Computes the deterministic greedy SED partition of `state`.
///
/// The returned split satisfies `0 ≤ π0 − π1 ≤ min_{i∈S0} ρ_i`; in debug
/// builds this is asserted on every call via [`check_partition`].
pub fn sed_partition(state: &BeliefState) -> Partition {
    let groups = state.groups();
    let n = groups.len();
    // Scaled linear weights: v[i] = 2^(log_weight − top log_weight) ∈ (0, 1].
    // Groups far below the top underflow to 0.0; their true relative mass
    // is below 2^-1074 and they are treated as mass-less for balancing.
    let top = groups[n - 1].log_weight;
    let v: Vec<f64> = groups.iter().map(|g| (g.log_weight - top).exp2()).collect();

    // Working sides A/B; D = mass(A) − mass(B), scaled. Each member goes to
    // the lighter side (ties to B), descending posterior order, so B
    // receives the single largest-posterior member first.
    let mut to_a = vec![0u64; n];
    let mut to_b = vec![0u64; n];
    let mut d = 0.0f64;
    for i in (0..n).rev() {
        let s = v[i];
        let mut rem = groups[i].count;
        if s == 0.0 {
            // Mass-less members cannot move the balance; park them on the
            // lighter side so they can never surface in the heavy side.
            if d >= 0.0 {
                to_b[i] += rem;
            } else {
                to_a[i] += rem;
            }
            continue;
        }
        // Catch-up run: consecutive members all join the lighter side until
        // the sign of D flips (or the group is exhausted). Afterwards
        // |D| ≤ s, so placements alternate in exact arithmetic.
        if d >= 0.0 {
            let k = ((d / s).floor() as u64).saturating_add(1).min(rem);
            to_b[i] += k;
            d -= k as f64 * s;
            rem -= k;
        } else {
            let k = (((-d) / s).ceil() as u64).max(1).min(rem);
            to_a[i] += k;
            d += k as f64 * s;
            rem -= k;
        }
        // Alternating placements cancel pairwise and leave D unchanged;
        // consuming them without touching D avoids float drift.
        let pairs = rem / 2;
        to_a[i] += pairs;
        to_b[i] += pairs;
        rem %= 2;
        if rem == 1 {
            if d >= 0.0 {
                to_b[i] += 1;
                d -= s;
            } else {
                to_a[i] += 1;
                d += s;
            }
        }
    }

    // Canonical masses recomputed from scratch (ascending index) so that
    // labeling and the SED check agree bit-for-bit.
    let mass = |counts: &[u64]| -> f64 { counts.iter().zip(&v).map(|(&c, &w)| c as f64 * w).sum() };
    let (mass_a, mass_b) = (mass(&to_a), mass(&to_b));
    // Heavy side becomes S0; a tie goes to B, which holds the top member.
    let (s0_counts, s1_counts, mass0, mass1) = if mass_a > mass_b {
        (to_a, to_b, mass_a, mass_b)
    } else {
        (to_b, to_a, mass_b, mass_a)
    };
    let total = mass0 + mass1;
    let theta_idx = state.theta_group_index();
    let true_msg_side = u8::from(s1_counts[theta_idx] > 0);
    let partition = Partition {
        s0_counts,
        s1_counts,
        pi0: mass0 / total,
        pi1: mass1 / total,
        true_msg_side,
    };
    debug_assert!(
        check_partition(state, &partition).is_ok(),
        "SED condition violated: {:?}",
        check_partition(state, &partition)
    );
    partition
}

/// Verifies that `partition` is a well-formed SED split of `state`:
/// disjoint exhaustive non-empty sides, `π0 + π1 = 1`, θ on a populated
/// side, and `0 ≤ π0 − π1 ≤ min_{i∈S0} ρ_i`.
///
/// Used by debug assertions and tests; masses are recomputed from the
/// state so the check is independent of the values cached in `partition`.
pub fn check_partition(state: &BeliefState, partition: &Partition) -> Result<(), String> {
    let groups = state.groups();
    let n = groups.len();
    if partition.s0_counts.len() != n || partition.s1_counts.len() != n {
        return Err(format!(
            "partition for {} groups applied to a state with {n}",
            partition.s0_counts.len()
        ));
    }
    let mut total0 = 0u64;
    let mut total1 = 0u64;
    for (i, group) in groups.iter().enumerate() {
        if partition.s0_counts[i] + partition.s1_counts[i] != group.count {
            return Err(format!("group {i} counts do not add up"));
        }
        total0 += partition.s0_counts[i];
        total1 += partition.s1_counts[i];
    }
    if total0 == 0 || total1 == 0 {
        return Err("a side is empty".into());
    }
    let theta_idx = state.theta_group_index();
    let theta_count = if partition.true_msg_side == 0 {
        partition.s0_counts[theta_idx]
    } else {
        partition.s1_counts[theta_idx]
    };
    if theta_count == 0 {
        return Err("theta side has no members of theta's group".into());
    }
    if (partition.pi0 + partition.pi1 - 1.0).abs() > 1e-12 {
        return Err(format!(
            "masses do not sum to one: {} + {}",
            partition.pi0, partition.pi1
        ));
    }
    // SED condition in the scaled-linear domain shared by the construction:
    // 0 ≤ mass0 − mass1 ≤ v(min S0), avoiding divisions. The masses here
    // are re-summed in group order, which can differ from the greedy's
    // incremental arithmetic by a few ulps when the split is an exact tie,
    // so the comparisons carry a mass-scaled tolerance.
    let top = groups[n - 1].log_weight;
    let v: Vec<f64> = groups.iter().map(|g| (g.log_weight - top).exp2()).collect();
    let mass = |counts: &[u64]| -> f64 { counts.iter().zip(&v).map(|(&c, &w)| c as f64 * w).sum() };
    let mass0 = mass(&partition.s0_counts);
    let mass1 = mass(&partition.s1_counts);
    let tol = 1e-12 * (1.0 + mass0 + mass1);
    let diff = mass0 - mass1;
    if diff < -tol {
        return Err(format!("S0 is lighter than S1 by {}", -diff));
    }
    let min_s0 = (0..n)
        .find(|&i| partition.s0_counts[i] > 0)
        .map(|i| v[i])
        .expect("S0 is non-empty");
    if diff > min_s0 + tol {
        return Err(format!(
            "imbalance {diff} exceeds smallest S0 posterior {min_s0} (scaled)"
        ));
    }
    Ok(())
}

/// The channel input for the transmission: 0 iff θ ∈ S0.
pub fn sed_channel_input(partition: &Partition) -> u8 {
    partition.true_msg_side
}

/// The midpoint-interval baseline encoder's channel input.
///
/// θ's subinterval of `[0,1)` (messages laid out in index order with
/// posterior-sized widths) is compared against the midpoint: entirely
/// below emits 0, entirely above emits 1, and a straddling interval emits
/// 0 with probability equal to the fraction of it lying below, decided by
/// `midpoint_draw` (uniform on [0,1)).
pub fn horstein_input(dense: &DenseBelief, midpoint_draw: f64) -> u8 {
    let posteriors = dense.posteriors();
    let lo: f64 = posteriors[..dense.theta()].iter().sum();
    let rho = posteriors[dense.theta()];
    let hi = lo + rho;
    if hi <= 0.5 {
        0
    } else if lo >= 0.5 {
        1
    } else {
        let fraction_below = (0.5 - lo) / rho;
        u8::from(midpoint_draw >= fraction_below)
    }
}

/// Per-message likelihoods `P(Y = y | θ = i)` for the baseline encoder's
/// randomized input rule, used for the receiver's Bayes update.
///
/// A message entirely below the midpoint would have sent 0 (so its
/// likelihood is `q` for `y = 0`, `p` for `y = 1`), entirely above would
/// have sent 1, and a straddling message mixes the two according to the
/// fraction of its interval below the midpoint.
pub fn horstein_likelihoods(dense: &DenseBelief, y: u8, params: &ChannelParams) -> Vec<f64> {
    debug_assert!(y <= 1);
    let posteriors = dense.posteriors();
    let mut likelihoods = Vec::with_capacity(posteriors.len());
    let mut lo = 0.0f64;
    for &rho in posteriors {
        let hi = lo + rho;
        let p_send_zero = if hi <= 0.5 {
            1.0
        } else if lo >= 0.5 {
            0.0
        } else {
            (0.5 - lo) / rho
        };
        let likelihood = if y == 0 {
            p_send_zero * params.q + (1.0 - p_send_zero) * params.p
        } else {
            p_send_zero * params.p + (1.0 - p_send_zero) * params.q
        };
        likelihoods.push(likelihood);
        lo = hi;
    }
    likelihoods
}
