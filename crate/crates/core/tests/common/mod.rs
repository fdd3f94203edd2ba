//! Shared helpers for the integration suites.
//!
//! The centerpiece is an independent dense replay oracle: it follows a
//! grouped trial step by step while keeping its own per-message integer
//! agreement counts, materializes the grouped partition into concrete
//! per-message side assignments, and recomputes the full posterior vector
//! from scratch each step. Nothing here reuses the grouped state's
//! arithmetic, so agreement between the two is a real cross-check of the
//! grouped representation, the partitioner, and the Bayes update at once.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use sedsim_core::{
    derive_params, sed_partition, uniform_init, BeliefState, ChannelParams, Partition,
};

/// Largest deviations observed between the grouped state and the dense
/// mirror over one replayed trajectory.
#[derive(Debug, Clone, Copy)]
pub struct ReplayReport {
    /// Steps replayed before the operational stopping rule fired.
    pub steps: u32,
    /// Largest absolute posterior difference across the sorted member
    /// multiset, over all steps.
    pub max_member_dev: f64,
    /// Largest absolute difference in the transmitted message's posterior.
    pub max_theta_dev: f64,
}

/// Dense mirror of a grouped trial: integer agreement counts per message
/// plus a fixed index for the transmitted message.
struct DenseMirror {
    /// `agreements[i]` = number of steps whose output matched message
    /// `i`'s assigned side; message `i`'s unnormalized weight is
    /// `q^agreements[i] · p^(step − agreements[i])`.
    agreements: Vec<u32>,
    theta: usize,
    step: u32,
}

impl DenseMirror {
    fn new(m: u64, theta: usize) -> DenseMirror {
        DenseMirror {
            agreements: vec![0; m as usize],
            theta,
            step: 0,
        }
    }

    /// Materializes per-message sides for a grouped partition.
    ///
    /// Within each weight group, members are assigned in ascending index
    /// order and fill the side-0 quota first — except the transmitted
    /// message, which is placed last and therefore takes a side-1 slot
    /// exactly when its group has one. This is the same convention the
    /// grouped partitioner uses for `true_msg_side`, so the materialized
    /// side of the transmitted message must always agree with it.
    fn materialize(&self, state: &BeliefState, partition: &Partition) -> Vec<u8> {
        let mut sides = vec![0u8; self.agreements.len()];
        for (gi, group) in state.groups().iter().enumerate() {
            let members: Vec<usize> = (0..self.agreements.len())
                .filter(|&i| self.agreements[i] == group.q_count)
                .collect();
            assert_eq!(
                members.len() as u64,
                group.count,
                "group {gi} (key {}) has {} mirror members but the grouped state counts {}",
                group.q_count,
                members.len(),
                group.count
            );
            let mut s0_left = partition.s0_counts[gi];
            let mut s1_left = partition.s1_counts[gi];
            let holds_theta = members.contains(&self.theta);
            for &i in &members {
                if i == self.theta {
                    continue;
                }
                if s0_left > 0 {
                    sides[i] = 0;
                    s0_left -= 1;
                } else {
                    sides[i] = 1;
                    s1_left -= 1;
                }
            }
            if holds_theta {
                assert_eq!(
                    s0_left + s1_left,
                    1,
                    "exactly one slot must remain for the transmitted message"
                );
                sides[self.theta] = u8::from(s1_left > 0);
                assert_eq!(
                    sides[self.theta], partition.true_msg_side,
                    "materialized side of the transmitted message disagrees with the partition"
                );
            } else {
                assert_eq!(s0_left + s1_left, 0, "group {gi} quota not exhausted");
            }
        }
        sides
    }

    /// Applies channel output `y`: every message whose side matched gains
    /// one agreement.
    fn apply(&mut self, sides: &[u8], y: u8) {
        for (a, &side) in self.agreements.iter_mut().zip(sides) {
            *a += u32::from(side == y);
        }
        self.step += 1;
    }

    /// Posterior vector recomputed canonically from the integer counts in
    /// the log domain (scaled by the largest weight, so it never
    /// underflows regardless of trajectory length).
    fn posteriors(&self, params: &ChannelParams) -> Vec<f64> {
        let log_p = params.p.log2();
        let log_q = params.q.log2();
        let log_weights: Vec<f64> = self
            .agreements
            .iter()
            .map(|&a| f64::from(a) * log_q + f64::from(self.step - a) * log_p)
            .collect();
        let top = log_weights
            .iter()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let scaled: Vec<f64> = log_weights.iter().map(|&lw| (lw - top).exp2()).collect();
        let z: f64 = scaled.iter().sum();
        scaled.iter().map(|&w| w / z).collect()
    }
}

/// Replays one full trial of the grouped partition encoder against the
/// dense mirror and returns the largest posterior deviations seen.
///
/// The trajectory uses the deterministic side-1-slot convention for the
/// transmitted message (the grouped partitioner's raw output), runs until
/// some posterior reaches `1 − epsilon`, and cross-checks at every step:
///
/// * the transmitted message's agreement count matches the grouped key;
/// * the sorted dense posterior vector matches the grouped member
///   multiset entry by entry;
/// * the transmitted message's dense posterior matches the grouped one.
pub fn replay_trajectory(m: u64, p: f64, epsilon: f64, seed: u64) -> ReplayReport {
    let params = derive_params(p).expect("replay p must be a valid crossover");
    let target = ((1.0 - epsilon) / epsilon).log2();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let theta = rng.gen_range(0..m) as usize;
    let mut grouped = uniform_init(m).expect("replay alphabet must be valid");
    let mut mirror = DenseMirror::new(m, theta);
    let mut report = ReplayReport {
        steps: 0,
        max_member_dev: 0.0,
        max_theta_dev: 0.0,
    };

    const STEP_CAP: u32 = 5_000;
    while grouped.max_member_llr().bits < target {
        assert!(
            report.steps < STEP_CAP,
            "replay at m={m}, p={p} did not stop within {STEP_CAP} steps"
        );
        let partition = sed_partition(&grouped);
        let sides = mirror.materialize(&grouped, &partition);
        let x = partition.true_msg_side;
        let y = x ^ u8::from(rng.gen::<f64>() < p);
        grouped = grouped
            .bayes_update(&partition, y, &params)
            .expect("partition came from the same state");
        mirror.apply(&sides, y);
        report.steps += 1;

        assert_eq!(
            mirror.agreements[theta],
            grouped.theta_q_count(),
            "step {}: transmitted message's agreement count diverged",
            report.steps
        );

        let mut dense = mirror.posteriors(&params);
        let dense_theta = dense[theta];
        dense.sort_by(f64::total_cmp);
        let mut grouped_members = Vec::with_capacity(m as usize);
        for (gi, group) in grouped.groups().iter().enumerate() {
            let rho = grouped.member_posterior(gi);
            for _ in 0..group.count {
                grouped_members.push(rho);
            }
        }
        assert_eq!(
            grouped_members.len(),
            dense.len(),
            "member multiset sizes diverged"
        );
        for (i, (g, d)) in grouped_members.iter().zip(&dense).enumerate() {
            let dev = (g - d).abs();
            if dev > report.max_member_dev {
                report.max_member_dev = dev;
            }
            assert!(
                dev < 1e-6,
                "step {}, member {i}: grouped {g} vs dense {d} — far beyond roundoff",
                report.steps
            );
        }
        let theta_dev = (grouped.true_posterior() - dense_theta).abs();
        if theta_dev > report.max_theta_dev {
            report.max_theta_dev = theta_dev;
        }
    }
    assert!(
        report.steps > 0,
        "a fresh trajectory cannot already satisfy the stopping rule"
    );
    report
}
