//! Randomized invariants of the public API, checked with proptest.
//!
//! These complement the deterministic unit tests: each property encodes a
//! claim that must hold across the whole parameter domain, not just at
//! reference points — algebraic identities between the channel constants,
//! the balance rule on arbitrary grouped states, agreement between the
//! independent first-passage solvers, dominance and monotonicity of the
//! blocklength bounds, and recomputability of the stopping rules from a
//! trial's increment trace.

mod common;

use proptest::prelude::*;

use sedsim_core::belief::BeliefState;
use sedsim_core::bounds::{confirmation_steps, confirmation_target_llr, floor_tol};
use sedsim_core::encoder::check_partition;
use sedsim_core::firstpassage::{solve_closed_form_exact, solve_linear_system_exact};
use sedsim_core::{
    compute_bounds, derive_params, run_trial, sed_partition, solve_closed_form,
    solve_linear_system, EncoderKind, FirstPassageSpec, StoppingConfig, ThetaMode,
};

/// Strategy: a syntactically valid grouped-state spec — strictly ascending
/// keys bounded by the step count, positive member counts, the true
/// message on one of the keys — plus a crossover probability.
fn arb_state_spec() -> impl Strategy<Value = (u32, Vec<(u32, u64)>, u32, f64)> {
    (
        proptest::collection::btree_set(0u32..=60, 1..=6),
        proptest::collection::vec(1u64..=40, 6),
        any::<u8>(),
        0.02f64..0.45,
    )
        .prop_map(|(keys, counts, theta_pick, p)| {
            let keys: Vec<u32> = keys.into_iter().collect();
            let step = *keys.last().expect("at least one key");
            let mut groups: Vec<(u32, u64)> = keys
                .iter()
                .zip(&counts)
                .map(|(&key, &count)| (key, count))
                .collect();
            if groups.len() == 1 && groups[0].1 < 2 {
                // The alphabet needs at least two messages.
                groups[0].1 = 2;
            }
            let theta_key = groups[theta_pick as usize % groups.len()].0;
            (step, groups, theta_key, p)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn channel_constant_identities(p in 0.005f64..0.495) {
        let params = derive_params(p).unwrap();
        prop_assert!(
            (params.kl_c1 - (params.q - params.p) * params.llr_step_c2).abs()
                < 1e-12 * (1.0 + params.kl_c1),
            "C1 = {} violates C1 = (q-p)*C2 at p = {p}",
            params.kl_c1
        );
        let lhs = params.llr_step_c2 / params.kl_c1;
        let rhs = 1.0 / (1.0 - 2.0 * params.p);
        prop_assert!(
            (lhs - rhs).abs() < 1e-9 * rhs,
            "C2/C1 = {lhs} but 1/(1-2p) = {rhs} at p = {p}"
        );
        prop_assert!(params.capacity_c > 0.0, "capacity must be positive");
        prop_assert!(
            params.capacity_c <= params.kl_c1 + 1e-12 && params.kl_c1 <= params.llr_step_c2 + 1e-12,
            "constants must be ordered C <= C1 <= C2"
        );
    }

    #[test]
    fn greedy_partition_always_satisfies_the_balance_rule(
        (step, groups, theta_key, p) in arb_state_spec()
    ) {
        let params = derive_params(p).unwrap();
        let state = BeliefState::from_group_spec(step, &groups, theta_key, &params).unwrap();
        let partition = sed_partition(&state);
        let verdict = check_partition(&state, &partition);
        prop_assert!(verdict.is_ok(), "partition violates the balance rule: {:?}", verdict);
        prop_assert!(partition.pi0 >= partition.pi1, "side 0 must be the heavy side");
        let total: u64 = partition.s0_counts.iter().chain(&partition.s1_counts).sum();
        prop_assert_eq!(total, state.total_messages(), "every message must be assigned");
    }

    #[test]
    fn majority_posterior_forces_a_singleton_heavy_side(
        p in 0.02f64..0.45,
        low_count in 1u64..=40,
        extra in 0u32..=10,
    ) {
        // Two groups — `low_count` members at key 0 and a lone leader far
        // enough ahead to hold a majority. The balance rule then admits
        // only the split that isolates the leader, which is what makes the
        // confirmation phase a +-C2 walk.
        let params = derive_params(p).unwrap();
        let ratio_log = (params.q / params.p).log2();
        let gap = ((low_count as f64).log2() / ratio_log).ceil() as u32 + 1 + extra;
        let state =
            BeliefState::from_group_spec(gap, &[(0, low_count), (gap, 1)], gap, &params).unwrap();
        prop_assert!(
            state.max_posterior() > 0.5,
            "constructed state must hold a majority, got {}",
            state.max_posterior()
        );
        let partition = sed_partition(&state);
        let total_s0: u64 = partition.s0_counts.iter().sum();
        prop_assert_eq!(total_s0, 1, "the heavy side must isolate the leader");
        prop_assert_eq!(partition.s0_counts[1], 1, "the isolated member must be the leader");
        prop_assert_eq!(
            partition.true_msg_side, 0,
            "the true message is the leader here and sits alone on side 0"
        );
    }

    #[test]
    fn two_phase_bound_dominates_inside_the_claimed_region(
        p in 0.05f64..=0.45,
        k in 1u32..=30,
        eps_exp in 2.0f64..8.0,
    ) {
        let params = derive_params(p).unwrap();
        let epsilon = 10f64.powf(-eps_exp);
        let bounds = compute_bounds(1u64 << k, epsilon, &params).unwrap();
        prop_assert!(
            bounds.two_phase_upper < bounds.tightened_upper,
            "two-phase {} >= tightened {} at p={p}, k={k}, eps={epsilon}",
            bounds.two_phase_upper,
            bounds.tightened_upper
        );
        prop_assert!(
            bounds.two_phase_upper < bounds.stop_feedback_vlf,
            "two-phase {} >= stop-feedback {} at p={p}, k={k}, eps={epsilon}",
            bounds.two_phase_upper,
            bounds.stop_feedback_vlf
        );
    }

    #[test]
    fn bounds_monotone_in_alphabet_and_error_target(
        p in 0.02f64..0.45,
        k in 1u32..=30,
        eps_exp in 3.0f64..8.0,
        factor in 1.5f64..50.0,
    ) {
        let params = derive_params(p).unwrap();
        let m = 1u64 << k;
        let epsilon = 10f64.powf(-eps_exp);
        let base = compute_bounds(m, epsilon, &params).unwrap();

        let bigger = compute_bounds(2 * m, epsilon, &params).unwrap();
        prop_assert!(bigger.general_upper > base.general_upper, "general bound must grow with M");
        prop_assert!(bigger.tightened_upper > base.tightened_upper, "tightened bound must grow with M");
        prop_assert!(bigger.two_phase_upper > base.two_phase_upper, "two-phase bound must grow with M");
        prop_assert!(bigger.stop_feedback_vlf > base.stop_feedback_vlf, "stop-feedback bound must grow with M");

        let looser = compute_bounds(m, epsilon * factor, &params).unwrap();
        prop_assert!(looser.general_upper < base.general_upper, "general bound must shrink as eps grows");
        prop_assert!(looser.tightened_upper < base.tightened_upper, "tightened bound must shrink as eps grows");
        prop_assert!(looser.stop_feedback_vlf < base.stop_feedback_vlf, "stop-feedback bound must shrink as eps grows");
        // The two-phase bound depends on eps only through a ceiling, so it
        // may plateau but never move the wrong way.
        prop_assert!(looser.two_phase_upper <= base.two_phase_upper, "two-phase bound must not grow as eps grows");
    }

    #[test]
    fn v0_stays_below_the_confirmation_term_bound(
        p in 0.02f64..0.45,
        n in 1u32..=30,
        delta0_frac in 0.0f64..=1.0,
    ) {
        // Whenever the self-loop weight is at most 1 + (C1+C2)/C — the
        // analytic ceiling on a fallback excursion's expected cost — the
        // chain's V0 is bounded by the confirmation term of the two-phase
        // bound: n*C2/C1 + (p*C2/C1)*((C1+C2)/C - C2/C1).
        let params = derive_params(p).unwrap();
        let (c, c1, c2) = (params.capacity_c, params.kl_c1, params.llr_step_c2);
        let ceiling = 1.0 + (c1 + c2) / c;
        let spec = FirstPassageSpec::new(n, p, delta0_frac * ceiling).unwrap();
        let v0 = solve_closed_form(&spec).unwrap().v[0];
        let bound = f64::from(n) * c2 / c1 + p * (c2 / c1) * ((c1 + c2) / c - c2 / c1);
        prop_assert!(
            v0 <= bound * (1.0 + 1e-9) + 1e-9,
            "V0 = {v0} exceeds {bound} at p={p}, n={n}, delta0={}",
            spec.delta0
        );
    }

    #[test]
    fn closed_form_and_linear_system_agree(
        n in 1u32..=40,
        p in 0.02f64..0.48,
        delta0 in 0.0f64..25.0,
    ) {
        let spec = FirstPassageSpec::new(n, p, delta0).unwrap();
        let closed = solve_closed_form(&spec).unwrap();
        let linear = solve_linear_system(&spec).unwrap();
        prop_assert_eq!(closed.v.len(), n as usize);
        for (i, (a, b)) in closed.v.iter().zip(&linear.v).enumerate() {
            prop_assert!(
                (a - b).abs() <= 1e-10 * a.abs().max(1.0),
                "V_{i}: closed form {a} vs linear system {b} at n={n}, p={p}, delta0={delta0}"
            );
        }
        prop_assert!(
            (closed.v0_differential - linear.v0_differential).abs()
                <= 1e-9 * (1.0 + closed.v[0].abs()),
            "differential terms disagree: {} vs {}",
            closed.v0_differential,
            linear.v0_differential
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn exact_solvers_agree_bit_for_bit(
        n in 1u32..=12,
        p in 0.02f64..0.48,
        delta0 in 0.0f64..25.0,
    ) {
        // Both exact-rational solvers compute the same unique solution and
        // round once at the end, so their f64 outputs must be identical.
        let spec = FirstPassageSpec::new(n, p, delta0).unwrap();
        let closed = solve_closed_form_exact(&spec).unwrap();
        let linear = solve_linear_system_exact(&spec).unwrap();
        for (i, (a, b)) in closed.v.iter().zip(&linear.v).enumerate() {
            prop_assert_eq!(a, b, "V_{} differs between exact solvers", i);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn stopping_rules_recompute_from_the_increment_trace(
        m in 2u64..=64,
        p in 0.03f64..0.3,
        seed in any::<u64>(),
    ) {
        let params = derive_params(p).unwrap();
        let config = StoppingConfig::with_default_guard(m, 1e-2, &params).unwrap();
        let record = run_trial(&config, &params, EncoderKind::Sed, ThetaMode::Uniform, seed, true)
            .unwrap();
        let log = record.increment_log.as_ref().expect("the trace was requested");
        let len = log.len() as u64;
        prop_assert_eq!(len, record.tau_star_eps, "trace length must equal the loop's exit time");
        prop_assert_eq!(record.increments.total_steps(), len);

        let expected_u0 = -(((m - 1) as f64).log2());
        prop_assert!(
            (log[0].0 - expected_u0).abs() < 1e-9,
            "initial LLR {} should be -log2(M-1) = {expected_u0}",
            log[0].0
        );
        // Each sample is (U before the step, step delta); the value after
        // step t is the next sample's before-value, exactly.
        for t in 1..len as usize {
            let chained = log[t - 1].0 + log[t - 1].1;
            prop_assert!(
                (log[t].0 - chained).abs() < 1e-9,
                "trace is not self-consistent at step {t}"
            );
        }

        let target = confirmation_target_llr(config.epsilon);
        let n_states = f64::from(confirmation_steps(config.epsilon, &params));
        let c2 = params.llr_step_c2;
        let mut first_half = None;
        let mut first_eps = None;
        for t in 1..=len {
            let after = if t < len {
                log[t as usize].0
            } else {
                log[(t - 1) as usize].0 + log[(t - 1) as usize].1
            };
            if first_half.is_none() && after >= 0.0 {
                first_half = Some(t);
            }
            if first_eps.is_none() && after >= target - if t == len { 1e-9 } else { 0.0 } {
                first_eps = Some(t);
            }
            if t < len {
                prop_assert!(
                    !(after >= target && floor_tol(after / c2) >= n_states),
                    "the position-invariant rule would already fire at step {t} < {len}"
                );
            } else {
                // The final after-value is reconstructed (one rounding), so
                // check the firing condition with matching slack.
                prop_assert!(after >= target - 1e-9, "final LLR {after} below target {target}");
                prop_assert!(
                    after / c2 >= n_states - 1e-6,
                    "final LLR {after} spans fewer than {n_states} intervals"
                );
            }
        }
        prop_assert_eq!(first_half, Some(record.tau_theta_half), "half-crossing time mismatch");
        prop_assert_eq!(first_eps, Some(record.tau_theta_eps), "genie stopping time mismatch");
        prop_assert!(record.tau <= record.tau_theta_eps, "operational rule cannot fire late");
    }

    #[test]
    fn grouped_and_dense_replay_never_diverge(
        m in 2u64..=32,
        p in 0.05f64..0.3,
        seed in any::<u64>(),
    ) {
        let report = common::replay_trajectory(m, p, 1e-2, seed);
        prop_assert!(report.steps > 0, "a replay must take at least one step");
        prop_assert!(
            report.max_member_dev < 1e-10,
            "member posterior deviation {} at m={m}, p={p}",
            report.max_member_dev
        );
        prop_assert!(
            report.max_theta_dev < 1e-10,
            "true-message posterior deviation {} at m={m}, p={p}",
            report.max_theta_dev
        );
    }
}
