//! Shared fixtures for the benchmarks: deterministic mid-trial belief
//! states with the sprawling group structure the hot paths actually see,
//! rather than the trivial single-group state a fresh trial starts from.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use sedsim_core::{
    derive_params, sed_partition, transmit, uniform_init, BeliefState, ChannelParams,
};

/// Evolves a uniform belief over `m` messages through `steps` noisy
/// channel uses and returns the resulting state. Deterministic in `seed`,
/// so benchmark inputs are stable across runs.
pub fn mid_trial_state(m: u64, p: f64, steps: u32, seed: u64) -> (BeliefState, ChannelParams) {
    let params = derive_params(p).expect("benchmark channel parameters are valid");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut state = uniform_init(m).expect("benchmark alphabet is valid");
    for _ in 0..steps {
        let partition = sed_partition(&state);
        let x = partition.true_msg_side;
        let y = transmit(x, rng.gen::<f64>(), &params);
        state = state
            .bayes_update(&partition, y, &params)
            .expect("update from a valid partition cannot fail");
    }
    (state, params)
}
