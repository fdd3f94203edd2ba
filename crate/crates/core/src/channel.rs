//! Binary symmetric channel parameterization.
//!
//! Everything downstream consumes three information-theoretic constants of
//! the BSC with crossover probability `p` (all logarithms base 2):
//!
//! - `C  = 1 − H(p)` — channel capacity in bits per use, where
//!   `H(p) = −p·log₂ p − q·log₂ q` is the binary entropy function;
//! - `C1 = p·log₂(p/q) + q·log₂(q/p)` — the relative entropy
//!   `D(q‖p)` between the output distributions under the two inputs,
//!   which is the expected log-likelihood-ratio drift per step in the
//!   confirmation phase;
//! - `C2 = log₂(q/p)` — the largest possible one-step change of any
//!   message's posterior log-likelihood ratio.
//!
//! with `q = 1 − p`. For `0 < p < 1/2` these satisfy `0 < C ≤ C1 ≤ C2 < ∞`,
//! along with two algebraic identities used throughout:
//! `C1 = (q − p)·C2` and `C2/C1 = 1/(1 − 2p)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// BSC crossover probability together with its derived constants.
///
/// Construct via [`derive_params`]; the constructor validates `p` once and
/// all other code trusts the value. Immutable and freely shareable across
/// threads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelParams {
    /// Crossover probability, in (0, 1/2).
    pub p: f64,
    /// Complement `1 − p`.
    pub q: f64,
    /// Capacity `C = 1 − H(p)` in bits per channel use.
    pub capacity_c: f64,
    /// Confirmation-phase drift `C1 = p·log₂(p/q) + q·log₂(q/p)` in bits.
    pub kl_c1: f64,
    /// Maximum one-step log-likelihood-ratio change `C2 = log₂(q/p)` in bits.
    pub llr_step_c2: f64,
}

/// Derives the channel constants for crossover probability `p`.
///
/// # Errors
///
/// Rejects `p ≤ 0`, `p ≥ 1/2`, and non-finite `p`. Callers with a channel
/// worse than a fair coin should relabel outputs and pass `1 − p`.
pub fn derive_params(p: f64) -> Result<ChannelParams> {
    if !p.is_finite() || p <= 0.0 || p >= 0.5 {
        return Err(Error::InvalidCrossover(p));
    }
    let q = 1.0 - p;
    let entropy = -p * p.log2() - q * q.log2();
    let capacity_c = 1.0 - entropy;
    let llr_step_c2 = (q / p).log2();
    // The defining sum, not (q − p)·C2: the identity between the two is a
    // cross-check exercised by the tests.
    let kl_c1 = p * (p / q).log2() + q * (q / p).log2();
    let params = ChannelParams {
        p,
        q,
        capacity_c,
        kl_c1,
        llr_step_c2,
    };
    debug_assert!(params.capacity_c > 0.0);
    debug_assert!(params.capacity_c <= params.kl_c1 + 1e-12);
    debug_assert!(params.kl_c1 <= params.llr_step_c2 + 1e-12);
    Ok(params)
}

/// Passes one bit through the BSC using an externally supplied noise draw.
///
/// The bit is flipped iff `noise_draw < p`, so a uniform-[0,1) draw realizes
/// the channel law exactly and the output is deterministic given the draw.
pub fn transmit(x: u8, noise_draw: f64, params: &ChannelParams) -> u8 {
    debug_assert!(x <= 1, "channel input must be a bit, got {x}");
    if noise_draw < params.p {
        x ^ 1
    } else {
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_constants_at_p_005() {
        let params = derive_params(0.05).unwrap();
        assert!(
            (params.capacity_c - 0.7136).abs() < 5e-5,
            "C = {}",
            params.capacity_c
        );
        assert!(
            (params.kl_c1 - 3.8231).abs() < 5e-5,
            "C1 = {}",
            params.kl_c1
        );
        assert!(
            (params.llr_step_c2 - 4.2479).abs() < 5e-5,
            "C2 = {}",
            params.llr_step_c2
        );
    }

    #[test]
    fn c2_is_one_bit_at_p_one_third() {
        // q/p = 2 when p = 1/3; the float rounding of 1/3 perturbs the
        // quotient by one ulp, so allow machine-level slack.
        let params = derive_params(1.0 / 3.0).unwrap();
        assert!(
            (params.llr_step_c2 - 1.0).abs() < 1e-15,
            "C2 = {}",
            params.llr_step_c2
        );
    }

    #[test]
    fn quarter_crossover_closed_forms() {
        let params = derive_params(0.25).unwrap();
        let log2_3 = 3f64.log2();
        assert!((params.llr_step_c2 - log2_3).abs() < 1e-14);
        assert!((params.kl_c1 - 0.5 * log2_3).abs() < 1e-14);
        // C1 = (q − p)·C2 identity.
        assert!((params.kl_c1 - (params.q - params.p) * params.llr_step_c2).abs() < 1e-14);
    }

    #[test]
    fn rejects_out_of_domain_p() {
        for bad in [0.0, -0.1, 0.5, 0.7, f64::NAN, f64::INFINITY] {
            assert!(derive_params(bad).is_err(), "p = {bad} should be rejected");
        }
    }

    #[test]
    fn capacity_decreases_toward_half() {
        let mut last = 1.0;
        for i in 1..50 {
            let p = i as f64 * 0.01;
            let c = derive_params(p).unwrap().capacity_c;
            assert!(c < last, "capacity must fall as p grows: C({p}) = {c}");
            last = c;
        }
        // C → 1 as p → 0.
        assert!(derive_params(1e-9).unwrap().capacity_c > 0.999_999_9);
    }

    #[test]
    fn transmit_flips_iff_draw_below_p() {
        let params = derive_params(0.05).unwrap();
        assert_eq!(transmit(0, 0.99, &params), 0);
        assert_eq!(transmit(1, 0.01, &params), 0);
        assert_eq!(
            transmit(0, 0.05, &params),
            0,
            "boundary draw == p must not flip"
        );
        assert_eq!(transmit(1, 0.049_999, &params), 0);
    }

    #[test]
    fn empirical_flip_frequency_matches_p() {
        use rand::{Rng, SeedableRng};
        let params = derive_params(0.05).unwrap();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(7);
        let n = 1_000_000u64;
        let mut flips = 0u64;
        for _ in 0..n {
            if transmit(0, rng.gen::<f64>(), &params) == 1 {
                flips += 1;
            }
        }
        let freq = flips as f64 / n as f64;
        let sigma = (params.p * params.q / n as f64).sqrt();
        assert!(
            (freq - params.p).abs() < 3.0 * sigma,
            "flip frequency {freq} outside 3 sigma of {}",
            params.p
        );
    }
}
