//! Expected first-passage times for the confirmation-phase Markov chain.
//!
//! The confirmation phase of the scheme is modeled by a birth–death chain
//! on states `S_0 … S_n` (each one `C2` of log-likelihood wide): from `S_i`
//! the walk moves right with probability `q = 1−p` at cost 1 and left with
//! probability `p` at cost 1, except that `S_0` has no left neighbor — its
//! leftward move is a self-loop of weight `Δ0`, standing in for a fallback
//! excursion below the confirmation threshold. `S_n` is absorbing. `V_i`
//! denotes the expected accumulated weight until absorption starting from
//! `S_i`.
//!
//! Three independent routes to the same numbers:
//!
//! 1. **Closed form.** Summing the node equations collapses the system to
//!    `V_0` and `V_{n−1}`. Collapsing all states left of `S_{n−1}` into an
//!    effective self-loop gives the chain `Δ_j = 2 + (p/q)·Δ_{j−1}`, from
//!    which
//!    `V_{n−1} = (p/q)^n·Δ0 + (2p/(1−2p))·(1 − (p/q)^{n−1}) + 1` and
//!
//!    ```text
//!        V_0 = n/(1−2p) + (p/(1−2p))·(1 − (p/q)^n)·(Δ0 − Δ0*) ,
//!    ```
//!
//!    where `Δ0* = (2−2p)/(1−2p)` is the self-loop weight that makes the
//!    chain behave exactly like an unrestricted random walk — at `Δ0 =
//!    Δ0*` the differential second term vanishes and `V_0 = n/(1−2p)`.
//!    Intermediate `V_i` are recovered by forward substitution through the
//!    node equations.
//!
//! 2. **Linear system.** The node equations assembled verbatim as a
//!    tridiagonal system and solved by direct elimination — the
//!    independent oracle.
//!
//! 3. **Monte Carlo.** A literal random walk accumulating weights, for
//!    distribution-free cross-checks.
//!
//! The recursions are numerically benign — the homogeneous solution space
//! is spanned by `1` and `(p/q)^i`, both non-growing for `p < 1/2` — but
//! `1/(1−2p)` amplifies input rounding as `p → 1/2`, so every solver also
//! comes in an exact-rational variant (`*_exact`) that converts the f64
//! inputs to rationals (exactly — every finite f64 is dyadic) and rounds
//! only the final results.

use num::{BigRational, FromPrimitive, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Parameters of the generalized chain: `n` transient states ahead of the
/// absorbing one, leftward probability `p`, and the weight `Δ0` of the
/// leftmost state's self-loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageSpec {
    /// Number of states before absorption; the walk starts at `S_0` and
    /// ends on reaching `S_n`.
    pub n: u32,
    /// Leftward transition probability, in (0, 1/2).
    pub p: f64,
    /// Self-loop weight at `S_0` (expected excursion cost), ≥ 0.
    pub delta0: f64,
}

impl FirstPassageSpec {
    /// Validates and constructs a spec.
    pub fn new(n: u32, p: f64, delta0: f64) -> Result<FirstPassageSpec> {
        let spec = FirstPassageSpec { n, p, delta0 };
        spec.validate()?;
        Ok(spec)
    }

    /// Re-checks the domain constraints (fields are public).
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(Error::InvalidChainLength(self.n));
        }
        if !self.p.is_finite() || self.p <= 0.0 || self.p >= 0.5 {
            return Err(Error::InvalidCrossover(self.p));
        }
        if !self.delta0.is_finite() || self.delta0 < 0.0 {
            return Err(Error::InvalidSelfLoopWeight(self.delta0));
        }
        Ok(())
    }
}

/// Expected first-passage times and the quantities behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FirstPassageResult {
    /// `V_0 … V_{n−1}`: expected weight to absorption from each state.
    pub v: Vec<f64>,
    /// Effective left self-loop weights `Δ_1 … Δ_{n−1}` (empty for n = 1).
    pub delta_chain: Vec<f64>,
    /// `Δ0* = (2−2p)/(1−2p)`, the plain-random-walk self-loop weight.
    pub delta0_star: f64,
    /// The differential term `V_0 − n/(1−2p)`; zero iff `Δ0 = Δ0*`.
    pub v0_differential: f64,
}

/// Empirical first-passage estimate from [`simulate_chain`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChainSimulation {
    /// Sample mean of the accumulated weight.
    pub mean: f64,
    /// Standard error of the mean.
    pub stderr: f64,
    /// Number of walks simulated.
    pub trials: u64,
}

// ---------------------------------------------------------------------------
// Scalar abstraction shared by the f64 and exact-rational solvers
// ---------------------------------------------------------------------------

/// Arithmetic the solvers need; implemented for `f64` and `BigRational`.
pub trait ChainScalar:
    Clone
    + PartialOrd
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
{
    /// Exact conversion from a finite f64 (every finite f64 is a dyadic
    /// rational).
    fn from_f64(x: f64) -> Self;
    /// Rounding conversion back.
    fn to_f64(&self) -> f64;
    /// Small-integer embedding.
    fn from_u32(n: u32) -> Self;
}

impl ChainScalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_u32(n: u32) -> Self {
        f64::from(n)
    }
}

impl ChainScalar for BigRational {
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).expect("chain parameters are finite")
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn from_u32(n: u32) -> Self {
        <BigRational as FromPrimitive>::from_u32(n).expect("u32 embeds in a rational")
    }
}

// ---------------------------------------------------------------------------
// Closed form
// ---------------------------------------------------------------------------

/// Solves the chain via the explicit formulas: the `Δ`-chain, the explicit
/// `V_{n−1}`, the differential decomposition of `V_0`, and forward
/// substitution for interior states.
pub fn solve_closed_form(spec: &FirstPassageSpec) -> Result<FirstPassageResult> {
    spec.validate()?;
    Ok(closed_form_in::<f64>(spec))
}

/// [`solve_closed_form`] carried out in exact rational arithmetic, rounded
/// to f64 only at the end.
pub fn solve_closed_form_exact(spec: &FirstPassageSpec) -> Result<FirstPassageResult> {
    spec.validate()?;
    Ok(closed_form_in::<BigRational>(spec))
}

fn closed_form_in<T: ChainScalar>(spec: &FirstPassageSpec) -> FirstPassageResult {
    let n = spec.n as usize;
    let one = T::from_u32(1);
    let two = T::from_u32(2);
    let p = T::from_f64(spec.p);
    let q = one.clone() - p.clone();
    let r = p.clone() / q.clone();
    let gap = one.clone() - two.clone() * p.clone(); // 1 − 2p
    let delta0 = T::from_f64(spec.delta0);

    let delta0_star = (two.clone() - two.clone() * p.clone()) / gap.clone();

    // Δ_j = 2 + r·Δ_{j−1}, j = 1 … n−1.
    let mut delta_chain = Vec::with_capacity(n.saturating_sub(1));
    let mut delta = delta0.clone();
    for _ in 1..n {
        delta = two.clone() + r.clone() * delta;
        delta_chain.push(delta.clone());
    }

    let r_pow_n = {
        let mut acc = one.clone();
        for _ in 0..n {
            acc = acc * r.clone();
        }
        acc
    };
    let v0_differential = p.clone() / gap.clone()
        * (one.clone() - r_pow_n.clone())
        * (delta0.clone() - delta0_star.clone());
    let v0 = T::from_u32(spec.n) / gap.clone() + v0_differential.clone();

    let mut v: Vec<T> = Vec::with_capacity(n);
    v.push(v0.clone());
    if n >= 2 {
        // S_0 node equation V_0 = q + p·V_0 + q·V_1 + p·Δ0 rearranged.
        let v1 = v0.clone() - one.clone() - r.clone() * delta0.clone();
        v.push(v1);
        // Interior equations V_i = 1 + p·V_{i−1} + q·V_{i+1} rearranged.
        for i in 1..n - 1 {
            let next = (v[i].clone() - one.clone() - p.clone() * v[i - 1].clone()) / q.clone();
            v.push(next);
        }
        // Explicit V_{n−1} = r^n·Δ0 + (2p/(1−2p))·(1 − r^{n−1}) + 1; the
        // forward recursion must land on the same value, which closes the
        // system (the final node equation V_{n−1} = 1 + p·V_{n−2} is the
        // one the recursion never consumed).
        let r_pow_nm1 = r_pow_n.clone() / r.clone();
        let explicit =
            r_pow_n * delta0 + two * p.clone() / gap * (one.clone() - r_pow_nm1) + one.clone();
        debug_assert!(
            (v[n - 1].to_f64() - explicit.to_f64()).abs() <= 1e-9 * (1.0 + explicit.to_f64().abs()),
            "forward recursion disagrees with explicit V_(n-1)"
        );
        debug_assert!(
            (v[n - 1].to_f64() - (one.clone() + p.clone() * v[n - 2].clone()).to_f64()).abs()
                <= 1e-9 * (1.0 + v[n - 1].to_f64().abs()),
            "final node equation violated"
        );
        v[n - 1] = explicit;
    }

    FirstPassageResult {
        v: v.iter().map(ChainScalar::to_f64).collect(),
        delta_chain: delta_chain.iter().map(ChainScalar::to_f64).collect(),
        delta0_star: delta0_star.to_f64(),
        v0_differential: v0_differential.to_f64(),
    }
}

// ---------------------------------------------------------------------------
// Linear-system oracle
// ---------------------------------------------------------------------------

/// Solves the chain by assembling the node equations
///
/// ```text
///     (1−p)·V_0 − q·V_1                = q + p·Δ0
///     −p·V_{i−1} + V_i − q·V_{i+1}     = 1          (1 ≤ i ≤ n−2)
///     −p·V_{n−2} + V_{n−1}             = 1
/// ```
///
/// as a tridiagonal system and eliminating directly. Independent of the
/// closed form except for sharing the inputs.
pub fn solve_linear_system(spec: &FirstPassageSpec) -> Result<FirstPassageResult> {
    spec.validate()?;
    Ok(linear_system_in::<f64>(spec))
}

/// [`solve_linear_system`] in exact rational arithmetic.
pub fn solve_linear_system_exact(spec: &FirstPassageSpec) -> Result<FirstPassageResult> {
    spec.validate()?;
    Ok(linear_system_in::<BigRational>(spec))
}

fn linear_system_in<T: ChainScalar>(spec: &FirstPassageSpec) -> FirstPassageResult {
    let n = spec.n as usize;
    let zero = T::from_u32(0);
    let one = T::from_u32(1);
    let p = T::from_f64(spec.p);
    let q = one.clone() - p.clone();
    let delta0 = T::from_f64(spec.delta0);

    // Tridiagonal rows: sub·V_{i−1} + diag·V_i + sup·V_{i+1} = rhs.
    let mut sub = vec![zero.clone(); n];
    let mut diag = vec![one.clone(); n];
    let mut sup = vec![zero.clone(); n];
    let mut rhs = vec![one.clone(); n];
    diag[0] = one.clone() - p.clone();
    rhs[0] = q.clone() + p.clone() * delta0.clone();
    if n >= 2 {
        sup[0] = zero.clone() - q.clone();
        for i in 1..n - 1 {
            sub[i] = zero.clone() - p.clone();
            sup[i] = zero.clone() - q.clone();
        }
        sub[n - 1] = zero.clone() - p.clone();
    }

    // Thomas elimination. The pivots stay at (1−p) then exactly q > 1/2,
    // so the system is trivially non-singular for p < 1/2; assert anyway.
    for i in 1..n {
        assert!(
            diag[i - 1].to_f64() != 0.0,
            "singular pivot at row {}",
            i - 1
        );
        let w = sub[i].clone() / diag[i - 1].clone();
        diag[i] = diag[i].clone() - w.clone() * sup[i - 1].clone();
        rhs[i] = rhs[i].clone() - w * rhs[i - 1].clone();
    }
    let mut v = vec![zero; n];
    assert!(diag[n - 1].to_f64() != 0.0, "singular pivot at last row");
    v[n - 1] = rhs[n - 1].clone() / diag[n - 1].clone();
    for i in (0..n - 1).rev() {
        v[i] = (rhs[i].clone() - sup[i].clone() * v[i + 1].clone()) / diag[i].clone();
    }

    // Definitional companions; the differential term is derived from the
    // solved V_0 so the oracle stays independent of the closed form.
    let two = T::from_u32(2);
    let gap = one.clone() - two.clone() * p.clone();
    let delta0_star = (two.clone() - two.clone() * p.clone()) / gap.clone();
    let r = p.clone() / q;
    let mut delta_chain = Vec::with_capacity(n.saturating_sub(1));
    let mut delta = delta0;
    for _ in 1..n {
        delta = two.clone() + r.clone() * delta;
        delta_chain.push(delta.clone());
    }
    let v0_differential = v[0].clone() - T::from_u32(spec.n) / gap;

    FirstPassageResult {
        v: v.iter().map(ChainScalar::to_f64).collect(),
        delta_chain: delta_chain.iter().map(ChainScalar::to_f64).collect(),
        delta0_star: delta0_star.to_f64(),
        v0_differential: v0_differential.to_f64(),
    }
}

// ---------------------------------------------------------------------------
// Monte Carlo
// ---------------------------------------------------------------------------

/// Walks the chain `trials` times from `S_0` and averages the accumulated
/// weight; deterministic given `seed`.
///
/// The self-loop is taken literally: each traversal at `S_0` adds the
/// deterministic weight `Δ0`. (In the full simulator `Δ0` abstracts a
/// random excursion; here it is the chain's own definition being checked.)
pub fn simulate_chain(spec: &FirstPassageSpec, trials: u64, seed: u64) -> Result<ChainSimulation> {
    spec.validate()?;
    assert!(trials > 0, "at least one walk is required");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let q = 1.0 - spec.p;
    let mut sum = 0.0f64;
    let mut sumsq = 0.0f64;
    for _ in 0..trials {
        let mut state = 0u32;
        let mut weight = 0.0f64;
        while state < spec.n {
            if rng.gen::<f64>() < q {
                weight += 1.0;
                state += 1;
            } else if state == 0 {
                weight += spec.delta0;
            } else {
                weight += 1.0;
                state -= 1;
            }
        }
        sum += weight;
        sumsq += weight * weight;
    }
    let mean = sum / trials as f64;
    let variance = (sumsq / trials as f64 - mean * mean).max(0.0);
    let stderr = (variance / trials as f64).sqrt();
    Ok(ChainSimulation {
        mean,
        stderr,
        trials,
    })
}
