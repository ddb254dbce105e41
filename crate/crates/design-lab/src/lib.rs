//! Numerical toolkit for post-measurement ("projected") state ensembles on a
//! small subsystem of a bipartite pure state, their k-th moment operators,
//! and their trace-norm distance to the Haar ensemble.
//!
//! The crate is organized around six modules:
//!
//! * [`tensor`] — dense complex linear algebra specialized to the objects in
//!   play: trace distance, partial traces, Schmidt decompositions, tensor
//!   powers, Hermitian operator bases.
//! * [`sampling`] — seeded generation of Haar unitaries, unitarily invariant
//!   isometries, random pure states, and bipartite states with a prescribed
//!   subsystem distance from maximal mixedness.
//! * [`ensembles`] — projected / row / deformed-row ensembles, moment
//!   operators, the exact Haar moment operator, and the design distance.
//! * [`bounds`] — closed-form bound evaluators (design threshold, tail
//!   bound, continuity bound, Lipschitz bound) and numerical verifiers for
//!   the inequalities behind them, including the gradient construction and
//!   Monte Carlo tail experiments.
//! * [`spinchain`] — a minimal chaotic spin-chain demonstrator (mixed-field
//!   Ising, exact diagonalization) comparing computational-basis and random
//!   measurement bases over time.
//! * [`harness`] — experiment configuration, deterministic parallel trial
//!   execution, and CSV/JSON emission; drives the `design-lab` binary.
//!
//! Every randomized routine takes an explicit RNG so that a `(seed,
//! stream_index)` pair reproduces results bit-for-bit; see
//! [`sampling::RngStream`].
//!
//! # Index convention
//!
//! Tensor-product indices are slot-1-major throughout: the first tensor slot
//! varies slowest, i.e. `|i⟩⊗|j⟩` on dimensions `(a, b)` sits at flat index
//! `i*b + j`. All modules share this convention.

pub mod bounds;
pub mod ensembles;
pub mod error;
pub mod harness;
pub mod sampling;
pub mod spinchain;
pub mod tensor;

pub use error::{Error, Result};

use std::sync::OnceLock;

/// Default cap on any tensor-power dimension `d^k` handled densely.
pub const DEFAULT_DIMENSION_CAP: usize = 4096;

/// Environment variable overriding [`DEFAULT_DIMENSION_CAP`].
pub const DIMENSION_CAP_ENV: &str = "DESIGN_LAB_CAP";

static DIMENSION_CAP: OnceLock<usize> = OnceLock::new();

/// Maximum dense dimension the crate will allocate for tensor powers and
/// moment operators. Read once per process from `DESIGN_LAB_CAP`, falling
/// back to [`DEFAULT_DIMENSION_CAP`].
pub fn dimension_cap() -> usize {
    *DIMENSION_CAP.get_or_init(|| {
        std::env::var(DIMENSION_CAP_ENV)
            .ok()
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|&c| c >= 1)
            .unwrap_or(DEFAULT_DIMENSION_CAP)
    })
}

/// `d^k`, checked against overflow and against [`dimension_cap`].
pub fn checked_tensor_dim(d: usize, k: usize) -> Result<usize> {
    let mut dim: usize = 1;
    for _ in 0..k {
        dim = dim.checked_mul(d).ok_or_else(|| {
            Error::ResourceLimit(format!("tensor dimension {d}^{k} overflows usize"))
        })?;
        if dim > dimension_cap() {
            return Err(Error::ResourceLimit(format!(
                "tensor dimension {}^{} exceeds cap {} (set {} to raise it)",
                d,
                k,
                dimension_cap(),
                DIMENSION_CAP_ENV
            )));
        }
    }
    Ok(dim)
}

/// Numerical tolerances used by type invariants and checks across the crate.
pub mod tol {
    /// State vectors and coefficient matrices must be normalized to this.
    pub const NORM: f64 = 1e-12;
    /// Hermiticity defect allowed in operator constructors.
    pub const HERMITICITY: f64 = 1e-12;
    /// Orthonormality defect allowed for unitaries / isometries / bases.
    pub const ORTHONORMALITY: f64 = 1e-10;
    /// Ensemble probabilities must sum to one within this.
    pub const PROBABILITY_SUM: f64 = 1e-10;
    /// Outcomes with probability below this are dropped from ensembles.
    pub const PROBABILITY_DROP: f64 = 1e-14;
    /// Total probability mass removed by dropping must stay below this.
    pub const RENORMALIZATION_SHIFT: f64 = 1e-10;
    /// Eigenvalues of trace-norm differences below this count as zero.
    pub const EIGENVALUE_ZERO: f64 = 1e-14;
    /// Most negative eigenvalue tolerated when checking PSD-ness.
    pub const PSD: f64 = -1e-10;
    /// Trace-norm leakage of a moment operator out of the symmetric subspace.
    pub const SYMMETRIC_SUBSPACE: f64 = 1e-9;
}
