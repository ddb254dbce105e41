//! Seeded random generation of Haar unitaries, unitarily invariant
//! isometries, Haar pure states, and bipartite states with a prescribed
//! subsystem distance from maximal mixedness.
//!
//! Everything draws from a [`RngStream`]: a `(seed, stream_index)` pair on a
//! fixed 64-bit generator. Identical parameters reproduce identical output
//! bit-for-bit, and per-trial substreams make parallel experiments
//! independent of scheduling.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, QR};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{adjoint, BipartiteState, PureState};
use crate::tol;

/// Identifier of the generator backing [`RngStream`], recorded in output
/// metadata.
pub const RNG_ALGORITHM: &str = "chacha12";

/// A reproducible random stream: ChaCha12 keyed by `seed` (via the standard
/// 64-bit seed expansion) on stream `stream_index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    /// Stream 0 for the given seed.
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            stream_index: 0,
        }
    }

    /// The same seed on a different stream. Trial `i` of an experiment uses
    /// `base.substream(i)`, so draws never couple across trials.
    pub fn substream(&self, stream_index: u64) -> Self {
        Self {
            seed: self.seed,
            stream_index,
        }
    }

    pub fn algorithm_id(&self) -> &'static str {
        RNG_ALGORITHM
    }

    /// Instantiates the generator at the start of this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_index);
        rng
    }
}

/// Standard complex Gaussian: real and imaginary parts are independent
/// standard normals, drawn in that order.
pub fn complex_gaussian<R: Rng>(rng: &mut R) -> c64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    c64::new(re, im)
}

/// Ginibre matrix: i.i.d. complex Gaussian entries, filled row-major.
pub fn ginibre_matrix<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Array2<c64> {
    let mut m = Array2::zeros((rows, cols));
    for i in 0..rows {
        for j in 0..cols {
            m[[i, j]] = complex_gaussian(rng);
        }
    }
    m
}

/// A unitary sampled from (or validated against) the Haar measure.
#[derive(Debug, Clone, PartialEq)]
pub struct HaarUnitary {
    mat: Array2<c64>,
}

impl HaarUnitary {
    /// Wraps a matrix, requiring `‖U†U − 1‖_max ≤` [`tol::ORTHONORMALITY`].
    pub fn new(mat: Array2<c64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "unitary must be square and nonempty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let defect = unitarity_defect(&mat);
        if defect > tol::ORTHONORMALITY {
            return Err(Error::InvalidArgument(format!(
                "matrix deviates from unitarity by {defect:e}"
            )));
        }
        Ok(Self { mat })
    }

    pub fn identity(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(Self {
            mat: Array2::eye(dim),
        })
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &Array2<c64> {
        &self.mat
    }

    pub fn into_matrix(self) -> Array2<c64> {
        self.mat
    }
}

fn unitarity_defect(m: &Array2<c64>) -> f64 {
    let prod = adjoint(m).dot(m);
    let n = m.ncols();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let expect = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((prod[[i, j]] - c64::new(expect, 0.0)).norm());
        }
    }
    worst
}

/// An `M × d` matrix with orthonormal columns (`V†V = 1_d`). Its rows encode
/// a state ensemble; see `ensembles::row_ensemble`.
#[derive(Debug, Clone, PartialEq)]
pub struct Isometry {
    mat: Array2<c64>,
}

impl Isometry {
    /// Wraps a matrix, requiring column orthonormality within
    /// [`tol::ORTHONORMALITY`].
    pub fn new(mat: Array2<c64>) -> Result<Self> {
        if mat.nrows() < mat.ncols() || mat.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "isometry needs M >= d >= 1, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let defect = unitarity_defect(&mat);
        if defect > tol::ORTHONORMALITY {
            return Err(Error::InvalidArgument(format!(
                "columns deviate from orthonormality by {defect:e}"
            )));
        }
        Ok(Self { mat })
    }

    /// The standard embedding `W`: identity block over a zero block.
    pub fn standard_embedding(m: usize, d: usize) -> Result<Self> {
        if d == 0 || d > m {
            return Err(Error::InvalidArgument(format!(
                "standard embedding needs 1 <= d <= M, got ({m}, {d})"
            )));
        }
        let mut mat = Array2::zeros((m, d));
        for i in 0..d {
            mat[[i, i]] = c64::new(1.0, 0.0);
        }
        Ok(Self { mat })
    }

    /// `(M, d)`.
    pub fn dims(&self) -> (usize, usize) {
        self.mat.dim()
    }

    pub fn matrix(&self) -> &Array2<c64> {
        &self.mat
    }

    /// `V · u` for a `d × d` matrix; rotates the encoded ensemble.
    pub fn compose(&self, u: &Array2<c64>) -> Result<Isometry> {
        let (_, d) = self.dims();
        if u.nrows() != d || u.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "composing {}x{} isometry with {}x{} matrix",
                self.mat.nrows(),
                d,
                u.nrows(),
                u.ncols()
            )));
        }
        Isometry::new(self.mat.dot(u))
    }
}

/// QR with the column-phase fix that makes the distribution exactly Haar:
/// `Q ← Q · diag(r_jj / |r_jj|)`. A zero diagonal entry (probability zero)
/// gets phase one.
fn qr_phase_fixed(g: Array2<c64>) -> Result<Array2<c64>> {
    let (mut q, r) = g.qr()?;
    let cols = q.ncols();
    for j in 0..cols {
        let rjj = r[[j, j]];
        let phase = if rjj.norm() == 0.0 {
            c64::new(1.0, 0.0)
        } else {
            rjj / c64::new(rjj.norm(), 0.0)
        };
        for i in 0..q.nrows() {
            q[[i, j]] *= phase;
        }
    }
    Ok(q)
}

/// A Haar-distributed `dim × dim` unitary (Ginibre + QR + phase fix).
pub fn haar_unitary<R: Rng>(dim: usize, rng: &mut R) -> Result<HaarUnitary> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let q = qr_phase_fixed(ginibre_matrix(dim, dim, rng))?;
    HaarUnitary::new(q)
}

/// An `m × d` isometry from the unitarily invariant measure (thin QR of a
/// Ginibre matrix with the same phase fix). Scalable substitute for drawing
/// a full `m × m` unitary and keeping `d` columns.
pub fn haar_isometry<R: Rng>(m: usize, d: usize, rng: &mut R) -> Result<Isometry> {
    if d == 0 || d > m {
        return Err(Error::InvalidArgument(format!(
            "isometry needs 1 <= d <= M, got ({m}, {d})"
        )));
    }
    let q = qr_phase_fixed(ginibre_matrix(m, d, rng))?;
    Isometry::new(q)
}

/// A Haar-random pure state: normalized complex Gaussian vector.
pub fn haar_pure_state<R: Rng>(dim: usize, rng: &mut R) -> Result<PureState> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let v = Array1::from_iter((0..dim).map(|_| complex_gaussian(rng)));
    PureState::from_unnormalized(v)
}

/// A random skew-Hermitian matrix with unit Frobenius norm; tangent
/// directions for finite-difference probes.
pub fn random_skew_hermitian<R: Rng>(dim: usize, rng: &mut R) -> Result<Array2<c64>> {
    if dim == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let a = ginibre_matrix(dim, dim, rng);
    let mut g = (&a - &adjoint(&a)) / c64::new(2.0, 0.0);
    let norm = g.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidArgument("degenerate zero draw".into()));
    }
    g.mapv_inplace(|x| x / norm);
    Ok(g)
}

/// A bipartite pure state whose reduced state on the small side sits at
/// trace distance exactly `delta` from `1/d_a`.
///
/// The Schmidt spectrum is `(1/d_a + δ, 1/d_a − δ, 1/d_a, …)` — two weights
/// perturbed, so the requested distance is hit exactly and every weight
/// stays at least `1/d_a − δ > 0`. The left basis is Haar on the small
/// side; the right vectors are the columns of a Haar isometry.
///
/// Requires `0 ≤ delta < 1/(2 d_a)`; larger `delta` is outside the regime
/// the bounds cover and is rejected.
pub fn perturbed_thermal_state<R: Rng>(
    d_a: usize,
    m: usize,
    delta: f64,
    rng: &mut R,
) -> Result<BipartiteState> {
    if d_a == 0 || m < d_a {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= d_a <= m, got ({d_a}, {m})"
        )));
    }
    if !(0.0..1.0).contains(&delta) || !delta.is_finite() {
        return Err(Error::InvalidArgument(format!("delta = {delta} must lie in [0, 1)")));
    }
    if delta >= 1.0 / (2.0 * d_a as f64) {
        return Err(Error::OutOfTheoremDomain(format!(
            "delta = {delta} must be below 1/(2 d_a) = {}",
            1.0 / (2.0 * d_a as f64)
        )));
    }
    if delta > 0.0 && d_a < 2 {
        return Err(Error::InvalidArgument(
            "a one-dimensional subsystem cannot be perturbed away from 1/d_a".into(),
        ));
    }

    let mut weights = vec![1.0 / d_a as f64; d_a];
    if delta > 0.0 {
        weights[0] += delta;
        weights[1] -= delta;
    }

    let a_basis = haar_unitary(d_a, rng)?;
    let b_vectors = haar_isometry(m, d_a, rng)?;

    let mut coeffs = Array2::zeros((d_a, m));
    for (i, &q) in weights.iter().enumerate() {
        let s = c64::new(q.sqrt(), 0.0);
        let a_col = a_basis.matrix().column(i);
        let b_col = b_vectors.matrix().column(i);
        for r in 0..d_a {
            for z in 0..m {
                coeffs[[r, z]] += s * a_col[r] * b_col[z];
            }
        }
    }
    BipartiteState::new(coeffs)
}
