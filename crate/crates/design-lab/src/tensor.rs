//! Dense complex linear algebra for the quantum objects used everywhere
//! else: pure states, Hermitian operators, bipartite coefficient matrices,
//! Schmidt decompositions, tensor powers, and Hermitian operator bases.
//!
//! All flat tensor indices are slot-1-major (first slot slowest), matching
//! the ordinary Kronecker product: `(A ⊗ B)[i*rows(B)+k, j*cols(B)+l] =
//! A[i,j] B[k,l]`.

use ndarray::{Array1, Array2};
use ndarray_linalg::{c64, Eigh, JobSvd, SVDDC, UPLO};

use crate::error::{Error, Result};
use crate::{checked_tensor_dim, tol};

/// Conjugate transpose.
pub fn adjoint(m: &Array2<c64>) -> Array2<c64> {
    let mut out = m.t().to_owned();
    out.mapv_inplace(|x| x.conj());
    out
}

/// Kronecker product with the slot-1-major convention.
pub fn kron(a: &Array2<c64>, b: &Array2<c64>) -> Array2<c64> {
    ndarray::linalg::kron(a, b)
}

/// Kronecker product of vectors: `(v ⊗ w)[i*len(w)+j] = v[i] w[j]`.
pub fn kron_vec(v: &Array1<c64>, w: &Array1<c64>) -> Array1<c64> {
    let mut out = Array1::zeros(v.len() * w.len());
    for (i, &vi) in v.iter().enumerate() {
        for (j, &wj) in w.iter().enumerate() {
            out[i * w.len() + j] = vi * wj;
        }
    }
    out
}

fn max_abs_entry(m: &Array2<c64>) -> f64 {
    m.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Largest entrywise deviation from Hermiticity.
pub fn hermiticity_defect(m: &Array2<c64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

/// A normalized pure state on a `d`-dimensional Hilbert space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Array1<c64>,
}

impl PureState {
    /// Wraps an amplitude vector, requiring unit norm within [`tol::NORM`].
    pub fn new(amps: Array1<c64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::InvalidArgument("empty state vector".into()));
        }
        let norm = vec_norm(&amps);
        if (norm - 1.0).abs() > tol::NORM {
            return Err(Error::InvalidArgument(format!(
                "state vector norm {norm} deviates from 1 by more than {}",
                tol::NORM
            )));
        }
        Ok(Self { amps })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn from_unnormalized(v: Array1<c64>) -> Result<Self> {
        let norm = vec_norm(&v);
        if norm < 1e-150 {
            return Err(Error::InvalidArgument(
                "cannot normalize a (near-)zero vector".into(),
            ));
        }
        Ok(Self {
            amps: v.mapv(|x| x / norm),
        })
    }

    /// The computational basis state `|index⟩`.
    pub fn basis_state(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amps = Array1::zeros(dim);
        amps[index] = c64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &Array1<c64> {
        &self.amps
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> Result<c64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "inner product between dimensions {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// The rank-one density operator `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> HermitianOperator {
        let d = self.dim();
        let mut m = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                m[[i, j]] = self.amps[i] * self.amps[j].conj();
            }
        }
        HermitianOperator { mat: m }
    }

    /// `|ψ⟩^⊗k`, subject to the dimension cap.
    pub fn kron_power(&self, k: usize) -> Result<PureState> {
        if k < 1 {
            return Err(Error::InvalidArgument("tensor power requires k >= 1".into()));
        }
        checked_tensor_dim(self.dim(), k)?;
        let mut out = self.amps.clone();
        for _ in 1..k {
            out = kron_vec(&out, &self.amps);
        }
        Ok(PureState { amps: out })
    }

    /// `u|ψ⟩` for a square matrix `u` (callers pass unitaries).
    pub fn rotated(&self, u: &Array2<c64>) -> Result<PureState> {
        if u.ncols() != self.dim() || u.nrows() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "matrix {}x{} applied to state of dimension {}",
                u.nrows(),
                u.ncols(),
                self.dim()
            )));
        }
        Ok(PureState {
            amps: u.dot(&self.amps),
        })
    }
}

fn vec_norm(v: &Array1<c64>) -> f64 {
    v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// A Hermitian operator on a `d`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    mat: Array2<c64>,
}

impl HermitianOperator {
    /// Wraps a square matrix, requiring Hermiticity within
    /// [`tol::HERMITICITY`].
    pub fn new(mat: Array2<c64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "operator must be square and nonempty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let defect = hermiticity_defect(&mat);
        if defect > tol::HERMITICITY {
            return Err(Error::InvalidArgument(format!(
                "matrix deviates from Hermiticity by {defect:e}"
            )));
        }
        Ok(Self { mat })
    }

    /// Symmetrizes `(m + m†)/2` before wrapping. For matrices that are
    /// Hermitian up to accumulated rounding.
    pub fn symmetrized(mat: Array2<c64>) -> Result<Self> {
        if mat.nrows() != mat.ncols() || mat.nrows() == 0 {
            return Err(Error::InvalidArgument(format!(
                "operator must be square and nonempty, got {}x{}",
                mat.nrows(),
                mat.ncols()
            )));
        }
        let h = adjoint(&mat);
        Self::new((mat + h) / c64::new(2.0, 0.0))
    }

    pub fn maximally_mixed(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(Self {
            mat: Array2::eye(d) / c64::new(d as f64, 0.0),
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

    pub fn trace(&self) -> f64 {
        self.mat.diag().iter().map(|x| x.re).sum()
    }

    /// Ascending eigenvalues.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        let (w, _) = self.mat.eigh(UPLO::Lower)?;
        Ok(w.to_vec())
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        Ok(self.eigenvalues()?[0])
    }

    /// Hermitian square root, clamping tiny negative eigenvalues to zero.
    pub fn sqrt_psd(&self) -> Result<HermitianOperator> {
        let (w, v) = self.mat.eigh(UPLO::Lower)?;
        let d = self.dim();
        let mut out = Array2::zeros((d, d));
        for (idx, &lambda) in w.iter().enumerate() {
            if lambda < tol::PSD {
                return Err(Error::InvalidArgument(format!(
                    "operator is not PSD: eigenvalue {lambda:e}"
                )));
            }
            let s = lambda.max(0.0).sqrt();
            let col = v.column(idx);
            for i in 0..d {
                for j in 0..d {
                    out[[i, j]] += c64::new(s, 0.0) * col[i] * col[j].conj();
                }
            }
        }
        HermitianOperator::symmetrized(out)
    }

    /// `op^⊗k`, subject to the dimension cap.
    pub fn kron_power(&self, k: usize) -> Result<HermitianOperator> {
        if k < 1 {
            return Err(Error::InvalidArgument("tensor power requires k >= 1".into()));
        }
        checked_tensor_dim(self.dim(), k)?;
        let mut out = self.mat.clone();
        for _ in 1..k {
            out = kron(&out, &self.mat);
        }
        Ok(HermitianOperator { mat: out })
    }

    /// `u · op · u†`.
    pub fn conjugated(&self, u: &Array2<c64>) -> Result<HermitianOperator> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "conjugation by {}x{} on operator of dimension {}",
                u.nrows(),
                u.ncols(),
                self.dim()
            )));
        }
        HermitianOperator::symmetrized(u.dot(&self.mat).dot(&adjoint(u)))
    }

    /// Traces out every tensor slot except `keep_slot` (0-based), given the
    /// per-slot dimension `d`.
    pub fn partial_trace_all_but(&self, d: usize, keep_slot: usize) -> Result<HermitianOperator> {
        let out = partial_trace_all_but_raw(&self.mat, d, keep_slot)?;
        HermitianOperator::symmetrized(out)
    }
}

/// Trace norm `‖m‖₁` of a Hermitian matrix, via eigendecomposition.
/// Eigenvalues below [`tol::EIGENVALUE_ZERO`] in magnitude count as zero.
pub fn trace_norm_hermitian(m: &Array2<c64>) -> Result<f64> {
    let defect = hermiticity_defect(m);
    if defect > tol::HERMITICITY {
        return Err(Error::InvalidArgument(format!(
            "trace norm input deviates from Hermiticity by {defect:e}"
        )));
    }
    let (w, _) = m.eigh(UPLO::Lower)?;
    Ok(w.iter()
        .map(|&x| if x.abs() < tol::EIGENVALUE_ZERO { 0.0 } else { x.abs() })
        .sum())
}

/// Trace distance `D(a, b) = ½‖a − b‖₁` between Hermitian operators.
///
/// For unit-trace PSD inputs the result lies in `[0, 1]`.
pub fn trace_distance(a: &HermitianOperator, b: &HermitianOperator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "trace distance between dimensions {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    Ok(0.5 * trace_norm_hermitian(&(a.matrix() - b.matrix()))?)
}

/// Trace distance between pure states: `√(1 − |⟨ψ|φ⟩|²)`.
pub fn pure_state_distance(psi: &PureState, phi: &PureState) -> Result<f64> {
    let overlap = psi.inner(phi)?.norm_sqr();
    Ok((1.0 - overlap).max(0.0).sqrt())
}

/// Which side of a bipartite state to keep under a partial trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subsystem {
    /// The small side (rows of the coefficient matrix).
    A,
    /// The complement (columns of the coefficient matrix).
    Complement,
}

/// A normalized pure state on `H_A ⊗ H_Ā`, stored as its `d_A × M`
/// coefficient matrix `C` with `⟨i|⊗⟨z|Ψ⟩ = C[i, z]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BipartiteState {
    coeffs: Array2<c64>,
}

impl BipartiteState {
    /// Wraps a coefficient matrix with unit Frobenius norm within
    /// [`tol::NORM`].
    pub fn new(coeffs: Array2<c64>) -> Result<Self> {
        if coeffs.nrows() == 0 || coeffs.ncols() == 0 {
            return Err(Error::InvalidArgument("empty coefficient matrix".into()));
        }
        let norm = coeffs.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > tol::NORM {
            return Err(Error::InvalidArgument(format!(
                "coefficient matrix Frobenius norm {norm} deviates from 1 by more than {}",
                tol::NORM
            )));
        }
        Ok(Self { coeffs })
    }

    /// Reshapes a flat state vector on dimension `d_a * m` (slot-1-major).
    pub fn from_vector(psi: &PureState, d_a: usize, m: usize) -> Result<Self> {
        if d_a * m != psi.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot split dimension {} as {d_a} x {m}",
                psi.dim()
            )));
        }
        let coeffs = Array2::from_shape_vec((d_a, m), psi.amplitudes().to_vec())
            .expect("shape checked above");
        Ok(Self { coeffs })
    }

    /// `(d_A, M)`.
    pub fn dims(&self) -> (usize, usize) {
        self.coeffs.dim()
    }

    pub fn coefficients(&self) -> &Array2<c64> {
        &self.coeffs
    }

    /// Flattens back to a state vector on `d_A * M`.
    pub fn to_vector(&self) -> PureState {
        let v = Array1::from_iter(self.coeffs.iter().cloned());
        PureState { amps: v }
    }

    /// `⟨self|other⟩`.
    pub fn overlap(&self, other: &BipartiteState) -> Result<c64> {
        if self.dims() != other.dims() {
            return Err(Error::DimensionMismatch(format!(
                "overlap between shapes {:?} and {:?}",
                self.dims(),
                other.dims()
            )));
        }
        Ok(self
            .coeffs
            .iter()
            .zip(other.coeffs.iter())
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// Reduced density operator on the kept side: `C C†` for
    /// [`Subsystem::A`], `C† C` for the complement.
    pub fn partial_trace(&self, keep: Subsystem) -> HermitianOperator {
        let c = &self.coeffs;
        let mat = match keep {
            Subsystem::A => c.dot(&adjoint(c)),
            Subsystem::Complement => adjoint(c).dot(c),
        };
        HermitianOperator::symmetrized(mat).expect("C·C† is Hermitian by construction")
    }

    /// Schmidt decomposition via SVD. Requires `d_A ≤ M`; weights come out
    /// nonincreasing, and right vectors for (near-)vanishing singular values
    /// are replaced by orthonormalized standard basis vectors in index order
    /// so rank-deficient inputs decompose deterministically.
    pub fn schmidt(&self) -> Result<SchmidtDecomposition> {
        let (d_a, m) = self.dims();
        if d_a > m {
            return Err(Error::InvalidArgument(format!(
                "Schmidt decomposition expects d_A <= M, got ({d_a}, {m})"
            )));
        }
        let (u, s, vt) = self.coeffs.svddc(JobSvd::Some)?;
        let u = u.ok_or_else(|| Error::InvalidArgument("SVD returned no U".into()))?;
        let vt = vt.ok_or_else(|| Error::InvalidArgument("SVD returned no VT".into()))?;

        // C = Σ σ_i u_i (v_i)†, so |Ψ⟩ = Σ σ_i |u_i⟩ ⊗ |w_i⟩ with w_i the
        // i-th row of VT taken verbatim.
        let mut order: Vec<usize> = (0..d_a).collect();
        order.sort_by(|&i, &j| s[j].partial_cmp(&s[i]).unwrap());

        let mut weights = Vec::with_capacity(d_a);
        let mut left = Vec::with_capacity(d_a);
        let mut right = Vec::with_capacity(d_a);
        for &i in &order {
            weights.push((s[i] as f64).powi(2));
            left.push(u.column(i).to_owned());
            right.push(vt.row(i).to_owned());
        }

        const SINGULAR_TOL: f64 = 1e-12;
        let rank = weights.iter().filter(|&&q| q.sqrt() > SINGULAR_TOL).count();
        if rank < d_a {
            let kept: Vec<Array1<c64>> = right[..rank].to_vec();
            let completion = orthonormal_completion(&kept, m, d_a - rank)?;
            for (slot, v) in completion.into_iter().enumerate() {
                right[rank + slot] = v;
            }
        }

        SchmidtDecomposition::new(weights, left, right)
    }
}

/// Gram-Schmidt of standard basis vectors against `kept`, in index order,
/// producing `count` extra orthonormal vectors on dimension `m`.
fn orthonormal_completion(
    kept: &[Array1<c64>],
    m: usize,
    count: usize,
) -> Result<Vec<Array1<c64>>> {
    let mut basis: Vec<Array1<c64>> = kept.to_vec();
    let mut out = Vec::with_capacity(count);
    for e_idx in 0..m {
        if out.len() == count {
            break;
        }
        let mut v: Array1<c64> = Array1::zeros(m);
        v[e_idx] = c64::new(1.0, 0.0);
        for b in &basis {
            let overlap: c64 = b.iter().zip(v.iter()).map(|(a, x)| a.conj() * x).sum();
            for i in 0..m {
                v[i] -= overlap * b[i];
            }
        }
        let norm = vec_norm(&v);
        if norm > 0.5 {
            let v = v.mapv(|x| x / norm);
            basis.push(v.clone());
            out.push(v);
        }
    }
    if out.len() < count {
        return Err(Error::RankDeficient(
            "failed to complete an orthonormal basis".into(),
        ));
    }
    Ok(out)
}

/// The result of a Schmidt decomposition: `|Ψ⟩ = Σ √q_i |u_i⟩ ⊗ |w_i⟩`.
#[derive(Debug, Clone)]
pub struct SchmidtDecomposition {
    weights: Vec<f64>,
    left: Vec<Array1<c64>>,
    right: Vec<Array1<c64>>,
}

impl SchmidtDecomposition {
    /// Validates weights (nonnegative, sum to one) and orthonormality of
    /// both bases within [`tol::ORTHONORMALITY`].
    pub fn new(
        weights: Vec<f64>,
        left: Vec<Array1<c64>>,
        right: Vec<Array1<c64>>,
    ) -> Result<Self> {
        let n = weights.len();
        if n == 0 || left.len() != n || right.len() != n {
            return Err(Error::InvalidArgument(
                "Schmidt components must have matching nonzero lengths".into(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > tol::NORM {
            return Err(Error::InvalidArgument(format!(
                "Schmidt weights sum to {sum}, expected 1"
            )));
        }
        if weights.iter().any(|&q| q < -1e-15) {
            return Err(Error::InvalidArgument("negative Schmidt weight".into()));
        }
        for family in [&left, &right] {
            for i in 0..n {
                for j in i..n {
                    let overlap: c64 = family[i]
                        .iter()
                        .zip(family[j].iter())
                        .map(|(a, b)| a.conj() * b)
                        .sum();
                    let expected = if i == j { 1.0 } else { 0.0 };
                    if (overlap - c64::new(expected, 0.0)).norm() > tol::ORTHONORMALITY {
                        return Err(Error::InvalidArgument(format!(
                            "Schmidt basis not orthonormal: |⟨{i}|{j}⟩ - δ| = {:e}",
                            (overlap - c64::new(expected, 0.0)).norm()
                        )));
                    }
                }
            }
        }
        Ok(Self {
            weights,
            left,
            right,
        })
    }

    /// Nonincreasing squared singular values; they sum to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn left_basis(&self) -> &[Array1<c64>] {
        &self.left
    }

    pub fn right_basis(&self) -> &[Array1<c64>] {
        &self.right
    }

    /// Number of weights exceeding `tolerance`.
    pub fn rank(&self, tolerance: f64) -> usize {
        self.weights.iter().filter(|&&q| q > tolerance).count()
    }

    /// Rebuilds `Σ √q_i |u_i⟩ ⊗ |w_i⟩` as a coefficient matrix.
    pub fn reassemble(&self) -> Result<BipartiteState> {
        let d_a = self.left[0].len();
        let m = self.right[0].len();
        let mut coeffs = Array2::zeros((d_a, m));
        for ((q, u), w) in self.weights.iter().zip(&self.left).zip(&self.right) {
            let s = c64::new(q.max(0.0).sqrt(), 0.0);
            for i in 0..d_a {
                for z in 0..m {
                    coeffs[[i, z]] += s * u[i] * w[z];
                }
            }
        }
        BipartiteState::new(coeffs)
    }
}

/// Traces out all tensor slots of `mat` (acting on `(C^d)^⊗k`, with `k`
/// inferred from the matrix dimension) except `keep_slot` (0-based).
/// Accepts arbitrary square matrices; see
/// [`HermitianOperator::partial_trace_all_but`] for the Hermitian wrapper.
pub fn partial_trace_all_but_raw(
    mat: &Array2<c64>,
    d: usize,
    keep_slot: usize,
) -> Result<Array2<c64>> {
    let dim = mat.nrows();
    if mat.ncols() != dim {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if d == 0 {
        return Err(Error::InvalidArgument("slot dimension must be positive".into()));
    }
    if d == 1 {
        if dim != 1 {
            return Err(Error::InvalidArgument(format!(
                "dimension {dim} is not a power of 1"
            )));
        }
        return Ok(mat.clone());
    }
    let mut k = 0usize;
    let mut p = 1usize;
    while p < dim {
        p *= d;
        k += 1;
    }
    if p != dim {
        return Err(Error::InvalidArgument(format!(
            "dimension {dim} is not a power of {d}"
        )));
    }
    if keep_slot >= k {
        return Err(Error::InvalidArgument(format!(
            "slot {keep_slot} out of range for k = {k}"
        )));
    }
    // stride of the kept slot in the flat index
    let stride = d.pow((k - 1 - keep_slot) as u32);
    let mut out = Array2::zeros((d, d));
    for m_idx in 0..dim {
        let a = (m_idx / stride) % d;
        let base = m_idx - a * stride;
        for b in 0..d {
            out[[a, b]] += mat[[m_idx, base + b * stride]];
        }
    }
    Ok(out)
}

/// An orthonormal basis of Hermitian `d × d` matrices under the
/// Hilbert-Schmidt inner product `Tr[X_α X_β] = δ_αβ`.
#[derive(Debug, Clone)]
pub struct OperatorBasis {
    elements: Vec<Array2<c64>>,
    dim: usize,
}

impl OperatorBasis {
    pub fn elements(&self) -> &[Array2<c64>] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Coefficients `Tr[X_α H]` of a Hermitian matrix in this basis.
    pub fn expand(&self, h: &Array2<c64>) -> Result<Vec<f64>> {
        if h.nrows() != self.dim || h.ncols() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "expanding {}x{} matrix in basis of dimension {}",
                h.nrows(),
                h.ncols(),
                self.dim
            )));
        }
        Ok(self
            .elements
            .iter()
            .map(|x| {
                x.iter()
                    .zip(h.t().iter())
                    .map(|(a, b)| (a * b).re)
                    .sum::<f64>()
            })
            .collect())
    }

    /// `Σ_α c_α X_α`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Result<Array2<c64>> {
        if coeffs.len() != self.elements.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} coefficients for a basis of {} elements",
                coeffs.len(),
                self.elements.len()
            )));
        }
        let mut out = Array2::zeros((self.dim, self.dim));
        for (c, x) in coeffs.iter().zip(&self.elements) {
            out = out + x.mapv(|e| e * c64::new(*c, 0.0));
        }
        Ok(out)
    }
}

/// The standard Hermitian orthonormal basis on `d × d` matrices:
/// `1/√d`, then `(E_ij + E_ji)/√2` and `i(E_ij − E_ji)/√2` for `i < j`,
/// then the diagonal generalized Gell-Mann matrices.
pub fn hermitian_operator_basis(d: usize) -> Result<OperatorBasis> {
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    let mut elements = Vec::with_capacity(d * d);

    let mut ident = Array2::<c64>::eye(d);
    ident.mapv_inplace(|x| x / c64::new((d as f64).sqrt(), 0.0));
    elements.push(ident);

    let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
    for i in 0..d {
        for j in (i + 1)..d {
            let mut sym = Array2::<c64>::zeros((d, d));
            sym[[i, j]] = c64::new(inv_sqrt2, 0.0);
            sym[[j, i]] = c64::new(inv_sqrt2, 0.0);
            elements.push(sym);

            let mut asym = Array2::<c64>::zeros((d, d));
            asym[[i, j]] = c64::new(0.0, inv_sqrt2);
            asym[[j, i]] = c64::new(0.0, -inv_sqrt2);
            elements.push(asym);
        }
    }

    for l in 1..d {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut diag = Array2::<c64>::zeros((d, d));
        for j in 0..l {
            diag[[j, j]] = c64::new(norm, 0.0);
        }
        diag[[l, l]] = c64::new(-(l as f64) * norm, 0.0);
        elements.push(diag);
    }

    debug_assert_eq!(elements.len(), d * d);
    Ok(OperatorBasis { elements, dim: d })
}

/// `exp(t G)` for skew-Hermitian `G`, via eigendecomposition of `iG`.
pub fn exp_skew_hermitian(g: &Array2<c64>, t: f64) -> Result<Array2<c64>> {
    let h = g.mapv(|x| x * c64::new(0.0, 1.0));
    let defect = hermiticity_defect(&h);
    if defect > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "matrix is not skew-Hermitian (defect {defect:e})"
        )));
    }
    let h = (h.clone() + adjoint(&h)) / c64::new(2.0, 0.0);
    let (w, v) = h.eigh(UPLO::Lower)?;
    // exp(tG) = exp(-itH) = V exp(-itλ) V†
    let n = g.nrows();
    let mut phases = Array2::zeros((n, n));
    for (i, &lambda) in w.iter().enumerate() {
        phases[[i, i]] = c64::new(0.0, -t * lambda).exp();
    }
    Ok(v.dot(&phases).dot(&adjoint(&v)))
}
