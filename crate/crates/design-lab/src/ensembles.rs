//! Post-measurement ensembles, row ensembles of isometries, moment
//! operators, the exact Haar moment operator, and the design distance.
//!
//! Two construction paths produce the same ensembles and are kept
//! deliberately: the explicit measurement path
//! ([`projected_ensemble`]) costs `O(M²)` and serves as the oracle at small
//! `M`; the isometry path ([`row_ensemble`] / [`deformed_row_ensemble`])
//! costs `O(M d_A²)` and is what experiments at large `M` run. Measuring the
//! state built by [`deformed_purification`]`(V, ρ_A)` in the basis with
//! unitary `U` reproduces `deformed_row_ensemble(UᵀV, ρ_A)` member by member
//! (up to global phases of the members).

use ndarray::{Array1, Array2};
use ndarray_linalg::c64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sampling::{HaarUnitary, Isometry};
use crate::tensor::{
    adjoint, kron_vec, trace_distance, trace_norm_hermitian, BipartiteState, HermitianOperator,
    PureState,
};
use crate::{checked_tensor_dim, tol};

/// How a [`StateEnsemble`] was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleSource {
    Projected,
    Row,
    DeformedRow,
}

/// A finite ensemble `{(p_z, |ψ_z⟩)}` of pure states on dimension `d_A`.
///
/// Zero-probability outcomes (below [`tol::PROBABILITY_DROP`]) are dropped
/// at construction and the rest renormalized; the removed mass is recorded
/// in [`StateEnsemble::renormalization_shift`] and must stay below
/// [`tol::RENORMALIZATION_SHIFT`].
#[derive(Debug, Clone)]
pub struct StateEnsemble {
    members: Vec<(f64, PureState)>,
    d_a: usize,
    source: EnsembleSource,
    renorm_shift: f64,
}

impl StateEnsemble {
    /// Builds from raw `(probability, state)` pairs, applying the drop /
    /// renormalization rule and validating the invariants.
    pub fn new(
        raw: Vec<(f64, PureState)>,
        d_a: usize,
        source: EnsembleSource,
    ) -> Result<Self> {
        if raw.is_empty() {
            return Err(Error::InvalidArgument("empty ensemble".into()));
        }
        for (p, psi) in &raw {
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "ensemble probability {p} is not a finite nonnegative number"
                )));
            }
            if psi.dim() != d_a {
                return Err(Error::DimensionMismatch(format!(
                    "ensemble member of dimension {} in ensemble on {}",
                    psi.dim(),
                    d_a
                )));
            }
        }
        let total: f64 = raw.iter().map(|(p, _)| p).sum();
        if (total - 1.0).abs() > tol::PROBABILITY_SUM {
            return Err(Error::InvalidArgument(format!(
                "ensemble probabilities sum to {total}, expected 1"
            )));
        }
        let mut members: Vec<(f64, PureState)> = raw
            .into_iter()
            .filter(|(p, _)| *p >= tol::PROBABILITY_DROP)
            .collect();
        if members.is_empty() {
            return Err(Error::InvalidArgument(
                "all ensemble members fell below the probability threshold".into(),
            ));
        }
        let kept: f64 = members.iter().map(|(p, _)| p).sum();
        let shift = (total - kept).abs();
        if shift > tol::RENORMALIZATION_SHIFT {
            return Err(Error::InvalidArgument(format!(
                "dropping near-zero outcomes removed probability mass {shift:e}"
            )));
        }
        if shift > 0.0 {
            for (p, _) in members.iter_mut() {
                *p /= kept;
            }
        }
        Ok(Self {
            members,
            d_a,
            source,
            renorm_shift: shift,
        })
    }

    pub fn members(&self) -> &[(f64, PureState)] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn source(&self) -> EnsembleSource {
        self.source
    }

    /// Probability mass removed by the zero-outcome drop rule.
    pub fn renormalization_shift(&self) -> f64 {
        self.renorm_shift
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.members.iter().map(|(p, _)| *p).collect()
    }

    /// The ensemble average `Σ_z p_z |ψ_z⟩⟨ψ_z|` (the k = 1 moment).
    pub fn average_state(&self) -> HermitianOperator {
        let d = self.d_a;
        let mut m = Array2::<c64>::zeros((d, d));
        for (p, psi) in &self.members {
            let amps = psi.amplitudes();
            for i in 0..d {
                for j in 0..d {
                    m[[i, j]] += c64::new(*p, 0.0) * amps[i] * amps[j].conj();
                }
            }
        }
        HermitianOperator::symmetrized(m).expect("convex mixture of projectors is Hermitian")
    }

    /// The k-th moment operator `Σ_z p_z |ψ_z⟩⟨ψ_z|^⊗k`, accumulated in
    /// member order.
    pub fn moment_operator(&self, k: usize) -> Result<MomentOperator> {
        if k < 1 {
            return Err(Error::InvalidArgument("moment order must be >= 1".into()));
        }
        let dim = checked_tensor_dim(self.d_a, k)?;
        let mut m = Array2::<c64>::zeros((dim, dim));
        let mut scratch: Array1<c64>;
        for (p, psi) in &self.members {
            scratch = psi.amplitudes().clone();
            for _ in 1..k {
                scratch = kron_vec(&scratch, psi.amplitudes());
            }
            let w = c64::new(*p, 0.0);
            for i in 0..dim {
                let wi = w * scratch[i];
                for j in 0..dim {
                    m[[i, j]] += wi * scratch[j].conj();
                }
            }
        }
        MomentOperator::new(HermitianOperator::symmetrized(m)?, self.d_a, k)
    }

    /// Every member rotated by `u` (probabilities unchanged).
    pub fn rotated(&self, u: &Array2<c64>) -> Result<StateEnsemble> {
        let members = self
            .members
            .iter()
            .map(|(p, psi)| Ok((*p, psi.rotated(u)?)))
            .collect::<Result<Vec<_>>>()?;
        StateEnsemble::new(members, self.d_a, self.source)
    }

    /// Serializes to the documented JSON schema (complex numbers as
    /// `[re, im]` pairs).
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&EnsembleJson::from(self)).expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let parsed: EnsembleJson =
            serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("json: {e}")))?;
        parsed.try_into()
    }
}

/// JSON wire form of [`StateEnsemble`]; `schema` is versioned.
#[derive(Serialize, Deserialize)]
struct EnsembleJson {
    schema: String,
    d_a: usize,
    source: EnsembleSource,
    renormalization_shift: f64,
    members: Vec<MemberJson>,
}

#[derive(Serialize, Deserialize)]
struct MemberJson {
    p: f64,
    state: Vec<[f64; 2]>,
}

const ENSEMBLE_SCHEMA: &str = "design-lab/ensemble/v1";
const MOMENT_SCHEMA: &str = "design-lab/moment-operator/v1";

impl From<&StateEnsemble> for EnsembleJson {
    fn from(e: &StateEnsemble) -> Self {
        EnsembleJson {
            schema: ENSEMBLE_SCHEMA.into(),
            d_a: e.d_a,
            source: e.source,
            renormalization_shift: e.renorm_shift,
            members: e
                .members
                .iter()
                .map(|(p, psi)| MemberJson {
                    p: *p,
                    state: psi.amplitudes().iter().map(|x| [x.re, x.im]).collect(),
                })
                .collect(),
        }
    }
}

impl TryFrom<EnsembleJson> for StateEnsemble {
    type Error = Error;

    fn try_from(j: EnsembleJson) -> Result<Self> {
        if j.schema != ENSEMBLE_SCHEMA {
            return Err(Error::InvalidArgument(format!(
                "unknown ensemble schema {:?}",
                j.schema
            )));
        }
        let members = j
            .members
            .into_iter()
            .map(|m| {
                let amps = Array1::from_iter(m.state.iter().map(|&[re, im]| c64::new(re, im)));
                Ok((m.p, PureState::new(amps)?))
            })
            .collect::<Result<Vec<_>>>()?;
        StateEnsemble::new(members, j.d_a, j.source)
    }
}

/// An orthonormal measurement basis on the complement: the columns of a
/// unitary are the basis vectors `|u_z⟩ = U|z⟩`.
#[derive(Debug, Clone)]
pub struct MeasurementBasis {
    unitary: HaarUnitary,
}

impl MeasurementBasis {
    pub fn from_unitary(unitary: HaarUnitary) -> Self {
        Self { unitary }
    }

    /// The computational basis.
    pub fn identity(dim: usize) -> Result<Self> {
        Ok(Self {
            unitary: HaarUnitary::identity(dim)?,
        })
    }

    pub fn dim(&self) -> usize {
        self.unitary.dim()
    }

    pub fn unitary(&self) -> &HaarUnitary {
        &self.unitary
    }
}

/// The ensemble of post-measurement states of `state` under a projective
/// measurement of the complement in `basis`: outcome `z` has
/// `p_z = ⟨Ψ|(1 ⊗ |u_z⟩⟨u_z|)|Ψ⟩` and `|ψ_z⟩ ∝ (1 ⊗ ⟨u_z|)|Ψ⟩`.
pub fn projected_ensemble(
    state: &BipartiteState,
    basis: &MeasurementBasis,
) -> Result<StateEnsemble> {
    let (d_a, m) = state.dims();
    if basis.dim() != m {
        return Err(Error::DimensionMismatch(format!(
            "basis dimension {} does not match complement dimension {m}",
            basis.dim()
        )));
    }
    let c = state.coefficients();
    let u = basis.unitary().matrix();
    let mut raw = Vec::with_capacity(m);
    for z in 0..m {
        // (1 ⊗ ⟨u_z|)|Ψ⟩ = C · conj(u_z)
        let mut v = Array1::<c64>::zeros(d_a);
        for i in 0..d_a {
            let mut acc = c64::new(0.0, 0.0);
            for zp in 0..m {
                acc += c[[i, zp]] * u[[zp, z]].conj();
            }
            v[i] = acc;
        }
        let p: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if p >= tol::PROBABILITY_DROP {
            raw.push((p, PureState::from_unnormalized(v)?));
        } else {
            raw.push((p, PureState::basis_state(d_a, 0)?)); // dropped below
        }
    }
    StateEnsemble::new(raw, d_a, EnsembleSource::Projected)
}

/// [`projected_ensemble`] in the computational basis, without materializing
/// an `M × M` identity: members are the normalized columns of the
/// coefficient matrix.
pub fn computational_basis_ensemble(state: &BipartiteState) -> Result<StateEnsemble> {
    let (d_a, m) = state.dims();
    let c = state.coefficients();
    let mut raw = Vec::with_capacity(m);
    for z in 0..m {
        let v = c.column(z).to_owned();
        let p: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if p >= tol::PROBABILITY_DROP {
            raw.push((p, PureState::from_unnormalized(v)?));
        } else {
            raw.push((p, PureState::basis_state(d_a, 0)?));
        }
    }
    StateEnsemble::new(raw, d_a, EnsembleSource::Projected)
}

/// The row ensemble of an isometry: member `z` is `V†|z⟩` normalized, with
/// probability `‖V†|z⟩‖² / d_A`. Always an exact 1-design.
pub fn row_ensemble(v: &Isometry) -> Result<StateEnsemble> {
    let (m, d_a) = v.dims();
    let mat = v.matrix();
    let mut raw = Vec::with_capacity(m);
    for z in 0..m {
        // V†|z⟩ = conjugate of row z
        let vec = Array1::from_iter(mat.row(z).iter().map(|x| x.conj()));
        let p: f64 = vec.iter().map(|x: &c64| x.norm_sqr()).sum::<f64>() / d_a as f64;
        if p >= tol::PROBABILITY_DROP {
            raw.push((p, PureState::from_unnormalized(vec)?));
        } else {
            raw.push((p, PureState::basis_state(d_a, 0)?));
        }
    }
    StateEnsemble::new(raw, d_a, EnsembleSource::Row)
}

/// The ensemble obtained by measuring `(√(d_A ρ_A) ⊗ 1)|Φ_V⟩` in the basis
/// encoded by `V`: member `z` is `√ρ_A V†|z⟩` normalized, with probability
/// `⟨z|V ρ_A V†|z⟩`. Costs `O(M d_A²)` instead of the `O(M²)` explicit
/// path.
pub fn deformed_row_ensemble(
    v: &Isometry,
    rho_a: &HermitianOperator,
) -> Result<StateEnsemble> {
    let (m, d_a) = v.dims();
    if rho_a.dim() != d_a {
        return Err(Error::DimensionMismatch(format!(
            "density matrix of dimension {} with isometry of width {d_a}",
            rho_a.dim()
        )));
    }
    if (rho_a.trace() - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidArgument(format!(
            "density matrix trace {} deviates from 1",
            rho_a.trace()
        )));
    }
    let min_eig = rho_a.min_eigenvalue()?;
    if min_eig < tol::PSD {
        return Err(Error::InvalidArgument(format!(
            "density matrix not PSD: eigenvalue {min_eig:e}"
        )));
    }
    let sqrt_rho = rho_a.sqrt_psd()?;
    let sqrt_mat = sqrt_rho.matrix();
    let mat = v.matrix();
    let mut raw = Vec::with_capacity(m);
    for z in 0..m {
        let x = Array1::from_iter(mat.row(z).iter().map(|e| e.conj()));
        let vec = sqrt_mat.dot(&x);
        let p: f64 = vec.iter().map(|e| e.norm_sqr()).sum();
        if p >= tol::PROBABILITY_DROP {
            raw.push((p, PureState::from_unnormalized(vec)?));
        } else {
            raw.push((p, PureState::basis_state(d_a, 0)?));
        }
    }
    StateEnsemble::new(raw, d_a, EnsembleSource::DeformedRow)
}

/// The maximally entangled purification `|Φ_V⟩` encoded by an isometry:
/// coefficient matrix `V†/√d_A`. Its reduced state on the small side is
/// exactly `1/d_A`, and measuring it in the computational basis yields
/// [`row_ensemble`]`(V)`.
pub fn isometry_purification(v: &Isometry) -> Result<BipartiteState> {
    let (_, d_a) = v.dims();
    let coeffs = adjoint(v.matrix()) / c64::new((d_a as f64).sqrt(), 0.0);
    BipartiteState::new(coeffs)
}

/// `(√(d_A ρ_A) ⊗ 1)|Φ_V⟩`: the purification of `ρ_A` whose
/// computational-basis projected ensemble is
/// [`deformed_row_ensemble`]`(V, ρ_A)`.
pub fn deformed_purification(
    v: &Isometry,
    rho_a: &HermitianOperator,
) -> Result<BipartiteState> {
    let (_, d_a) = v.dims();
    if rho_a.dim() != d_a {
        return Err(Error::DimensionMismatch(format!(
            "density matrix of dimension {} with isometry of width {d_a}",
            rho_a.dim()
        )));
    }
    let sqrt_rho = rho_a.sqrt_psd()?;
    let coeffs = sqrt_rho.matrix().dot(&adjoint(v.matrix()));
    BipartiteState::new(coeffs)
}

/// A k-th moment operator: Hermitian, PSD, unit trace, supported on the
/// symmetric subspace of `(C^{d_A})^⊗k`.
#[derive(Debug, Clone)]
pub struct MomentOperator {
    op: HermitianOperator,
    d_a: usize,
    k: usize,
}

impl MomentOperator {
    /// Validates the moment-operator invariants: Hermiticity (by type),
    /// PSD within [`tol::PSD`], unit trace within
    /// [`tol::PROBABILITY_SUM`], and symmetric-subspace support within
    /// [`tol::SYMMETRIC_SUBSPACE`] in trace norm.
    pub fn new(op: HermitianOperator, d_a: usize, k: usize) -> Result<Self> {
        let dim = checked_tensor_dim(d_a, k)?;
        if op.dim() != dim {
            return Err(Error::DimensionMismatch(format!(
                "moment operator dimension {} != {d_a}^{k}",
                op.dim()
            )));
        }
        let trace = op.trace();
        if (trace - 1.0).abs() > tol::PROBABILITY_SUM {
            return Err(Error::InvalidArgument(format!(
                "moment operator trace {trace} deviates from 1"
            )));
        }
        let min_eig = op.min_eigenvalue()?;
        if min_eig < tol::PSD {
            return Err(Error::InvalidArgument(format!(
                "moment operator not PSD: eigenvalue {min_eig:e}"
            )));
        }
        let p_sym = symmetric_projector(d_a, k)?;
        let leak = &p_sym.dot(op.matrix()).dot(&p_sym) - op.matrix();
        if trace_norm_hermitian(&leak)? > tol::SYMMETRIC_SUBSPACE {
            return Err(Error::InvalidArgument(
                "moment operator leaks out of the symmetric subspace".into(),
            ));
        }
        Ok(Self { op, d_a, k })
    }

    pub fn operator(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Vec<[f64; 2]>> = self
            .op
            .matrix()
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|x| [x.re, x.im]).collect())
            .collect();
        serde_json::to_string_pretty(&MomentJson {
            schema: MOMENT_SCHEMA.into(),
            d_a: self.d_a,
            k: self.k,
            op: rows,
        })
        .expect("plain data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let parsed: MomentJson =
            serde_json::from_str(s).map_err(|e| Error::InvalidArgument(format!("json: {e}")))?;
        if parsed.schema != MOMENT_SCHEMA {
            return Err(Error::InvalidArgument(format!(
                "unknown moment schema {:?}",
                parsed.schema
            )));
        }
        let dim = parsed.op.len();
        let mut mat = Array2::zeros((dim, dim));
        for (i, row) in parsed.op.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidArgument("ragged moment matrix".into()));
            }
            for (j, &[re, im]) in row.iter().enumerate() {
                mat[[i, j]] = c64::new(re, im);
            }
        }
        MomentOperator::new(HermitianOperator::new(mat)?, parsed.d_a, parsed.k)
    }
}

#[derive(Serialize, Deserialize)]
struct MomentJson {
    schema: String,
    d_a: usize,
    k: usize,
    op: Vec<Vec<[f64; 2]>>,
}

/// The orthogonal projector onto the symmetric subspace of `(C^d)^⊗k`,
/// built as the average of all `k!` slot-permutation operators.
pub fn symmetric_projector(d: usize, k: usize) -> Result<Array2<c64>> {
    if d == 0 || k == 0 {
        return Err(Error::InvalidArgument(
            "symmetric projector needs d >= 1, k >= 1".into(),
        ));
    }
    let dim = checked_tensor_dim(d, k)?;
    let mut perms: Vec<Vec<usize>> = Vec::new();
    let mut slots: Vec<usize> = (0..k).collect();
    heap_permutations(&mut slots, k, &mut perms);
    let weight = c64::new(1.0 / perms.len() as f64, 0.0);

    let mut p = Array2::<c64>::zeros((dim, dim));
    let mut digits = vec![0usize; k];
    for col in 0..dim {
        // decompose col into slot digits, slot-1-major
        let mut rem = col;
        for s in (0..k).rev() {
            digits[s] = rem % d;
            rem /= d;
        }
        for perm in &perms {
            // P_π maps |i_1 … i_k⟩ to the permuted word
            let mut row = 0usize;
            for s in 0..k {
                row = row * d + digits[perm[s]];
            }
            p[[row, col]] += weight;
        }
    }
    Ok(p)
}

fn heap_permutations(items: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
    if n == 1 {
        out.push(items.clone());
        return;
    }
    for i in 0..n {
        heap_permutations(items, n - 1, out);
        if n % 2 == 0 {
            items.swap(i, n - 1);
        } else {
            items.swap(0, n - 1);
        }
    }
}

/// The Haar k-th moment operator `E_ψ |ψ⟩⟨ψ|^⊗k = P_sym / binom(d+k−1, k)`.
pub fn haar_moment_operator(d: usize, k: usize) -> Result<MomentOperator> {
    let p_sym = symmetric_projector(d, k)?;
    let sym_dim = binomial(d + k - 1, k);
    let op = HermitianOperator::symmetrized(p_sym / c64::new(sym_dim as f64, 0.0))?;
    MomentOperator::new(op, d, k)
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut num: u128 = 1;
    let mut den: u128 = 1;
    for i in 0..k {
        num *= (n - i) as u128;
        den *= (i + 1) as u128;
    }
    num / den
}

/// The design distance of Eq.-(4) type: trace distance between the
/// ensemble's k-th moment operator and the Haar moment operator.
pub fn design_distance(e: &StateEnsemble, k: usize) -> Result<f64> {
    let m = e.moment_operator(k)?;
    let haar = haar_moment_operator(e.d_a(), k)?;
    trace_distance(m.operator(), haar.operator())
}

/// The exactly thermalized companion of a bipartite state: keeps the
/// Schmidt bases and flattens the spectrum, `|Φ⟩ = (1/√d_A) Σ_i |i⟩⊗|φ_i⟩`.
/// Requires full Schmidt rank, which holds whenever
/// `D(ρ_A, 1/d_A) < 1/(2 d_A)`.
pub fn exact_thermal_companion(state: &BipartiteState) -> Result<BipartiteState> {
    let (d_a, m) = state.dims();
    let sd = state.schmidt()?;
    const RANK_TOL: f64 = 1e-14;
    if sd.rank(RANK_TOL) < d_a {
        return Err(Error::RankDeficient(format!(
            "Schmidt rank {} < d_A = {d_a}; the flattened companion is undefined",
            sd.rank(RANK_TOL)
        )));
    }
    let s = c64::new(1.0 / (d_a as f64).sqrt(), 0.0);
    let mut coeffs = Array2::zeros((d_a, m));
    for (u, w) in sd.left_basis().iter().zip(sd.right_basis()) {
        for i in 0..d_a {
            for z in 0..m {
                coeffs[[i, z]] += s * u[i] * w[z];
            }
        }
    }
    BipartiteState::new(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::{haar_isometry, haar_unitary, RngStream};
    use crate::tensor::Subsystem;

    fn c(re: f64, im: f64) -> c64 {
        c64::new(re, im)
    }

    #[test]
    fn bell_state_in_identity_basis() {
        let s = 1.0 / 2.0_f64.sqrt();
        let coeffs = ndarray::array![[c(s, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(s, 0.0)]];
        let state = BipartiteState::new(coeffs).unwrap();
        let basis = MeasurementBasis::identity(2).unwrap();
        let e = projected_ensemble(&state, &basis).unwrap();
        assert_eq!(e.len(), 2);
        for (z, (p, psi)) in e.members().iter().enumerate() {
            assert!((p - 0.5).abs() < 1e-12);
            let expect = PureState::basis_state(2, z).unwrap();
            assert!((psi.inner(&expect).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn projected_probabilities_sum_to_one() {
        let stream = RngStream::new(2);
        let mut rng = stream.rng();
        let psi = crate::sampling::haar_pure_state(24, &mut rng).unwrap();
        let state = BipartiteState::from_vector(&psi, 3, 8).unwrap();
        let basis = MeasurementBasis::from_unitary(haar_unitary(8, &mut rng).unwrap());
        let e = projected_ensemble(&state, &basis).unwrap();
        let total: f64 = e.probabilities().iter().sum();
        assert!((total - 1.0).abs() < 1e-10);
        assert!(e.renormalization_shift() < 1e-10);
    }

    #[test]
    fn row_ensemble_of_standard_embedding() {
        let w = Isometry::standard_embedding(6, 3).unwrap();
        let e = row_ensemble(&w).unwrap();
        // zero rows dropped, the rest are the basis states at weight 1/d_A
        assert_eq!(e.len(), 3);
        for (z, (p, psi)) in e.members().iter().enumerate() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
            let expect = PureState::basis_state(3, z).unwrap();
            assert!((psi.inner(&expect).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn row_ensemble_is_exact_one_design() {
        let stream = RngStream::new(8);
        let mut rng = stream.rng();
        for &(m, d) in &[(8usize, 2usize), (16, 3), (32, 4)] {
            let v = haar_isometry(m, d, &mut rng).unwrap();
            let e = row_ensemble(&v).unwrap();
            let avg = e.average_state();
            let mixed = HermitianOperator::maximally_mixed(d).unwrap();
            let dist = trace_distance(&avg, &mixed).unwrap();
            assert!(dist < 1e-10, "1-design defect {dist:e}");
        }
    }

    #[test]
    fn row_ensemble_of_two_by_two_unitary() {
        let stream = RngStream::new(21);
        let mut rng = stream.rng();
        let u = haar_unitary(2, &mut rng).unwrap();
        let v = Isometry::new(u.matrix().clone()).unwrap();
        let e = row_ensemble(&v).unwrap();
        assert_eq!(e.len(), 2);
        for (p, _) in e.members() {
            assert!((p - 0.5).abs() < 1e-12);
        }
        // rows of a unitary are orthonormal
        let overlap = e.members()[0].1.inner(&e.members()[1].1).unwrap().norm();
        assert!(overlap < 1e-12);
    }

    #[test]
    fn deformed_row_reduces_to_row_at_maximal_mixedness() {
        let stream = RngStream::new(5);
        let mut rng = stream.rng();
        let v = haar_isometry(12, 3, &mut rng).unwrap();
        let rho = HermitianOperator::maximally_mixed(3).unwrap();
        let deformed = deformed_row_ensemble(&v, &rho).unwrap();
        let plain = row_ensemble(&v).unwrap();
        for ((p, psi), (r, phi)) in deformed.members().iter().zip(plain.members()) {
            assert!((p - r).abs() < 1e-12);
            assert!((psi.inner(phi).unwrap().norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deformed_row_with_rank_one_density() {
        let stream = RngStream::new(6);
        let mut rng = stream.rng();
        let v = haar_isometry(8, 2, &mut rng).unwrap();
        let rho = PureState::basis_state(2, 0).unwrap().projector();
        let e = deformed_row_ensemble(&v, &rho).unwrap();
        let zero = PureState::basis_state(2, 0).unwrap();
        for (_, psi) in e.members() {
            assert!((psi.inner(&zero).unwrap().norm() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn projected_path_matches_deformed_row_path() {
        // measuring the deformed purification of V in basis U reproduces the
        // deformed row ensemble of UᵀV
        let stream = RngStream::new(14);
        let mut rng = stream.rng();
        let (m, d_a) = (8usize, 2usize);
        let v = haar_isometry(m, d_a, &mut rng).unwrap();
        let state = crate::sampling::perturbed_thermal_state(d_a, m, 0.05, &mut rng).unwrap();
        let rho = state.partial_trace(Subsystem::A);
        let u = haar_unitary(m, &mut rng).unwrap();

        let psi = deformed_purification(&v, &rho).unwrap();
        let explicit = projected_ensemble(&psi, &MeasurementBasis::from_unitary(u.clone())).unwrap();

        let ut_v = Isometry::new(u.matrix().t().to_owned().dot(v.matrix())).unwrap();
        let fast = deformed_row_ensemble(&ut_v, &rho).unwrap();

        assert_eq!(explicit.len(), fast.len());
        for ((p, a), (r, b)) in explicit.members().iter().zip(fast.members()) {
            assert!((p - r).abs() < 1e-10, "probability mismatch {p} vs {r}");
            let fid = a.inner(b).unwrap().norm_sqr();
            assert!(fid > 1.0 - 1e-10, "member fidelity {fid}");
        }
    }

    #[test]
    fn moment_operator_singleton_and_trace() {
        let psi = PureState::from_unnormalized(ndarray::array![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let e = StateEnsemble::new(vec![(1.0, psi.clone())], 2, EnsembleSource::Projected).unwrap();
        let m = e.moment_operator(3).unwrap();
        let expect = psi.kron_power(3).unwrap().projector();
        assert!(trace_distance(m.operator(), &expect).unwrap() < 1e-12);
        assert!((m.operator().trace() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn moment_operator_two_basis_states() {
        let e = StateEnsemble::new(
            vec![
                (0.5, PureState::basis_state(2, 0).unwrap()),
                (0.5, PureState::basis_state(2, 1).unwrap()),
            ],
            2,
            EnsembleSource::Projected,
        )
        .unwrap();
        let m = e.moment_operator(2).unwrap();
        // diag(1/2, 0, 0, 1/2) in the {00, 01, 10, 11} basis
        let mut expect = Array2::<c64>::zeros((4, 4));
        expect[[0, 0]] = c(0.5, 0.0);
        expect[[3, 3]] = c(0.5, 0.0);
        let expect = HermitianOperator::new(expect).unwrap();
        assert!(trace_distance(m.operator(), &expect).unwrap() < 1e-14);
    }

    #[test]
    fn haar_moment_first_order_and_qubit_pair() {
        for d in [2usize, 3, 5] {
            let m1 = haar_moment_operator(d, 1).unwrap();
            let mixed = HermitianOperator::maximally_mixed(d).unwrap();
            assert!(trace_distance(m1.operator(), &mixed).unwrap() < 1e-12);
        }
        let m2 = haar_moment_operator(2, 2).unwrap();
        let mut eigs = m2.operator().eigenvalues().unwrap();
        eigs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expect = [0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0];
        for (got, want) in eigs.iter().zip(expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetric_projector_is_idempotent() {
        for &(d, k) in &[(2usize, 2usize), (2, 3), (3, 2)] {
            let p = symmetric_projector(d, k).unwrap();
            let diff = p.dot(&p) - &p;
            assert!(
                trace_norm_hermitian(&diff).unwrap() < 1e-10,
                "P_sym² != P_sym at ({d}, {k})"
            );
        }
    }

    #[test]
    fn design_distance_row_ensemble_first_order_is_zero() {
        let stream = RngStream::new(9);
        let mut rng = stream.rng();
        let v = haar_isometry(16, 3, &mut rng).unwrap();
        let e = row_ensemble(&v).unwrap();
        assert!(design_distance(&e, 1).unwrap() < 1e-10);
    }

    #[test]
    fn design_distance_standard_embedding_k2() {
        let w = Isometry::standard_embedding(8, 2).unwrap();
        let e = row_ensemble(&w).unwrap();
        let d = design_distance(&e, 2).unwrap();
        assert!((d - 1.0 / 3.0).abs() < 1e-12, "distance {d}");
    }

    #[test]
    fn unitary_covariance_of_moments() {
        let stream = RngStream::new(33);
        let mut rng = stream.rng();
        let v = haar_isometry(16, 2, &mut rng).unwrap();
        let u_a = haar_unitary(2, &mut rng).unwrap();
        let e = row_ensemble(&v).unwrap();
        let rotated = e.rotated(u_a.matrix()).unwrap();

        let k = 2;
        let m_orig = e.moment_operator(k).unwrap();
        let m_rot = rotated.moment_operator(k).unwrap();
        let u_k = crate::tensor::kron(u_a.matrix(), u_a.matrix());
        let conj = m_orig.operator().conjugated(&u_k).unwrap();
        assert!(trace_distance(&conj, m_rot.operator()).unwrap() < 1e-10);
    }

    #[test]
    fn exact_thermal_companion_basics() {
        let stream = RngStream::new(41);
        let mut rng = stream.rng();

        // already maximally mixed: companion equals the input up to phase
        let state = crate::sampling::perturbed_thermal_state(2, 8, 0.0, &mut rng).unwrap();
        let phi = exact_thermal_companion(&state).unwrap();
        assert!((phi.overlap(&state).unwrap().norm() - 1.0).abs() < 1e-10);

        // reduced state of the companion is exactly mixed
        let state = crate::sampling::perturbed_thermal_state(2, 8, 0.2, &mut rng).unwrap();
        let phi = exact_thermal_companion(&state).unwrap();
        let rho = phi.partial_trace(Subsystem::A);
        let mixed = HermitianOperator::maximally_mixed(2).unwrap();
        assert!(trace_distance(&rho, &mixed).unwrap() < 1e-12);
    }

    #[test]
    fn ensemble_json_round_trip() {
        let stream = RngStream::new(55);
        let mut rng = stream.rng();
        let v = haar_isometry(6, 2, &mut rng).unwrap();
        let e = row_ensemble(&v).unwrap();
        let json = e.to_json();
        let back = StateEnsemble::from_json(&json).unwrap();
        assert_eq!(e.len(), back.len());
        for ((p, a), (q, b)) in e.members().iter().zip(back.members()) {
            assert_eq!(p, q, "probability mismatch {p:e} vs {q:e}");
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert_eq!(
                    (x.re.to_bits(), x.im.to_bits()),
                    (y.re.to_bits(), y.im.to_bits()),
                    "amplitude mismatch {x} vs {y}"
                );
            }
        }

        let m = e.moment_operator(2).unwrap();
        let back = MomentOperator::from_json(&m.to_json()).unwrap();
        assert!(trace_distance(m.operator(), back.operator()).unwrap() < 1e-15);
    }
}
