//! Exact linear algebra on small composite Hilbert spaces.
//!
//! Subsystems are ordered with the first factor as the slowest-varying index. The
//! simulator uses the fixed ordering (spin, photon A, photon B) for every joint state.

mod matrix;

pub use matrix::CMatrix;

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::Real;

fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}

fn check_dims(dims: &[usize], len: usize) -> Result<()> {
    if dims.is_empty() || dims.contains(&0) {
        return Err(Error::DimensionMismatch(format!("invalid subsystem dims {dims:?}")));
    }
    let prod: usize = dims.iter().product();
    if prod != len {
        return Err(Error::DimensionMismatch(format!(
            "dims {dims:?} have product {prod}, expected {len}"
        )));
    }
    Ok(())
}

/// Row-major multi-index decomposition of a flat index.
fn decode(mut idx: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = idx % dims[k];
        idx /= dims[k];
    }
}

fn encode(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (d, n)| acc * n + d)
}

/// A pure state on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector<T> {
    amplitudes: Vec<Complex<T>>,
    dims: Vec<usize>,
}

impl<T: Real> StateVector<T> {
    /// Wraps amplitudes as given. Use [`StateVector::normalized`] to fix the norm.
    pub fn new(amplitudes: Vec<Complex<T>>, dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims, amplitudes.len())?;
        Ok(Self { amplitudes, dims })
    }

    /// Normalizes the amplitudes; fails on the zero vector.
    pub fn from_unnormalized(amplitudes: Vec<Complex<T>>, dims: Vec<usize>) -> Result<Self> {
        Self::new(amplitudes, dims)?.normalized()
    }

    pub fn basis(dims: Vec<usize>, index: usize) -> Result<Self> {
        let len: usize = dims.iter().product();
        if index >= len {
            return Err(Error::Domain(format!("basis index {index} out of range {len}")));
        }
        let mut amps = vec![czero(); len];
        amps[index] = Complex::new(T::one(), T::zero());
        Self::new(amps, dims)
    }

    /// A single-subsystem state from amplitudes.
    pub fn qudit(amplitudes: Vec<Complex<T>>) -> Result<Self> {
        let n = amplitudes.len();
        Self::new(amplitudes, vec![n])
    }

    pub fn amplitudes(&self) -> &[Complex<T>] {
        &self.amplitudes
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> T {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - T::one()).abs() <= T::tol(1e-12)
    }

    pub fn normalized(mut self) -> Result<Self> {
        let n2 = self.norm_sqr();
        if n2 <= T::min_positive_value() {
            return Err(Error::InvalidState("cannot normalize the zero vector".into()));
        }
        let inv = T::one() / n2.sqrt();
        for a in &mut self.amplitudes {
            *a = *a * inv;
        }
        Ok(self)
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &Self) -> Result<Complex<T>> {
        if self.dims != other.dims {
            return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        Ok(self.amplitudes.iter().zip(&other.amplitudes).fold(czero(), |acc, (a, b)| acc + a.conj() * b))
    }

    pub fn scaled(&self, s: Complex<T>) -> Self {
        Self { amplitudes: self.amplitudes.iter().map(|a| *a * s).collect(), dims: self.dims.clone() }
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut amps = Vec::with_capacity(self.len() * other.len());
        for a in &self.amplitudes {
            for b in &other.amplitudes {
                amps.push(*a * b);
            }
        }
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { amplitudes: amps, dims }
    }

    /// Reorders subsystems: subsystem `k` of the result is subsystem `order[k]` of `self`.
    pub fn permute(&self, order: &[usize]) -> Result<Self> {
        let k = self.dims.len();
        let mut seen = vec![false; k];
        if order.len() != k || order.iter().any(|&o| o >= k || std::mem::replace(&mut seen[o], true)) {
            return Err(Error::Domain(format!("{order:?} is not a permutation of {k} subsystems")));
        }
        let new_dims: Vec<usize> = order.iter().map(|&o| self.dims[o]).collect();
        let mut amps = vec![czero(); self.len()];
        let mut old = vec![0; k];
        let mut new = vec![0; k];
        for (i, a) in self.amplitudes.iter().enumerate() {
            decode(i, &self.dims, &mut old);
            for (slot, &o) in new.iter_mut().zip(order) {
                *slot = old[o];
            }
            amps[encode(&new, &new_dims)] = *a;
        }
        Self::new(amps, new_dims)
    }

    pub fn to_density(&self) -> DensityOperator<T> {
        DensityOperator { matrix: CMatrix::outer(&self.amplitudes, &self.amplitudes), dims: self.dims.clone() }
    }

    /// Schmidt coefficients across the cut after the first `split` subsystems, descending.
    pub fn schmidt_coefficients(&self, split: usize) -> Result<Vec<T>> {
        if split == 0 || split >= self.dims.len() {
            return Err(Error::Domain(format!("cut {split} must split {} subsystems", self.dims.len())));
        }
        let keep: Vec<usize> = (0..split).collect();
        let reduced = self.to_density().partial_trace(&keep)?;
        let mut coeffs: Vec<T> = reduced
            .eigenvalues()
            .into_iter()
            .map(|ev| ev.max(T::zero()).sqrt())
            .collect();
        coeffs.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        Ok(coeffs)
    }
}

/// A mixed state on a composite space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator<T> {
    matrix: CMatrix<T>,
    dims: Vec<usize>,
}

impl<T: Real> DensityOperator<T> {
    /// Validated constructor: Hermitian, unit trace, positive semidefinite.
    pub fn new(matrix: CMatrix<T>, dims: Vec<usize>) -> Result<Self> {
        check_dims(&dims, matrix.dim())?;
        if !matrix.is_hermitian(T::tol(1e-12)) {
            return Err(Error::InvalidState("density matrix is not Hermitian".into()));
        }
        let tr = matrix.trace();
        if (tr.re - T::one()).abs() > T::tol(1e-12) || tr.im.abs() > T::tol(1e-12) {
            return Err(Error::InvalidState(format!("trace {tr} is not 1")));
        }
        let min_ev = matrix.hermitian_eigenvalues().into_iter().fold(T::infinity(), T::min);
        if min_ev < -T::tol(1e-10) {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_ev}")));
        }
        Ok(Self { matrix, dims })
    }

    /// Skips validation. For internal use where the construction guarantees validity.
    pub(crate) fn from_parts(matrix: CMatrix<T>, dims: Vec<usize>) -> Self {
        debug_assert_eq!(matrix.dim(), dims.iter().product::<usize>());
        Self { matrix, dims }
    }

    /// Normalizes a positive semidefinite matrix by its trace.
    pub fn from_unnormalized(matrix: CMatrix<T>, dims: Vec<usize>) -> Result<Self> {
        let tr = matrix.trace().re;
        if tr <= T::min_positive_value() {
            return Err(Error::InvalidState("zero-trace operator".into()));
        }
        Self::new(matrix.scale_real(T::one() / tr), dims)
    }

    pub fn maximally_mixed(dims: Vec<usize>) -> Self {
        let n: usize = dims.iter().product();
        let m = CMatrix::identity(n).scale_real(T::one() / T::from_usize(n).unwrap());
        Self { matrix: m, dims }
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn trace(&self) -> T {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> T {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn eigenvalues(&self) -> Vec<T> {
        self.matrix.hermitian_eigenvalues()
    }

    /// Von Neumann entropy in bits.
    pub fn entropy_bits(&self) -> T {
        self.eigenvalues()
            .into_iter()
            .filter(|&p| p > T::tol(1e-15))
            .map(|p| -p * p.log2())
            .sum()
    }

    pub fn expectation(&self, op: &OperatorMatrix<T>) -> Result<Complex<T>> {
        if op.matrix.dim() != self.matrix.dim() {
            return Err(Error::DimensionMismatch(format!(
                "operator dim {} vs state dim {}",
                op.matrix.dim(),
                self.matrix.dim()
            )));
        }
        Ok((&op.matrix * &self.matrix).trace())
    }

    pub fn tensor(&self, other: &Self) -> Self {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        Self { matrix: self.matrix.kron(&other.matrix), dims }
    }

    /// Traces out every subsystem not listed in `keep`. Kept subsystems stay in ascending order.
    pub fn partial_trace(&self, keep: &[usize]) -> Result<Self> {
        let k = self.dims.len();
        let mut kept = vec![false; k];
        for &i in keep {
            if i >= k {
                return Err(Error::Domain(format!("subsystem index {i} out of range {k}")));
            }
            if std::mem::replace(&mut kept[i], true) {
                return Err(Error::Domain(format!("subsystem index {i} repeated")));
            }
        }
        let out_dims: Vec<usize> = (0..k).filter(|&i| kept[i]).map(|i| self.dims[i]).collect();
        if out_dims.is_empty() {
            return Err(Error::Domain("must keep at least one subsystem".into()));
        }
        let n_out: usize = out_dims.iter().product();
        let n = self.matrix.dim();
        let mut out = CMatrix::zeros(n_out);
        let (mut di, mut dj) = (vec![0; k], vec![0; k]);
        let (mut ki, mut kj) = (Vec::with_capacity(k), Vec::with_capacity(k));
        for i in 0..n {
            decode(i, &self.dims, &mut di);
            for j in 0..n {
                decode(j, &self.dims, &mut dj);
                if (0..k).any(|s| !kept[s] && di[s] != dj[s]) {
                    continue;
                }
                ki.clear();
                kj.clear();
                for s in (0..k).filter(|&s| kept[s]) {
                    ki.push(di[s]);
                    kj.push(dj[s]);
                }
                let (oi, oj) = (encode(&ki, &out_dims), encode(&kj, &out_dims));
                out[(oi, oj)] = out[(oi, oj)] + self.matrix[(i, j)];
            }
        }
        Ok(Self { matrix: out, dims: out_dims })
    }

    /// ⟨target|ρ|target⟩ for a normalized target.
    pub fn fidelity(&self, target: &StateVector<T>) -> Result<T> {
        fidelity(self, target)
    }
}

/// Role of an [`OperatorMatrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Unitary,
    Projector,
    Observable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix<T> {
    matrix: CMatrix<T>,
    kind: OperatorKind,
}

impl<T: Real> OperatorMatrix<T> {
    pub fn unitary(matrix: CMatrix<T>) -> Result<Self> {
        let n = matrix.dim();
        let prod = &matrix.adjoint() * &matrix;
        if prod.max_abs_diff(&CMatrix::identity(n)) > T::tol(1e-10) {
            return Err(Error::InvalidOperator("U†U ≠ I".into()));
        }
        Ok(Self { matrix, kind: OperatorKind::Unitary })
    }

    pub fn projector(matrix: CMatrix<T>) -> Result<Self> {
        if !matrix.is_hermitian(T::tol(1e-10)) {
            return Err(Error::InvalidOperator("projector is not Hermitian".into()));
        }
        if (&matrix * &matrix).max_abs_diff(&matrix) > T::tol(1e-10) {
            return Err(Error::InvalidOperator("P² ≠ P".into()));
        }
        Ok(Self { matrix, kind: OperatorKind::Projector })
    }

    pub fn observable(matrix: CMatrix<T>) -> Result<Self> {
        if !matrix.is_hermitian(T::tol(1e-10)) {
            return Err(Error::InvalidOperator("observable is not Hermitian".into()));
        }
        Ok(Self { matrix, kind: OperatorKind::Observable })
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: CMatrix::identity(n), kind: OperatorKind::Projector }
    }

    /// |ψ⟩⟨ψ| for a state normalized on the fly.
    pub fn projector_onto(state: &StateVector<T>) -> Result<Self> {
        let s = state.clone().normalized()?;
        Ok(Self { matrix: CMatrix::outer(s.amplitudes(), s.amplitudes()), kind: OperatorKind::Projector })
    }

    pub fn matrix(&self) -> &CMatrix<T> {
        &self.matrix
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// Kronecker product. The result keeps a kind only when both factors share it.
    pub fn kron(&self, other: &Self) -> Self {
        let kind = if self.kind == other.kind { self.kind } else { OperatorKind::Observable };
        Self { matrix: self.matrix.kron(&other.matrix), kind }
    }
}

/// Either kind of quantum state, for operations that are defined on both.
#[derive(Debug, Clone, PartialEq)]
pub enum QuantumState<T> {
    Pure(StateVector<T>),
    Mixed(DensityOperator<T>),
}

impl<T: Real> QuantumState<T> {
    pub fn dims(&self) -> &[usize] {
        match self {
            Self::Pure(s) => s.dims(),
            Self::Mixed(r) => r.dims(),
        }
    }

    pub fn to_density(&self) -> DensityOperator<T> {
        match self {
            Self::Pure(s) => s.to_density(),
            Self::Mixed(r) => r.clone(),
        }
    }
}

impl<T> From<StateVector<T>> for QuantumState<T> {
    fn from(s: StateVector<T>) -> Self {
        Self::Pure(s)
    }
}

impl<T> From<DensityOperator<T>> for QuantumState<T> {
    fn from(r: DensityOperator<T>) -> Self {
        Self::Mixed(r)
    }
}

/// Tensor product of two states of the same kind.
pub fn tensor_product<T: Real>(a: &QuantumState<T>, b: &QuantumState<T>) -> Result<QuantumState<T>> {
    match (a, b) {
        (QuantumState::Pure(x), QuantumState::Pure(y)) => Ok(QuantumState::Pure(x.tensor(y))),
        (QuantumState::Mixed(x), QuantumState::Mixed(y)) => Ok(QuantumState::Mixed(x.tensor(y))),
        _ => Err(Error::KindMismatch("tensor product of a pure and a mixed state".into())),
    }
}

pub fn partial_trace<T: Real>(rho: &DensityOperator<T>, keep: &[usize]) -> Result<DensityOperator<T>> {
    rho.partial_trace(keep)
}

/// Outcome of a projective measurement branch.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection<S, T> {
    /// Renormalized post-measurement state; `None` flags a zero-probability branch.
    pub state: Option<S>,
    /// ⟨P⟩ before renormalization.
    pub probability: T,
}

impl<S, T> Projection<S, T> {
    pub fn is_null(&self) -> bool {
        self.state.is_none()
    }
}

pub fn project_and_renormalize<T: Real>(
    state: &QuantumState<T>,
    proj: &OperatorMatrix<T>,
) -> Result<Projection<QuantumState<T>, T>> {
    if proj.kind != OperatorKind::Projector {
        return Err(Error::KindMismatch(format!("expected a projector, got {:?}", proj.kind)));
    }
    let n: usize = state.dims().iter().product();
    if proj.dim() != n {
        return Err(Error::DimensionMismatch(format!("projector dim {} vs state dim {n}", proj.dim())));
    }
    let null_tol = T::tol(1e-15);
    match state {
        QuantumState::Pure(s) => {
            let v = proj.matrix.mul_vec(s.amplitudes());
            let p: T = v.iter().map(|a| a.norm_sqr()).sum();
            let p = p.min(T::one());
            if p <= null_tol {
                return Ok(Projection { state: None, probability: T::zero() });
            }
            let out = StateVector::from_unnormalized(v, s.dims().to_vec())?;
            Ok(Projection { state: Some(QuantumState::Pure(out)), probability: p })
        }
        QuantumState::Mixed(r) => {
            let m = &(&proj.matrix * &r.matrix) * &proj.matrix;
            let p = m.trace().re.min(T::one());
            if p <= null_tol {
                return Ok(Projection { state: None, probability: T::zero() });
            }
            let out = DensityOperator::from_parts(m.scale_real(T::one() / p), r.dims.clone());
            Ok(Projection { state: Some(QuantumState::Mixed(out)), probability: p })
        }
    }
}

/// ⟨target|ρ|target⟩, clamped to [0, 1].
pub fn fidelity<T: Real>(rho: &DensityOperator<T>, target: &StateVector<T>) -> Result<T> {
    if rho.dims() != target.dims() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", rho.dims(), target.dims())));
    }
    let t = target.clone().normalized()?;
    let v = rho.matrix.mul_vec(t.amplitudes());
    let f = t.amplitudes().iter().zip(&v).fold(czero::<T>(), |acc, (a, b)| acc + a.conj() * b);
    Ok(f.re.max(T::zero()).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;

    type C = Complex<f64>;

    fn c(re: f64) -> C {
        Complex::new(re, 0.0)
    }

    fn qubit(a: C, b: C) -> StateVector<f64> {
        StateVector::qudit(vec![a, b]).unwrap()
    }

    #[test]
    fn basis_product() {
        let p = tensor_product(&qubit(c(1.), c(0.)).into(), &qubit(c(0.), c(1.)).into()).unwrap();
        let QuantumState::Pure(s) = p else { panic!() };
        assert_eq!(s.amplitudes(), &[c(0.), c(1.), c(0.), c(0.)]);
        assert_eq!(s.dims(), &[2, 2]);
    }

    #[test]
    fn mixed_kinds_rejected() {
        let a: QuantumState<f64> = qubit(c(1.), c(0.)).into();
        let b: QuantumState<f64> = DensityOperator::maximally_mixed(vec![2]).into();
        assert!(matches!(tensor_product(&a, &b), Err(Error::KindMismatch(_))));
    }

    #[test]
    fn maximally_entangled_reduces_to_identity_half() {
        let s = 0.5f64.sqrt();
        // spin ⊗ color, ↓ = 1, ω_r = 1
        let bell = StateVector::new(vec![c(-s), c(0.), c(0.), c(s)], vec![2, 2]).unwrap();
        let r = bell.to_density().partial_trace(&[0]).unwrap();
        assert!(r.matrix().max_abs_diff(&CMatrix::identity(2).scale_real(0.5)) < 1e-12);
    }

    #[test]
    fn trace_nothing_is_identity_map() {
        let s = StateVector::from_unnormalized(vec![c(1.), c(2.), c(3.), Complex::new(0., 1.)], vec![2, 2]).unwrap();
        let r = s.to_density();
        assert_eq!(r.partial_trace(&[0, 1]).unwrap(), r);
    }

    #[test]
    fn partial_trace_rejects_bad_indices() {
        let r = DensityOperator::<f64>::maximally_mixed(vec![2, 2]);
        assert!(r.partial_trace(&[2]).is_err());
        assert!(r.partial_trace(&[0, 0]).is_err());
    }

    #[test]
    fn projection_onto_self_and_orthogonal() {
        let up = qubit(c(1.), c(0.));
        let p_up = OperatorMatrix::projector_onto(&up).unwrap();
        let hit = project_and_renormalize(&up.clone().into(), &p_up).unwrap();
        assert!((hit.probability - 1.0).abs() < 1e-15);
        let down = qubit(c(0.), c(1.));
        let miss = project_and_renormalize(&down.into(), &p_up).unwrap();
        assert!(miss.is_null());
        assert_eq!(miss.probability, 0.0);
    }

    #[test]
    fn non_projector_rejected() {
        let u = OperatorMatrix::<f64>::unitary(CMatrix::identity(2)).unwrap();
        let s: QuantumState<f64> = qubit(c(1.), c(0.)).into();
        assert!(matches!(project_and_renormalize(&s, &u), Err(Error::KindMismatch(_))));
        let bad = CMatrix::from_rows(2, vec![c(1.), c(1.), c(0.), c(0.)]);
        assert!(OperatorMatrix::projector(bad).is_err());
    }

    #[test]
    fn fidelity_basics() {
        let psi = StateVector::from_unnormalized(vec![c(0.6), Complex::new(0., 0.8)], vec![2]).unwrap();
        assert!((fidelity(&psi.to_density(), &psi).unwrap() - 1.0).abs() < 1e-12);
        let mixed = DensityOperator::maximally_mixed(vec![2]);
        assert!((fidelity(&mixed, &psi).unwrap() - 0.5).abs() < 1e-12);
        let wrong = StateVector::<f64>::basis(vec![4], 0).unwrap();
        assert!(fidelity(&mixed, &wrong).is_err());
    }

    #[test]
    fn density_validation() {
        let not_psd = CMatrix::from_rows(2, vec![c(1.5), c(0.), c(0.), c(-0.5)]);
        assert!(DensityOperator::new(not_psd, vec![2]).is_err());
        let not_unit = CMatrix::identity(2);
        assert!(DensityOperator::<f64>::new(not_unit, vec![2]).is_err());
    }

    #[test]
    fn schmidt_of_product_state() {
        let s = qubit(c(1.), c(0.)).tensor(&qubit(c(0.6), c(0.8)));
        let k = s.schmidt_coefficients(1).unwrap();
        assert!((k[0] - 1.0).abs() < 1e-12 && k[1].abs() < 1e-6);
    }

    #[test]
    fn permute_swaps_factors() {
        let a = qubit(c(0.6), c(0.8));
        let b = qubit(c(1.), c(0.));
        let ab = a.tensor(&b);
        assert_eq!(ab.permute(&[1, 0]).unwrap(), b.tensor(&a));
        assert!(ab.permute(&[0, 0]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let s = 0.5f32.sqrt();
        let bell = StateVector::<f32>::new(
            vec![Complex::new(-s, 0.), Complex::new(0., 0.), Complex::new(0., 0.), Complex::new(s, 0.)],
            vec![2, 2],
        )
        .unwrap();
        let r = bell.to_density().partial_trace(&[1]).unwrap();
        assert!((r.trace() - 1.0).abs() < 1e-6);
        assert!((r.entropy_bits() - 1.0).abs() < 1e-4);
    }
}
