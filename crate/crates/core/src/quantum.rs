//! Dense linear algebra on the truncated cavity-Fock ⊗ two-level-atom space.
//!
//! Basis ordering is fixed with the atom as the slow index:
//! `index = atom * (N + 1) + n`, where atom `0` is the lower state |−⟩ and
//! atom `1` the upper state |+⟩. Matrix dumps elsewhere in the crate follow
//! the same convention.

use ndarray::{Array1, Array2, ArrayView2, Zip};
use ndarray_linalg::{EigValsh, UPLO};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

const HERMITIAN_TOL: f64 = 1e-12;
const TRACE_TOL: f64 = 1e-10;
const POSITIVITY_TOL: f64 = -1e-9;

/// Atomic basis state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Atom {
    /// |−⟩
    Lower,
    /// |+⟩
    Upper,
}

impl Atom {
    fn slot(self) -> usize {
        match self {
            Atom::Lower => 0,
            Atom::Upper => 1,
        }
    }
}

/// Photon cutoff of the truncated Fock space (Fock states `0..=n_trunc`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct HilbertSpec {
    n_trunc: usize,
}

impl HilbertSpec {
    pub fn new(n_trunc: usize) -> Result<Self> {
        if n_trunc < 2 {
            return Err(Error::TruncationTooSmall(n_trunc));
        }
        Ok(Self { n_trunc })
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn cavity_dim(&self) -> usize {
        self.n_trunc + 1
    }

    pub fn dim(&self) -> usize {
        2 * (self.n_trunc + 1)
    }

    pub fn index(&self, atom: Atom, n: usize) -> usize {
        debug_assert!(n <= self.n_trunc);
        atom.slot() * self.cavity_dim() + n
    }

    /// Basis vector |n, atom⟩.
    pub fn basis(&self, atom: Atom, n: usize) -> Array1<C64> {
        let mut v = Array1::zeros(self.dim());
        v[self.index(atom, n)] = ONE;
        v
    }
}

impl TryFrom<usize> for HilbertSpec {
    type Error = Error;
    fn try_from(n: usize) -> Result<Self> {
        Self::new(n)
    }
}

impl From<HilbertSpec> for usize {
    fn from(s: HilbertSpec) -> usize {
        s.n_trunc
    }
}

/// A square complex matrix acting on the system space.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator {
    mat: Array2<C64>,
}

impl Operator {
    pub fn from_array(mat: Array2<C64>) -> Result<Self> {
        let (r, c) = mat.dim();
        if r != c {
            return Err(Error::DimensionMismatch { expected: r, found: c });
        }
        Ok(Self { mat })
    }

    pub fn identity(dim: usize) -> Self {
        Self { mat: Array2::eye(dim) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn into_array(self) -> Array2<C64> {
        self.mat
    }

    pub fn adjoint(&self) -> Self {
        Self { mat: adjoint(&self.mat.view()) }
    }

    pub fn dot(&self, other: &Operator) -> Self {
        Self { mat: self.mat.dot(&other.mat) }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self { mat: &self.mat * s }
    }

    pub fn add(&self, other: &Operator) -> Self {
        Self { mat: &self.mat + &other.mat }
    }

    /// Largest entry-wise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.mat.view())
    }

    pub fn to_sparse(&self) -> SparseOperator {
        SparseOperator::from_dense(&self.mat.view())
    }
}

/// The ladder operators appearing in the master equation.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub spec: HilbertSpec,
    pub a: Operator,
    pub a_dag: Operator,
    pub sigma_minus: Operator,
    pub sigma_plus: Operator,
    /// a†a
    pub number: Operator,
    /// σ₊σ₋
    pub excitation: Operator,
    pub identity: Operator,
}

pub fn build_operators(spec: HilbertSpec) -> Result<OperatorSet> {
    // Re-validate in case the spec was built by deserialization.
    let spec = HilbertSpec::new(spec.n_trunc)?;
    let d = spec.dim();
    let mut a = Array2::zeros((d, d));
    let mut sm = Array2::zeros((d, d));
    for atom in [Atom::Lower, Atom::Upper] {
        for n in 1..=spec.n_trunc {
            a[[spec.index(atom, n - 1), spec.index(atom, n)]] = C64::new((n as f64).sqrt(), 0.0);
        }
    }
    for n in 0..=spec.n_trunc {
        sm[[spec.index(Atom::Lower, n), spec.index(Atom::Upper, n)]] = ONE;
    }
    let a = Operator { mat: a };
    let sigma_minus = Operator { mat: sm };
    let a_dag = a.adjoint();
    let sigma_plus = sigma_minus.adjoint();
    let number = a_dag.dot(&a);
    let excitation = sigma_plus.dot(&sigma_minus);
    Ok(OperatorSet {
        spec,
        a,
        a_dag,
        sigma_minus,
        sigma_plus,
        number,
        excitation,
        identity: Operator::identity(d),
    })
}

/// A validated density matrix on the full system space.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: Array2<C64>,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positivity.
    pub fn new(mat: Array2<C64>) -> Result<Self> {
        validate_density(&mat.view())?;
        Ok(Self { mat })
    }

    /// Wraps a matrix whose invariants are maintained by the caller.
    pub(crate) fn from_array_unchecked(mat: Array2<C64>) -> Self {
        Self { mat }
    }

    /// |ψ⟩⟨ψ| for a (not necessarily normalized) state vector.
    pub fn from_pure(psi: &Array1<C64>) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(Error::TraceNotUnit(0.0));
        }
        let d = psi.len();
        let mat = Array2::from_shape_fn((d, d), |(i, j)| psi[i] * psi[j].conj() / norm2);
        Ok(Self { mat })
    }

    /// Ground state |0, −⟩⟨0, −|.
    pub fn vacuum(spec: HilbertSpec) -> Self {
        let i = spec.index(Atom::Lower, 0);
        let mut mat = Array2::zeros((spec.dim(), spec.dim()));
        mat[[i, i]] = ONE;
        Self { mat }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn into_array(self) -> Array2<C64> {
        self.mat
    }

    pub fn expectation(&self, op: &Operator) -> Result<C64> {
        expectation(op, self)
    }

    pub fn reduce_to_cavity(&self) -> Result<CavityDensityMatrix> {
        reduce_to_cavity(self)
    }

    /// Population of Fock levels `n >= from` (both atomic states).
    pub fn tail_population(&self, spec: HilbertSpec, from: usize) -> f64 {
        (from..=spec.n_trunc())
            .map(|n| {
                let l = spec.index(Atom::Lower, n);
                let u = spec.index(Atom::Upper, n);
                self.mat[[l, l]].re + self.mat[[u, u]].re
            })
            .sum()
    }

    pub fn trace(&self) -> C64 {
        self.mat.diag().sum()
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        min_eigenvalue(&self.mat.view())
    }
}

/// tr(ρ · op).
pub fn expectation(op: &Operator, rho: &DensityMatrix) -> Result<C64> {
    if op.dim() != rho.dim() {
        return Err(Error::DimensionMismatch { expected: rho.dim(), found: op.dim() });
    }
    Ok(trace_product(&rho.mat.view(), &op.mat.view()))
}

/// tr(x · y) without forming the product.
pub(crate) fn trace_product(x: &ArrayView2<C64>, y: &ArrayView2<C64>) -> C64 {
    let mut acc = ZERO;
    Zip::from(x).and(&y.t()).for_each(|&a, &b| acc += a * b);
    acc
}

/// Reduced state of the cavity field, ⟨m|ρ_c|n⟩ = Σ_atom ⟨m,atom|ρ|n,atom⟩.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityDensityMatrix {
    mat: Array2<C64>,
}

impl CavityDensityMatrix {
    pub fn new(mat: Array2<C64>) -> Result<Self> {
        validate_density(&mat.view())?;
        Ok(Self { mat })
    }

    /// |n⟩⟨n| on a cavity cutoff `n_trunc`.
    pub fn fock(n: usize, n_trunc: usize) -> Self {
        let mut mat = Array2::zeros((n_trunc + 1, n_trunc + 1));
        mat[[n, n]] = ONE;
        Self { mat }
    }

    pub fn n_trunc(&self) -> usize {
        self.mat.nrows() - 1
    }

    pub fn as_array(&self) -> &Array2<C64> {
        &self.mat
    }

    pub fn population(&self, n: usize) -> f64 {
        if n <= self.n_trunc() {
            self.mat[[n, n]].re
        } else {
            0.0
        }
    }
}

pub fn reduce_to_cavity(rho: &DensityMatrix) -> Result<CavityDensityMatrix> {
    let d = rho.dim();
    if d < 6 || d % 2 != 0 {
        return Err(Error::DimensionMismatch { expected: 6, found: d });
    }
    let c = d / 2;
    let m = &rho.mat;
    let mat = Array2::from_shape_fn((c, c), |(i, j)| m[[i, j]] + m[[c + i, c + j]]);
    Ok(CavityDensityMatrix { mat })
}

pub(crate) fn adjoint(m: &ArrayView2<C64>) -> Array2<C64> {
    m.t().mapv(|z| z.conj())
}

pub(crate) fn hermiticity_defect(m: &ArrayView2<C64>) -> f64 {
    let mut worst = 0.0f64;
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[[i, j]] - m[[j, i]].conj()).norm());
        }
    }
    worst
}

fn min_eigenvalue(m: &ArrayView2<C64>) -> Result<f64> {
    let herm = (m.to_owned() + adjoint(m)) * C64::new(0.5, 0.0);
    let ev = herm.eigvalsh(UPLO::Lower)?;
    Ok(ev.iter().cloned().fold(f64::INFINITY, f64::min))
}

fn validate_density(m: &ArrayView2<C64>) -> Result<()> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::DimensionMismatch { expected: r, found: c });
    }
    let scale = m.iter().map(|z| z.norm()).fold(1.0f64, f64::max);
    let defect = hermiticity_defect(m) / scale;
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    let tr = m.diag().sum();
    if (tr - ONE).norm() > TRACE_TOL {
        return Err(Error::TraceNotUnit(tr.re));
    }
    let lo = min_eigenvalue(m)?;
    if lo < POSITIVITY_TOL {
        return Err(Error::NotPositive(lo));
    }
    Ok(())
}

/// Compressed-row complex matrix for the inner loops of the integrators.
///
/// All system operators have a handful of entries per row, so applying them
/// this way is much cheaper than a dense product.
#[derive(Debug, Clone)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseOperator {
    pub fn from_dense(m: &ArrayView2<C64>) -> Self {
        let dim = m.nrows();
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..dim {
            for j in 0..m.ncols() {
                let v = m[[i, j]];
                if v != ZERO {
                    cols.push(j);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self { dim, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterates over `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.cols[k], self.vals[k]))
        })
    }

    /// out = A x
    pub fn apply(&self, x: &[C64], out: &mut [C64]) {
        for i in 0..self.dim {
            let mut acc = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            out[i] = acc;
        }
    }

    /// ⟨x|A|x⟩ for an unnormalized vector.
    pub fn sandwich(&self, x: &[C64]) -> C64 {
        let mut acc = ZERO;
        for i in 0..self.dim {
            let mut row = ZERO;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                row += self.vals[k] * x[self.cols[k]];
            }
            acc += x[i].conj() * row;
        }
        acc
    }

    /// out += s · A·ρ for a dense row-major `d×d` matrix stored as a slice.
    pub fn left_mul_acc(&self, rho: &[C64], s: C64, out: &mut [C64]) {
        let d = self.dim;
        for i in 0..d {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let v = s * self.vals[k];
                let src = &rho[self.cols[k] * d..(self.cols[k] + 1) * d];
                let dst = &mut out[i * d..(i + 1) * d];
                for (o, r) in dst.iter_mut().zip(src) {
                    *o += v * r;
                }
            }
        }
    }

    /// out += s · ρ·A for a dense row-major `d×d` matrix stored as a slice.
    pub fn right_mul_acc(&self, rho: &[C64], s: C64, out: &mut [C64]) {
        let d = self.dim;
        for kr in 0..d {
            for k in self.row_ptr[kr]..self.row_ptr[kr + 1] {
                let j = self.cols[k];
                let v = s * self.vals[k];
                for i in 0..d {
                    out[i * d + j] += rho[i * d + kr] * v;
                }
            }
        }
    }

    /// out += s · A ρ A† for a dense row-major `d×d` matrix.
    pub fn sandwich_acc(&self, rho: &[C64], s: C64, out: &mut [C64]) {
        let d = self.dim;
        for i in 0..d {
            for ki in self.row_ptr[i]..self.row_ptr[i + 1] {
                let (p, vi) = (self.cols[ki], self.vals[ki]);
                for j in 0..d {
                    for kj in self.row_ptr[j]..self.row_ptr[j + 1] {
                        let (q, vj) = (self.cols[kj], self.vals[kj]);
                        out[i * d + j] += s * vi * rho[p * d + q] * vj.conj();
                    }
                }
            }
        }
    }

    pub fn scaled(&self, s: C64) -> Self {
        Self { vals: self.vals.iter().map(|v| v * s).collect(), ..self.clone() }
    }

    pub fn adjoint(&self) -> Self {
        let mut dense = Array2::zeros((self.dim, self.dim));
        for (i, j, v) in self.entries() {
            dense[[j, i]] = v.conj();
        }
        Self::from_dense(&dense.view())
    }
}
