//! Dense complex linear algebra on labeled tensor-product spaces.
//!
//! Index convention: row-major, left factor most significant. For factors
//! with dimensions `[d0, d1, ..., dk]` the basis state `|i0 i1 ... ik>` has
//! flat index `((i0 * d1 + i1) * d2 + i2) ...`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::error::{check_range, Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

pub const HERMITIAN_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-10;
pub const POVM_TOL: f64 = 1e-9;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

impl Factor {
    pub fn new(label: impl Into<String>, dim: usize) -> Self {
        Factor { label: label.into(), dim }
    }
}

/// Factors `A1, B1, A2, B2, ...` for `n` pairs of qudits in pair-major order.
pub fn pair_factors(d: usize, n: usize) -> Vec<Factor> {
    (1..=n)
        .flat_map(|k| [Factor::new(format!("A{k}"), d), Factor::new(format!("B{k}"), d)])
        .collect()
}

/// Factors `A1..An, B1..Bn` (group-major order).
pub fn group_factors(d: usize, n: usize) -> Vec<Factor> {
    let a = (1..=n).map(|k| Factor::new(format!("A{k}"), d));
    let b = (1..=n).map(|k| Factor::new(format!("B{k}"), d));
    a.chain(b).collect()
}

/// Permutation taking pair-major `(A1 B1)(A2 B2)...` to group-major `(A1 A2 ...)(B1 B2 ...)`.
/// Entry `k` names the old position of the factor placed at new position `k`.
pub fn pair_to_group_perm(n: usize) -> Vec<usize> {
    (0..n).map(|k| 2 * k).chain((0..n).map(|k| 2 * k + 1)).collect()
}

/// Inverse of [`pair_to_group_perm`].
pub fn group_to_pair_perm(n: usize) -> Vec<usize> {
    (0..n).flat_map(|k| [k, n + k]).collect()
}

fn total_dim(factors: &[Factor]) -> usize {
    factors.iter().map(|f| f.dim).product()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ket {
    amplitudes: CVector,
    factors: Vec<Factor>,
}

impl Ket {
    pub fn new(amplitudes: CVector, factors: Vec<Factor>) -> Result<Self> {
        let dim = total_dim(&factors);
        if factors.iter().any(|f| f.dim == 0) || factors.is_empty() {
            return Err(Error::InvalidDimension("factor dimensions must be positive".into()));
        }
        if amplitudes.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: amplitudes.len() });
        }
        Ok(Ket { amplitudes, factors })
    }

    pub fn from_slice(amps: &[C64], factors: Vec<Factor>) -> Result<Self> {
        Ket::new(CVector::from_column_slice(amps), factors)
    }

    pub fn basis(index: usize, factors: Vec<Factor>) -> Self {
        let mut v = CVector::zeros(total_dim(&factors));
        v[index] = C64::new(1.0, 0.0);
        Ket { amplitudes: v, factors }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm() - 1.0).abs() <= 1e-12
    }

    pub fn normalized(&self) -> Self {
        let n = self.norm();
        Ket { amplitudes: self.amplitudes.unscale(n), factors: self.factors.clone() }
    }

    /// Entrywise conjugate in the computational basis.
    pub fn conj(&self) -> Self {
        Ket { amplitudes: self.amplitudes.conjugate(), factors: self.factors.clone() }
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &Ket) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn scale(&self, s: C64) -> Self {
        Ket { amplitudes: &self.amplitudes * s, factors: self.factors.clone() }
    }

    pub fn add(&self, other: &Ket) -> Self {
        Ket { amplitudes: &self.amplitudes + &other.amplitudes, factors: self.factors.clone() }
    }

    /// `|self><self|`.
    pub fn projector(&self) -> Operator {
        let m = &self.amplitudes * self.amplitudes.adjoint();
        Operator { entries: m, factors: self.factors.clone() }
    }

    pub fn with_factors(self, factors: Vec<Factor>) -> Result<Self> {
        Ket::new(self.amplitudes, factors)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Operator {
    entries: CMatrix,
    factors: Vec<Factor>,
}

impl Operator {
    pub fn new(entries: CMatrix, factors: Vec<Factor>) -> Result<Self> {
        let dim = total_dim(&factors);
        if factors.iter().any(|f| f.dim == 0) || factors.is_empty() {
            return Err(Error::InvalidDimension("factor dimensions must be positive".into()));
        }
        if entries.nrows() != entries.ncols() {
            return Err(Error::InvalidDimension(format!(
                "operator must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.nrows() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: entries.nrows() });
        }
        Ok(Operator { entries, factors })
    }

    pub fn identity(factors: Vec<Factor>) -> Self {
        let n = total_dim(&factors);
        Operator { entries: CMatrix::identity(n, n), factors }
    }

    pub fn zeros(factors: Vec<Factor>) -> Self {
        let n = total_dim(&factors);
        Operator { entries: CMatrix::zeros(n, n), factors }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &CMatrix {
        &self.entries
    }

    pub fn into_entries(self) -> CMatrix {
        self.entries
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn with_factors(self, factors: Vec<Factor>) -> Result<Self> {
        Operator::new(self.entries, factors)
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    pub fn adjoint(&self) -> Self {
        Operator { entries: self.entries.adjoint(), factors: self.factors.clone() }
    }

    pub fn conj(&self) -> Self {
        Operator { entries: self.entries.conjugate(), factors: self.factors.clone() }
    }

    fn check_same(&self, other: &Operator) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(())
    }

    pub fn mul(&self, other: &Operator) -> Result<Self> {
        self.check_same(other)?;
        Ok(Operator { entries: &self.entries * &other.entries, factors: self.factors.clone() })
    }

    pub fn add(&self, other: &Operator) -> Result<Self> {
        self.check_same(other)?;
        Ok(Operator { entries: &self.entries + &other.entries, factors: self.factors.clone() })
    }

    pub fn sub(&self, other: &Operator) -> Result<Self> {
        self.check_same(other)?;
        Ok(Operator { entries: &self.entries - &other.entries, factors: self.factors.clone() })
    }

    pub fn scale(&self, s: f64) -> Self {
        Operator { entries: self.entries.scale(s), factors: self.factors.clone() }
    }

    pub fn scale_c(&self, s: C64) -> Self {
        Operator { entries: &self.entries * s, factors: self.factors.clone() }
    }

    /// `I - self`.
    pub fn complement(&self) -> Self {
        let n = self.dim();
        Operator { entries: CMatrix::identity(n, n) - &self.entries, factors: self.factors.clone() }
    }

    pub fn apply(&self, ket: &Ket) -> Result<Ket> {
        if ket.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: ket.dim() });
        }
        Ok(Ket { amplitudes: &self.entries * &ket.amplitudes, factors: ket.factors.clone() })
    }

    /// `<v|self|v>`.
    pub fn expectation(&self, v: &Ket) -> Result<C64> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.dim() });
        }
        Ok(v.amplitudes.dotc(&(&self.entries * &v.amplitudes)))
    }

    /// `Tr(self * other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> Result<C64> {
        self.check_same(other)?;
        Ok(trace_of_product(&self.entries, &other.entries))
    }

    /// `U self U^dagger`.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: u.nrows() });
        }
        Ok(Operator { entries: u * &self.entries * u.adjoint(), factors: self.factors.clone() })
    }

    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        max_abs_diff(&self.entries, &other.entries)
    }

    pub fn hermitian_deviation(&self) -> f64 {
        max_abs_diff(&self.entries, &self.entries.adjoint())
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.entries).0
    }
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn trace_of_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

/// Spectral decomposition of the Hermitian part of `m`: ascending eigenvalues
/// and the matching eigenvectors as columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_fn(m.nrows(), m.nrows(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    op: Operator,
}

impl DensityMatrix {
    pub fn new(op: Operator) -> Result<Self> {
        let dev = op.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let tr = op.trace().re;
        if (tr - 1.0).abs() > 1e-10 {
            return Err(Error::BadTrace(tr));
        }
        let min = op.eigenvalues().first().copied().unwrap_or(0.0);
        if min < -PSD_TOL {
            return Err(Error::NotPositive(min));
        }
        Ok(DensityMatrix { op })
    }

    pub(crate) fn trusted(op: Operator) -> Self {
        DensityMatrix { op }
    }

    pub fn pure(ket: &Ket) -> Self {
        DensityMatrix { op: ket.normalized().projector() }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn into_op(self) -> Operator {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix { op: self.op.tensor(&other.op) }
    }

    pub fn tensor_power(&self, n: usize) -> DensityMatrix {
        let mut out = self.clone();
        for _ in 1..n {
            out = out.tensor(self);
        }
        out
    }

    /// `Tr(T sigma)` as a real number.
    pub fn expect(&self, t: &Operator) -> Result<f64> {
        Ok(self.op.trace_product(t)?.re)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TestOperator {
    op: Operator,
}

impl TestOperator {
    pub fn new(op: Operator) -> Result<Self> {
        let dev = op.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        let eig = op.eigenvalues();
        let (lo, hi) = (eig[0], eig[eig.len() - 1]);
        if lo < -PSD_TOL || hi > 1.0 + PSD_TOL {
            return Err(Error::NotATest(lo, hi));
        }
        Ok(TestOperator { op })
    }

    /// Wraps an operator whose validity follows from its construction.
    pub(crate) fn trusted(op: Operator) -> Self {
        TestOperator { op }
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn into_op(self) -> Operator {
        self.op
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    /// Acceptance probability `Tr(T rho)`.
    pub fn accept(&self, rho: &DensityMatrix) -> Result<f64> {
        Ok(self.op.trace_product(rho.op())?.re)
    }

    /// `(lowest, highest)` eigenvalue.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let e = self.op.eigenvalues();
        (e[0], e[e.len() - 1])
    }
}

#[derive(Clone, Debug)]
pub struct RankOnePovm {
    elements: Vec<(f64, Ket)>,
}

impl RankOnePovm {
    pub fn new(elements: Vec<(f64, Ket)>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidDimension("empty POVM".into()))?;
        let factors = first.1.factors().to_vec();
        let dim = first.1.dim();
        let mut sum = CMatrix::zeros(dim, dim);
        for (w, u) in &elements {
            if *w < 0.0 || !w.is_finite() {
                return Err(Error::OutOfRange { name: "weight", value: *w, range: "[0, inf)" });
            }
            if u.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: u.dim() });
            }
            if !u.is_normalized() {
                return Err(Error::OutOfRange { name: "norm", value: u.norm(), range: "1" });
            }
            sum += u.projector().entries().scale(*w);
        }
        let dev = max_abs_diff(&sum, &CMatrix::identity(dim, dim));
        if dev > POVM_TOL {
            return Err(Error::NotAPovm(dev));
        }
        let elements = elements
            .into_iter()
            .map(|(w, u)| (w, u.with_factors(factors.clone()).expect("same dimension")))
            .collect();
        Ok(RankOnePovm { elements })
    }

    /// Projective measurement on the columns of a unitary.
    pub fn from_unitary(u: &CMatrix, factors: Vec<Factor>) -> Result<Self> {
        let elements = (0..u.ncols())
            .map(|i| Ket::new(u.column(i).into_owned(), factors.clone()).map(|k| (1.0, k)))
            .collect::<Result<Vec<_>>>()?;
        RankOnePovm::new(elements)
    }

    pub fn computational(d: usize) -> Self {
        let f = vec![Factor::new("A", d)];
        RankOnePovm { elements: (0..d).map(|i| (1.0, Ket::basis(i, f.clone()))).collect() }
    }

    pub fn elements(&self) -> &[(f64, Ket)] {
        &self.elements
    }

    pub fn dim(&self) -> usize {
        self.elements[0].1.dim()
    }
}

/// Kronecker product of kets or operators; factor lists concatenate.
pub trait Tensor {
    fn tensor(&self, other: &Self) -> Self;
}

impl Tensor for Ket {
    fn tensor(&self, other: &Ket) -> Ket {
        let mut f = self.factors.clone();
        f.extend(other.factors.iter().cloned());
        Ket { amplitudes: self.amplitudes.kronecker(&other.amplitudes), factors: f }
    }
}

impl Tensor for Operator {
    fn tensor(&self, other: &Operator) -> Operator {
        let mut f = self.factors.clone();
        f.extend(other.factors.iter().cloned());
        Operator { entries: self.entries.kronecker(&other.entries), factors: f }
    }
}

pub fn tensor<T: Tensor>(a: &T, b: &T) -> T {
    a.tensor(b)
}

pub fn tensor_all<T: Tensor + Clone>(items: &[T]) -> T {
    let mut out = items[0].clone();
    for x in &items[1..] {
        out = out.tensor(x);
    }
    out
}

fn check_perm(perm: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if perm.len() != n {
        return Err(Error::InvalidPermutation(perm.to_vec()));
    }
    for &p in perm {
        if p >= n || seen[p] {
            return Err(Error::InvalidPermutation(perm.to_vec()));
        }
        seen[p] = true;
    }
    Ok(())
}

/// For each flat index in the permuted space, the flat index it came from.
fn permutation_index_map(factors: &[Factor], perm: &[usize]) -> Vec<usize> {
    let old_dims: Vec<usize> = factors.iter().map(|f| f.dim).collect();
    let new_dims: Vec<usize> = perm.iter().map(|&p| old_dims[p]).collect();
    let k = factors.len();
    let mut old_strides = vec![1usize; k];
    for i in (0..k.saturating_sub(1)).rev() {
        old_strides[i] = old_strides[i + 1] * old_dims[i + 1];
    }
    let dim: usize = old_dims.iter().product();
    let mut map = vec![0usize; dim];
    let mut digits = vec![0usize; k];
    for (idx, slot) in map.iter_mut().enumerate() {
        let mut rem = idx;
        for pos in (0..k).rev() {
            digits[pos] = rem % new_dims[pos];
            rem /= new_dims[pos];
        }
        *slot = (0..k).map(|pos| digits[pos] * old_strides[perm[pos]]).sum();
    }
    map
}

/// Reorders tensor factors: factor `perm[k]` of `a` ends up at position `k`.
pub fn permute_systems(a: &Operator, perm: &[usize]) -> Result<Operator> {
    check_perm(perm, a.factors.len())?;
    let map = permutation_index_map(&a.factors, perm);
    let n = a.dim();
    let entries = CMatrix::from_fn(n, n, |i, j| a.entries[(map[i], map[j])]);
    let factors = perm.iter().map(|&p| a.factors[p].clone()).collect();
    Ok(Operator { entries, factors })
}

/// Ket version of [`permute_systems`].
pub fn permute_ket(a: &Ket, perm: &[usize]) -> Result<Ket> {
    check_perm(perm, a.factors.len())?;
    let map = permutation_index_map(&a.factors, perm);
    let amplitudes = CVector::from_fn(a.dim(), |i, _| a.amplitudes[map[i]]);
    let factors = perm.iter().map(|&p| a.factors[p].clone()).collect();
    Ok(Ket { amplitudes, factors })
}

/// Traces out every factor not listed in `keep` (positions, any order; the
/// result keeps the original relative order).
pub fn partial_trace(a: &Operator, keep: &[usize]) -> Result<Operator> {
    if keep.is_empty() {
        return Err(Error::EmptyKeep);
    }
    let k = a.factors.len();
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.iter().any(|&i| i >= k) {
        return Err(Error::InvalidPermutation(keep.to_vec()));
    }
    let traced: Vec<usize> = (0..k).filter(|i| !keep_sorted.contains(i)).collect();
    let mut perm = keep_sorted.clone();
    perm.extend(&traced);
    let map = permutation_index_map(&a.factors, &perm);
    let dk: usize = keep_sorted.iter().map(|&i| a.factors[i].dim).product();
    let dt: usize = traced.iter().map(|&i| a.factors[i].dim).product();
    let mut out = CMatrix::zeros(dk, dk);
    for i in 0..dk {
        for j in 0..dk {
            let mut s = C64::new(0.0, 0.0);
            for t in 0..dt {
                s += a.entries[(map[i * dt + t], map[j * dt + t])];
            }
            out[(i, j)] = s;
        }
    }
    let factors = keep_sorted.iter().map(|&i| a.factors[i].clone()).collect();
    Ok(Operator { entries: out, factors })
}

/// Positions of the factors with the given labels.
pub fn factor_positions(factors: &[Factor], labels: &[&str]) -> Result<Vec<usize>> {
    labels
        .iter()
        .map(|l| {
            factors
                .iter()
                .position(|f| f.label == *l)
                .ok_or_else(|| Error::InvalidDimension(format!("no factor labeled {l}")))
        })
        .collect()
}

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("local dimension must be >= 2, got {d}")));
    }
    Ok(())
}

pub fn bipartite_factors(d: usize) -> Vec<Factor> {
    vec![Factor::new("A", d), Factor::new("B", d)]
}

/// `(1/sqrt d) sum_i |i>|i>` on `A (x) B`.
pub fn max_entangled_ket(d: usize) -> Result<Ket> {
    check_d(d)?;
    let mut v = CVector::zeros(d * d);
    let a = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        v[i * d + i] = C64::new(a, 0.0);
    }
    Ok(Ket { amplitudes: v, factors: bipartite_factors(d) })
}

/// `|phi0><phi0|` on `A (x) B`.
pub fn max_entangled_projector(d: usize) -> Result<Operator> {
    Ok(max_entangled_ket(d)?.projector())
}

fn local_dim(dim: usize) -> Result<usize> {
    let d = (dim as f64).sqrt().round() as usize;
    if d * d != dim || d < 2 {
        return Err(Error::InvalidDimension(format!("{dim} is not d^2 for d >= 2")));
    }
    Ok(d)
}

/// `1 - <phi0|sigma|phi0>`, clamped to `[0, 1]`.
pub fn fidelity_defect(sigma: &DensityMatrix) -> Result<f64> {
    let d = local_dim(sigma.dim())?;
    let phi = max_entangled_ket(d)?;
    let f = sigma.op().expectation(&phi)?.re;
    let p = 1.0 - f;
    if p < 0.0 && p > -1e-12 {
        return Ok(0.0);
    }
    if p > 1.0 && p < 1.0 + 1e-12 {
        return Ok(1.0);
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `(1-p) P + p (I-P)/(d^2-1)` with `P = |phi0><phi0|`.
pub fn isotropic_state(d: usize, p: f64) -> Result<DensityMatrix> {
    check_d(d)?;
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    let pm = max_entangled_projector(d)?;
    let c = p / ((d * d - 1) as f64);
    let op = pm.scale(1.0 - p).add(&pm.complement().scale(c))?;
    Ok(DensityMatrix::trusted(op))
}

/// Generalized Pauli `X|j> = |j+1 mod d>` and `Z|j> = e^{2 pi i j/d}|j>`.
pub fn generalized_pauli(d: usize) -> Result<(Operator, Operator)> {
    check_d(d)?;
    let f = vec![Factor::new("A", d)];
    let mut x = CMatrix::zeros(d, d);
    let mut z = CMatrix::zeros(d, d);
    for j in 0..d {
        x[((j + 1) % d, j)] = C64::new(1.0, 0.0);
        z[(j, j)] = C64::from_polar(1.0, 2.0 * PI * j as f64 / d as f64);
    }
    Ok((Operator { entries: x, factors: f.clone() }, Operator { entries: z, factors: f }))
}

pub fn matrix_power(m: &CMatrix, k: usize) -> CMatrix {
    let mut out = CMatrix::identity(m.nrows(), m.ncols());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// Bell basis `phi^{n,m} = (X^n Z^m (x) I) phi^{0,0}`, ordered with index `n*d + m`.
pub fn bell_basis(d: usize) -> Result<Vec<Ket>> {
    let (x, z) = generalized_pauli(d)?;
    let phi = max_entangled_ket(d)?;
    let id = CMatrix::identity(d, d);
    let mut out = Vec::with_capacity(d * d);
    for n in 0..d {
        for m in 0..d {
            let w = matrix_power(x.entries(), n) * matrix_power(z.entries(), m);
            let amps = w.kronecker(&id) * phi.amplitudes();
            out.push(Ket { amplitudes: amps, factors: bipartite_factors(d) });
        }
    }
    Ok(out)
}

/// Complex Ginibre matrix with i.i.d. entries `N(0,1/2) + i N(0,1/2)`.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    CMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Random full-rank state `G G^dagger / Tr` with `G` Ginibre.
pub fn random_density<R: Rng + ?Sized>(factors: Vec<Factor>, rng: &mut R) -> DensityMatrix {
    let n = total_dim(&factors);
    random_density_rank(factors, n, rng)
}

/// Random state of rank at most `rank`.
pub fn random_density_rank<R: Rng + ?Sized>(factors: Vec<Factor>, rank: usize, rng: &mut R) -> DensityMatrix {
    let n = total_dim(&factors);
    let g = ginibre(n, rank.max(1), rng);
    let mut m = &g * g.adjoint();
    let tr = m.trace().re;
    m.unscale_mut(tr);
    let m = (&m + m.adjoint()).scale(0.5);
    DensityMatrix::trusted(Operator { entries: m, factors })
}

/// Random test: a Hermitian Ginibre matrix with its spectrum clipped to `[0, 1]`.
pub fn random_test<R: Rng + ?Sized>(factors: Vec<Factor>, rng: &mut R) -> TestOperator {
    let n = total_dim(&factors);
    let g = ginibre(n, n, rng);
    let h = (&g + g.adjoint()).scale(0.5);
    let (vals, vecs) = hermitian_eigen(&h);
    let clipped = CMatrix::from_diagonal(&CVector::from_iterator(
        n,
        vals.iter().map(|&v| C64::new((0.5 + 0.5 * v).clamp(0.0, 1.0), 0.0)),
    ));
    let m = &vecs * clipped * vecs.adjoint();
    let m = (&m + m.adjoint()).scale(0.5);
    TestOperator::trusted(Operator { entries: m, factors })
}

/// Random state on `A (x) B` with defect `p` exactly: `(1-p) P + p sigma'`
/// with `sigma'` a random state supported on the complement of `phi0`, plus
/// coherences `P X P^c + h.c.` scaled to keep positivity.
pub fn random_density_with_defect<R: Rng + ?Sized>(d: usize, p: f64, coherent: bool, rng: &mut R) -> Result<DensityMatrix> {
    check_d(d)?;
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    let pm = max_entangled_projector(d)?;
    let pc = pm.complement();
    let rank = 1 + rng.random_range(0..d * d);
    let r = random_density_rank(bipartite_factors(d), rank, rng);
    let inner = pc.mul(r.op())?.mul(&pc)?;
    let w = inner.trace().re;
    let sp = inner.scale(1.0 / w);
    let mut op = pm.scale(1.0 - p).add(&sp.scale(p))?;
    if coherent {
        // Coherence along the top eigenvector v of sigma': positivity needs
        // |c|^2 <= (1-p) p <v|sigma'|v>.
        let phi = max_entangled_ket(d)?;
        let (vals, vecs) = hermitian_eigen(sp.entries());
        let lam = vals[vals.len() - 1].max(0.0);
        let v = vecs.column(vals.len() - 1).into_owned();
        let c = 0.999 * rng.random::<f64>() * ((1.0 - p) * p * lam).sqrt();
        let ph = C64::from_polar(c, 2.0 * PI * rng.random::<f64>());
        let cross = &phi.amplitudes * v.adjoint() * ph;
        let entries = op.entries() + &cross + cross.adjoint();
        op = Operator::new(entries, bipartite_factors(d))?;
    }
    DensityMatrix::new(op)
}
