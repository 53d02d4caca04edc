//! Group actions on `(A (x) B)^{(x) n}`, Haar sampling and twirling.

use nalgebra::DMatrix;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qstate::{
    ginibre, max_entangled_ket, pair_factors, CMatrix, Ket, Operator, TestOperator, C64,
};

/// Samples per parallel work unit. Results never depend on this value's
/// interaction with the thread pool, only on `(seed, N)`.
const BLOCK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GroupKind {
    /// `U_theta = e^{i theta} |phi0><phi0| + (I - |phi0><phi0|)`.
    U1,
    /// `U(g) = g (x) conj(g)`, `g` in SU(d).
    SUd,
    /// `U(g, theta) = U_theta U(g)`.
    SUdxU1,
    /// `V(g) = g (I - |phi0><phi0|) + |phi0><phi0|`, `g` in U(d^2 - 1).
    Ud2Minus1,
}

/// How the group acts on several pairs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Coupling {
    /// One group element, `f(g)^{(x) n}`.
    TensorPower,
    /// An independent element per pair, `f(g1) (x) ... (x) f(gn)`.
    Independent,
}

#[derive(Clone, Debug)]
pub struct GroupAction {
    pub kind: GroupKind,
    pub d: usize,
    pub copies: usize,
    pub coupling: Coupling,
    complement: CMatrix,
}

impl GroupAction {
    pub fn new(kind: GroupKind, d: usize, copies: usize) -> Result<Self> {
        Self::with_coupling(kind, d, copies, Coupling::TensorPower)
    }

    pub fn independent(kind: GroupKind, d: usize, copies: usize) -> Result<Self> {
        Self::with_coupling(kind, d, copies, Coupling::Independent)
    }

    pub fn with_coupling(kind: GroupKind, d: usize, copies: usize, coupling: Coupling) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidDimension(format!("local dimension must be >= 2, got {d}")));
        }
        if copies == 0 {
            return Err(Error::InvalidDimension("group action needs at least one copy".into()));
        }
        Ok(GroupAction { kind, d, copies, coupling, complement: complement_basis(d)? })
    }

    /// Dimension of the space the action lives on.
    pub fn dim(&self) -> usize {
        (self.d * self.d).pow(self.copies as u32)
    }

    fn sample_single<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let d = self.d;
        match self.kind {
            GroupKind::U1 => u_theta_matrix(rng.random::<f64>() * std::f64::consts::TAU, d),
            GroupKind::SUd => sud_matrix(&haar_special_unitary(d, rng)),
            GroupKind::SUdxU1 => {
                let g = sud_matrix(&haar_special_unitary(d, rng));
                let t = u_theta_matrix(rng.random::<f64>() * std::f64::consts::TAU, d);
                t * g
            }
            GroupKind::Ud2Minus1 => {
                let g = haar_unitary(d * d - 1, rng);
                v_matrix(&g, &self.complement, d)
            }
        }
    }

    /// A sampled unitary on the full pair-major space.
    pub fn sample_unitary<R: Rng + ?Sized>(&self, rng: &mut R) -> CMatrix {
        let first = self.sample_single(rng);
        let mut out = first.clone();
        for _ in 1..self.copies {
            let next = match self.coupling {
                Coupling::TensorPower => first.clone(),
                Coupling::Independent => self.sample_single(rng),
            };
            out = out.kronecker(&next);
        }
        out
    }
}

/// Orthonormal basis (as columns) of the complement of `phi0`: Gram-Schmidt
/// of the computational basis vectors against `phi0` and each other, in
/// index order, dropping the one vector that becomes dependent.
pub fn complement_basis(d: usize) -> Result<CMatrix> {
    let phi = max_entangled_ket(d)?;
    let n = d * d;
    let mut basis: Vec<nalgebra::DVector<C64>> = vec![phi.amplitudes().clone()];
    for i in 0..n {
        let mut v = nalgebra::DVector::<C64>::zeros(n);
        v[i] = C64::new(1.0, 0.0);
        for b in &basis {
            let c = b.dotc(&v);
            v -= b * c;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            basis.push(v.unscale(norm));
        }
        if basis.len() == n {
            break;
        }
    }
    Ok(CMatrix::from_fn(n, n - 1, |r, c| basis[c + 1][r]))
}

fn u_theta_matrix(theta: f64, d: usize) -> CMatrix {
    let phi = max_entangled_ket(d).expect("d >= 2");
    let p = phi.projector().into_entries();
    let n = d * d;
    CMatrix::identity(n, n) + p * (C64::from_polar(1.0, theta) - C64::new(1.0, 0.0))
}

fn sud_matrix(g: &CMatrix) -> CMatrix {
    g.kronecker(&g.conjugate())
}

fn v_matrix(g: &CMatrix, basis: &CMatrix, d: usize) -> CMatrix {
    let phi = max_entangled_ket(d).expect("d >= 2");
    basis * g * basis.adjoint() + phi.projector().into_entries()
}

/// `U_theta` on `A (x) B`.
pub fn u_theta(theta: f64, d: usize) -> Result<Operator> {
    max_entangled_ket(d)?;
    Operator::new(u_theta_matrix(theta, d), pair_factors(d, 1))
}

/// `U(g) = g (x) conj(g)`.
pub fn act_sud(g: &CMatrix) -> Result<Operator> {
    if g.nrows() != g.ncols() || g.nrows() < 2 {
        return Err(Error::InvalidDimension("g must be square with d >= 2".into()));
    }
    Operator::new(sud_matrix(g), pair_factors(g.nrows(), 1))
}

/// `V(g)` for `g` acting on the `d^2 - 1` dimensional complement of `phi0`.
pub fn act_v(g: &CMatrix, d: usize) -> Result<Operator> {
    if g.nrows() != d * d - 1 || g.ncols() != d * d - 1 {
        return Err(Error::DimensionMismatch { expected: d * d - 1, found: g.nrows() });
    }
    Operator::new(v_matrix(g, &complement_basis(d)?, d), pair_factors(d, 1))
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix with the
/// phases of `diag(R)` moved into `Q`.
pub fn haar_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let z = ginibre(d, d, rng);
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let ph = if n > 0.0 { rjj / n } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= ph;
        }
    }
    q
}

/// Haar-random element of SU(d): a Haar unitary divided by a d-th root of its determinant.
pub fn haar_special_unitary<R: Rng + ?Sized>(d: usize, rng: &mut R) -> CMatrix {
    let u = haar_unitary(d, rng);
    let det = u.determinant();
    let root = C64::from_polar(1.0, -det.arg() / d as f64);
    u * root
}

#[derive(Clone, Debug)]
pub struct TwirlEstimate {
    pub mean: Operator,
    pub stderr: DMatrix<f64>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TwirlComparison {
    /// Largest `|mean - target|` over entries.
    pub max_deviation: f64,
    /// Largest deviation in units of that entry's standard error.
    pub max_sigmas: f64,
    pub max_stderr: f64,
    /// Every entry within `5 stderr` (plus a `1e-10` floor for exactly determined entries).
    pub pass: bool,
}

impl TwirlEstimate {
    pub fn max_stderr(&self) -> f64 {
        self.stderr.iter().copied().fold(0.0, f64::max)
    }

    pub fn compare(&self, target: &Operator) -> TwirlComparison {
        self.compare_at(target, 5.0)
    }

    pub fn compare_at(&self, target: &Operator, sigmas: f64) -> TwirlComparison {
        let mut max_dev: f64 = 0.0;
        let mut max_sig: f64 = 0.0;
        let mut pass = true;
        for ((m, t), s) in self.mean.entries().iter().zip(target.entries().iter()).zip(self.stderr.iter()) {
            let dev = (m - t).norm();
            max_dev = max_dev.max(dev);
            if dev > 1e-10 {
                max_sig = max_sig.max(if *s > 0.0 { dev / s } else { f64::INFINITY });
            }
            if dev > sigmas * s + 1e-10 {
                pass = false;
            }
        }
        TwirlComparison { max_deviation: max_dev, max_sigmas: max_sig, max_stderr: self.max_stderr(), pass }
    }
}

/// Per-sample generator: stream `k` of a ChaCha8 keyed by `seed`.
pub fn sample_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(k);
    r
}

struct Accum {
    sum: CMatrix,
    sq: DMatrix<f64>,
}

fn run_blocks<F>(dim: usize, n: usize, seed: u64, per_sample: F) -> Accum
where
    F: Fn(&mut ChaCha8Rng, &mut Accum) + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<Accum> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = Accum { sum: CMatrix::zeros(dim, dim), sq: DMatrix::zeros(dim, dim) };
            for k in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let mut rng = sample_rng(seed, k as u64);
                per_sample(&mut rng, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = Accum { sum: CMatrix::zeros(dim, dim), sq: DMatrix::zeros(dim, dim) };
    for p in parts {
        total.sum += p.sum;
        total.sq += p.sq;
    }
    total
}

fn finish(acc: Accum, n: usize, factors: Vec<crate::qstate::Factor>) -> Result<TwirlEstimate> {
    let nf = n as f64;
    let mean = acc.sum.unscale(nf);
    let stderr = DMatrix::from_fn(mean.nrows(), mean.ncols(), |i, j| {
        if n < 2 {
            return f64::INFINITY;
        }
        let var = (acc.sq[(i, j)] - nf * mean[(i, j)].norm_sqr()) / (nf - 1.0);
        (var.max(0.0) / nf).sqrt()
    });
    Ok(TwirlEstimate { mean: Operator::new(mean, factors)?, stderr, samples: n })
}

/// Monte-Carlo average of `f(g) op f(g)^dagger` over `n` Haar samples. The
/// generator is consumed for one seed word; sample `k` then uses its own
/// stream so the result depends only on that word and `n`.
pub fn mc_twirl<R: RngCore + ?Sized>(op: &Operator, action: &GroupAction, n: usize, rng: &mut R) -> Result<TwirlEstimate> {
    if n == 0 {
        return Err(Error::ZeroSamples);
    }
    if op.dim() != action.dim() {
        return Err(Error::DimensionMismatch { expected: action.dim(), found: op.dim() });
    }
    let seed = rng.next_u64();
    let m = op.entries();
    let acc = run_blocks(op.dim(), n, seed, |r, acc| {
        let u = action.sample_unitary(r);
        let x = &u * m * u.adjoint();
        for (s, (q, v)) in acc.sum.iter_mut().zip(acc.sq.iter_mut().zip(x.iter())) {
            *s += v;
            *q += v.norm_sqr();
        }
    });
    finish(acc, n, op.factors().to_vec())
}

/// [`mc_twirl`] for the rank-one operator `weight |v><v|`, applying each
/// sampled unitary to the vector only.
pub fn mc_twirl_pure<R: RngCore + ?Sized>(v: &Ket, weight: f64, action: &GroupAction, n: usize, rng: &mut R) -> Result<TwirlEstimate> {
    if n == 0 {
        return Err(Error::ZeroSamples);
    }
    if v.dim() != action.dim() {
        return Err(Error::DimensionMismatch { expected: action.dim(), found: v.dim() });
    }
    let seed = rng.next_u64();
    let dim = v.dim();
    let acc = run_blocks(dim, n, seed, |r, acc| {
        let u = action.sample_unitary(r);
        let w = &u * v.amplitudes();
        for j in 0..dim {
            let cj = w[j].conj() * weight;
            for i in 0..dim {
                let x = w[i] * cj;
                acc.sum[(i, j)] += x;
                acc.sq[(i, j)] += x.norm_sqr();
            }
        }
    });
    finish(acc, n, v.factors().to_vec())
}

/// Unitary whose columns are `phi0` followed by [`complement_basis`]; in this
/// basis `U_theta` is diagonal with the phase on index 0.
fn charge_basis(d: usize) -> Result<CMatrix> {
    let phi = max_entangled_ket(d)?;
    let c = complement_basis(d)?;
    let n = d * d;
    Ok(CMatrix::from_fn(n, n, |r, col| if col == 0 { phi.amplitudes()[r] } else { c[(r, col - 1)] }))
}

/// Number of `phi0` factors in the charge-basis index `idx` over `n` pairs.
fn charge(mut idx: usize, d2: usize, n: usize) -> usize {
    let mut c = 0;
    for _ in 0..n {
        if idx.is_multiple_of(d2) {
            c += 1;
        }
        idx /= d2;
    }
    c
}

/// Number of pairs `n` such that `dim = (d^2)^n`.
pub fn pair_count(dim: usize, d: usize) -> Result<usize> {
    let d2 = d * d;
    let mut n = 0;
    let mut x = 1;
    while x < dim {
        x *= d2;
        n += 1;
    }
    if x != dim || n == 0 {
        return Err(Error::InvalidDimension(format!("{dim} is not a power of {d2}")));
    }
    Ok(n)
}

/// Exact average over `theta` of `(U_theta^{(x) n})^dagger op U_theta^{(x) n}`:
/// every block between sectors with different numbers of `phi0` factors is zeroed.
pub fn u1_twirl_exact(op: &Operator, d: usize) -> Result<Operator> {
    let n = pair_count(op.dim(), d)?;
    let w1 = charge_basis(d)?;
    let mut w = w1.clone();
    for _ in 1..n {
        w = w.kronecker(&w1);
    }
    let mut m = w.adjoint() * op.entries() * &w;
    let d2 = d * d;
    let charges: Vec<usize> = (0..op.dim()).map(|i| charge(i, d2, n)).collect();
    for j in 0..op.dim() {
        for i in 0..op.dim() {
            if charges[i] != charges[j] {
                m[(i, j)] = C64::new(0.0, 0.0);
            }
        }
    }
    Operator::new(&w * m * w.adjoint(), op.factors().to_vec())
}

#[derive(Clone, Debug, PartialEq)]
pub struct InvarianceReport {
    pub invariant: bool,
    pub max_deviation: f64,
}

/// Largest `||f(g) T f(g)^dagger - T||_max` over `samples` sampled group elements.
pub fn check_invariance<R: Rng + ?Sized>(
    t: &TestOperator,
    action: &GroupAction,
    samples: usize,
    tol: f64,
    rng: &mut R,
) -> Result<InvarianceReport> {
    if samples == 0 {
        return Err(Error::ZeroSamples);
    }
    if t.dim() != action.dim() {
        return Err(Error::DimensionMismatch { expected: action.dim(), found: t.dim() });
    }
    let m = t.op().entries();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let u = action.sample_unitary(rng);
        let x = &u * m * u.adjoint();
        worst = worst.max(crate::qstate::max_abs_diff(&x, m));
    }
    Ok(InvarianceReport { invariant: worst <= tol, max_deviation: worst })
}
