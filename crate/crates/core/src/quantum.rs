//! Test operators built from rank-one POVMs, their level adjustments, and
//! the closed-form second errors they achieve.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{beta_binomial, binomial_ump_test};
use crate::error::{check_range, Error, Flagged, Result};
use crate::group::{haar_special_unitary, mc_twirl_pure, sample_rng, GroupAction, GroupKind, TwirlEstimate};
use crate::qstate::{
    bell_basis, group_factors, group_to_pair_perm, max_entangled_ket, max_entangled_projector, pair_factors,
    permute_ket, permute_systems, CMatrix, CVector, DensityMatrix, Factor, Ket, Operator, RankOnePovm, Tensor,
    TestOperator, C64,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuantumTestKind {
    GlobalN,
    T1Inv,
    T2Inv,
    Bell,
    PooledN,
    Cov1to2,
    T3Inv,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantumTestSpec {
    pub kind: QuantumTestKind,
    pub d: usize,
    pub n: usize,
    pub epsilon: f64,
    pub alpha: f64,
}

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("local dimension must be >= 2, got {d}")));
    }
    Ok(())
}

fn b_label(label: &str) -> String {
    match label.strip_prefix('A') {
        Some(rest) => format!("B{rest}"),
        None => format!("{label}'"),
    }
}

/// `T(M) = sum_i p_i |u_i (x) conj(u_i)><u_i (x) conj(u_i)|` on `A (x) B`,
/// where `B` repeats the factor structure of `A` (group-major when `A` is composite).
pub fn test_from_povm(m: &RankOnePovm) -> TestOperator {
    let (_, u0) = &m.elements()[0];
    let mut factors = u0.factors().to_vec();
    factors.extend(u0.factors().iter().map(|f| Factor::new(b_label(&f.label), f.dim)));
    let dim = u0.dim() * u0.dim();
    let mut t = CMatrix::zeros(dim, dim);
    for (w, u) in m.elements() {
        let v = u.amplitudes().kronecker(&u.amplitudes().conjugate());
        t += (&v * v.adjoint()).scale(*w);
    }
    TestOperator::trusted(Operator::new(t, factors).expect("consistent factors"))
}

/// Level adjustment of a single-copy test: `((1-alpha)/(1-eps)) T` when
/// `eps <= alpha`, otherwise `T + ((eps-alpha)/eps)(I - T)`.
pub fn level_adjust_1(t: &TestOperator, eps: f64, alpha: f64) -> Result<TestOperator> {
    check_range("epsilon", eps, 0.0, 1.0, "[0, 1)")?;
    check_range("alpha", alpha, f64::MIN_POSITIVE, 1.0 - f64::EPSILON, "(0, 1)")?;
    let op = if eps <= alpha {
        if eps >= 1.0 {
            return Err(Error::OutOfRange { name: "epsilon", value: eps, range: "[0, 1)" });
        }
        t.op().scale((1.0 - alpha) / (1.0 - eps))
    } else {
        t.op().add(&t.op().complement().scale((eps - alpha) / eps))?
    };
    Ok(TestOperator::trusted(op))
}

/// `P_{n,k}(T, S)`: sum of all tensor products with `k` factors `S` and `n-k` factors `T`.
/// Returns the list for `k = 0..=n`.
pub fn symmetric_products(t: &Operator, s: &Operator, n: usize) -> Vec<Operator> {
    let mut layer = vec![t.clone(), s.clone()];
    for _ in 1..n {
        let mut next = Vec::with_capacity(layer.len() + 1);
        for k in 0..=layer.len() {
            let keep_t = layer.get(k).map(|x| x.tensor(t));
            let add_s = if k > 0 { Some(layer[k - 1].tensor(s)) } else { None };
            next.push(match (keep_t, add_s) {
                (Some(a), Some(b)) => a.add(&b).expect("same shape"),
                (Some(a), None) | (None, Some(a)) => a,
                (None, None) => unreachable!(),
            });
        }
        layer = next;
    }
    layer
}

/// `T^n = sum_{k<l} P_{n,k}(T, I-T) + gamma P_{n,l}(T, I-T)` with `(l, gamma)`
/// from the classical test of the same `(n, eps, alpha)`.
pub fn binomial_operator_test(t: &TestOperator, eps: f64, alpha: f64, n: usize) -> Result<TestOperator> {
    if n == 0 {
        return Err(Error::InvalidDimension("need at least one copy".into()));
    }
    let c = binomial_ump_test(n, eps, alpha)?;
    let parts = symmetric_products(t.op(), &t.op().complement(), n);
    let mut out = parts[c.l].scale(c.gamma);
    for p in &parts[..c.l] {
        out = out.add(p)?;
    }
    Ok(TestOperator::trusted(out))
}

/// `|phi0><phi0| + (1/(d+1))(I - |phi0><phi0|)`.
pub fn t1_inv(d: usize) -> Result<TestOperator> {
    let p = max_entangled_projector(d)?;
    let op = p.add(&p.complement().scale(1.0 / (d as f64 + 1.0)))?;
    Ok(TestOperator::trusted(op))
}

/// `P (x) P + (1/(d^2-1)) (I-P) (x) (I-P)` on `(A1 B1)(A2 B2)`.
pub fn t2_inv(d: usize) -> Result<TestOperator> {
    let p = max_entangled_projector(d)?.with_factors(pair_factors(d, 1))?;
    let pc = p.complement();
    let pp = p.tensor(&p);
    let cc = pc.tensor(&pc).scale(1.0 / ((d * d - 1) as f64));
    Ok(TestOperator::trusted(pp.add(&cc)?.with_factors(pair_factors(d, 2))?))
}

/// Converts an operator on `(A1..An)(B1..Bn)` to pair-major order.
pub fn to_pair_major(op: &Operator, n: usize) -> Result<Operator> {
    permute_systems(op, &group_to_pair_perm(n))
}

/// `T(M^2_Bell)`: Alice measures the Bell basis on `A1 A2`, Bob checks the
/// conjugate outcome on `B1 B2`. Pair-major order.
pub fn bell_test(d: usize) -> Result<TestOperator> {
    let fa = vec![Factor::new("A1", d), Factor::new("A2", d)];
    let elements = bell_basis(d)?
        .into_iter()
        .map(|k| k.with_factors(fa.clone()).map(|k| (1.0, k)))
        .collect::<Result<Vec<_>>>()?;
    let t = test_from_povm(&RankOnePovm::new(elements)?);
    Ok(TestOperator::trusted(to_pair_major(t.op(), 2)?))
}

/// `P^{(x) n} + (1/(d^n+1))(I - P^{(x) n})` in pair-major order.
pub fn pooled_t1(d: usize, n: usize) -> Result<TestOperator> {
    if n == 0 {
        return Err(Error::InvalidDimension("need at least one copy".into()));
    }
    let p = max_entangled_projector(d)?.with_factors(pair_factors(d, 1))?;
    let mut pn = p.clone();
    for k in 2..=n {
        pn = pn.tensor(&p.clone().with_factors(vec![Factor::new(format!("A{k}"), d), Factor::new(format!("B{k}"), d)])?);
    }
    let dn = (d as f64).powi(n as i32);
    Ok(TestOperator::trusted(pn.add(&pn.complement().scale(1.0 / (dn + 1.0)))?))
}

/// The pooled test built as the single-copy test for the `d^n` dimensional
/// maximally entangled state on `(A1..An)(B1..Bn)`, then reordered.
pub fn pooled_t1_group_major(d: usize, n: usize) -> Result<TestOperator> {
    let dn = d.pow(n as u32);
    let t = t1_inv(dn)?;
    let op = t.into_op().with_factors(group_factors(d, n))?;
    Ok(TestOperator::trusted(to_pair_major(&op, n)?))
}

/// Second error of the pooled test on `sigma^{(x) n}`: `(d^n (1-p)^n + 1)/(d^n + 1)`.
pub fn beta_pooled(d: usize, n: usize, p: f64) -> Result<f64> {
    check_d(d)?;
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    let dn = (d as f64).powi(n as i32);
    Ok((dn * (1.0 - p).powi(n as i32) + 1.0) / (dn + 1.0))
}

/// Orthonormal basis with `v` as the first column, completed by Gram-Schmidt
/// of the computational basis.
pub fn orthonormal_completion(v: &CVector) -> CMatrix {
    let n = v.len();
    let mut basis = vec![v.unscale(v.norm())];
    for i in 0..n {
        if basis.len() == n {
            break;
        }
        let mut e = CVector::zeros(n);
        e[i] = C64::new(1.0, 0.0);
        for b in &basis {
            let c = b.dotc(&e);
            e -= b * c;
        }
        let norm = e.norm();
        if norm > 1e-8 {
            basis.push(e.unscale(norm));
        }
    }
    CMatrix::from_fn(n, n, |r, c| basis[c][r])
}

/// Orthonormal basis `u^i(phi) = u_i + phi/sqrt(d)` where the offsets `u_i`
/// are the vertices of a regular simplex centered in the complement of `phi`:
/// `<u_i|u_j> = -1/d` for `i != j` and `(d-1)/d` on the diagonal.
pub fn simplex_completion(phi: &Ket) -> Result<Vec<Ket>> {
    let d = phi.dim();
    check_d(d)?;
    if !phi.is_normalized() {
        return Err(Error::OutOfRange { name: "norm", value: phi.norm(), range: "1" });
    }
    let e = orthonormal_completion(phi.amplitudes());
    let s = 1.0 / (d as f64).sqrt();
    Ok((0..d)
        .map(|i| {
            let mut v = CVector::zeros(d);
            for k in 0..d {
                let w = C64::from_polar(s, std::f64::consts::TAU * (i * k) as f64 / d as f64);
                v += e.column(k) * w;
            }
            Ket::new(v, phi.factors().to_vec()).expect("same dimension")
        })
        .collect())
}

/// Offset vectors `u_i = u^i - phi/sqrt(d)` of [`simplex_completion`].
pub fn simplex_offsets(phi: &Ket) -> Result<Vec<Ket>> {
    let s = C64::new(1.0 / (phi.dim() as f64).sqrt(), 0.0);
    Ok(simplex_completion(phi)?.into_iter().map(|u| u.add(&phi.scale(-s))).collect())
}

/// Seed vectors of the two-step covariant POVM: `u1 = |0>`,
/// `u2 = (1/sqrt d)|0> + sqrt(1 - 1/d)|1>`, so `|<u1|u2>|^2 = 1/d`.
pub fn cov_1to2_vectors(d: usize) -> Result<(Ket, Ket)> {
    check_d(d)?;
    let f = vec![Factor::new("A", d)];
    let u1 = Ket::basis(0, f.clone());
    let mut v = CVector::zeros(d);
    v[0] = C64::new(1.0 / (d as f64).sqrt(), 0.0);
    v[1] = C64::new((1.0 - 1.0 / d as f64).sqrt(), 0.0);
    Ok((u1, Ket::new(v, f)?))
}

/// Monte-Carlo estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub samples: usize,
}

impl McEstimate {
    pub fn within(&self, target: f64, sigmas: f64) -> bool {
        (self.mean - target).abs() <= sigmas * self.stderr + 1e-12
    }
}

/// Deterministic parallel mean of a per-sample scalar. Sample `k` draws from
/// stream `k` of the seed taken from `rng`.
pub fn mc_mean<R, F>(n: usize, rng: &mut R, f: F) -> Result<McEstimate>
where
    R: RngCore + ?Sized,
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    if n == 0 {
        return Err(Error::ZeroSamples);
    }
    let seed = rng.next_u64();
    const BLOCK: usize = 1024;
    let parts: Vec<(f64, f64)> = (0..n.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let (mut s, mut q) = (0.0, 0.0);
            for k in b * BLOCK..((b + 1) * BLOCK).min(n) {
                let x = f(&mut sample_rng(seed, k as u64));
                s += x;
                q += x * x;
            }
            (s, q)
        })
        .collect();
    let (s, q) = parts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let nf = n as f64;
    let mean = s / nf;
    let stderr = if n > 1 { ((q - nf * mean * mean).max(0.0) / (nf - 1.0) / nf).sqrt() } else { f64::INFINITY };
    Ok(McEstimate { mean, stderr, samples: n })
}

/// Estimate of `Tr(T sigma^{(x) 2})` for the two-step covariant test
/// `T = d^2 E_g |a><a| (x) |b><b|`, `a = g u1 (x) conj(g u1)`, `b = g u2 (x) conj(g u2)`.
pub fn cov_1to2_trace<R: RngCore + ?Sized>(sigma: &DensityMatrix, n: usize, rng: &mut R) -> Result<McEstimate> {
    let dim = sigma.dim();
    let d = (dim as f64).sqrt().round() as usize;
    if d * d != dim {
        return Err(Error::InvalidDimension(format!("{dim} is not d^2")));
    }
    let (u1, u2) = cov_1to2_vectors(d)?;
    let s = sigma.op().entries().clone();
    let d2 = (d * d) as f64;
    mc_mean(n, rng, |r| {
        let g = haar_special_unitary(d, r);
        let gu1 = &g * u1.amplitudes();
        let gu2 = &g * u2.amplitudes();
        let a = gu1.kronecker(&gu1.conjugate());
        let b = gu2.kronecker(&gu2.conjugate());
        let ea = a.dotc(&(&s * &a)).re;
        let eb = b.dotc(&(&s * &b)).re;
        d2 * ea * eb
    })
}

/// Seed vector `d (u1 (x) u2 (x) conj(u1) (x) conj(u2))` of the two-step test,
/// reordered to pair-major `(A1 B1)(A2 B2)`.
pub fn cov_1to2_seed(d: usize) -> Result<Ket> {
    let (u1, u2) = cov_1to2_vectors(d)?;
    let a = u1.amplitudes().kronecker(u2.amplitudes());
    let v = a.kronecker(&a.conjugate());
    let k = Ket::new(v, group_factors(d, 2))?;
    permute_ket(&k, &group_to_pair_perm(2))
}

/// Monte-Carlo twirled operator of the two-step covariant test.
pub fn cov_1to2_operator<R: RngCore + ?Sized>(d: usize, n: usize, rng: &mut R) -> Result<TwirlEstimate> {
    let seed = cov_1to2_seed(d)?;
    let action = GroupAction::new(GroupKind::SUd, d, 2)?;
    mc_twirl_pure(&seed, (d * d) as f64, &action, n, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceBound {
    pub holds: bool,
    pub trace: f64,
    /// `d <phi0|T|phi0>`.
    pub bound: f64,
}

/// Whether `Tr T >= d <phi0|T|phi0>` (up to `1e-10`) for an operator on `A (x) B`.
pub fn trace_bound(op: &Operator) -> Result<TraceBound> {
    let d = (op.dim() as f64).sqrt().round() as usize;
    if d * d != op.dim() {
        return Err(Error::InvalidDimension(format!("{} is not d^2", op.dim())));
    }
    let phi = max_entangled_ket(d)?;
    let trace = op.trace().re;
    let bound = d as f64 * op.expectation(&phi)?.re;
    Ok(TraceBound { holds: trace >= bound - 1e-10, trace, bound })
}

/// The trace bound for `T = sum_i a_i |x_i><x_i| (x) |y_i><y_i|`, built from its terms.
pub fn separable_trace_bound(terms: &[(f64, Ket, Ket)]) -> Result<TraceBound> {
    let (_, x0, y0) = terms.first().ok_or_else(|| Error::InvalidDimension("empty decomposition".into()))?;
    if x0.dim() != y0.dim() {
        return Err(Error::DimensionMismatch { expected: x0.dim(), found: y0.dim() });
    }
    let dim = x0.dim() * y0.dim();
    let mut m = CMatrix::zeros(dim, dim);
    for (a, x, y) in terms {
        if *a < 0.0 {
            return Err(Error::OutOfRange { name: "weight", value: *a, range: "[0, inf)" });
        }
        let v = x.amplitudes().kronecker(y.amplitudes());
        m += (&v * v.adjoint()).scale(*a);
    }
    trace_bound(&Operator::new(m, pair_factors(x0.dim(), 1))?)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaxEntangledCheck {
    pub max_entangled: bool,
    /// `||(P_{A1B1} (x) (I - P_{A2B2})) u (x) conj(u)||`.
    pub j1_residual: f64,
    /// `||((I - P_{A1B1}) (x) P_{A2B2}) u (x) conj(u)||`.
    pub j2_residual: f64,
}

/// Maximal-entanglement test for `u` on `A1 (x) A2` through the two
/// projection conditions on `u (x) conj(u)`.
pub fn is_max_entangled(u: &Ket, d: usize) -> Result<MaxEntangledCheck> {
    if u.dim() != d * d {
        return Err(Error::DimensionMismatch { expected: d * d, found: u.dim() });
    }
    let u = u.normalized();
    let v = u.amplitudes().kronecker(&u.amplitudes().conjugate());
    let w = permute_ket(&Ket::new(v, group_factors(d, 2))?, &group_to_pair_perm(2))?;
    let p = max_entangled_projector(d)?.with_factors(pair_factors(d, 1))?;
    let pc = p.complement();
    let j1 = p.tensor(&pc).apply(&w)?.norm();
    let j2 = pc.tensor(&p).apply(&w)?.norm();
    Ok(MaxEntangledCheck { max_entangled: j1 <= 1e-10 && j2 <= 1e-10, j1_residual: j1, j2_residual: j2 })
}

/// Level-alpha single-copy value of the invariant one-way test:
/// `(1-alpha)(1 - dp/(d+1))/(1 - d eps/(d+1))` when `d eps/(d+1) <= alpha`,
/// otherwise `1 - alpha p/eps`.
pub fn beta_t1_formula(d: usize, eps: f64, alpha: f64, p: f64) -> Result<f64> {
    check_d(d)?;
    check_range("epsilon", eps, 0.0, 1.0, "[0, 1]")?;
    check_range("alpha", alpha, f64::MIN_POSITIVE, 1.0 - f64::EPSILON, "(0, 1)")?;
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    let r = d as f64 / (d as f64 + 1.0);
    Ok(if r * eps <= alpha { (1.0 - alpha) * (1.0 - r * p) / (1.0 - r * eps) } else { 1.0 - alpha * p / eps })
}

/// `(1-p)^2 + p^2/(d^2-1)`: second error of [`t2_inv`] on two copies.
pub fn beta_t2_formula(d: usize, p: f64) -> Result<f64> {
    check_d(d)?;
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    Ok((1.0 - p).powi(2) + p * p / ((d * d - 1) as f64))
}

/// `2x - d^2 x^2 / (d^2 - 1)`: per-pair failure probability of the two-copy test
/// for an isotropic state of defect `x`.
pub fn two_copy_defect(d: usize, x: f64) -> f64 {
    let d2 = (d * d) as f64;
    2.0 * x - d2 * x * x / (d2 - 1.0)
}

/// `beta^n_alpha(<= m(eps) || m(p))` with `m` = [`two_copy_defect`]; the
/// flag is false for `eps > (d^2-1)/d^2`, where `m` stops being monotone.
pub fn beta_2n_bound(d: usize, n: usize, eps: f64, alpha: f64, p: f64) -> Result<Flagged> {
    check_d(d)?;
    check_range("epsilon", eps, 0.0, 1.0, "[0, 1]")?;
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    let d2 = (d * d) as f64;
    let v = beta_binomial(n, two_copy_defect(d, eps), alpha, two_copy_defect(d, p).clamp(0.0, 1.0))?;
    Ok(Flagged::new(v, eps <= (d2 - 1.0) / d2))
}

/// Random rank-one separable decomposition with `terms` terms on `A (x) B`.
pub fn random_separable_terms<R: Rng + ?Sized>(d: usize, terms: usize, rng: &mut R) -> Vec<(f64, Ket, Ket)> {
    let fa = vec![Factor::new("A", d)];
    let fb = vec![Factor::new("B", d)];
    (0..terms)
        .map(|_| {
            let x = Ket::new(crate::qstate::ginibre(d, 1, rng).column(0).into_owned(), fa.clone()).unwrap().normalized();
            let y = Ket::new(crate::qstate::ginibre(d, 1, rng).column(0).into_owned(), fb.clone()).unwrap().normalized();
            (rng.random::<f64>(), x, y)
        })
        .collect()
}
