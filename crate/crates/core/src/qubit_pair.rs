//! Exact two-copy analysis for qubit pairs (`d = 2`): Bell-basis blocks,
//! the six irreducible projectors of `SU(2) x U(1)` on two pairs, and the
//! resulting second errors.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Flagged, Result};
use crate::qstate::{
    c64, fidelity_defect, group_factors, group_to_pair_perm, pair_factors, permute_ket, CMatrix, CVector,
    DensityMatrix, Factor, Ket, Operator, TestOperator, C64,
};

/// Bell basis used for the block decomposition:
/// `phi0 = (|00>+|11>)/sqrt2`, `phi1 = (|01>+|10>)/sqrt2`,
/// `phi2 = (-i|01> + i|10>)/sqrt2`, `phi3 = (|00>-|11>)/sqrt2`.
pub fn qubit_bell_basis() -> [CVector; 4] {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let z = c64(0.0, 0.0);
    let r = c64(s, 0.0);
    let i = c64(0.0, s);
    [
        CVector::from_vec(vec![r, z, z, r]),
        CVector::from_vec(vec![z, r, r, z]),
        CVector::from_vec(vec![z, -i, i, z]),
        CVector::from_vec(vec![r, z, z, -r]),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockDecomposition {
    /// `<phi0|sigma|phi0>`.
    pub a: f64,
    /// `b_i = <phi_i|sigma|phi0>`, `i = 1..3`.
    pub b: Vector3<C64>,
    /// `C_ij = <phi_i|sigma|phi_j>`, `i, j = 1..3`.
    pub c: Matrix3<C64>,
    /// `Re C`.
    pub v: Matrix3<f64>,
}

fn check_qubit_pair(sigma: &DensityMatrix) -> Result<()> {
    if sigma.dim() != 4 {
        return Err(Error::Unsupported(format!("two-qubit state required, got dimension {}", sigma.dim())));
    }
    Ok(())
}

pub fn bell_block(sigma: &DensityMatrix) -> Result<BlockDecomposition> {
    check_qubit_pair(sigma)?;
    let basis = qubit_bell_basis();
    let m = sigma.op().entries();
    let x = |i: usize, j: usize| basis[i].dotc(&(m * &basis[j]));
    let c = Matrix3::from_fn(|i, j| x(i + 1, j + 1));
    Ok(BlockDecomposition {
        a: x(0, 0).re,
        b: Vector3::from_fn(|i, _| x(i + 1, 0)),
        v: c.map(|z| z.re),
        c,
    })
}

/// Index of each block in [`IrrepProjectors::all`] and weight vectors.
pub const BLOCK_NAMES: [&str; 6] = ["Sigma0_5", "Sigma1_3", "Sigma2_1", "Sigma0_1", "Lambda0_3", "Lambda1_3"];
pub const BLOCK_DIMS: [usize; 6] = [5, 3, 1, 1, 3, 3];

/// Block weights of the optimal two-sample test.
pub const OPT_WEIGHTS: [f64; 6] = [3.0 / 8.0, 0.0, 0.25, 0.0, 3.0 / 8.0, 0.0];
/// Block weights of the two-step covariant test.
pub const COV_1TO2_WEIGHTS: [f64; 6] = [1.0 / 8.0, 0.25, 0.25, 0.0, 1.0 / 8.0, 0.25];

#[derive(Clone, Debug)]
pub struct IrrepProjectors {
    pub sigma0_5: Operator,
    pub sigma1_3: Operator,
    pub sigma2_1: Operator,
    pub sigma0_1: Operator,
    pub lambda0_3: Operator,
    pub lambda1_3: Operator,
}

impl IrrepProjectors {
    /// In the order of [`BLOCK_NAMES`].
    pub fn all(&self) -> [&Operator; 6] {
        [&self.sigma0_5, &self.sigma1_3, &self.sigma2_1, &self.sigma0_1, &self.lambda0_3, &self.lambda1_3]
    }
}

/// Projectors onto the irreducible subspaces, spanned by vectors in the
/// basis `|i,j> = phi_i (x) phi_j` of `(A1 B1)(A2 B2)`.
pub fn irrep_projectors() -> IrrepProjectors {
    let basis = qubit_bell_basis();
    let ket = |i: usize, j: usize| basis[i].kronecker(&basis[j]);
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let s3 = 1.0 / 3f64.sqrt();
    let omega = c64(-0.5, 3f64.sqrt() / 2.0);
    let sym = |i: usize, j: usize| (ket(i, j) + ket(j, i)).scale(s2);
    let anti = |i: usize, j: usize| (ket(i, j) - ket(j, i)).scale(s2);
    let proj = |vs: Vec<CVector>| {
        let mut m = CMatrix::zeros(16, 16);
        for v in vs {
            m += &v * v.adjoint();
        }
        Operator::new(m, pair_factors(2, 2)).expect("16 = 4 * 4")
    };
    let tw = |w1: C64, w2: C64| (ket(1, 1) + ket(2, 2) * w1 + ket(3, 3) * w2).scale(s3);
    IrrepProjectors {
        sigma0_5: proj(vec![sym(1, 2), sym(2, 3), sym(3, 1), tw(omega, omega * omega), tw(omega * omega, omega)]),
        sigma1_3: proj(vec![sym(0, 1), sym(0, 2), sym(0, 3)]),
        sigma2_1: proj(vec![ket(0, 0)]),
        sigma0_1: proj(vec![tw(c64(1.0, 0.0), c64(1.0, 0.0))]),
        lambda0_3: proj(vec![anti(1, 2), anti(2, 3), anti(3, 1)]),
        lambda1_3: proj(vec![anti(0, 1), anti(0, 2), anti(0, 3)]),
    }
}

/// `Tr(sigma^{(x)2} Pi)` for the six blocks, from the Bell-basis components.
pub fn block_traces(sigma: &DensityMatrix) -> Result<[f64; 6]> {
    let bd = bell_block(sigma)?;
    let c = &bd.c;
    let tr_c = c.trace().re;
    let tr_c2 = (c * c).trace().re;
    let tr_ccbar = (c * c.conjugate()).trace().re;
    let b2 = bd.b.norm_squared();
    let a = bd.a;
    Ok([
        0.5 * (tr_c2 + tr_c * tr_c) - tr_ccbar / 3.0,
        a * tr_c + b2,
        a * a,
        tr_ccbar / 3.0,
        0.5 * (tr_c * tr_c - tr_c2),
        a * tr_c - b2,
    ])
}

/// `4 sum_k (w_k / dim_k) Pi_k`.
pub fn effective_operator(weights: &[f64; 6]) -> TestOperator {
    let pr = irrep_projectors();
    let mut m = Operator::zeros(pair_factors(2, 2));
    for ((w, p), dim) in weights.iter().zip(pr.all()).zip(BLOCK_DIMS) {
        m = m.add(&p.scale(4.0 * w / dim as f64)).expect("same shape");
    }
    TestOperator::trusted(m)
}

/// Trace of [`effective_operator`] against `sigma^{(x)2}` through the block traces.
pub fn effective_trace(weights: &[f64; 6], sigma: &DensityMatrix) -> Result<f64> {
    let t = block_traces(sigma)?;
    Ok((0..6).map(|k| 4.0 * weights[k] / BLOCK_DIMS[k] as f64 * t[k]).sum())
}

/// `u_op = (1/2)(|01>-|10>) + (sqrt3/2)(|00>+|11>)` on `A1 A2`, normalized
/// (the unnormalized vector has norm `sqrt 2`).
pub fn u_op() -> Ket {
    let h = 0.5;
    let r = 3f64.sqrt() / 2.0;
    let v = CVector::from_vec(vec![c64(r, 0.0), c64(h, 0.0), c64(-h, 0.0), c64(r, 0.0)]);
    Ket::new(v, vec![Factor::new("A1", 2), Factor::new("A2", 2)]).expect("4 = 2 * 2").normalized()
}

/// `u (x) conj(u)` on `A1 A2 B1 B2`, reordered to `(A1 B1)(A2 B2)`.
pub fn doubled_pair_major(u: &Ket) -> Result<Ket> {
    let v = u.amplitudes().kronecker(&u.amplitudes().conjugate());
    permute_ket(&Ket::new(v, group_factors(2, 2))?, &group_to_pair_perm(2))
}

/// Block weights `<u (x) conj(u)|Pi_k|u (x) conj(u)>` of a unit vector `u` on `A1 A2`.
pub fn seed_weights(u: &Ket) -> Result<[f64; 6]> {
    let w = doubled_pair_major(u)?;
    let pr = irrep_projectors();
    let mut out = [0.0; 6];
    for (o, p) in out.iter_mut().zip(pr.all()) {
        *o = p.expectation(&w)?.re;
    }
    Ok(out)
}

fn v_spread(v: &Matrix3<f64>) -> f64 {
    let tr = v.trace();
    (v * v).trace() / 3.0 - (tr / 3.0) * (tr / 3.0)
}

/// Optimal two-sample second error
/// `(1-p)^2 + p^2/3 - (3/5)(Tr V^2/3 - (Tr V/3)^2)`; flag `p <= 1/2`.
pub fn beta_opt_2sample(sigma: &DensityMatrix) -> Result<Flagged> {
    let bd = bell_block(sigma)?;
    let p = fidelity_defect(sigma)?;
    let v = (1.0 - p).powi(2) + p * p / 3.0 - 0.6 * v_spread(&bd.v);
    Ok(Flagged::new(v, p <= 0.5))
}

/// Second error of the two-step covariant test:
/// `(1 - 2p/3)^2 - (1/5)(Tr V^2/3 - (Tr V/3)^2)`.
pub fn beta_1to2(sigma: &DensityMatrix) -> Result<f64> {
    let bd = bell_block(sigma)?;
    let p = fidelity_defect(sigma)?;
    Ok((1.0 - 2.0 * p / 3.0).powi(2) - 0.2 * v_spread(&bd.v))
}

/// The same value in terms of `C`:
/// `(1 - Tr C)^2 + (2/3) Tr C - (8/15)(Tr C)^2 - (1/15) Tr (Re C)^2`.
pub fn beta_1to2_expanded(sigma: &DensityMatrix) -> Result<f64> {
    let bd = bell_block(sigma)?;
    let tc = bd.c.trace().re;
    let tv2 = (bd.v * bd.v).trace();
    Ok((1.0 - tc).powi(2) + 2.0 * tc / 3.0 - 8.0 * tc * tc / 15.0 - tv2 / 15.0)
}

/// Gain `(1/5)(Tr V^2/3 - (Tr V/3)^2)` of the two-step test over two independent one-way tests.
pub fn one_to_two_gain(sigma: &DensityMatrix) -> Result<f64> {
    Ok(0.2 * v_spread(&bell_block(sigma)?.v))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockInequalities {
    /// `Tr Lambda1_3 - Tr Lambda0_3`.
    pub o3: f64,
    /// `5 Tr Sigma1_3 - 3 Tr Sigma0_5`.
    pub o4: f64,
    /// `10 Tr Sigma0_1 + Tr Sigma0_5 - 5 Tr Lambda0_3`.
    pub o5: f64,
}

impl BlockInequalities {
    pub fn holds(&self) -> [bool; 3] {
        [self.o3 >= -1e-12, self.o4 >= -1e-12, self.o5 >= -1e-12]
    }
}

pub fn check_inequalities_o(sigma: &DensityMatrix) -> Result<BlockInequalities> {
    let [s5, s3, _, s1, l0, l1] = block_traces(sigma)?;
    Ok(BlockInequalities { o3: l1 - l0, o4: 5.0 * s3 - 3.0 * s5, o5: 10.0 * s1 + s5 - 5.0 * l0 })
}

/// Bell-diagonal two-qubit state with weights on `phi0..phi3`.
pub fn bell_diagonal_state(weights: [f64; 4]) -> Result<DensityMatrix> {
    let basis = qubit_bell_basis();
    let mut m = CMatrix::zeros(4, 4);
    for (w, v) in weights.iter().zip(basis.iter()) {
        m += (v * v.adjoint()).scale(*w);
    }
    DensityMatrix::new(Operator::new(m, pair_factors(2, 1))?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{isotropic_state, max_entangled_ket};

    #[test]
    fn basis_starts_with_phi0() {
        let phi = max_entangled_ket(2).unwrap();
        assert!((qubit_bell_basis()[0].clone() - phi.amplitudes()).norm() < 1e-15);
    }

    #[test]
    fn isotropic_blocks() {
        let bd = bell_block(&isotropic_state(2, 0.3).unwrap()).unwrap();
        assert!((bd.a - 0.7).abs() < 1e-12);
        assert!(bd.b.norm() < 1e-12);
        assert!((bd.c - Matrix3::identity().map(|x: C64| x * 0.1)).norm() < 1e-12);
    }

    #[test]
    fn u_op_weights() {
        let w = seed_weights(&u_op()).unwrap();
        for (a, b) in w.iter().zip(OPT_WEIGHTS) {
            assert!((a - b).abs() < 1e-12, "{w:?}");
        }
    }

    #[test]
    fn effective_test_is_valid() {
        for w in [OPT_WEIGHTS, COV_1TO2_WEIGHTS] {
            let t = TestOperator::new(effective_operator(&w).into_op()).unwrap();
            let (lo, hi) = t.spectrum_bounds();
            assert!(lo >= -1e-12 && hi <= 1.0 + 1e-12);
        }
    }
}
