//! Tests for states coming from two or three independent sources.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::classical::beta_poisson;
use crate::error::{check_range, Error, Flagged, Result};
use crate::group::{mc_twirl_pure, GroupAction, GroupKind, TwirlEstimate};
use crate::qstate::{
    group_factors, group_to_pair_perm, max_entangled_projector, pair_factors, permute_ket, CVector, Factor, Ket,
    Operator, Tensor, TestOperator, C64,
};

/// Largest local dimension for operators on three pairs (`d^6 <= 729`).
pub const MAX_TRIPLE_DIM: usize = 3;

/// The printed three-source closed form puts the triple term over
/// `(d+1)^2 (d-1)`; the trace of the GHZ-twirled test gives `(d+1)^3 (d-1)`.
/// [`beta_three_source`] returns the trace value.
pub const THREE_SOURCE_NOTE: &str = "three-source second error: the printed closed form divides the p1 p2 p3 term \
by (d+1)^2 (d-1), but the trace of the three-source invariant test gives (d+1)^3 (d-1); the trace value is reported";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MultiSourceDefects {
    pub d: usize,
    pub p: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<Vec<f64>>,
}

impl MultiSourceDefects {
    pub fn new(d: usize, p: Vec<f64>, t: Option<Vec<f64>>) -> Result<Self> {
        check_d(d)?;
        if !(2..=3).contains(&p.len()) {
            return Err(Error::InvalidDimension(format!("need 2 or 3 sources, got {}", p.len())));
        }
        for &x in &p {
            check_range("p", x, 0.0, 1.0, "[0, 1]")?;
        }
        if let Some(t) = &t {
            if t.len() != p.len() {
                return Err(Error::DimensionMismatch { expected: p.len(), found: t.len() });
            }
            for &x in t {
                if !(x >= 0.0 && x.is_finite()) {
                    return Err(Error::OutOfRange { name: "t", value: x, range: "[0, inf)" });
                }
            }
        }
        Ok(MultiSourceDefects { d, p, t })
    }
}

fn check_d(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("local dimension must be >= 2, got {d}")));
    }
    Ok(())
}

fn check_triple_d(d: usize) -> Result<()> {
    check_d(d)?;
    if d > MAX_TRIPLE_DIM {
        return Err(Error::Unsupported(format!("three-pair operators need d <= {MAX_TRIPLE_DIM}, got {d}")));
    }
    Ok(())
}

/// `(1-p1)(1-p2) + p1 p2/(d^2-1)`, flagged by
/// `p1 p2/(d^2-1) <= min((1-p1) p2, p1 (1-p2))`.
pub fn beta_two_source(d: usize, p1: f64, p2: f64) -> Result<Flagged> {
    check_d(d)?;
    check_range("p1", p1, 0.0, 1.0, "[0, 1]")?;
    check_range("p2", p2, 0.0, 1.0, "[0, 1]")?;
    let cross = p1 * p2 / ((d * d - 1) as f64);
    let ok = cross <= (1.0 - p1) * p2 && cross <= p1 * (1.0 - p2);
    Ok(Flagged::new((1.0 - p1) * (1.0 - p2) + cross, ok))
}

/// `(1 - d p1/(d+1))(1 - d p2/(d+1))`: each source tested on its own.
pub fn beta_two_source_local(d: usize, p1: f64, p2: f64) -> Result<f64> {
    check_d(d)?;
    check_range("p1", p1, 0.0, 1.0, "[0, 1]")?;
    check_range("p2", p2, 0.0, 1.0, "[0, 1]")?;
    let r = d as f64 / (d as f64 + 1.0);
    Ok((1.0 - r * p1) * (1.0 - r * p2))
}

/// Eigenvalues of the three-source invariant test, indexed `j*4 + k*2 + l`
/// where bit 1 selects `P^c` on that pair.
pub fn t3_coefficients(d: usize) -> [f64; 8] {
    let d = d as f64;
    let two = 1.0 / ((d + 1.0).powi(2) * (d - 1.0));
    let three = (d + 2.0) / ((d + 1.0).powi(3) * (d - 1.0));
    let mut a = [0.0; 8];
    for (idx, a) in a.iter_mut().enumerate() {
        *a = match idx.count_ones() {
            0 => 1.0,
            1 => 0.0,
            2 => two,
            _ => three,
        };
    }
    a
}

/// `sum_{jkl} a_{jkl} P1^{(j)} (x) P2^{(k)} (x) P3^{(l)}` on `(A1 B1)(A2 B2)(A3 B3)`.
fn pattern_operator(d: usize, a: &[f64; 8]) -> Result<Operator> {
    let proj: Vec<[Operator; 2]> = (1..=3)
        .map(|k| {
            let f = vec![Factor::new(format!("A{k}"), d), Factor::new(format!("B{k}"), d)];
            let p = max_entangled_projector(d)?.with_factors(f)?;
            let c = p.complement();
            Ok([p, c])
        })
        .collect::<Result<_>>()?;
    let mut out = Operator::zeros(pair_factors(d, 3));
    for (idx, &w) in a.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let (j, k, l) = ((idx >> 2) & 1, (idx >> 1) & 1, idx & 1);
        let term = proj[0][j].tensor(&proj[1][k]).tensor(&proj[2][l]);
        out = out.add(&term.scale(w))?;
    }
    Ok(out)
}

/// The three-source invariant test built from the GHZ seed, pair-major.
pub fn t3_inv(d: usize) -> Result<TestOperator> {
    check_triple_d(d)?;
    Ok(TestOperator::trusted(pattern_operator(d, &t3_coefficients(d))?))
}

/// Operator with arbitrary pattern coefficients, e.g. from [`app_t_coeffs`].
pub fn t3_from_coeffs(d: usize, a: &[f64; 8]) -> Result<Operator> {
    check_triple_d(d)?;
    pattern_operator(d, a)
}

/// Pattern coefficients of the twirl of `d^3 |u_A (x) u_B><u_A (x) u_B|` in
/// terms of the overlaps `beta_i` and `gamma = |u_A|^2 |u_B|^2`.
/// Indexing as in [`t3_coefficients`]; entry 0 is 1.
pub fn app_t_coeffs(b1: f64, b2: f64, b3: f64, gamma: f64, d: usize) -> Result<[f64; 8]> {
    check_d(d)?;
    let d = d as f64;
    let d3 = d * d * d;
    let s = d * d - 1.0;
    let one = |b: f64| d3 / s * (b / d - 1.0 / d3);
    let two = |b: f64, x: f64, y: f64| d3 / (s * s) * (b - (x + y) / d + 1.0 / d3);
    let mut a = [0.0; 8];
    a[0b000] = 1.0;
    a[0b001] = one(b3);
    a[0b010] = one(b2);
    a[0b100] = one(b1);
    a[0b011] = two(b1, b2, b3);
    a[0b101] = two(b2, b1, b3);
    a[0b110] = two(b3, b2, b1);
    a[0b111] = d3 / (s * s * s) * (gamma - (d - 1.0) / d * (b1 + b2 + b3) - 1.0 / d3);
    Ok(a)
}

fn check_three(d: usize, p: [f64; 3]) -> Result<()> {
    check_d(d)?;
    for x in p {
        check_range("p", x, 0.0, 1.0, "[0, 1]")?;
    }
    Ok(())
}

/// `sum_{jkl} a_{jkl} prod_i (1-p_i or p_i)`: the trace of [`t3_inv`] against
/// `sigma1 (x) sigma2 (x) sigma3`. The flag is `p_i <= (d-1)/d` for all `i`.
pub fn beta_three_source(d: usize, p1: f64, p2: f64, p3: f64) -> Result<Flagged> {
    let p = [p1, p2, p3];
    check_three(d, p)?;
    let a = t3_coefficients(d);
    let v = a
        .iter()
        .enumerate()
        .map(|(idx, w)| w * (0..3).map(|i| if (idx >> (2 - i)) & 1 == 1 { p[i] } else { 1.0 - p[i] }).product::<f64>())
        .sum();
    let lim = (d as f64 - 1.0) / d as f64;
    Ok(Flagged::new(v, p.iter().all(|&x| x <= lim)))
}

/// The closed form exactly as printed, with `(d+1)^2 (d-1)` on the triple term.
pub fn beta_three_source_printed(d: usize, p1: f64, p2: f64, p3: f64) -> Result<f64> {
    check_three(d, [p1, p2, p3])?;
    let d = d as f64;
    let den = (d + 1.0).powi(2) * (d - 1.0);
    let pairs = p1 * p2 * (1.0 - p3) + p1 * (1.0 - p2) * p3 + (1.0 - p1) * p2 * p3;
    Ok((1.0 - p1) * (1.0 - p2) * (1.0 - p3) + (d + 2.0) * p1 * p2 * p3 / den + pairs / den)
}

/// `beta_alpha(<= delta || t1 + t2)`: the optimal test of two Poisson counts
/// depends only on their sum.
pub fn poisson_two_source(delta: f64, alpha: f64, t1: f64, t2: f64) -> Result<f64> {
    for (name, t) in [("t1", t1), ("t2", t2)] {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::OutOfRange { name, value: t, range: "[0, inf)" });
        }
    }
    beta_poisson(delta, alpha, t1 + t2)
}

/// `|GHZ>_{A1 A2 A3} (x) |GHZ-bar>_{B1 B2 B3}` in pair-major order.
pub fn ghz_seed(d: usize) -> Result<Ket> {
    check_triple_d(d)?;
    let mut ghz = CVector::zeros(d * d * d);
    let a = 1.0 / (d as f64).sqrt();
    for i in 0..d {
        ghz[i * d * d + i * d + i] = C64::new(a, 0.0);
    }
    let fa: Vec<Factor> = group_factors(d, 3)[..3].to_vec();
    let fb: Vec<Factor> = group_factors(d, 3)[3..].to_vec();
    let ua = Ket::new(ghz.clone(), fa)?;
    let ub = Ket::new(ghz.conjugate(), fb)?;
    permute_ket(&ua.tensor(&ub), &group_to_pair_perm(3))
}

/// Monte-Carlo twirl of `d^3 |GHZ (x) GHZ-bar><...|` over independent
/// `g1 (x) g2 (x) g3` acting on the three pairs.
pub fn ghz_twirl<R: RngCore + ?Sized>(d: usize, samples: usize, rng: &mut R) -> Result<TwirlEstimate> {
    let seed = ghz_seed(d)?;
    let action = GroupAction::independent(GroupKind::SUd, d, 3)?;
    mc_twirl_pure(&seed, (d * d * d) as f64, &action, samples, rng)
}
