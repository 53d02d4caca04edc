//! Uniformly most powerful randomized tests for binomial and Poisson data.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{check_range, Error, Flagged, Result};

/// Cumulative sums within this distance of `1 - alpha` count as equal.
const TIE_TOL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    /// Null hypothesis `p <= boundary`; small counts are accepted.
    Le,
    /// Null hypothesis `p >= boundary`; large counts are accepted.
    Ge,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSpec {
    pub direction: Direction,
    pub boundary: f64,
    pub alpha: f64,
}

impl HypothesisSpec {
    pub fn new(direction: Direction, boundary: f64, alpha: f64) -> Result<Self> {
        if !(boundary >= 0.0 && boundary.is_finite()) {
            return Err(Error::OutOfRange { name: "boundary", value: boundary, range: "[0, inf)" });
        }
        check_alpha(alpha)?;
        Ok(HypothesisSpec { direction, boundary, alpha })
    }
}

/// Threshold-form randomized test. For [`Direction::Le`] counts `k < l` are
/// accepted, `k = l` with probability `gamma`, larger counts rejected; for
/// [`Direction::Ge`] the roles of small and large counts swap.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassicalRandomizedTest {
    /// Sample count, `None` for the Poisson domain.
    pub n: Option<usize>,
    pub l: usize,
    pub gamma: f64,
    pub direction: Direction,
}

impl ClassicalRandomizedTest {
    /// Acceptance probability for the observed count `k`.
    pub fn accept_prob(&self, k: usize) -> f64 {
        use std::cmp::Ordering::*;
        match (self.direction, k.cmp(&self.l)) {
            (_, Equal) => self.gamma,
            (Direction::Le, Less) | (Direction::Ge, Greater) => 1.0,
            _ => 0.0,
        }
    }

    /// Acceptance probability when the count is `Binomial(n, q)`.
    pub fn accept_binomial(&self, q: f64) -> f64 {
        let n = self.n.expect("binomial test");
        let pmf = binom_pmf_vec(n, q);
        pmf.iter().enumerate().map(|(k, p)| p * self.accept_prob(k)).sum()
    }

    /// Acceptance probability when the count is `Poisson(t)`.
    pub fn accept_poisson(&self, t: f64) -> f64 {
        match self.direction {
            Direction::Le => {
                (0..self.l).map(|k| poisson_pmf(t, k)).sum::<f64>() + self.gamma * poisson_pmf(t, self.l)
            }
            Direction::Ge => {
                let below: f64 = (0..self.l).map(|k| poisson_pmf(t, k)).sum();
                (1.0 - below - poisson_pmf(t, self.l)).max(0.0) + self.gamma * poisson_pmf(t, self.l)
            }
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfRange { name: "alpha", value: alpha, range: "(0, 1)" })
    }
}

/// `C(n,k) (1-p)^(n-k) p^k`, evaluated with Loader's saddle-point
/// expansion so that it keeps full relative precision for large `n`.
pub fn binom_pmf(n: usize, k: usize, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    let q = 1.0 - p;
    let nf = n as f64;
    if k == 0 {
        return (nf * (-p).ln_1p()).exp();
    }
    if k == n {
        return (nf * p.ln()).exp();
    }
    let x = k as f64;
    let lc = stirlerr(nf) - stirlerr(x) - stirlerr(nf - x) - bd0(x, nf * p) - bd0(nf - x, nf * q);
    let lf = (2.0 * PI).ln() + x.ln() + (-x / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

pub fn binom_pmf_vec(n: usize, p: f64) -> Vec<f64> {
    (0..=n).map(|k| binom_pmf(n, k, p)).collect()
}

/// `e^{-t} t^k / k!`.
pub fn poisson_pmf(t: f64, k: usize) -> f64 {
    if t <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if k == 0 {
        return (-t).exp();
    }
    let x = k as f64;
    (-stirlerr(x) - bd0(x, t)).exp() / (2.0 * PI * x).sqrt()
}

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)` for integer `n >= 0`.
fn stirlerr(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        if n == 0.0 {
            return 0.0;
        }
        let ln_fact: f64 = (2..=n as usize).map(|k| (k as f64).ln()).sum();
        return ln_fact - (n + 0.5) * n.ln() + n - 0.5 * (2.0 * PI).ln();
    }
    let nn = n * n;
    if n > 500.0 {
        return (S0 - S1 / nn) / n;
    }
    if n > 80.0 {
        return (S0 - (S1 - S2 / nn) / nn) / n;
    }
    if n > 35.0 {
        return (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n;
    }
    (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
}

/// Deviance term `x ln(x/np) + np - x`, computed without cancellation near `x = np`.
fn bd0(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / (2 * j + 1) as f64;
            if s1 == s {
                return s1;
            }
            s = s1;
        }
        return s;
    }
    x * (x / np).ln() + np - x
}

/// Threshold `(l, gamma)` from a pmf listed in acceptance order:
/// `sum_{k<l} < 1 - alpha <= sum_{k<=l}`, `gamma P(l) = 1 - alpha - sum_{k<l}`.
fn threshold<I: Iterator<Item = f64>>(pmf: I, alpha: f64) -> Option<(usize, f64)> {
    let target = 1.0 - alpha;
    let mut cum = 0.0;
    for (k, p) in pmf.enumerate() {
        if cum + p >= target - TIE_TOL && p > 0.0 {
            let gamma = ((target - cum) / p).clamp(0.0, 1.0);
            return Some((k, gamma));
        }
        cum += p;
    }
    None
}

/// Level-alpha UMP test of `p <= eps` from `n` Bernoulli trials.
pub fn binomial_ump_test(n: usize, eps: f64, alpha: f64) -> Result<ClassicalRandomizedTest> {
    check_range("epsilon", eps, 0.0, 1.0, "[0, 1]")?;
    check_alpha(alpha)?;
    let (l, gamma) = threshold((0..=n).map(|k| binom_pmf(n, k, eps)), alpha)
        .expect("pmf sums to one");
    Ok(ClassicalRandomizedTest { n: Some(n), l, gamma, direction: Direction::Le })
}

/// Level-alpha UMP test of `p >= eps`: accepts large counts.
pub fn binomial_ump_test_ge(n: usize, eps: f64, alpha: f64) -> Result<ClassicalRandomizedTest> {
    check_range("epsilon", eps, 0.0, 1.0, "[0, 1]")?;
    check_alpha(alpha)?;
    let (j, gamma) = threshold((0..=n).rev().map(|k| binom_pmf(n, k, eps)), alpha)
        .expect("pmf sums to one");
    Ok(ClassicalRandomizedTest { n: Some(n), l: n - j, gamma, direction: Direction::Ge })
}

/// Minimal type-2 error `P^n_q(T)` of the level-alpha test of `p <= eps`.
pub fn beta_binomial(n: usize, eps: f64, alpha: f64, q: f64) -> Result<f64> {
    check_range("q", q, 0.0, 1.0, "[0, 1]")?;
    let t = binomial_ump_test(n, eps, alpha)?;
    let below: f64 = (0..t.l).map(|k| binom_pmf(n, k, q)).sum();
    Ok(below + t.gamma * binom_pmf(n, t.l, q))
}

/// Minimal type-2 error of the level-alpha test of `p >= eps`.
pub fn beta_binomial_ge(n: usize, eps: f64, alpha: f64, q: f64) -> Result<f64> {
    check_range("q", q, 0.0, 1.0, "[0, 1]")?;
    let t = binomial_ump_test_ge(n, eps, alpha)?;
    let above: f64 = (t.l + 1..=n).map(|k| binom_pmf(n, k, q)).sum();
    Ok(above + t.gamma * binom_pmf(n, t.l, q))
}

/// One-sample value: `(1-alpha)(1-q)/(1-eps)` if `eps <= alpha`, else
/// `1 - alpha q / eps`. The flag is false when `q <= eps`.
pub fn beta_one_sample(eps: f64, alpha: f64, q: f64) -> Result<Flagged> {
    check_range("epsilon", eps, 0.0, 1.0, "[0, 1]")?;
    check_range("q", q, 0.0, 1.0, "[0, 1]")?;
    check_alpha(alpha)?;
    let v = if eps <= alpha { (1.0 - alpha) * (1.0 - q) / (1.0 - eps) } else { 1.0 - alpha * q / eps };
    Ok(Flagged::new(v, q > eps))
}

/// Level-alpha UMP test of `t <= delta` for a Poisson count.
pub fn poisson_ump_test(delta: f64, alpha: f64) -> Result<ClassicalRandomizedTest> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::OutOfRange { name: "delta", value: delta, range: "[0, inf)" });
    }
    check_alpha(alpha)?;
    let pmf = (0..).map(|k| poisson_pmf(delta, k));
    let (l, gamma) = threshold(pmf, alpha).expect("pmf sums to one");
    Ok(ClassicalRandomizedTest { n: None, l, gamma, direction: Direction::Le })
}

/// `beta_alpha(<= delta || t)`.
pub fn beta_poisson(delta: f64, alpha: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::OutOfRange { name: "t", value: t, range: "[0, inf)" });
    }
    Ok(poisson_ump_test(delta, alpha)?.accept_poisson(t))
}

/// Most powerful level-alpha randomized test of `P0` against `P1`.
#[derive(Clone, Debug, PartialEq)]
pub struct NeymanPearsonTest {
    /// Acceptance probability (of the null) per support point.
    pub accept: Vec<f64>,
    /// Likelihood-ratio threshold `P0/P1` at the randomized level.
    pub threshold: f64,
}

impl NeymanPearsonTest {
    pub fn accept_prob_under(&self, pmf: &[f64]) -> f64 {
        self.accept.iter().zip(pmf).map(|(a, p)| a * p).sum()
    }
}

/// Accepts points in decreasing order of `P0(x)/P1(x)`; the level set at the
/// threshold shares one randomization so that the size is exactly `alpha`.
pub fn neyman_pearson(p0: &[f64], p1: &[f64], alpha: f64) -> Result<NeymanPearsonTest> {
    check_alpha(alpha)?;
    if p0.len() != p1.len() || p0.is_empty() {
        return Err(Error::DimensionMismatch { expected: p0.len(), found: p1.len() });
    }
    let ratio = |i: usize| -> f64 {
        if p1[i] > 0.0 {
            p0[i] / p1[i]
        } else if p0[i] > 0.0 {
            f64::INFINITY
        } else {
            -1.0
        }
    };
    let mut order: Vec<usize> = (0..p0.len()).collect();
    order.sort_by(|&a, &b| ratio(b).total_cmp(&ratio(a)));
    let same = |a: f64, b: f64| a == b || (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let target = 1.0 - alpha;
    let mut accept = vec![0.0; p0.len()];
    let mut cum = 0.0;
    let mut i = 0;
    let mut thr = f64::INFINITY;
    while i < order.len() {
        let r = ratio(order[i]);
        let mut j = i;
        let mut mass = 0.0;
        while j < order.len() && same(ratio(order[j]), r) {
            mass += p0[order[j]];
            j += 1;
        }
        if mass > 0.0 && cum + mass >= target - TIE_TOL {
            let g = ((target - cum) / mass).clamp(0.0, 1.0);
            for &x in &order[i..j] {
                accept[x] = g;
            }
            thr = r;
            break;
        }
        for &x in &order[i..j] {
            accept[x] = 1.0;
        }
        cum += mass;
        i = j;
    }
    Ok(NeymanPearsonTest { accept, threshold: thr })
}

/// Binary relative entropy `d(eps || p)` in nats, with `0 log 0 = 0`.
pub fn relative_entropy(eps: f64, p: f64) -> f64 {
    let term = |a: f64, b: f64| -> f64 {
        if a == 0.0 {
            0.0
        } else if b == 0.0 {
            f64::INFINITY
        } else {
            a * (a / b).ln()
        }
    };
    term(eps, p) + term(1.0 - eps, 1.0 - p)
}

/// Limit of `-(1/n) log beta^n_alpha(<= eps || p)`: `d(eps || p)` for
/// `alpha > 0`; with `alpha = 0` it is `-log(1-p)` at `eps = 0` and zero otherwise.
pub fn exponent(eps: f64, p: f64, alpha: f64) -> f64 {
    if alpha > 0.0 {
        relative_entropy(eps, p)
    } else if eps == 0.0 {
        -(1.0 - p).ln()
    } else {
        0.0
    }
}

/// `|beta^n_alpha(<= delta/n || t/n) - beta_alpha(<= delta || t)|`.
pub fn poisson_limit_gap(n: usize, delta: f64, t: f64, alpha: f64) -> Result<f64> {
    let nf = n as f64;
    let b = beta_binomial(n, delta / nf, alpha, t / nf)?;
    Ok((b - beta_poisson(delta, alpha, t)?).abs())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pmf_examples() {
        let v = binom_pmf_vec(2, 0.5);
        for (a, b) in v.iter().zip([0.25, 0.5, 0.25]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(poisson_pmf(0.0, 0), 1.0);
        for &(n, p) in &[(10usize, 0.3), (1000, 0.05), (10_000, 3e-4)] {
            let s: f64 = binom_pmf_vec(n, p).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "n={n} sum={s}");
        }
        let s: f64 = (0..200).map(|k| poisson_pmf(3.0, k)).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn likelihood_ratio_is_monotone() {
        let n = 20;
        let (e, q) = (0.1, 0.4);
        let r: Vec<f64> = (0..=n).map(|k| binom_pmf(n, k, e) / binom_pmf(n, k, q)).collect();
        assert!(r.windows(2).all(|w| w[1] < w[0]));
    }

    #[test]
    fn ump_examples() {
        let t = binomial_ump_test(1, 0.0, 0.1).unwrap();
        assert_eq!(t.l, 0);
        assert!((t.gamma - 0.9).abs() < 1e-15);
        let t = binomial_ump_test(2, 0.5, 0.25).unwrap();
        assert_eq!((t.l, t.gamma), (1, 1.0));
    }

    #[test]
    fn one_sample_examples() {
        let b = beta_one_sample(0.0, 0.05, 0.5).unwrap();
        assert!((b.value - 0.475).abs() < 1e-15 && b.condition);
        let b = beta_one_sample(0.2, 0.1, 0.8).unwrap();
        assert!((b.value - 0.6).abs() < 1e-15);
        let a = beta_one_sample(0.1, 0.1, 0.3).unwrap().value;
        assert!((a - 0.7).abs() < 1e-14);
        assert!(!beta_one_sample(0.3, 0.1, 0.2).unwrap().condition);
        for &(e, a, q) in &[(0.0, 0.05, 0.5), (0.2, 0.1, 0.8), (0.05, 0.25, 0.6)] {
            let b1 = beta_binomial(1, e, a, q).unwrap();
            assert!((b1 - beta_one_sample(e, a, q).unwrap().value).abs() < 1e-12);
        }
    }

    #[test]
    fn poisson_examples() {
        let b = beta_poisson(0.0, 0.05, 3.0).unwrap();
        assert!((b - 0.95 * (-3.0f64).exp()).abs() < 1e-15);
        assert!((beta_poisson(1.0, 0.05, 1.0).unwrap() - 0.95).abs() < 1e-12);
        let t = poisson_ump_test(1.0, 0.05).unwrap();
        assert_eq!(t.l, 3);
        // Direct series with factorials built up term by term.
        let mut term = (-3.0f64).exp();
        let mut s = 0.0;
        for k in 0..t.l {
            s += term;
            term *= 3.0 / (k + 1) as f64;
        }
        s += t.gamma * term;
        assert!((beta_poisson(1.0, 0.05, 3.0).unwrap() - s).abs() < 1e-12);
    }

    #[test]
    fn np_degenerate_and_binomial() {
        let p = binom_pmf_vec(6, 0.3);
        let t = neyman_pearson(&p, &p, 0.1).unwrap();
        assert!((t.accept_prob_under(&p) - 0.9).abs() < 1e-12);
        let (n, e, a, q) = (8, 0.1, 0.05, 0.35);
        let np = neyman_pearson(&binom_pmf_vec(n, e), &binom_pmf_vec(n, q), a).unwrap();
        let ump = binomial_ump_test(n, e, a).unwrap();
        for k in 0..=n {
            assert!((np.accept[k] - ump.accept_prob(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn relative_entropy_limits() {
        assert_eq!(relative_entropy(0.2, 0.2), 0.0);
        assert!((relative_entropy(0.0, 0.3) + 0.7f64.ln()).abs() < 1e-15);
        assert!((exponent(0.0, 0.3, 0.0) + 0.7f64.ln()).abs() < 1e-15);
        assert_eq!(exponent(0.1, 0.3, 0.0), 0.0);
    }

    #[test]
    fn ge_mirror() {
        for &(n, e, a, q) in &[(7usize, 0.6, 0.1, 0.3), (5, 0.9, 0.05, 0.5), (8, 0.5, 0.25, 0.2)] {
            let ge = beta_binomial_ge(n, e, a, q).unwrap();
            let le = beta_binomial(n, 1.0 - e, a, 1.0 - q).unwrap();
            assert!((ge - le).abs() < 1e-12);
            assert!((beta_binomial_ge(n, e, a, e).unwrap() - (1.0 - a)).abs() < 1e-12);
        }
    }

    #[test]
    fn gap_shrinks() {
        let g2 = poisson_limit_gap(100, 1.0, 3.0, 0.05).unwrap();
        let g4 = poisson_limit_gap(10_000, 1.0, 3.0, 0.05).unwrap();
        assert!(g4 < g2);
        assert!(poisson_limit_gap(50, 1.0, 1.0, 0.05).unwrap() < 1e-12);
    }
}
