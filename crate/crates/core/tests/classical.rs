mod common;

use common::{binom_vec, lp_min_type2};
use entbench_core::classical::*;
use proptest::prelude::*;

const EPS: [f64; 4] = [0.0, 0.05, 0.1, 0.3];
const ALPHA: [f64; 4] = [0.01, 0.05, 0.1, 0.25];

#[test]
fn pmf_sums_to_one() {
    for n in [1, 7, 50, 1000, 10_000] {
        for p in [0.0, 1e-4, 0.3, 0.5, 0.97, 1.0] {
            let s: f64 = binom_pmf_vec(n, p).iter().sum();
            assert!((s - 1.0).abs() < 1e-12, "n={n} p={p}: {s}");
        }
    }
    for t in [0.0, 0.5, 3.0, 40.0] {
        let s: f64 = (0..400).map(|k| poisson_pmf(t, k)).sum();
        assert!((s - 1.0).abs() < 1e-12, "t={t}: {s}");
    }
    assert_eq!(poisson_pmf(0.0, 0), 1.0);
}

#[test]
fn pmf_matches_product_formula() {
    for n in 0..=20 {
        for p in [0.01, 0.2, 0.5, 0.8] {
            for (k, want) in binom_vec(n, p).into_iter().enumerate() {
                assert!((binom_pmf(n, k, p) - want).abs() <= 1e-12 * want + 1e-300, "n={n} k={k} p={p}");
            }
        }
    }
}

#[test]
fn threshold_inequalities() {
    for n in 1..=30 {
        for eps in EPS {
            for alpha in ALPHA {
                let t = binomial_ump_test(n, eps, alpha).unwrap();
                let pmf = binom_pmf_vec(n, eps);
                let below: f64 = pmf[..t.l].iter().sum();
                assert!(below < 1.0 - alpha + 1e-14, "n={n} eps={eps} alpha={alpha}");
                assert!(below + pmf[t.l] >= 1.0 - alpha - 1e-14);
                assert!((0.0..=1.0).contains(&t.gamma) && t.l <= n);
                let size = t.accept_binomial(eps);
                assert!((size - (1.0 - alpha)).abs() <= 1e-12, "size {size}");
            }
        }
    }
}

#[test]
fn small_examples() {
    let t = binomial_ump_test(1, 0.0, 0.1).unwrap();
    assert_eq!(t.l, 0);
    assert!((t.gamma - 0.9).abs() < 1e-15);
    let t = binomial_ump_test(2, 0.5, 0.25).unwrap();
    assert_eq!((t.l, t.gamma), (1, 1.0));
    assert!((beta_one_sample(0.0, 0.05, 0.5).unwrap().value - 0.475).abs() < 1e-15);
    assert!((beta_one_sample(0.2, 0.1, 0.8).unwrap().value - 0.6).abs() < 1e-15);
    let f = beta_one_sample(0.3, 0.1, 0.2).unwrap();
    assert!(!f.condition);
}

#[test]
fn one_sample_matches_lp_and_binomial() {
    for eps in [0.0, 0.05, 0.2, 0.5] {
        for alpha in ALPHA {
            for q in [0.55, 0.6, 0.8, 1.0] {
                let v = beta_one_sample(eps, alpha, q).unwrap().value;
                let lp = lp_min_type2(&[1.0 - eps, eps], &[1.0 - q, q], alpha);
                assert!((v - lp).abs() < 1e-12, "eps={eps} alpha={alpha} q={q}: {v} vs {lp}");
                assert!((v - beta_binomial(1, eps, alpha, q).unwrap()).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn ump_equals_lp_optimum() {
    for n in 1..=8 {
        for eps in EPS {
            for alpha in ALPHA {
                for q in [0.05, 0.1, 0.2, 0.35, 0.5, 0.75, 0.95] {
                    if q <= eps {
                        continue;
                    }
                    let b = beta_binomial(n, eps, alpha, q).unwrap();
                    let lp = lp_min_type2(&binom_vec(n, eps), &binom_vec(n, q), alpha);
                    assert!((b - lp).abs() < 1e-9, "n={n} eps={eps} alpha={alpha} q={q}: {b} vs {lp}");
                }
            }
        }
    }
}

#[test]
fn ge_direction_matches_lp_and_mirror() {
    for n in 1..=8 {
        for eps in [0.3, 0.5, 0.9] {
            for alpha in ALPHA {
                let t = binomial_ump_test_ge(n, eps, alpha).unwrap();
                assert!((t.accept_binomial(eps) - (1.0 - alpha)).abs() < 1e-12);
                for q in [0.05, 0.1, 0.2] {
                    let b = beta_binomial_ge(n, eps, alpha, q).unwrap();
                    let lp = lp_min_type2(&binom_vec(n, eps), &binom_vec(n, q), alpha);
                    assert!((b - lp).abs() < 1e-9);
                    let m = beta_binomial(n, 1.0 - eps, alpha, 1.0 - q).unwrap();
                    assert!((b - m).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn level_holds_over_null() {
    for n in [1, 5, 20] {
        for eps in [0.05, 0.1, 0.3] {
            let t = binomial_ump_test(n, eps, 0.05).unwrap();
            for i in 0..100 {
                let p = eps * i as f64 / 99.0;
                assert!(t.accept_binomial(p) >= 0.95 - 1e-12);
            }
        }
    }
}

#[test]
fn neyman_pearson_is_most_powerful() {
    let mut r = common::rng(1);
    use rand::Rng;
    for _ in 0..200 {
        let m = r.random_range(2..8);
        let mut p0: Vec<f64> = (0..m).map(|_| r.random::<f64>()).collect();
        let mut p1: Vec<f64> = (0..m).map(|_| r.random::<f64>()).collect();
        let (s0, s1): (f64, f64) = (p0.iter().sum(), p1.iter().sum());
        p0.iter_mut().for_each(|x| *x /= s0);
        p1.iter_mut().for_each(|x| *x /= s1);
        let alpha = r.random_range(0.01..0.5);
        let t = neyman_pearson(&p0, &p1, alpha).unwrap();
        assert!((t.accept_prob_under(&p0) - (1.0 - alpha)).abs() < 1e-12);
        let lp = lp_min_type2(&p0, &p1, alpha);
        assert!((t.accept_prob_under(&p1) - lp).abs() < 1e-10);
        // Rejection under P0 is at most rejection under P1.
        assert!(alpha <= 1.0 - t.accept_prob_under(&p1) + 1e-12);
    }
    let p = [0.2, 0.3, 0.5];
    let t = neyman_pearson(&p, &p, 0.1).unwrap();
    assert!((t.accept_prob_under(&p) - 0.9).abs() < 1e-12);
}

#[test]
fn neyman_pearson_reproduces_binomial() {
    for n in [3, 6] {
        let (p0, p1) = (binom_pmf_vec(n, 0.1), binom_pmf_vec(n, 0.4));
        let np = neyman_pearson(&p0, &p1, 0.05).unwrap();
        let t = binomial_ump_test(n, 0.1, 0.05).unwrap();
        for k in 0..=n {
            assert!((np.accept[k] - t.accept_prob(k)).abs() < 1e-12);
        }
    }
}

#[test]
fn poisson_values() {
    for t in [0.5, 1.0, 3.0] {
        let b = beta_poisson(0.0, 0.05, t).unwrap();
        assert!((b - 0.95 * (-t).exp()).abs() < 1e-14);
    }
    assert!((beta_poisson(1.0, 0.05, 1.0).unwrap() - 0.95).abs() < 1e-12);
    // Series oracle: direct recursion for the pmf.
    let test = poisson_ump_test(1.0, 0.05).unwrap();
    let mut pk = (-3.0f64).exp();
    let mut acc = 0.0;
    for k in 0..1_000_000usize {
        if k > 0 {
            pk *= 3.0 / k as f64;
        }
        acc += pk * test.accept_prob(k);
        if pk == 0.0 && k > 50 {
            break;
        }
    }
    assert!((acc - beta_poisson(1.0, 0.05, 3.0).unwrap()).abs() < 1e-12);
}

#[test]
fn relative_entropy_values() {
    assert_eq!(relative_entropy(0.2, 0.2), 0.0);
    assert!((relative_entropy(0.0, 0.3) + 0.7f64.ln()).abs() < 1e-15);
    let want = 0.05 * (0.05f64 / 0.3).ln() + 0.95 * (0.95f64 / 0.7).ln();
    assert!((relative_entropy(0.05, 0.3) - want).abs() < 1e-15);
}

#[test]
fn poisson_gap_trend() {
    let g: Vec<f64> = [100, 1000, 10_000].iter().map(|&n| poisson_limit_gap(n, 1.0, 3.0, 0.05).unwrap()).collect();
    assert!(g[2] < g[0]);
    assert!(g[2] < 1e-2);
    assert!(poisson_limit_gap(500, 1.0, 1.0, 0.05).unwrap() < 1e-12);
}

proptest! {
    #[test]
    fn beta_decreasing_in_q(n in 1usize..40, eps in 0.0f64..0.5, alpha in 0.01f64..0.5, q1 in 0.0f64..1.0, q2 in 0.0f64..1.0) {
        let (lo, hi) = if q1 < q2 { (q1, q2) } else { (q2, q1) };
        let a = beta_binomial(n, eps, alpha, lo).unwrap();
        let b = beta_binomial(n, eps, alpha, hi).unwrap();
        prop_assert!(b <= a + 1e-12);
        prop_assert!((0.0..=1.0 + 1e-12).contains(&a));
    }

    #[test]
    fn size_is_exact(n in 1usize..200, eps in 0.0f64..0.9, alpha in 0.001f64..0.9) {
        let b = beta_binomial(n, eps, alpha, eps).unwrap();
        prop_assert!((b - (1.0 - alpha)).abs() <= 1e-12);
    }

    #[test]
    fn likelihood_ratio_monotone(n in 2usize..60, eps in 0.01f64..0.45, dq in 0.01f64..0.5) {
        let q = (eps + dq).min(0.99);
        let r: Vec<f64> = (0..=n).map(|k| binom_pmf(n, k, eps) / binom_pmf(n, k, q)).collect();
        for w in r.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-10));
        }
    }
}
