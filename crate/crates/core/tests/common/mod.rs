#![allow(dead_code)]

use entbench_core::group::sample_rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(tag: u64) -> ChaCha8Rng {
    sample_rng(0x5eed_0000 + tag, 0)
}

/// Minimum of `sum_k T(k) P1(k)` over `T: support -> [0, 1]` with
/// `sum_k T(k) P0(k) >= 1 - alpha`, by enumerating LP vertices: every vertex
/// has at most one fractional coordinate.
pub fn lp_min_type2(p0: &[f64], p1: &[f64], alpha: f64) -> f64 {
    let m = p0.len();
    assert!(m <= 12, "vertex enumeration is exponential");
    let target = 1.0 - alpha;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << m) {
        let (a0, a1) = (0..m)
            .filter(|&k| mask >> k & 1 == 1)
            .fold((0.0, 0.0), |(x, y), k| (x + p0[k], y + p1[k]));
        if a0 >= target - 1e-13 {
            best = best.min(a1);
        }
        for j in (0..m).filter(|&j| mask >> j & 1 == 0) {
            if p0[j] <= 0.0 {
                continue;
            }
            let g = (target - a0) / p0[j];
            if (0.0..=1.0).contains(&g) {
                best = best.min(a1 + g * p1[j]);
            }
        }
    }
    best
}

/// Binomial pmf by the textbook product formula (small `n` only).
pub fn binom_vec(n: usize, p: f64) -> Vec<f64> {
    (0..=n)
        .map(|k| {
            let c = (0..k).fold(1.0, |c, i| c * (n - i) as f64 / (i + 1) as f64);
            c * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
        })
        .collect()
}
