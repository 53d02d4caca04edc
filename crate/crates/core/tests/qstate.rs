mod common;

use entbench_core::group::{act_sud, haar_special_unitary};
use entbench_core::qstate::*;
use entbench_core::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn factors(dims: &[usize]) -> Vec<Factor> {
    dims.iter().enumerate().map(|(i, &d)| Factor::new(format!("F{i}"), d)).collect()
}

#[test]
fn max_entangled_examples() {
    let k = max_entangled_ket(2).unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let want = [s, 0.0, 0.0, s];
    for (a, b) in k.amplitudes().iter().zip(want) {
        assert!((a.re - b).abs() < 1e-15 && a.im == 0.0);
    }
    for d in 2..=6 {
        let k = max_entangled_ket(d).unwrap();
        assert!((k.norm() - 1.0).abs() < 1e-12);
        let mixed = Operator::identity(bipartite_factors(d)).scale(1.0 / (d * d) as f64);
        let v = mixed.expectation(&k).unwrap().re;
        assert!((v - 1.0 / (d * d) as f64).abs() < 1e-15);
    }
    assert!(matches!(max_entangled_ket(1), Err(Error::InvalidDimension(_))));
}

#[test]
fn fidelity_defect_examples() {
    for d in 2..=4 {
        let phi = DensityMatrix::pure(&max_entangled_ket(d).unwrap());
        assert_eq!(fidelity_defect(&phi).unwrap(), 0.0);
        let mixed = DensityMatrix::new(Operator::identity(bipartite_factors(d)).scale(1.0 / (d * d) as f64)).unwrap();
        assert!((fidelity_defect(&mixed).unwrap() - (1.0 - 1.0 / (d * d) as f64)).abs() < 1e-15);
        assert!((fidelity_defect(&isotropic_state(d, 0.3).unwrap()).unwrap() - 0.3).abs() < 1e-15);
    }
    let wrong = DensityMatrix::new(Operator::identity(factors(&[2, 3])).scale(1.0 / 6.0)).unwrap();
    assert!(fidelity_defect(&wrong).is_err());
}

#[test]
fn isotropic_examples() {
    for d in 2..=4 {
        let p0 = isotropic_state(d, 0.0).unwrap();
        assert!(p0.op().max_abs_diff(&max_entangled_projector(d).unwrap()) < 1e-15);
        let d2 = (d * d) as f64;
        let mixed = isotropic_state(d, 1.0 - 1.0 / d2).unwrap();
        assert!(mixed.op().max_abs_diff(&Operator::identity(bipartite_factors(d)).scale(1.0 / d2)) < 1e-15);
        let p = 0.37;
        let e = isotropic_state(d, p).unwrap().op().eigenvalues();
        for x in &e[..d * d - 1] {
            assert!((x - p / (d2 - 1.0)).abs() < 1e-12);
        }
        assert!((e[d * d - 1] - (1.0 - p)).abs() < 1e-12);
    }
    assert!(isotropic_state(2, 1.5).is_err());
}

#[test]
fn tensor_convention() {
    let i2 = Operator::identity(factors(&[2]));
    assert!(i2.tensor(&i2).max_abs_diff(&Operator::identity(factors(&[2, 2]))) == 0.0);
    let k = Ket::basis(0, factors(&[2])).tensor(&Ket::basis(1, factors(&[2])));
    assert_eq!(k.amplitudes()[1], c64(1.0, 0.0));
    assert_eq!(k.factors().len(), 2);
    let (x, _) = generalized_pauli(3).unwrap();
    let id = Operator::identity(factors(&[3]));
    let b = bell_basis(3).unwrap();
    let moved = x.tensor(&id).apply(&b[0].clone().with_factors(factors(&[3, 3])).unwrap()).unwrap();
    let diff = (moved.amplitudes() - b[3].amplitudes()).norm();
    assert!(diff < 1e-12, "X (x) I phi00 should be phi10");
}

#[test]
fn permutation_examples() {
    let mut r = common::rng(2);
    let a = random_density(factors(&[2, 3, 2]), &mut r).into_op();
    assert!(permute_systems(&a, &[0, 1, 2]).unwrap().max_abs_diff(&a) == 0.0);
    let swapped = permute_systems(&a, &[2, 1, 0]).unwrap();
    assert!(permute_systems(&swapped, &[2, 1, 0]).unwrap().max_abs_diff(&a) == 0.0);
    for d in 2..=4 {
        let p = max_entangled_projector(d).unwrap();
        assert!(permute_systems(&p, &[1, 0]).unwrap().max_abs_diff(&p) < 1e-15);
    }
    assert!(matches!(permute_systems(&a, &[0, 0, 1]), Err(Error::InvalidPermutation(_))));
    // Permuting a product moves its factors.
    let x = random_density(factors(&[2]), &mut r);
    let y = random_density(factors(&[3]), &mut r);
    let xy = x.tensor(&y).into_op();
    let yx = y.tensor(&x).into_op();
    assert!(permute_systems(&xy, &[1, 0]).unwrap().max_abs_diff(&yx) < 1e-15);
    // Pair-major / group-major helpers are mutually inverse.
    for n in 1..=4 {
        let f = pair_to_group_perm(n);
        let g = group_to_pair_perm(n);
        for k in 0..2 * n {
            assert_eq!(f[g[k]], k);
        }
    }
}

#[test]
fn partial_trace_examples() {
    for d in 2..=4 {
        let p = max_entangled_projector(d).unwrap();
        let rb = partial_trace(&p, &[1]).unwrap();
        assert!(rb.max_abs_diff(&Operator::identity(factors(&[d])).scale(1.0 / d as f64)) < 1e-15);
    }
    let mut r = common::rng(3);
    let s1 = random_density(factors(&[3]), &mut r);
    let s2 = random_density(factors(&[2]), &mut r);
    let j = s1.tensor(&s2).into_op();
    assert!(partial_trace(&j, &[0]).unwrap().max_abs_diff(s1.op()) < 1e-12);
    assert!(partial_trace(&j, &[1]).unwrap().max_abs_diff(s2.op()) < 1e-12);
    assert!(matches!(partial_trace(&j, &[]), Err(Error::EmptyKeep)));
}

#[test]
fn pauli_examples() {
    let (x, z) = generalized_pauli(2).unwrap();
    let xm = DMatrix::from_row_slice(2, 2, &[c64(0.0, 0.0), c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0)]);
    let zm = DMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(-1.0, 0.0)]);
    assert!(max_abs_diff(x.entries(), &xm) < 1e-15);
    assert!(max_abs_diff(z.entries(), &zm) < 1e-15);
    for d in 2..=6 {
        let (x, z) = generalized_pauli(d).unwrap();
        let id = DMatrix::identity(d, d);
        assert!(max_abs_diff(&matrix_power(x.entries(), d), &id) < 1e-12);
        assert!(max_abs_diff(&matrix_power(z.entries(), d), &id) < 1e-12);
        assert!(max_abs_diff(&(x.entries() * x.adjoint().entries()), &id) < 1e-12);
        let w = C64::from_polar(1.0, std::f64::consts::TAU / d as f64);
        let zx = z.entries() * x.entries();
        let xz = (x.entries() * z.entries()).scale(1.0) * w;
        assert!(max_abs_diff(&zx, &xz) < 1e-12);
        for j in 0..d {
            let e = Ket::basis(j, factors(&[d]));
            let ze = z.apply(&e).unwrap();
            let phase = C64::from_polar(1.0, std::f64::consts::TAU * j as f64 / d as f64);
            assert!((ze.amplitudes()[j] - phase).norm() < 1e-12);
        }
    }
}

#[test]
fn bell_basis_properties() {
    for d in 2..=5 {
        let b = bell_basis(d).unwrap();
        assert_eq!(b.len(), d * d);
        assert!((b[0].amplitudes() - max_entangled_ket(d).unwrap().amplitudes()).norm() < 1e-15);
        let mut sum = DMatrix::zeros(d * d, d * d);
        for (i, u) in b.iter().enumerate() {
            for (j, v) in b.iter().enumerate() {
                let g = u.inner(v);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((g - c64(want, 0.0)).norm() < 1e-12);
            }
            sum += u.projector().entries();
        }
        assert!(max_abs_diff(&sum, &DMatrix::identity(d * d, d * d)) <= 1e-10);
    }
    // The four qubit Bell states.
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let b = bell_basis(2).unwrap();
    let want = [[s, 0.0, 0.0, s], [s, 0.0, 0.0, -s], [0.0, s, s, 0.0], [0.0, -s, s, 0.0]];
    for (k, w) in b.iter().zip(want) {
        for (a, x) in k.amplitudes().iter().zip(w) {
            assert!((a - c64(x, 0.0)).norm() < 1e-12, "{:?}", k.amplitudes());
        }
    }
}

#[test]
fn random_generators() {
    let mut r = common::rng(4);
    for _ in 0..20 {
        let s = random_density(factors(&[3, 3]), &mut r);
        assert!((s.op().trace().re - 1.0).abs() < 1e-12);
        assert!(DensityMatrix::new(s.op().clone()).is_ok());
        let t = random_test(factors(&[2, 2]), &mut r);
        assert!(TestOperator::new(t.op().clone()).is_ok());
    }
    let a = random_density(factors(&[4]), &mut common::rng(9));
    let b = random_density(factors(&[4]), &mut common::rng(9));
    assert_eq!(a, b);
    for d in 2..=3 {
        for p in [0.0, 0.2, 0.6, 1.0] {
            for coherent in [false, true] {
                let s = random_density_with_defect(d, p, coherent, &mut r).unwrap();
                assert!((fidelity_defect(&s).unwrap() - p).abs() < 1e-12);
            }
        }
    }
}

#[test]
fn validation_rejects_bad_inputs() {
    let f = factors(&[2]);
    let m = DMatrix::from_row_slice(2, 2, &[c64(1.0, 0.0), c64(1.0, 0.0), c64(0.0, 0.0), c64(0.0, 0.0)]);
    assert!(matches!(DensityMatrix::new(Operator::new(m, f.clone()).unwrap()), Err(Error::NotHermitian(_))));
    let m = DMatrix::from_row_slice(2, 2, &[c64(1.5, 0.0), c64(0.0, 0.0), c64(0.0, 0.0), c64(-0.5, 0.0)]);
    assert!(matches!(DensityMatrix::new(Operator::new(m.clone(), f.clone()).unwrap()), Err(Error::NotPositive(_))));
    assert!(matches!(TestOperator::new(Operator::new(m, f.clone()).unwrap()), Err(Error::NotATest(_, _))));
    assert!(Operator::new(DMatrix::identity(3, 3), f.clone()).is_err());
    let half = Ket::basis(0, f.clone());
    assert!(RankOnePovm::new(vec![(1.0, half)]).is_err());
    assert!(RankOnePovm::computational(3).elements().len() == 3);
}

#[test]
fn isotropic_is_invariant() {
    let mut r = common::rng(5);
    for d in 2..=3 {
        let s = isotropic_state(d, 0.4).unwrap();
        for _ in 0..100 {
            let g = haar_special_unitary(d, &mut r);
            let u = act_sud(&g).unwrap();
            let c = s.op().conjugate_by(u.entries()).unwrap();
            assert!(c.max_abs_diff(s.op()) <= 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn partial_trace_preserves_trace(seed in any::<u64>(), da in 2usize..4, db in 2usize..4) {
        let mut r = entbench_core::group::sample_rng(seed, 1);
        let f = factors(&[da, db]);
        let s = random_density(f, &mut r);
        for keep in [vec![0], vec![1]] {
            let t = partial_trace(s.op(), &keep).unwrap().trace();
            prop_assert!((t.re - 1.0).abs() < 1e-12 && t.im.abs() < 1e-12);
        }
    }

    #[test]
    fn tensor_then_trace_recovers(seed in any::<u64>()) {
        let mut r = entbench_core::group::sample_rng(seed, 2);
        let s1 = random_density(factors(&[2, 2]), &mut r);
        let s2 = random_density(factors(&[3]), &mut r);
        let j = s1.tensor(&s2);
        prop_assert!(partial_trace(j.op(), &[0, 1]).unwrap().max_abs_diff(s1.op()) <= 1e-12);
        prop_assert_eq!(j.dim(), 12);
        let total: usize = j.op().factors().iter().map(|f| f.dim).product();
        prop_assert_eq!(total, j.dim());
    }

    #[test]
    fn permute_is_unitary_conjugation(seed in any::<u64>()) {
        let mut r = entbench_core::group::sample_rng(seed, 3);
        let s = random_density(factors(&[2, 3, 2]), &mut r);
        let p = permute_systems(s.op(), &[1, 2, 0]).unwrap();
        let mut a = s.op().eigenvalues();
        let mut b = p.eigenvalues();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }
}
