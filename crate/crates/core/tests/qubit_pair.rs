mod common;

use entbench_core::group::*;
use entbench_core::qstate::*;
use entbench_core::quantum::{cov_1to2_trace, t2_inv};
use entbench_core::qubit_pair::*;
use proptest::prelude::*;
use rand::Rng;

fn sq(s: &DensityMatrix) -> DensityMatrix {
    let s = DensityMatrix::new(s.op().clone().with_factors(pair_factors(2, 1)).unwrap()).unwrap();
    DensityMatrix::new(s.tensor(&s).into_op().with_factors(pair_factors(2, 2)).unwrap()).unwrap()
}

fn low_defect<R: Rng>(r: &mut R) -> DensityMatrix {
    let p = r.random_range(0.0..=0.5);
    random_density_with_defect(2, p, r.random::<bool>(), r).unwrap()
}

fn rank(op: &Operator) -> usize {
    op.eigenvalues().iter().filter(|e| **e > 0.5).count()
}

#[test]
fn projectors_partition_identity() {
    let pr = irrep_projectors();
    let all = pr.all();
    let mut sum = Operator::zeros(pair_factors(2, 2));
    for (i, p) in all.iter().enumerate() {
        assert_eq!(rank(p), BLOCK_DIMS[i], "{}", BLOCK_NAMES[i]);
        assert!(p.mul(p).unwrap().max_abs_diff(p) < 1e-12);
        for q in &all[i + 1..] {
            assert!(p.mul(q).unwrap().entries().iter().all(|z| z.norm() < 1e-12));
        }
        sum = sum.add(p).unwrap();
    }
    assert!(sum.max_abs_diff(&Operator::identity(pair_factors(2, 2))) < 1e-10);
}

#[test]
fn block_decomposition_examples() {
    let phi = DensityMatrix::pure(&max_entangled_ket(2).unwrap());
    let b = bell_block(&phi).unwrap();
    assert!((b.a - 1.0).abs() < 1e-15 && b.b.norm() < 1e-15 && b.c.norm() < 1e-15);
    let b = bell_block(&isotropic_state(2, 0.3).unwrap()).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let want = if i == j { 0.1 } else { 0.0 };
            assert!((b.c[(i, j)] - c64(want, 0.0)).norm() < 1e-12);
        }
    }
    let b = bell_block(&bell_diagonal_state([0.4, 0.3, 0.2, 0.1]).unwrap()).unwrap();
    assert!(b.b.norm() < 1e-15);
    assert!((b.c[(0, 1)].norm() + b.c[(1, 2)].norm() + b.c[(0, 2)].norm()) < 1e-15);
    let mut r = common::rng(50);
    for _ in 0..50 {
        let s = random_density(bipartite_factors(2), &mut r);
        let b = bell_block(&s).unwrap();
        assert!((b.a + b.c.trace().re - 1.0).abs() < 1e-12);
        assert!((b.a - (1.0 - fidelity_defect(&s).unwrap())).abs() < 1e-12);
    }
}

#[test]
fn block_traces_match_projectors() {
    let pr = irrep_projectors();
    let phi = DensityMatrix::pure(&max_entangled_ket(2).unwrap());
    assert_eq!(block_traces(&phi).unwrap().map(|x| x.round()), [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
    let mut r = common::rng(51);
    let mut states = vec![isotropic_state(2, 0.3).unwrap()];
    states.extend((0..100).map(|_| random_density(bipartite_factors(2), &mut r)));
    for s in &states {
        let t = block_traces(s).unwrap();
        let s2 = sq(s);
        for (k, p) in pr.all().iter().enumerate() {
            assert!((t[k] - s2.expect(p).unwrap()).abs() < 1e-10, "{}", BLOCK_NAMES[k]);
        }
        assert!((t.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn u_op_reproduces_weights() {
    let u = u_op();
    assert!((u.norm() - 1.0).abs() < 1e-15);
    let w = seed_weights(&u).unwrap();
    for k in 0..6 {
        assert!((w[k] - OPT_WEIGHTS[k]).abs() < 1e-12, "{}: {}", BLOCK_NAMES[k], w[k]);
    }
}

#[test]
fn optimal_value_matches_effective_operator() {
    let t = effective_operator(&OPT_WEIGHTS);
    assert!(TestOperator::new(t.op().clone()).is_ok());
    let mut r = common::rng(52);
    for _ in 0..100 {
        let s = low_defect(&mut r);
        let f = beta_opt_2sample(&s).unwrap();
        assert!(f.condition);
        assert!((f.value - sq(&s).expect(t.op()).unwrap()).abs() < 1e-10);
        assert!((f.value - effective_trace(&OPT_WEIGHTS, &s).unwrap()).abs() < 1e-10);
        assert!(f.value <= t2_inv(2).unwrap().accept(&sq(&s)).unwrap() + 1e-12);
    }
    for c in [[0.1, 0.1, 0.1], [0.3, 0.1, 0.05], [0.0, 0.0, 0.5]] {
        let s = bell_diagonal_state([1.0 - c.iter().sum::<f64>(), c[0], c[1], c[2]]).unwrap();
        let v = beta_opt_2sample(&s).unwrap().value;
        assert!((v - sq(&s).expect(t.op()).unwrap()).abs() < 1e-10);
    }
    for p in [0.0, 0.2, 0.5] {
        let v = beta_opt_2sample(&isotropic_state(2, p).unwrap()).unwrap().value;
        assert!((v - ((1.0 - p).powi(2) + p * p / 3.0)).abs() < 1e-12);
    }
    assert!(!beta_opt_2sample(&isotropic_state(2, 0.6).unwrap()).unwrap().condition);
}

#[test]
fn two_step_forms_agree() {
    let t = effective_operator(&COV_1TO2_WEIGHTS);
    let mut r = common::rng(53);
    for _ in 0..100 {
        let s = random_density(bipartite_factors(2), &mut r);
        let v = beta_1to2(&s).unwrap();
        assert!((v - beta_1to2_expanded(&s).unwrap()).abs() < 1e-12);
        assert!((v - sq(&s).expect(t.op()).unwrap()).abs() < 1e-10);
    }
    assert!((beta_1to2(&DensityMatrix::pure(&max_entangled_ket(2).unwrap())).unwrap() - 1.0).abs() < 1e-12);
    for p in [0.1, 0.4] {
        let v = beta_1to2(&isotropic_state(2, p).unwrap()).unwrap();
        assert!((v - (1.0 - 2.0 * p / 3.0).powi(2)).abs() < 1e-12);
    }
}

#[test]
fn two_step_matches_monte_carlo() {
    let mut r = common::rng(54);
    for i in 0..4 {
        let s = low_defect(&mut r);
        let e = cov_1to2_trace(&s, 40_000, &mut common::rng(60 + i)).unwrap();
        assert!(e.within(beta_1to2(&s).unwrap(), 5.0), "{e:?}");
    }
}

#[test]
fn gain_vanishes_iff_v_constant() {
    let mut r = common::rng(55);
    for _ in 0..200 {
        let s = random_density(bipartite_factors(2), &mut r);
        let g = one_to_two_gain(&s).unwrap();
        assert!(g >= -1e-15);
        let v = bell_block(&s).unwrap().v;
        let m = v.trace() / 3.0;
        let spread = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| (v[(i, j)] - if i == j { m } else { 0.0 }).abs()).fold(0.0, f64::max);
        assert_eq!(g <= 1e-12, spread <= 1e-8);
        let p = fidelity_defect(&s).unwrap();
        assert!(beta_1to2(&s).unwrap() <= (1.0 - 2.0 * p / 3.0).powi(2) + 1e-12);
    }
    for p in [0.0, 0.3, 0.9] {
        assert!(one_to_two_gain(&isotropic_state(2, p).unwrap()).unwrap() <= 1e-12);
    }
    let s = bell_diagonal_state([0.6, 0.3, 0.1, 0.0]).unwrap();
    assert!(one_to_two_gain(&s).unwrap() > 1e-3);
}

#[test]
fn inequalities_hold_on_low_defect_states() {
    let mut r = common::rng(56);
    let mut violations = 0;
    for _ in 0..10_000 {
        let s = low_defect(&mut r);
        if !check_inequalities_o(&s).unwrap().holds().iter().all(|x| *x) {
            violations += 1;
        }
    }
    assert_eq!(violations, 0);
    assert!(check_inequalities_o(&isotropic_state(2, 0.4).unwrap()).unwrap().holds().iter().all(|x| *x));
}

#[test]
fn charge_action() {
    let pr = irrep_projectors();
    let charges = [0, 1, 2, 0, 0, 1];
    for theta in [0.3, 1.7, -2.2] {
        let u = u_theta(theta, 2).unwrap();
        let uu = u.entries().kronecker(u.entries());
        for (p, k) in pr.all().iter().zip(charges) {
            let lhs = &uu * p.entries();
            let rhs = p.entries() * C64::from_polar(1.0, k as f64 * theta);
            assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }
    }
}

#[test]
fn projectors_invariant_under_doubled_action() {
    let mut r = common::rng(57);
    let a = GroupAction::new(GroupKind::SUdxU1, 2, 2).unwrap();
    for p in irrep_projectors().all() {
        let t = TestOperator::new(p.clone()).unwrap();
        assert!(check_invariance(&t, &a, 20, 1e-10, &mut r).unwrap().invariant);
    }
}

#[test]
fn rejects_other_dimensions() {
    assert!(bell_block(&isotropic_state(3, 0.1).unwrap()).is_err());
    assert!(beta_opt_2sample(&isotropic_state(3, 0.1).unwrap()).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn bell_diagonal_closed_forms(w in proptest::array::uniform4(0.0f64..1.0)) {
        let s: f64 = w.iter().sum();
        prop_assume!(s > 1e-3);
        let st = bell_diagonal_state(w.map(|x| x / s)).unwrap();
        let v = beta_1to2(&st).unwrap();
        prop_assert!((v - beta_1to2_expanded(&st).unwrap()).abs() < 1e-12);
        let t = block_traces(&st).unwrap();
        prop_assert!(t.iter().all(|x| *x >= -1e-12));
    }
}
