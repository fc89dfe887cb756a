//! Seeded invariants of the algebra, cochain and stabilizer layers.

use std::sync::Arc;

use amnm::diagonal::library_diagonal;
use amnm::harness::{generate_instance, RunConfig};
use amnm::multilinear::{
    check_map, coboundary, defect, linear_map_norm, product_cochain, Budget, Cochain, LinearMap,
};
use amnm::rng::StreamRng;
use amnm::stabilizer::{improve, left_modular_residual, stabilize};
use amnm::{Algebra, NormMode};
use proptest::prelude::*;

type A = Arc<Algebra<f64>>;

fn library(which: u8) -> A {
    match which % 7 {
        0 => Algebra::full_matrix(2).unwrap(),
        1 => Algebra::full_matrix(3).unwrap(),
        2 => Algebra::commutative(3).unwrap(),
        3 => Algebra::direct_sum(&Algebra::full_matrix(2).unwrap(), &Algebra::commutative(1).unwrap()).unwrap(),
        4 => Algebra::commutative(2).unwrap().unitize().unwrap(),
        5 => Algebra::full_matrix(2).unwrap().with_norm_mode(NormMode::Frobenius).unwrap(),
        _ => Algebra::full_matrix(2).unwrap().opposite(),
    }
}

fn random_map(a: &A, b: &A, seed: u64, scale: f64) -> LinearMap<f64> {
    let mut rng = StreamRng::new(seed, 1);
    let m = rng.complex_matrix::<f64>(b.dim(), a.dim()) * nalgebra::Complex::new(scale, 0.0);
    LinearMap::new(a.clone(), b.clone(), m).unwrap()
}

fn budget(seed: u64) -> Budget {
    Budget { restarts: 4, sweeps: 60, seed }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn library_algebras_are_associative(which in any::<u8>()) {
        let a = library(which);
        prop_assert!(a.associativity_residual() < 1e-12);
        prop_assert!(a.submultiplicativity_gap(16, which as u64) <= 1e-9);
    }

    #[test]
    fn defect_is_a_two_cocycle(x in any::<u8>(), y in any::<u8>(), seed in any::<u64>()) {
        let (a, b) = (library(x), library(y));
        let phi = random_map(&a, &b, seed, 1.0);
        let chk = check_map(&phi).unwrap();
        let r = coboundary(&phi, &chk).unwrap();
        prop_assert!(r.max_abs() <= 1e-10 * chk.max_abs().max(1.0));
    }

    #[test]
    fn defect_of_a_sum_linearizes(x in any::<u8>(), y in any::<u8>(), seed in any::<u64>(), s in 0.01f64..1.0) {
        let (a, b) = (library(x), library(y));
        let phi = random_map(&a, &b, seed, 1.0);
        let gamma = random_map(&a, &b, seed ^ 0x55, s);
        let lhs = check_map(&phi.add(&gamma).unwrap()).unwrap();
        let rhs = check_map(&phi)
            .unwrap()
            .sub(&coboundary(&phi, &Cochain::from_linear_map(&gamma)).unwrap())
            .unwrap()
            .sub(&product_cochain(&gamma).unwrap())
            .unwrap();
        prop_assert!(lhs.relative_distance(&rhs).unwrap() <= 1e-10);
    }

    #[test]
    fn norm_intervals_are_ordered(x in any::<u8>(), seed in any::<u64>()) {
        let a = library(x);
        let phi = random_map(&a, &a, seed, 0.5);
        let n = linear_map_norm(&phi, budget(seed)).unwrap();
        let d = defect(&phi, None, None, budget(seed)).unwrap();
        prop_assert!(0.0 <= n.lower && n.lower <= n.upper);
        prop_assert!(0.0 <= d.lower && d.lower <= d.upper);
        // witnesses lie in the unit ball
        prop_assert!(n.witness.iter().all(|w| a.norm_of(w) <= 1.0 + 1e-9));
    }

    #[test]
    fn scaling_a_map_scales_its_norm(x in any::<u8>(), seed in any::<u64>(), t in 0.1f64..4.0) {
        let a = library(x);
        let phi = random_map(&a, &a, seed, 1.0);
        let n1 = linear_map_norm(&phi, budget(seed)).unwrap();
        let nt = linear_map_norm(&phi.scale(nalgebra::Complex::new(t, 0.0)), budget(seed)).unwrap();
        prop_assert!((nt.upper - t * n1.upper).abs() <= 1e-9 * nt.upper.max(1.0));
        prop_assert!(nt.lower <= t * n1.upper * (1.0 + 1e-9));
    }

    #[test]
    fn library_diagonals_are_exact(which in any::<u8>()) {
        let cert = library_diagonal(&library(which)).unwrap();
        prop_assert!(cert.valid);
        prop_assert!(cert.pi_residual <= 1e-12 && cert.commutation_residual <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn instances_are_reproducible(seed in any::<u64>(), index in 0u64..50) {
        let cfg = RunConfig::with_seed(seed);
        let (p, q) = (generate_instance::<f64>(&cfg, index).unwrap(), generate_instance::<f64>(&cfg, index).unwrap());
        prop_assert_eq!(p.phi.matrix(), q.phi.matrix());
        prop_assert!((p.gamma_norm.lo - cfg.gamma_norm).abs() <= 1e-12);
    }

    #[test]
    fn improvement_keeps_the_unit_and_shrinks_the_left_defect(seed in any::<u64>()) {
        let inst = generate_instance::<f64>(&RunConfig::with_seed(seed), 0).unwrap();
        let next = improve(&inst.phi, &inst.d, &inst.cert).unwrap();
        let before = left_modular_residual(&inst.phi, &inst.d).unwrap();
        prop_assert!(left_modular_residual(&next, &inst.d).unwrap() <= 0.1 * before);
        let one = inst.a.unit_coords().unwrap();
        let image = next.apply(one) - inst.phi.apply(one);
        prop_assert!(image.norm() <= 1e-10);
    }

    #[test]
    fn small_perturbations_stabilize(seed in any::<u64>()) {
        let cfg = RunConfig::with_seed(seed);
        let inst = generate_instance::<f64>(&cfg, 0).unwrap();
        let report = stabilize(&inst.phi, &inst.d, &inst.cert, &cfg.stabilize_config(0)).unwrap();
        prop_assert!(report.converged && report.self_modular);
        prop_assert!(report.claims_ok() && report.distance_ok);
    }
}

#[test]
fn exact_homomorphisms_have_no_defect() {
    let mut cfg = RunConfig::with_seed(3);
    cfg.gamma_norm = 0.0;
    cfg.dims.m = 2;
    let inst = generate_instance::<f64>(&cfg, 0).unwrap();
    assert_eq!(inst.phi.matrix(), inst.hom.matrix());
    let d = defect(&inst.phi, None, None, budget(1)).unwrap();
    assert!(d.upper <= 1e-12, "{}", d.upper);
}

#[test]
fn single_precision_follows_double() {
    let cfg = RunConfig::with_seed(21);
    let wide = generate_instance::<f64>(&cfg, 0).unwrap();
    let narrow = generate_instance::<f32>(&cfg, 0).unwrap();
    let dw = defect(&wide.phi, Some(&wide.d), None, budget(5)).unwrap();
    let dn = defect(&narrow.phi, Some(&narrow.d), None, budget(5)).unwrap();
    assert!((dw.upper - dn.upper as f64).abs() <= 1e-3 * dw.upper.max(1e-3), "{} vs {}", dw.upper, dn.upper);
}
