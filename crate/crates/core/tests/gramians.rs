use impulsive_control::control::control_inner;
use impulsive_control::controllability::{
    controllability_report, kalman_span_test, positivity_test, CheckOptions, Verdict, DEFAULT_RANK_TOL,
};
use impulsive_control::gramian::{apply_m, apply_m_star, gramian_set};
use impulsive_control::linalg::{asymmetry, symmetric_eigenvalues};
use impulsive_control::quadrature::QuadratureConfig;
use impulsive_control::system::{GeneratorSpec, ImpulsiveSystem, SystemDefinition};
use impulsive_control::Matrix;
use impulsive_testkit as kit;
use proptest::prelude::*;

#[test]
fn m_m_star_acts_like_the_summed_gramian() {
    let q = QuadratureConfig::default();
    let mut rng = kit::rng(77);
    for _ in 0..30 {
        let sys = kit::random_system(&mut rng, 6, 4);
        let phi = kit::random_vector(&mut rng, sys.n());
        let w = gramian_set(&sys, &q).unwrap().total;
        let wphi = &w * &phi;
        let action = apply_m(&sys, &q, &apply_m_star(&sys, &phi).unwrap()).unwrap();
        assert!((action - &wphi).norm() <= 1e-8 * wphi.norm());
    }
}

#[test]
fn doubling_quadrature_nodes_leaves_gramians_unchanged() {
    let coarse = QuadratureConfig::default();
    let fine = QuadratureConfig::new(2 * coarse.nodes_per_subinterval()).unwrap();
    let mut rng = kit::rng(5);
    for _ in 0..10 {
        let sys = kit::random_system(&mut rng, 6, 3);
        let a = gramian_set(&sys, &coarse).unwrap().total;
        let b = gramian_set(&sys, &fine).unwrap().total;
        assert!((&a - &b).norm() <= 1e-10 * b.norm().max(1e-300));
    }
}

fn no_impulse_system(a: Matrix, b: Matrix) -> ImpulsiveSystem {
    ImpulsiveSystem::new(SystemDefinition { generator: GeneratorSpec::Dense(a), b, horizon: 1.0, stages: vec![] })
        .unwrap()
}

#[test]
fn kalman_rank_agrees_with_gramian_positivity() {
    let q = QuadratureConfig::default();
    let mut rng = kit::rng(6);
    for trial in 0..40 {
        let n = 1 + trial % 6;
        let m = 1 + trial % 2;
        let (a, b) = if trial % 4 == 0 && n > 1 {
            kit::rank_deficient_pair(&mut rng, n, m, n - 1)
        } else {
            (kit::random_matrix(&mut rng, n, n, 1.0), kit::random_matrix(&mut rng, n, m, 1.0))
        };
        let rank = kalman_span_test(&a, &b, DEFAULT_RANK_TOL).unwrap();
        let sys = no_impulse_system(a, b);
        let (_, positive) = positivity_test(&gramian_set(&sys, &q).unwrap().total, DEFAULT_RANK_TOL).unwrap();
        assert_eq!(positive, rank == n, "trial {trial}: rank {rank} of {n}");
    }
}

#[test]
fn constructed_uncontrollable_systems_are_flagged() {
    let q = QuadratureConfig::default();
    let mut rng = kit::rng(8);
    for _ in 0..8 {
        let n = 2 + rng_usize(&mut rng, 4);
        let (sys, hidden) = kit::random_uncontrollable_system(&mut rng, n, 1, 2);
        let r = controllability_report(&sys, &q, &CheckOptions::default()).unwrap();
        assert_eq!(r.verdict, Verdict::NotControllable);
        let w = &r.gramians.total;
        assert!((w * &hidden).norm() <= 1e-10 * w.norm());
    }
}

fn rng_usize(rng: &mut kit::TestRng, bound: usize) -> usize {
    use rand::Rng;
    rng.random_range(0..bound)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn m_and_m_star_are_adjoint(seed in any::<u64>()) {
        let q = QuadratureConfig::default();
        let mut rng = kit::rng(seed);
        let sys = kit::random_system(&mut rng, 6, 4);
        let w = kit::random_control(&mut rng, &sys, 3);
        let phi = kit::random_vector(&mut rng, sys.n());
        let lhs = apply_m(&sys, &q, &w).unwrap().dot(&phi);
        let rhs = control_inner(&sys, &q, &w, &apply_m_star(&sys, &phi).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + lhs.abs()));
    }

    #[test]
    fn gramians_are_symmetric_psd(seed in any::<u64>()) {
        let q = QuadratureConfig::default();
        let mut rng = kit::rng(seed);
        let sys = kit::random_system(&mut rng, 6, 4);
        let set = gramian_set(&sys, &q).unwrap();
        for (name, g) in set.named().into_iter().chain([("total", &set.total)]) {
            prop_assert_eq!(asymmetry(g), 0.0, "{} not symmetric", name);
            let eig = symmetric_eigenvalues(g);
            let scale = eig.last().copied().unwrap_or(0.0).abs().max(1.0);
            prop_assert!(eig[0] >= -1e-12 * scale, "{} has eigenvalue {}", name, eig[0]);
        }
    }

    #[test]
    fn any_positive_gramian_makes_the_sum_positive(seed in any::<u64>()) {
        let q = QuadratureConfig::default();
        let mut rng = kit::rng(seed);
        let sys = kit::random_system(&mut rng, 4, 2);
        let r = controllability_report(&sys, &q, &CheckOptions::default()).unwrap();
        if r.single_gramian_positive {
            prop_assert!(r.w_positive);
            prop_assert_eq!(r.verdict, Verdict::Controllable);
        }
    }
}
