//! Contracts for the exact Gaussian calculus: closed forms against
//! hand-derived values, metric axioms under random sampling, and the
//! dynamics identities the samplers rely on.

use langevin_core::analytics::{
    entropy_functional, free_energy_gap, heat_step, kl_divergence, pinsker_tv_bound, ula_law,
    ula_stationary, ula_transition, w2_distance, w2_squared, Empirical1d, GaussianLaw,
};
use langevin_core::model::Quadratic;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn law1(mean: f64, var: f64) -> GaussianLaw {
    GaussianLaw::isotropic(DVector::from_element(1, mean), var).unwrap()
}

fn random_law(dim: usize, seed: &mut u64) -> GaussianLaw {
    // splitmix64 keeps the strategy free of extra dependencies
    let mut next = || {
        *seed = seed.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = *seed;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        (z ^ (z >> 31)) as f64 / u64::MAX as f64
    };
    let mean = DVector::from_fn(dim, |_, _| 4.0 * next() - 2.0);
    let a = DMatrix::from_fn(dim, dim, |_, _| next() - 0.5);
    let cov = &a * a.transpose() + DMatrix::identity(dim, dim) * 0.05;
    GaussianLaw::new(mean, cov).unwrap()
}

#[test]
fn w2_between_scalar_gaussians_matches_closed_form() {
    // W₂²(N(m₁,σ₁²), N(m₂,σ₂²)) = (m₁−m₂)² + (σ₁−σ₂)²
    let a = law1(0.0, 1.0);
    let b = law1(2.0, 4.0);
    assert!((w2_squared(&a, &b) - 5.0).abs() < 1e-12);
    assert!((w2_distance(&a, &b) - 5.0_f64.sqrt()).abs() < 1e-12);
}

#[test]
fn kl_between_scalar_gaussians_matches_closed_form() {
    // KL(N(1,2) ‖ N(0,1)) = ln(1/√2) + (2+1)/2 − 1/2 = 1 − ½ln2
    let a = law1(1.0, 2.0);
    let b = law1(0.0, 1.0);
    let expect = 1.0 - 0.5 * 2.0_f64.ln();
    assert!((kl_divergence(&a, &b).unwrap() - expect).abs() < 1e-12);
}

#[test]
fn standard_gaussian_entropy_matches_closed_form() {
    // ℋ(N(0,I_d)) = −(d/2) ln(2πe)
    for d in [1usize, 3, 7] {
        let law = GaussianLaw::standard(d);
        let expect = -0.5 * d as f64 * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln();
        assert!((entropy_functional(&law) - expect).abs() < 1e-12);
    }
}

#[test]
fn kl_is_zero_only_on_the_diagonal() {
    let mut seed = 7u64;
    for _ in 0..50 {
        let a = random_law(3, &mut seed);
        let b = random_law(3, &mut seed);
        assert!(kl_divergence(&a, &a).unwrap() < 1e-12);
        assert!(kl_divergence(&a, &b).unwrap() > 0.0);
    }
}

#[test]
fn w2_satisfies_the_triangle_inequality() {
    let mut seed = 42u64;
    for dim in [1usize, 2, 5] {
        for _ in 0..1000 {
            let a = random_law(dim, &mut seed);
            let b = random_law(dim, &mut seed);
            let c = random_law(dim, &mut seed);
            let ab = w2_distance(&a, &b);
            let bc = w2_distance(&b, &c);
            let ac = w2_distance(&a, &c);
            assert!(ac <= ab + bc + 1e-8, "dim {dim}: {ac} > {ab} + {bc}");
        }
    }
}

#[test]
fn w2_is_symmetric_and_zero_at_identity() {
    let mut seed = 11u64;
    for _ in 0..200 {
        let a = random_law(4, &mut seed);
        let b = random_law(4, &mut seed);
        assert!((w2_squared(&a, &b) - w2_squared(&b, &a)).abs() < 1e-9);
        assert!(w2_squared(&a, &a).abs() < 1e-9);
    }
}

#[test]
fn free_energy_gap_is_kl_to_the_target() {
    // ℱ(μ) − ℱ(π) = KL(μ‖π) with π ∝ exp(−x'Hx/2); exact for Gaussians.
    let mut seed = 3u64;
    for dim in [1usize, 2, 4] {
        let h = Quadratic::new(DMatrix::from_fn(dim, dim, |i, j| {
            if i == j {
                1.0 + 0.5 * i as f64
            } else {
                0.0
            }
        }))
        .unwrap();
        let target = GaussianLaw::target_of(&h).unwrap();
        for _ in 0..50 {
            let mu = random_law(dim, &mut seed);
            let gap = free_energy_gap(&h, &mu).unwrap();
            let kl = kl_divergence(&mu, &target).unwrap();
            assert!((gap - kl).abs() < 1e-9, "dim {dim}: gap {gap} vs kl {kl}");
        }
    }
}

#[test]
fn heat_step_adds_twice_gamma_to_every_direction() {
    let law = GaussianLaw::standard(3);
    let heated = heat_step(0.25, &law);
    for i in 0..3 {
        assert!((heated.cov()[(i, i)] - 1.5).abs() < 1e-14);
    }
    assert_eq!(heated.mean(), law.mean());
}

#[test]
fn transition_law_matches_scalar_recursion() {
    // d = 1, h = 2: m ← (1−γh)m, c ← (1−γh)²c + 2γ
    let h = Quadratic::isotropic(1, 2.0).unwrap();
    let gamma = 0.3;
    let mut m = 1.5;
    let mut c = 0.7;
    let mut law = GaussianLaw::isotropic(DVector::from_element(1, m), c).unwrap();
    for _ in 0..25 {
        let a = 1.0 - gamma * 2.0;
        m *= a;
        c = a * a * c + 2.0 * gamma;
        law = ula_transition(&h, gamma, &law).unwrap();
        assert!((law.mean()[0] - m).abs() < 1e-12);
        assert!((law.cov()[(0, 0)] - c).abs() < 1e-12);
    }
}

#[test]
fn stationary_law_is_a_fixed_point_of_the_transition() {
    let h = Quadratic::new(DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 1.0, 4.0])))
        .unwrap();
    let gamma = 0.2;
    let pi_gamma = ula_stationary(&h, gamma).unwrap();
    let moved = ula_transition(&h, gamma, &pi_gamma).unwrap();
    assert!(w2_squared(&pi_gamma, &moved) < 1e-12);
    // per-eigendirection variance 2/(h(2−γh))
    for (i, hv) in [0.5, 1.0, 4.0].into_iter().enumerate() {
        let expect = 2.0 / (hv * (2.0 - gamma * hv));
        assert!((pi_gamma.cov()[(i, i)] - expect).abs() < 1e-12);
    }
}

#[test]
fn stationary_law_rejects_unstable_steps() {
    let h = Quadratic::isotropic(2, 4.0).unwrap();
    // stability needs γ < 2/λmax = 0.5
    assert!(ula_stationary(&h, 0.5).is_err());
    assert!(ula_stationary(&h, 0.499).is_ok());
}

#[test]
fn iterated_law_contracts_toward_the_biased_stationary_point() {
    let h = Quadratic::isotropic(2, 1.0).unwrap();
    let gamma = 0.1;
    let mu0 = GaussianLaw::point(DVector::from_vec(vec![3.0, -1.0]));
    let pi_gamma = ula_stationary(&h, gamma).unwrap();
    let d10 = w2_squared(&ula_law(&h, gamma, 10, &mu0).unwrap(), &pi_gamma);
    let d100 = w2_squared(&ula_law(&h, gamma, 100, &mu0).unwrap(), &pi_gamma);
    assert!(d100 < 1e-6 * d10);
}

#[test]
fn pinsker_bound_clamps_to_one() {
    assert_eq!(pinsker_tv_bound(0.0), 0.0);
    assert!((pinsker_tv_bound(0.02) - 0.2).abs() < 1e-15);
    assert_eq!(pinsker_tv_bound(10.0), 1.0);
}

#[test]
fn quantile_coupling_matches_hand_computed_w2() {
    // {0, 1} vs {0, 3} under uniform weights: couple 0→0, 1→3, W₂² = 2
    let a = Empirical1d::uniform(vec![1.0, 0.0]).unwrap();
    let b = Empirical1d::uniform(vec![0.0, 3.0]).unwrap();
    assert!((a.w2_squared_to(&b) - 2.0).abs() < 1e-12);
    assert_eq!(a.w2_squared_to(&a), 0.0);
}

#[test]
fn empirical_quantiles_interleave_weights() {
    let e = Empirical1d::new(vec![2.0, -1.0, 0.5], vec![1.0, 2.0, 1.0]).unwrap();
    // sorted support (−1, 0.5, 2) with weights (1/2, 1/4, 1/4)
    assert_eq!(e.quantile(0.25), -1.0);
    assert_eq!(e.quantile(0.6), 0.5);
    assert_eq!(e.quantile(0.9), 2.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scalar_w2_closed_form_survives_random_inputs(
        m1 in -5.0..5.0f64, m2 in -5.0..5.0f64,
        v1 in 0.01..4.0f64, v2 in 0.01..4.0f64,
    ) {
        let got = w2_squared(&law1(m1, v1), &law1(m2, v2));
        let expect = (m1 - m2).powi(2) + (v1.sqrt() - v2.sqrt()).powi(2);
        prop_assert!((got - expect).abs() < 1e-10);
    }

    #[test]
    fn empirical_w2_is_nonnegative_and_symmetric(
        xs in prop::collection::vec(-10.0..10.0f64, 1..40),
        ys in prop::collection::vec(-10.0..10.0f64, 1..40),
    ) {
        let a = Empirical1d::uniform(xs).unwrap();
        let b = Empirical1d::uniform(ys).unwrap();
        let ab = a.w2_squared_to(&b);
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - b.w2_squared_to(&a)).abs() < 1e-9 * (1.0 + ab));
    }
}
