//! Contracts for the chains: long-run moments against the exact biased
//! stationary law, scheme coincidences on degenerate inputs, checkpoint and
//! weighting bookkeeping, determinism, and the Metropolis reference.

use langevin_core::analytics::ula_stationary;
use langevin_core::harness::reference_estimates;
use langevin_core::model::{CompositePotential, L1Term, LogisticModel, Quadratic, SmoothPotential};
use langevin_core::oracles::{MinibatchOracle, OracleMode, RngStream};
use langevin_core::samplers::{
    run_chain, tune_prox_mala, Functional, RunConfig, SamplerKind,
};
use langevin_core::schedules::StepPlan;
use nalgebra::{DMatrix, DVector};
use std::sync::Arc;

fn scalar_quadratic(h: f64) -> Arc<CompositePotential> {
    Arc::new(CompositePotential::smooth(Arc::new(Quadratic::isotropic(1, h).unwrap())))
}

fn base_config(kind: SamplerKind, gamma: f64, iters: usize, dim: usize) -> RunConfig {
    burned_config(kind, gamma, 0, iters, dim)
}

fn burned_config(
    kind: SamplerKind,
    gamma: f64,
    burn_in: usize,
    iters: usize,
    dim: usize,
) -> RunConfig {
    let plan = StepPlan::constant(gamma).unwrap().with_burn_in(burn_in);
    let mut cfg = RunConfig::new(kind, plan, iters, 0x10ad, DVector::zeros(dim));
    cfg.functionals = vec![Functional::first_coordinate(), Functional::mean_square()];
    cfg
}

#[test]
fn plain_chain_time_average_matches_the_biased_stationary_moment() {
    // fixed-step chain on U = x²/2 equilibrates to variance 2/(2 − γ), not 1
    let p = scalar_quadratic(1.0);
    let gamma = 0.1;
    let cfg = burned_config(SamplerKind::Ula, gamma, 2_000, 1_000_000, 1);
    let out = run_chain(&cfg, p.clone(), None).unwrap();
    let h = Quadratic::isotropic(1, 1.0).unwrap();
    let expect = ula_stationary(&h, gamma).unwrap().cov()[(0, 0)];
    assert!((expect - 2.0 / 1.9).abs() < 1e-15);
    let got = out.estimates.iter().find(|e| e.name == "mean_square").unwrap().estimate;
    // asymptotic se of the x² average is ≈ 4.6e−3 at this length
    assert!((got - expect).abs() < 0.015, "time average {got} vs exact {expect}");
    let mean = out.estimates.iter().find(|e| e.name == "first_coordinate").unwrap().estimate;
    assert!(mean.abs() < 0.02);
}

#[test]
fn stochastic_schemes_replay_the_plain_chain_when_noise_sources_vanish() {
    // full-batch proximal scheme with no nonsmooth term, and the subgradient
    // scheme on a smooth target, must both reproduce the plain chain bit for
    // bit on a constant plan
    let p = scalar_quadratic(2.0);
    let ula = run_chain(&base_config(SamplerKind::Ula, 0.2, 500, 1), p.clone(), None).unwrap();
    let spgld = run_chain(&base_config(SamplerKind::Spgld, 0.2, 500, 1), p.clone(), None).unwrap();
    let ssgld = run_chain(&base_config(SamplerKind::Ssgld, 0.2, 500, 1), p.clone(), None).unwrap();
    assert_eq!(ula.state.x, spgld.state.x);
    assert_eq!(ula.state.x, ssgld.state.x);
    for (a, b) in ula.estimates.iter().zip(&spgld.estimates) {
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits(), "{}", a.name);
    }
    for (a, b) in ula.estimates.iter().zip(&ssgld.estimates) {
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits(), "{}", a.name);
    }
}

#[test]
fn proximal_chain_shrinks_toward_the_sparse_mode() {
    // Laplace-heavy composite target: the proximal chain must spend most of
    // its mass near 0 while the plain scheme refuses composite targets
    let smooth = Arc::new(Quadratic::isotropic(1, 1.0).unwrap());
    let l1 = Arc::new(L1Term::new(1, 3.0).unwrap());
    let p = Arc::new(CompositePotential::composite(smooth, l1).unwrap());
    let out = run_chain(&base_config(SamplerKind::Spgld, 0.05, 20_000, 1), p.clone(), None)
        .unwrap();
    let m2 = out.estimates.iter().find(|e| e.name == "mean_square").unwrap().estimate;
    assert!(m2 < 0.5, "second moment {m2} too large for a₁ = 3");
    assert!(run_chain(&base_config(SamplerKind::Ula, 0.05, 10, 1), p, None).is_err());
}

#[test]
fn checkpoints_snapshot_the_running_weighted_average() {
    let p = scalar_quadratic(1.0);
    let mut cfg = burned_config(SamplerKind::Ula, 0.3, 2, 18, 1);
    cfg.thin = Some(1);
    cfg.checkpoints = vec![5, 10, 20];
    let out = run_chain(&cfg, p, None).unwrap();
    assert_eq!(out.checkpoints.len(), 3);
    // recompute each snapshot from the full trace; constant plan, λ = γ
    for cp in &out.checkpoints {
        let xs: Vec<f64> = out
            .trace
            .iter()
            .filter(|(k, _)| *k > 2 && *k <= cp.k)
            .map(|(_, x)| x[0])
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let est = cp.estimates.iter().find(|e| e.name == "first_coordinate").unwrap();
        assert!((est.estimate - mean).abs() < 1e-12, "checkpoint {}", cp.k);
        assert!((est.weight_total - 0.3 * xs.len() as f64).abs() < 1e-12);
    }
    let last = &out.checkpoints[2];
    assert_eq!(last.k, 20);
    for (a, b) in last.estimates.iter().zip(&out.estimates) {
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
    }
}

#[test]
fn effective_passes_count_minibatch_work_fractionally() {
    let mut rng = RngStream::new(3, 3);
    let x = DMatrix::from_fn(10, 2, |_, _| rng.standard_normal());
    let y = DVector::from_fn(10, |i, _| (i % 2) as f64);
    let model = Arc::new(LogisticModel::new(x, y, 0.0, 0.5).unwrap());
    let p = Arc::new(CompositePotential::smooth(model.clone() as Arc<dyn SmoothPotential>));
    let oracle = Arc::new(MinibatchOracle::new(model, 2, OracleMode::SmoothPart).unwrap());
    let cfg = base_config(SamplerKind::Spgld, 0.01, 50, 2);
    let out = run_chain(&cfg, p, Some(oracle)).unwrap();
    assert!((out.effective_passes - 10.0).abs() < 1e-12);
}

#[test]
fn full_batch_runs_count_whole_passes() {
    let p = scalar_quadratic(1.0);
    let out = run_chain(&base_config(SamplerKind::Ula, 0.1, 40, 1), p, None).unwrap();
    assert_eq!(out.effective_passes, 40.0);
    assert_eq!(out.accept_rate, None);
}

#[test]
fn reruns_are_bit_identical_and_streams_decouple() {
    let p = scalar_quadratic(1.0);
    let a = run_chain(&base_config(SamplerKind::Ula, 0.1, 300, 1), p.clone(), None).unwrap();
    let b = run_chain(&base_config(SamplerKind::Ula, 0.1, 300, 1), p.clone(), None).unwrap();
    assert_eq!(a.state.x, b.state.x);
    let mut cfg = base_config(SamplerKind::Ula, 0.1, 300, 1);
    cfg.stream = 7;
    let c = run_chain(&cfg, p, None).unwrap();
    assert_ne!(a.state.x, c.state.x);
}

#[test]
fn misconfigured_runs_are_refused() {
    let p = scalar_quadratic(1.0);
    // plain scheme takes no oracle
    let model = {
        let mut rng = RngStream::new(4, 4);
        let x = DMatrix::from_fn(4, 1, |_, _| rng.standard_normal());
        Arc::new(LogisticModel::new(x, DVector::from_vec(vec![0.0, 1.0, 0.0, 1.0]), 0.0, 0.1).unwrap())
    };
    let oracle = Arc::new(MinibatchOracle::new(model, 2, OracleMode::SmoothPart).unwrap());
    assert!(run_chain(&base_config(SamplerKind::Ula, 0.1, 10, 1), p.clone(), Some(oracle)).is_err());
    // checkpoints must land past the burn-in
    let mut cfg = burned_config(SamplerKind::Ula, 0.1, 5, 10, 1);
    cfg.checkpoints = vec![3];
    assert!(run_chain(&cfg, p.clone(), None).is_err());
    // the plain scheme enforces γ ≤ 1/L
    assert!(run_chain(&base_config(SamplerKind::Ula, 1.5, 10, 1), p.clone(), None).is_err());
    // zero-length windows are meaningless
    assert!(run_chain(&base_config(SamplerKind::Ula, 0.1, 0, 1), p, None).is_err());
}

#[test]
fn increasing_plans_run_but_carry_a_warning() {
    let p = scalar_quadratic(1.0);
    let plan = StepPlan::piecewise(0.05, 5, 0.2).unwrap();
    let mut cfg = RunConfig::new(SamplerKind::Ula, plan, 20, 1, DVector::zeros(1));
    cfg.functionals = vec![Functional::mean_square()];
    let out = run_chain(&cfg, p, None).unwrap();
    assert!(!out.warnings.is_empty());
}

#[test]
fn acceptance_tuning_settles_in_the_target_band() {
    let p = Arc::new(CompositePotential::smooth(Arc::new(
        Quadratic::isotropic(3, 2.0).unwrap(),
    )));
    let (gamma, warm, rate) = tune_prox_mala(&p, &DVector::zeros(3), 0.5, 11, 0).unwrap();
    assert!(gamma > 0.0);
    assert!((0.45..=0.55).contains(&rate), "rate {rate}");
    assert!(warm.iter().all(|v| v.is_finite()));
}

#[test]
fn metropolis_chain_recovers_the_exact_target_variance() {
    // the adjusted chain has no step-size bias: E‖x‖²/d = 1/h exactly
    let p = scalar_quadratic(1.0);
    let (gamma, warm, _) = tune_prox_mala(&p, &DVector::zeros(1), 1.0, 5, 0).unwrap();
    let plan = StepPlan::constant(gamma).unwrap().with_burn_in(5_000);
    let mut cfg = RunConfig::new(SamplerKind::ProxMala, plan, 400_000, 5, warm);
    cfg.stream = 1;
    cfg.functionals = vec![Functional::mean_square()];
    let out = run_chain(&cfg, p, None).unwrap();
    let m2 = out.estimates[0].estimate;
    assert!((m2 - 1.0).abs() < 0.03, "long-run second moment {m2}");
    let rate = out.accept_rate.unwrap();
    assert!((0.35..=0.65).contains(&rate), "acceptance drifted to {rate}");
}

#[test]
fn batch_means_error_shrinks_with_the_reference_budget() {
    let p = Arc::new(CompositePotential::smooth(Arc::new(
        Quadratic::isotropic(2, 1.0).unwrap(),
    )));
    let small = reference_estimates(&p, 100_000, 0xcafe).unwrap();
    let large = reference_estimates(&p, 400_000, 0xcafe).unwrap();
    for (a, b) in [(small.se1, large.se1), (small.se2, large.se2)] {
        assert!(a > 0.0 && b > 0.0);
        // quadrupling the budget should roughly halve the error bar
        let ratio = b / a;
        assert!(ratio < 0.85, "se ratio {ratio} did not shrink");
    }
    assert!((large.i2 - 1.0).abs() < 3.0 * large.se2 + 0.02);
}
