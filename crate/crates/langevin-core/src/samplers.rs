//! Chain execution: the three Langevin schemes and a proximal MALA reference.
//!
//! All three unadjusted schemes funnel through one drift-plus-diffusion
//! helper so that coinciding parameterizations produce bit-identical
//! trajectories (in particular, the proximal scheme with no nonsmooth term
//! and a full-batch oracle is step-for-step the plain scheme). Estimates of
//! averaged-law expectations are weighted running sums over the averaging
//! window, never materialized mixtures.

use std::sync::Arc;

use nalgebra::DVector;

use crate::model::CompositePotential;
use crate::oracles::{FullGradient, FullSubgradient, GradientEstimator, RngStream};
use crate::schedules::{PlanVariant, StepPlan};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplerKind {
    Ula,
    Ssgld,
    Spgld,
    ProxMala,
}

impl SamplerKind {
    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Ula => "ula",
            SamplerKind::Ssgld => "ssgld",
            SamplerKind::Spgld => "spgld",
            SamplerKind::ProxMala => "prox-mala",
        }
    }
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ula" => Ok(SamplerKind::Ula),
            "ssgld" => Ok(SamplerKind::Ssgld),
            "spgld" => Ok(SamplerKind::Spgld),
            "prox-mala" | "prox_mala" | "proxmala" => Ok(SamplerKind::ProxMala),
            other => Err(Error::invalid(format!(
                "unknown sampler `{other}` (expected ula, ssgld, spgld, or prox-mala)"
            ))),
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A scalar test functional with a stable name for reports.
#[derive(Clone)]
pub struct Functional {
    name: String,
    f: Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
}

impl Functional {
    pub fn new(name: impl Into<String>, f: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static) -> Self {
        Functional { name: name.into(), f: Arc::new(f) }
    }

    /// x ↦ x₁
    pub fn first_coordinate() -> Self {
        Functional::new("first_coordinate", |x: &DVector<f64>| x[0])
    }

    /// x ↦ d⁻¹ Σ xᵢ²
    pub fn mean_square() -> Self {
        Functional::new("mean_square", |x: &DVector<f64>| x.norm_squared() / x.len() as f64)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        (self.f)(x)
    }
}

impl std::fmt::Debug for Functional {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Functional").field("name", &self.name).finish()
    }
}

#[derive(Clone, Debug)]
pub struct ChainState {
    pub k: usize,
    pub x: DVector<f64>,
    pub rng: RngStream,
    /// Λ over the consumed part of the averaging window.
    pub weight_total: f64,
    /// Σ λ_k f_i(X_k), one slot per registered functional.
    pub weighted_sums: Vec<f64>,
    pub effective_passes: f64,
}

impl ChainState {
    pub fn new(x: DVector<f64>, rng: RngStream, functionals: usize) -> Self {
        ChainState {
            k: 0,
            x,
            rng,
            weight_total: 0.0,
            weighted_sums: vec![0.0; functionals],
            effective_passes: 0.0,
        }
    }
}

/// x − γ_drift · drift + √(2 γ_noise) · G. Single code path shared by every
/// unadjusted step so equal inputs give equal outputs bit for bit.
pub(crate) fn drift_diffuse(
    x: &DVector<f64>,
    drift: &DVector<f64>,
    gamma_drift: f64,
    gamma_noise: f64,
    rng: &mut RngStream,
) -> DVector<f64> {
    let scale = (2.0 * gamma_noise).sqrt();
    let g = rng.normal_vector(x.len());
    x - drift * gamma_drift + g * scale
}

/// One plain transition: x′ = x − γ∇U(x) + √(2γ) G.
pub fn ula_step(p: &CompositePotential, state: &mut ChainState, gamma: f64) -> Result<()> {
    if p.nonsmooth_part().is_some() {
        return Err(Error::invalid(
            "the plain scheme needs a smooth potential; use the proximal scheme for composite targets",
        ));
    }
    let max = if p.smoothness() > 0.0 { 1.0 / p.smoothness() } else { f64::INFINITY };
    if !(gamma > 0.0 && gamma <= max) {
        return Err(Error::StepSize { gamma, max });
    }
    let drift = p.smooth_grad(&state.x);
    state.x = drift_diffuse(&state.x, &drift, gamma, gamma, &mut state.rng);
    state.k += 1;
    Ok(())
}

/// One subgradient transition with the recursion's index offset:
/// x′ = x − γ_drift Θ(x, Z) + √(2 γ_noise) G.
pub fn ssgld_step(
    oracle: &dyn GradientEstimator,
    state: &mut ChainState,
    gamma_drift: f64,
    gamma_noise: f64,
) -> Result<()> {
    if gamma_drift <= 0.0 || gamma_noise <= 0.0 {
        return Err(Error::invalid("step sizes must be positive"));
    }
    let drift = oracle.draw(&state.x, &mut state.rng);
    state.x = drift_diffuse(&state.x, &drift, gamma_drift, gamma_noise, &mut state.rng);
    state.k += 1;
    Ok(())
}

/// One proximal-gradient transition: y = prox_{γ_prox}(x), then
/// x′ = y − γ_grad Θ̃₁(y, Z) + √(2 γ_grad) G. With no nonsmooth term the prox
/// is the identity and this is exactly the subgradient step on the smooth
/// part.
pub fn spgld_step(
    p: &CompositePotential,
    oracle: &dyn GradientEstimator,
    state: &mut ChainState,
    gamma_prox: f64,
    gamma_grad: f64,
) -> Result<()> {
    if gamma_prox <= 0.0 || gamma_grad <= 0.0 {
        return Err(Error::invalid("step sizes must be positive"));
    }
    let y = p.prox(gamma_prox, &state.x);
    let drift = oracle.draw(&y, &mut state.rng);
    state.x = drift_diffuse(&y, &drift, gamma_grad, gamma_grad, &mut state.rng);
    state.k += 1;
    Ok(())
}

/// One Metropolis-adjusted proximal step. Proposal mean is the
/// prox-then-gradient point, proposal covariance 2γI; the accept ratio uses
/// the exact composite potential, so e^{-U} is invariant by construction.
/// Returns whether the proposal was accepted. Consumes the same amount of
/// randomness on both branches.
pub fn prox_mala_step(p: &CompositePotential, state: &mut ChainState, gamma: f64) -> Result<bool> {
    if gamma <= 0.0 {
        return Err(Error::invalid("step size must be positive"));
    }
    let forward_mean = {
        let y = p.prox(gamma, &state.x);
        &y - p.smooth_grad(&y) * gamma
    };
    let noise = state.rng.normal_vector(state.x.len());
    let proposal = &forward_mean + noise * (2.0 * gamma).sqrt();
    let reverse_mean = {
        let y = p.prox(gamma, &proposal);
        &y - p.smooth_grad(&y) * gamma
    };
    let log_ratio = p.value(&state.x) - p.value(&proposal)
        + ((&state.x - reverse_mean).norm_squared() - (&proposal - forward_mean).norm_squared())
            / (-4.0 * gamma);
    let u = state.rng.uniform();
    let accept = log_ratio >= 0.0 || u < log_ratio.exp();
    if accept {
        state.x = proposal;
    }
    state.k += 1;
    Ok(accept)
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub kind: SamplerKind,
    pub plan: StepPlan,
    /// length n of the averaging window; the plan's burn-in N precedes it.
    pub iterations: usize,
    pub seed: u64,
    pub stream: u64,
    pub x0: DVector<f64>,
    pub functionals: Vec<Functional>,
    /// store every thin-th iterate in the trace; None stores nothing
    pub thin: Option<usize>,
    /// absolute iteration indices (all past burn-in) at which running
    /// estimates are snapshotted
    pub checkpoints: Vec<usize>,
}

impl RunConfig {
    pub fn new(kind: SamplerKind, plan: StepPlan, iterations: usize, seed: u64, x0: DVector<f64>) -> Self {
        RunConfig {
            kind,
            plan,
            iterations,
            seed,
            stream: 0,
            x0,
            functionals: Vec::new(),
            thin: None,
            checkpoints: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionalEstimate {
    pub name: String,
    pub estimate: f64,
    pub weight_total: f64,
}

#[derive(Clone, Debug)]
pub struct CheckpointEstimates {
    pub k: usize,
    pub estimates: Vec<FunctionalEstimate>,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub state: ChainState,
    pub estimates: Vec<FunctionalEstimate>,
    pub effective_passes: f64,
    pub trace: Vec<(usize, DVector<f64>)>,
    pub accept_rate: Option<f64>,
    pub checkpoints: Vec<CheckpointEstimates>,
    pub warnings: Vec<String>,
}

fn snapshot(state: &ChainState, functionals: &[Functional]) -> Vec<FunctionalEstimate> {
    functionals
        .iter()
        .enumerate()
        .map(|(i, f)| FunctionalEstimate {
            name: f.name().to_string(),
            estimate: state.weighted_sums[i] / state.weight_total,
            weight_total: state.weight_total,
        })
        .collect()
}

/// Run one chain to completion. Deterministic given (seed, stream, config).
/// Estimates are Λ⁻¹ Σ λ_k f(X_k) over k = N+1 .. N+n.
pub fn run_chain(
    config: &RunConfig,
    p: Arc<CompositePotential>,
    oracle: Option<Arc<dyn GradientEstimator>>,
) -> Result<RunOutput> {
    if config.iterations == 0 {
        return Err(Error::invalid("iterations must be >= 1"));
    }
    crate::check_dim(p.dim(), config.x0.len())?;
    let burn_in = config.plan.burn_in();
    if let Some(bad) = config.checkpoints.iter().find(|k| **k <= burn_in) {
        return Err(Error::invalid(format!(
            "checkpoint {bad} falls inside the burn-in window (N = {burn_in})"
        )));
    }

    let oracle: Option<Arc<dyn GradientEstimator>> = match (config.kind, oracle) {
        (SamplerKind::Ula | SamplerKind::ProxMala, Some(_)) => {
            return Err(Error::invalid(format!(
                "{} does not take a gradient oracle",
                config.kind
            )));
        }
        (SamplerKind::Ula | SamplerKind::ProxMala, None) => None,
        (SamplerKind::Ssgld, oracle) => {
            Some(oracle.unwrap_or_else(|| Arc::new(FullSubgradient(p.clone()))))
        }
        (SamplerKind::Spgld, oracle) => {
            Some(oracle.unwrap_or_else(|| Arc::new(FullGradient(p.smooth_part().clone()))))
        }
    };
    if let Some(o) = &oracle {
        crate::check_dim(p.dim(), o.dim())?;
    }

    let mut warnings = Vec::new();
    let horizon = burn_in + config.iterations + 2;
    if !config.plan.is_non_increasing(horizon) {
        warnings.push("step or weight sequence increases somewhere over the run".to_string());
    }
    let variant = match config.kind {
        SamplerKind::Ula => Some(PlanVariant::Ula),
        SamplerKind::Ssgld | SamplerKind::Spgld => Some(PlanVariant::StochasticGradient),
        SamplerKind::ProxMala => None,
    };
    if let Some(v) = variant {
        if !config.plan.admissible(p.strong_convexity(), v, horizon) {
            warnings.push("plan fails the weight-transfer inequality for this scheme".to_string());
        }
    }

    let rng = RngStream::new(config.seed, config.stream);
    let mut state = ChainState::new(config.x0.clone(), rng, config.functionals.len());
    let mut trace = Vec::new();
    let mut checkpoints = Vec::new();
    let mut accepted = 0usize;
    let total = burn_in + config.iterations;

    for k in 1..=total {
        let gamma = config.plan.gamma(k);
        match config.kind {
            SamplerKind::Ula => ula_step(&p, &mut state, gamma)?,
            SamplerKind::Ssgld => {
                let o = oracle.as_deref().expect("oracle resolved above");
                ssgld_step(o, &mut state, gamma, config.plan.gamma(k + 1))?;
                state.effective_passes += o.pass_fraction() - 1.0;
            }
            SamplerKind::Spgld => {
                let o = oracle.as_deref().expect("oracle resolved above");
                spgld_step(&p, o, &mut state, gamma, config.plan.gamma(k + 1))?;
                state.effective_passes += o.pass_fraction() - 1.0;
            }
            SamplerKind::ProxMala => {
                if prox_mala_step(&p, &mut state, gamma)? {
                    accepted += 1;
                }
            }
        }
        state.effective_passes += 1.0;

        if state.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "chain state", at: k });
        }

        if k > burn_in {
            let w = config.plan.lambda(k);
            state.weight_total += w;
            for (i, f) in config.functionals.iter().enumerate() {
                state.weighted_sums[i] += w * f.eval(&state.x);
            }
        }
        if let Some(t) = config.thin {
            if t > 0 && k % t == 0 {
                trace.push((k, state.x.clone()));
            }
        }
        if config.checkpoints.binary_search(&k).is_ok() {
            checkpoints.push(CheckpointEstimates { k, estimates: snapshot(&state, &config.functionals) });
        }
    }

    let estimates = snapshot(&state, &config.functionals);
    let effective_passes = state.effective_passes;
    Ok(RunOutput {
        accept_rate: (config.kind == SamplerKind::ProxMala)
            .then(|| accepted as f64 / total as f64),
        state,
        estimates,
        effective_passes,
        trace,
        checkpoints,
        warnings,
    })
}

/// Multiplicatively adjust γ until the empirical acceptance rate sits in
/// 0.5 ± 0.05. Returns (γ, warm-start point, last measured rate). The chain
/// is carried across probe rounds so later rounds measure acceptance in the
/// typical set rather than from the cold start.
pub fn tune_prox_mala(
    p: &Arc<CompositePotential>,
    x0: &DVector<f64>,
    gamma0: f64,
    seed: u64,
    stream: u64,
) -> Result<(f64, DVector<f64>, f64)> {
    if gamma0 <= 0.0 {
        return Err(Error::invalid("initial step size must be positive"));
    }
    const ROUND: usize = 2000;
    const MAX_ROUNDS: usize = 50;
    let mut gamma = gamma0;
    let rng = RngStream::new(seed, stream);
    let mut state = ChainState::new(x0.clone(), rng, 0);
    for _ in 0..MAX_ROUNDS {
        let mut accepted = 0usize;
        for _ in 0..ROUND {
            if prox_mala_step(p, &mut state, gamma)? {
                accepted += 1;
            }
            if state.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "tuning chain", at: state.k });
            }
        }
        let rate = accepted as f64 / ROUND as f64;
        if (rate - 0.5).abs() <= 0.05 {
            return Ok((gamma, state.x.clone(), rate));
        }
        gamma *= (2.0 * (rate - 0.5)).exp();
    }
    Err(Error::Tuning(format!(
        "acceptance rate did not settle near 0.5 within {MAX_ROUNDS} rounds (last γ = {gamma:.3e})"
    )))
}
