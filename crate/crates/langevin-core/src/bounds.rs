//! Right-hand sides of the convergence theorems and the tuning rules of
//! their corollaries.
//!
//! Everything here is displayed-formula arithmetic: no sampling, no matrices.
//! Each entry point returns a [`BoundReport`] that echoes its inputs so a
//! report line is self-describing. Ceilings are exact; "γ_ε ≤ …" and
//! "n_ε ≥ …" prescriptions are realized as equalities at the extreme (the
//! largest admissible step, the smallest sufficient iteration count) so
//! outputs are canonical.
//!
//! Conventions for the tuned pairs: a rule named `*-w2` drives the squared
//! Wasserstein distance below ε, a rule named `*-kl` drives the KL divergence
//! below ε; two-phase rules return a burn-in pair (gamma_eps, n_burn) and an
//! averaging pair (gamma_tilde_eps, n_eps).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::schedules::{PlanVariant, StepPlan, StepSizes, WeightRule};
use crate::{Error, Result};

/// Problem-level constants the bounds consume. All optional except the
/// dimension; each rule names the ones it needs and errors on the first
/// missing one. Fields mirror the assumptions: `m`/`l` for strong convexity
/// and smoothness of the smooth part, `m_lip` for a subgradient bound,
/// `m2_lip` for the Lipschitz constant of the nonsmooth part, `d_sq` for a
/// uniform variance cap on the gradient oracle, `l_tilde` (and the
/// strongly-convex pair `m_tilde1`, `l_tilde1`) for oracle cocoercivity,
/// `upsilon_star` for the oracle variance at the minimizer, `w0_sq` for the
/// initial squared Wasserstein distance, `eta`/`m_eta` for the growth
/// constants of the target-moment bound, `x0_moment` for
/// ∫‖x − x*‖² dμ₀ (after the scheme's first deterministic half-step where
/// applicable), and `burnin_moment` for the same moment at the start of an
/// averaging window that follows a burn-in.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConstants {
    pub dim: usize,
    #[serde(default)]
    pub m: f64,
    pub l: Option<f64>,
    pub m_lip: Option<f64>,
    pub m2_lip: Option<f64>,
    pub d_sq: Option<f64>,
    pub l_tilde: Option<f64>,
    pub m_tilde1: Option<f64>,
    pub l_tilde1: Option<f64>,
    pub upsilon_star: Option<f64>,
    pub w0_sq: Option<f64>,
    pub eta: Option<f64>,
    pub m_eta: Option<f64>,
    pub x0_moment: Option<f64>,
    pub burnin_moment: Option<f64>,
}

fn req(v: Option<f64>, name: &'static str) -> Result<f64> {
    match v {
        Some(x) if x.is_finite() && x >= 0.0 => Ok(x),
        Some(x) => Err(Error::invalid(format!("constant `{name}` = {x} must be nonnegative"))),
        None => Err(Error::MissingConstant(name)),
    }
}

impl ProblemConstants {
    pub fn new(dim: usize) -> Self {
        ProblemConstants { dim, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dim must be >= 1"));
        }
        if !(self.m >= 0.0) {
            return Err(Error::invalid(format!("m = {} must be nonnegative", self.m)));
        }
        for (name, v) in [
            ("l", self.l),
            ("m_lip", self.m_lip),
            ("m2_lip", self.m2_lip),
            ("d_sq", self.d_sq),
            ("l_tilde", self.l_tilde),
            ("m_tilde1", self.m_tilde1),
            ("l_tilde1", self.l_tilde1),
            ("upsilon_star", self.upsilon_star),
            ("w0_sq", self.w0_sq),
            ("eta", self.eta),
            ("m_eta", self.m_eta),
            ("x0_moment", self.x0_moment),
            ("burnin_moment", self.burnin_moment),
        ] {
            if let Some(x) = v {
                if !(x.is_finite() && x >= 0.0) {
                    return Err(Error::invalid(format!("constant `{name}` = {x} must be nonnegative")));
                }
            }
        }
        if let Some(l) = self.l {
            if l < self.m {
                return Err(Error::invalid(format!("l = {l} must be at least m = {}", self.m)));
            }
            if l <= 0.0 {
                return Err(Error::invalid("l must be positive"));
            }
        }
        Ok(())
    }

    fn need_l(&self) -> Result<f64> {
        let l = req(self.l, "l")?;
        if l <= 0.0 {
            return Err(Error::invalid("l must be positive"));
        }
        Ok(l)
    }

    fn need_strong(&self) -> Result<f64> {
        if self.m > 0.0 {
            Ok(self.m)
        } else {
            Err(Error::MissingConstant("m (strong convexity, must be > 0)"))
        }
    }

    fn d(&self) -> f64 {
        self.dim as f64
    }
}

/// Tuning rules, one per corollary. The `-coco` variants use oracle
/// cocoercivity in place of a uniform variance cap; the `-strong-*` variants
/// need strong convexity.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TuneRule {
    UlaConvex,
    UlaStrongW2,
    UlaStrongKl,
    SsgldUniform,
    SsgldCoco,
    SpgldUniform,
    SpgldCoco,
    SpgldStrongW2,
    SpgldStrongKl,
}

impl TuneRule {
    pub const ALL: [TuneRule; 9] = [
        TuneRule::UlaConvex,
        TuneRule::UlaStrongW2,
        TuneRule::UlaStrongKl,
        TuneRule::SsgldUniform,
        TuneRule::SsgldCoco,
        TuneRule::SpgldUniform,
        TuneRule::SpgldCoco,
        TuneRule::SpgldStrongW2,
        TuneRule::SpgldStrongKl,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TuneRule::UlaConvex => "ula-convex",
            TuneRule::UlaStrongW2 => "ula-strong-w2",
            TuneRule::UlaStrongKl => "ula-strong-kl",
            TuneRule::SsgldUniform => "ssgld-uniform",
            TuneRule::SsgldCoco => "ssgld-coco",
            TuneRule::SpgldUniform => "spgld-uniform",
            TuneRule::SpgldCoco => "spgld-coco",
            TuneRule::SpgldStrongW2 => "spgld-strong-w2",
            TuneRule::SpgldStrongKl => "spgld-strong-kl",
        }
    }
}

impl std::str::FromStr for TuneRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TuneRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown tuning rule `{s}`")))
    }
}

/// Theorem right-hand sides.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TheoremRhs {
    /// averaged KL along the plain chain
    AveragedKl,
    /// squared Wasserstein contraction of the plain chain
    W2Contraction,
    /// stationary bias of the fixed-step chain (KL, TV, W₂²)
    StepBias,
    /// averaged KL along the subgradient chain
    SsgldAveragedKl,
    /// averaged KL along the proximal chain
    SpgldAveragedKl,
    /// squared Wasserstein contraction of the proximal chain
    SpgldW2Contraction,
    /// decreasing-step computable envelope and its asymptotic order
    DecreasingStepRate,
}

impl TheoremRhs {
    pub const ALL: [TheoremRhs; 7] = [
        TheoremRhs::AveragedKl,
        TheoremRhs::W2Contraction,
        TheoremRhs::StepBias,
        TheoremRhs::SsgldAveragedKl,
        TheoremRhs::SpgldAveragedKl,
        TheoremRhs::SpgldW2Contraction,
        TheoremRhs::DecreasingStepRate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremRhs::AveragedKl => "averaged-kl",
            TheoremRhs::W2Contraction => "w2-contraction",
            TheoremRhs::StepBias => "step-bias",
            TheoremRhs::SsgldAveragedKl => "ssgld-averaged-kl",
            TheoremRhs::SpgldAveragedKl => "spgld-averaged-kl",
            TheoremRhs::SpgldW2Contraction => "spgld-w2-contraction",
            TheoremRhs::DecreasingStepRate => "decreasing-step-rate",
        }
    }
}

impl std::str::FromStr for TheoremRhs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TheoremRhs::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown theorem `{s}`")))
    }
}

/// Per-step oracle variance along the averaging window: either the uniform
/// cap D² or a measured series (index 0 is the first window step).
#[derive(Clone, Copy, Debug)]
pub enum VarianceInput<'a> {
    UniformCap(f64),
    Series(&'a [f64]),
}

impl VarianceInput<'_> {
    fn at(&self, offset: usize) -> Result<f64> {
        match self {
            VarianceInput::UniformCap(v) => Ok(*v),
            VarianceInput::Series(s) => s.get(offset).copied().ok_or_else(|| {
                Error::invalid(format!(
                    "variance series is too short: need index {offset}, have {}",
                    s.len()
                ))
            }),
        }
    }

    fn describe(&self) -> serde_json::Value {
        match self {
            VarianceInput::UniformCap(v) => json!({ "uniform_cap": v }),
            VarianceInput::Series(s) => json!({ "series_len": s.len() }),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundReport {
    pub rule: String,
    pub inputs: serde_json::Value,
    pub outputs: BTreeMap<String, f64>,
    pub valid: bool,
    pub warnings: Vec<String>,
}

impl BoundReport {
    fn new(rule: &str, inputs: serde_json::Value) -> Self {
        BoundReport {
            rule: rule.to_string(),
            inputs,
            outputs: BTreeMap::new(),
            valid: true,
            warnings: Vec::new(),
        }
    }

    fn out(&mut self, key: &str, value: f64) -> &mut Self {
        self.outputs.insert(key.to_string(), value);
        self
    }

    fn warn(&mut self, msg: impl Into<String>) -> &mut Self {
        self.valid = false;
        self.warnings.push(msg.into());
        self
    }

    pub fn output(&self, key: &str) -> Option<f64> {
        self.outputs.get(key).copied()
    }
}

fn plan_json(plan: &StepPlan) -> serde_json::Value {
    let steps = match *plan.steps() {
        StepSizes::Constant { gamma } => json!({ "kind": "constant", "gamma": gamma }),
        StepSizes::Polynomial { gamma1, alpha } => {
            json!({ "kind": "poly", "gamma1": gamma1, "alpha": alpha })
        }
        StepSizes::Piecewise { gamma1, switch_step, gamma2 } => {
            json!({ "kind": "piecewise", "gamma1": gamma1, "switch_step": switch_step, "gamma2": gamma2 })
        }
    };
    let weights = match *plan.weights() {
        WeightRule::EqualToStep => json!({ "kind": "equal-to-step" }),
        WeightRule::Constant { lambda } => json!({ "kind": "constant", "lambda": lambda }),
        WeightRule::PolynomialShifted { gamma1, alpha } => {
            json!({ "kind": "poly-shifted", "gamma1": gamma1, "alpha": alpha })
        }
    };
    json!({ "steps": steps, "weights": weights, "burn_in": plan.burn_in() })
}

fn ceil_at_least_zero(x: f64) -> f64 {
    x.ceil().max(0.0)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("epsilon = {epsilon} must be positive and finite")))
    }
}

/// Evaluate a corollary's tuning rule at accuracy ε.
pub fn tune(rule: TuneRule, c: &ProblemConstants, epsilon: f64) -> Result<BoundReport> {
    check_epsilon(epsilon)?;
    c.validate()?;
    let d = c.d();
    let inputs = json!({ "epsilon": epsilon, "constants": c });
    let mut rep = BoundReport::new(rule.name(), inputs);
    match rule {
        TuneRule::UlaConvex => {
            let l = c.need_l()?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            let gamma = (epsilon / (2.0 * l * d)).min(1.0 / l);
            let n = ceil_at_least_zero(w0 / (gamma * epsilon));
            rep.out("gamma_eps", gamma).out("n_eps", n);
        }
        TuneRule::UlaStrongW2 => {
            let l = c.need_l()?;
            let m = c.need_strong()?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            let gamma = (m * epsilon / (4.0 * l * d)).min(1.0 / l);
            let n = ceil_at_least_zero((2.0 * w0 / epsilon).ln() / (gamma * m));
            rep.out("gamma_eps", gamma).out("n_eps", n);
        }
        TuneRule::UlaStrongKl => {
            let l = c.need_l()?;
            let m = c.need_strong()?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            let gamma = (m * epsilon / (4.0 * l * d)).min(1.0 / l);
            let n_burn = ceil_at_least_zero((2.0 * w0 / epsilon).ln() / (gamma * m));
            let gamma_tilde = (epsilon / (2.0 * l * d)).min(1.0 / l);
            let n = ceil_at_least_zero(1.0 / gamma_tilde);
            rep.out("gamma_eps", gamma)
                .out("n_burn", n_burn)
                .out("gamma_tilde_eps", gamma_tilde)
                .out("n_eps", n);
        }
        TuneRule::SsgldUniform => {
            let m_lip = req(c.m_lip, "m_lip")?;
            let d_sq = req(c.d_sq, "d_sq")?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            let denom = m_lip * m_lip + d_sq;
            if denom <= 0.0 {
                rep.warn("M² + D² = 0: the step size is unconstrained and the rule is vacuous");
                return Ok(rep);
            }
            let gamma = epsilon / denom;
            let n = ceil_at_least_zero(w0 / (gamma * epsilon));
            rep.out("gamma_eps", gamma).out("n_eps", n);
        }
        TuneRule::SsgldCoco => {
            let m_lip = req(c.m_lip, "m_lip")?;
            let lt = req(c.l_tilde, "l_tilde")?;
            let ups = req(c.upsilon_star, "upsilon_star")?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            let x0m = req(c.x0_moment, "x0_moment")?;
            if lt <= 0.0 {
                return Err(Error::invalid("l_tilde must be positive"));
            }
            let mut gamma = (epsilon / (2.0 * m_lip * m_lip + 4.0 * lt * d)).min(0.5 / lt);
            if ups > 0.0 {
                gamma = gamma.min((epsilon / (4.0 * lt * ups)).sqrt());
            }
            let n = 2.0
                * ceil_at_least_zero(w0 / (gamma * epsilon))
                    .max(ceil_at_least_zero(lt * x0m / epsilon));
            rep.out("gamma_eps", gamma).out("n_eps", n);
        }
        TuneRule::SpgldUniform => {
            let l = c.need_l()?;
            let m2 = req(c.m2_lip, "m2_lip")?;
            let d_sq = req(c.d_sq, "d_sq")?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            let gamma = (epsilon / (2.0 * (l * d + m2 * m2 + d_sq))).min(1.0 / l);
            let n = ceil_at_least_zero(w0 / (gamma * epsilon));
            rep.out("gamma_eps", gamma).out("n_eps", n);
        }
        TuneRule::SpgldCoco => {
            let (gamma, n) = spgld_coco_pair(c, epsilon)?;
            rep.out("gamma_eps", gamma).out("n_eps", n);
        }
        TuneRule::SpgldStrongW2 => {
            let l = c.need_l()?;
            let m = c.need_strong()?;
            let m2 = req(c.m2_lip, "m2_lip")?;
            let d_sq = req(c.d_sq, "d_sq")?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            let gamma = (m * epsilon / (4.0 * (l * d + d_sq + m2 * m2))).min(1.0 / l);
            let n = ceil_at_least_zero((2.0 * w0 / epsilon).ln() / (gamma * m));
            rep.out("gamma_eps", gamma).out("n_eps", n);
        }
        TuneRule::SpgldStrongKl => {
            let l = c.need_l()?;
            let m = c.need_strong()?;
            let m2 = req(c.m2_lip, "m2_lip")?;
            let mt1 = req(c.m_tilde1, "m_tilde1")?;
            let lt1 = req(c.l_tilde1, "l_tilde1")?;
            let ups = req(c.upsilon_star, "upsilon_star")?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            let x0m = req(c.x0_moment, "x0_moment")?;
            if mt1 <= 0.0 || lt1 <= 0.0 {
                return Err(Error::invalid("m_tilde1 and l_tilde1 must be positive"));
            }
            let m_min = m.min(mt1);
            // Δ₁ and Δ₂ grow with γ, so evaluating them at the step cap and
            // intersecting keeps the resulting γ_ε valid without iterating.
            let cap = (1.0 / l).min(0.5 / lt1);
            let delta1 = 2.0 * (l * d + m2 * m2) / m + 2.0 * lt1 * (1.0 + cap * l) / m_min * d;
            let delta2 = 2.0 * lt1 * (1.0 + cap * l) / m_min * ups;
            let mut gamma = (epsilon / (4.0 * delta1)).min(cap);
            if delta2 > 0.0 {
                gamma = gamma.min((epsilon / (4.0 * delta2)).sqrt());
            }
            let delta3 = gamma * lt1 * (1.0 + gamma * l) * x0m;
            let mut n_burn = ceil_at_least_zero((4.0 * w0 / epsilon).ln() / (gamma * m));
            if delta3 > 0.0 {
                n_burn = n_burn.max(ceil_at_least_zero((4.0 * delta3 / epsilon).ln() / (gamma * m_min)));
            }
            // Averaging phase: the cocoercive fixed-step rule restarted from
            // the burn-in law. Its moment input is measured when provided,
            // otherwise bounded through the triangle inequality from
            // W₂ ≤ √ε and the target moment d/m.
            let after_burn = match c.burnin_moment {
                Some(v) => v,
                None => {
                    rep.warnings.push(
                        "burnin_moment not given; bounded by (√ε + √(d/m))²".to_string(),
                    );
                    let r = epsilon.sqrt() + (d / m).sqrt();
                    r * r
                }
            };
            let phase2 = ProblemConstants {
                w0_sq: Some(epsilon),
                x0_moment: Some(after_burn),
                ..c.clone()
            };
            let (gamma_tilde, n) = spgld_coco_pair(&phase2, epsilon)?;
            rep.out("gamma_eps", gamma)
                .out("n_burn", n_burn)
                .out("delta1", delta1)
                .out("delta2", delta2)
                .out("delta3", delta3)
                .out("gamma_tilde_eps", gamma_tilde)
                .out("n_eps", n);
        }
    }
    Ok(rep)
}

/// The cocoercive proximal pair (γ_ε, n_ε) shared by the fixed-step rule and
/// the averaging phase of the strongly convex two-phase rule.
fn spgld_coco_pair(c: &ProblemConstants, epsilon: f64) -> Result<(f64, f64)> {
    let l = c.need_l()?;
    let m2 = req(c.m2_lip, "m2_lip")?;
    let lt = req(c.l_tilde, "l_tilde")?;
    let ups = req(c.upsilon_star, "upsilon_star")?;
    let w0 = req(c.w0_sq, "w0_sq")?;
    let x0m = req(c.x0_moment, "x0_moment")?;
    if lt <= 0.0 {
        return Err(Error::invalid("l_tilde must be positive"));
    }
    let d = c.d();
    let mut gamma = (epsilon / (4.0 * m2 * m2 + 4.0 * l * d + 8.0 * lt * d))
        .min(1.0 / l)
        .min(0.5 / lt);
    if ups > 0.0 {
        gamma = gamma.min((epsilon / (8.0 * lt * ups)).sqrt());
    }
    let n = 2.0
        * ceil_at_least_zero(w0 / (gamma * epsilon))
            .max(ceil_at_least_zero(2.0 * lt * x0m / epsilon));
    Ok((gamma, n))
}

/// Evaluate a theorem's right-hand side for a plan over an averaging window
/// of length `horizon` (burn-in taken from the plan). Variance-driven
/// theorems take either the uniform cap or a measured series.
pub fn bound_rhs(
    theorem: TheoremRhs,
    c: &ProblemConstants,
    plan: &StepPlan,
    horizon: usize,
    variance: Option<VarianceInput>,
) -> Result<BoundReport> {
    c.validate()?;
    if horizon == 0 && theorem != TheoremRhs::W2Contraction && theorem != TheoremRhs::SpgldW2Contraction
    {
        return Err(Error::invalid("horizon must be >= 1"));
    }
    let d = c.d();
    let n_burn = plan.burn_in();
    let inputs = json!({
        "constants": c,
        "plan": plan_json(plan),
        "horizon": horizon,
        "variance": variance.as_ref().map(|v| v.describe()),
    });
    let mut rep = BoundReport::new(theorem.name(), inputs);

    match theorem {
        TheoremRhs::AveragedKl => {
            let l = c.need_l()?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            if plan.max_gamma() > 1.0 / l + 1e-15 {
                rep.warn(format!("γ₁ = {} exceeds 1/L = {}", plan.max_gamma(), 1.0 / l));
            }
            if !plan.admissible(c.m, PlanVariant::Ula, n_burn + horizon + 1) {
                rep.warn("plan fails the weight-transfer inequality for the plain chain");
            }
            let sums = plan.cumulative(n_burn, horizon);
            let g1 = plan.gamma(n_burn + 1);
            let first =
                plan.lambda(n_burn + 1) * (1.0 - c.m * g1) * w0 / (2.0 * g1 * sums.lambda);
            let mut weighted: f64 = 0.0;
            for k in n_burn + 1..=n_burn + horizon {
                weighted += plan.gamma(k) * plan.lambda(k);
            }
            let second = l * d * weighted / sums.lambda;
            rep.out("first_term", first).out("second_term", second).out("bound", first + second);
        }
        TheoremRhs::W2Contraction => {
            let l = c.need_l()?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            if plan.max_gamma() > 1.0 / l + 1e-15 {
                rep.warn(format!("γ₁ = {} exceeds 1/L = {}", plan.max_gamma(), 1.0 / l));
            }
            let mut b = w0;
            for k in 1..=horizon {
                let g = plan.gamma(k);
                b = (1.0 - c.m * g) * b + 2.0 * l * d * g * g;
            }
            rep.out("bound", b);
        }
        TheoremRhs::StepBias => {
            let l = c.need_l()?;
            let gamma = plan.gamma(1);
            if !matches!(plan.steps(), StepSizes::Constant { .. }) {
                rep.warn("stationary bias is a fixed-step statement; using γ₁");
            }
            if gamma > 1.0 / l + 1e-15 {
                rep.warn(format!("γ = {gamma} exceeds 1/L = {}", 1.0 / l));
            }
            let kl = l * d * gamma;
            rep.out("kl_bound", kl);
            rep.out("tv_bound", crate::analytics::pinsker_tv_bound(kl));
            if c.m > 0.0 {
                rep.out("w2sq_bound", 2.0 * l * d * gamma / c.m);
            } else {
                rep.warnings.push("w2sq_bound needs m > 0".to_string());
            }
        }
        TheoremRhs::SsgldAveragedKl => {
            let m_lip = req(c.m_lip, "m_lip")?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            let v = variance.ok_or(Error::MissingConstant("variance input (d_sq or series)"))?;
            if !plan.admissible(0.0, PlanVariant::StochasticGradient, n_burn + horizon + 2) {
                rep.warn("plan fails the weight-transfer inequality for the stochastic chains");
            }
            let sums = plan.cumulative(n_burn, horizon);
            let first =
                plan.lambda(n_burn + 1) * w0 / (2.0 * plan.gamma(n_burn + 2) * sums.lambda);
            let mut acc = 0.0;
            for k in n_burn + 1..=n_burn + horizon {
                let ups = v.at(k - n_burn - 1)?;
                acc += plan.gamma(k + 1) * plan.lambda(k) * (m_lip * m_lip + ups);
            }
            let second = acc / (2.0 * sums.lambda);
            rep.out("first_term", first).out("second_term", second).out("bound", first + second);
        }
        TheoremRhs::SpgldAveragedKl => {
            let l = c.need_l()?;
            let m2 = req(c.m2_lip, "m2_lip")?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            let v = variance.ok_or(Error::MissingConstant("variance input (d_sq or series)"))?;
            if plan.max_gamma() > 1.0 / l + 1e-15 {
                rep.warn(format!("γ₁ = {} exceeds 1/L = {}", plan.max_gamma(), 1.0 / l));
            }
            if !plan.admissible(0.0, PlanVariant::StochasticGradient, n_burn + horizon + 2) {
                rep.warn("plan fails the weight-transfer inequality for the stochastic chains");
            }
            let sums = plan.cumulative(n_burn, horizon);
            let first =
                plan.lambda(n_burn + 1) * w0 / (2.0 * plan.gamma(n_burn + 2) * sums.lambda);
            let mut acc = 0.0;
            for k in n_burn + 1..=n_burn + horizon {
                let g_next = plan.gamma(k + 1);
                let ups = v.at(k - n_burn - 1)?;
                acc += plan.lambda(k)
                    * g_next
                    * (2.0 * l * d + (1.0 + g_next * l) * ups + 2.0 * m2 * m2);
            }
            let second = acc / (2.0 * sums.lambda);
            rep.out("first_term", first).out("second_term", second).out("bound", first + second);
        }
        TheoremRhs::SpgldW2Contraction => {
            let l = c.need_l()?;
            let m2 = req(c.m2_lip, "m2_lip")?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            let v = variance.ok_or(Error::MissingConstant("variance input (d_sq or series)"))?;
            if plan.max_gamma() > 1.0 / l + 1e-15 {
                rep.warn(format!("γ₁ = {} exceeds 1/L = {}", plan.max_gamma(), 1.0 / l));
            }
            let mut b = w0;
            for k in 1..=horizon {
                let g = plan.gamma(k + 1);
                let ups = v.at(k - 1)?;
                b = (1.0 - c.m * g) * b
                    + g * g * (2.0 * l * d + (1.0 + g * l) * ups + 2.0 * m2 * m2);
            }
            rep.out("bound", b);
        }
        TheoremRhs::DecreasingStepRate => {
            let l = c.need_l()?;
            let w0 = req(c.w0_sq, "w0_sq")?;
            let StepSizes::Polynomial { gamma1, alpha } = *plan.steps() else {
                return Err(Error::invalid("decreasing-step-rate needs a polynomial plan"));
            };
            if !matches!(plan.weights(), WeightRule::EqualToStep) {
                rep.warn("envelope is derived for λ_k = γ_k; other weights are not covered");
            }
            if gamma1 > 1.0 / l + 1e-15 {
                rep.warn(format!("γ₁ = {gamma1} exceeds 1/L = {}", 1.0 / l));
            }
            let mut big_gamma = 0.0;
            let mut sq = 0.0;
            for k in 1..=horizon {
                let g = plan.gamma(k);
                big_gamma += g;
                sq += g * g;
            }
            let bound = w0 / (2.0 * big_gamma) + l * d * sq / big_gamma;
            let n = horizon as f64;
            let rate = if (alpha - 0.5).abs() < 1e-12 {
                (n.ln() + 1.0) / n.sqrt()
            } else {
                n.powf(alpha - 1.0).max(n.powf(-alpha))
            };
            rep.out("bound", bound).out("rate_factor", rate);
        }
    }
    Ok(rep)
}

/// Upper bound on ∫‖x − x*‖² dπ: the growth-based bound 2η⁻²d(1+d) + M_η²
/// and the strongly convex bound d/m, whichever applies (the smaller when
/// both do). This is the usual stand-in for W₀² when starting at δ_{x*}.
pub fn moment_bound(c: &ProblemConstants) -> Result<f64> {
    c.validate()?;
    let d = c.d();
    let strong = (c.m > 0.0).then(|| d / c.m);
    let growth = match (c.eta, c.m_eta) {
        (Some(eta), Some(m_eta)) => {
            if eta <= 0.0 {
                return Err(Error::invalid("eta must be positive"));
            }
            Some(2.0 / (eta * eta) * d * (1.0 + d) + m_eta * m_eta)
        }
        _ => None,
    };
    match (strong, growth) {
        (Some(a), Some(b)) => Ok(a.min(b)),
        (Some(a), None) => Ok(a),
        (None, Some(b)) => Ok(b),
        (None, None) => Err(Error::MissingConstant("m > 0 or the pair (eta, m_eta)")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(dim: usize) -> ProblemConstants {
        ProblemConstants::new(dim)
    }

    #[test]
    fn convex_rule_hand_example() {
        let mut c = base(10);
        c.l = Some(1.0);
        c.w0_sq = Some(1.0);
        let rep = tune(TuneRule::UlaConvex, &c, 0.1).unwrap();
        assert_eq!(rep.output("gamma_eps"), Some(0.005));
        assert_eq!(rep.output("n_eps"), Some(2000.0));
        assert!(rep.valid);
    }

    #[test]
    fn missing_constant_is_named() {
        let mut c = base(10);
        c.l = Some(1.0);
        match tune(TuneRule::UlaConvex, &c, 0.1) {
            Err(Error::MissingConstant("w0_sq")) => {}
            other => panic!("expected a missing-constant error, got {other:?}"),
        }
    }

    #[test]
    fn strong_rule_scales_with_epsilon() {
        let mut c = base(4);
        c.l = Some(2.0);
        c.m = 0.5;
        c.w0_sq = Some(9.0);
        let a = tune(TuneRule::UlaStrongW2, &c, 0.1).unwrap();
        let b = tune(TuneRule::UlaStrongW2, &c, 0.025).unwrap();
        let (ga, gb) = (a.output("gamma_eps").unwrap(), b.output("gamma_eps").unwrap());
        assert!((gb - ga / 4.0).abs() < 1e-15);
        assert!(b.output("n_eps").unwrap() > 4.0 * a.output("n_eps").unwrap());
    }

    #[test]
    fn subgradient_rule_with_no_variance() {
        let mut c = base(3);
        c.m_lip = Some(1.0);
        c.d_sq = Some(0.0);
        c.w0_sq = Some(2.0);
        let rep = tune(TuneRule::SsgldUniform, &c, 0.1).unwrap();
        assert_eq!(rep.output("gamma_eps"), Some(0.1));
        assert_eq!(rep.output("n_eps"), Some(200.0));
    }

    #[test]
    fn two_phase_rules_emit_both_pairs() {
        let mut c = base(2);
        c.l = Some(1.0);
        c.m = 1.0;
        c.w0_sq = Some(3.0);
        let rep = tune(TuneRule::UlaStrongKl, &c, 0.1).unwrap();
        for key in ["gamma_eps", "n_burn", "gamma_tilde_eps", "n_eps"] {
            assert!(rep.output(key).is_some(), "missing {key}");
        }
        assert_eq!(rep.output("gamma_tilde_eps"), Some(0.025));
        assert_eq!(rep.output("n_eps"), Some(40.0));
    }

    #[test]
    fn strongly_convex_proximal_chain_of_rules() {
        let mut c = base(2);
        c.l = Some(2.0);
        c.m = 0.4;
        c.m2_lip = Some(1.0);
        c.m_tilde1 = Some(0.4);
        c.l_tilde1 = Some(3.0);
        c.l_tilde = Some(3.0);
        c.upsilon_star = Some(0.5);
        c.w0_sq = Some(4.0);
        c.x0_moment = Some(4.0);
        let rep = tune(TuneRule::SpgldStrongKl, &c, 0.2).unwrap();
        let gamma = rep.output("gamma_eps").unwrap();
        assert!(gamma > 0.0 && gamma <= 0.5 / 3.0);
        assert!(rep.output("n_burn").unwrap() >= 1.0);
        assert!(rep.output("gamma_tilde_eps").unwrap() > 0.0);
        assert!(rep.warnings.iter().any(|w| w.contains("burnin_moment")));
    }

    #[test]
    fn bias_bounds_hand_values() {
        let mut c = base(1);
        c.l = Some(1.0);
        c.m = 1.0;
        let plan = StepPlan::constant(0.1).unwrap();
        let rep = bound_rhs(TheoremRhs::StepBias, &c, &plan, 1, None).unwrap();
        assert_eq!(rep.output("kl_bound"), Some(0.1));
        assert!((rep.output("tv_bound").unwrap() - 0.2f64.sqrt()).abs() < 1e-15);
        assert!((rep.output("w2sq_bound").unwrap() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn contraction_with_empty_window_returns_start() {
        let mut c = base(5);
        c.l = Some(1.0);
        c.w0_sq = Some(7.0);
        let plan = StepPlan::constant(0.5).unwrap();
        let rep = bound_rhs(TheoremRhs::W2Contraction, &c, &plan, 0, None).unwrap();
        assert_eq!(rep.output("bound"), Some(7.0));
    }

    #[test]
    fn averaged_kl_constant_plan_collapses() {
        let mut c = base(2);
        c.l = Some(1.0);
        c.w0_sq = Some(1.0);
        let plan = StepPlan::constant(0.01).unwrap();
        let rep = bound_rhs(TheoremRhs::AveragedKl, &c, &plan, 100, None).unwrap();
        let expect = 1.0 / (2.0 * 0.01 * 100.0) + 1.0 * 2.0 * 0.01;
        assert!((rep.output("bound").unwrap() - expect).abs() < 1e-12);
        assert!(rep.valid);
    }

    #[test]
    fn variance_series_must_cover_window() {
        let mut c = base(1);
        c.m_lip = Some(1.0);
        c.w0_sq = Some(1.0);
        let plan = StepPlan::constant(0.01).unwrap();
        let series = [0.5, 0.5];
        let err = bound_rhs(
            TheoremRhs::SsgldAveragedKl,
            &c,
            &plan,
            3,
            Some(VarianceInput::Series(&series)),
        );
        assert!(err.is_err());
        let ok = bound_rhs(
            TheoremRhs::SsgldAveragedKl,
            &c,
            &plan,
            2,
            Some(VarianceInput::Series(&series)),
        )
        .unwrap();
        assert!(ok.output("bound").unwrap() > 0.0);
    }

    #[test]
    fn moment_bound_hand_values() {
        let mut c = base(10);
        c.m = 1.0;
        assert_eq!(moment_bound(&c).unwrap(), 10.0);
        let mut c = base(2);
        c.eta = Some(1.0);
        c.m_eta = Some(0.0);
        assert_eq!(moment_bound(&c).unwrap(), 12.0);
        c.m = 1.0;
        assert_eq!(moment_bound(&c).unwrap(), 2.0);
        assert!(moment_bound(&base(3)).is_err());
    }

    #[test]
    fn rule_names_round_trip() {
        for r in TuneRule::ALL {
            assert_eq!(r.name().parse::<TuneRule>().unwrap(), r);
        }
        for t in TheoremRhs::ALL {
            assert_eq!(t.name().parse::<TheoremRhs>().unwrap(), t);
        }
    }
}
