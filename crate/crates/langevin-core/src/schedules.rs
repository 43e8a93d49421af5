//! Step-size and averaging-weight sequences.
//!
//! Every averaged bound is driven by a pair of non-increasing positive
//! sequences: steps γ_k and weights λ_k, combined through the partial sums
//! Γ_{N,N+n} = Σ γ_k and Λ_{N,N+n} = Σ λ_k over the averaging window. The
//! admissibility predicates are the exact hypotheses under which the two
//! families of averaged KL bounds hold; they differ by one index shift.

use crate::{Error, Result};

/// Step-size sequence γ_k, k ≥ 1.
#[derive(Clone, Debug, PartialEq)]
pub enum StepSizes {
    Constant { gamma: f64 },
    /// γ_k = γ₁ / k^α
    Polynomial { gamma1: f64, alpha: f64 },
    /// γ₁ up to and including `switch_step`, γ₂ afterwards. Used by the
    /// two-phase tuning rules (burn-in at one step size, averaging at
    /// another); γ₂ > γ₁ is allowed because the second phase restarts the
    /// analysis from the burn-in law.
    Piecewise { gamma1: f64, switch_step: usize, gamma2: f64 },
}

/// Averaging weights λ_k, k ≥ 1.
#[derive(Clone, Debug, PartialEq)]
pub enum WeightRule {
    /// λ_k = γ_k
    EqualToStep,
    Constant { lambda: f64 },
    /// λ_k = γ₁ / (k+1)^α — the shifted companion of a polynomial step plan.
    PolynomialShifted { gamma1: f64, alpha: f64 },
}

/// Which averaged-KL hypothesis to check.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PlanVariant {
    /// λ_{k+1}(1 − mγ_{k+1})/γ_{k+1} ≤ λ_k/γ_k
    Ula,
    /// λ_{k+1}/γ_{k+2} ≤ λ_k/γ_{k+1}
    StochasticGradient,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepPlan {
    steps: StepSizes,
    weights: WeightRule,
    burn_in: usize,
}

/// Partial sums over one averaging window.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowSums {
    pub gamma: f64,
    pub lambda: f64,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} = {v} must be positive and finite")))
    }
}

impl StepPlan {
    pub fn constant(gamma: f64) -> Result<Self> {
        positive("gamma", gamma)?;
        Ok(StepPlan { steps: StepSizes::Constant { gamma }, weights: WeightRule::EqualToStep, burn_in: 0 })
    }

    pub fn polynomial(gamma1: f64, alpha: f64) -> Result<Self> {
        positive("gamma1", gamma1)?;
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1]")));
        }
        Ok(StepPlan {
            steps: StepSizes::Polynomial { gamma1, alpha },
            weights: WeightRule::EqualToStep,
            burn_in: 0,
        })
    }

    pub fn piecewise(gamma1: f64, switch_step: usize, gamma2: f64) -> Result<Self> {
        positive("gamma1", gamma1)?;
        positive("gamma2", gamma2)?;
        if switch_step == 0 {
            return Err(Error::invalid("switch_step must be >= 1"));
        }
        Ok(StepPlan {
            steps: StepSizes::Piecewise { gamma1, switch_step, gamma2 },
            weights: WeightRule::EqualToStep,
            burn_in: 0,
        })
    }

    pub fn with_weights(mut self, weights: WeightRule) -> Result<Self> {
        match &weights {
            WeightRule::EqualToStep => {}
            WeightRule::Constant { lambda } => positive("lambda", *lambda)?,
            WeightRule::PolynomialShifted { gamma1, alpha } => {
                positive("gamma1", *gamma1)?;
                if !(*alpha > 0.0 && *alpha <= 1.0) {
                    return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1]")));
                }
            }
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn with_burn_in(mut self, burn_in: usize) -> Self {
        self.burn_in = burn_in;
        self
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in
    }

    pub fn steps(&self) -> &StepSizes {
        &self.steps
    }

    pub fn weights(&self) -> &WeightRule {
        &self.weights
    }

    /// γ_k for k ≥ 1.
    pub fn gamma(&self, k: usize) -> f64 {
        debug_assert!(k >= 1, "steps are indexed from 1");
        match self.steps {
            StepSizes::Constant { gamma } => gamma,
            StepSizes::Polynomial { gamma1, alpha } => gamma1 / (k as f64).powf(alpha),
            StepSizes::Piecewise { gamma1, switch_step, gamma2 } => {
                if k <= switch_step {
                    gamma1
                } else {
                    gamma2
                }
            }
        }
    }

    /// λ_k for k ≥ 1.
    pub fn lambda(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        match self.weights {
            WeightRule::EqualToStep => self.gamma(k),
            WeightRule::Constant { lambda } => lambda,
            WeightRule::PolynomialShifted { gamma1, alpha } => gamma1 / ((k + 1) as f64).powf(alpha),
        }
    }

    /// Largest step the plan ever takes (step-range checks key off this).
    pub fn max_gamma(&self) -> f64 {
        match self.steps {
            StepSizes::Constant { gamma } => gamma,
            StepSizes::Polynomial { gamma1, .. } => gamma1,
            StepSizes::Piecewise { gamma1, gamma2, .. } => gamma1.max(gamma2),
        }
    }

    /// (Γ_{N,N+n}, Λ_{N,N+n}): sums over k = N+1 ..= N+n.
    pub fn cumulative(&self, burn_in: usize, n: usize) -> WindowSums {
        let mut gamma = 0.0;
        let mut lambda = 0.0;
        for k in burn_in + 1..=burn_in + n {
            gamma += self.gamma(k);
            lambda += self.lambda(k);
        }
        WindowSums { gamma, lambda }
    }

    pub fn is_non_increasing(&self, horizon: usize) -> bool {
        (1..horizon).all(|k| {
            self.gamma(k + 1) <= self.gamma(k) * (1.0 + 1e-12)
                && self.lambda(k + 1) <= self.lambda(k) * (1.0 + 1e-12)
        })
    }

    /// Does the plan satisfy the assumptions of the averaged-error bounds up
    /// to `horizon`: non-increasing steps plus the variant's weight-transfer
    /// inequality at every k?
    pub fn admissible(&self, m: f64, variant: PlanVariant, horizon: usize) -> bool {
        let tol = 1.0 + 1e-12;
        self.is_non_increasing(horizon)
            && (1..horizon).all(|k| match variant {
            PlanVariant::Ula => {
                let lhs = self.lambda(k + 1) * (1.0 - m * self.gamma(k + 1)) / self.gamma(k + 1);
                lhs <= (self.lambda(k) / self.gamma(k)) * tol
            }
            PlanVariant::StochasticGradient => {
                let lhs = self.lambda(k + 1) / self.gamma(k + 2);
                lhs <= (self.lambda(k) / self.gamma(k + 1)) * tol
            }
        })
    }
}
