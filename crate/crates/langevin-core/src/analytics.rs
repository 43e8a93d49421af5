//! Closed-form Gaussian analytics.
//!
//! For a quadratic potential U(x) = x'Hx/2 every law in play stays Gaussian,
//! so the sampler's one-step map, its n-step law, its stationary law, and all
//! the functionals the bounds talk about (KL, W2, entropy, potential energy,
//! free energy) have exact expressions. These are the oracles the rest of the
//! crate is tested against.
//!
//! Conventions: the entropy functional here is ∫ log(dμ/dx) dμ (negative
//! differential entropy), so free energy = potential energy + entropy and the
//! free-energy gap to the target equals KL(μ‖π) exactly.

use nalgebra::{DMatrix, DVector};

use crate::model::{Quadratic, SmoothPotential};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GaussianLaw {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

fn symmetric_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric PSD square root; small negative eigenvalues from roundoff are
/// clamped to zero.
fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = symmetric_part(m).symmetric_eigen();
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&roots) * eig.eigenvectors.transpose()
}

impl GaussianLaw {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() || cov.nrows() != mean.len() {
            return Err(Error::Dimension { expected: mean.len(), got: cov.nrows() });
        }
        let scale = 1.0 + cov.amax();
        if (&cov - cov.transpose()).amax() > 1e-10 * scale {
            return Err(Error::NotPsd("covariance is not symmetric".into()));
        }
        let cov = symmetric_part(&cov);
        let eig = cov.clone().symmetric_eigen();
        let max = eig.eigenvalues.amax();
        if eig.eigenvalues.min() < -1e-12 * (1.0 + max) * (cov.nrows() as f64).sqrt() {
            return Err(Error::NotPsd(format!(
                "covariance has eigenvalue {:.3e}",
                eig.eigenvalues.min()
            )));
        }
        Ok(GaussianLaw { mean, cov })
    }

    pub fn point(x: DVector<f64>) -> Self {
        let d = x.len();
        GaussianLaw { mean: x, cov: DMatrix::zeros(d, d) }
    }

    pub fn isotropic(mean: DVector<f64>, variance: f64) -> Result<Self> {
        if variance < 0.0 || !variance.is_finite() {
            return Err(Error::invalid(format!("variance = {variance} must be nonnegative")));
        }
        let d = mean.len();
        Ok(GaussianLaw { mean, cov: DMatrix::identity(d, d) * variance })
    }

    pub fn standard(dim: usize) -> Self {
        GaussianLaw { mean: DVector::zeros(dim), cov: DMatrix::identity(dim, dim) }
    }

    /// The normalized target e^{-x'Hx/2}: N(0, H^{-1}). Needs H positive
    /// definite, otherwise the measure is not normalizable.
    pub fn target_of(h: &Quadratic) -> Result<Self> {
        let eig = h.hessian().clone().symmetric_eigen();
        let min = eig.eigenvalues.min();
        if min <= 1e-12 * (1.0 + eig.eigenvalues.amax()) {
            return Err(Error::NotPsd(format!(
                "target needs a positive definite hessian (min eigenvalue {min:.3e})"
            )));
        }
        let inv = eig.eigenvalues.map(|l| 1.0 / l);
        let cov = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
        Ok(GaussianLaw { mean: DVector::zeros(h.dim()), cov: symmetric_part(&cov) })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Pushforward under x ↦ Ax + b.
    pub fn apply_affine(&self, a: &DMatrix<f64>, b: &DVector<f64>) -> Result<Self> {
        crate::check_dim(self.dim(), a.ncols())?;
        crate::check_dim(a.nrows(), b.len())?;
        let mean = a * &self.mean + b;
        let cov = a * &self.cov * a.transpose();
        Ok(GaussianLaw { mean, cov: symmetric_part(&cov) })
    }

    /// Convolution with N(0, vI).
    pub fn add_isotropic(&self, v: f64) -> Self {
        let mut cov = self.cov.clone();
        for i in 0..self.dim() {
            cov[(i, i)] += v;
        }
        GaussianLaw { mean: self.mean.clone(), cov }
    }

    /// ∫ ‖y − x‖² dμ(y) = ‖m − x‖² + tr C.
    pub fn second_moment_about(&self, x: &DVector<f64>) -> f64 {
        (&self.mean - x).norm_squared() + self.cov.trace()
    }

    fn log_det_cov(&self) -> f64 {
        let eig = self.cov.clone().symmetric_eigen();
        let max = eig.eigenvalues.amax().max(1.0);
        let mut s = 0.0;
        for l in eig.eigenvalues.iter() {
            if *l <= 1e-14 * max {
                return f64::NEG_INFINITY;
            }
            s += l.ln();
        }
        s
    }
}

/// Squared 2-Wasserstein distance between Gaussians:
/// ‖Δm‖² + tr(Ca + Cb − 2 (Cb^{1/2} Ca Cb^{1/2})^{1/2}).
pub fn w2_squared(a: &GaussianLaw, b: &GaussianLaw) -> f64 {
    let half = sqrt_psd(b.cov());
    let cross = sqrt_psd(&(&half * a.cov() * &half));
    let trace_part = a.cov().trace() + b.cov().trace() - 2.0 * cross.trace();
    (a.mean() - b.mean()).norm_squared() + trace_part.max(0.0)
}

pub fn w2_distance(a: &GaussianLaw, b: &GaussianLaw) -> f64 {
    w2_squared(a, b).sqrt()
}

/// KL(a ‖ b). Infinite when a is singular; the reference must be nonsingular.
pub fn kl_divergence(a: &GaussianLaw, b: &GaussianLaw) -> Result<f64> {
    crate::check_dim(a.dim(), b.dim())?;
    let log_det_b = b.log_det_cov();
    if log_det_b == f64::NEG_INFINITY {
        return Err(Error::NotPsd("reference law has a singular covariance".into()));
    }
    let log_det_a = a.log_det_cov();
    if log_det_a == f64::NEG_INFINITY {
        return Ok(f64::INFINITY);
    }
    let eig = b.cov().clone().symmetric_eigen();
    let inv = eig.eigenvalues.map(|l| 1.0 / l);
    let b_inv = &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose();
    let dm = a.mean() - b.mean();
    let d = a.dim() as f64;
    let kl = 0.5 * ((&b_inv * a.cov()).trace() + dm.dot(&(&b_inv * &dm)) - d + log_det_b - log_det_a);
    Ok(kl.max(0.0))
}

/// ℋ(μ) = ∫ log(dμ/dx) dμ = −(d/2) log(2πe) − ½ log det C; +∞ when singular.
pub fn entropy_functional(law: &GaussianLaw) -> f64 {
    let log_det = law.log_det_cov();
    if log_det == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let d = law.dim() as f64;
    -0.5 * d * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() - 0.5 * log_det
}

/// ℰ(μ) = ∫ x'Hx/2 dμ = ½ (m'Hm + tr(HC)).
pub fn potential_functional(h: &Quadratic, law: &GaussianLaw) -> f64 {
    let hm = h.hessian() * law.mean();
    0.5 * (law.mean().dot(&hm) + (h.hessian() * law.cov()).trace())
}

pub fn free_energy(h: &Quadratic, law: &GaussianLaw) -> f64 {
    potential_functional(h, law) + entropy_functional(law)
}

/// ℱ(μ) − ℱ(π); equals KL(μ‖π) for the normalized target.
pub fn free_energy_gap(h: &Quadratic, law: &GaussianLaw) -> Result<f64> {
    let target = GaussianLaw::target_of(h)?;
    Ok(free_energy(h, law) - free_energy(h, &target))
}

/// Exact gradient step: pushforward under x ↦ (I − γH)x.
pub fn gradient_step(h: &Quadratic, gamma: f64, law: &GaussianLaw) -> Result<GaussianLaw> {
    let d = h.dim();
    let a = DMatrix::identity(d, d) - h.hessian() * gamma;
    law.apply_affine(&a, &DVector::zeros(d))
}

/// Heat step: convolution with N(0, 2γI).
pub fn heat_step(gamma: f64, law: &GaussianLaw) -> GaussianLaw {
    law.add_isotropic(2.0 * gamma)
}

/// One unadjusted Langevin transition: gradient step, then heat step.
pub fn ula_transition(h: &Quadratic, gamma: f64, law: &GaussianLaw) -> Result<GaussianLaw> {
    Ok(heat_step(gamma, &gradient_step(h, gamma, law)?))
}

/// Law after k transitions at a fixed step.
pub fn ula_law(h: &Quadratic, gamma: f64, k: usize, mu0: &GaussianLaw) -> Result<GaussianLaw> {
    let mut law = mu0.clone();
    for _ in 0..k {
        law = ula_transition(h, gamma, &law)?;
    }
    Ok(law)
}

/// Stationary law of the γ-step chain. In the eigenbasis of H each mode is an
/// AR(1), stable iff γh < 2, with variance 2 / (h (2 − γh)).
pub fn ula_stationary(h: &Quadratic, gamma: f64) -> Result<GaussianLaw> {
    let eig = h.hessian().clone().symmetric_eigen();
    let min = eig.eigenvalues.min();
    if min <= 1e-12 * (1.0 + eig.eigenvalues.amax()) {
        return Err(Error::NotPsd(format!(
            "stationary law needs a positive definite hessian (min eigenvalue {min:.3e})"
        )));
    }
    let max_gamma = 2.0 / eig.eigenvalues.max();
    if !(gamma > 0.0 && gamma < max_gamma) {
        return Err(Error::StepSize { gamma, max: max_gamma });
    }
    let vars = eig.eigenvalues.map(|l| 2.0 / (l * (2.0 - gamma * l)));
    let cov = &eig.eigenvectors * DMatrix::from_diagonal(&vars) * eig.eigenvectors.transpose();
    Ok(GaussianLaw { mean: DVector::zeros(h.dim()), cov: symmetric_part(&cov) })
}

/// Total-variation bound from KL via Pinsker, √(2 KL), clamped to the unit
/// range where it is vacuous anyway.
pub fn pinsker_tv_bound(kl: f64) -> f64 {
    (2.0 * kl).sqrt().min(1.0)
}

/// Margin of the entropy-flow inequality
/// 2γ{ℋ(μT_γ) − ℋ(ν)} ≤ W₂²(μ,ν) − W₂²(μT_γ,ν): rhs − lhs, nonnegative up
/// to roundoff for any pair of laws and γ > 0.
pub fn entropy_flow_margin(mu: &GaussianLaw, nu: &GaussianLaw, gamma: f64) -> f64 {
    let heated = heat_step(gamma, mu);
    let lhs = 2.0 * gamma * (entropy_functional(&heated) - entropy_functional(nu));
    let rhs = w2_squared(mu, nu) - w2_squared(&heated, nu);
    rhs - lhs
}

/// Everything the one-step free-energy inequality talks about, evaluated
/// exactly for one (H, γ, μ) triple against the normalized target.
#[derive(Clone, Copy, Debug)]
pub struct OneStepReport {
    /// 2γ{ℱ(μR_γ) − ℱ(π)}
    pub descent_lhs: f64,
    /// (1 − mγ) W₂²(μ,π) − W₂²(μR_γ,π) + 2γ²Ld
    pub descent_rhs: f64,
    pub descent_margin: f64,
    /// ℰ(μT_γ) − ℰ(μ), computed from the two laws
    pub heat_energy_gain: f64,
    /// its closed form γ tr H
    pub heat_energy_trace: f64,
    /// the dimension-and-smoothness cap Ldγ
    pub heat_energy_cap: f64,
    pub entropy_flow_margin: f64,
}

pub fn one_step_report(h: &Quadratic, gamma: f64, mu: &GaussianLaw) -> Result<OneStepReport> {
    crate::check_dim(h.dim(), mu.dim())?;
    let l = h.smoothness();
    if !(gamma > 0.0 && gamma <= 1.0 / l) {
        return Err(Error::StepSize { gamma, max: 1.0 / l });
    }
    let m = h.strong_convexity();
    let d = h.dim() as f64;
    let target = GaussianLaw::target_of(h)?;
    let next = ula_transition(h, gamma, mu)?;

    let descent_lhs = 2.0 * gamma * (free_energy(h, &next) - free_energy(h, &target));
    let descent_rhs = (1.0 - m * gamma) * w2_squared(mu, &target) - w2_squared(&next, &target)
        + 2.0 * gamma * gamma * l * d;

    let heated = heat_step(gamma, mu);
    let heat_energy_gain = potential_functional(h, &heated) - potential_functional(h, mu);

    Ok(OneStepReport {
        descent_lhs,
        descent_rhs,
        descent_margin: descent_rhs - descent_lhs,
        heat_energy_gain,
        heat_energy_trace: gamma * h.hessian().trace(),
        heat_energy_cap: l * d * gamma,
        entropy_flow_margin: entropy_flow_margin(mu, &target, gamma),
    })
}

/// Weighted point masses on the line, held sorted with weights normalized to
/// one. The exact W₂ between two of these comes from the quantile coupling.
#[derive(Clone, Debug)]
pub struct Empirical1d {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl Empirical1d {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() || points.len() != weights.len() {
            return Err(Error::invalid("points and weights must be nonempty and equal length"));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("points must be finite"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::invalid("weights must have positive total mass"));
        }
        let mut pairs: Vec<(f64, f64)> =
            points.into_iter().zip(weights).filter(|(_, w)| *w > 0.0).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (points, weights) =
            pairs.into_iter().map(|(x, w)| (x, w / total)).unzip();
        Ok(Empirical1d { points, weights })
    }

    pub fn uniform(points: Vec<f64>) -> Result<Self> {
        let w = vec![1.0; points.len()];
        Empirical1d::new(points, w)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        let mut cum = 0.0;
        for (x, w) in self.points.iter().zip(&self.weights) {
            cum += w;
            if cum >= u {
                return *x;
            }
        }
        *self.points.last().expect("nonempty by construction")
    }

    /// Exact squared W₂ via the shared-quantile walk: both inverse CDFs are
    /// step functions, so the integral is a finite sum over merged mass
    /// intervals.
    pub fn w2_squared_to(&self, other: &Empirical1d) -> f64 {
        let (mut i, mut j) = (0usize, 0usize);
        let (mut ca, mut cb) = (self.weights[0], other.weights[0]);
        let mut u = 0.0;
        let mut total = 0.0;
        loop {
            let next = ca.min(cb).min(1.0);
            let diff = self.points[i] - other.points[j];
            total += diff * diff * (next - u).max(0.0);
            u = next;
            let advance_a = ca <= cb;
            let advance_b = cb <= ca;
            if advance_a {
                i += 1;
                if i == self.points.len() {
                    break;
                }
                ca += self.weights[i];
            }
            if advance_b {
                j += 1;
                if j == other.points.len() {
                    break;
                }
                cb += other.weights[j];
            }
        }
        total
    }
}
