//! Potentials and their smooth/non-smooth decomposition.
//!
//! A target `π ∝ exp(−U)` enters the toolkit as a [`CompositePotential`]
//! `U = U₁ + U₂`: a smooth part with curvature constants `(m, L)` and an
//! optional non-smooth convex term carrying a subgradient, a proximal map,
//! and a Lipschitz constant `M₂`. Concrete instances: [`Quadratic`] (Gaussian
//! targets, the analytics module computes its chain laws in closed form),
//! [`LogisticModel`] (Bayesian logistic regression with ridge and/or Laplace
//! priors), and [`L1Term`] (the Laplace prior by itself).

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::{check_dim, Error, Result};

/// Convex potential with Lipschitz gradient.
///
/// `strong_convexity` is the modulus m ≥ 0; `smoothness` is the gradient
/// Lipschitz constant L. Implementations must keep both consistent with
/// `value`/`grad` — the contract tests sample the defining inequalities.
pub trait SmoothPotential: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn grad(&self, x: &DVector<f64>) -> DVector<f64>;
    fn strong_convexity(&self) -> f64;
    fn smoothness(&self) -> f64;
}

/// Convex non-smooth term with a designated subgradient and a proximal map.
pub trait NonSmoothTerm: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    /// A designated element of the subdifferential.
    fn subgrad(&self, x: &DVector<f64>) -> DVector<f64>;
    /// `argmin_y { value(y) + ‖x−y‖²/(2γ) }`
    fn prox(&self, gamma: f64, x: &DVector<f64>) -> DVector<f64>;
    /// Lipschitz constant M₂ (bounds every subgradient norm).
    fn lipschitz(&self) -> f64;
}

/// `U(x) = ½ xᵀHx` for symmetric positive semi-definite H.
///
/// m = λ_min(H), L = λ_max(H); the gradient is exactly `Hx`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    h: DMatrix<f64>,
    m: f64,
    l: f64,
}

impl Quadratic {
    pub fn new(h: DMatrix<f64>) -> Result<Self> {
        if h.nrows() != h.ncols() || h.is_empty() {
            return Err(Error::invalid("Hessian must be square and non-empty"));
        }
        let asym = (&h - h.transpose()).abs().max();
        if asym > 1e-10 * (1.0 + h.abs().max()) {
            return Err(Error::NotPsd(format!("asymmetry {asym:.3e}")));
        }
        let h = (&h + h.transpose()) * 0.5;
        let eig = h.clone().symmetric_eigenvalues();
        let min = eig.min();
        let max = eig.max();
        if min < -1e-9 * max.max(1.0) {
            return Err(Error::NotPsd(format!("eigenvalue {min:.3e}")));
        }
        Ok(Quadratic { h, m: min.max(0.0), l: max.max(0.0) })
    }

    pub fn isotropic(dim: usize, scale: f64) -> Result<Self> {
        Quadratic::new(DMatrix::identity(dim, dim) * scale)
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.h
    }
}

impl SmoothPotential for Quadratic {
    fn dim(&self) -> usize {
        self.h.nrows()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (x.transpose() * &self.h * x)[(0, 0)]
    }

    fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x
    }

    fn strong_convexity(&self) -> f64 {
        self.m
    }

    fn smoothness(&self) -> f64 {
        self.l
    }
}

/// `a₁ Σ|x_i|` with soft-threshold prox and the sign(0)=0 subgradient choice.
#[derive(Clone, Debug)]
pub struct L1Term {
    dim: usize,
    a1: f64,
}

impl L1Term {
    pub fn new(dim: usize, a1: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if !(a1 >= 0.0) {
            return Err(Error::invalid(format!("Laplace scale a1 = {a1} must be >= 0")));
        }
        Ok(L1Term { dim, a1 })
    }

    pub fn scale(&self) -> f64 {
        self.a1
    }
}

/// sign with sign(0) = 0, the minimal-norm subgradient of |·|.
pub(crate) fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl NonSmoothTerm for L1Term {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.a1 * x.iter().map(|v| v.abs()).sum::<f64>()
    }

    fn subgrad(&self, x: &DVector<f64>) -> DVector<f64> {
        x.map(|v| self.a1 * sign0(v))
    }

    fn prox(&self, gamma: f64, x: &DVector<f64>) -> DVector<f64> {
        let t = self.a1 * gamma;
        x.map(|v| sign0(v) * (v.abs() - t).max(0.0))
    }

    fn lipschitz(&self) -> f64 {
        self.a1 * (self.dim as f64).sqrt()
    }
}

/// Logistic likelihood with ridge (a₂) and Laplace (a₁) prior scales.
///
/// The smooth part the trait exposes is `Σ_n ℓ_n(β) + a₂‖β‖²` with
/// `ℓ_n(β) = −Y_n βᵀX_n + log(1+exp(βᵀX_n))`; the Laplace prior, when
/// a₁ > 0, is the separate non-smooth term (see [`LogisticModel::laplace_term`]).
#[derive(Clone, Debug)]
pub struct LogisticModel {
    // design matrix stored transposed (d × N): row n of the data is the
    // contiguous column n, which keeps minibatch gradient draws allocation-free
    xt: DMatrix<f64>,
    y: DVector<f64>,
    a1: f64,
    a2: f64,
    l: f64,
}

/// `Φ(u) = e^u/(1+e^u)`, evaluated without overflow.
pub fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// `log(1+exp(u))` without overflow.
fn log1p_exp(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, a1: f64, a2: f64) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::Data("empty design matrix".into()));
        }
        check_dim(x.nrows(), y.len())?;
        if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite covariate".into()));
        }
        if !(a1 >= 0.0) || !(a2 >= 0.0) {
            return Err(Error::invalid("prior scales must be >= 0"));
        }
        // logistic Hessian is bounded by (1/4) Σ X_n X_nᵀ, plus 2a₂ from the ridge
        let l = 0.25 * x.row_iter().map(|r| r.norm_squared()).sum::<f64>() + 2.0 * a2;
        Ok(LogisticModel { xt: x.transpose(), y, a1, a2, l })
    }

    pub fn n_rows(&self) -> usize {
        self.xt.ncols()
    }

    /// Covariate rows as the columns of a d × N matrix.
    pub fn covariates_t(&self) -> &DMatrix<f64> {
        &self.xt
    }

    /// `‖X_n‖²` for every data row.
    pub fn row_norms_squared(&self) -> Vec<f64> {
        self.xt.column_iter().map(|c| c.norm_squared()).collect()
    }

    pub fn labels(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn prior_scales(&self) -> (f64, f64) {
        (self.a1, self.a2)
    }

    /// `ℓ_n(β)`
    pub fn loss(&self, n: usize, beta: &DVector<f64>) -> f64 {
        let u = self.xt.column(n).dot(beta);
        -self.y[n] * u + log1p_exp(u)
    }

    /// `∇ℓ_n(β) = (Φ(βᵀX_n) − Y_n) X_n`
    pub fn row_grad(&self, n: usize, beta: &DVector<f64>) -> DVector<f64> {
        let u = self.xt.column(n).dot(beta);
        self.xt.column(n) * (sigmoid(u) - self.y[n])
    }

    /// `acc += ∇ℓ_n(β)` without allocating.
    pub fn add_row_grad(&self, n: usize, beta: &DVector<f64>, acc: &mut DVector<f64>) {
        let col = self.xt.column(n);
        let w = sigmoid(col.dot(beta)) - self.y[n];
        acc.axpy(w, &col, 1.0);
    }

    /// (m, L, M₂) as used by step plans and bound rules.
    pub fn constants(&self) -> (f64, f64, f64) {
        (2.0 * self.a2, self.l, self.a1 * (self.dim() as f64).sqrt())
    }

    pub fn laplace_term(&self) -> Option<L1Term> {
        if self.a1 > 0.0 {
            Some(L1Term { dim: self.dim(), a1: self.a1 })
        } else {
            None
        }
    }
}

impl SmoothPotential for LogisticModel {
    fn dim(&self) -> usize {
        self.xt.nrows()
    }

    fn value(&self, beta: &DVector<f64>) -> f64 {
        let u = self.xt.tr_mul(beta);
        let mut s = 0.0;
        for n in 0..u.len() {
            s += -self.y[n] * u[n] + log1p_exp(u[n]);
        }
        s + self.a2 * beta.norm_squared()
    }

    fn grad(&self, beta: &DVector<f64>) -> DVector<f64> {
        let u = self.xt.tr_mul(beta);
        let w = DVector::from_fn(u.len(), |n, _| sigmoid(u[n]) - self.y[n]);
        &self.xt * w + beta * (2.0 * self.a2)
    }

    fn strong_convexity(&self) -> f64 {
        2.0 * self.a2
    }

    fn smoothness(&self) -> f64 {
        self.l
    }
}

/// Full target potential `U = U₁ + U₂`, with the optional extras the bound
/// calculators need: a global Lipschitz constant of U (when one exists) and
/// a minimizer x*.
#[derive(Clone)]
pub struct CompositePotential {
    u1: Arc<dyn SmoothPotential>,
    u2: Option<Arc<dyn NonSmoothTerm>>,
    lipschitz: Option<f64>,
    x_star: Option<DVector<f64>>,
}

/// One evaluation of every piece a sampler step can ask for.
#[derive(Clone, Debug)]
pub struct Evaluation {
    pub value: f64,
    pub smooth_grad: DVector<f64>,
    /// `∇U₁ + subgrad U₂`, an element of ∂U.
    pub sub_grad: DVector<f64>,
}

impl CompositePotential {
    pub fn smooth(u1: Arc<dyn SmoothPotential>) -> Self {
        CompositePotential { u1, u2: None, lipschitz: None, x_star: None }
    }

    pub fn composite(u1: Arc<dyn SmoothPotential>, u2: Arc<dyn NonSmoothTerm>) -> Result<Self> {
        check_dim(u1.dim(), u2.dim())?;
        Ok(CompositePotential { u1, u2: Some(u2), lipschitz: None, x_star: None })
    }

    /// Global Lipschitz constant of U, for bounds that need one. Not derivable
    /// from (L, M₂) in general, so it is declared rather than computed.
    pub fn with_lipschitz(mut self, m: f64) -> Self {
        self.lipschitz = Some(m);
        self
    }

    pub fn with_minimizer(mut self, x_star: DVector<f64>) -> Result<Self> {
        check_dim(self.dim(), x_star.len())?;
        self.x_star = Some(x_star);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.u1.dim()
    }

    pub fn smooth_part(&self) -> &Arc<dyn SmoothPotential> {
        &self.u1
    }

    pub fn nonsmooth_part(&self) -> Option<&Arc<dyn NonSmoothTerm>> {
        self.u2.as_ref()
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        self.u1.value(x) + self.u2.as_ref().map_or(0.0, |t| t.value(x))
    }

    pub fn smooth_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        self.u1.grad(x)
    }

    pub fn subgrad(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.u2 {
            Some(t) => self.u1.grad(x) + t.subgrad(x),
            None => self.u1.grad(x),
        }
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<Evaluation> {
        check_dim(self.dim(), x.len())?;
        let smooth_grad = self.u1.grad(x);
        let sub_grad = match &self.u2 {
            Some(t) => &smooth_grad + t.subgrad(x),
            None => smooth_grad.clone(),
        };
        Ok(Evaluation { value: self.value(x), smooth_grad, sub_grad })
    }

    /// Prox of U₂ alone; identity when U₂ is absent.
    pub fn prox(&self, gamma: f64, x: &DVector<f64>) -> DVector<f64> {
        match &self.u2 {
            Some(t) => t.prox(gamma, x),
            None => x.clone(),
        }
    }

    pub fn strong_convexity(&self) -> f64 {
        self.u1.strong_convexity()
    }

    pub fn smoothness(&self) -> f64 {
        self.u1.smoothness()
    }

    pub fn nonsmooth_lipschitz(&self) -> f64 {
        self.u2.as_ref().map_or(0.0, |t| t.lipschitz())
    }

    pub fn lipschitz(&self) -> Option<f64> {
        self.lipschitz
    }

    pub fn minimizer(&self) -> Option<&DVector<f64>> {
        self.x_star.as_ref()
    }

    /// Deterministic proximal gradient descent to the given tolerance on the
    /// prox-gradient residual ‖x − prox_γ(x − γ∇U₁(x))‖/γ.
    pub fn minimize(&self, x0: &DVector<f64>, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
        check_dim(self.dim(), x0.len())?;
        let l = self.smoothness();
        let gamma = if l > 0.0 { 1.0 / l } else { 1.0 };
        let mut x = x0.clone();
        for _ in 0..max_iter {
            let next = self.prox(gamma, &(&x - self.u1.grad(&x) * gamma));
            let residual = (&x - &next).norm() / gamma;
            x = next;
            if residual <= tol {
                return Ok(x);
            }
        }
        Err(Error::Tuning(format!(
            "proximal descent did not reach tolerance {tol:.1e} in {max_iter} iterations"
        )))
    }
}

/// Labeled design matrix, before or after standardization.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: DVector<f64>,
    pub features: Vec<String>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: DVector<f64>, features: Vec<String>) -> Result<Self> {
        check_dim(x.ncols(), features.len())?;
        check_dim(x.nrows(), y.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite covariate".into()));
        }
        if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
            return Err(Error::Data("labels must be 0 or 1".into()));
        }
        Ok(Dataset { x, y, features })
    }

    pub fn n_rows(&self) -> usize {
        self.x.nrows()
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    /// Center and scale every column to unit sample variance. Constant
    /// columns (the intercept) are left alone.
    pub fn standardize(&mut self) {
        let n = self.x.nrows() as f64;
        if n < 2.0 {
            return;
        }
        for j in 0..self.x.ncols() {
            let mut col = self.x.column_mut(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
            if var <= 1e-24 {
                continue;
            }
            let sd = var.sqrt();
            col.iter_mut().for_each(|v| *v = (*v - mean) / sd);
        }
    }

    pub fn add_intercept(&mut self) {
        let n = self.x.nrows();
        self.x = DMatrix::from_fn(n, self.x.ncols() + 1, |i, j| {
            if j == self.x.ncols() {
                1.0
            } else {
                self.x[(i, j)]
            }
        });
        self.features.push("intercept".into());
    }

    pub fn into_model(self, a1: f64, a2: f64) -> Result<LogisticModel> {
        LogisticModel::new(self.x, self.y, a1, a2)
    }
}
