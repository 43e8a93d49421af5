//! Gaussian verification suite: exact chain laws against the bound
//! calculators, emitted as per-case CSV reports.
//!
//! Every row compares two exact quantities with the theorem values that must
//! dominate them: the W₂ distance of the k-step law against the contraction
//! recursion, and the step-weighted average of KL(μ_j‖π) against the averaged
//! free-energy bound. `margin` is the smaller of the two slacks; a healthy
//! suite never goes below −1e-9.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::analytics::{kl_divergence, ula_transition, w2_distance, w2_squared, GaussianLaw};
use crate::model::{Quadratic, SmoothPotential};
use crate::Result;

use super::write_atomic;

/// One target/step-size instance of the suite.
#[derive(Clone, Debug)]
pub struct ValidationCase {
    pub name: String,
    pub h_diag: Vec<f64>,
    pub gamma: f64,
    pub steps: usize,
    /// μ₀ is a point mass at this multiple of the all-ones vector.
    pub x0_offset: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ValidationRow {
    pub gamma: f64,
    pub k: usize,
    pub w2_exact: f64,
    pub w2_bound: f64,
    pub kl_exact: f64,
    pub kl_bound: f64,
    pub margin: f64,
}

/// The default grid: isotropic and anisotropic diagonal targets across three
/// step sizes, all within the γ ≤ 1/L regime.
pub fn validation_suite() -> Vec<ValidationCase> {
    let targets: Vec<(&str, Vec<f64>)> = vec![
        ("iso_d1", vec![1.0]),
        ("aniso_d2", vec![1.0, 4.0]),
        ("grid_d5", vec![0.5, 1.0, 2.0, 4.0, 8.0]),
    ];
    let gammas = [1e-3, 1e-2, 1e-1];
    let mut cases = Vec::new();
    for (name, diag) in &targets {
        for &gamma in &gammas {
            cases.push(ValidationCase {
                name: format!("{name}_g{gamma}"),
                h_diag: diag.clone(),
                gamma,
                steps: 200,
                x0_offset: 1.0,
            });
        }
    }
    cases
}

impl ValidationCase {
    pub fn run(&self) -> Result<Vec<ValidationRow>> {
        let d = self.h_diag.len();
        let h = Quadratic::new(DMatrix::from_diagonal(&DVector::from_vec(self.h_diag.clone())))?;
        let (m, l) = (h.strong_convexity(), h.smoothness());
        let pi = GaussianLaw::target_of(&h)?;
        let mu0 = GaussianLaw::point(DVector::from_element(d, self.x0_offset));
        let w0_sq = w2_squared(&mu0, &pi);
        let gamma = self.gamma;

        let mut rows = Vec::with_capacity(self.steps);
        let mut mu = mu0;
        let mut contraction = w0_sq;
        let mut kl_weighted = 0.0;
        let mut gamma_total = 0.0;
        let mut gamma_sq_total = 0.0;
        for k in 1..=self.steps {
            mu = ula_transition(&h, gamma, &mu)?;
            contraction = (1.0 - m * gamma) * contraction + 2.0 * l * d as f64 * gamma * gamma;
            kl_weighted += gamma * kl_divergence(&mu, &pi)?;
            gamma_total += gamma;
            gamma_sq_total += gamma * gamma;

            let w2_exact = w2_distance(&mu, &pi);
            let w2_bound = contraction.max(0.0).sqrt();
            let kl_exact = kl_weighted / gamma_total;
            let kl_bound =
                w0_sq / (2.0 * gamma_total) + l * d as f64 * gamma_sq_total / gamma_total;
            rows.push(ValidationRow {
                gamma,
                k,
                w2_exact,
                w2_bound,
                kl_exact,
                kl_bound,
                margin: (w2_bound - w2_exact).min(kl_bound - kl_exact),
            });
        }
        Ok(rows)
    }
}

/// `gamma,k,w2_exact,w2_bound,kl_exact,kl_bound,margin`
pub fn write_validation_csv(path: &Path, rows: &[ValidationRow]) -> Result<()> {
    let mut text = String::from("gamma,k,w2_exact,w2_bound,kl_exact,kl_bound,margin\n");
    for r in rows {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.gamma, r.k, r.w2_exact, r.w2_bound, r.kl_exact, r.kl_bound, r.margin
        ));
    }
    write_atomic(path, text.as_bytes())
}
