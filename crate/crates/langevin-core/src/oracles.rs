//! Stochastic (sub)gradient estimators and the reproducible random stream.
//!
//! The random stream is fully specified so that traces are portable:
//! ChaCha12 keyed by `seed` with the 64-bit stream counter selecting
//! independent streams; uniforms take the top 53 bits of one `u64` draw;
//! normals come from the Marsaglia polar rejection method (two uniforms per
//! attempt, both outputs kept); uniform integers use modulo rejection.
//! No ziggurat tables, no inverse-CDF approximation, no trigonometric
//! transform — every draw is a few lines of arithmetic on ChaCha output.

use std::sync::Arc;

use nalgebra::DVector;
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::model::{sign0, CompositePotential, LogisticModel, SmoothPotential};
use crate::{check_dim, Error, Result};

const ENUMERATION_CAP: u64 = 1_000_000;

/// Seeded, splittable random stream. Identical `(seed, stream)` reproduce
/// identical draw sequences; distinct streams are independent by the ChaCha
/// stream construction.
#[derive(Clone, Debug)]
pub struct RngStream {
    rng: ChaCha12Rng,
    seed: u64,
    stream: u64,
    spare: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RngStream { rng, seed, stream, spare: None }
    }

    /// Fresh stream with the same seed; used to fan out replications.
    pub fn substream(&self, stream: u64) -> Self {
        RngStream::new(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform on [0,1), 53-bit mantissa.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Uniform integer in [0, n), modulo rejection (unbiased).
    pub fn below(&mut self, n: usize) -> usize {
        assert!(n > 0, "below(0)");
        let bound = n as u64;
        let spill = (u64::MAX % bound).wrapping_add(1) % bound; // 2^64 mod bound
        loop {
            let r = self.rng.next_u64();
            if spill == 0 || r <= u64::MAX - spill {
                return (r % bound) as usize;
            }
        }
    }

    /// Standard normal via the polar rejection method: draw (u,v) uniform on
    /// (−1,1)², accept when s = u²+v² ∈ (0,1), return u√(−2 ln s / s) and
    /// keep the v-companion for the next call.
    pub fn standard_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let f = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * f);
                return u * f;
            }
        }
    }

    pub fn normal_vector(&mut self, dim: usize) -> DVector<f64> {
        DVector::from_fn(dim, |_, _| self.standard_normal())
    }

    /// First `take` entries of a uniformly random permutation of 0..n
    /// (partial Fisher–Yates).
    pub fn subset(&mut self, n: usize, take: usize) -> Vec<usize> {
        debug_assert!(take <= n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..take {
            let j = i + self.below(n - i);
            idx.swap(i, j);
        }
        idx.truncate(take);
        idx
    }
}

/// Anything a chain can use as its drift term.
pub trait GradientEstimator: Send + Sync {
    fn dim(&self) -> usize;
    fn draw(&self, x: &DVector<f64>, rng: &mut RngStream) -> DVector<f64>;
    /// Fraction of one full pass over the data consumed per draw.
    fn pass_fraction(&self) -> f64 {
        1.0
    }
}

/// Deterministic `∇U₁`; consumes no randomness.
pub struct FullGradient(pub Arc<dyn SmoothPotential>);

impl GradientEstimator for FullGradient {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn draw(&self, x: &DVector<f64>, _rng: &mut RngStream) -> DVector<f64> {
        self.0.grad(x)
    }
}

/// Deterministic element of `∂U = ∇U₁ + ∂U₂`; consumes no randomness.
pub struct FullSubgradient(pub Arc<CompositePotential>);

impl GradientEstimator for FullSubgradient {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn draw(&self, x: &DVector<f64>, _rng: &mut RngStream) -> DVector<f64> {
        self.0.subgrad(x)
    }
}

/// Which part of the potential the minibatch estimator targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMode {
    /// Unbiased for the smooth part only: `(N/Ñ) Σ_{n∈Z} ∇ℓ_n(β) + 2a₂β`.
    SmoothPart,
    /// Unbiased for the whole subdifferential:
    /// `(N/Ñ) Σ_{n∈Z} ∇ℓ_n(β) + 2a₂β + a₁ sign(β)`.
    FullSubgradient,
}

/// Minibatch estimator over the data terms of a logistic model: a uniform
/// size-Ñ subset of rows drawn without replacement, scaled by N/Ñ, plus the
/// (deterministic) prior gradient.
pub struct MinibatchOracle {
    model: Arc<LogisticModel>,
    batch: usize,
    mode: OracleMode,
}

/// Monte-Carlo variance estimate with its standard error.
#[derive(Clone, Copy, Debug)]
pub struct VarianceEstimate {
    pub estimate: f64,
    pub std_error: f64,
}

impl MinibatchOracle {
    pub fn new(model: Arc<LogisticModel>, batch: usize, mode: OracleMode) -> Result<Self> {
        let n = model.n_rows();
        if batch == 0 || batch > n {
            return Err(Error::invalid(format!("batch size {batch} not in 1..={n}")));
        }
        Ok(MinibatchOracle { model, batch, mode })
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    pub fn mode(&self) -> OracleMode {
        self.mode
    }

    fn prior_part(&self, beta: &DVector<f64>) -> DVector<f64> {
        let (a1, a2) = self.model.prior_scales();
        let mut g = beta * (2.0 * a2);
        if self.mode == OracleMode::FullSubgradient && a1 > 0.0 {
            g += beta.map(|v| a1 * sign0(v));
        }
        g
    }

    fn subset_estimate(&self, rows: &[usize], beta: &DVector<f64>) -> DVector<f64> {
        let scale = self.model.n_rows() as f64 / self.batch as f64;
        let mut g = DVector::zeros(beta.len());
        for &n in rows {
            self.model.add_row_grad(n, beta, &mut g);
        }
        g *= scale;
        g += self.prior_part(beta);
        g
    }

    /// One oracle realization; Ñ = N short-circuits subsampling and consumes
    /// no randomness.
    pub fn draw_at(&self, beta: &DVector<f64>, rng: &mut RngStream) -> Result<DVector<f64>> {
        check_dim(self.model.dim(), beta.len())?;
        let n = self.model.n_rows();
        if self.batch == n {
            // full batch: exact gradient, no randomness consumed
            let mut g = self.model.grad(beta);
            let (a1, _) = self.model.prior_scales();
            if self.mode == OracleMode::FullSubgradient && a1 > 0.0 {
                g += beta.map(|v| a1 * sign0(v));
            }
            return Ok(g);
        }
        let rows = rng.subset(n, self.batch);
        Ok(self.subset_estimate(&rows, beta))
    }

    /// Exact mean over all C(N,Ñ) subsets — the unbiasedness oracle.
    pub fn mean_bruteforce(&self, beta: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(self.model.dim(), beta.len())?;
        let mut mean = DVector::zeros(beta.len());
        let mut count = 0u64;
        for_each_combination(self.model.n_rows(), self.batch, |rows| {
            mean += self.subset_estimate(rows, beta);
            count += 1;
        })?;
        Ok(mean / count as f64)
    }

    /// Exact `υ(δ_β) = E‖Θ(β,Z) − EΘ(β,·)‖²` by enumeration.
    pub fn variance_bruteforce(&self, beta: &DVector<f64>) -> Result<f64> {
        let mean = self.mean_bruteforce(beta)?;
        let mut acc = 0.0;
        let mut count = 0u64;
        for_each_combination(self.model.n_rows(), self.batch, |rows| {
            acc += (self.subset_estimate(rows, beta) - &mean).norm_squared();
            count += 1;
        })?;
        Ok(acc / count as f64)
    }

    /// Monte-Carlo `υ(δ_β)` with standard error.
    pub fn variance_at(
        &self,
        beta: &DVector<f64>,
        n_samples: usize,
        rng: &mut RngStream,
    ) -> Result<VarianceEstimate> {
        if n_samples < 2 {
            return Err(Error::invalid("variance estimation needs n_samples >= 2"));
        }
        check_dim(self.model.dim(), beta.len())?;
        let draws: Vec<DVector<f64>> =
            (0..n_samples).map(|_| self.draw_at(beta, rng)).collect::<Result<_>>()?;
        let mut mean = DVector::zeros(beta.len());
        for d in &draws {
            mean += d;
        }
        mean /= n_samples as f64;
        let sq: Vec<f64> = draws.iter().map(|d| (d - &mean).norm_squared()).collect();
        let n = n_samples as f64;
        let estimate = sq.iter().sum::<f64>() / (n - 1.0);
        let sq_mean = sq.iter().sum::<f64>() / n;
        let sq_var = sq.iter().map(|v| (v - sq_mean) * (v - sq_mean)).sum::<f64>() / (n - 1.0);
        Ok(VarianceEstimate { estimate, std_error: (sq_var / n).sqrt() })
    }

    /// Cocoercivity constant of the smooth-part oracle: the worst minibatch
    /// dominates, so `L̃ = (N/Ñ)·(1/4)·(sum of the Ñ largest ‖X_n‖²) + 2a₂`.
    pub fn cocoercivity_constant(&self) -> f64 {
        let mut norms: Vec<f64> =
            self.model.row_norms_squared();
        norms.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let top: f64 = norms[..self.batch].iter().sum();
        let (_, a2) = self.model.prior_scales();
        (self.model.n_rows() as f64 / self.batch as f64) * 0.25 * top + 2.0 * a2
    }
}

impl GradientEstimator for MinibatchOracle {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn draw(&self, x: &DVector<f64>, rng: &mut RngStream) -> DVector<f64> {
        // dimension is checked at chain start; steps stay on the hot path
        self.draw_at(x, rng).expect("oracle dimension checked at start")
    }

    fn pass_fraction(&self) -> f64 {
        self.batch as f64 / self.model.n_rows() as f64
    }
}

fn binomial(n: usize, k: usize) -> Option<u64> {
    let k = k.min(n - k);
    let mut c = 1u64;
    for i in 0..k {
        c = c.checked_mul((n - i) as u64)?;
        c /= (i + 1) as u64;
    }
    Some(c)
}

/// Lexicographic enumeration of all size-k subsets of 0..n, guarded against
/// combinatorial blow-up.
fn for_each_combination(n: usize, k: usize, mut f: impl FnMut(&[usize])) -> Result<()> {
    match binomial(n, k) {
        Some(c) if c <= ENUMERATION_CAP => {}
        _ => return Err(Error::Enumeration { n, k, cap: ENUMERATION_CAP }),
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn stream_reproducible_and_split() {
        let mut a = RngStream::new(7, 0);
        let mut b = RngStream::new(7, 0);
        let seq_a: Vec<f64> = (0..32).map(|_| a.standard_normal()).collect();
        let seq_b: Vec<f64> = (0..32).map(|_| b.standard_normal()).collect();
        assert_eq!(seq_a, seq_b);
        let mut c = RngStream::new(7, 1);
        let seq_c: Vec<f64> = (0..32).map(|_| c.standard_normal()).collect();
        assert_ne!(seq_a, seq_c);
    }

    #[test]
    fn below_is_in_range() {
        let mut r = RngStream::new(1, 0);
        for n in [1usize, 2, 3, 7, 270] {
            for _ in 0..200 {
                assert!(r.below(n) < n);
            }
        }
    }

    #[test]
    fn subset_has_distinct_entries() {
        let mut r = RngStream::new(3, 0);
        for _ in 0..100 {
            let mut s = r.subset(10, 4);
            s.sort_unstable();
            s.dedup();
            assert_eq!(s.len(), 4);
        }
    }

    #[test]
    fn combination_count_matches_binomial() {
        let mut count = 0u64;
        for_each_combination(6, 2, |_| count += 1).unwrap();
        assert_eq!(count, 15);
        assert!(for_each_combination(40, 20, |_| {}).is_err());
    }

    #[test]
    fn full_batch_draw_is_deterministic() {
        let x = DMatrix::from_row_slice(3, 2, &[1.0, 0.5, -0.3, 0.2, 0.0, 1.0]);
        let y = DVector::from_vec(vec![1.0, 0.0, 1.0]);
        let model = Arc::new(LogisticModel::new(x, y, 0.9, 0.1).unwrap());
        let oracle = MinibatchOracle::new(model.clone(), 3, OracleMode::SmoothPart).unwrap();
        let beta = DVector::from_vec(vec![0.4, -1.2]);
        let mut r1 = RngStream::new(5, 0);
        let mut r2 = RngStream::new(99, 3);
        let d1 = oracle.draw_at(&beta, &mut r1).unwrap();
        let d2 = oracle.draw_at(&beta, &mut r2).unwrap();
        assert_eq!(d1, d2);
        let full = model.grad(&beta);
        assert!((d1 - full).norm() < 1e-12);
    }
}
