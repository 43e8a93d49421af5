//! Prox-MALA reference estimates with on-disk caching.
//!
//! The reference sampler is exact-invariant, so with a large budget its
//! posterior-mean estimates serve as ground truth for the error tables. Runs
//! are cached by dataset fingerprint so a grid of experiment cells shares one
//! reference computation.

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::model::{CompositePotential, Dataset};
use crate::oracles::RngStream;
use crate::samplers::{prox_mala_step, tune_prox_mala, ChainState};
use crate::{Error, Result};

use super::config::logistic_potential;
use super::write_atomic;

/// Smallest budget that still yields usable batch-means errors.
pub const MIN_REFERENCE_BUDGET: usize = 100_000;

const BATCHES: usize = 100;

/// Cached posterior-mean reference: I₁ = E[β₁], I₂ = E[(1/d)Σβᵢ²].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReferenceRun {
    pub fingerprint: String,
    pub a1: f64,
    pub a2: f64,
    pub budget: usize,
    pub seed: u64,
    /// Tuned prox-MALA step size.
    pub gamma: f64,
    pub accept_rate: f64,
    pub i1: f64,
    pub i2: f64,
    pub se1: f64,
    pub se2: f64,
    /// Unix seconds at cache creation.
    pub created: u64,
}

/// FNV-1a over the dataset's dimensions and entries in storage order.
/// Identical bytes give identical fingerprints across runs and platforms.
pub fn dataset_fingerprint(dataset: &Dataset) -> String {
    const OFFSET: u64 = 0xcbf29ce484222325;
    const PRIME: u64 = 0x100000001b3;
    let mut h = OFFSET;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= *b as u64;
            h = h.wrapping_mul(PRIME);
        }
    };
    eat(&(dataset.n_rows() as u64).to_le_bytes());
    eat(&(dataset.dim() as u64).to_le_bytes());
    for v in dataset.x.iter() {
        eat(&v.to_le_bytes());
    }
    for v in dataset.y.iter() {
        eat(&v.to_le_bytes());
    }
    format!("{h:016x}")
}

/// Point estimates with batch-means standard errors from one tuned chain.
#[derive(Clone, Debug)]
pub struct ReferenceEstimates {
    pub gamma: f64,
    pub accept_rate: f64,
    pub i1: f64,
    pub i2: f64,
    pub se1: f64,
    pub se2: f64,
}

/// Tune prox-MALA to acceptance 0.5 ± 0.05, then run `budget` steps from the
/// warm point, discard the first fifth, and report batch-means estimates.
pub fn reference_estimates(
    p: &Arc<CompositePotential>,
    budget: usize,
    seed: u64,
) -> Result<ReferenceEstimates> {
    if budget < MIN_REFERENCE_BUDGET {
        return Err(Error::invalid(format!(
            "reference budget {budget} below the minimum {MIN_REFERENCE_BUDGET}"
        )));
    }
    let dim = p.dim();
    let (m, l) = (p.strong_convexity(), p.smoothness());
    let gamma0 = if l + m > 0.0 { 1.0 / (l + m) } else { 1.0 };
    let x0 = DVector::zeros(dim);
    let (gamma, warm, _) = tune_prox_mala(p, &x0, gamma0, seed, 0)?;

    let mut state = ChainState::new(warm, RngStream::new(seed, 1), 0);
    let burn = budget / 5;
    let kept = budget - burn;
    let batch_len = kept / BATCHES; // trailing remainder is dropped

    let mut accepted = 0usize;
    let mut b1 = [0.0f64; BATCHES];
    let mut b2 = [0.0f64; BATCHES];
    for k in 0..budget {
        if prox_mala_step(p, &mut state, gamma)? {
            accepted += 1;
        }
        if k >= burn {
            let b = (k - burn) / batch_len;
            if b < BATCHES {
                b1[b] += state.x[0];
                b2[b] += state.x.norm_squared() / dim as f64;
            }
        }
    }
    let scale = 1.0 / batch_len as f64;
    let (i1, se1) = batch_stats(&mut b1, scale);
    let (i2, se2) = batch_stats(&mut b2, scale);
    Ok(ReferenceEstimates {
        gamma,
        accept_rate: accepted as f64 / budget as f64,
        i1,
        i2,
        se1,
        se2,
    })
}

fn batch_stats(sums: &mut [f64; BATCHES], scale: f64) -> (f64, f64) {
    let n = BATCHES as f64;
    for s in sums.iter_mut() {
        *s *= scale;
    }
    let mean = sums.iter().sum::<f64>() / n;
    let var = sums.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn cache_path(dir: &Path, fp: &str, a1: f64, a2: f64, budget: usize, seed: u64) -> PathBuf {
    dir.join(format!("ref-{fp}-a1_{a1}-a2_{a2}-b{budget}-s{seed}.json"))
}

/// Reference for a logistic posterior, cached under `cache_dir` when given.
/// A second call with the same inputs reads the cache instead of recomputing.
pub fn reference_run(
    dataset: &Dataset,
    prior: (f64, f64),
    budget: usize,
    seed: u64,
    cache_dir: Option<&Path>,
) -> Result<ReferenceRun> {
    let (a1, a2) = prior;
    let fp = dataset_fingerprint(dataset);
    if let Some(dir) = cache_dir {
        let path = cache_path(dir, &fp, a1, a2, budget, seed);
        if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            let cached: ReferenceRun = serde_json::from_str(&text)
                .map_err(|e| Error::Data(format!("corrupt reference cache {}: {e}", path.display())))?;
            if cached.fingerprint == fp {
                return Ok(cached);
            }
        }
    }

    let model = Arc::new(dataset.clone().into_model(a1, a2)?);
    let p = Arc::new(logistic_potential(&model)?);
    let est = reference_estimates(&p, budget, seed)?;
    let run = ReferenceRun {
        fingerprint: fp,
        a1,
        a2,
        budget,
        seed,
        gamma: est.gamma,
        accept_rate: est.accept_rate,
        i1: est.i1,
        i2: est.i2,
        se1: est.se1,
        se2: est.se2,
        created: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
    };
    if let Some(dir) = cache_dir {
        let path = cache_path(dir, &run.fingerprint, a1, a2, budget, seed);
        let text = serde_json::to_string_pretty(&run).expect("reference serializes");
        write_atomic(&path, text.as_bytes())?;
    }
    Ok(run)
}
