//! The logistic-regression error-table experiment: a grid over samplers,
//! step-size factors τ (γ = τ/(L+m)), and minibatch divisors, replicated R
//! times against a cached prox-MALA reference.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::model::{Dataset, LogisticModel, SmoothPotential};
use crate::samplers::{run_chain, Functional, RunConfig, SamplerKind};
use crate::schedules::StepPlan;
use crate::{Error, Result};

use super::config::{logistic_potential, minibatch_oracle, BenchmarkConfig};
use super::reference::{reference_run, ReferenceRun};
use super::svg::{box_plot, line_plot, Series};
use super::write_atomic;

/// Fully resolved benchmark inputs.
#[derive(Clone, Debug)]
pub struct BenchmarkSpec {
    pub dataset: Dataset,
    pub a1: f64,
    pub a2: f64,
    pub samplers: Vec<SamplerKind>,
    pub taus: Vec<f64>,
    pub batch_divisors: Vec<usize>,
    pub replications: usize,
    pub iterations: usize,
    pub seed: u64,
    pub burn_in: usize,
    pub reference_budget: usize,
    pub reference_seed: u64,
    pub cache_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub emit_svg: bool,
}

impl BenchmarkSpec {
    /// `base` resolves the dataset path; cache paths resolve against
    /// `out_dir`.
    pub fn from_config(cfg: &BenchmarkConfig, base: &Path, out_dir: &Path) -> Result<Self> {
        let dataset = cfg.dataset.load(base)?;
        let (a1, a2) = cfg.experiment.prior.scales()?;
        let mut samplers = Vec::new();
        for name in &cfg.experiment.samplers {
            samplers.push(SamplerKind::from_str(name)?);
        }
        let cache_dir = cfg.reference.cache.as_ref().map(|c| {
            if c.is_absolute() {
                c.clone()
            } else {
                out_dir.join(c)
            }
        });
        let spec = BenchmarkSpec {
            dataset,
            a1,
            a2,
            samplers,
            taus: cfg.experiment.taus.clone(),
            batch_divisors: cfg.experiment.batch_divisors.clone(),
            replications: cfg.experiment.replications,
            iterations: cfg.experiment.iterations,
            seed: cfg.experiment.seed,
            burn_in: cfg.experiment.burn_in,
            reference_budget: cfg.reference.budget,
            reference_seed: cfg.reference.seed,
            cache_dir: Some(cache_dir.unwrap_or_else(|| out_dir.join("refcache"))),
            out_dir: out_dir.to_path_buf(),
            emit_svg: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.samplers.is_empty() {
            return Err(Error::Config("no samplers requested".into()));
        }
        if self.taus.is_empty() || self.taus.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::Config("taus must be positive".into()));
        }
        if self.batch_divisors.is_empty() || self.batch_divisors.contains(&0) {
            return Err(Error::Config("batch divisors must be >= 1".into()));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be >= 1".into()));
        }
        if self.iterations <= self.burn_in.max(9) {
            return Err(Error::Config("iterations must exceed burn-in (and be >= 10)".into()));
        }
        Ok(())
    }
}

/// Error curve of one replication at one grid cell.
#[derive(Clone, Debug, Serialize)]
pub struct CellResult {
    pub sampler: String,
    pub tau: f64,
    pub divisor: usize,
    pub replication: usize,
    pub gamma: f64,
    pub batch: usize,
    /// "ok" or the per-cell failure (divergence is reported, not fatal).
    pub status: String,
    pub curve: Vec<CurvePoint>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvePoint {
    pub k: usize,
    pub effective_passes: f64,
    pub err1: f64,
    pub err2: f64,
}

/// Mean absolute error across the replications that finished.
#[derive(Clone, Debug, Serialize)]
pub struct AggregateRow {
    pub sampler: String,
    pub tau: f64,
    pub divisor: usize,
    pub k: usize,
    pub effective_passes: f64,
    pub mae1: f64,
    pub se1: f64,
    pub mae2: f64,
    pub se2: f64,
    pub replications: usize,
}

/// One asserted qualitative property of the error table.
#[derive(Clone, Debug, Serialize)]
pub struct Finding {
    pub name: String,
    pub sampler: String,
    pub lhs: f64,
    pub rhs: f64,
    pub two_se: f64,
    pub pass: bool,
    pub detail: String,
}

#[derive(Clone, Debug)]
pub struct BenchmarkOutput {
    pub reference: ReferenceRun,
    pub checkpoints: Vec<usize>,
    pub cells: Vec<CellResult>,
    pub aggregate: Vec<AggregateRow>,
    pub findings: Vec<Finding>,
}

/// Geometric checkpoint ladder from ~iterations/1000 up to the final
/// iteration, always containing iterations/10 and iterations.
fn checkpoint_ladder(iterations: usize, burn_in: usize) -> Vec<usize> {
    let lo = (iterations / 1000).max(1) as f64;
    let hi = iterations as f64;
    let steps = 24;
    let mut ks: Vec<usize> = (0..=steps)
        .map(|i| {
            let t = i as f64 / steps as f64;
            (lo.powf(1.0 - t) * hi.powf(t)).round() as usize
        })
        .collect();
    ks.push((iterations / 10).max(1));
    ks.push(iterations);
    ks.retain(|k| *k > burn_in && *k <= iterations);
    ks.sort_unstable();
    ks.dedup();
    ks
}

fn run_cell(
    spec: &BenchmarkSpec,
    model: &Arc<LogisticModel>,
    reference: &ReferenceRun,
    checkpoints: &[usize],
    sampler: SamplerKind,
    tau: f64,
    divisor: usize,
    replication: usize,
    stream: u64,
) -> CellResult {
    let (m, l, _) = model.constants();
    let gamma = tau / (l + m);
    let batch = (model.n_rows() / divisor).max(1);
    let mut cell = CellResult {
        sampler: sampler.name().to_string(),
        tau,
        divisor,
        replication,
        gamma,
        batch,
        status: "ok".to_string(),
        curve: Vec::new(),
    };

    let attempt = || -> Result<Vec<CurvePoint>> {
        let plan = StepPlan::constant(gamma)?.with_burn_in(spec.burn_in);
        let potential = Arc::new(logistic_potential(model)?);
        let oracle = match sampler {
            SamplerKind::Ssgld | SamplerKind::Spgld => {
                Some(minibatch_oracle(sampler, model, divisor)?)
            }
            _ => None,
        };
        let mut rc = RunConfig::new(
            sampler,
            plan,
            spec.iterations - spec.burn_in,
            spec.seed,
            DVector::zeros(model.dim()),
        );
        rc.stream = stream;
        rc.functionals = vec![Functional::first_coordinate(), Functional::mean_square()];
        rc.checkpoints = checkpoints.to_vec();
        let out = run_chain(&rc, potential, oracle)?;
        let pass_fraction = batch as f64 / model.n_rows() as f64;
        Ok(out
            .checkpoints
            .iter()
            .map(|cp| CurvePoint {
                k: cp.k,
                effective_passes: cp.k as f64 * pass_fraction,
                err1: (cp.estimates[0].estimate - reference.i1).abs(),
                err2: (cp.estimates[1].estimate - reference.i2).abs(),
            })
            .collect())
    };
    match attempt() {
        Ok(curve) => cell.curve = curve,
        Err(e) => cell.status = e.to_string().replace([',', '\n'], ";"),
    }
    cell
}

fn aggregate_cells(cells: &[CellResult], checkpoints: &[usize]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    let mut seen: Vec<(String, f64, usize)> = Vec::new();
    for c in cells {
        let key = (c.sampler.clone(), c.tau, c.divisor);
        if !seen.contains(&key) {
            seen.push(key);
        }
    }
    for (sampler, tau, divisor) in seen {
        for (i, &k) in checkpoints.iter().enumerate() {
            let mut e1 = Vec::new();
            let mut e2 = Vec::new();
            let mut passes = 0.0;
            for c in cells {
                if c.sampler == sampler && c.tau == tau && c.divisor == divisor && c.status == "ok"
                {
                    let pt = &c.curve[i];
                    debug_assert_eq!(pt.k, k);
                    e1.push(pt.err1);
                    e2.push(pt.err2);
                    passes = pt.effective_passes;
                }
            }
            if e1.is_empty() {
                continue;
            }
            let (mae1, se1) = mean_se(&e1);
            let (mae2, se2) = mean_se(&e2);
            rows.push(AggregateRow {
                sampler: sampler.clone(),
                tau,
                divisor,
                k,
                effective_passes: passes,
                mae1,
                se1,
                mae2,
                se2,
                replications: e1.len(),
            });
        }
    }
    rows
}

fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn find_row<'a>(
    rows: &'a [AggregateRow],
    sampler: &str,
    tau: f64,
    divisor: usize,
    k: usize,
) -> Option<&'a AggregateRow> {
    rows.iter().find(|r| r.sampler == sampler && r.tau == tau && r.divisor == divisor && r.k == k)
}

fn comparison(
    name: &str,
    sampler: &str,
    lhs: Option<&AggregateRow>,
    rhs: Option<&AggregateRow>,
    detail: String,
) -> Finding {
    match (lhs, rhs) {
        (Some(a), Some(b)) if a.replications >= 2 && b.replications >= 2 => {
            let two_se = 2.0 * (a.se2 * a.se2 + b.se2 * b.se2).sqrt();
            Finding {
                name: name.to_string(),
                sampler: sampler.to_string(),
                lhs: a.mae2,
                rhs: b.mae2,
                two_se,
                pass: a.mae2 <= b.mae2 + two_se,
                detail,
            }
        }
        _ => Finding {
            name: name.to_string(),
            sampler: sampler.to_string(),
            lhs: f64::NAN,
            rhs: f64::NAN,
            two_se: f64::NAN,
            pass: false,
            detail: format!("{detail}; insufficient completed replications"),
        },
    }
}

/// The qualitative assertions on the I₂ error table: small-γ bias no worse at
/// the end, large-γ ahead early, and minibatching ahead at matched effective
/// passes.
fn build_findings(spec: &BenchmarkSpec, rows: &[AggregateRow], checkpoints: &[usize]) -> Vec<Finding> {
    let mut findings = Vec::new();
    let k_final = *checkpoints.last().expect("nonempty ladder");
    let k_early = (spec.iterations / 10).max(1);
    let mut taus = spec.taus.clone();
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (tau_small, tau_large) = (taus[0], taus[taus.len() - 1]);
    let tau_mid = taus[taus.len() / 2];

    for sampler in &spec.samplers {
        let s = sampler.name();
        if taus.len() >= 2 && spec.batch_divisors.contains(&1) {
            findings.push(comparison(
                "final_error_small_step",
                s,
                find_row(rows, s, tau_small, 1, k_final),
                find_row(rows, s, tau_large, 1, k_final),
                format!(
                    "final I2 error at tau={tau_small} should not exceed tau={tau_large} by more than 2 SE (divisor 1, k={k_final})"
                ),
            ));
            findings.push(comparison(
                "early_error_large_step",
                s,
                find_row(rows, s, tau_large, 1, k_early),
                find_row(rows, s, tau_small, 1, k_early),
                format!(
                    "early I2 error at tau={tau_large} should not exceed tau={tau_small} by more than 2 SE (divisor 1, k={k_early})"
                ),
            ));
        }
        if spec.batch_divisors.contains(&1) && spec.batch_divisors.contains(&10) {
            findings.push(comparison(
                "matched_passes_minibatch",
                s,
                find_row(rows, s, tau_mid, 10, k_final),
                find_row(rows, s, tau_mid, 1, k_early),
                format!(
                    "at matched effective passes, I2 error with divisor 10 (k={k_final}) should not exceed divisor 1 (k={k_early}) by more than 2 SE (tau={tau_mid})"
                ),
            ));
        }
    }
    findings
}

/// Run the full grid, write the error tables, findings, metadata, and plots
/// under `spec.out_dir`, and return everything in memory as well.
///
/// Identical spec (including seed) gives byte-identical CSV output.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<BenchmarkOutput> {
    spec.validate()?;
    let model = Arc::new(spec.dataset.clone().into_model(spec.a1, spec.a2)?);
    let reference = reference_run(
        &spec.dataset,
        (spec.a1, spec.a2),
        spec.reference_budget,
        spec.reference_seed,
        spec.cache_dir.as_deref(),
    )?;
    let checkpoints = checkpoint_ladder(spec.iterations, spec.burn_in);

    struct Job {
        sampler: SamplerKind,
        tau: f64,
        divisor: usize,
        replication: usize,
        stream: u64,
    }
    let mut jobs = Vec::new();
    for &sampler in &spec.samplers {
        for &tau in &spec.taus {
            for &divisor in &spec.batch_divisors {
                for replication in 0..spec.replications {
                    // streams 0 and 1 belong to the reference chain
                    let stream = jobs.len() as u64 + 2;
                    jobs.push(Job { sampler, tau, divisor, replication, stream });
                }
            }
        }
    }

    let cells: Vec<CellResult> = jobs
        .par_iter()
        .map(|j| {
            run_cell(
                spec,
                &model,
                &reference,
                &checkpoints,
                j.sampler,
                j.tau,
                j.divisor,
                j.replication,
                j.stream,
            )
        })
        .collect();

    let aggregate = aggregate_cells(&cells, &checkpoints);
    let findings = build_findings(spec, &aggregate, &checkpoints);

    write_outputs(spec, &model, &reference, &checkpoints, &cells, &aggregate, &findings)?;

    Ok(BenchmarkOutput { reference, checkpoints, cells, aggregate, findings })
}

fn write_outputs(
    spec: &BenchmarkSpec,
    model: &Arc<LogisticModel>,
    reference: &ReferenceRun,
    checkpoints: &[usize],
    cells: &[CellResult],
    aggregate: &[AggregateRow],
    findings: &[Finding],
) -> Result<()> {
    let out = &spec.out_dir;

    let mut text = String::from("sampler,tau,divisor,replication,gamma,batch,status,final_err1,final_err2\n");
    for c in cells {
        let (f1, f2) = match c.curve.last() {
            Some(p) => (p.err1.to_string(), p.err2.to_string()),
            None => (String::new(), String::new()),
        };
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            c.sampler, c.tau, c.divisor, c.replication, c.gamma, c.batch, c.status, f1, f2
        ));
    }
    write_atomic(&out.join("cells.csv"), text.as_bytes())?;

    let mut text = String::from("sampler,tau,divisor,replication,k,effective_passes,err1,err2\n");
    for c in cells {
        for p in &c.curve {
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.sampler, c.tau, c.divisor, c.replication, p.k, p.effective_passes, p.err1, p.err2
            ));
        }
    }
    write_atomic(&out.join("curves.csv"), text.as_bytes())?;

    let mut text =
        String::from("sampler,tau,divisor,k,effective_passes,mae1,se1,mae2,se2,replications\n");
    for r in aggregate {
        text.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.sampler, r.tau, r.divisor, r.k, r.effective_passes, r.mae1, r.se1, r.mae2, r.se2,
            r.replications
        ));
    }
    write_atomic(&out.join("aggregate.csv"), text.as_bytes())?;

    let findings_json = serde_json::to_string_pretty(&json!({ "findings": findings }))
        .expect("findings serialize");
    write_atomic(&out.join("findings.json"), findings_json.as_bytes())?;

    let (m, l, m2) = model.constants();
    let meta = serde_json::to_string_pretty(&json!({
        "constants": { "m": m, "l": l, "m2": m2, "n_rows": model.n_rows(), "dim": model.dim() },
        "gamma_rule": "gamma = tau / (l + m)",
        "effective_passes": "iterations * batch / n_rows",
        "estimator": "weight-averaged iterates, burn_in discarded",
        "burn_in": spec.burn_in,
        "iterations": spec.iterations,
        "checkpoints": checkpoints,
        "reference": reference,
    }))
    .expect("meta serializes");
    write_atomic(&out.join("meta.json"), meta.as_bytes())?;

    if spec.emit_svg {
        write_plots(spec, cells, aggregate)?;
    }
    Ok(())
}

fn write_plots(spec: &BenchmarkSpec, cells: &[CellResult], aggregate: &[AggregateRow]) -> Result<()> {
    let out = &spec.out_dir;
    let mut taus = spec.taus.clone();
    taus.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let tau_mid = taus[taus.len() / 2];

    for sampler in &spec.samplers {
        let s = sampler.name();

        let series: Vec<Series> = taus
            .iter()
            .map(|&tau| Series {
                name: format!("tau={tau}"),
                points: aggregate
                    .iter()
                    .filter(|r| r.sampler == s && r.tau == tau && r.divisor == 1)
                    .map(|r| (r.k as f64, r.mae2))
                    .collect(),
            })
            .filter(|s| !s.points.is_empty())
            .collect();
        if !series.is_empty() {
            let svg = line_plot(
                &format!("{s}: I2 error vs iterations (full batch)"),
                "iterations",
                "mean |I2 - ref|",
                &series,
                true,
                true,
            );
            write_atomic(&out.join(format!("error_vs_iterations_{s}.svg")), svg.as_bytes())?;
        }

        let series: Vec<Series> = spec
            .batch_divisors
            .iter()
            .map(|&div| Series {
                name: format!("N/{div}"),
                points: aggregate
                    .iter()
                    .filter(|r| r.sampler == s && r.tau == tau_mid && r.divisor == div)
                    .map(|r| (r.effective_passes, r.mae2))
                    .collect(),
            })
            .filter(|s| !s.points.is_empty())
            .collect();
        if !series.is_empty() {
            let svg = line_plot(
                &format!("{s}: I2 error vs effective passes (tau={tau_mid})"),
                "effective passes",
                "mean |I2 - ref|",
                &series,
                true,
                true,
            );
            write_atomic(&out.join(format!("error_vs_passes_{s}.svg")), svg.as_bytes())?;
        }

        let groups: Vec<(String, Vec<f64>)> = taus
            .iter()
            .map(|&tau| {
                (
                    format!("tau={tau}"),
                    cells
                        .iter()
                        .filter(|c| {
                            c.sampler == s && c.tau == tau && c.divisor == 1 && c.status == "ok"
                        })
                        .filter_map(|c| c.curve.last().map(|p| p.err2))
                        .collect::<Vec<f64>>(),
                )
            })
            .filter(|(_, v)| !v.is_empty())
            .collect();
        if !groups.is_empty() {
            let svg = box_plot(&format!("{s}: final I2 error by tau (full batch)"), &groups);
            write_atomic(&out.join(format!("final_error_box_{s}.svg")), svg.as_bytes())?;
        }
    }
    Ok(())
}
