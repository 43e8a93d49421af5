//! `langevin`: verification, bound/tuning calculators, chain runs, and the
//! logistic-regression benchmark, all on top of `langevin-core`.
//!
//! Calculator subcommands print one JSON line per report (inputs echoed, so a
//! line is self-describing) and can append to `<out>/reports.jsonl`. The
//! suite/experiment subcommands write CSV/JSON/SVG files under `--out`.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use langevin_core::bounds::{
    bound_rhs, tune, BoundReport, ProblemConstants, TheoremRhs, TuneRule, VarianceInput,
};
use langevin_core::harness::{
    execute_sample, run_benchmark, validation_suite, write_estimates_csv, write_trace_csv,
    write_validation_csv, BenchmarkConfig, BenchmarkSpec, SampleConfig, ScheduleConfig,
};
use langevin_core::schedules::{StepPlan, WeightRule};
use langevin_core::{Error, Result};

#[derive(Parser)]
#[command(
    name = "langevin",
    version,
    about = "Langevin sampling toolkit: exact verification, non-asymptotic bounds, \
             step-size tuning, chain runs, and the logistic-regression benchmark"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the exact-Gaussian verification suite; exits 2 on any negative margin
    Validate(ValidateArgs),
    /// Evaluate a corollary's (γ_ε, n_ε) tuning rule at accuracy ε
    Tune(TuneArgs),
    /// Evaluate a theorem's right-hand side for a step plan
    Bound(BoundArgs),
    /// Run one chain from a TOML config and write trace/estimate CSVs
    Sample(SampleArgs),
    /// Run the benchmark grid from a TOML config and report the findings
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Directory for the per-case CSV reports
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct TuneArgs {
    /// ula-convex, ula-strong-w2, ula-strong-kl, ssgld-uniform, ssgld-coco,
    /// spgld-uniform, spgld-coco, spgld-strong-w2, or spgld-strong-kl
    #[arg(long)]
    rule: String,
    /// Target accuracy ε (squared-W₂ or KL, per the rule's name)
    #[arg(long)]
    eps: f64,
    #[command(flatten)]
    constants: ConstantArgs,
    /// Also append the JSON line to <OUT>/reports.jsonl
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoundArgs {
    /// averaged-kl, w2-contraction, step-bias, ssgld-averaged-kl,
    /// spgld-averaged-kl, spgld-w2-contraction, or decreasing-step-rate
    #[arg(long)]
    theorem: String,
    /// Averaging-window length n (recursion depth for the contraction bounds)
    #[arg(long)]
    horizon: usize,
    #[command(flatten)]
    plan: PlanArgs,
    #[command(flatten)]
    constants: ConstantArgs,
    /// Uniform oracle variance cap D²
    #[arg(long, conflicts_with = "variance_series")]
    variance_cap: Option<f64>,
    /// File with one measured oracle variance per window step
    #[arg(long)]
    variance_series: Option<PathBuf>,
    /// Also append the JSON line to <OUT>/reports.jsonl
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    /// TOML chain configuration ([target], [schedule], [run])
    #[arg(long)]
    config: PathBuf,
    /// Directory for estimates.csv and trace.csv
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// TOML benchmark configuration ([dataset], [experiment], [reference])
    #[arg(long)]
    config: PathBuf,
    /// Directory for tables, findings, plots, and the reference cache
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

/// Problem constants for the calculators. A TOML file seeds them; explicit
/// flags override its fields.
#[derive(Args)]
struct ConstantArgs {
    /// TOML file of problem constants
    #[arg(long)]
    constants: Option<PathBuf>,
    /// Ambient dimension d
    #[arg(long)]
    dim: Option<usize>,
    /// Strong convexity m of the smooth part (0 = merely convex)
    #[arg(long)]
    m: Option<f64>,
    /// Gradient Lipschitz constant L of the smooth part
    #[arg(long)]
    l: Option<f64>,
    /// Subgradient norm bound M (subgradient chain)
    #[arg(long)]
    m_lip: Option<f64>,
    /// Lipschitz constant M₂ of the non-smooth term
    #[arg(long)]
    m2_lip: Option<f64>,
    /// Uniform variance cap D² of the gradient oracle
    #[arg(long)]
    d_sq: Option<f64>,
    /// Oracle cocoercivity constant L̃
    #[arg(long)]
    l_tilde: Option<f64>,
    /// Strongly-convex oracle constant m̃₁
    #[arg(long)]
    m_tilde1: Option<f64>,
    /// Strongly-convex oracle constant L̃₁
    #[arg(long)]
    l_tilde1: Option<f64>,
    /// Oracle variance υ* at the minimizer
    #[arg(long)]
    upsilon_star: Option<f64>,
    /// Initial squared Wasserstein distance W₂²(μ₀, π)
    #[arg(long)]
    w0_sq: Option<f64>,
    /// Growth exponent η of the moment bound
    #[arg(long)]
    eta: Option<f64>,
    /// Growth constant M_η of the moment bound
    #[arg(long)]
    m_eta: Option<f64>,
    /// Second moment of μ₀ about the minimizer
    #[arg(long)]
    x0_moment: Option<f64>,
    /// Same moment at the start of the averaging window
    #[arg(long)]
    burnin_moment: Option<f64>,
}

impl ConstantArgs {
    fn build(&self) -> Result<ProblemConstants> {
        let mut c = match &self.constants {
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                toml::from_str::<ProblemConstants>(&text)?
            }
            None => ProblemConstants::new(0),
        };
        if let Some(dim) = self.dim {
            c.dim = dim;
        }
        if let Some(m) = self.m {
            c.m = m;
        }
        for (flag, field) in [
            (self.l, &mut c.l),
            (self.m_lip, &mut c.m_lip),
            (self.m2_lip, &mut c.m2_lip),
            (self.d_sq, &mut c.d_sq),
            (self.l_tilde, &mut c.l_tilde),
            (self.m_tilde1, &mut c.m_tilde1),
            (self.l_tilde1, &mut c.l_tilde1),
            (self.upsilon_star, &mut c.upsilon_star),
            (self.w0_sq, &mut c.w0_sq),
            (self.eta, &mut c.eta),
            (self.m_eta, &mut c.m_eta),
            (self.x0_moment, &mut c.x0_moment),
            (self.burnin_moment, &mut c.burnin_moment),
        ] {
            if flag.is_some() {
                *field = flag;
            }
        }
        c.validate()?;
        Ok(c)
    }
}

/// Step plan for the bound calculator, mirroring the `[schedule]` config keys.
#[derive(Args)]
struct PlanArgs {
    /// Step schedule: constant, poly, or piecewise
    #[arg(long, default_value = "constant")]
    plan: String,
    /// γ (constant) or γ₁ (first step of a decaying schedule)
    #[arg(long)]
    gamma1: f64,
    /// Decay exponent α for a poly schedule
    #[arg(long)]
    alpha: Option<f64>,
    /// Step index at which a piecewise schedule switches
    #[arg(long)]
    switch_step: Option<usize>,
    /// γ₂ after the switch of a piecewise schedule
    #[arg(long)]
    gamma2: Option<f64>,
    /// Burn-in length N preceding the averaging window
    #[arg(long, default_value_t = 0)]
    burn_in: usize,
    /// Averaging weights: equal-to-step, poly-shifted, or constant
    #[arg(long, default_value = "equal-to-step")]
    weights: String,
    /// λ for the constant weight rule
    #[arg(long)]
    lambda: Option<f64>,
}

impl PlanArgs {
    fn build(&self) -> Result<StepPlan> {
        let schedule = ScheduleConfig {
            kind: self.plan.clone(),
            gamma1: self.gamma1,
            alpha: self.alpha,
            switch_step: self.switch_step,
            gamma2: self.gamma2,
        };
        let plan = schedule.build()?.with_burn_in(self.burn_in);
        match self.weights.as_str() {
            "equal-to-step" => Ok(plan),
            "constant" => {
                let lambda = self
                    .lambda
                    .ok_or_else(|| Error::Config("constant weights need --lambda".into()))?;
                plan.with_weights(WeightRule::Constant { lambda })
            }
            "poly-shifted" => {
                let alpha = self.alpha.ok_or_else(|| {
                    Error::Config("poly-shifted weights need --alpha".into())
                })?;
                plan.with_weights(WeightRule::PolynomialShifted { gamma1: self.gamma1, alpha })
            }
            other => Err(Error::Config(format!(
                "unknown weight rule '{other}' (expected equal-to-step, poly-shifted, or constant)"
            ))),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Validate(args) => run_validate(&args),
        Command::Tune(args) => run_tune(&args),
        Command::Bound(args) => run_bound(&args),
        Command::Sample(args) => run_sample(&args),
        Command::Benchmark(args) => run_benchmark_cmd(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run_validate(args: &ValidateArgs) -> Result<ExitCode> {
    let mut worst_overall = f64::INFINITY;
    for case in validation_suite() {
        let rows = case.run()?;
        let worst = rows.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
        worst_overall = worst_overall.min(worst);
        let path = args.out.join("validate").join(format!("{}.csv", case.name));
        write_validation_csv(&path, &rows)?;
        println!("{:<16} {} rows, worst margin {worst:+.3e}", case.name, rows.len());
    }
    if worst_overall < -1e-9 {
        eprintln!("verification FAILED: worst margin {worst_overall:+.3e}");
        return Ok(ExitCode::from(2));
    }
    println!("all margins >= -1e-9 (worst {worst_overall:+.3e})");
    Ok(ExitCode::SUCCESS)
}

fn run_tune(args: &TuneArgs) -> Result<ExitCode> {
    let rule: TuneRule = args.rule.parse()?;
    let c = args.constants.build()?;
    let report = tune(rule, &c, args.eps)?;
    emit_report(&report, args.out.as_deref())
}

fn run_bound(args: &BoundArgs) -> Result<ExitCode> {
    let theorem: TheoremRhs = args.theorem.parse()?;
    let c = args.constants.build()?;
    let plan = args.plan.build()?;

    let series;
    let variance = match (&args.variance_cap, &args.variance_series) {
        (Some(cap), None) => Some(VarianceInput::UniformCap(*cap)),
        (None, Some(path)) => {
            series = read_variance_series(path)?;
            Some(VarianceInput::Series(&series))
        }
        (None, None) => None,
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };

    let report = bound_rhs(theorem, &c, &plan, args.horizon, variance)?;
    emit_report(&report, args.out.as_deref())
}

/// One f64 per non-empty line, window order.
fn read_variance_series(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut series = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: f64 = line.parse().map_err(|_| {
            Error::Data(format!("{}:{}: not a number: '{line}'", path.display(), i + 1))
        })?;
        series.push(v);
    }
    if series.is_empty() {
        return Err(Error::Data(format!("{}: empty variance series", path.display())));
    }
    Ok(series)
}

fn emit_report(report: &BoundReport, out: Option<&Path>) -> Result<ExitCode> {
    let line = serde_json::to_string(report)
        .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
    println!("{line}");
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut f = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(dir.join("reports.jsonl"))?;
        writeln!(f, "{line}")?;
    }
    Ok(ExitCode::SUCCESS)
}

fn run_sample(args: &SampleArgs) -> Result<ExitCode> {
    let cfg = SampleConfig::load(&args.config)?;
    let base = args.config.parent().unwrap_or_else(|| Path::new("."));
    let output = execute_sample(&cfg, base)?;

    write_estimates_csv(&args.out.join("estimates.csv"), &output)?;
    if !output.trace.is_empty() {
        write_trace_csv(&args.out.join("trace.csv"), &output)?;
    }

    for w in &output.warnings {
        eprintln!("warning: {w}");
    }
    for est in &output.estimates {
        println!("{} = {}", est.name, est.estimate);
    }
    if let Some(rate) = output.accept_rate {
        println!("accept_rate = {rate}");
    }
    println!("effective_passes = {}", output.effective_passes);
    println!("wrote {}", args.out.join("estimates.csv").display());
    Ok(ExitCode::SUCCESS)
}

fn run_benchmark_cmd(args: &BenchmarkArgs) -> Result<ExitCode> {
    let cfg = BenchmarkConfig::load(&args.config)?;
    let base = args.config.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    let spec = BenchmarkSpec::from_config(&cfg, &base, &args.out)?;
    let out = run_benchmark(&spec)?;

    let r = &out.reference;
    println!(
        "reference: gamma {:.3e}, accept {:.3}, I1 {:.6} (se {:.2e}), I2 {:.6} (se {:.2e})",
        r.gamma, r.accept_rate, r.i1, r.se1, r.i2, r.se2
    );
    for f in &out.findings {
        println!(
            "{:<26} {:<6} {} ({:.5} vs {:.5} + {:.5})",
            f.name,
            f.sampler,
            if f.pass { "pass" } else { "FAIL" },
            f.lhs,
            f.rhs,
            f.two_se
        );
    }
    println!("wrote tables and findings under {}", args.out.display());
    Ok(ExitCode::SUCCESS)
}
