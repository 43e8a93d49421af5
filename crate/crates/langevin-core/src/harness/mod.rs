//! Experiment orchestration: dataset ingestion, run configuration, reference
//! caching, the logistic-regression error-table experiment, and the Gaussian
//! verification suite behind `langevin validate`.

mod bench;
mod config;
mod dataset;
mod reference;
mod svg;
mod validate;

pub use bench::{
    run_benchmark, AggregateRow, BenchmarkOutput, BenchmarkSpec, CellResult, CurvePoint, Finding,
};
pub use config::{
    execute_sample, minibatch_oracle, write_estimates_csv, write_trace_csv, BenchmarkConfig,
    BuiltTarget, DatasetConfig, ExperimentSection, PriorConfig, ReferenceSection, RunSection,
    SampleConfig, ScheduleConfig, SyntheticSpec, TargetConfig,
};
pub use dataset::{ingest_dataset, synthetic_logistic, IngestOptions};
pub use reference::{
    dataset_fingerprint, reference_estimates, reference_run, ReferenceEstimates, ReferenceRun,
    MIN_REFERENCE_BUDGET,
};
pub use svg::{box_plot, line_plot, Series};
pub use validate::{validation_suite, write_validation_csv, ValidationCase, ValidationRow};

use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::{Error, Result};

static WRITE_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Write via a temp file in the same directory, then rename. Readers never
/// observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid("write_atomic needs a file path, not a directory"))?
        .to_string_lossy()
        .into_owned();
    let tag = WRITE_COUNTER.fetch_add(1, Ordering::Relaxed);
    let tmp = dir.join(format!(".{name}.{}.{tag}.tmp", std::process::id()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}
