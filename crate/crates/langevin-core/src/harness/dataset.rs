//! CSV ingestion and the seeded synthetic logistic generator.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::model::{sigmoid, Dataset};
use crate::oracles::RngStream;
use crate::{Error, Result};

/// How a labeled CSV becomes a [`Dataset`].
#[derive(Clone, Debug)]
pub struct IngestOptions {
    /// Header name of the 0/1 label column.
    pub label: String,
    /// Append a constant column after standardization.
    pub add_intercept: bool,
    pub standardize: bool,
}

impl Default for IngestOptions {
    fn default() -> Self {
        IngestOptions { label: "y".into(), add_intercept: false, standardize: true }
    }
}

/// Read a headered CSV with one label column and numeric features.
/// Deterministic given the file bytes and options.
pub fn ingest_dataset(path: &Path, options: &IngestOptions) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == options.label)
        .ok_or_else(|| Error::Data(format!("label column '{}' not found", options.label)))?;
    let features: Vec<String> =
        headers.iter().enumerate().filter(|(i, _)| *i != label_idx).map(|(_, h)| h.to_string()).collect();

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::Data(format!("row {}: expected {} cells, got {}", r + 1, headers.len(), record.len())));
        }
        let mut row = Vec::with_capacity(features.len());
        for (i, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| Error::Data(format!("row {}, column '{}': unparsable cell '{cell}'", r + 1, &headers[i])))?;
            if !v.is_finite() {
                return Err(Error::Data(format!("row {}, column '{}': non-finite cell", r + 1, &headers[i])));
            }
            if i == label_idx {
                labels.push(v);
            } else {
                row.push(v);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    let d = rows[0].len();
    let x = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let mut dataset = Dataset::new(x, DVector::from_vec(labels), features)?;
    if options.standardize {
        dataset.standardize();
    }
    if options.add_intercept {
        dataset.add_intercept();
    }
    Ok(dataset)
}

/// Seeded logistic data at a chosen (N, d) scale: standard normal covariates,
/// standardized column-wise, labels drawn from a fixed mild coefficient
/// vector. Deterministic given (seed, n, d).
pub fn synthetic_logistic(seed: u64, n: usize, d: usize) -> Result<Dataset> {
    if n < 2 || d == 0 {
        return Err(Error::invalid("synthetic generator needs n >= 2 and d >= 1"));
    }
    let mut rng = RngStream::new(seed, 0);
    let x = DMatrix::from_fn(n, d, |_, _| rng.standard_normal());
    let mut truth = DVector::zeros(d);
    for (i, v) in [0.15, -0.1, 0.1, -0.05, 0.05].iter().enumerate() {
        if i < d {
            truth[i] = *v;
        }
    }
    let mut dataset = Dataset::new(
        x,
        DVector::zeros(n),
        (1..=d).map(|j| format!("x{j}")).collect(),
    )?;
    dataset.standardize();
    for i in 0..n {
        let u = dataset.x.row(i).transpose().dot(&truth);
        dataset.y[i] = if rng.uniform() < sigmoid(u) { 1.0 } else { 0.0 };
    }
    Ok(dataset)
}
