//! CSV ingestion and the two shipped synthetic generators.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use cgoo::domain::{project_to_unit_ball, DataRow, Dataset};
use cgoo::privacy::derive_rng;
use rand::Rng;

use crate::config::DatasetSpec;

/// Reads "feature_0,…,feature_{d-1},sensitive,label" rows into a Dataset.
/// Error messages carry 1-based file line numbers (header is line 1).
pub fn ingest_csv(path: &Path, normalize: bool) -> anyhow::Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers().context("reading header row")?.clone();
    if headers.len() < 3 {
        bail!(
            "header must be feature_0,…,sensitive,label; got {} columns",
            headers.len()
        );
    }
    let dim = headers.len() - 2;
    for i in 0..dim {
        let expected = format!("feature_{i}");
        if headers.get(i) != Some(expected.as_str()) {
            bail!("column {} must be named {expected:?}, got {:?}", i + 1, headers.get(i).unwrap_or(""));
        }
    }
    if headers.get(dim) != Some("sensitive") {
        bail!("column {} must be named \"sensitive\"", dim + 1);
    }
    if headers.get(dim + 1) != Some("label") {
        bail!("column {} must be named \"label\"", dim + 2);
    }

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.with_context(|| format!("line {line}"))?;
        if record.len() != dim + 2 {
            bail!("line {line}: expected {} fields, got {}", dim + 2, record.len());
        }
        let mut features = Vec::with_capacity(dim);
        for j in 0..dim {
            let cell = record.get(j).unwrap();
            let v: f64 = cell
                .trim()
                .parse()
                .with_context(|| format!("line {line}: feature_{j} {cell:?} is not numeric"))?;
            features.push(v);
        }
        let sensitive: usize = record
            .get(dim)
            .unwrap()
            .trim()
            .parse()
            .with_context(|| format!("line {line}: sensitive id is not a nonnegative integer"))?;
        if sensitive == 0 {
            bail!("line {line}: sensitive ids start at 1");
        }
        let label: i64 = record
            .get(dim + 1)
            .unwrap()
            .trim()
            .parse()
            .with_context(|| format!("line {line}: label is not an integer"))?;
        if normalize {
            features = project_to_unit_ball(&features);
        }
        rows.push(DataRow::new(features, sensitive, label));
    }
    Dataset::new(rows).map_err(|e| anyhow!("{e}"))
}

/// Builds the dataset named by the spec: a CSV file or a synthetic draw.
pub fn load_dataset(spec: &DatasetSpec, seed: u64) -> anyhow::Result<Dataset> {
    if let Some(path) = &spec.path {
        return ingest_csv(Path::new(path), spec.normalize);
    }
    match spec.synthetic.as_deref() {
        Some("threshold_classification") => {
            let groups = spec.groups.unwrap_or(2);
            let default_rates: Vec<f64> = (0..groups)
                .map(|a| if a % 2 == 0 { 0.6 } else { 0.35 })
                .collect();
            threshold_classification(
                spec.n.unwrap_or(120),
                groups,
                spec.positive_rates.as_deref().unwrap_or(&default_rates),
                seed,
            )
        }
        Some("ball_uniform") => ball_uniform(spec.n.unwrap_or(60), spec.dim.unwrap_or(2), seed),
        other => bail!("unknown synthetic generator {other:?}"),
    }
}

/// Two-feature-free binary classification data: groups assigned round
/// robin, labels Bernoulli per group, and a single score feature with
/// positives shifted up so thresholds in [0, 1] separate imperfectly.
pub fn threshold_classification(
    n: usize,
    groups: usize,
    positive_rates: &[f64],
    seed: u64,
) -> anyhow::Result<Dataset> {
    if groups == 0 {
        bail!("need at least one group");
    }
    if positive_rates.len() != groups {
        bail!(
            "positive_rates length {} does not match {groups} groups",
            positive_rates.len()
        );
    }
    if positive_rates.iter().any(|p| !(0.0..=1.0).contains(p)) {
        bail!("positive rates must lie in [0, 1]");
    }
    let mut rng = derive_rng(seed, 101);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let group = i % groups + 1;
        let positive = rng.gen::<f64>() < positive_rates[group - 1];
        let u = rng.gen::<f64>();
        let x = if positive { 0.4 + 0.6 * u } else { 0.6 * u };
        rows.push(DataRow::new(vec![x], group, positive as i64));
    }
    Dataset::new(rows).map_err(|e| anyhow!("{e}"))
}

/// Points uniform on the unit ball in `dim` dimensions, all in group 1
/// with label 0; fixture data for the linear lower-bound objective.
pub fn ball_uniform(n: usize, dim: usize, seed: u64) -> anyhow::Result<Dataset> {
    if dim == 0 {
        bail!("dim must be at least 1");
    }
    let mut rng = derive_rng(seed, 102);
    let mut rows = Vec::with_capacity(n);
    for _ in 0..n {
        let direction = random_unit_vector(dim, &mut rng);
        let radius = rng.gen::<f64>().powf(1.0 / dim as f64);
        let features = direction.iter().map(|v| v * radius).collect();
        rows.push(DataRow::new(features, 1, 0));
    }
    Dataset::new(rows).map_err(|e| anyhow!("{e}"))
}

/// Uniform direction from normalized Gaussian coordinates (Box-Muller).
pub fn random_unit_vector(dim: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| gaussian(rng)).collect();
        let norm = cgoo::domain::l2_norm(&v);
        if norm > 1e-9 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = loop {
        let u = rng.gen::<f64>();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
