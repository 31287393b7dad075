//! Empirical confusion matrices and the G-mean / H-mean performance
//! measures built from per-class recalls.

use serde::Serialize;

use crate::domain::LossVector;
use crate::error::{Error, Result};

/// L x L matrix of empirical (label, prediction) frequencies; entries sum
/// to 1. Row p holds true class p, column q the predicted class q.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfusionMatrix {
    entries: Vec<f64>,
    classes: usize,
}

impl ConfusionMatrix {
    pub fn new(entries: Vec<f64>, classes: usize) -> Result<Self> {
        if classes == 0 || entries.len() != classes * classes {
            return Err(Error::DimensionMismatch {
                expected: classes * classes,
                got: entries.len(),
            });
        }
        let mut sum = 0.0;
        for e in &entries {
            if !e.is_finite() || *e < 0.0 {
                return Err(Error::invalid(format!("matrix entry {e} negative or non-finite")));
            }
            sum += e;
        }
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("matrix entries sum to {sum}, not 1")));
        }
        Ok(ConfusionMatrix { entries, classes })
    }

    /// Entry (p, q) with 1-based class ids, the frequency of label p
    /// predicted as q.
    pub fn entry(&self, p: usize, q: usize) -> f64 {
        self.entries[(p - 1) * self.classes + (q - 1)]
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn row_sum(&self, p: usize) -> f64 {
        (1..=self.classes).map(|q| self.entry(p, q)).sum()
    }

    fn col_sum(&self, q: usize) -> f64 {
        (1..=self.classes).map(|p| self.entry(p, q)).sum()
    }
}

/// Empirical confusion matrix of a prediction sequence: entry (p, q) is
/// (1/n)·#{i : label_i = p, prediction_i = q}. Classes are 1-based.
pub fn confusion_matrix(
    predictions: &[usize],
    labels: &[usize],
    classes: usize,
) -> Result<ConfusionMatrix> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: predictions.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::invalid("empty prediction sequence"));
    }
    let mut counts = vec![0usize; classes * classes];
    for (i, (&q, &p)) in predictions.iter().zip(labels).enumerate() {
        if p == 0 || p > classes || q == 0 || q > classes {
            return Err(Error::invalid(format!(
                "row {i}: class ids must lie in 1..={classes}, got label {p}, prediction {q}"
            )));
        }
        counts[(p - 1) * classes + (q - 1)] += 1;
    }
    let n = predictions.len() as f64;
    ConfusionMatrix::new(counts.into_iter().map(|c| c as f64 / n).collect(), classes)
}

/// Flattens row-major: entry (p, q) lands in slot k = L·(p−1) + q (1-based),
/// so K = L².
pub fn confusion_to_loss_vector(c: &ConfusionMatrix) -> LossVector {
    LossVector::clamped(c.entries.clone())
}

/// 1-based flat slot of entry (p, q).
pub fn flat_index(p: usize, q: usize, classes: usize) -> usize {
    classes * (p - 1) + q
}

/// Geometric mean of per-class recalls: (Π_i C_ii / Σ_j C_ij)^{1/L}.
pub fn g_mean(c: &ConfusionMatrix) -> Result<f64> {
    let l = c.classes();
    let mut log_sum = 0.0;
    for i in 1..=l {
        let row = c.row_sum(i);
        if row <= 0.0 {
            return Err(Error::UndefinedRate(format!("class {i} has zero row sum")));
        }
        let recall = c.entry(i, i) / row;
        if recall == 0.0 {
            return Ok(0.0);
        }
        log_sum += recall.ln();
    }
    Ok((log_sum / l as f64).exp())
}

/// H-mean: L·(Σ_i (Σ_j C_ji)/C_ii)^{−1}.
pub fn h_mean(c: &ConfusionMatrix) -> Result<f64> {
    let l = c.classes();
    let mut sum = 0.0;
    for i in 1..=l {
        let diag = c.entry(i, i);
        if diag <= 0.0 {
            return Err(Error::UndefinedRate(format!("class {i} has zero diagonal entry")));
        }
        sum += c.col_sum(i) / diag;
    }
    Ok(l as f64 / sum)
}

/// All entries equal 1/L².
pub fn uniform_matrix(classes: usize) -> Result<ConfusionMatrix> {
    if classes == 0 {
        return Err(Error::invalid("classes must be at least 1"));
    }
    let v = 1.0 / (classes * classes) as f64;
    ConfusionMatrix::new(vec![v; classes * classes], classes)
}

/// Geometric decay by `decay` from one entry to the next in column-major
/// order, renormalized to sum 1. Models severe class imbalance; this
/// orientation keeps H-mean above G-mean as the class count grows
/// (row-major decay inverts the ordering).
pub fn geometric_matrix(classes: usize, decay: f64) -> Result<ConfusionMatrix> {
    if classes == 0 {
        return Err(Error::invalid("classes must be at least 1"));
    }
    if !(decay > 0.0 && decay <= 1.0) {
        return Err(Error::invalid(format!("decay must lie in (0, 1], got {decay}")));
    }
    let mut entries = vec![0.0; classes * classes];
    let mut w = 1.0;
    for q in 0..classes {
        for p in 0..classes {
            entries[p * classes + q] = w;
            w *= decay;
        }
    }
    let z: f64 = entries.iter().sum();
    ConfusionMatrix::new(entries.into_iter().map(|e| e / z).collect(), classes)
}
