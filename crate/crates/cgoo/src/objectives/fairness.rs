//! Equalized-odds and demographic-parity constructions: per-group rate
//! vectors, the smoothed constraint functions, and the matching error
//! objective.

use serde::Serialize;

use crate::domain::{DataRow, Dataset, Decision, LossVector, ScalarObjective};
use crate::error::{Error, Result};
use crate::objectives::smax::{smax, smax_bias_bound, smax_gradient};

/// Per-group empirical rates in block layout FP, TP, FN; K = 3|A|.
/// Cells with no qualifying rows get rate 0 and a degenerate flag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateVector {
    pub fp: Vec<f64>,
    pub tp: Vec<f64>,
    pub fn_: Vec<f64>,
    /// (group, label) cells that were empty, 1-based group ids.
    pub degenerate_cells: Vec<(usize, i64)>,
}

impl RateVector {
    pub fn groups(&self) -> usize {
        self.fp.len()
    }

    /// Flattens to the FP block, TP block, FN block layout.
    pub fn to_loss_vector(&self) -> Result<LossVector> {
        let mut v = Vec::with_capacity(3 * self.groups());
        v.extend_from_slice(&self.fp);
        v.extend_from_slice(&self.tp);
        v.extend_from_slice(&self.fn_);
        LossVector::new(v)
    }

    pub fn k(&self) -> usize {
        3 * self.groups()
    }
}

/// Empirical FP/TP/FN rates of a binary prediction sequence, conditioned
/// per sensitive group. Labels must be 0 or 1.
pub fn equalized_odds_rates(predictions: &[bool], d: &Dataset) -> Result<RateVector> {
    if predictions.len() != d.n() {
        return Err(Error::DimensionMismatch {
            expected: d.n(),
            got: predictions.len(),
        });
    }
    let groups = d.num_groups();
    let mut pos_count = vec![0usize; groups];
    let mut neg_count = vec![0usize; groups];
    let mut pred_pos_on_pos = vec![0usize; groups];
    let mut pred_pos_on_neg = vec![0usize; groups];
    for (row, &p) in d.rows().iter().zip(predictions) {
        let a = row.group - 1;
        match row.label {
            0 => {
                neg_count[a] += 1;
                if p {
                    pred_pos_on_neg[a] += 1;
                }
            }
            1 => {
                pos_count[a] += 1;
                if p {
                    pred_pos_on_pos[a] += 1;
                }
            }
            other => {
                return Err(Error::invalid(format!(
                    "equalized odds requires binary labels, got {other}"
                )))
            }
        }
    }
    let mut degenerate = Vec::new();
    let mut fp = vec![0.0; groups];
    let mut tp = vec![0.0; groups];
    let mut fn_ = vec![0.0; groups];
    for a in 0..groups {
        if neg_count[a] == 0 {
            degenerate.push((a + 1, 0));
        } else {
            fp[a] = pred_pos_on_neg[a] as f64 / neg_count[a] as f64;
        }
        if pos_count[a] == 0 {
            degenerate.push((a + 1, 1));
        } else {
            tp[a] = pred_pos_on_pos[a] as f64 / pos_count[a] as f64;
            fn_[a] = 1.0 - tp[a];
        }
    }
    Ok(RateVector {
        fp,
        tp,
        fn_,
        degenerate_cells: degenerate,
    })
}

/// Single-parameter threshold classifier over the first feature:
/// predicts 1 iff feature_0 >= threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdClassifier {
    pub threshold: f64,
}

impl ThresholdClassifier {
    pub fn predict(&self, row: &DataRow) -> bool {
        row.features[0] >= self.threshold
    }

    pub fn predictions(&self, d: &Dataset) -> Vec<bool> {
        d.rows().iter().map(|r| self.predict(r)).collect()
    }
}

/// Group loss for a finite set of threshold classifiers: candidate i maps
/// to thresholds[i], and the loss is the rate vector in block layout.
pub struct ThresholdRateLoss {
    thresholds: Vec<f64>,
    groups: usize,
}

impl ThresholdRateLoss {
    pub fn new(thresholds: Vec<f64>, groups: usize) -> Result<Self> {
        if thresholds.is_empty() || groups == 0 {
            return Err(Error::invalid("need at least one threshold and one group"));
        }
        Ok(ThresholdRateLoss { thresholds, groups })
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }
}

impl crate::domain::GroupLoss for ThresholdRateLoss {
    fn k(&self) -> usize {
        3 * self.groups
    }

    fn loss(&self, c: &Decision, d: &Dataset) -> Result<LossVector> {
        let threshold = match c {
            Decision::Index(i) => *self
                .thresholds
                .get(*i)
                .ok_or_else(|| Error::invalid(format!("candidate index {i} out of range")))?,
            Decision::Params(p) => p
                .first()
                .copied()
                .ok_or_else(|| Error::invalid("empty parameter vector"))?,
        };
        if d.num_groups() != self.groups {
            return Err(Error::DimensionMismatch {
                expected: self.groups,
                got: d.num_groups(),
            });
        }
        let preds = ThresholdClassifier { threshold }.predictions(d);
        equalized_odds_rates(&preds, d)?.to_loss_vector()
    }
}

// pair list (a, a') with a < a', 0-based, fixed ordering shared by value
// and gradient
fn group_pairs(groups: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for a in 0..groups {
        for b in (a + 1)..groups {
            pairs.push((a, b));
        }
    }
    pairs
}

// |v| smoothed as smax^eta(v, -v), with its derivative
fn sabs(v: f64, eta: f64) -> f64 {
    smax(&[v, -v], eta).unwrap()
}

fn sabs_grad(v: f64, eta: f64) -> f64 {
    let g = smax_gradient(&[v, -v], eta).unwrap();
    g[0] - g[1]
}

fn eo_constraint_value(l: &[f64], groups: usize, eta: f64, alpha: f64) -> f64 {
    let pairs = group_pairs(groups);
    if pairs.is_empty() {
        return -alpha;
    }
    let values: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| {
            let dfp = l[a] - l[b];
            let dtp = l[groups + a] - l[groups + b];
            smax(&[sabs(dfp, eta), sabs(dtp, eta)], eta).unwrap()
        })
        .collect();
    smax(&values, eta).unwrap() - alpha
}

fn eo_constraint_gradient(l: &[f64], groups: usize, eta: f64) -> Vec<f64> {
    let pairs = group_pairs(groups);
    let mut grad = vec![0.0; 3 * groups];
    if pairs.is_empty() {
        return grad;
    }
    let mut pair_inner: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(pairs.len());
    let values: Vec<f64> = pairs
        .iter()
        .map(|&(a, b)| {
            let dfp = l[a] - l[b];
            let dtp = l[groups + a] - l[groups + b];
            pair_inner.push((dfp, dtp, sabs(dfp, eta), sabs(dtp, eta)));
            let (_, _, sfp, stp) = *pair_inner.last().unwrap();
            smax(&[sfp, stp], eta).unwrap()
        })
        .collect();
    let outer = smax_gradient(&values, eta).unwrap();
    for (p, &(a, b)) in pairs.iter().enumerate() {
        let (dfp, dtp, sfp, stp) = pair_inner[p];
        let inner = smax_gradient(&[sfp, stp], eta).unwrap();
        let dfp_coef = outer[p] * inner[0] * sabs_grad(dfp, eta);
        let dtp_coef = outer[p] * inner[1] * sabs_grad(dtp, eta);
        grad[a] += dfp_coef;
        grad[b] -= dfp_coef;
        grad[groups + a] += dtp_coef;
        grad[groups + b] -= dtp_coef;
    }
    grad
}

// max gradient norm over random points in [0,1]^K times a safety margin;
// smax brackets push the true constant above any closed form we trust
fn estimate_lipschitz(
    k: usize,
    grad: impl Fn(&[f64]) -> Vec<f64>,
    floor: f64,
    seed: u64,
) -> f64 {
    use rand::Rng;
    let mut rng = crate::privacy::derive_rng(seed, 0xf17);
    let mut worst: f64 = floor;
    for _ in 0..256 {
        let x: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
        let g = grad(&x);
        worst = worst.max(crate::domain::l2_norm(&g));
    }
    worst * 1.25
}

/// Smoothed equalized-odds constraint
/// g(l) = smax^η over group pairs of max(|FP_a − FP_a′|, |TP_a − TP_a′|) − α,
/// with |·| and the pair max smoothed by the same η.
pub fn equalized_odds_constraint(alpha: f64, eta: f64, groups: usize) -> Result<ScalarObjective> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(eta > 0.0) {
        return Err(Error::invalid("eta must be positive"));
    }
    if groups == 0 {
        return Err(Error::invalid("need at least one group"));
    }
    let k = 3 * groups;
    let lipschitz = estimate_lipschitz(
        k,
        move |l| eo_constraint_gradient(l, groups, eta),
        2.0,
        0xe0,
    );
    Ok(ScalarObjective::new(
        k,
        lipschitz,
        move |l| eo_constraint_value(l, groups, eta, alpha),
        move |l| eo_constraint_gradient(l, groups, eta),
    ))
}

/// Upper bound on the gap between the smoothed constraint and its exact
/// max/abs counterpart, used to inflate feasibility targets.
pub fn equalized_odds_smoothing_bias(eta: f64, groups: usize) -> Result<f64> {
    let pairs = group_pairs(groups).len().max(1);
    // one outer smax over pairs, one pair smax over 2 values, one smoothed
    // absolute value; each contributes at most its own smax bias
    let outer = smax_bias_bound(pairs, 1.0, eta)?;
    let inner = smax_bias_bound(2, 1.0, eta)?;
    let abs_bias = smax_bias_bound(2, 2.0, eta)?;
    Ok(outer + inner + abs_bias)
}

/// Classification error f(l) = Σ_a FP_a + FN_a over the block layout;
/// linear with gradient the FP/FN block indicator and Lipschitz √(2|A|).
pub fn classification_error_objective(groups: usize) -> Result<ScalarObjective> {
    if groups == 0 {
        return Err(Error::invalid("need at least one group"));
    }
    let k = 3 * groups;
    Ok(ScalarObjective::new(
        k,
        (2.0 * groups as f64).sqrt(),
        move |l: &[f64]| {
            l[..groups].iter().sum::<f64>() + l[2 * groups..3 * groups].iter().sum::<f64>()
        },
        move |_l: &[f64]| {
            let mut g = vec![0.0; k];
            for a in 0..groups {
                g[a] = 1.0;
                g[2 * groups + a] = 1.0;
            }
            g
        },
    )
    .monotone())
}

/// Demographic-parity style constraint g(l) = smax^η over rows of (Ml − ĉ);
/// convex, Lipschitz-estimated with floor max row norm of M.
pub fn demographic_parity_constraint(
    m: Vec<Vec<f64>>,
    c_hat: Vec<f64>,
    eta: f64,
) -> Result<ScalarObjective> {
    if m.is_empty() {
        return Err(Error::invalid("constraint matrix must be nonempty"));
    }
    if m.len() != c_hat.len() {
        return Err(Error::DimensionMismatch {
            expected: m.len(),
            got: c_hat.len(),
        });
    }
    let k = m[0].len();
    if k == 0 || m.iter().any(|row| row.len() != k) {
        return Err(Error::invalid("constraint matrix rows must share one nonzero length"));
    }
    if !(eta > 0.0) {
        return Err(Error::invalid("eta must be positive"));
    }
    let max_row_norm = m
        .iter()
        .map(|row| crate::domain::l2_norm(row))
        .fold(0.0f64, f64::max);
    let slack = {
        let m = m.clone();
        let c_hat = c_hat.clone();
        move |l: &[f64]| -> Vec<f64> {
            m.iter()
                .zip(&c_hat)
                .map(|(row, c)| crate::domain::dot(row, l) - c)
                .collect()
        }
    };
    let value = {
        let slack = slack.clone();
        move |l: &[f64]| smax(&slack(l), eta).unwrap()
    };
    let gradient = {
        let slack = slack.clone();
        let m = m.clone();
        move |l: &[f64]| -> Vec<f64> {
            let s = slack(l);
            let outer = smax_gradient(&s, eta).unwrap();
            let mut g = vec![0.0; l.len()];
            for (row, coef) in m.iter().zip(outer) {
                for (gi, mi) in g.iter_mut().zip(row) {
                    *gi += coef * mi;
                }
            }
            g
        }
    };
    let lipschitz = estimate_lipschitz(k, gradient.clone(), max_row_norm, 0xd9);
    Ok(ScalarObjective::new(k, lipschitz, value, gradient))
}
