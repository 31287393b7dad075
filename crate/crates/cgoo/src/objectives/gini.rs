//! Gini index of inequality over group values and its convex level-set
//! constraint.

use crate::domain::ScalarObjective;
use crate::error::{Error, Result};
use crate::objectives::smax::{smax, smax_gradient};

/// I(l) = Σ_{i,j} |lᵢ − lⱼ| / (2K·Σᵢ lᵢ) over ordered pairs, where K is
/// the length of l. Lies in [0, 1].
pub fn gini_index(l: &[f64]) -> Result<f64> {
    if l.is_empty() {
        return Err(Error::invalid("gini index of empty vector"));
    }
    if l.iter().any(|v| *v < 0.0 || !v.is_finite()) {
        return Err(Error::invalid("gini index requires nonnegative finite values"));
    }
    let total: f64 = l.iter().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedRate("gini index undefined at zero total".into()));
    }
    let mut pairwise = 0.0;
    for a in l {
        for b in l {
            pairwise += (a - b).abs();
        }
    }
    Ok(pairwise / (2.0 * l.len() as f64 * total))
}

/// Level-set constraint for I(l) ≤ θ:
/// g(l) = Σ_{i,j} |lᵢ − lⱼ| − 2Kθ·Σᵢ lᵢ, with |·| smoothed as
/// smax^η(v, −v) for differentiability. Convex in l.
pub fn gini_constraint(theta: f64, k: usize, eta: f64) -> Result<ScalarObjective> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(format!("theta must lie in [0, 1], got {theta}")));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(eta > 0.0) {
        return Err(Error::invalid("eta must be positive"));
    }
    let coef = 2.0 * k as f64 * theta;
    let value = move |l: &[f64]| -> f64 {
        let mut pairwise = 0.0;
        for a in l {
            for b in l {
                pairwise += smax(&[a - b, b - a], eta).unwrap();
            }
        }
        pairwise - coef * l.iter().sum::<f64>()
    };
    let gradient = move |l: &[f64]| -> Vec<f64> {
        let mut g = vec![-coef; l.len()];
        for i in 0..l.len() {
            for j in 0..l.len() {
                let d = l[i] - l[j];
                let s = smax_gradient(&[d, -d], eta).unwrap();
                let dd = s[0] - s[1];
                g[i] += dd;
                g[j] -= dd;
            }
        }
        g
    };
    // each smoothed |l_i - l_j| is 1-Lipschitz in both arguments
    let lipschitz = 2.0 * (k as f64) * (k as f64).sqrt() + coef * (k as f64).sqrt();
    Ok(ScalarObjective::new(k, lipschitz, value, gradient))
}
