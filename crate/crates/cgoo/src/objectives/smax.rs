//! Boltzmann smooth maximum and its gradient.

use crate::error::{Error, Result};

/// smax^η(y) = Σ yᵢ·e^{ηyᵢ} / Σ e^{ηyᵢ}, stabilized by subtracting max(y).
pub fn smax(values: &[f64], eta: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("smax of empty list"));
    }
    if !(eta > 0.0) {
        return Err(Error::invalid(format!("eta must be positive, got {eta}")));
    }
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut num = 0.0;
    let mut den = 0.0;
    for y in values {
        let w = (eta * (y - m)).exp();
        num += y * w;
        den += w;
    }
    Ok(num / den)
}

/// ∂smax/∂yᵢ = (e^{ηyᵢ}/Σ e^{ηyⱼ})·(1 + η·(yᵢ − smax^η(y))).
pub fn smax_gradient(values: &[f64], eta: f64) -> Result<Vec<f64>> {
    let s = smax(values, eta)?;
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let den: f64 = values.iter().map(|y| (eta * (y - m)).exp()).sum();
    Ok(values
        .iter()
        .map(|y| ((eta * (y - m)).exp() / den) * (1.0 + eta * (y - s)))
        .collect())
}

/// Smoothed absolute value |v| ≈ smax^η(v, −v).
pub fn smooth_abs(v: f64, eta: f64) -> Result<f64> {
    smax(&[v, -v], eta)
}

/// d/dv of smooth_abs by the chain rule through both arguments.
pub fn smooth_abs_gradient(v: f64, eta: f64) -> Result<f64> {
    let g = smax_gradient(&[v, -v], eta)?;
    Ok(g[0] - g[1])
}

/// Worst-case gap max(y) − smax^η(y) over m values in [lo, hi]; the
/// Boltzmann mean under-shoots the max by at most ln(m)/η-scale bias. The
/// bound (hi − lo)·(m−1)·e^{−η·s}·max over s is loose; we report the
/// simple uniform bound used to inflate feasibility targets.
pub fn smax_bias_bound(count: usize, range: f64, eta: f64) -> Result<f64> {
    if count == 0 {
        return Err(Error::invalid("count must be at least 1"));
    }
    if !(eta > 0.0) || range < 0.0 {
        return Err(Error::invalid("eta must be positive and range nonnegative"));
    }
    // max - smax <= sum_{i != argmax} (max - y_i) e^{-eta (max - y_i)} / Z
    // and t e^{-eta t} <= 1/(e eta), with Z >= 1
    Ok(((count - 1) as f64 / (std::f64::consts::E * eta)).min(range))
}
