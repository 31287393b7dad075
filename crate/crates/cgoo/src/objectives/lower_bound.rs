//! Linear lower-bound fixture: f(c) = −(1/n)Σ⟨c, xᵢ⟩ with constraint
//! g = f + ‖Σxᵢ‖/n, minimized on the unit sphere at c* = Σxᵢ/‖Σxᵢ‖.

use crate::domain::{dot, l2_norm};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct LowerBoundInstance {
    points: Vec<Vec<f64>>,
    sum: Vec<f64>,
    sum_norm: f64,
    c_star: Vec<f64>,
}

impl LowerBoundInstance {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("instance needs at least one point"));
        }
        let dim = points[0].len();
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: p.len(),
                });
            }
            if l2_norm(p) > 1.0 + 1e-9 {
                return Err(Error::invalid(format!("point {i} outside the unit ball")));
            }
        }
        let mut sum = vec![0.0; dim];
        for p in &points {
            for (s, v) in sum.iter_mut().zip(p) {
                *s += v;
            }
        }
        let sum_norm = l2_norm(&sum);
        if sum_norm <= 1e-12 {
            return Err(Error::DegenerateInstance(
                "points sum to zero; the maximizer is undefined".into(),
            ));
        }
        let c_star = sum.iter().map(|v| v / sum_norm).collect();
        Ok(LowerBoundInstance {
            points,
            sum,
            sum_norm,
            c_star,
        })
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn dim(&self) -> usize {
        self.c_star.len()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn c_star(&self) -> &[f64] {
        &self.c_star
    }

    pub fn sum_norm(&self) -> f64 {
        self.sum_norm
    }

    /// f(c) = −(1/n)·Σᵢ⟨c, xᵢ⟩ = −⟨c, Σx⟩/n.
    pub fn f_value(&self, c: &[f64]) -> f64 {
        -dot(c, &self.sum) / self.n() as f64
    }

    /// g(c) = f(c) + ‖Σxᵢ‖/n; zero exactly at c*.
    pub fn g_value(&self, c: &[f64]) -> f64 {
        self.f_value(c) + self.sum_norm / self.n() as f64
    }

    /// Closed-form excess risk (‖Σx‖/2n)·‖c − c*‖²; equals f(c) − f(c*)
    /// exactly for unit-norm c.
    pub fn closed_form_excess(&self, c: &[f64]) -> f64 {
        let diff: Vec<f64> = c.iter().zip(&self.c_star).map(|(a, b)| a - b).collect();
        self.sum_norm / (2.0 * self.n() as f64) * dot(&diff, &diff)
    }
}
