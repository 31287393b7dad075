//! Weighted least squares as a group loss over linear predictors in the
//! unit ball: per-group squared residuals, scaled into [0, 1].

use crate::domain::{
    dot, l2_norm, DataRow, Decision, GroupLoss, ItemizedGroupLoss, LossVector, ParamGroupLoss,
};
use crate::error::{Error, Result};

/// Scale applied to squared residuals: |⟨c,x⟩ − y| ≤ 2 on the unit ball
/// with y ∈ [0, 1], so raw squares reach 4. Lipschitz bookkeeping that
/// quotes the unscaled constant must multiply back by this factor.
pub const RESIDUAL_SCALE: f64 = 4.0;

/// Itemized loss ℓ_k(c, row) = 1[group = k]·(⟨c, x⟩ − y)²/4 with y the
/// row label read as a real in [0, 1].
#[derive(Debug, Clone)]
pub struct WeightedLsLoss {
    groups: usize,
    dim: usize,
}

impl WeightedLsLoss {
    pub fn new(groups: usize, dim: usize) -> Result<Self> {
        if groups == 0 || dim == 0 {
            return Err(Error::invalid("need at least one group and one feature"));
        }
        Ok(WeightedLsLoss { groups, dim })
    }

    fn params<'a>(&self, c: &'a Decision) -> Result<&'a [f64]> {
        match c {
            Decision::Params(p) if p.len() == self.dim => Ok(p),
            Decision::Params(p) => Err(Error::DimensionMismatch {
                expected: self.dim,
                got: p.len(),
            }),
            Decision::Index(_) => Err(Error::invalid(
                "weighted least squares needs a parameter-vector decision",
            )),
        }
    }

    fn check_row(&self, row: &DataRow) -> Result<f64> {
        if row.features.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: row.features.len(),
            });
        }
        if l2_norm(&row.features) > 1.0 + 1e-9 {
            return Err(Error::invalid("feature vector outside the unit ball"));
        }
        if row.group > self.groups {
            return Err(Error::invalid(format!(
                "row group {} exceeds declared group count {}",
                row.group, self.groups
            )));
        }
        let y = row.label as f64;
        if !(0.0..=1.0).contains(&y) {
            return Err(Error::invalid(format!("label {y} outside [0, 1]")));
        }
        Ok(y)
    }
}

impl GroupLoss for WeightedLsLoss {
    fn k(&self) -> usize {
        self.groups
    }

    fn loss(&self, c: &Decision, d: &crate::domain::Dataset) -> Result<LossVector> {
        crate::domain::average_itemized_loss(self, c, d)
    }
}

impl ItemizedGroupLoss for WeightedLsLoss {
    fn itemized(&self, c: &Decision, row: &DataRow) -> Result<LossVector> {
        let params = self.params(c)?;
        let y = self.check_row(row)?;
        let residual = dot(params, &row.features) - y;
        let mut l = vec![0.0; self.groups];
        l[row.group - 1] = residual * residual / RESIDUAL_SCALE;
        LossVector::new(l)
    }
}

impl ParamGroupLoss for WeightedLsLoss {
    fn param_dim(&self) -> usize {
        self.dim
    }

    fn is_convex(&self) -> bool {
        true
    }

    // grad of w·l per row is w_g · residual · x / 2 with |residual| <= 2
    // and ||x|| <= 1, so the per-example bound relative to ||w||_inf is 1
    fn item_lipschitz(&self) -> f64 {
        1.0
    }

    fn weighted_item_grad(&self, params: &[f64], row: &DataRow, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.groups {
            return Err(Error::DimensionMismatch {
                expected: self.groups,
                got: w.len(),
            });
        }
        if params.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: params.len(),
            });
        }
        let y = self.check_row(row)?;
        let residual = dot(params, &row.features) - y;
        let coef = w[row.group - 1] * residual / 2.0;
        Ok(row.features.iter().map(|x| coef * x).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::privacy::derive_rng;
    use rand::Rng;

    fn row(features: Vec<f64>, group: usize, label: i64) -> DataRow {
        DataRow::new(features, group, label)
    }

    #[test]
    fn zero_residual_zero_loss() {
        let loss = WeightedLsLoss::new(2, 2).unwrap();
        let c = Decision::Params(vec![1.0, 0.0]);
        let l = loss.itemized(&c, &row(vec![1.0, 0.0], 1, 1)).unwrap();
        assert_eq!(l.as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn unit_residual_in_group_slot() {
        let loss = WeightedLsLoss::new(2, 2).unwrap();
        let c = Decision::Params(vec![1.0, 0.0]);
        let l = loss.itemized(&c, &row(vec![1.0, 0.0], 2, 0)).unwrap();
        // residual 1, scaled by 1/4, in the group-2 slot
        assert_eq!(l.as_slice(), &[0.0, 0.25]);
    }

    #[test]
    fn invalid_rows_rejected() {
        let loss = WeightedLsLoss::new(1, 2).unwrap();
        let c = Decision::Params(vec![0.5, 0.5]);
        assert!(loss.itemized(&c, &row(vec![1.5, 1.5], 1, 0)).is_err());
        assert!(loss.itemized(&c, &row(vec![0.5, 0.5], 1, 2)).is_err());
        assert!(loss.itemized(&c, &row(vec![0.5], 1, 0)).is_err());
    }

    #[test]
    fn convex_in_params_midpoint() {
        let mut rng = derive_rng(23, 0);
        let loss = WeightedLsLoss::new(2, 3);
        let loss = loss.unwrap();
        for _ in 0..50 {
            let raw: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() - 0.5).collect();
            let x = crate::domain::project_to_unit_ball(&raw);
            let r = row(x, rng.gen_range(1..=2), rng.gen_range(0..=1));
            let a: Vec<f64> =
                crate::domain::project_to_unit_ball(&(0..3).map(|_| rng.gen::<f64>() - 0.5).collect::<Vec<_>>());
            let b: Vec<f64> =
                crate::domain::project_to_unit_ball(&(0..3).map(|_| rng.gen::<f64>() - 0.5).collect::<Vec<_>>());
            let mid: Vec<f64> = a.iter().zip(&b).map(|(u, v)| (u + v) / 2.0).collect();
            let w = vec![1.0, 1.0];
            let eval = |p: Vec<f64>| -> f64 {
                let l = loss.itemized(&Decision::Params(p), &r).unwrap();
                crate::domain::dot(&w, l.as_slice())
            };
            assert!(eval(mid) <= (eval(a) + eval(b)) / 2.0 + 1e-12);
        }
    }

    #[test]
    fn weighted_grad_matches_finite_differences() {
        let mut rng = derive_rng(23, 1);
        let loss = WeightedLsLoss::new(3, 2).unwrap();
        for _ in 0..50 {
            let x = crate::domain::project_to_unit_ball(
                &(0..2).map(|_| rng.gen::<f64>() - 0.5).collect::<Vec<_>>(),
            );
            let r = row(x, rng.gen_range(1..=3), rng.gen_range(0..=1));
            let params: Vec<f64> = crate::domain::project_to_unit_ball(
                &(0..2).map(|_| rng.gen::<f64>() - 0.5).collect::<Vec<_>>(),
            );
            let w: Vec<f64> = (0..3).map(|_| rng.gen::<f64>()).collect();
            let grad = loss.weighted_item_grad(&params, &r, &w).unwrap();
            let h = 1e-6;
            for i in 0..2 {
                let mut up = params.clone();
                let mut dn = params.clone();
                up[i] += h;
                dn[i] -= h;
                let f = |p: &Vec<f64>| {
                    let l = loss.itemized(&Decision::Params(p.clone()), &r).unwrap();
                    crate::domain::dot(&w, l.as_slice())
                };
                let fd = (f(&up) - f(&dn)) / (2.0 * h);
                assert!((grad[i] - fd).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn item_lipschitz_bound_holds() {
        let mut rng = derive_rng(23, 2);
        let loss = WeightedLsLoss::new(2, 3).unwrap();
        for _ in 0..200 {
            let x = crate::domain::project_to_unit_ball(
                &(0..3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect::<Vec<_>>(),
            );
            let r = row(x, rng.gen_range(1..=2), rng.gen_range(0..=1));
            let params = crate::domain::project_to_unit_ball(
                &(0..3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect::<Vec<_>>(),
            );
            let w: Vec<f64> = (0..2).map(|_| rng.gen::<f64>()).collect();
            let w_inf = w.iter().cloned().fold(0.0f64, f64::max);
            let g = loss.weighted_item_grad(&params, &r, &w).unwrap();
            assert!(l2_norm(&g) <= loss.item_lipschitz() * w_inf + 1e-12);
        }
    }
}
