//! Core domain types: decisions, datasets, group-loss vectors, and the
//! penalized composition of an objective with a constraint.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A K-dimensional vector of per-group losses, each entry in [0, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossVector(Vec<f64>);

impl LossVector {
    /// Validates every entry into [0, 1]. Out-of-range entries are a hard
    /// failure; use [`LossVector::clamped`] when clamping is intended.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("loss vector must be nonempty"));
        }
        for (i, v) in values.iter().enumerate() {
            if !v.is_finite() || *v < -1e-12 || *v > 1.0 + 1e-12 {
                return Err(Error::invalid(format!(
                    "loss entry {i} = {v} outside [0, 1]"
                )));
            }
        }
        Ok(LossVector(
            values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        ))
    }

    /// Clamps every entry into [0, 1] instead of failing.
    pub fn clamped(values: Vec<f64>) -> Self {
        LossVector(values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect())
    }

    pub fn k(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// One dataset record: features, a 1-based sensitive-group id, and a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataRow {
    pub features: Vec<f64>,
    pub group: usize,
    pub label: i64,
}

impl DataRow {
    pub fn new(features: Vec<f64>, group: usize, label: i64) -> Self {
        DataRow {
            features,
            group,
            label,
        }
    }
}

/// A fixed dataset of n rows. Group ids must be contiguous from 1 to |A|.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    rows: Vec<DataRow>,
    num_groups: usize,
}

impl Dataset {
    pub fn new(rows: Vec<DataRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::invalid("dataset must have at least one row"));
        }
        let dim = rows[0].features.len();
        let mut max_group = 0usize;
        for (i, row) in rows.iter().enumerate() {
            if row.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.features.len(),
                });
            }
            if row.group == 0 {
                return Err(Error::invalid(format!(
                    "row {i}: sensitive-group ids start at 1"
                )));
            }
            max_group = max_group.max(row.group);
        }
        let mut seen = vec![false; max_group];
        for row in &rows {
            seen[row.group - 1] = true;
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!(
                "group ids not contiguous: no rows with group {}",
                missing + 1
            )));
        }
        Ok(Dataset {
            rows,
            num_groups: max_group,
        })
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[DataRow] {
        &self.rows
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    pub fn feature_dim(&self) -> usize {
        self.rows[0].features.len()
    }

    /// Neighboring dataset: same size, row `index` replaced.
    pub fn with_row_replaced(&self, index: usize, row: DataRow) -> Result<Dataset> {
        if index >= self.rows.len() {
            return Err(Error::invalid(format!("row index {index} out of range")));
        }
        let mut rows = self.rows.clone();
        rows[index] = row;
        Dataset::new(rows)
    }
}

/// A candidate decision: an index into a finite set, or a parameter vector
/// in the closed unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Decision {
    Index(usize),
    Params(Vec<f64>),
}

impl Decision {
    /// Validated parameter-vector decision with ‖params‖₂ ≤ 1.
    pub fn params(params: Vec<f64>) -> Result<Self> {
        let norm = l2_norm(&params);
        if norm > 1.0 + 1e-9 {
            return Err(Error::invalid(format!(
                "parameter vector has norm {norm} > 1"
            )));
        }
        Ok(Decision::Params(params))
    }
}

/// A nonempty, uniquely indexed list of candidate decisions.
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteSet {
    decisions: Vec<Decision>,
}

impl FiniteSet {
    pub fn new(decisions: Vec<Decision>) -> Result<Self> {
        if decisions.is_empty() {
            return Err(Error::invalid("finite decision set must be nonempty"));
        }
        Ok(FiniteSet { decisions })
    }

    /// The set {Index(0), …, Index(m-1)}.
    pub fn indexed(m: usize) -> Result<Self> {
        FiniteSet::new((0..m).map(Decision::Index).collect())
    }

    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn get(&self, i: usize) -> Option<&Decision> {
        self.decisions.get(i)
    }
}

/// Decision space: a finite candidate set or the unit parameter ball.
#[derive(Debug, Clone)]
pub enum DecisionSet {
    Finite(FiniteSet),
    ParamBall { dimension: usize },
}

/// Uniform mixture over member decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedDecision {
    members: Vec<Decision>,
}

impl RandomizedDecision {
    pub fn uniform(members: Vec<Decision>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::invalid("randomized decision must be nonempty"));
        }
        Ok(RandomizedDecision { members })
    }

    pub fn singleton(member: Decision) -> Self {
        RandomizedDecision {
            members: vec![member],
        }
    }

    pub fn members(&self) -> &[Decision] {
        &self.members
    }

    /// Dataset loss of the mixture: arithmetic mean of member loss vectors.
    pub fn mean_loss(&self, loss: &dyn GroupLoss, d: &Dataset) -> Result<LossVector> {
        let k = loss.k();
        let mut acc = vec![0.0; k];
        for c in &self.members {
            let l = loss.loss(c, d)?;
            for (a, b) in acc.iter_mut().zip(l.as_slice()) {
                *a += b;
            }
        }
        let m = self.members.len() as f64;
        LossVector::new(acc.into_iter().map(|v| v / m).collect())
    }
}

/// Dataset-level group loss ℓ(c, D) ∈ [0, 1]^K.
pub trait GroupLoss: Sync {
    fn k(&self) -> usize;
    fn loss(&self, c: &Decision, d: &Dataset) -> Result<LossVector>;
}

/// Group loss defined row by row; the dataset loss is the row average.
pub trait ItemizedGroupLoss: GroupLoss {
    fn itemized(&self, c: &Decision, row: &DataRow) -> Result<LossVector>;
}

/// Row average of itemized losses, accumulated pairwise so the averaging
/// invariant holds to 1e-12 at n up to 10^6.
pub fn average_itemized_loss(
    loss: &dyn ItemizedGroupLoss,
    c: &Decision,
    d: &Dataset,
) -> Result<LossVector> {
    let sum = pairwise_row_sum(loss, c, d.rows())?;
    let n = d.n() as f64;
    LossVector::new(sum.into_iter().map(|v| v / n).collect())
}

fn pairwise_row_sum(
    loss: &dyn ItemizedGroupLoss,
    c: &Decision,
    rows: &[DataRow],
) -> Result<Vec<f64>> {
    if rows.len() <= 64 {
        let mut acc = vec![0.0; loss.k()];
        for row in rows {
            let l = loss.itemized(c, row)?;
            if l.k() != loss.k() {
                return Err(Error::DimensionMismatch {
                    expected: loss.k(),
                    got: l.k(),
                });
            }
            for (a, b) in acc.iter_mut().zip(l.as_slice()) {
                *a += b;
            }
        }
        return Ok(acc);
    }
    let mid = rows.len() / 2;
    let left = pairwise_row_sum(loss, c, &rows[..mid])?;
    let right = pairwise_row_sum(loss, c, &rows[mid..])?;
    Ok(left.iter().zip(&right).map(|(a, b)| a + b).collect())
}

/// An itemized group loss backed by a closure; handy for synthetic
/// instances and table-driven candidate sets.
pub struct FnItemizedLoss {
    k: usize,
    f: Arc<dyn Fn(&Decision, &DataRow) -> Result<LossVector> + Send + Sync>,
}

impl FnItemizedLoss {
    pub fn new(
        k: usize,
        f: impl Fn(&Decision, &DataRow) -> Result<LossVector> + Send + Sync + 'static,
    ) -> Self {
        FnItemizedLoss { k, f: Arc::new(f) }
    }
}

impl GroupLoss for FnItemizedLoss {
    fn k(&self) -> usize {
        self.k
    }

    fn loss(&self, c: &Decision, d: &Dataset) -> Result<LossVector> {
        average_itemized_loss(self, c, d)
    }
}

impl ItemizedGroupLoss for FnItemizedLoss {
    fn itemized(&self, c: &Decision, row: &DataRow) -> Result<LossVector> {
        (self.f)(c, row)
    }
}

/// Itemized loss that is additionally differentiable in a parameter vector,
/// as required by the gradient-perturbation oracle.
pub trait ParamGroupLoss: ItemizedGroupLoss {
    fn param_dim(&self) -> usize;
    /// Whether the per-example loss is convex in the parameters. The
    /// gradient-perturbation oracle refuses losses not declared convex.
    fn is_convex(&self) -> bool;
    /// Upper bound on ‖∇_params (w·ℓ)(params, row)‖₂ / ‖w‖_∞ per example.
    fn item_lipschitz(&self) -> f64;
    /// Gradient of w·ℓ(params, row) with respect to the parameters.
    fn weighted_item_grad(&self, params: &[f64], row: &DataRow, w: &[f64]) -> Result<Vec<f64>>;
}

/// A scalar function of a loss vector with declared gradient and constants.
#[derive(Clone)]
pub struct ScalarObjective {
    k: usize,
    eval: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    grad: Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>,
    lipschitz: f64,
    smoothness: Option<f64>,
    monotone_nondecreasing: bool,
}

impl std::fmt::Debug for ScalarObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarObjective")
            .field("k", &self.k)
            .field("lipschitz", &self.lipschitz)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl ScalarObjective {
    pub fn new(
        k: usize,
        lipschitz: f64,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        ScalarObjective {
            k,
            eval: Arc::new(eval),
            grad: Arc::new(grad),
            lipschitz,
            smoothness: None,
            monotone_nondecreasing: false,
        }
    }

    pub fn with_smoothness(mut self, beta: f64) -> Self {
        self.smoothness = Some(beta);
        self
    }

    pub fn monotone(mut self) -> Self {
        self.monotone_nondecreasing = true;
        self
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        (self.eval)(x)
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        (self.grad)(x)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn smoothness(&self) -> Option<f64> {
        self.smoothness
    }

    pub fn is_monotone_nondecreasing(&self) -> bool {
        self.monotone_nondecreasing
    }
}

/// h(x) = f(x) + G·max(0, g(x)).
#[derive(Debug, Clone)]
pub struct ComposedObjective {
    f: ScalarObjective,
    g: ScalarObjective,
    penalty_weight: f64,
}

impl ComposedObjective {
    pub fn f(&self) -> &ScalarObjective {
        &self.f
    }

    pub fn g(&self) -> &ScalarObjective {
        &self.g
    }

    pub fn penalty_weight(&self) -> f64 {
        self.penalty_weight
    }

    pub fn k(&self) -> usize {
        self.f.k()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.f.value(x) + self.penalty_weight * self.g.value(x).max(0.0)
    }

    /// ∇f(x) + G·1[g(x) ≥ 0]·∇g(x); at g = 0 the active branch is taken.
    pub fn subgradient(&self, x: &[f64]) -> Vec<f64> {
        let mut sub = self.f.gradient(x);
        if self.g.value(x) >= 0.0 {
            let gg = self.g.gradient(x);
            for (s, gi) in sub.iter_mut().zip(gg) {
                *s += self.penalty_weight * gi;
            }
        }
        sub
    }

    pub fn lipschitz(&self) -> f64 {
        self.f.lipschitz() + self.penalty_weight * self.g.lipschitz()
    }
}

/// Penalty weight G = (α + L_f·√K)/α that turns an α-near-minimizer of the
/// composition into an α-accurate, α-feasible solution.
pub fn penalty_weight(alpha: f64, lipschitz_f: f64, k: usize) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be positive, got {alpha}")));
    }
    if lipschitz_f < 0.0 {
        return Err(Error::invalid("lipschitz_f must be nonnegative"));
    }
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    Ok((alpha + lipschitz_f * (k as f64).sqrt()) / alpha)
}

pub fn compose(f: ScalarObjective, g: ScalarObjective, penalty: f64) -> Result<ComposedObjective> {
    if f.k() != g.k() {
        return Err(Error::DimensionMismatch {
            expected: f.k(),
            got: g.k(),
        });
    }
    if !(penalty > 0.0) {
        return Err(Error::invalid("penalty weight must be positive"));
    }
    Ok(ComposedObjective {
        f,
        g,
        penalty_weight: penalty,
    })
}

/// Neighboring-dataset sensitivity bound (L_f + G·L_g)·√K/n for h∘ℓ.
pub fn loss_sensitivity_bound(
    k: usize,
    n: usize,
    lipschitz_f: f64,
    lipschitz_g: f64,
    penalty: f64,
) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    Ok((lipschitz_f + penalty * lipschitz_g) * (k as f64).sqrt() / n as f64)
}

/// A near-minimizer of h that violates the composition guarantee.
#[derive(Debug, Clone, Serialize)]
pub struct CompositionWitness {
    pub point: Vec<f64>,
    pub f_value: f64,
    pub g_value: f64,
    pub h_value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompositionReport {
    pub pass: bool,
    pub h_min: f64,
    pub feasible_f_min: f64,
    pub g_bound: f64,
    pub witnesses: Vec<CompositionWitness>,
}

/// Checks on a finite grid that every α-near-minimizer of h = f + G·max(0, g)
/// has f within α of the best feasible value and g below (α + L_f√K)/G.
pub fn verify_composition_guarantee(
    f: &ScalarObjective,
    g: &ScalarObjective,
    penalty: f64,
    grid: &[Vec<f64>],
    alpha: f64,
) -> Result<CompositionReport> {
    let composed = compose(f.clone(), g.clone(), penalty)?;
    let mut h_min = f64::INFINITY;
    let mut feasible_f_min = f64::INFINITY;
    for x in grid {
        h_min = h_min.min(composed.value(x));
        if g.value(x) <= 0.0 {
            feasible_f_min = feasible_f_min.min(f.value(x));
        }
    }
    if !feasible_f_min.is_finite() {
        return Err(Error::Precondition(
            "grid contains no point with g <= 0".into(),
        ));
    }
    let g_bound = (alpha + f.lipschitz() * (f.k() as f64).sqrt()) / penalty;
    let mut witnesses = Vec::new();
    for x in grid {
        let h = composed.value(x);
        if h <= h_min + alpha {
            let fv = f.value(x);
            let gv = g.value(x);
            if fv > feasible_f_min + alpha + 1e-9 || gv > g_bound + 1e-9 {
                witnesses.push(CompositionWitness {
                    point: x.clone(),
                    f_value: fv,
                    g_value: gv,
                    h_value: h,
                });
            }
        }
    }
    Ok(CompositionReport {
        pass: witnesses.is_empty(),
        h_min,
        feasible_f_min,
        g_bound,
        witnesses,
    })
}

pub fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projection onto the closed unit ball: x / max(1, ‖x‖).
pub fn project_to_unit_ball(v: &[f64]) -> Vec<f64> {
    let norm = l2_norm(v);
    if norm <= 1.0 {
        v.to_vec()
    } else {
        v.iter().map(|x| x / norm).collect()
    }
}
