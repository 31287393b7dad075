//! Approximate linear-optimization oracles: exact finite-set scan,
//! exponential-mechanism sampling, and noisy projected SGD, behind one
//! interface with declared tolerance and privacy contracts.

use std::sync::Arc;

use rand::RngCore;
use serde::Serialize;

use crate::domain::{
    dot, l2_norm, project_to_unit_ball, Dataset, Decision, FiniteSet, GroupLoss, ParamGroupLoss,
};
use crate::error::{Error, Result};
use crate::privacy::{
    self, exponential_mechanism_pmf, gaussian_perturb, AuditReport, FinitePmf, PerCallBudget,
};

/// A weight vector handed to an oracle; `nonnegative_only` mirrors the
/// oracle's admissible set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    values: Vec<f64>,
}

impl WeightVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::invalid("weight vector must be nonempty"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("weight entries must be finite"));
        }
        Ok(WeightVector { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn k(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.values.iter().all(|v| *v >= 0.0)
    }
}

/// Declared oracle contract: tolerance τ, optional per-call privacy, and
/// the failure probability θ of the utility guarantee.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OracleSpec {
    pub tolerance: f64,
    pub privacy: Option<PerCallBudget>,
    pub failure_probability: f64,
}

impl OracleSpec {
    pub fn exact() -> Self {
        OracleSpec {
            tolerance: 0.0,
            privacy: None,
            failure_probability: 0.0,
        }
    }
}

/// An approximate linear optimizer over group-loss vectors: returns c with
/// w·ℓ(c, D) within τ·‖w‖ of the minimum, with probability ≥ 1 − θ.
pub trait LinearOracle {
    fn describe(&self) -> String;
    fn spec(&self) -> OracleSpec;
    /// Whether the oracle only admits nonnegative weight vectors.
    fn nonnegative_only(&self) -> bool {
        false
    }
    fn initial_decision(&self) -> Decision;
    fn call(&self, w: &WeightVector, d: &Dataset, rng: &mut dyn RngCore) -> Result<Decision>;
    /// Exact output distribution for finite-range mechanisms; required by
    /// the analytic auditor.
    fn analytic_pmf(&self, _w: &WeightVector, _d: &Dataset) -> Result<FinitePmf> {
        Err(Error::UnsupportedAudit(format!(
            "{} has no analytic output distribution",
            self.describe()
        )))
    }
}

fn check_weight(oracle: &dyn LinearOracle, w: &WeightVector, k: usize) -> Result<()> {
    if w.k() != k {
        return Err(Error::DimensionMismatch {
            expected: k,
            got: w.k(),
        });
    }
    if oracle.nonnegative_only() && !w.is_nonnegative() {
        return Err(Error::ContractViolation(format!(
            "{} admits only nonnegative weights",
            oracle.describe()
        )));
    }
    Ok(())
}

/// Exact argmin of w·ℓ(c, D) over a finite set; ties break to the lowest
/// index.
pub fn lopt_exact(
    set: &FiniteSet,
    loss: &dyn GroupLoss,
    w: &WeightVector,
    d: &Dataset,
) -> Result<Decision> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in set.decisions().iter().enumerate() {
        let score = dot(w.values(), loss.loss(c, d)?.as_slice());
        match best {
            Some((_, s)) if score >= s => {}
            _ => best = Some((i, score)),
        }
    }
    let (i, _) = best.ok_or_else(|| Error::invalid("empty candidate set"))?;
    Ok(set.decisions()[i].clone())
}

/// Exponential-mechanism distribution over candidates:
/// p(c) ∝ exp(−ε·n·(w·ℓ(c, D))/(2‖w‖√K)), the score sensitivity being
/// ‖w‖√K/n. ‖w‖ = 0 degenerates to the uniform distribution.
pub fn lopt_expmech_pmf(
    set: &FiniteSet,
    loss: &dyn GroupLoss,
    w: &WeightVector,
    d: &Dataset,
    eps: f64,
) -> Result<FinitePmf> {
    if !(eps > 0.0) {
        return Err(Error::invalid("epsilon must be positive"));
    }
    let norm = w.norm();
    if norm == 0.0 {
        return FinitePmf::new(vec![1.0 / set.len() as f64; set.len()]);
    }
    let mut scores = Vec::with_capacity(set.len());
    for c in set.decisions() {
        scores.push(dot(w.values(), loss.loss(c, d)?.as_slice()));
    }
    let sensitivity = norm * (loss.k() as f64).sqrt() / d.n() as f64;
    exponential_mechanism_pmf(&scores, sensitivity, eps)
}

pub fn lopt_expmech(
    set: &FiniteSet,
    loss: &dyn GroupLoss,
    w: &WeightVector,
    d: &Dataset,
    eps: f64,
    rng: &mut dyn RngCore,
) -> Result<Decision> {
    let pmf = lopt_expmech_pmf(set, loss, w, d, eps)?;
    let mut rng = rng;
    Ok(set.decisions()[pmf.sample(&mut rng)].clone())
}

/// Candidate-range complexity for the sample-size threshold: parameter
/// dimension for ball-parameterized sets, cardinality for finite nets.
#[derive(Debug, Clone, Copy)]
pub enum RangeComplexity {
    ParamDim(usize),
    FiniteSize(usize),
}

/// Sample size above which the exponential-mechanism oracle meets its
/// (τ, θ) utility contract:
/// n₀ = ⌈(8√K/(ε·τ))·((P + 1)·ln 3 + ln(1/θ))⌉, with P replaced by
/// ln m for a finite net of m candidates.
pub fn expmech_sample_threshold(
    k: usize,
    eps: f64,
    tau: f64,
    theta: f64,
    range: RangeComplexity,
) -> Result<usize> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(eps > 0.0) || !(tau > 0.0) {
        return Err(Error::invalid("epsilon and tau must be positive"));
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::invalid(format!("theta must lie in (0, 1), got {theta}")));
    }
    let p = match range {
        RangeComplexity::ParamDim(p) => p as f64,
        RangeComplexity::FiniteSize(m) => {
            if m == 0 {
                return Err(Error::invalid("finite range must be nonempty"));
            }
            (m as f64).ln()
        }
    };
    let n0 = (8.0 * (k as f64).sqrt() / (eps * tau))
        * ((p + 1.0) * 3.0f64.ln() + (1.0 / theta).ln());
    Ok(n0.ceil() as usize)
}

/// Embeds x ∈ R^P into R^{PK} at the block of group k (1-based):
/// coordinates (k−1)P+1 … kP carry x, the rest are zero.
pub fn group_embedding(x: &[f64], k: usize, groups: usize) -> Result<Vec<f64>> {
    if k == 0 || k > groups {
        return Err(Error::invalid(format!(
            "group id {k} outside 1..={groups}"
        )));
    }
    let p = x.len();
    let mut out = vec![0.0; p * groups];
    out[(k - 1) * p..k * p].copy_from_slice(x);
    Ok(out)
}

/// Exact finite-set oracle (τ = 0, no privacy).
pub struct ExactOracle {
    set: FiniteSet,
    loss: Arc<dyn GroupLoss + Send + Sync>,
}

impl ExactOracle {
    pub fn new(set: FiniteSet, loss: Arc<dyn GroupLoss + Send + Sync>) -> Self {
        ExactOracle { set, loss }
    }
}

impl LinearOracle for ExactOracle {
    fn describe(&self) -> String {
        format!("exact finite-set oracle over {} candidates", self.set.len())
    }

    fn spec(&self) -> OracleSpec {
        OracleSpec::exact()
    }

    fn initial_decision(&self) -> Decision {
        self.set.decisions()[0].clone()
    }

    fn call(&self, w: &WeightVector, d: &Dataset, _rng: &mut dyn RngCore) -> Result<Decision> {
        check_weight(self, w, self.loss.k())?;
        lopt_exact(&self.set, self.loss.as_ref(), w, d)
    }
}

/// Exponential-mechanism oracle over a finite candidate set; (ε, 0)-private
/// per call and analytically auditable.
pub struct ExpMechOracle {
    set: FiniteSet,
    loss: Arc<dyn GroupLoss + Send + Sync>,
    epsilon: f64,
    tolerance: f64,
    failure_probability: f64,
    per_call: Option<PerCallBudget>,
}

impl ExpMechOracle {
    pub fn new(
        set: FiniteSet,
        loss: Arc<dyn GroupLoss + Send + Sync>,
        epsilon: f64,
        tolerance: f64,
        failure_probability: f64,
    ) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::invalid("epsilon must be positive"));
        }
        if tolerance < 0.0 {
            return Err(Error::invalid("tolerance must be nonnegative"));
        }
        Ok(ExpMechOracle {
            set,
            loss,
            epsilon,
            tolerance,
            failure_probability,
            per_call: None,
        })
    }

    /// Tags the oracle with the solver-side per-call budget it realizes;
    /// the budget's ε′ must equal this oracle's ε.
    pub fn with_per_call_budget(mut self, per_call: PerCallBudget) -> Result<Self> {
        if (per_call.epsilon_prime() - self.epsilon).abs() > 1e-12 {
            return Err(Error::ContractViolation(format!(
                "per-call epsilon {} does not match oracle epsilon {}",
                per_call.epsilon_prime(),
                self.epsilon
            )));
        }
        self.per_call = Some(per_call);
        Ok(self)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn set(&self) -> &FiniteSet {
        &self.set
    }
}

impl LinearOracle for ExpMechOracle {
    fn describe(&self) -> String {
        format!(
            "exponential-mechanism oracle over {} candidates at epsilon {}",
            self.set.len(),
            self.epsilon
        )
    }

    fn spec(&self) -> OracleSpec {
        OracleSpec {
            tolerance: self.tolerance,
            privacy: self.per_call,
            failure_probability: self.failure_probability,
        }
    }

    fn initial_decision(&self) -> Decision {
        self.set.decisions()[0].clone()
    }

    fn call(&self, w: &WeightVector, d: &Dataset, rng: &mut dyn RngCore) -> Result<Decision> {
        check_weight(self, w, self.loss.k())?;
        lopt_expmech(&self.set, self.loss.as_ref(), w, d, self.epsilon, rng)
    }

    fn analytic_pmf(&self, w: &WeightVector, d: &Dataset) -> Result<FinitePmf> {
        check_weight(self, w, self.loss.k())?;
        lopt_expmech_pmf(&self.set, self.loss.as_ref(), w, d, self.epsilon)
    }
}

/// Noisy projected full-batch gradient descent on w·ℓ(params, D) over the
/// unit ball; Gaussian noise per step calibrated so the step count
/// composes back to the per-call (ε′, δ′). Returns the average iterate.
pub struct NoisySgdOracle {
    loss: Arc<dyn ParamGroupLoss + Send + Sync>,
    privacy: Option<PerCallBudget>,
    steps: usize,
    tolerance: f64,
    failure_probability: f64,
}

impl NoisySgdOracle {
    /// `privacy: None` disables noise (σ = 0), useful for sanity checks.
    pub fn new(
        loss: Arc<dyn ParamGroupLoss + Send + Sync>,
        privacy: Option<PerCallBudget>,
        steps: usize,
        tolerance: f64,
        failure_probability: f64,
    ) -> Result<Self> {
        if !loss.is_convex() {
            return Err(Error::ContractViolation(
                "noisy SGD requires a loss declared convex in its parameters".into(),
            ));
        }
        if steps == 0 {
            return Err(Error::invalid("step count must be at least 1"));
        }
        if let Some(b) = privacy {
            if b.delta_prime() <= 0.0 {
                return Err(Error::invalid(
                    "noisy SGD needs delta' > 0 for Gaussian calibration",
                ));
            }
        }
        Ok(NoisySgdOracle {
            loss,
            privacy,
            steps,
            tolerance,
            failure_probability,
        })
    }

    /// Per-step (ε₀, δ₀) and noise σ for the configured budget; σ = 0 when
    /// privacy is disabled. Sensitivity of the full-batch gradient under a
    /// single-row swap is 2·L_item·‖w‖∞/n.
    pub fn noise_plan(&self, w: &WeightVector, n: usize) -> Result<(f64, Option<PerCallBudget>)> {
        let Some(budget) = self.privacy else {
            return Ok((0.0, None));
        };
        let total = privacy::PrivacyBudget::new(budget.epsilon_prime(), budget.delta_prime())?;
        let per_step = privacy::split_budget(total, self.steps, false)?;
        let w_inf = w.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let sensitivity = 2.0 * self.loss.item_lipschitz() * w_inf / n as f64;
        let sigma = sensitivity * (2.0 * (1.25 / per_step.delta_prime()).ln()).sqrt()
            / per_step.epsilon_prime();
        Ok((sigma, Some(per_step)))
    }
}

impl LinearOracle for NoisySgdOracle {
    fn describe(&self) -> String {
        format!("noisy projected SGD oracle, {} steps", self.steps)
    }

    fn spec(&self) -> OracleSpec {
        OracleSpec {
            tolerance: self.tolerance,
            privacy: self.privacy,
            failure_probability: self.failure_probability,
        }
    }

    fn nonnegative_only(&self) -> bool {
        true
    }

    fn initial_decision(&self) -> Decision {
        Decision::Params(vec![0.0; self.loss.param_dim()])
    }

    fn call(&self, w: &WeightVector, d: &Dataset, rng: &mut dyn RngCore) -> Result<Decision> {
        check_weight(self, w, self.loss.k())?;
        let p = self.loss.param_dim();
        let n = d.n();
        let (sigma, _) = self.noise_plan(w, n)?;
        let w_inf = w.values().iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let grad_bound = self.loss.item_lipschitz() * w_inf + sigma * (p as f64).sqrt();
        let mut params = vec![0.0; p];
        let mut average = vec![0.0; p];
        for t in 1..=self.steps {
            let mut grad = vec![0.0; p];
            for row in d.rows() {
                let g = self.loss.weighted_item_grad(&params, row, w.values())?;
                for (a, b) in grad.iter_mut().zip(g) {
                    *a += b;
                }
            }
            for a in grad.iter_mut() {
                *a /= n as f64;
            }
            let noisy = gaussian_perturb(&grad, sigma, &mut &mut *rng)?;
            // diameter 2 over gradient scale, decaying 1/sqrt(t)
            let step = if grad_bound > 0.0 {
                2.0 / (grad_bound * (t as f64).sqrt())
            } else {
                0.0
            };
            for (pi, gi) in params.iter_mut().zip(&noisy) {
                *pi -= step * gi;
            }
            params = project_to_unit_ball(&params);
            for (a, b) in average.iter_mut().zip(&params) {
                *a += b;
            }
        }
        for a in average.iter_mut() {
            *a /= self.steps as f64;
        }
        Ok(Decision::Params(project_to_unit_ball(&average)))
    }
}

/// Divergence contract attached to a wrapped oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DivergenceKind {
    Pure,
    Smoothed(f64),
    Renyi(f64),
}

/// An oracle tagged with a bounded-divergence contract; audits delegate to
/// the privacy module's exact calculators over the inner analytic pmf.
pub struct DivergenceOracle<O: LinearOracle> {
    inner: O,
    kind: DivergenceKind,
    bound: f64,
}

impl<O: LinearOracle> DivergenceOracle<O> {
    pub fn new(inner: O, kind: DivergenceKind, bound: f64) -> Result<Self> {
        if !(bound >= 0.0) {
            return Err(Error::invalid("divergence bound must be nonnegative"));
        }
        if let DivergenceKind::Smoothed(delta) = kind {
            if !(0.0..1.0).contains(&delta) {
                return Err(Error::invalid("smoothing delta must lie in [0, 1)"));
            }
        }
        if let DivergenceKind::Renyi(phi) = kind {
            if !(phi > 1.0) {
                return Err(Error::invalid("Renyi order must exceed 1"));
            }
        }
        Ok(DivergenceOracle { inner, kind, bound })
    }

    pub fn inner(&self) -> &O {
        &self.inner
    }

    pub fn kind(&self) -> DivergenceKind {
        self.kind
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    fn divergence(&self, p: &FinitePmf, q: &FinitePmf) -> Result<f64> {
        match self.kind {
            DivergenceKind::Pure => privacy::max_divergence(p, q),
            DivergenceKind::Smoothed(delta) => privacy::smoothed_max_divergence(p, q, delta),
            DivergenceKind::Renyi(phi) => privacy::renyi_divergence(p, q, phi),
        }
    }

    /// Worst directed divergence between the oracle's output distribution
    /// on `base` and on every listed single-row neighbor, at weight `w`.
    pub fn audit(
        &self,
        w: &WeightVector,
        base: &Dataset,
        row_alternatives: &[(usize, crate::domain::DataRow)],
    ) -> Result<AuditReport> {
        if row_alternatives.is_empty() {
            return Err(Error::invalid("audit requires at least one neighbor row"));
        }
        let base_pmf = self.inner.analytic_pmf(w, base)?;
        let mut observed = 0.0f64;
        let mut worst = None;
        for (j, (index, row)) in row_alternatives.iter().enumerate() {
            let neighbor = base.with_row_replaced(*index, row.clone())?;
            let neighbor_pmf = self.inner.analytic_pmf(w, &neighbor)?;
            let d = self
                .divergence(&base_pmf, &neighbor_pmf)?
                .max(self.divergence(&neighbor_pmf, &base_pmf)?);
            if d > observed {
                observed = d;
                worst = Some(j);
            }
        }
        let delta = match self.kind {
            DivergenceKind::Smoothed(delta) => delta,
            _ => 0.0,
        };
        Ok(AuditReport {
            mechanism: self.inner.describe(),
            epsilon_claimed: self.bound,
            delta_claimed: delta,
            observed,
            pass: observed <= self.bound + 1e-9,
            worst_neighbor_index: worst,
        })
    }
}

impl<O: LinearOracle> LinearOracle for DivergenceOracle<O> {
    fn describe(&self) -> String {
        format!("{} with divergence bound {}", self.inner.describe(), self.bound)
    }

    fn spec(&self) -> OracleSpec {
        self.inner.spec()
    }

    fn nonnegative_only(&self) -> bool {
        self.inner.nonnegative_only()
    }

    fn initial_decision(&self) -> Decision {
        self.inner.initial_decision()
    }

    fn call(&self, w: &WeightVector, d: &Dataset, rng: &mut dyn RngCore) -> Result<Decision> {
        self.inner.call(w, d, rng)
    }

    fn analytic_pmf(&self, w: &WeightVector, d: &Dataset) -> Result<FinitePmf> {
        self.inner.analytic_pmf(w, d)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{DataRow, FnItemizedLoss, LossVector};
    use crate::privacy::derive_rng;
    use rand::Rng;

    // candidate i's itemized loss is table[i] scaled by the row label so
    // dataset losses respond to single-row swaps
    fn table_loss(table: Vec<Vec<f64>>) -> FnItemizedLoss {
        let k = table[0].len();
        FnItemizedLoss::new(k, move |c, row| {
            let i = match c {
                Decision::Index(i) => *i,
                _ => return Err(Error::invalid("index decisions only")),
            };
            let scale = if row.label == 1 { 1.0 } else { 0.5 };
            LossVector::new(table[i].iter().map(|v| v * scale).collect())
        })
    }

    fn small_dataset(n: usize) -> Dataset {
        Dataset::new(
            (0..n)
                .map(|i| DataRow::new(vec![i as f64 / n as f64], 1, (i % 2) as i64))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn exact_oracle_two_candidates() {
        let loss = table_loss(vec![vec![0.2, 0.8], vec![0.6, 0.1]]);
        let set = FiniteSet::indexed(2).unwrap();
        let d = Dataset::new(vec![DataRow::new(vec![0.0], 1, 1)]).unwrap();
        let w = WeightVector::new(vec![1.0, 1.0]).unwrap();
        let c = lopt_exact(&set, &loss, &w, &d).unwrap();
        assert_eq!(c, Decision::Index(1));
        // zero weights tie; lowest index wins
        let w0 = WeightVector::new(vec![0.0, 0.0]).unwrap();
        assert_eq!(lopt_exact(&set, &loss, &w0, &d).unwrap(), Decision::Index(0));
    }

    #[test]
    fn exact_oracle_matches_brute_force_scan() {
        let mut rng = derive_rng(41, 0);
        let m = 50;
        let table: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..3).map(|_| rng.gen::<f64>()).collect())
            .collect();
        let loss = table_loss(table.clone());
        let set = FiniteSet::indexed(m).unwrap();
        let d = small_dataset(4);
        for _ in 0..20 {
            let w = WeightVector::new((0..3).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect())
                .unwrap();
            let chosen = lopt_exact(&set, &loss, &w, &d).unwrap();
            let score = |i: usize| {
                dot(
                    w.values(),
                    loss.loss(&Decision::Index(i), &d).unwrap().as_slice(),
                )
            };
            let Decision::Index(ci) = chosen else { panic!() };
            for i in 0..m {
                assert!(score(ci) <= score(i) + 1e-12);
            }
        }
    }

    #[test]
    fn expmech_pmf_reference_ratio() {
        // scores 0.7 vs 1.0, w=(1,1), K=2, n=10, eps=2: exponent is
        // -eps*n*score/(2*sqrt(2)*sqrt(2)) = -5*score, ratio e^{1.5}
        let loss = FnItemizedLoss::new(2, |c, _row| {
            LossVector::new(match c {
                Decision::Index(0) => vec![0.35, 0.35],
                _ => vec![0.5, 0.5],
            })
        });
        let set = FiniteSet::indexed(2).unwrap();
        let d = small_dataset(10);
        let w = WeightVector::new(vec![1.0, 1.0]).unwrap();
        let pmf = lopt_expmech_pmf(&set, &loss, &w, &d, 2.0).unwrap();
        let ratio = pmf.probabilities()[0] / pmf.probabilities()[1];
        assert!((ratio - 1.5f64.exp()).abs() < 1e-9, "ratio {ratio}");
    }

    #[test]
    fn expmech_huge_epsilon_recovers_argmin() {
        let loss = table_loss(vec![vec![0.9], vec![0.1], vec![0.5]]);
        let set = FiniteSet::indexed(3).unwrap();
        let d = small_dataset(5);
        let w = WeightVector::new(vec![1.0]).unwrap();
        let pmf = lopt_expmech_pmf(&set, &loss, &w, &d, 1e6).unwrap();
        assert!(pmf.probabilities()[1] >= 1.0 - 1e-9);
    }

    #[test]
    fn expmech_zero_weight_uniform_fallback() {
        let loss = table_loss(vec![vec![0.9], vec![0.1]]);
        let set = FiniteSet::indexed(2).unwrap();
        let d = small_dataset(5);
        let w = WeightVector::new(vec![0.0]).unwrap();
        let pmf = lopt_expmech_pmf(&set, &loss, &w, &d, 1.0).unwrap();
        assert_eq!(pmf.probabilities(), &[0.5, 0.5]);
    }

    #[test]
    fn expmech_oracle_audit_passes_bugged_fails() {
        // candidates 0 and 1 react to a label flip in opposite directions,
        // so one swap moves their score gap by the full sensitivity bound
        let loss = || {
            FnItemizedLoss::new(2, |c, row| {
                let Decision::Index(i) = c else {
                    return Err(Error::invalid("index decisions only"));
                };
                let y = row.label as f64;
                LossVector::new(match i {
                    0 => vec![y, y],
                    1 => vec![1.0 - y, 1.0 - y],
                    2 => vec![0.5, 0.5],
                    _ => vec![0.8 * y, 0.2],
                })
            })
        };
        let set = FiniteSet::indexed(4).unwrap();
        let d = small_dataset(8);
        let w = WeightVector::new(vec![1.0, 1.0]).unwrap();
        let eps = 1.0;
        let oracle =
            ExpMechOracle::new(set.clone(), Arc::new(loss()), eps, 0.1, 0.1).unwrap();
        let wrapped = DivergenceOracle::new(oracle, DivergenceKind::Pure, eps).unwrap();
        let alts: Vec<(usize, DataRow)> = (0..8)
            .map(|i| (i, DataRow::new(vec![0.5], 1, 1 - (i as i64 % 2))))
            .collect();
        let report = wrapped.audit(&w, &d, &alts).unwrap();
        assert!(report.pass, "observed {}", report.observed);

        // halved declared sensitivity doubles the effective epsilon
        let bugged = ExpMechOracle::new(set, Arc::new(loss()), 2.0 * eps, 0.1, 0.1).unwrap();
        let wrapped = DivergenceOracle::new(bugged, DivergenceKind::Pure, eps).unwrap();
        let report = wrapped.audit(&w, &d, &alts).unwrap();
        assert!(!report.pass, "observed {}", report.observed);
    }

    #[test]
    fn renyi_audit_below_pure_audit() {
        let loss = table_loss(vec![vec![0.2], vec![0.9]]);
        let set = FiniteSet::indexed(2).unwrap();
        let d = small_dataset(6);
        let w = WeightVector::new(vec![1.0]).unwrap();
        let alts: Vec<(usize, DataRow)> =
            (0..6).map(|i| (i, DataRow::new(vec![0.0], 1, 1 - (i as i64 % 2)))).collect();
        let make = || ExpMechOracle::new(set.clone(), Arc::new(table_loss(vec![vec![0.2], vec![0.9]])), 1.0, 0.1, 0.1).unwrap();
        let pure = DivergenceOracle::new(make(), DivergenceKind::Pure, 1.0).unwrap();
        let renyi = DivergenceOracle::new(make(), DivergenceKind::Renyi(2.0), 1.0).unwrap();
        let smooth0 = DivergenceOracle::new(make(), DivergenceKind::Smoothed(0.0), 1.0).unwrap();
        let dp = pure.audit(&w, &d, &alts).unwrap().observed;
        let dr = renyi.audit(&w, &d, &alts).unwrap().observed;
        let ds = smooth0.audit(&w, &d, &alts).unwrap().observed;
        assert!(dr <= dp + 1e-12);
        assert!((ds - dp).abs() < 1e-15);
        let _ = loss;
    }

    #[test]
    fn threshold_examples() {
        // K=1, eps=1, tau=0.1, theta=0.1, P=1: 80*(2 ln3 + ln10)
        let n0 =
            expmech_sample_threshold(1, 1.0, 0.1, 0.1, RangeComplexity::ParamDim(1)).unwrap();
        let expected = (80.0 * (2.0 * 3.0f64.ln() + 10.0f64.ln())).ceil() as usize;
        assert_eq!(n0, expected);
        let finite =
            expmech_sample_threshold(1, 1.0, 0.1, 0.1, RangeComplexity::FiniteSize(20)).unwrap();
        let expected =
            (80.0 * (((20.0f64).ln() + 1.0) * 3.0f64.ln() + 10.0f64.ln())).ceil() as usize;
        assert_eq!(finite, expected);
        assert!(expmech_sample_threshold(1, 1.0, 0.0, 0.1, RangeComplexity::ParamDim(1)).is_err());
    }

    #[test]
    fn group_embedding_placement() {
        assert_eq!(
            group_embedding(&[0.6, 0.8], 2, 2).unwrap(),
            vec![0.0, 0.0, 0.6, 0.8]
        );
        assert_eq!(
            group_embedding(&[0.6, 0.8], 1, 2).unwrap(),
            vec![0.6, 0.8, 0.0, 0.0]
        );
        assert!(group_embedding(&[1.0], 3, 2).is_err());
        assert!(group_embedding(&[1.0], 0, 2).is_err());
    }

    #[test]
    fn group_embedding_norm_and_linearity() {
        let mut rng = derive_rng(41, 1);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() - 0.5).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.gen::<f64>() - 0.5).collect();
            let k = rng.gen_range(1..=4);
            let ex = group_embedding(&x, k, 4).unwrap();
            assert!((l2_norm(&ex) - l2_norm(&x)).abs() < 1e-15);
            let ey = group_embedding(&y, k, 4).unwrap();
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            let esum = group_embedding(&sum, k, 4).unwrap();
            for i in 0..esum.len() {
                assert!((esum[i] - (ex[i] + ey[i])).abs() < 1e-15);
            }
        }
    }

    fn ls_dataset(n: usize, seed: u64) -> Dataset {
        let mut rng = derive_rng(seed, 2);
        Dataset::new(
            (0..n)
                .map(|_| {
                    let x = project_to_unit_ball(
                        &(0..2).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect::<Vec<_>>(),
                    );
                    DataRow::new(x, rng.gen_range(1..=2), rng.gen_range(0..=1))
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn noisy_sgd_sigma_zero_matches_dense_net() {
        use crate::objectives::least_squares::WeightedLsLoss;
        let loss = Arc::new(WeightedLsLoss::new(2, 2).unwrap());
        let d = ls_dataset(30, 77);
        let w = WeightVector::new(vec![1.0, 0.6]).unwrap();
        let oracle = NoisySgdOracle::new(loss.clone(), None, 400, 1e-3, 0.0).unwrap();
        let mut rng = derive_rng(77, 3);
        let Decision::Params(params) = oracle.call(&w, &d, &mut rng).unwrap() else {
            panic!()
        };
        let objective = |p: &[f64]| {
            dot(
                w.values(),
                loss.loss(&Decision::Params(p.to_vec()), &d).unwrap().as_slice(),
            )
        };
        // dense polar net over the unit disk
        let mut best = f64::INFINITY;
        for r in 0..=31 {
            for a in 0..32 {
                let radius = r as f64 / 31.0;
                let angle = a as f64 * std::f64::consts::TAU / 32.0;
                best = best.min(objective(&[radius * angle.cos(), radius * angle.sin()]));
            }
        }
        let got = objective(&params);
        assert!(got <= best + 1e-3, "sgd {got} vs net {best}");
    }

    #[test]
    fn noisy_sgd_budget_round_trip() {
        use crate::objectives::least_squares::WeightedLsLoss;
        let loss = Arc::new(WeightedLsLoss::new(2, 2).unwrap());
        let total = privacy::PrivacyBudget::new(1.0, 1e-5).unwrap();
        let per_call = privacy::split_budget(total, 10, false).unwrap();
        let oracle = NoisySgdOracle::new(loss, Some(per_call), 20, 0.1, 0.1).unwrap();
        let w = WeightVector::new(vec![1.0, 1.0]).unwrap();
        let (sigma, per_step) = oracle.noise_plan(&w, 50).unwrap();
        assert!(sigma > 0.0);
        let per_step = per_step.unwrap();
        let call_total =
            privacy::PrivacyBudget::new(per_call.epsilon_prime(), per_call.delta_prime()).unwrap();
        let back = privacy::compose_back(&per_step, call_total).unwrap();
        assert!(back.epsilon <= per_call.epsilon_prime() + 1e-12);
        assert!(back.delta <= per_call.delta_prime() + 1e-20);
    }

    #[test]
    fn noisy_sgd_contract_checks() {
        use crate::objectives::least_squares::WeightedLsLoss;
        let loss = Arc::new(WeightedLsLoss::new(2, 2).unwrap());
        let oracle = NoisySgdOracle::new(loss, None, 10, 0.1, 0.1).unwrap();
        let d = ls_dataset(5, 9);
        let w = WeightVector::new(vec![1.0, -1.0]).unwrap();
        let mut rng = derive_rng(9, 4);
        assert!(matches!(
            oracle.call(&w, &d, &mut rng),
            Err(Error::ContractViolation(_))
        ));
        assert!(matches!(
            oracle.analytic_pmf(&WeightVector::new(vec![1.0, 1.0]).unwrap(), &d),
            Err(Error::UnsupportedAudit(_))
        ));
    }

    #[test]
    fn oracle_tolerance_contract_expmech() {
        // at the finite-set threshold, w.l(returned) <= min + tau*||w||
        // should hold in >= 1-theta of seeded trials
        let table: Vec<Vec<f64>> = vec![vec![0.2, 0.6], vec![0.8, 0.1], vec![0.4, 0.4]];
        let loss = table_loss(table);
        let set = FiniteSet::indexed(3).unwrap();
        let tau = 0.2;
        let theta = 0.1;
        let eps = 1.0;
        let n = expmech_sample_threshold(2, eps, tau, theta, RangeComplexity::FiniteSize(3))
            .unwrap();
        let d = small_dataset(n);
        let w = WeightVector::new(vec![0.7, 0.7]).unwrap();
        let oracle = ExpMechOracle::new(set.clone(), Arc::new(table_loss(vec![
            vec![0.2, 0.6], vec![0.8, 0.1], vec![0.4, 0.4],
        ])), eps, tau, theta)
        .unwrap();
        let scores: Vec<f64> = (0..3)
            .map(|i| dot(w.values(), loss.loss(&Decision::Index(i), &d).unwrap().as_slice()))
            .collect();
        let min = scores.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut hits = 0;
        for trial in 0..200u64 {
            let mut rng = derive_rng(500 + trial, 5);
            let Decision::Index(i) = oracle.call(&w, &d, &mut rng).unwrap() else { panic!() };
            if scores[i] <= min + tau * w.norm() + 1e-12 {
                hits += 1;
            }
        }
        assert!(hits >= 180, "only {hits}/200 trials met the tolerance");
    }
}
