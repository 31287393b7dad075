//! The three CGOO solvers: one-shot exponential sampling over a finite
//! candidate set, the iterative private linear-optimizer loop, and a
//! projection-free conditional-gradient (Frank-Wolfe) variant, plus the
//! iteration/penalty budget helpers and mixture evaluation.

use rand::RngCore;
use serde::Serialize;

use crate::domain::{
    penalty_weight, Dataset, Decision, FiniteSet, GroupLoss, RandomizedDecision, ScalarObjective,
};
use crate::error::{Error, Result};
use crate::oracles::{lopt_exact, LinearOracle, WeightVector};
use crate::privacy::{
    compose_back, exponential_mechanism_pmf, split_budget, FinitePmf, PrivacyBudget,
};

/// Default hard cap on resolved iteration counts. The closed-form T grows
/// like K³(1+G)²/α² and is astronomically conservative at small α.
pub const DEFAULT_ITERATION_CAP: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Target accuracy α for both the excess objective and the constraint.
    pub alpha: f64,
    /// Iteration count T; `None` resolves from the closed form (capped).
    pub iterations: Option<usize>,
    /// Penalty weight G; `None` resolves via `penalty_weight(alpha, L_f, K)`.
    pub penalty: Option<f64>,
    /// Oracle tolerance τ; `None` resolves via `resolve_oracle_tolerance`.
    pub tolerance: Option<f64>,
    pub seed: u64,
    pub privacy: Option<PrivacyBudget>,
    pub iteration_cap: usize,
    /// Drop the factor G on ∇g when forming oracle weights, reproducing the
    /// published pseudocode verbatim instead of the analyzed variant.
    pub literal_pseudocode: bool,
}

impl SolverConfig {
    pub fn new(alpha: f64, seed: u64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        Ok(SolverConfig {
            alpha,
            iterations: None,
            penalty: None,
            tolerance: None,
            seed,
            privacy: None,
            iteration_cap: DEFAULT_ITERATION_CAP,
            literal_pseudocode: false,
        })
    }

    pub fn with_privacy(mut self, budget: PrivacyBudget) -> Self {
        self.privacy = Some(budget);
        self
    }

    pub fn with_iterations(mut self, t: usize) -> Self {
        self.iterations = Some(t);
        self
    }

    pub fn with_penalty(mut self, g: f64) -> Self {
        self.penalty = Some(g);
        self
    }
}

/// Constants fixed before a run; serialized into every report.
#[derive(Debug, Clone, Serialize)]
pub struct ResolvedConstants {
    #[serde(rename = "G")]
    pub penalty: f64,
    #[serde(rename = "T")]
    pub iterations: usize,
    pub tau: f64,
    pub eps_prime: Option<f64>,
    pub delta_prime: Option<f64>,
}

/// Per-iteration snapshot of the running uniform mixture.
#[derive(Debug, Clone, Serialize)]
pub struct TraceStep {
    pub t: usize,
    pub f_value: f64,
    pub g_value: f64,
    pub h_value: f64,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub solver: String,
    pub decision: RandomizedDecision,
    pub resolved: ResolvedConstants,
    /// Recomputed from the returned mixture, not trusted from the loop.
    pub f_value: f64,
    pub g_value: f64,
    /// Whether g_value ≤ α; infeasibility is reported, never an error.
    pub feasible_target_alpha: bool,
    pub seed: u64,
    pub iterations_used: usize,
    pub budget_consumed: Option<PrivacyBudget>,
    pub warnings: Vec<String>,
    pub trace: Vec<TraceStep>,
}

impl SolveResult {
    /// Report body for serialization; the trace is written separately.
    pub fn report(&self, trace_path: Option<&str>) -> serde_json::Value {
        serde_json::json!({
            "solver": self.solver,
            "resolved": self.resolved,
            "f_value": self.f_value,
            "g_value": self.g_value,
            "feasible_target_alpha": self.feasible_target_alpha,
            "seed": self.seed,
            "iterations_used": self.iterations_used,
            "budget_consumed": self.budget_consumed,
            "warnings": self.warnings,
            "trace_path": trace_path,
        })
    }
}

/// T = ⌈36(1+K)K²(1+G)²(3+α)²/α²⌉, capped at `cap` with a warning when the
/// closed form exceeds it.
pub fn resolve_iteration_budget(
    k: usize,
    alpha: f64,
    penalty: f64,
    cap: usize,
) -> Result<(usize, Option<String>)> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(penalty > 0.0) {
        return Err(Error::invalid("penalty weight must be positive"));
    }
    if cap == 0 {
        return Err(Error::invalid("iteration cap must be at least 1"));
    }
    let kf = k as f64;
    let t = 36.0 * (1.0 + kf) * kf * kf * (1.0 + penalty).powi(2) * (3.0 + alpha).powi(2)
        / (alpha * alpha);
    let t = t.ceil();
    if t > cap as f64 {
        Ok((
            cap,
            Some(format!(
                "iteration budget {t:.0} exceeds the cap {cap}; running the capped count"
            )),
        ))
    } else {
        Ok((t as usize, None))
    }
}

/// τ = α/(6K(1+G)).
pub fn resolve_oracle_tolerance(k: usize, alpha: f64, penalty: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if !(penalty > 0.0) {
        return Err(Error::invalid("penalty weight must be positive"));
    }
    Ok(alpha / (6.0 * k as f64 * (1.0 + penalty)))
}

/// Mean loss vector of the mixture, then f and g of it.
pub fn evaluate(
    decision: &RandomizedDecision,
    f: &ScalarObjective,
    g: &ScalarObjective,
    loss: &dyn GroupLoss,
    d: &Dataset,
) -> Result<(f64, f64)> {
    let mean = decision.mean_loss(loss, d)?;
    Ok((f.value(mean.as_slice()), g.value(mean.as_slice())))
}

#[derive(Debug, Clone)]
pub struct BruteForceOutcome {
    pub decision: Option<Decision>,
    pub index: Option<usize>,
    pub f_star: Option<f64>,
    pub feasible: bool,
}

/// Exhaustive argmin of f(ℓ(c, D)) subject to g(ℓ(c, D)) ≤ 0; ties break
/// to the lowest index.
pub fn brute_force_cgoo(
    set: &FiniteSet,
    loss: &dyn GroupLoss,
    f: &ScalarObjective,
    g: &ScalarObjective,
    d: &Dataset,
) -> Result<BruteForceOutcome> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in set.decisions().iter().enumerate() {
        let l = loss.loss(c, d)?;
        if g.value(l.as_slice()) > 0.0 {
            continue;
        }
        let fv = f.value(l.as_slice());
        match best {
            Some((_, s)) if fv >= s => {}
            _ => best = Some((i, fv)),
        }
    }
    Ok(match best {
        Some((i, fv)) => BruteForceOutcome {
            decision: Some(set.decisions()[i].clone()),
            index: Some(i),
            f_star: Some(fv),
            feasible: true,
        },
        None => BruteForceOutcome {
            decision: None,
            index: None,
            f_star: None,
            feasible: false,
        },
    })
}

fn resolve_penalty(config: &SolverConfig, f: &ScalarObjective) -> Result<f64> {
    match config.penalty {
        Some(g) if g > 0.0 => Ok(g),
        Some(g) => Err(Error::invalid(format!("penalty weight must be positive, got {g}"))),
        None => penalty_weight(config.alpha, f.lipschitz(), f.k()),
    }
}

fn check_dims(f: &ScalarObjective, g: &ScalarObjective, loss: &dyn GroupLoss) -> Result<usize> {
    let k = loss.k();
    if f.k() != k {
        return Err(Error::DimensionMismatch { expected: k, got: f.k() });
    }
    if g.k() != k {
        return Err(Error::DimensionMismatch { expected: k, got: g.k() });
    }
    Ok(k)
}

/// Oracle weight r = ∇f(l) + G·1[g(l) ≥ 0]·∇g(l); the literal-pseudocode
/// mode omits the factor G.
pub fn penalized_weight(
    f: &ScalarObjective,
    g: &ScalarObjective,
    penalty: f64,
    l: &[f64],
    literal_pseudocode: bool,
) -> Vec<f64> {
    let mut r = f.gradient(l);
    if g.value(l) >= 0.0 {
        let scale = if literal_pseudocode { 1.0 } else { penalty };
        for (ri, gi) in r.iter_mut().zip(g.gradient(l)) {
            *ri += scale * gi;
        }
    }
    r
}

/// Output distribution of the exponential-sampling solver: one draw over
/// candidates scored by h = f + G·max(0, g) with score sensitivity
/// √K(1+G)/n.
pub fn exponential_sampling_pmf(
    set: &FiniteSet,
    loss: &dyn GroupLoss,
    f: &ScalarObjective,
    g: &ScalarObjective,
    penalty: f64,
    eps: f64,
    d: &Dataset,
) -> Result<FinitePmf> {
    let k = check_dims(f, g, loss)?;
    let mut scores = Vec::with_capacity(set.len());
    for c in set.decisions() {
        let l = loss.loss(c, d)?;
        scores.push(f.value(l.as_slice()) + penalty * g.value(l.as_slice()).max(0.0));
    }
    let sensitivity = (k as f64).sqrt() * (1.0 + penalty) / d.n() as f64;
    exponential_mechanism_pmf(&scores, sensitivity, eps)
}

/// One exponential-mechanism draw over the candidate set; requires a pure
/// (ε, 0) budget in the config.
pub fn solve_exponential_sampling(
    set: &FiniteSet,
    loss: &dyn GroupLoss,
    f: &ScalarObjective,
    g: &ScalarObjective,
    config: &SolverConfig,
    d: &Dataset,
    rng: &mut dyn RngCore,
) -> Result<SolveResult> {
    check_dims(f, g, loss)?;
    if set.is_empty() {
        return Err(Error::invalid("empty candidate set"));
    }
    let budget = config
        .privacy
        .ok_or_else(|| Error::invalid("exponential sampling requires a privacy budget"))?;
    if budget.delta != 0.0 {
        return Err(Error::invalid(
            "exponential sampling is a pure mechanism; delta must be 0",
        ));
    }
    let penalty = resolve_penalty(config, f)?;
    let pmf = exponential_sampling_pmf(set, loss, f, g, penalty, budget.epsilon, d)?;
    let mut rng = rng;
    let i = pmf.sample(&mut rng);
    let decision = RandomizedDecision::singleton(set.decisions()[i].clone());
    let (f_value, g_value) = evaluate(&decision, f, g, loss, d)?;
    Ok(SolveResult {
        solver: "exp_sampling".into(),
        decision,
        resolved: ResolvedConstants {
            penalty,
            iterations: 1,
            tau: 0.0,
            eps_prime: Some(budget.epsilon),
            delta_prime: Some(0.0),
        },
        f_value,
        g_value,
        feasible_target_alpha: g_value <= config.alpha,
        seed: config.seed,
        iterations_used: 1,
        budget_consumed: Some(budget),
        warnings: Vec::new(),
        trace: vec![TraceStep {
            t: 1,
            f_value,
            g_value,
            h_value: f_value + penalty * g_value.max(0.0),
        }],
    })
}

/// Trace entry for the uniform mixture of the first t iterates, given the
/// running sum of their loss vectors.
fn mixture_trace_step(
    t: usize,
    loss_sum: &[f64],
    f: &ScalarObjective,
    g: &ScalarObjective,
    penalty: f64,
) -> TraceStep {
    let mean: Vec<f64> = loss_sum.iter().map(|v| v / t as f64).collect();
    let fv = f.value(&mean);
    let gv = g.value(&mean);
    TraceStep {
        t,
        f_value: fv,
        g_value: gv,
        h_value: fv + penalty * gv.max(0.0),
    }
}

/// Iterative loop around a linear-optimizer oracle: the first iterate is
/// the oracle's initial decision, each next iterate is the oracle's answer
/// to the penalized weight at the current loss vector, and the result is
/// the uniform mixture of all T iterates.
pub fn solve_iterative_lopt(
    oracle: &dyn LinearOracle,
    loss: &dyn GroupLoss,
    f: &ScalarObjective,
    g: &ScalarObjective,
    config: &SolverConfig,
    d: &Dataset,
    rng: &mut dyn RngCore,
) -> Result<SolveResult> {
    let k = check_dims(f, g, loss)?;
    let penalty = resolve_penalty(config, f)?;
    let mut warnings = Vec::new();
    let iterations = match config.iterations {
        Some(t) if t >= 1 => t,
        Some(_) => return Err(Error::invalid("iteration count must be at least 1")),
        None => {
            let (t, warning) = resolve_iteration_budget(k, config.alpha, penalty, config.iteration_cap)?;
            if let Some(w) = warning {
                warnings.push(w);
            }
            t
        }
    };
    let tau = match config.tolerance {
        Some(t) if t >= 0.0 => t,
        Some(_) => return Err(Error::invalid("tolerance must be nonnegative")),
        None => resolve_oracle_tolerance(k, config.alpha, penalty)?,
    };
    let spec = oracle.spec();
    if spec.tolerance > tau + 1e-12 {
        return Err(Error::ContractViolation(format!(
            "oracle tolerance {} exceeds the resolved tolerance {tau}",
            spec.tolerance
        )));
    }
    let (per_call, budget_consumed) = match spec.privacy {
        Some(per_call) => {
            let total = config.privacy.ok_or_else(|| {
                Error::invalid("a private oracle requires a total privacy budget in the config")
            })?;
            let own = split_budget(total, iterations, per_call.delta_prime() == 0.0)?;
            if (own.epsilon_prime() - per_call.epsilon_prime()).abs() > 1e-12
                || (own.delta_prime() - per_call.delta_prime()).abs() > 1e-18
                || own.iterations() != per_call.iterations()
            {
                return Err(Error::ContractViolation(format!(
                    "oracle per-call budget (eps' {}, delta' {}, T {}) does not match the \
                     solver split (eps' {}, delta' {}, T {})",
                    per_call.epsilon_prime(),
                    per_call.delta_prime(),
                    per_call.iterations(),
                    own.epsilon_prime(),
                    own.delta_prime(),
                    own.iterations()
                )));
            }
            (Some(per_call), Some(compose_back(&per_call, total)?))
        }
        None => {
            if config.privacy.is_some() {
                warnings.push("privacy budget configured but the oracle is non-private; no noise added".into());
            }
            (None, None)
        }
    };

    let mut members = Vec::with_capacity(iterations);
    let mut current = oracle.initial_decision();
    let mut current_loss = loss.loss(&current, d)?;
    members.push(current.clone());
    let mut loss_sum = current_loss.as_slice().to_vec();
    let mut trace = Vec::with_capacity(iterations);
    trace.push(mixture_trace_step(1, &loss_sum, f, g, penalty));
    for t in 1..iterations {
        let r = penalized_weight(f, g, penalty, current_loss.as_slice(), config.literal_pseudocode);
        let w = WeightVector::new(r)?;
        current = oracle.call(&w, d, rng)?;
        current_loss = loss.loss(&current, d)?;
        members.push(current.clone());
        for (s, v) in loss_sum.iter_mut().zip(current_loss.as_slice()) {
            *s += v;
        }
        trace.push(mixture_trace_step(t + 1, &loss_sum, f, g, penalty));
    }
    let decision = RandomizedDecision::uniform(members)?;
    let (f_value, g_value) = evaluate(&decision, f, g, loss, d)?;
    Ok(SolveResult {
        solver: "iterative_lopt".into(),
        decision,
        resolved: ResolvedConstants {
            penalty,
            iterations,
            tau,
            eps_prime: per_call.map(|p| p.epsilon_prime()),
            delta_prime: per_call.map(|p| p.delta_prime()),
        },
        f_value,
        g_value,
        feasible_target_alpha: g_value <= config.alpha,
        seed: config.seed,
        iterations_used: iterations,
        budget_consumed,
        warnings,
        trace,
    })
}

/// T ≥ 2K(β_f + Gβ_g)/α · log(2K(β_f + Gβ_g)/α), floored at 3 and capped.
pub fn resolve_frank_wolfe_iterations(
    k: usize,
    alpha: f64,
    penalty: f64,
    beta_f: f64,
    beta_g: f64,
    cap: usize,
) -> Result<(usize, Option<String>)> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    if beta_f < 0.0 || beta_g < 0.0 {
        return Err(Error::invalid("smoothness constants must be nonnegative"));
    }
    let base = 2.0 * k as f64 * (beta_f + penalty * beta_g) / alpha;
    let t = (base * base.max(1.0).ln()).ceil().max(3.0);
    if t > cap as f64 {
        Ok((
            cap,
            Some(format!(
                "iteration budget {t:.0} exceeds the cap {cap}; running the capped count"
            )),
        ))
    } else {
        Ok((t as usize, None))
    }
}

/// Conditional-gradient solver: exact linear subproblems over the candidate
/// set, convex-combination updates on loss vectors with step 2/(t+2), and a
/// uniform mixture over the visited decisions. Requires smoothness
/// constants on both f and g.
pub fn solve_frank_wolfe(
    set: &FiniteSet,
    loss: &dyn GroupLoss,
    f: &ScalarObjective,
    g: &ScalarObjective,
    config: &SolverConfig,
    d: &Dataset,
) -> Result<SolveResult> {
    let k = check_dims(f, g, loss)?;
    if set.is_empty() {
        return Err(Error::invalid("empty candidate set"));
    }
    let beta_f = f
        .smoothness()
        .ok_or_else(|| Error::invalid("the conditional-gradient solver requires a smoothness constant on f"))?;
    let beta_g = g
        .smoothness()
        .ok_or_else(|| Error::invalid("the conditional-gradient solver requires a smoothness constant on g"))?;
    let penalty = resolve_penalty(config, f)?;
    let mut warnings = Vec::new();
    let iterations = match config.iterations {
        Some(t) if t >= 1 => t,
        Some(_) => return Err(Error::invalid("iteration count must be at least 1")),
        None => {
            let (t, warning) = resolve_frank_wolfe_iterations(
                k,
                config.alpha,
                penalty,
                beta_f,
                beta_g,
                config.iteration_cap,
            )?;
            if let Some(w) = warning {
                warnings.push(w);
            }
            t
        }
    };

    let mut members = Vec::with_capacity(iterations);
    members.push(set.decisions()[0].clone());
    let mut l_t = loss.loss(&members[0], d)?.into_vec();
    let mut trace = Vec::with_capacity(iterations);
    trace.push(TraceStep {
        t: 1,
        f_value: f.value(&l_t),
        g_value: g.value(&l_t),
        h_value: f.value(&l_t) + penalty * g.value(&l_t).max(0.0),
    });
    for t in 1..iterations {
        let r = penalized_weight(f, g, penalty, &l_t, false);
        let w = WeightVector::new(r)?;
        let next = lopt_exact(set, loss, &w, d)?;
        let l_next = loss.loss(&next, d)?;
        let gamma = 2.0 / (t as f64 + 2.0);
        for (a, b) in l_t.iter_mut().zip(l_next.as_slice()) {
            *a = (1.0 - gamma) * *a + gamma * b;
        }
        members.push(next);
        // trace records h on the tracked convex combination l_{t+1}
        trace.push(TraceStep {
            t: t + 1,
            f_value: f.value(&l_t),
            g_value: g.value(&l_t),
            h_value: f.value(&l_t) + penalty * g.value(&l_t).max(0.0),
        });
    }
    let decision = RandomizedDecision::uniform(members)?;
    let (f_value, g_value) = evaluate(&decision, f, g, loss, d)?;
    Ok(SolveResult {
        solver: "frank_wolfe".into(),
        decision,
        resolved: ResolvedConstants {
            penalty,
            iterations,
            tau: 0.0,
            eps_prime: None,
            delta_prime: None,
        },
        f_value,
        g_value,
        feasible_target_alpha: g_value <= config.alpha,
        seed: config.seed,
        iterations_used: iterations,
        budget_consumed: None,
        warnings,
        trace,
    })
}
