//! Builds a scenario from its config, runs the configured solver, audits
//! private mechanisms, and writes the report artifacts.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context};
use cgoo::domain::{
    dot, penalty_weight, DataRow, Dataset, Decision, FiniteSet, FnItemizedLoss, GroupLoss,
    LossVector, ScalarObjective,
};
use cgoo::objectives::confusion::flat_index;
use cgoo::objectives::fairness::{
    classification_error_objective, demographic_parity_constraint, equalized_odds_constraint,
    ThresholdRateLoss,
};
use cgoo::objectives::gini::gini_constraint;
use cgoo::objectives::least_squares::WeightedLsLoss;
use cgoo::objectives::lower_bound::LowerBoundInstance;
use cgoo::oracles::{
    lopt_expmech_pmf, ExactOracle, ExpMechOracle, LinearOracle, NoisySgdOracle, WeightVector,
};
use cgoo::privacy::{
    audit_finite_mechanism, derive_rng, split_budget, AuditReport, FinitePmf, PerCallBudget,
    PrivacyBudget,
};
use cgoo::solvers::{
    exponential_sampling_pmf, penalized_weight, resolve_iteration_budget,
    resolve_oracle_tolerance, SolveResult,
};
use cgoo::{
    brute_force_cgoo, solve_exponential_sampling, solve_frank_wolfe, solve_iterative_lopt,
    SolverConfig,
};

use crate::config::ScenarioConfig;
use crate::exit_codes;
use crate::ingest;

/// Cap on auto-resolved iteration counts; the closed form is far too
/// conservative for interactive runs.
const CLI_ITERATION_CAP: usize = 4000;
/// Rows audited per run; full pmf recomputation per neighbor gets slow on
/// large datasets, and a 64-row prefix already exercises every swap kind.
const AUDIT_ROW_CAP: usize = 64;
const ORACLE_FAILURE_PROB: f64 = 0.05;
const SGD_STEPS: usize = 200;
const DEFAULT_ETA: f64 = 50.0;
const FEASIBILITY_SLACK: f64 = 1e-9;

pub struct BuiltScenario {
    pub dataset: Dataset,
    pub loss: Arc<dyn GroupLoss + Send + Sync>,
    /// Present only for parameter-differentiable losses (weighted_ls),
    /// which the gradient-perturbation oracle needs.
    pub param_loss: Option<Arc<WeightedLsLoss>>,
    pub f: ScalarObjective,
    pub g: ScalarObjective,
    pub set: Option<FiniteSet>,
    pub lower_bound: Option<LowerBoundInstance>,
    pub k: usize,
    /// (L_f, L_g) divided out for exponential sampling, when applied.
    pub lipschitz_normalization: Option<(f64, f64)>,
}

/// Scales an objective down to unit Lipschitz constant when it exceeds 1;
/// returns the factor divided out (1 when untouched).
fn unit_scale(obj: &ScalarObjective) -> (ScalarObjective, f64) {
    let l = obj.lipschitz();
    if l <= 1.0 {
        return (obj.clone(), 1.0);
    }
    let value_inner = obj.clone();
    let grad_inner = obj.clone();
    let mut scaled = ScalarObjective::new(
        obj.k(),
        1.0,
        move |x: &[f64]| value_inner.value(x) / l,
        move |x: &[f64]| grad_inner.gradient(x).iter().map(|v| v / l).collect(),
    );
    if let Some(beta) = obj.smoothness() {
        scaled = scaled.with_smoothness(beta / l);
    }
    if obj.is_monotone_nondecreasing() {
        scaled = scaled.monotone();
    }
    (scaled, l)
}

fn normalize_unit_lipschitz(scn: &mut BuiltScenario) -> (f64, f64) {
    let (f, lf) = unit_scale(&scn.f);
    let (g, lg) = unit_scale(&scn.g);
    scn.f = f;
    scn.g = g;
    (lf, lg)
}

/// Constants the command layer needs before calling a solver: the oracle
/// must be constructed against the same G, T, τ and per-call budget the
/// solver will resolve.
#[derive(Debug, Clone, Copy)]
pub struct ResolvedPlan {
    pub penalty: f64,
    pub iterations: usize,
    pub tau: f64,
    pub per_call: Option<PerCallBudget>,
}

pub fn build_scenario(config: &ScenarioConfig) -> anyhow::Result<BuiltScenario> {
    let mut scn = build_objectives(config)?;
    // Algorithm 1's score sensitivity assumes unit-Lipschitz f and g; run
    // exponential sampling in the normalized geometry (same feasible set,
    // values scaled by 1/L) so the claimed epsilon actually holds.
    if config.solver == "exp_sampling" {
        let (lf, lg) = normalize_unit_lipschitz(&mut scn);
        scn.lipschitz_normalization = Some((lf, lg));
    }
    Ok(scn)
}

fn build_objectives(config: &ScenarioConfig) -> anyhow::Result<BuiltScenario> {
    let dataset = ingest::load_dataset(&config.dataset, config.seed)?;
    let eta = config.eta.unwrap_or(DEFAULT_ETA);
    if !(eta > 0.0) {
        bail!("eta must be positive, got {eta}");
    }
    match config.objective.as_str() {
        "equalized_odds" => {
            let groups = dataset.num_groups();
            let thresholds = threshold_candidates(config);
            let loss = Arc::new(ThresholdRateLoss::new(thresholds.clone(), groups).lift()?);
            let set = FiniteSet::indexed(thresholds.len()).lift()?;
            let f = classification_error_objective(groups).lift()?;
            let g =
                equalized_odds_constraint(config.theta.unwrap_or(config.alpha), eta, groups)
                    .lift()?;
            Ok(BuiltScenario {
                k: 3 * groups,
                loss,
                param_loss: None,
                f,
                g,
                set: Some(set),
                lower_bound: None,
                dataset,
                lipschitz_normalization: None,
            })
        }
        "demographic_parity" => {
            let groups = dataset.num_groups();
            if groups < 2 {
                bail!("demographic parity needs at least two groups");
            }
            let thresholds = threshold_candidates(config);
            let loss = Arc::new(ThresholdRateLoss::new(thresholds.clone(), groups).lift()?);
            let set = FiniteSet::indexed(thresholds.len()).lift()?;
            let f = classification_error_objective(groups).lift()?;
            let (m, c_hat) =
                parity_constraint_rows(&dataset, groups, config.theta.unwrap_or(0.1))?;
            let g = demographic_parity_constraint(m, c_hat, eta).lift()?;
            Ok(BuiltScenario {
                k: 3 * groups,
                loss,
                param_loss: None,
                f,
                g,
                set: Some(set),
                lower_bound: None,
                dataset,
                lipschitz_normalization: None,
            })
        }
        "gini" => {
            let groups = dataset.num_groups();
            let thresholds = threshold_candidates(config);
            let loss = Arc::new(group_error_loss(thresholds.clone(), groups));
            let set = FiniteSet::indexed(thresholds.len()).lift()?;
            let f = sum_objective(groups);
            let g = gini_constraint(config.theta.unwrap_or(0.5), groups, eta).lift()?;
            Ok(BuiltScenario {
                k: groups,
                loss,
                param_loss: None,
                f,
                g,
                set: Some(set),
                lower_bound: None,
                dataset,
                lipschitz_normalization: None,
            })
        }
        "confusion_measure" => {
            let thresholds = threshold_candidates(config);
            let loss = Arc::new(confusion_cell_loss(thresholds.clone()));
            let set = FiniteSet::indexed(thresholds.len()).lift()?;
            let f = gmean_complement_objective();
            // unconstrained scenario: g is identically satisfied, so the
            // penalty term never activates and h reduces to f
            let g = ScalarObjective::new(4, 0.0, |_| -1.0, |_| vec![0.0; 4]).with_smoothness(0.0);
            Ok(BuiltScenario {
                k: 4,
                loss,
                param_loss: None,
                f,
                g,
                set: Some(set),
                lower_bound: None,
                dataset,
                lipschitz_normalization: None,
            })
        }
        "weighted_ls" => {
            let groups = dataset.num_groups();
            let dim = dataset.feature_dim();
            let wl = Arc::new(WeightedLsLoss::new(groups, dim).lift()?);
            let count = config.candidates.as_ref().and_then(|c| c.ball_net).unwrap_or(32);
            let set = param_net(count, dim, config.seed, false)?;
            let f = mean_objective(groups);
            let theta = config.theta.unwrap_or(0.5);
            let g = mean_level_constraint(groups, theta);
            Ok(BuiltScenario {
                k: groups,
                loss: wl.clone(),
                param_loss: Some(wl),
                f,
                g,
                set: Some(set),
                lower_bound: None,
                dataset,
                lipschitz_normalization: None,
            })
        }
        "lower_bound" => {
            let points: Vec<Vec<f64>> =
                dataset.rows().iter().map(|r| r.features.clone()).collect();
            let instance = LowerBoundInstance::new(points).lift()?;
            let dim = instance.dim();
            let shift = instance.sum_norm() / instance.n() as f64;
            let loss = Arc::new(FnItemizedLoss::new(1, move |c: &Decision, row: &DataRow| {
                let p = match c {
                    Decision::Params(p) => p,
                    Decision::Index(_) => {
                        return Err(cgoo::Error::invalid(
                            "lower-bound loss needs parameter decisions",
                        ))
                    }
                };
                Ok(LossVector::clamped(vec![
                    (1.0 - dot(p, &row.features)) / 2.0,
                ]))
            }));
            let f = ScalarObjective::new(1, 2.0, |l: &[f64]| 2.0 * l[0] - 1.0, |_| vec![2.0])
                .with_smoothness(0.0);
            let g = ScalarObjective::new(
                1,
                2.0,
                move |l: &[f64]| 2.0 * l[0] - 1.0 + shift,
                |_| vec![2.0],
            )
            .with_smoothness(0.0);
            let count = config.candidates.as_ref().and_then(|c| c.ball_net).unwrap_or(32);
            let set = param_net(count, dim, config.seed, true)?;
            Ok(BuiltScenario {
                k: 1,
                loss,
                param_loss: None,
                f,
                g,
                set: Some(set),
                lower_bound: Some(instance),
                dataset,
                lipschitz_normalization: None,
            })
        }
        other => bail!("unknown objective {other:?}"),
    }
}

/// Mirrors the solver's own constant resolution so the command layer can
/// construct a matching oracle and audit at the same per-call budget. The
/// budget split only exists for the iterative solver's private oracles.
pub fn resolve_plan(
    scn: &BuiltScenario,
    config: &ScenarioConfig,
    sc: &SolverConfig,
) -> anyhow::Result<ResolvedPlan> {
    let penalty = match sc.penalty {
        Some(g) => g,
        None => penalty_weight(sc.alpha, scn.f.lipschitz(), scn.k).lift()?,
    };
    let iterations = match sc.iterations {
        Some(t) => t,
        None => resolve_iteration_budget(scn.k, sc.alpha, penalty, sc.iteration_cap).lift()?.0,
    };
    let tau = match sc.tolerance {
        Some(t) => t,
        None => resolve_oracle_tolerance(scn.k, sc.alpha, penalty).lift()?,
    };
    let splits_budget = config.solver == "iterative_lopt" && config.oracle != "exact";
    let per_call = match sc.privacy {
        Some(total) if splits_budget => {
            Some(split_budget(total, iterations, total.delta == 0.0).lift()?)
        }
        _ => None,
    };
    Ok(ResolvedPlan {
        penalty,
        iterations,
        tau,
        per_call,
    })
}

pub fn make_solver_config(config: &ScenarioConfig) -> anyhow::Result<SolverConfig> {
    let mut sc = SolverConfig::new(config.alpha, config.seed).lift()?;
    sc.iterations = config.iterations;
    sc.penalty = config.penalty;
    sc.literal_pseudocode = config.literal_pseudocode;
    sc.iteration_cap = CLI_ITERATION_CAP.max(config.iterations.unwrap_or(0));
    if let Some(p) = &config.privacy {
        sc.privacy = Some(PrivacyBudget::new(p.epsilon, p.delta).lift()?);
    }
    Ok(sc)
}

fn build_oracle(
    scn: &BuiltScenario,
    config: &ScenarioConfig,
    plan: &ResolvedPlan,
) -> anyhow::Result<Box<dyn LinearOracle>> {
    let set = scn
        .set
        .clone()
        .ok_or_else(|| anyhow!("the {} objective has no finite candidate set", config.objective))?;
    match config.oracle.as_str() {
        "exact" => Ok(Box::new(ExactOracle::new(set, scn.loss.clone()))),
        "expmech" => {
            let per_call = plan
                .per_call
                .ok_or_else(|| anyhow!("the expmech oracle needs a privacy budget"))?;
            let oracle = ExpMechOracle::new(
                set,
                scn.loss.clone(),
                per_call.epsilon_prime(),
                plan.tau,
                ORACLE_FAILURE_PROB,
            )
            .lift()?
            .with_per_call_budget(per_call)
            .lift()?;
            Ok(Box::new(oracle))
        }
        "noisy_sgd" => {
            let loss = scn.param_loss.clone().ok_or_else(|| {
                anyhow!(
                    "the noisy_sgd oracle needs a parameter-differentiable loss; \
                     use the weighted_ls objective"
                )
            })?;
            let per_call = plan
                .per_call
                .ok_or_else(|| anyhow!("the noisy_sgd oracle needs a privacy budget"))?;
            let oracle =
                NoisySgdOracle::new(loss, Some(per_call), SGD_STEPS, plan.tau, ORACLE_FAILURE_PROB)
                    .lift()?;
            Ok(Box::new(oracle))
        }
        other => bail!("unknown oracle {other:?}"),
    }
}

fn run_solver(
    scn: &BuiltScenario,
    config: &ScenarioConfig,
    sc: &SolverConfig,
    plan: &ResolvedPlan,
) -> anyhow::Result<SolveResult> {
    let mut rng = derive_rng(config.seed, 7);
    match config.solver.as_str() {
        "exp_sampling" => {
            let set = scn.set.as_ref().ok_or_else(|| anyhow!("no finite candidate set"))?;
            solve_exponential_sampling(
                set,
                scn.loss.as_ref(),
                &scn.f,
                &scn.g,
                sc,
                &scn.dataset,
                &mut rng,
            )
            .lift()
        }
        "frank_wolfe" => {
            let set = scn.set.as_ref().ok_or_else(|| anyhow!("no finite candidate set"))?;
            solve_frank_wolfe(set, scn.loss.as_ref(), &scn.f, &scn.g, sc, &scn.dataset).lift()
        }
        "iterative_lopt" => {
            let oracle = build_oracle(scn, config, plan)?;
            solve_iterative_lopt(
                oracle.as_ref(),
                scn.loss.as_ref(),
                &scn.f,
                &scn.g,
                sc,
                &scn.dataset,
                &mut rng,
            )
            .lift()
        }
        other => bail!("unknown solver {other:?}"),
    }
}

/// One neighbor per row: the sensitive group cycles when there are
/// several groups; otherwise the binary label flips, or failing that the
/// feature vector is negated so the neighbor genuinely differs.
pub fn neighbor_swaps(d: &Dataset, cap: usize) -> Vec<(usize, DataRow)> {
    let groups = d.num_groups();
    d.rows()
        .iter()
        .take(cap)
        .enumerate()
        .map(|(i, row)| {
            let mut alt = row.clone();
            if groups > 1 {
                alt.group = row.group % groups + 1;
            } else if row.label == 0 || row.label == 1 {
                alt.label = 1 - row.label;
            } else {
                alt.features = row.features.iter().map(|v| -v).collect();
            }
            (i, alt)
        })
        .collect()
}

/// Analytic audit of the configured mechanism over single-row swaps.
/// `inject_sensitivity_bug` makes the mechanism sample at 2ε while still
/// claiming ε, which a correct auditor must catch.
pub fn audit_mechanism(
    scn: &BuiltScenario,
    config: &ScenarioConfig,
    sc: &SolverConfig,
    plan: &ResolvedPlan,
    inject_sensitivity_bug: bool,
) -> anyhow::Result<(AuditReport, usize)> {
    let set = scn
        .set
        .as_ref()
        .ok_or_else(|| anyhow!("auditing needs a finite candidate set"))?;
    let swaps = neighbor_swaps(&scn.dataset, AUDIT_ROW_CAP);
    let bug_factor = if inject_sensitivity_bug { 2.0 } else { 1.0 };
    let report = match (config.solver.as_str(), config.oracle.as_str()) {
        ("exp_sampling", _) => {
            let total = sc
                .privacy
                .ok_or_else(|| anyhow!("exp_sampling audit needs a privacy budget"))?;
            let eps = total.epsilon * bug_factor;
            let builder = |d: &Dataset| -> cgoo::Result<FinitePmf> {
                exponential_sampling_pmf(
                    set,
                    scn.loss.as_ref(),
                    &scn.f,
                    &scn.g,
                    plan.penalty,
                    eps,
                    d,
                )
            };
            audit_finite_mechanism(
                "exponential_sampling",
                &builder,
                &scn.dataset,
                &swaps,
                PrivacyBudget::pure(total.epsilon).lift()?,
            )
            .lift()?
        }
        ("iterative_lopt", "expmech") => {
            let per_call = plan
                .per_call
                .ok_or_else(|| anyhow!("expmech audit needs a privacy budget"))?;
            // audit the first oracle call: the weight the solver derives
            // from the initial decision's loss vector
            let l0 = scn.loss.loss(&set.decisions()[0], &scn.dataset).lift()?;
            let w = WeightVector::new(penalized_weight(
                &scn.f,
                &scn.g,
                plan.penalty,
                l0.as_slice(),
                sc.literal_pseudocode,
            ))
            .lift()?;
            let eps = per_call.epsilon_prime() * bug_factor;
            let builder = |d: &Dataset| -> cgoo::Result<FinitePmf> {
                lopt_expmech_pmf(set, scn.loss.as_ref(), &w, d, eps)
            };
            audit_finite_mechanism(
                "lopt_expmech",
                &builder,
                &scn.dataset,
                &swaps,
                PrivacyBudget::new(per_call.epsilon_prime(), per_call.delta_prime()).lift()?,
            )
            .lift()?
        }
        _ => {
            return Err(anyhow::Error::new(cgoo::Error::UnsupportedAudit(format!(
                "no analytic output distribution for solver {:?} with oracle {:?}",
                config.solver, config.oracle
            ))))
        }
    };
    let audited = swaps.len();
    Ok((report, audited))
}

pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> anyhow::Result<i32> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let start = Instant::now();
    let scn = build_scenario(config)?;
    let sc = make_solver_config(config)?;
    let plan = resolve_plan(&scn, config, &sc)?;
    let result = run_solver(&scn, config, &sc, &plan)?;

    if config.strict && !result.feasible_target_alpha {
        bail!(
            "strict mode: solution infeasible at alpha {} (g = {})",
            config.alpha,
            result.g_value
        );
    }

    let baseline = match &scn.set {
        Some(set) => Some(
            brute_force_cgoo(set, scn.loss.as_ref(), &scn.f, &scn.g, &scn.dataset).lift()?,
        ),
        None => None,
    };
    let target_miss = baseline.as_ref().map(|b| {
        b.feasible
            && (result.f_value > b.f_star.unwrap_or(f64::INFINITY) + config.alpha + FEASIBILITY_SLACK
                || result.g_value > config.alpha + FEASIBILITY_SLACK)
    });

    let auditable = config.privacy.is_some()
        && (config.solver == "exp_sampling"
            || (config.solver == "iterative_lopt" && config.oracle == "expmech"));
    let (audit, audited_rows) = if auditable {
        let (report, rows) = audit_mechanism(&scn, config, &sc, &plan, false)?;
        (Some(report), Some(rows))
    } else {
        (None, None)
    };

    let lower_bound_check = scn.lower_bound.as_ref().map(|instance| {
        let mut max_gap = 0.0f64;
        for member in result.decision.members() {
            if let Decision::Params(c) = member {
                let lhs = instance.f_value(c) - instance.f_value(instance.c_star());
                max_gap = max_gap.max((lhs - instance.closed_form_excess(c)).abs());
            }
        }
        serde_json::json!({
            "max_identity_gap": max_gap,
            "members_checked": result.decision.members().len(),
            "sum_norm": instance.sum_norm(),
        })
    });

    write_iterations_csv(&result, &out_dir.join("iterations.csv"))?;

    let mut report = serde_json::json!({
        "scenario": {
            "objective": config.objective,
            "solver": config.solver,
            "oracle": config.oracle,
            "alpha": config.alpha,
            "theta": config.theta,
            "seed": config.seed,
            "n": scn.dataset.n(),
            "k": scn.k,
            "candidates": scn.set.as_ref().map(|s| s.len()),
            "lipschitz_normalization": scn
                .lipschitz_normalization
                .map(|(f, g)| serde_json::json!({"f": f, "g": g})),
        },
        "result": result.report(Some("iterations.csv")),
        "baseline": baseline.as_ref().map(|b| serde_json::json!({
            "feasible": b.feasible,
            "f_star": b.f_star,
            "index": b.index,
        })),
        "target_miss": target_miss,
        "audit": audit,
        "audited_rows": audited_rows,
        "lower_bound_check": lower_bound_check,
    });
    if !config.reproducible {
        report["wall_time_ms"] =
            serde_json::json!(start.elapsed().as_secs_f64() * 1000.0);
    }
    write_json(&report, &out_dir.join("report.json"))?;

    if matches!(&audit, Some(a) if !a.pass) {
        Ok(exit_codes::AUDIT_FAILED)
    } else if target_miss == Some(true) {
        Ok(exit_codes::TARGET_MISS)
    } else {
        Ok(exit_codes::SUCCESS)
    }
}

pub fn audit_scenario(
    config: &ScenarioConfig,
    out_dir: &Path,
    inject_sensitivity_bug: bool,
) -> anyhow::Result<i32> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;
    let scn = build_scenario(config)?;
    let sc = make_solver_config(config)?;
    let plan = resolve_plan(&scn, config, &sc)?;
    let (report, audited_rows) =
        audit_mechanism(&scn, config, &sc, &plan, inject_sensitivity_bug)?;
    let body = serde_json::json!({
        "audit": report,
        "audited_rows": audited_rows,
        "injected_bug": inject_sensitivity_bug,
    });
    write_json(&body, &out_dir.join("audit.json"))?;
    if report.pass {
        Ok(exit_codes::SUCCESS)
    } else {
        Ok(exit_codes::AUDIT_FAILED)
    }
}

fn write_iterations_csv(result: &SolveResult, path: &Path) -> anyhow::Result<()> {
    let mut writer =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    if result.trace.is_empty() {
        writer.write_record(["t", "f_value", "g_value", "h_value"])?;
    }
    for step in &result.trace {
        writer.serialize(step)?;
    }
    writer.flush()?;
    Ok(())
}

fn write_json(value: &serde_json::Value, path: &Path) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn threshold_candidates(config: &ScenarioConfig) -> Vec<f64> {
    if let Some(c) = &config.candidates {
        if let Some(t) = &c.thresholds {
            return t.clone();
        }
        if let Some(count) = c.threshold_grid {
            return grid(count);
        }
    }
    grid(21)
}

fn grid(count: usize) -> Vec<f64> {
    (0..count).map(|i| i as f64 / (count - 1) as f64).collect()
}

/// Deterministic net of parameter vectors: uniform directions, on the
/// sphere or filled into the ball depending on the objective.
fn param_net(count: usize, dim: usize, seed: u64, on_sphere: bool) -> anyhow::Result<FiniteSet> {
    use rand::Rng;
    let mut rng = derive_rng(seed, 103);
    let mut decisions = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = ingest::random_unit_vector(dim, &mut rng);
        if !on_sphere {
            let radius = rng.gen::<f64>().powf(1.0 / dim as f64);
            for x in &mut v {
                *x *= radius;
            }
        }
        decisions.push(Decision::params(v).lift()?);
    }
    FiniteSet::new(decisions).lift()
}

/// Per-group error mass: l_a(c, row) = 1[group = a] · 1[prediction ≠ label],
/// averaged over the dataset.
fn group_error_loss(thresholds: Vec<f64>, groups: usize) -> FnItemizedLoss {
    FnItemizedLoss::new(groups, move |c: &Decision, row: &DataRow| {
        let threshold = resolve_threshold(c, &thresholds)?;
        let pred = row.features[0] >= threshold;
        let err = pred != (row.label == 1);
        let mut l = vec![0.0; groups];
        if err {
            l[row.group - 1] = 1.0;
        }
        LossVector::new(l)
    })
}

/// Binary confusion cells in the flat L = 2 layout: one-hot at (label,
/// prediction), averaged to the empirical confusion matrix.
fn confusion_cell_loss(thresholds: Vec<f64>) -> FnItemizedLoss {
    FnItemizedLoss::new(4, move |c: &Decision, row: &DataRow| {
        let threshold = resolve_threshold(c, &thresholds)?;
        let pred = usize::from(row.features[0] >= threshold);
        let label = match row.label {
            0 => 0usize,
            1 => 1,
            other => {
                return Err(cgoo::Error::invalid(format!(
                    "confusion objective needs binary labels, got {other}"
                )))
            }
        };
        let mut l = vec![0.0; 4];
        l[flat_index(label + 1, pred + 1, 2) - 1] = 1.0;
        LossVector::new(l)
    })
}

fn resolve_threshold(c: &Decision, thresholds: &[f64]) -> cgoo::Result<f64> {
    match c {
        Decision::Index(i) => thresholds
            .get(*i)
            .copied()
            .ok_or_else(|| cgoo::Error::invalid(format!("candidate index {i} out of range"))),
        Decision::Params(p) => p
            .first()
            .copied()
            .ok_or_else(|| cgoo::Error::invalid("empty parameter vector")),
    }
}

/// 1 − G-mean of the binary confusion cells, with a finite-difference
/// gradient; degenerate matrices score the worst value 1.
fn gmean_complement_objective() -> ScalarObjective {
    let value = |l: &[f64]| -> f64 {
        let row0 = l[0] + l[1];
        let row1 = l[2] + l[3];
        if row0 <= 1e-12 || row1 <= 1e-12 {
            return 1.0;
        }
        let r0 = l[0] / row0;
        let r1 = l[3] / row1;
        if r0 <= 0.0 || r1 <= 0.0 {
            return 1.0;
        }
        1.0 - (r0 * r1).sqrt()
    };
    let gradient = move |l: &[f64]| -> Vec<f64> {
        let step = 1e-5;
        (0..4)
            .map(|i| {
                let mut hi = l.to_vec();
                let mut lo = l.to_vec();
                hi[i] += step;
                lo[i] = (lo[i] - step).max(0.0);
                (value(&hi) - value(&lo)) / (hi[i] - lo[i])
            })
            .collect()
    };
    // conservative: the G-mean gradient blows up only near degenerate
    // matrices, which the empirical cells of a nonempty dataset avoid
    ScalarObjective::new(4, 8.0, value, gradient)
}

fn sum_objective(k: usize) -> ScalarObjective {
    ScalarObjective::new(
        k,
        (k as f64).sqrt(),
        |l: &[f64]| l.iter().sum(),
        move |_| vec![1.0; k],
    )
    .monotone()
    .with_smoothness(0.0)
}

fn mean_objective(k: usize) -> ScalarObjective {
    ScalarObjective::new(
        k,
        1.0 / (k as f64).sqrt(),
        move |l: &[f64]| l.iter().sum::<f64>() / k as f64,
        move |_| vec![1.0 / k as f64; k],
    )
    .monotone()
    .with_smoothness(0.0)
}

fn mean_level_constraint(k: usize, theta: f64) -> ScalarObjective {
    ScalarObjective::new(
        k,
        1.0 / (k as f64).sqrt(),
        move |l: &[f64]| l.iter().sum::<f64>() / k as f64 - theta,
        move |_| vec![1.0 / k as f64; k],
    )
    .monotone()
    .with_smoothness(0.0)
}

/// Pairwise demographic-parity rows: the acceptance rate of group a is
/// FP_a·P(y=0 | a) + TP_a·P(y=1 | a), a linear map of the rate vector;
/// each ordered pair (a, b) contributes rate_a − rate_b ≤ θ.
fn parity_constraint_rows(
    d: &Dataset,
    groups: usize,
    theta: f64,
) -> anyhow::Result<(Vec<Vec<f64>>, Vec<f64>)> {
    if !(theta > 0.0) {
        bail!("theta must be positive for demographic parity, got {theta}");
    }
    let mut pos = vec![0usize; groups];
    let mut total = vec![0usize; groups];
    for row in d.rows() {
        total[row.group - 1] += 1;
        match row.label {
            0 => {}
            1 => pos[row.group - 1] += 1,
            other => bail!("demographic parity needs binary labels, got {other}"),
        }
    }
    let prior = |a: usize| -> (f64, f64) {
        if total[a] == 0 {
            (0.0, 0.0)
        } else {
            let p1 = pos[a] as f64 / total[a] as f64;
            (1.0 - p1, p1)
        }
    };
    let mut m = Vec::new();
    let mut c_hat = Vec::new();
    for a in 0..groups {
        for b in 0..groups {
            if a == b {
                continue;
            }
            let (pa0, pa1) = prior(a);
            let (pb0, pb1) = prior(b);
            let mut row = vec![0.0; 3 * groups];
            row[a] = pa0;
            row[groups + a] = pa1;
            row[b] = -pb0;
            row[groups + b] = -pb1;
            m.push(row);
            c_hat.push(theta);
        }
    }
    Ok((m, c_hat))
}

/// Bridges library errors into anyhow while keeping the original value
/// downcastable, so the binary can map UnsupportedAudit to its exit code.
trait Lift<T> {
    fn lift(self) -> anyhow::Result<T>;
}

impl<T> Lift<T> for cgoo::Result<T> {
    fn lift(self) -> anyhow::Result<T> {
        self.map_err(anyhow::Error::new)
    }
}
