//! Scenario configuration: a single JSON file describing the dataset, the
//! objective/constraint pair, the solver and oracle, and run parameters.

use std::path::Path;

use anyhow::{bail, Context};
use serde::Deserialize;

pub const OBJECTIVES: &[&str] = &[
    "equalized_odds",
    "demographic_parity",
    "gini",
    "confusion_measure",
    "weighted_ls",
    "lower_bound",
];
pub const SOLVERS: &[&str] = &["exp_sampling", "iterative_lopt", "frank_wolfe"];
pub const ORACLES: &[&str] = &["exact", "expmech", "noisy_sgd"];

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub dataset: DatasetSpec,
    pub objective: String,
    pub solver: String,
    #[serde(default = "default_oracle")]
    pub oracle: String,
    pub alpha: f64,
    /// Smoothing sharpness for smax-based constraints.
    pub eta: Option<f64>,
    /// Constraint level (fairness gap, Gini cap) where the objective uses one.
    pub theta: Option<f64>,
    pub privacy: Option<PrivacySpec>,
    pub seed: u64,
    pub candidates: Option<CandidateSpec>,
    pub iterations: Option<usize>,
    pub penalty: Option<f64>,
    /// Treat an infeasible baseline as an error instead of a report field.
    #[serde(default)]
    pub strict: bool,
    /// Exclude wall-clock fields so identical runs are byte-identical.
    #[serde(default)]
    pub reproducible: bool,
    /// Drop the penalty factor on the constraint gradient, as printed in
    /// the original pseudocode.
    #[serde(default)]
    pub literal_pseudocode: bool,
}

fn default_oracle() -> String {
    "exact".into()
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PrivacySpec {
    pub epsilon: f64,
    #[serde(default)]
    pub delta: f64,
}

/// Either a CSV path or a synthetic generator; exactly one of `path` and
/// `synthetic` must be present.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub path: Option<String>,
    /// Normalize features onto the unit ball at ingest.
    #[serde(default)]
    pub normalize: bool,
    /// "threshold_classification" or "ball_uniform".
    pub synthetic: Option<String>,
    pub n: Option<usize>,
    pub dim: Option<usize>,
    pub groups: Option<usize>,
    /// Per-group positive-label rates for the classification generator.
    pub positive_rates: Option<Vec<f64>>,
}

/// Finite candidate sets: an explicit threshold list, an even threshold
/// grid, or a net of unit vectors for parameter-ball decisions.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidateSpec {
    pub thresholds: Option<Vec<f64>>,
    pub threshold_grid: Option<usize>,
    pub ball_net: Option<usize>,
}

pub fn load_config(path: &Path) -> anyhow::Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut config: ScenarioConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    if let Ok(seed) = std::env::var("RUN_SEED") {
        config.seed = seed
            .parse()
            .with_context(|| format!("RUN_SEED override {seed:?} is not an integer"))?;
    }
    validate(&config)?;
    Ok(config)
}

fn validate(config: &ScenarioConfig) -> anyhow::Result<()> {
    if !(config.alpha > 0.0 && config.alpha <= 1.0) {
        bail!("alpha must lie in (0, 1], got {}", config.alpha);
    }
    if !OBJECTIVES.contains(&config.objective.as_str()) {
        bail!("unknown objective {:?}; expected one of {OBJECTIVES:?}", config.objective);
    }
    if !SOLVERS.contains(&config.solver.as_str()) {
        bail!("unknown solver {:?}; expected one of {SOLVERS:?}", config.solver);
    }
    if !ORACLES.contains(&config.oracle.as_str()) {
        bail!("unknown oracle {:?}; expected one of {ORACLES:?}", config.oracle);
    }
    if let Some(p) = &config.privacy {
        if !(p.epsilon > 0.0) {
            bail!("privacy epsilon must be positive, got {}", p.epsilon);
        }
        if !(0.0..=1.0).contains(&p.delta) {
            bail!("privacy delta must lie in [0, 1], got {}", p.delta);
        }
    }
    match (&config.dataset.path, &config.dataset.synthetic) {
        (Some(_), Some(_)) => bail!("dataset: give either a path or a synthetic generator, not both"),
        (None, None) => bail!("dataset: either a path or a synthetic generator is required"),
        (None, Some(kind)) if kind != "threshold_classification" && kind != "ball_uniform" => {
            bail!("unknown synthetic generator {kind:?}")
        }
        _ => {}
    }
    if let Some(c) = &config.candidates {
        let given = [
            c.thresholds.is_some(),
            c.threshold_grid.is_some(),
            c.ball_net.is_some(),
        ]
        .iter()
        .filter(|b| **b)
        .count();
        if given != 1 {
            bail!("candidates: give exactly one of thresholds, threshold_grid, ball_net");
        }
        if matches!(c.threshold_grid, Some(n) if n < 2) {
            bail!("threshold_grid needs at least 2 points");
        }
        if matches!(c.ball_net, Some(0)) {
            bail!("ball_net needs at least 1 point");
        }
    }
    Ok(())
}
