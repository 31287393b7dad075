//! Differentially private constrained group-objective optimization.
//!
//! The library composes an error objective `f` and a constraint `g`, both
//! functions of a K-dimensional group-loss vector, into a single penalized
//! objective `h = f + G·max(0, g)`, solves it with three solvers
//! (exponential sampling, an iterative private linear-optimization loop,
//! and Frank-Wolfe), and audits finite-range private mechanisms
//! analytically via bounded-divergence calculations.

pub mod domain;
pub mod error;
pub mod objectives;
pub mod oracles;
pub mod privacy;
pub mod solvers;

pub use domain::{
    average_itemized_loss, compose, penalty_weight, ComposedObjective, DataRow, Dataset, Decision,
    DecisionSet, FiniteSet, FnItemizedLoss, GroupLoss, ItemizedGroupLoss, LossVector,
    ParamGroupLoss, RandomizedDecision, ScalarObjective,
};
pub use error::{Error, Result};
pub use privacy::{
    advanced_composition, split_budget, AuditReport, FinitePmf, PerCallBudget, PrivacyBudget,
};
pub use solvers::{
    brute_force_cgoo, evaluate, resolve_iteration_budget, resolve_oracle_tolerance,
    solve_exponential_sampling, solve_frank_wolfe, solve_iterative_lopt, SolveResult, SolverConfig,
};
