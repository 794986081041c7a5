//! Multi-level recovery of functions of a spatial and a parametric
//! variable: a budget planner, two recovery drivers (randomized weighted
//! least squares and deterministic sparse-grid interpolation, both stacked
//! over the dyadic mesh hierarchy), detail sources that serve them from the
//! finite element solver or from closed-form targets, and the exact cost
//! accounting their contracts are checked against.
//!
//! The flow for the randomized driver is `plan` (or `plan_bar`) followed by
//! `recover_ml_lsq`; the deterministic driver is a single call to
//! `recover_ml_interp`, with `xi_for_sample_budget` translating an
//! evaluation budget into its threshold parameter. `comp_account` recomputes
//! the integer cost ledger of a finished run and enforces the promised
//! evaluation bound.

mod plan;
mod recover;
mod source;

pub use plan::{
    lsq_regime, plan, plan_bar, LevelPlan, LevelSpec, PlanParams, Regime, DEFAULT_OVERSAMPLING,
    DEFAULT_TAU,
};
pub use recover::{
    comp_account, recover_ml_interp, recover_ml_lsq, xi_for_sample_budget, CompRecord,
    InterpOptions, LevelKind, RecoveredLevel, RecoveryResult,
};
pub use source::{AnalyticDeltaSource, PdeDeltaSource};
