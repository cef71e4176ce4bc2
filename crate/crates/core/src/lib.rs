//! Simulation and estimation for randomized experiments with network interference.
//!
//! Units sit in an [`InterferenceStructure`]: for every unit `i` and radius
//! `r = 1..=R` a set of units at distance exactly `r`. Outcomes follow the
//! linear spillover model
//!
//! ```text
//! y_i(z) = alpha_i + beta_i * z_i + sum_r gamma_ir * (number of treated units in shell r of i)
//! ```
//!
//! The crate evaluates that model, computes the true average direct, spillover
//! and policy effects, estimates them with Horvitz-Thompson estimators under
//! Bernoulli designs, and quantifies what happens to the spillover contrast
//! when the analyst assumes the wrong shells.
//!
//! Every quantity that has a closed form also has an exhaustive-enumeration
//! route over all `2^n` assignments (see [`enumerate`]), so small instances can
//! be checked exactly.

pub mod design;
pub mod enumerate;
pub mod error;
pub mod exposure;
pub mod format;
pub mod interference;
pub mod misspec;
pub mod outcomes;

pub use design::{
    exact_expectation_ht, ht_estimate, monte_carlo, simulate, EstimateTriple, ExperimentRecord,
    HtEstimate, HtPlan, MonteCarloRun, RepRow,
};
pub use error::{Error, Result};
pub use exposure::{
    attainable_signatures, exposure, exposure_probability, verify_correct_specification,
    ExposureProbabilityTable,
    ExposureSignature, SpecificationCheck,
};
pub use interference::{
    bfs_shells, grid_structure, ring_structure, EdgeList, GridMetric, InterferenceStructure,
    MisspecTransform, Violation,
};
pub use misspec::{
    adversarial_instance, claim2_identities, misspec_gamma_closed, misspec_gamma_definitional,
    misspec_weights, p_grid_spread, AdversarialInstance, AdversarialKind, Claim2Report,
    DefinitionalGamma, MisspecReport, MisspecWeights, ReportOptions, P_GRID,
};
pub use outcomes::{
    estimands, eval_outcomes, policy_effect_oracle, Assignment, Estimands, ModelRanges, OutcomeModel,
};

/// Default cap on `n` for routines that enumerate all `2^n` assignments.
pub const DEFAULT_EXHAUSTIVE_BOUND: usize = 16;

/// Hard cap accepted for the exhaustive bound.
pub const MAX_EXHAUSTIVE_BOUND: usize = 24;
