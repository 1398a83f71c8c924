//! Additive isotonic regression.
//!
//! The model is `Y = c + m_1(X_1) + ... + m_d(X_d) + eps` with every `m_j`
//! nondecreasing. [`backfit`] solves the least squares problem by cyclic
//! isotonic projections; [`oracle`] holds independent references for it and
//! [`simulation`] the Monte Carlo experiments built on top.

pub mod backfit;
pub mod dataset;
pub mod error;
pub mod isotonic;
pub mod nnls;
pub mod oracle;
pub mod simulation;

pub use backfit::{
    backfit, backfit_block_update, backfit_with_state, convergence_report, dykstra_residual,
    objective, AdditiveFit, BackfitState, ConvergenceReport, FitConfig,
};
pub use dataset::{build_dataset, CovariateOrder, Dataset};
pub use error::{Error, Result};
pub use isotonic::{center, evaluate, max_min_reference, pava, IsotonicFit, WeightedSeries};
pub use oracle::{
    kkt_fixed_point_check, nnls_reference_fit, oracle_estimator, KktReport, OracleFit, OracleSpec,
    ReferenceFit,
};
pub use simulation::{
    generate, ise, mise_experiment, oracle_property_experiment, quantile_curves, reproduce_table,
    sample_truncated_bvn, ComponentFn, Grid, IseMeasure, MiseReport, SimConfig, TablePreset,
};
