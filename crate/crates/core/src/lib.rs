//! Optimal designs for discriminating nested exponential dose–response
//! models `a·e^{-b t^d}`, `a(c - (c-1)e^{-bt})` and their common extension.
//!
//! The crate computes locally optimal discriminating designs, maximin
//! efficient designs, D-optimal designs and efficiencies, and runs
//! least-squares simulations of exact designs.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod api;
pub mod design;
pub mod doptimal;
pub mod error;
pub mod io;
pub mod local;
pub mod maximin;
pub mod model;
pub mod optim;
pub mod simulation;

pub use api::{
    doptimal_document, evaluate, local_document, maximin_document, transform_document,
    DOptimalRequest, EfficiencyKind, EvaluateRequest, LocalRequest, MaximinRequest,
    TransformRequest,
};
pub use design::{
    d_criterion, d_efficiency, em_variance, information, pair_efficiency, param_efficiency,
    ContinuousDesign, EfficiencyReport, InfoMatrix, ESTIMATION_MODELS, MAXIMIN_PAIRS,
};
pub use doptimal::{solve_d_optimal, verify_d_optimality};
pub use error::{Error, Result};
pub use io::{round_design, DesignDocument, ExactDesign, Provenance};
pub use local::{
    alternation_certificate, chebyshev_alternation_check, middle_point_closed_form, rescale_design,
    solve_c_optimal, solve_local, solve_local_numeric, solve_local_with, verify_c_optimality,
    weights_from_points, LocalDesignProblem, Scaling,
};
pub use maximin::{
    maximin_objective, reference_designs, solve_maximin, MaximinProblem, MaximinSolution,
};
pub use model::{discrimination_target, nesting_edges, nests, ModelId, Param, Theta};
pub use optim::{grow_support, maximize, OptimizerConfig};
pub use simulation::{
    builtin_designs, compare_designs, run_simulation, simulate_fit, DesignSource, DominanceReport,
    FitBounds, SimSpec, SimulationReport, SimulationRequest, SimulationResult,
};
