//! Every tolerance the acceptance checks use, in one place.

/// Absolute slack on the bound sandwich `G <= ln(1+sinr) <= H`.
pub const BOUND_SANDWICH_ABS: f64 = 1e-12;
/// Absolute gap between bounds and rate at the expansion point.
pub const BOUND_TOUCH_ABS: f64 = 1e-12;
/// Relative agreement of finite-difference and analytic gradients.
pub const GRADIENT_REL: f64 = 1e-6;
/// Per-coordinate finite-difference step, relative to the coordinate.
pub const FD_STEP_REL: f64 = 1e-6;
/// Allowed decrease between consecutive SCA objective values.
pub const MONOTONE_SLACK: f64 = 1e-9;
/// Relative violation allowed on power and fronthaul constraints.
pub const FEASIBILITY_REL: f64 = 1e-6;
/// Normalized KKT residual of the original problem at convergence.
pub const KKT_RESIDUAL: f64 = 1e-4;
/// Relative gap between SCA and the grid-search incumbent.
pub const GRID_OBJECTIVE_REL: f64 = 1e-3;
/// Per-coordinate relative agreement of closed-form and projected-gradient
/// surrogate solutions.
pub const CLOSED_FORM_REL: f64 = 1e-5;
/// SCA stopping threshold on the relative objective change.
pub const SCA_EPSILON: f64 = 0.01;
/// SCA iteration budget.
pub const MAX_SCA_ITERS: usize = 200;
/// Complementary slackness of the dual solution on small instances.
pub const DUAL_SLACKNESS: f64 = 1e-4;
/// Grid resolution (log-spacing) reached by the grid oracle.
pub const GRID_LOG_RESOLUTION: f64 = 1e-7;
