//! Independent oracles: a second implementation of the rate formulas,
//! finite differences, exhaustive grid search, a projected-gradient solver
//! for the convex surrogate and KKT residuals of the original problems.
//!
//! Nothing here calls into the solver or bounds code it is used to check;
//! the formulas are re-derived from the physical quantities `theta`, `w`,
//! the array gain and the pilot map.

mod finite_diff;
mod grid;
mod kkt;
mod pgd;
pub mod reference;
mod suite;
pub mod tolerances;

use serde::{Deserialize, Serialize};

pub use finite_diff::{finite_diff_gradient, finite_diff_with_roundoff, gradient_mismatch};
pub use grid::{grid_search_solver, GridOptions, GridResult};
pub use kkt::{kkt_residuals, KktResiduals};
pub use pgd::{projected_gradient_reference, PgdOptions, PgdResult};
pub use suite::{oracle_suite, SuiteOptions};

use crate::radio::PowerModel;

/// Objective of the original problem.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum Objective {
    /// Weighted sum of `ln(1 + sinr_k)`.
    Wsr { weights: Vec<f64> },
    /// Sum rate over consumed power.
    Ee { power: PowerModel },
}

/// Outcome of comparing a computed quantity with an oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub name: String,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    /// Index where the relative error peaks.
    pub argmax: Option<usize>,
    pub tolerance: f64,
    pub passed: bool,
}

impl OracleReport {
    /// Elementwise comparison; relative error uses `max(|expected|, floor)`.
    pub fn compare(name: &str, expected: &[f64], actual: &[f64], floor: f64, tolerance: f64) -> Self {
        let mut max_abs: f64 = 0.0;
        let mut max_rel: f64 = 0.0;
        let mut argmax = None;
        for (i, (e, a)) in expected.iter().zip(actual).enumerate() {
            let abs = (e - a).abs();
            let rel = abs / e.abs().max(floor);
            max_abs = max_abs.max(abs);
            if rel > max_rel || argmax.is_none() {
                max_rel = rel;
                argmax = Some(i);
            }
        }
        let passed = expected.len() == actual.len() && max_rel <= tolerance && max_rel.is_finite();
        OracleReport {
            name: name.to_string(),
            max_abs_error: max_abs,
            max_rel_error: max_rel,
            argmax,
            tolerance,
            passed,
        }
    }

    /// Report for a scalar residual that must stay below `tolerance`.
    pub fn residual(name: &str, value: f64, tolerance: f64) -> Self {
        OracleReport {
            name: name.to_string(),
            max_abs_error: value,
            max_rel_error: value,
            argmax: None,
            tolerance,
            passed: value <= tolerance && value.is_finite(),
        }
    }

    pub fn row(&self) -> String {
        format!(
            "{:<44} {:>12.3e} {:>12.3e} {:>10.1e}  {}",
            self.name,
            self.max_abs_error,
            self.max_rel_error,
            self.tolerance,
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

pub fn report_table(reports: &[OracleReport]) -> String {
    let mut out = format!(
        "{:<44} {:>12} {:>12} {:>10}  {}\n",
        "oracle", "max abs", "max rel", "tol", "result"
    );
    for r in reports {
        out.push_str(&r.row());
        out.push('\n');
    }
    out
}
