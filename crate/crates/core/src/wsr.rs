//! Weighted sum-rate maximization: SCA over the rate bounds, each
//! surrogate solved through its fronthaul dual with the closed-form power
//! update.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundContext;
use crate::error::SolveError;
use crate::experiments::baseline_equal_power;
use crate::radio::{FronthaulConstraint, PowerModel, PowerVector, RadioModel};
use crate::scenario::Scenario;
use crate::subproblem::{InnerSettings, StepRule, Surrogate};
use crate::verify::{kkt_residuals, KktResiduals, Objective};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// SCA stops once the relative objective gain of an iteration is below this.
    pub epsilon: f64,
    pub max_sca_iters: usize,
    pub max_dual_iters: usize,
    pub step0: f64,
    pub step_rule: StepRule,
    /// Dual ascent stops once every fronthaul bound is within `dual_tol`
    /// (relative to capacity) of tight, or satisfied where the multiplier is 0.
    pub dual_tol: f64,
    /// Watts.
    pub bisection_tol: f64,
    /// Power floor as a fraction of the RRU budget.
    pub power_floor_ratio: f64,
    /// One weight per user; empty means all ones.
    pub weights: Vec<f64>,
    pub max_db_iters: usize,
    /// Relative change of the Dinkelbach parameter that ends the loop.
    pub db_tol: f64,
    /// Start each Dinkelbach loop from the previous SCA iteration's value
    /// instead of 0.
    pub warm_start_q: bool,
    /// Relative slack allowed on the fronthaul bounds of an accepted step.
    pub feasibility_slack: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            epsilon: 0.01,
            max_sca_iters: 200,
            max_dual_iters: 5000,
            step0: 1.0,
            step_rule: StepRule::Adaptive,
            dual_tol: 1e-9,
            bisection_tol: 1e-10,
            power_floor_ratio: 1e-10,
            weights: Vec::new(),
            max_db_iters: 50,
            db_tol: 1e-9,
            warm_start_q: false,
            feasibility_slack: 1e-9,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, num_users: usize) -> Result<(), SolveError> {
        let bad = |m: &str| Err(SolveError::Input(m.to_string()));
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(self.step0 > 0.0) {
            return bad("step0 must be positive");
        }
        if self.max_sca_iters == 0 || self.max_dual_iters == 0 || self.max_db_iters == 0 {
            return bad("iteration limits must be positive");
        }
        if !(self.power_floor_ratio > 0.0 && self.power_floor_ratio < 1.0) {
            return bad("power_floor_ratio must lie in (0, 1)");
        }
        if !self.weights.is_empty() {
            if self.weights.len() != num_users {
                return Err(SolveError::Input(format!(
                    "{} weights for {num_users} users",
                    self.weights.len()
                )));
            }
            if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
                return bad("weights must be finite and nonnegative");
            }
            if !self.weights.iter().any(|w| *w > 0.0) {
                return bad("at least one weight must be positive");
            }
        }
        Ok(())
    }

    pub fn weights_for(&self, num_users: usize) -> Vec<f64> {
        if self.weights.is_empty() {
            vec![1.0; num_users]
        } else {
            self.weights.clone()
        }
    }

    pub fn floor(&self, budget: f64) -> f64 {
        self.power_floor_ratio * budget
    }

    pub(crate) fn inner(&self, budget: f64) -> InnerSettings {
        InnerSettings {
            step_rule: self.step_rule,
            step0: self.step0,
            max_iters: self.max_dual_iters,
            tol: self.dual_tol,
            bisection_tol: self.bisection_tol,
            floor: self.floor(budget),
        }
    }
}

/// Multipliers of the last surrogate: one `lambda` per fronthaul constraint
/// (none without a constraint) and one `mu` per RRU.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Objective after the step (bps/Hz, or bps/Hz/W for EE).
    pub objective: f64,
    pub dual_iterations: usize,
    pub dual_converged: bool,
    /// Fraction of the step toward the surrogate solution that was taken.
    pub step: f64,
    pub lambda: Vec<f64>,
    /// Dinkelbach parameters of this iteration (empty for WSR).
    pub q_trace: Vec<f64>,
    pub infeasibility: f64,
    /// The iterate itself.
    pub p: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveKind {
    Wsr,
    Ee,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub objective: ObjectiveKind,
    pub p_star: PowerVector,
    /// Feasible starting point.
    pub p_start: Vec<f64>,
    /// Objective at the starting point followed by one value per SCA iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: Vec<IterationRecord>,
    /// Per-user rates at `p_star`, bps/Hz.
    pub rates: Vec<f64>,
    /// Load of every fronthaul constraint at `p_star`, bps/Hz.
    pub fronthaul_loads: Vec<f64>,
    pub dual: DualState,
    pub kkt: KktResiduals,
    pub sca_iterations: usize,
    pub dual_iterations: usize,
    pub db_iterations: usize,
    pub converged: bool,
    /// Sum rate at `p_star`, bps/Hz.
    pub throughput: f64,
    /// Only when a power model was supplied.
    pub energy_efficiency: Option<f64>,
    /// Largest relative constraint violation over all iterates.
    pub max_infeasibility: f64,
}

impl SolveReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the start")
    }

    /// One CSV line per SCA iteration.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "iteration",
            "objective",
            "dual_iterations",
            "step",
            "db_iterations",
            "infeasibility",
        ])?;
        w.write_record(["0", &self.objective_trace[0].to_string(), "0", "0", "0", "0"])?;
        for it in &self.iterations {
            w.write_record([
                it.iteration.to_string(),
                it.objective.to_string(),
                it.dual_iterations.to_string(),
                it.step.to_string(),
                it.q_trace.len().to_string(),
                it.infeasibility.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Equal-power starting point scaled down until the fronthaul constraints hold.
pub fn feasible_start(model: &RadioModel, fh: &FronthaulConstraint, floor: f64) -> Result<Vec<f64>, SolveError> {
    let p = baseline_equal_power(model, fh, floor).0;
    if model.infeasibility(&p, fh) > 0.0 {
        return Err(SolveError::InfeasibleStart);
    }
    Ok(p)
}

pub(crate) fn check_inputs(
    model: &RadioModel,
    scenario: &Scenario,
    fh: &FronthaulConstraint,
) -> Result<(), SolveError> {
    scenario.validate()?;
    if scenario.serving != model.serving {
        return Err(SolveError::Input("model and scenario disagree on association".into()));
    }
    fh.validate().map_err(SolveError::Input)
}

pub(crate) fn constraint_capacity(model: &RadioModel, fh: &FronthaulConstraint) -> f64 {
    fh.capacity().map_or(f64::INFINITY, |c| model.capacity_nats(c))
}

/// Build the report at `p`, attaching KKT residuals for `objective`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn finish(
    kind: ObjectiveKind,
    model: &RadioModel,
    scenario: &Scenario,
    fh: &FronthaulConstraint,
    objective: &Objective,
    power: Option<&PowerModel>,
    p_start: Vec<f64>,
    p: Vec<f64>,
    dual: DualState,
    trace: Vec<f64>,
    iterations: Vec<IterationRecord>,
    converged: bool,
    floor: f64,
) -> SolveReport {
    let kkt = kkt_residuals(model, scenario, fh, &p, &dual.lambda, &dual.mu, objective, floor);
    let max_infeasibility = iterations.iter().map(|i| i.infeasibility).fold(0.0, f64::max);
    SolveReport {
        objective: kind,
        rates: model.user_rates(&p),
        fronthaul_loads: model.fronthaul_load(&p, fh),
        throughput: model.sum_rate(&p),
        energy_efficiency: power.map(|pm| pm.energy_efficiency(model, &p)),
        kkt,
        sca_iterations: iterations.len(),
        dual_iterations: iterations.iter().map(|i| i.dual_iterations).sum(),
        db_iterations: iterations.iter().map(|i| i.q_trace.len()).sum(),
        converged,
        max_infeasibility,
        p_star: PowerVector(p),
        p_start,
        objective_trace: trace,
        iterations,
        dual,
    }
}

/// Maximize the weighted sum rate under per-RRU power budgets and `fh`.
pub fn solve_wsr(
    model: &RadioModel,
    scenario: &Scenario,
    fh: &FronthaulConstraint,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    solve_wsr_with_power(model, scenario, fh, cfg, None)
}

/// As [`solve_wsr`], also reporting energy efficiency under `power`.
pub fn solve_wsr_with_power(
    model: &RadioModel,
    scenario: &Scenario,
    fh: &FronthaulConstraint,
    cfg: &SolverConfig,
    power: Option<&PowerModel>,
) -> Result<SolveReport, SolveError> {
    let k = model.num_users();
    check_inputs(model, scenario, fh)?;
    cfg.validate(k)?;
    let weights = cfg.weights_for(k);
    let floor = cfg.floor(model.power_budget);
    let settings = cfg.inner(model.power_budget);
    let groups = fh.groups(&model.cells);
    let capacity = constraint_capacity(model, fh);

    let mut p = feasible_start(model, fh, floor)?;
    let p_start = p.clone();
    let mut value = model.weighted_sum_rate(&p, &weights);
    let mut trace = vec![value];
    let mut iterations = Vec::new();
    let mut dual = DualState {
        lambda: vec![0.0; groups.len()],
        mu: vec![0.0; model.num_rrus()],
    };
    let mut converged = false;
    for r in 1..=cfg.max_sca_iters {
        let ctx = BoundContext::new(model, &p)?;
        let sur = Surrogate::new(&ctx, model, &weights, groups.clone(), capacity);
        let sol = sur.solve(&dual.lambda, &settings)?;
        let (next, step) = sur.safeguard(&sol.p, cfg.feasibility_slack, |x| sur.weighted_lower_bound(x));
        let next_value = model.weighted_sum_rate(&next, &weights);
        let infeasibility = model.infeasibility(&next, fh);
        debug_assert!(infeasibility <= 1e-6, "iterate violates constraints by {infeasibility}");
        dual = DualState {
            lambda: sol.lambda,
            mu: sol.mu,
        };
        iterations.push(IterationRecord {
            iteration: r,
            objective: next_value,
            dual_iterations: sol.iterations,
            dual_converged: sol.converged,
            step,
            lambda: dual.lambda.clone(),
            q_trace: Vec::new(),
            infeasibility,
            p: next.clone(),
        });
        trace.push(next_value);
        let gain = (next_value - value) / value.abs().max(f64::MIN_POSITIVE);
        p = next;
        value = next_value;
        if gain < cfg.epsilon {
            converged = true;
            break;
        }
    }
    let objective = Objective::Wsr { weights };
    let report = finish(
        ObjectiveKind::Wsr,
        model,
        scenario,
        fh,
        &objective,
        power,
        p_start,
        p,
        dual,
        trace,
        iterations,
        converged,
        floor,
    );
    if converged {
        Ok(report)
    } else {
        Err(SolveError::IterationLimit(Box::new(report)))
    }
}
