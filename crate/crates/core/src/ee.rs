//! Energy-efficiency maximization: SCA over the rate bounds with a
//! Dinkelbach loop on each surrogate ratio.

use serde::{Deserialize, Serialize};

use crate::bounds::BoundContext;
use crate::error::SolveError;
use crate::radio::{FronthaulConstraint, PowerModel, RadioModel};
use crate::scenario::Scenario;
use crate::subproblem::{lagrangian_power_update, Surrogate};
use crate::verify::Objective;
use crate::wsr::{
    check_inputs, constraint_capacity, feasible_start, finish, DualState, IterationRecord, ObjectiveKind, SolveReport,
    SolverConfig,
};

/// Dinkelbach parameter of one SCA iteration. `q <= 0` is minus the bound
/// ratio (nats per watt).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DinkelbachState {
    pub q: f64,
    pub m: usize,
    pub trace: Vec<f64>,
}

/// `-sum_k G_k(p) / P_consumed(p)`.
pub fn dinkelbach_update(ctx: &BoundContext, power: &PowerModel, p: &[f64]) -> f64 {
    -ctx.lower_bounds(p).sum() / power.consumed_power(p)
}

/// Closed-form minimizer of the parametric surrogate Lagrangian for
/// parameter `q`, i.e. the WSR update with `q_shift = q * tau / omega`.
#[allow(clippy::too_many_arguments)]
pub fn ee_power_update(
    p_r: &[f64],
    a: &[f64],
    b: &[f64],
    q: f64,
    model: &RadioModel,
    power: &PowerModel,
    floor: f64,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    lagrangian_power_update(
        p_r,
        a,
        b,
        q * power.dynamic_slope(),
        &model.cells,
        model.power_budget,
        floor,
        tol,
    )
}

/// Maximize sum rate over consumed power under per-RRU budgets and `fh`.
pub fn solve_ee(
    model: &RadioModel,
    scenario: &Scenario,
    power: &PowerModel,
    fh: &FronthaulConstraint,
    cfg: &SolverConfig,
) -> Result<SolveReport, SolveError> {
    let k = model.num_users();
    check_inputs(model, scenario, fh)?;
    cfg.validate(k)?;
    if power.num_users != k || power.num_rrus != model.num_rrus() {
        return Err(SolveError::Input("power model sized for a different network".into()));
    }
    let weights = vec![1.0; k];
    let floor = cfg.floor(model.power_budget);
    let settings = cfg.inner(model.power_budget);
    let groups = fh.groups(&model.cells);
    let capacity = constraint_capacity(model, fh);
    let slope = power.dynamic_slope();

    let mut p = feasible_start(model, fh, floor)?;
    let p_start = p.clone();
    let mut value = power.energy_efficiency(model, &p);
    let mut trace = vec![value];
    let mut iterations = Vec::new();
    let mut dual = DualState {
        lambda: vec![0.0; groups.len()],
        mu: vec![0.0; model.num_rrus()],
    };
    let mut q_carry = 0.0;
    let mut converged = false;
    for r in 1..=cfg.max_sca_iters {
        let ctx = BoundContext::new(model, &p)?;
        let mut sur = Surrogate::new(&ctx, model, &weights, groups.clone(), capacity);
        let mut db = DinkelbachState {
            q: if cfg.warm_start_q { q_carry } else { 0.0 },
            ..Default::default()
        };
        let mut lambda = dual.lambda.clone();
        let mut inner_iters = 0;
        let mut inner_ok = true;
        let mut sol = None;
        while db.m < cfg.max_db_iters {
            sur.set_q_shift(db.q * slope);
            let s = sur.solve(&lambda, &settings)?;
            inner_iters += s.iterations;
            inner_ok &= s.converged;
            lambda = s.lambda.clone();
            let q_next = dinkelbach_update(&ctx, power, &s.p);
            db.m += 1;
            db.trace.push(q_next);
            let change = (q_next - db.q).abs() / q_next.abs().max(f64::MIN_POSITIVE);
            db.q = q_next;
            sol = Some(s);
            if change < cfg.db_tol {
                break;
            }
        }
        let sol = sol.expect("at least one Dinkelbach iteration");
        q_carry = db.q;
        let (next, step) = sur.safeguard(&sol.p, cfg.feasibility_slack, |x| sur.bound_ratio(power, x));
        let next_value = power.energy_efficiency(model, &next);
        let infeasibility = model.infeasibility(&next, fh);
        debug_assert!(infeasibility <= 1e-6, "iterate violates constraints by {infeasibility}");
        dual = DualState {
            lambda: sol.lambda,
            mu: sol.mu,
        };
        iterations.push(IterationRecord {
            iteration: r,
            objective: next_value,
            dual_iterations: inner_iters,
            dual_converged: inner_ok,
            step,
            lambda: dual.lambda.clone(),
            q_trace: db.trace,
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
    let objective = Objective::Ee { power: *power };
    let report = finish(
        ObjectiveKind::Ee,
        model,
        scenario,
        fh,
        &objective,
        Some(power),
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
