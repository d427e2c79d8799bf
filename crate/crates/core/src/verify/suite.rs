//! A compact run of every oracle, used by the `verify` command.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::finite_diff::{finite_diff_with_roundoff, gradient_mismatch};
use super::grid::{grid_search_solver, GridOptions};
use super::pgd::{projected_gradient_reference, PgdOptions};
use super::reference::Reference;
use super::tolerances::*;
use super::{Objective, OracleReport};
use crate::bounds::BoundContext;
use crate::config::{NetworkConfig, PowerParams};
use crate::ee::solve_ee;
use crate::error::SolveError;
use crate::experiments::baseline_equal_power;
use crate::radio::{FronthaulConstraint, PowerModel, Precoder, RadioModel};
use crate::scenario::{drop_seed, generate_drop, AssociationRule};
use crate::subproblem::{InnerSettings, StepRule, Surrogate};
use crate::wsr::{solve_wsr, SolveReport, SolverConfig};

#[derive(Debug, Clone)]
pub struct SuiteOptions {
    /// Number of three-cell, three-user drops checked against the grid.
    pub instances: usize,
    pub seed: u64,
    pub association: AssociationRule,
    /// Per-link capacity for the full-size drop; the sum limit is `L` times it.
    pub capacity: f64,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            instances: 4,
            seed: 1,
            association: AssociationRule::SignalPower,
            capacity: 30.0,
        }
    }
}

fn precoder(i: usize) -> Precoder {
    if i.is_multiple_of(2) {
        Precoder::Mrt
    } else {
        Precoder::Zf
    }
}

/// Half the largest full-power link load per link, or 1.5 times that in sum.
fn binding_limit(m: &RadioModel, i: usize) -> FronthaulConstraint {
    let p = baseline_equal_power(m, &FronthaulConstraint::None, 0.0).0;
    let c = 0.5 * m.per_link_loads(&p).into_iter().fold(0.0, f64::max);
    if i.is_multiple_of(2) {
        FronthaulConstraint::PerLink { capacity: c }
    } else {
        FronthaulConstraint::SumCapacity { capacity: 1.5 * c }
    }
}

fn powers(g: &mut ChaCha8Rng, k: usize, budget: f64) -> Vec<f64> {
    (0..k).map(|_| budget * 10f64.powf(g.random_range(-6.0..0.0))).collect()
}

fn report_of(r: Result<SolveReport, SolveError>) -> Result<(SolveReport, bool), SolveError> {
    match r {
        Ok(r) => Ok((r, true)),
        Err(SolveError::IterationLimit(r)) => Ok((*r, false)),
        Err(e) => Err(e),
    }
}

/// Largest relative violation of budgets and fronthaul limits.
fn violation(r: &Reference, m: &RadioModel, fh: &FronthaulConstraint, p: &[f64]) -> f64 {
    let mut v: f64 = p.iter().map(|x| (-x).max(0.0)).fold(0.0, f64::max);
    for cell in r.rru_groups() {
        let s: f64 = cell.iter().map(|&u| p[u]).sum();
        v = v.max((s - m.power_budget) / m.power_budget);
    }
    if let Some(c) = fh.capacity() {
        let limit = m.fh_bandwidth_ratio * c;
        for group in r.constraint_groups(fh) {
            let load: f64 = group.iter().map(|&u| r.rate_bps(p, u)).sum();
            v = v.max((load - limit) / limit);
        }
    }
    v
}

fn worst(reports: Vec<OracleReport>, name: &str, tolerance: f64) -> OracleReport {
    let mut out = OracleReport::residual(name, 0.0, tolerance);
    for r in reports {
        out.max_abs_error = out.max_abs_error.max(r.max_abs_error);
        if r.max_rel_error > out.max_rel_error || !r.max_rel_error.is_finite() {
            out.max_rel_error = r.max_rel_error;
            out.argmax = r.argmax;
        }
        out.passed &= r.passed;
    }
    out
}

/// Checks the bounds, the surrogate solver and both SCA solvers against the
/// independent oracles. Small drops use a three-cell layout derived from
/// `net`; monotonicity and feasibility also run on a full `net` drop with
/// the given solver settings.
pub fn oracle_suite(
    net: &NetworkConfig,
    params: &PowerParams,
    solver: &SolverConfig,
    opts: &SuiteOptions,
) -> Result<Vec<OracleReport>, SolveError> {
    net.validate()?;
    params.validate()?;
    let mut g = ChaCha8Rng::seed_from_u64(opts.seed);
    let tight = SolverConfig {
        epsilon: 1e-10,
        max_sca_iters: 20_000,
        weights: Vec::new(),
        ..solver.clone()
    };
    let mut sandwich: f64 = 0.0;
    let mut touch: f64 = 0.0;
    let mut gradient: f64 = 0.0;
    let mut inner = Vec::new();
    let mut wsr_gap = Vec::new();
    let mut ee_gap = Vec::new();
    let mut kkt = Vec::new();
    for i in 0..opts.instances {
        let small = NetworkConfig {
            num_rrus: 3,
            num_users: 3,
            pilot_length: net.pilot_length.min(2),
            rng_seed: drop_seed(opts.seed, i as u64),
            ..net.clone()
        };
        let sc = generate_drop(&small, opts.association)?;
        let m = RadioModel::new(&sc, precoder(i), &small)?;
        let power = PowerModel::new(&small, params);
        let r = Reference::new(&m, &sc);
        let k = m.num_users();
        let budget = m.power_budget;

        let p_r = powers(&mut g, k, budget);
        let ctx = BoundContext::new(&m, &p_r)?;
        for u in 0..k {
            let rate = r.rate_nats(&p_r, u);
            touch = touch
                .max((ctx.lower_bound(u, &p_r) - rate).abs())
                .max((ctx.upper_bound(u, &p_r) - rate).abs());
            let exact = r.rate_gradient(&p_r, u);
            let scale = r.rate_gradient_scale(&p_r, u);
            for upper in [false, true] {
                let f = |p: &[f64]| {
                    if upper {
                        ctx.upper_bound(u, p)
                    } else {
                        ctx.lower_bound(u, p)
                    }
                };
                let (fd, noise) = finite_diff_with_roundoff(f, &p_r, FD_STEP_REL);
                gradient = gradient.max(gradient_mismatch(&fd, &noise, &exact, &scale, GRADIENT_REL));
            }
        }
        for _ in 0..20 {
            let p = powers(&mut g, k, budget);
            for u in 0..k {
                let rate = r.rate_nats(&p, u);
                sandwich = sandwich.max((ctx.lower_bound(u, &p) - rate).max(rate - ctx.upper_bound(u, &p)));
            }
        }

        let fh = binding_limit(&m, i);
        let weights = vec![1.0; k];
        let groups = fh.groups(&m.cells);
        let capacity = m.capacity_nats(fh.capacity().unwrap_or(f64::INFINITY));
        let mut sur = Surrogate::new(&ctx, &m, &weights, groups.clone(), capacity);
        let settings = InnerSettings {
            step_rule: StepRule::Adaptive,
            step0: 1.0,
            max_iters: 5000,
            tol: 1e-9,
            bisection_tol: 1e-12,
            floor: 1e-10 * budget,
        };
        for (scale, q) in [(0.0, 0.0), (1.0, 0.0), (0.5, -0.3)] {
            let lambda: Vec<f64> = groups.iter().map(|_| scale * g.random_range(0.1..2.0)).collect();
            let q_shift = q * power.dynamic_slope();
            sur.set_q_shift(q_shift);
            let (closed, _) = sur.primal_for(&lambda, &settings)?;
            let pgd = projected_gradient_reference(
                &m,
                &sc,
                &p_r,
                &weights,
                &fh,
                &lambda,
                q_shift,
                &PgdOptions::for_budget(budget),
            );
            inner.push(OracleReport::compare(
                "",
                &pgd.p,
                &closed,
                1e-10 * budget,
                CLOSED_FORM_REL,
            ));
        }

        let grid_opts = GridOptions::for_budget(budget);
        let (rep, _) = report_of(solve_wsr(&m, &sc, &fh, &tight))?;
        let grid = grid_search_solver(
            &m,
            &sc,
            &Objective::Wsr {
                weights: weights.clone(),
            },
            &fh,
            &grid_opts,
        )
        .map_err(SolveError::Input)?;
        wsr_gap.push(OracleReport::compare(
            "",
            &[grid.value],
            &[rep.final_objective()],
            1e-12,
            GRID_OBJECTIVE_REL,
        ));
        kkt.push(rep.kkt.max());
        let (rep, _) = report_of(solve_ee(&m, &sc, &power, &fh, &tight))?;
        let grid = grid_search_solver(&m, &sc, &Objective::Ee { power }, &fh, &grid_opts).map_err(SolveError::Input)?;
        ee_gap.push(OracleReport::compare(
            "",
            &[grid.value],
            &[rep.final_objective()],
            1e-12,
            GRID_OBJECTIVE_REL,
        ));
        kkt.push(rep.kkt.max());
    }

    let mut out = vec![
        OracleReport::residual("bounds: sandwich excess (nats)", sandwich, BOUND_SANDWICH_ABS),
        OracleReport::residual("bounds: gap at expansion point (nats)", touch, BOUND_TOUCH_ABS),
        OracleReport::residual("bounds: gradient mismatch (1 = tolerance)", gradient, 1.0),
        worst(inner, "surrogate: closed form vs projected gradient", CLOSED_FORM_REL),
        worst(wsr_gap, "sum rate: SCA vs grid search", GRID_OBJECTIVE_REL),
        worst(ee_gap, "energy efficiency: SCA vs grid search", GRID_OBJECTIVE_REL),
        OracleReport::residual(
            "tight SCA: KKT residual",
            kkt.iter().copied().fold(0.0, f64::max),
            KKT_RESIDUAL,
        ),
    ];

    let sc = generate_drop(net, opts.association)?;
    let power = PowerModel::new(net, params);
    for pre in [Precoder::Mrt, Precoder::Zf] {
        let m = RadioModel::new(&sc, pre, net)?;
        let r = Reference::new(&m, &sc);
        let mut decrease: f64 = 0.0;
        let mut infeasible: f64 = 0.0;
        for fh in [
            FronthaulConstraint::PerLink {
                capacity: opts.capacity,
            },
            FronthaulConstraint::SumCapacity {
                capacity: opts.capacity * net.num_rrus as f64,
            },
        ] {
            for ee in [false, true] {
                let out = if ee {
                    solve_ee(&m, &sc, &power, &fh, solver)
                } else {
                    solve_wsr(&m, &sc, &fh, solver)
                };
                let (rep, _) = report_of(out)?;
                let points: Vec<&[f64]> = std::iter::once(rep.p_start.as_slice())
                    .chain(rep.iterations.iter().map(|it| it.p.as_slice()))
                    .collect();
                let values: Vec<f64> = points
                    .iter()
                    .map(|p| {
                        if ee {
                            r.energy_efficiency(&power, p)
                        } else {
                            r.sum_rate_bps(p)
                        }
                    })
                    .collect();
                for w in values.windows(2) {
                    decrease = decrease.max((w[0] - w[1]) / w[0].abs().max(1.0));
                }
                for p in points {
                    infeasible = infeasible.max(violation(&r, &m, &fh, p));
                }
            }
        }
        out.push(OracleReport::residual(
            &format!("{pre}: largest objective decrease"),
            decrease.max(0.0),
            MONOTONE_SLACK,
        ));
        out.push(OracleReport::residual(
            &format!("{pre}: largest constraint violation"),
            infeasible.max(0.0),
            FEASIBILITY_REL,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_on_defaults() {
        let opts = SuiteOptions {
            instances: 2,
            ..SuiteOptions::default()
        };
        let reports = oracle_suite(
            &NetworkConfig::default(),
            &PowerParams::default(),
            &SolverConfig::default(),
            &opts,
        )
        .unwrap();
        for r in &reports {
            assert!(r.passed, "{}", r.row());
        }
    }
}
