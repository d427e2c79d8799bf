use serde::{Deserialize, Serialize};

use super::reference::Reference;
use super::{Objective, OracleReport};
use crate::radio::{FronthaulConstraint, RadioModel};
use crate::scenario::Scenario;

/// Normalized first-order residuals of the original (non-convex) problem.
///
/// Powers are scaled by the budget, and every gradient-like quantity is
/// divided by the largest per-coordinate term of the Lagrangian gradient.
/// Fronthaul multipliers act on constraints expressed in nats.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    /// Projected-gradient step of the Lagrangian, respecting the power floor.
    pub stationarity: f64,
    pub complementary_power: f64,
    pub complementary_fronthaul: f64,
    pub primal_power: f64,
    pub primal_fronthaul: f64,
    pub dual: f64,
}

impl KktResiduals {
    pub fn max(&self) -> f64 {
        [
            self.stationarity,
            self.complementary_power,
            self.complementary_fronthaul,
            self.primal_power,
            self.primal_fronthaul,
            self.dual,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn reports(&self, prefix: &str, tol: f64) -> Vec<OracleReport> {
        [
            ("stationarity", self.stationarity),
            ("complementary slackness (power)", self.complementary_power),
            ("complementary slackness (fronthaul)", self.complementary_fronthaul),
            ("primal feasibility (power)", self.primal_power),
            ("primal feasibility (fronthaul)", self.primal_fronthaul),
            ("dual feasibility", self.dual),
        ]
        .into_iter()
        .map(|(n, v)| OracleReport::residual(&format!("{prefix}{n}"), v, tol))
        .collect()
    }
}

/// KKT residuals at `(p, lambda, mu)`. `lambda` has one entry per fronthaul
/// constraint of `fh`, `mu` one per RRU. For the energy-efficiency objective
/// the conditions are those of the parametric problem
/// `max sum ln(1 + sinr) - q* P_consumed` with `q*` the ratio at `p`.
#[allow(clippy::too_many_arguments)]
pub fn kkt_residuals(
    model: &RadioModel,
    scenario: &Scenario,
    fh: &FronthaulConstraint,
    p: &[f64],
    lambda: &[f64],
    mu: &[f64],
    objective: &Objective,
    floor: f64,
) -> KktResiduals {
    let r = Reference::new(model, scenario);
    let k = p.len();
    let budget = model.power_budget;
    let groups = r.constraint_groups(fh);
    let cells = r.rru_groups();

    let grads: Vec<Vec<f64>> = (0..k).map(|u| r.rate_gradient(p, u)).collect();
    let mut obj = vec![0.0; k];
    match objective {
        Objective::Wsr { weights } => {
            for u in 0..k {
                for i in 0..k {
                    obj[i] += weights[u] * grads[u][i];
                }
            }
        }
        Objective::Ee { power } => {
            let slope = power.tau / power.rru_pa_efficiency;
            let nats: f64 = (0..k).map(|u| r.rate_nats(p, u)).sum();
            let consumed = power.static_power() + slope * p.iter().sum::<f64>();
            let q = nats / consumed;
            for i in 0..k {
                obj[i] = (0..k).map(|u| grads[u][i]).sum::<f64>() - q * slope;
            }
        }
    }
    let mut fronthaul = vec![0.0; k];
    for (g, members) in groups.iter().enumerate() {
        let l = lambda.get(g).copied().unwrap_or(0.0);
        for &u in members {
            for i in 0..k {
                fronthaul[i] += l * grads[u][i];
            }
        }
    }
    let mut cell_of = vec![0; k];
    for (l, c) in cells.iter().enumerate() {
        for &u in c {
            cell_of[u] = l;
        }
    }
    let mu_of = |i: usize| mu.get(cell_of[i]).copied().unwrap_or(0.0);

    let scale = (0..k)
        .map(|i| budget * (obj[i].abs() + fronthaul[i].abs() + mu_of(i)))
        .fold(f64::MIN_POSITIVE, f64::max);
    let x_floor = floor / budget;
    let stationarity = (0..k)
        .map(|i| {
            let x = p[i] / budget;
            let g = budget * (obj[i] - fronthaul[i] - mu_of(i)) / scale;
            (x - (x + g).max(x_floor)).abs()
        })
        .fold(0.0, f64::max);

    let sums: Vec<f64> = cells.iter().map(|c| c.iter().map(|&u| p[u]).sum()).collect();
    let complementary_power = sums
        .iter()
        .enumerate()
        .map(|(l, s)| (mu.get(l).copied().unwrap_or(0.0) * (budget - s)).abs() / scale)
        .fold(0.0, f64::max);
    let primal_power = sums.iter().map(|s| (s / budget - 1.0).max(0.0)).fold(0.0, f64::max);

    let (complementary_fronthaul, primal_fronthaul) = match fh.capacity() {
        Some(c) => {
            let cap = model.fh_bandwidth_ratio * std::f64::consts::LN_2 / model.tau * c;
            let mut cs: f64 = 0.0;
            let mut pf: f64 = 0.0;
            for (g, members) in groups.iter().enumerate() {
                let load: f64 = members.iter().map(|&u| r.rate_nats(p, u)).sum();
                let l = lambda.get(g).copied().unwrap_or(0.0);
                cs = cs.max((l * (cap - load)).abs() / scale);
                pf = pf.max((load / cap - 1.0).max(0.0));
            }
            (cs, pf)
        }
        None => (0.0, 0.0),
    };
    let dual = lambda.iter().chain(mu).map(|v| (-v).max(0.0)).fold(0.0, f64::max) / scale;
    KktResiduals {
        stationarity,
        complementary_power,
        complementary_fronthaul,
        primal_power,
        primal_fronthaul,
        dual,
    }
}
