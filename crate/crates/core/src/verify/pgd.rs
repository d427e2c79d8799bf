use serde::{Deserialize, Serialize};

use super::reference::Reference;
use crate::radio::{FronthaulConstraint, RadioModel};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PgdOptions {
    /// Stop when the scaled projected-gradient step is below this,
    /// relative to each coordinate.
    pub tol: f64,
    pub max_iters: usize,
    pub floor: f64,
}

impl PgdOptions {
    pub fn for_budget(budget: f64) -> Self {
        PgdOptions {
            tol: 1e-12,
            max_iters: 100_000,
            floor: 1e-10 * budget,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PgdResult {
    pub p: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Infinity norm of the final scaled projected-gradient step.
    pub step_norm: f64,
}

/// The surrogate Lagrangian for fixed fronthaul multipliers, evaluated with
/// the reference bound formulas.
struct Lagrangian<'a> {
    r: Reference<'a>,
    p_r: &'a [f64],
    weights: &'a [f64],
    groups: Vec<Vec<usize>>,
    lambda: &'a [f64],
    q_shift: f64,
}

impl Lagrangian<'_> {
    fn value(&self, p: &[f64]) -> f64 {
        let k = p.len();
        let mut v = -self.q_shift * p.iter().sum::<f64>();
        for u in 0..k {
            v -= self.weights[u] * self.r.lower_bound(p, self.p_r, u);
        }
        for (g, members) in self.groups.iter().enumerate() {
            for &u in members {
                v += self.lambda[g] * self.r.upper_bound(p, self.p_r, u);
            }
        }
        v
    }

    fn derivatives(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = p.len();
        let mut grad = vec![-self.q_shift; k];
        let mut curv = vec![0.0; k];
        for u in 0..k {
            let (g, c) = self.r.lower_bound_derivatives(p, self.p_r, u);
            for i in 0..k {
                grad[i] -= self.weights[u] * g[i];
                curv[i] -= self.weights[u] * c[i];
            }
        }
        for (gi, members) in self.groups.iter().enumerate() {
            for &u in members {
                let (g, c) = self.r.upper_bound_derivatives(p, self.p_r, u);
                for i in 0..k {
                    grad[i] += self.lambda[gi] * g[i];
                    curv[i] += self.lambda[gi] * c[i];
                }
            }
        }
        (grad, curv)
    }
}

/// Projection of `y` onto `{x >= floor, sum_cell x <= budget}` in the norm
/// weighted by `d`.
fn project(y: &[f64], d: &[f64], cells: &[Vec<usize>], budget: f64, floor: f64) -> Vec<f64> {
    let mut x: Vec<f64> = y.iter().map(|v| v.max(floor)).collect();
    for cell in cells {
        let total = |nu: f64| cell.iter().map(|&i| (y[i] - nu / d[i]).max(floor)).sum::<f64>();
        if total(0.0) <= budget {
            continue;
        }
        let mut hi = 1.0;
        while total(hi) > budget {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..300 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if total(mid) > budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        for &i in cell {
            x[i] = (y[i] - hi / d[i]).max(floor);
        }
    }
    x
}

/// Minimize the surrogate Lagrangian for fixed fronthaul multipliers
/// `lambda` (one per constraint of `fh`) by diagonally scaled projected
/// gradient descent with Armijo backtracking.
#[allow(clippy::too_many_arguments)]
pub fn projected_gradient_reference(
    model: &RadioModel,
    scenario: &Scenario,
    p_r: &[f64],
    weights: &[f64],
    fh: &FronthaulConstraint,
    lambda: &[f64],
    q_shift: f64,
    opts: &PgdOptions,
) -> PgdResult {
    let r = Reference::new(model, scenario);
    let lag = Lagrangian {
        r,
        p_r,
        weights,
        groups: r.constraint_groups(fh),
        lambda,
        q_shift,
    };
    let cells = r.rru_groups();
    let budget = model.power_budget;
    let mut p = project(p_r, &vec![1.0; p_r.len()], &cells, budget, opts.floor);
    let mut f = lag.value(&p);
    let mut step_norm = f64::INFINITY;
    for it in 1..=opts.max_iters {
        let (g, d) = lag.derivatives(&p);
        let mut s = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let y: Vec<f64> = (0..p.len()).map(|i| p[i] - s * g[i] / d[i]).collect();
            let x = project(&y, &d, &cells, budget, opts.floor);
            let fx = lag.value(&x);
            let decrease: f64 = (0..p.len()).map(|i| g[i] * (x[i] - p[i])).sum();
            if fx <= f + 1e-4 * decrease || decrease.abs() <= 1e-300 {
                accepted = Some((x, fx));
                break;
            }
            s *= 0.5;
        }
        let Some((x, fx)) = accepted else {
            return PgdResult {
                p,
                iterations: it,
                converged: false,
                step_norm,
            };
        };
        step_norm = (0..p.len())
            .map(|i| (x[i] - p[i]).abs() / p[i].max(opts.floor))
            .fold(0.0, f64::max);
        p = x;
        f = fx;
        if step_norm <= opts.tol {
            return PgdResult {
                p,
                iterations: it,
                converged: true,
                step_norm,
            };
        }
    }
    PgdResult {
        p,
        iterations: opts.max_iters,
        converged: false,
        step_norm,
    }
}
