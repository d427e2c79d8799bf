//! The convex surrogate solved in every SCA iteration, shared by the WSR
//! and EE solvers: weighted bound objective, bound-based fronthaul
//! constraints and per-RRU power budgets, solved through its dual.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::bounds::BoundContext;
use crate::error::SolveError;
use crate::radio::{PowerModel, RadioModel};

/// How the fronthaul multipliers are moved along the dual subgradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `step0 / sqrt(t)`.
    Diminishing,
    /// `step0` at every iteration.
    Constant,
    /// Per-multiplier step of fixed length along the subgradient sign,
    /// grown by 1.2 while the sign persists and halved when it flips.
    Adaptive,
}

/// Projected subgradient update `[lambda + step * d]^+`.
pub fn dual_subgradient_step(lambda: &[f64], subgradient: &[f64], step: f64) -> Vec<f64> {
    lambda
        .iter()
        .zip(subgradient)
        .map(|(l, d)| (l + step * d).max(0.0))
        .collect()
}

/// Step-size state of the dual ascent.
#[derive(Debug, Clone)]
pub struct DualAscent {
    rule: StepRule,
    step0: f64,
    t: usize,
    steps: Vec<f64>,
    last_sign: Vec<f64>,
}

impl DualAscent {
    pub fn new(rule: StepRule, step0: f64, dim: usize) -> Self {
        DualAscent {
            rule,
            step0,
            t: 0,
            steps: vec![step0; dim],
            last_sign: vec![0.0; dim],
        }
    }

    pub fn step(&mut self, lambda: &mut [f64], subgradient: &[f64]) {
        self.t += 1;
        match self.rule {
            StepRule::Diminishing | StepRule::Constant => {
                let step = match self.rule {
                    StepRule::Diminishing => self.step0 / (self.t as f64).sqrt(),
                    _ => self.step0,
                };
                let next = dual_subgradient_step(lambda, subgradient, step);
                lambda.copy_from_slice(&next);
            }
            StepRule::Adaptive => {
                for g in 0..lambda.len() {
                    let s = if subgradient[g] > 0.0 {
                        1.0
                    } else if subgradient[g] < 0.0 {
                        -1.0
                    } else {
                        0.0
                    };
                    if lambda[g] == 0.0 && s <= 0.0 {
                        self.last_sign[g] = 0.0;
                        continue;
                    }
                    let trend = s * self.last_sign[g];
                    if trend < 0.0 {
                        self.steps[g] *= 0.5;
                    } else if trend > 0.0 {
                        self.steps[g] *= 1.2;
                    }
                    lambda[g] = (lambda[g] + self.steps[g] * s).max(0.0);
                    self.last_sign[g] = s;
                }
            }
        }
    }

    /// True once every adaptive step has collapsed below `tol` relative to
    /// its multiplier.
    pub fn stalled(&self, lambda: &[f64], tol: f64) -> bool {
        self.rule == StepRule::Adaptive && self.steps.iter().zip(lambda).all(|(s, l)| *s <= tol * l.max(1e-12))
    }
}

/// `A_i` and `B_i` of the closed-form power update, for a multiplier per
/// user (the multiplier of the fronthaul constraint the user belongs to).
pub fn coefficients(ctx: &BoundContext, weights: &[f64], user_lambda: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let alpha = Array1::from(weights.to_vec());
    let lam = Array1::from(user_lambda.to_vec());
    let a = ctx.full_marginal.dot(&alpha) + ctx.int_marginal.dot(&lam);
    let b = ctx.full_marginal.dot(&lam) + ctx.int_marginal.dot(&alpha);
    (a.to_vec(), b.to_vec())
}

/// Minimizer of the surrogate Lagrangian over the per-RRU power budgets:
/// `p_i = max(floor, p_r,i A_i / (mu_l - q_shift + B_i))` with `mu_l >= 0`
/// found by bisection so each budget holds, and `mu_l = 0` when it is slack.
/// Returns the powers and the per-RRU multipliers.
#[allow(clippy::too_many_arguments)]
pub fn lagrangian_power_update(
    p_r: &[f64],
    a: &[f64],
    b: &[f64],
    q_shift: f64,
    cells: &[Vec<usize>],
    budget: f64,
    floor: f64,
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
    let mut p = vec![floor; p_r.len()];
    let mut mu = vec![0.0; cells.len()];
    for (l, cell) in cells.iter().enumerate() {
        let power = |m: f64, i: usize| {
            let den = m - q_shift + b[i];
            if a[i] <= 0.0 {
                floor
            } else {
                (p_r[i] * a[i] / den).max(floor)
            }
        };
        let total = |m: f64| cell.iter().map(|&i| power(m, i)).sum::<f64>();
        let at_zero = total(0.0);
        if !at_zero.is_finite() {
            return Err(SolveError::Bisection { rru: l });
        }
        let m = if at_zero <= budget {
            0.0
        } else {
            let mut lo = 0.0;
            let numerator: f64 = cell.iter().map(|&i| p_r[i] * a[i].max(0.0)).sum();
            let mut hi = numerator / (budget - floor * cell.len() as f64).max(budget * 0.5);
            let mut grow = 0;
            while total(hi) > budget {
                hi *= 2.0;
                grow += 1;
                if grow > 200 || !hi.is_finite() {
                    return Err(SolveError::Bisection { rru: l });
                }
            }
            let mut converged = false;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    converged = true;
                    break;
                }
                if total(mid) > budget {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if budget - total(hi) <= tol {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(SolveError::Bisection { rru: l });
            }
            hi
        };
        mu[l] = m;
        for &i in cell {
            p[i] = power(m, i);
        }
    }
    Ok((p, mu))
}

/// Settings of one surrogate solve.
#[derive(Debug, Clone, Copy)]
pub struct InnerSettings {
    pub step_rule: StepRule,
    pub step0: f64,
    pub max_iters: usize,
    pub tol: f64,
    pub bisection_tol: f64,
    pub floor: f64,
}

/// Dual solution of one surrogate.
#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub p: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Dual function value at every iterate (minimization form).
    pub dual_values: Vec<f64>,
}

/// The convex surrogate at one expansion point.
#[derive(Debug)]
pub struct Surrogate<'a> {
    ctx: &'a BoundContext,
    cells: &'a [Vec<usize>],
    groups: Vec<Vec<usize>>,
    /// Constraint index of every user, if any.
    group_of: Vec<Option<usize>>,
    capacity: f64,
    budget: f64,
    pub(crate) q_shift: f64,
    weighted_full: Array1<f64>,
    weighted_int: Array1<f64>,
    group_full: Array2<f64>,
    group_int: Array2<f64>,
    group_rate: Vec<f64>,
    weighted_rate: f64,
}

impl<'a> Surrogate<'a> {
    /// `groups` lists the users of every fronthaul constraint and
    /// `capacity` the common bound on their summed `ln(1 + sinr)`.
    pub fn new(
        ctx: &'a BoundContext,
        model: &'a RadioModel,
        weights: &[f64],
        groups: Vec<Vec<usize>>,
        capacity: f64,
    ) -> Self {
        let k = ctx.num_users();
        let alpha = Array1::from(weights.to_vec());
        let mut group_of = vec![None; k];
        let mut group_full = Array2::zeros((k, groups.len()));
        let mut group_int = Array2::zeros((k, groups.len()));
        for (g, members) in groups.iter().enumerate() {
            for &u in members {
                group_of[u] = Some(g);
                for i in 0..k {
                    group_full[[i, g]] += ctx.full_marginal[[i, u]];
                    group_int[[i, g]] += ctx.int_marginal[[i, u]];
                }
            }
        }
        let group_rate = groups.iter().map(|m| m.iter().map(|&u| ctx.rate_r[u]).sum()).collect();
        Surrogate {
            ctx,
            cells: &model.cells,
            group_of,
            capacity,
            budget: model.power_budget,
            q_shift: 0.0,
            weighted_full: ctx.full_marginal.dot(&alpha),
            weighted_int: ctx.int_marginal.dot(&alpha),
            group_full,
            group_int,
            group_rate,
            weighted_rate: ctx.rate_r.dot(&alpha),
            groups,
        }
    }

    pub fn num_constraints(&self) -> usize {
        self.groups.len()
    }

    pub fn set_q_shift(&mut self, q_shift: f64) {
        self.q_shift = q_shift;
    }

    /// Multiplier per user from multipliers per constraint.
    pub fn user_lambda(&self, lambda: &[f64]) -> Vec<f64> {
        self.group_of.iter().map(|g| g.map_or(0.0, |g| lambda[g])).collect()
    }

    pub fn coefficients(&self, lambda: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let lam = Array1::from(lambda.to_vec());
        let a = &self.weighted_full + &self.group_int.dot(&lam);
        let b = &self.weighted_int + &self.group_full.dot(&lam);
        (a.to_vec(), b.to_vec())
    }

    fn displacements(&self, p: &[f64]) -> (Array1<f64>, Array1<f64>) {
        let p_r = &self.ctx.p_r;
        (
            Array1::from_shape_fn(p.len(), |i| p[i] - p_r[i]),
            Array1::from_shape_fn(p.len(), |i| p_r[i] * (p[i] / p_r[i]).ln()),
        )
    }

    /// `sum_k alpha_k G_k(p)`.
    pub fn weighted_lower_bound(&self, p: &[f64]) -> f64 {
        let (lin, log) = self.displacements(p);
        self.weighted_rate - self.weighted_int.dot(&lin) + self.weighted_full.dot(&log)
    }

    /// Summed upper bounds of every constraint's users.
    pub fn group_upper_bounds(&self, p: &[f64]) -> Vec<f64> {
        let (lin, log) = self.displacements(p);
        let lin_part = self.group_full.t().dot(&lin);
        let log_part = self.group_int.t().dot(&log);
        (0..self.groups.len())
            .map(|g| self.group_rate[g] + lin_part[g] - log_part[g])
            .collect()
    }

    /// Lagrangian in minimization form (fronthaul multipliers only).
    pub fn lagrangian(&self, p: &[f64], lambda: &[f64]) -> f64 {
        let h = self.group_upper_bounds(p);
        -self.weighted_lower_bound(p) - self.q_shift * p.iter().sum::<f64>()
            + lambda.iter().zip(&h).map(|(l, h)| l * (h - self.capacity)).sum::<f64>()
    }

    pub fn primal_for(&self, lambda: &[f64], s: &InnerSettings) -> Result<(Vec<f64>, Vec<f64>), SolveError> {
        let (a, b) = self.coefficients(lambda);
        lagrangian_power_update(
            &self.ctx.p_r,
            &a,
            &b,
            self.q_shift,
            self.cells,
            self.budget,
            s.floor,
            s.bisection_tol,
        )
    }

    /// Dual ascent on the fronthaul multipliers, started from `lambda0`.
    /// Stops once the projected dual gradient is within `tol` of zero, i.e.
    /// the surrogate constraints hold and are tight wherever the multiplier
    /// is positive.
    pub fn solve(&self, lambda0: &[f64], s: &InnerSettings) -> Result<InnerSolution, SolveError> {
        let n = self.groups.len();
        let mut lambda: Vec<f64> = if lambda0.len() == n {
            lambda0.to_vec()
        } else {
            vec![0.0; n]
        };
        let mut ascent = DualAscent::new(s.step_rule, s.step0, n);
        let mut dual_values = Vec::new();
        let scale = self.capacity.abs().max(1.0);
        let mut last = None;
        for t in 1..=s.max_iters.max(1) {
            let (p, mu) = self.primal_for(&lambda, s)?;
            if n == 0 {
                dual_values.push(self.lagrangian(&p, &lambda));
                return Ok(InnerSolution {
                    p,
                    lambda,
                    mu,
                    iterations: 1,
                    converged: true,
                    dual_values,
                });
            }
            let h = self.group_upper_bounds(&p);
            let d: Vec<f64> = h.iter().map(|h| h - self.capacity).collect();
            let value = self.lagrangian(&p, &lambda);
            dual_values.push(value);
            let kkt = lambda.iter().zip(&d).all(|(l, d)| {
                if *l > 0.0 {
                    d.abs() <= s.tol * scale
                } else {
                    *d <= s.tol * scale
                }
            });
            if kkt || ascent.stalled(&lambda, 1e-15) {
                return Ok(InnerSolution {
                    p,
                    lambda,
                    mu,
                    iterations: t,
                    converged: kkt,
                    dual_values,
                });
            }
            last = Some((p, mu));
            ascent.step(&mut lambda, &d);
        }
        let (p, mu) = last.expect("at least one iteration");
        Ok(InnerSolution {
            p,
            lambda,
            mu,
            iterations: s.max_iters,
            converged: false,
            dual_values,
        })
    }

    /// Largest step from `p_r` toward `target` that keeps every surrogate
    /// fronthaul constraint within `capacity * (1 + slack)`.
    pub fn feasible_fraction(&self, target: &[f64], slack: f64) -> f64 {
        if self.groups.is_empty() {
            return 1.0;
        }
        let limit = self.capacity * (1.0 + slack);
        let ok = |t: f64| {
            let p = self.blend(target, t);
            self.group_upper_bounds(&p).iter().all(|&h| h <= limit)
        };
        if ok(1.0) {
            return 1.0;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if ok(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    pub fn blend(&self, target: &[f64], t: f64) -> Vec<f64> {
        self.ctx.p_r.iter().zip(target).map(|(r, x)| r + t * (x - r)).collect()
    }

    /// Move from `p_r` toward `target` as far as the surrogate constraints
    /// allow, then make sure `objective` did not drop below its value at
    /// `p_r` (golden-section search on the segment otherwise). `objective`
    /// must be unimodal along the segment.
    pub fn safeguard(&self, target: &[f64], slack: f64, objective: impl Fn(&[f64]) -> f64) -> (Vec<f64>, f64) {
        let t_max = self.feasible_fraction(target, slack);
        let base = objective(&self.ctx.p_r);
        let candidate = self.blend(target, t_max);
        if objective(&candidate) >= base {
            return (candidate, t_max);
        }
        let phi = |t: f64| objective(&self.blend(target, t));
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let (mut a, mut b) = (0.0, t_max);
        let mut x1 = b - ratio * (b - a);
        let mut x2 = a + ratio * (b - a);
        let (mut f1, mut f2) = (phi(x1), phi(x2));
        for _ in 0..80 {
            if f1 < f2 {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + ratio * (b - a);
                f2 = phi(x2);
            } else {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - ratio * (b - a);
                f1 = phi(x1);
            }
        }
        let t = 0.5 * (a + b);
        if phi(t) > base {
            (self.blend(target, t), t)
        } else {
            (self.ctx.p_r.clone(), 0.0)
        }
    }

    /// Surrogate energy-efficiency ratio `sum_k G_k / P_consumed` (nats/W),
    /// for unit weights.
    pub fn bound_ratio(&self, power: &PowerModel, p: &[f64]) -> f64 {
        self.weighted_lower_bound(p) / power.consumed_power(p)
    }
}
