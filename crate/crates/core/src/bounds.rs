//! Locally tight concave lower and convex upper bounds on `ln(1 + sinr_k)`.
//!
//! Writing the rate as `U_k - V_k` with `U_k = ln(signal + interference +
//! noise)` and `V_k = ln(interference + noise)`, each bound linearizes one
//! term in `p` (where it is concave) and the other in `ln p` (where it is a
//! log-sum-exp, hence convex). The log-variable linearization carries a
//! factor `p_r,i` from the chain rule, so the gradient of both bounds
//! matches the true rate gradient at the expansion point.

use std::f64::consts::LN_2;

use ndarray::{Array1, Array2};

use crate::error::ModelError;
use crate::radio::{PowerModel, RadioModel};

/// Bounds data cached at one expansion point `p_r`.
#[derive(Debug, Clone)]
pub struct BoundContext {
    pub p_r: Vec<f64>,
    pub d_full: Array1<f64>,
    pub d_int: Array1<f64>,
    /// `ln(1 + sinr_k)` at `p_r`.
    pub rate_r: Array1<f64>,
    /// `c[[i, k]]`: coefficient of `p_i` in user `k`'s full denominator.
    pub c: Array2<f64>,
    /// `c` with the own-signal term of column `k` removed.
    pub c_int: Array2<f64>,
    /// `c[[i, k]] / d_full[k]`.
    pub(crate) full_marginal: Array2<f64>,
    /// `c_int[[i, k]] / d_int[k]`.
    pub(crate) int_marginal: Array2<f64>,
    pub(crate) tau: f64,
}

impl BoundContext {
    pub fn new(model: &RadioModel, p_r: &[f64]) -> Result<Self, ModelError> {
        let k = model.num_users();
        if p_r.len() != k {
            return Err(ModelError::Dimension {
                expected: k,
                got: p_r.len(),
            });
        }
        if let Some(user) = p_r.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
            return Err(ModelError::NonPositiveExpansion { user, value: p_r[user] });
        }
        let den = model.denominators(p_r);
        let c = model.coupling().clone();
        let c_int = model.coupling_int().clone();
        let full_marginal = Array2::from_shape_fn((k, k), |(i, u)| c[[i, u]] / den.full[u]);
        let int_marginal = Array2::from_shape_fn((k, k), |(i, u)| c_int[[i, u]] / den.interference[u]);
        let rate_r = Array1::from_shape_fn(k, |u| (den.full[u] / den.interference[u]).ln());
        Ok(BoundContext {
            p_r: p_r.to_vec(),
            d_full: den.full,
            d_int: den.interference,
            rate_r,
            c,
            c_int,
            full_marginal,
            int_marginal,
            tau: model.tau,
        })
    }

    pub fn num_users(&self) -> usize {
        self.p_r.len()
    }

    /// `(p - p_r, p_r * (ln p - ln p_r))`.
    fn displacements(&self, p: &[f64]) -> (Array1<f64>, Array1<f64>) {
        debug_assert!(p.iter().all(|&x| x > 0.0), "bounds need strictly positive powers");
        let lin = Array1::from_shape_fn(p.len(), |i| p[i] - self.p_r[i]);
        let log = Array1::from_shape_fn(p.len(), |i| self.p_r[i] * (p[i] / self.p_r[i]).ln());
        (lin, log)
    }

    /// Concave lower bound `G_k(p; p_r)` for every user, nats.
    pub fn lower_bounds(&self, p: &[f64]) -> Array1<f64> {
        let (lin, log) = self.displacements(p);
        &self.rate_r - &self.int_marginal.t().dot(&lin) + self.full_marginal.t().dot(&log)
    }

    /// Convex upper bound `H_k(p; p_r)` for every user, nats.
    pub fn upper_bounds(&self, p: &[f64]) -> Array1<f64> {
        let (lin, log) = self.displacements(p);
        &self.rate_r + &self.full_marginal.t().dot(&lin) - self.int_marginal.t().dot(&log)
    }

    pub fn lower_bound(&self, k: usize, p: &[f64]) -> f64 {
        let (lin, log) = self.displacements(p);
        self.rate_r[k] - self.int_marginal.column(k).dot(&lin) + self.full_marginal.column(k).dot(&log)
    }

    pub fn upper_bound(&self, k: usize, p: &[f64]) -> f64 {
        let (lin, log) = self.displacements(p);
        self.rate_r[k] + self.full_marginal.column(k).dot(&lin) - self.int_marginal.column(k).dot(&log)
    }

    /// Gradient of `G_k` at `p`.
    pub fn lower_bound_gradient(&self, k: usize, p: &[f64]) -> Vec<f64> {
        (0..p.len())
            .map(|i| -self.int_marginal[[i, k]] + self.p_r[i] * self.full_marginal[[i, k]] / p[i])
            .collect()
    }

    /// Gradient of `H_k` at `p`.
    pub fn upper_bound_gradient(&self, k: usize, p: &[f64]) -> Vec<f64> {
        (0..p.len())
            .map(|i| self.full_marginal[[i, k]] - self.p_r[i] * self.int_marginal[[i, k]] / p[i])
            .collect()
    }

    /// Lower bound on energy efficiency (bps/Hz/W), tight at `p_r`.
    pub fn ee_lower_bound(&self, power: &PowerModel, p: &[f64]) -> f64 {
        self.tau / LN_2 * self.lower_bounds(p).sum() / power.consumed_power(p)
    }
}
