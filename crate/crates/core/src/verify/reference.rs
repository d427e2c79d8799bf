//! Scalar-loop re-implementation of the closed-form SINR and of the rate
//! bounds, written directly from their definitions.

use std::f64::consts::LN_2;

use crate::radio::{FronthaulConstraint, PowerModel, RadioModel};
use crate::scenario::Scenario;

/// Read-only view over the physical quantities of one instance.
#[derive(Debug, Clone, Copy)]
pub struct Reference<'a> {
    pub model: &'a RadioModel,
    pub scenario: &'a Scenario,
}

impl<'a> Reference<'a> {
    pub fn new(model: &'a RadioModel, scenario: &'a Scenario) -> Self {
        Reference { model, scenario }
    }

    pub fn num_users(&self) -> usize {
        self.scenario.serving.len()
    }

    fn shares(&self, i: usize, k: usize) -> bool {
        self.scenario.pilots[i] == self.scenario.pilots[k]
    }

    /// Received power at `k` per watt allocated to `i`, own signal included.
    pub fn coeff(&self, i: usize, k: usize) -> f64 {
        let j = self.scenario.serving[i];
        let pc = if self.shares(i, k) {
            self.model.array_gain * self.model.theta[[j, k]]
        } else {
            0.0
        };
        self.model.w[[j, k]] + pc
    }

    /// Same with the own-signal term removed.
    pub fn coeff_int(&self, i: usize, k: usize) -> f64 {
        let j = self.scenario.serving[i];
        let pc = if i != k && self.shares(i, k) {
            self.model.array_gain * self.model.theta[[j, k]]
        } else {
            0.0
        };
        self.model.w[[j, k]] + pc
    }

    pub fn full_den(&self, p: &[f64], k: usize) -> f64 {
        let mut s = self.model.noise_power;
        for (n, pn) in p.iter().enumerate() {
            s += pn * self.coeff(n, k);
        }
        s
    }

    pub fn int_den(&self, p: &[f64], k: usize) -> f64 {
        let mut s = self.model.noise_power;
        for (n, pn) in p.iter().enumerate() {
            s += pn * self.coeff_int(n, k);
        }
        s
    }

    pub fn sinr(&self, p: &[f64], k: usize) -> f64 {
        let j = self.scenario.serving[k];
        self.model.array_gain * p[k] * self.model.theta[[j, k]] / self.int_den(p, k)
    }

    pub fn rate_nats(&self, p: &[f64], k: usize) -> f64 {
        self.sinr(p, k).ln_1p()
    }

    pub fn rate_bps(&self, p: &[f64], k: usize) -> f64 {
        self.model.tau * self.rate_nats(p, k) / LN_2
    }

    /// d ln(1 + sinr_k) / d p.
    pub fn rate_gradient(&self, p: &[f64], k: usize) -> Vec<f64> {
        let (df, di) = (self.full_den(p, k), self.int_den(p, k));
        (0..p.len())
            .map(|i| self.coeff(i, k) / df - self.coeff_int(i, k) / di)
            .collect()
    }

    /// Magnitude of the two summands of every component of
    /// [`Reference::rate_gradient`]; the natural scale for relative errors.
    pub fn rate_gradient_scale(&self, p: &[f64], k: usize) -> Vec<f64> {
        let (df, di) = (self.full_den(p, k), self.int_den(p, k));
        (0..p.len())
            .map(|i| self.coeff(i, k) / df + self.coeff_int(i, k) / di)
            .collect()
    }

    pub fn sum_rate_bps(&self, p: &[f64]) -> f64 {
        (0..p.len()).map(|k| self.rate_bps(p, k)).sum()
    }

    pub fn energy_efficiency(&self, power: &PowerModel, p: &[f64]) -> f64 {
        let consumed = power.static_power() + power.tau / power.rru_pa_efficiency * p.iter().sum::<f64>();
        self.sum_rate_bps(p) / consumed
    }

    pub fn ee_gradient(&self, power: &PowerModel, p: &[f64]) -> Vec<f64> {
        let slope = power.tau / power.rru_pa_efficiency;
        let consumed = power.static_power() + slope * p.iter().sum::<f64>();
        let nats: f64 = (0..p.len()).map(|k| self.rate_nats(p, k)).sum();
        let mut grad = vec![0.0; p.len()];
        for k in 0..p.len() {
            for (g, d) in grad.iter_mut().zip(self.rate_gradient(p, k)) {
                *g += d;
            }
        }
        let scale = self.model.tau / LN_2;
        grad.iter()
            .map(|g| scale * (g * consumed - nats * slope) / (consumed * consumed))
            .collect()
    }

    /// Summand magnitudes of [`Reference::ee_gradient`].
    pub fn ee_gradient_scale(&self, power: &PowerModel, p: &[f64]) -> Vec<f64> {
        let slope = power.tau / power.rru_pa_efficiency;
        let consumed = power.static_power() + slope * p.iter().sum::<f64>();
        let nats: f64 = (0..p.len()).map(|k| self.rate_nats(p, k)).sum();
        let mut scale = vec![0.0; p.len()];
        for k in 0..p.len() {
            for (s, d) in scale.iter_mut().zip(self.rate_gradient_scale(p, k)) {
                *s += d;
            }
        }
        let unit = self.model.tau / LN_2;
        scale
            .iter()
            .map(|s| unit * (s * consumed + nats * slope) / (consumed * consumed))
            .collect()
    }

    /// Lower bound G_k(p; p_r).
    pub fn lower_bound(&self, p: &[f64], p_r: &[f64], k: usize) -> f64 {
        let (df, di) = (self.full_den(p_r, k), self.int_den(p_r, k));
        let mut g = (df / di).ln();
        for i in 0..p.len() {
            g -= (p[i] - p_r[i]) * self.coeff_int(i, k) / di;
            g += (p[i].ln() - p_r[i].ln()) * p_r[i] * self.coeff(i, k) / df;
        }
        g
    }

    /// Upper bound H_k(p; p_r).
    pub fn upper_bound(&self, p: &[f64], p_r: &[f64], k: usize) -> f64 {
        let (df, di) = (self.full_den(p_r, k), self.int_den(p_r, k));
        let mut h = (df / di).ln();
        for i in 0..p.len() {
            h += (p[i] - p_r[i]) * self.coeff(i, k) / df;
            h -= (p[i].ln() - p_r[i].ln()) * p_r[i] * self.coeff_int(i, k) / di;
        }
        h
    }

    /// dG_k/dp and its diagonal second derivative at `p`.
    pub fn lower_bound_derivatives(&self, p: &[f64], p_r: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
        let (df, di) = (self.full_den(p_r, k), self.int_den(p_r, k));
        let grad = (0..p.len())
            .map(|i| -self.coeff_int(i, k) / di + p_r[i] * self.coeff(i, k) / (df * p[i]))
            .collect();
        let curv = (0..p.len())
            .map(|i| -p_r[i] * self.coeff(i, k) / (df * p[i] * p[i]))
            .collect();
        (grad, curv)
    }

    /// dH_k/dp and its diagonal second derivative at `p`.
    pub fn upper_bound_derivatives(&self, p: &[f64], p_r: &[f64], k: usize) -> (Vec<f64>, Vec<f64>) {
        let (df, di) = (self.full_den(p_r, k), self.int_den(p_r, k));
        let grad = (0..p.len())
            .map(|i| self.coeff(i, k) / df - p_r[i] * self.coeff_int(i, k) / (di * p[i]))
            .collect();
        let curv = (0..p.len())
            .map(|i| p_r[i] * self.coeff_int(i, k) / (di * p[i] * p[i]))
            .collect();
        (grad, curv)
    }

    /// Users of every fronthaul constraint.
    pub fn constraint_groups(&self, fh: &FronthaulConstraint) -> Vec<Vec<usize>> {
        let l = self.model.theta.nrows();
        let k = self.num_users();
        match fh {
            FronthaulConstraint::PerLink { .. } => (0..l)
                .map(|j| (0..k).filter(|&u| self.scenario.serving[u] == j).collect())
                .collect(),
            FronthaulConstraint::SumCapacity { .. } => vec![(0..k).collect()],
            FronthaulConstraint::None => Vec::new(),
        }
    }

    /// Users of every RRU.
    pub fn rru_groups(&self) -> Vec<Vec<usize>> {
        self.constraint_groups(&FronthaulConstraint::PerLink { capacity: 1.0 })
    }

    /// Power budgets and fronthaul limits (bps/Hz) hold exactly.
    pub fn feasible(&self, p: &[f64], fh: &FronthaulConstraint) -> bool {
        let budget = self.model.power_budget;
        if p.iter().any(|&x| x < 0.0) {
            return false;
        }
        if self
            .rru_groups()
            .iter()
            .any(|g| g.iter().map(|&u| p[u]).sum::<f64>() > budget)
        {
            return false;
        }
        match fh.capacity() {
            Some(c) => {
                let limit = self.model.fh_bandwidth_ratio * c;
                self.constraint_groups(fh)
                    .iter()
                    .all(|g| g.iter().map(|&u| self.rate_bps(p, u)).sum::<f64>() <= limit)
            }
            None => true,
        }
    }
}
