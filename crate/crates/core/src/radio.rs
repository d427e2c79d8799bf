//! Closed-form downlink SINR, rates, fronthaul loads and consumed power.
//!
//! All quantities are linear. Rates are carried in nats internally; the
//! `*_bps` helpers convert to bps/Hz with the downlink fraction `tau`.

use std::f64::consts::LN_2;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::config::{NetworkConfig, PowerParams};
use crate::error::ModelError;
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precoder {
    Mrt,
    Zf,
}

impl std::str::FromStr for Precoder {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mrt" => Ok(Self::Mrt),
            "zf" => Ok(Self::Zf),
            other => Err(format!("unknown precoder `{other}`")),
        }
    }
}

impl std::fmt::Display for Precoder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Mrt => "mrt",
            Self::Zf => "zf",
        })
    }
}

/// Fronthaul capacity in bps/Hz, before the bandwidth ratio is applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FronthaulConstraint {
    /// Every switch-to-RRU link carries at most `capacity`.
    PerLink {
        capacity: f64,
    },
    /// The BBU-to-switch link carries at most `capacity` in total.
    SumCapacity {
        capacity: f64,
    },
    None,
}

impl FronthaulConstraint {
    pub fn capacity(&self) -> Option<f64> {
        match *self {
            Self::PerLink { capacity } | Self::SumCapacity { capacity } => Some(capacity),
            Self::None => None,
        }
    }

    pub fn with_capacity(&self, capacity: f64) -> Self {
        match self {
            Self::PerLink { .. } => Self::PerLink { capacity },
            Self::SumCapacity { .. } => Self::SumCapacity { capacity },
            Self::None => Self::None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self.capacity() {
            Some(c) if !(c > 0.0) => Err(format!("fronthaul capacity must be positive, got {c}")),
            _ => Ok(()),
        }
    }

    /// User groups that share one fronthaul constraint.
    pub fn groups(&self, cells: &[Vec<usize>]) -> Vec<Vec<usize>> {
        match self {
            Self::PerLink { .. } => cells.to_vec(),
            Self::SumCapacity { .. } => vec![cells.iter().flatten().copied().collect()],
            Self::None => Vec::new(),
        }
    }
}

/// Powers per user, watts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerVector(pub Vec<f64>);

impl PowerVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

impl std::ops::Deref for PowerVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for PowerVector {
    fn from(v: Vec<f64>) -> Self {
        PowerVector(v)
    }
}

/// Everything the closed-form SINR needs for one drop and precoder.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RadioModel {
    pub precoder: Precoder,
    /// L x K estimate quality.
    pub theta: Array2<f64>,
    /// L x K multi-user interference gains.
    pub w: Array2<f64>,
    pub array_gain: f64,
    pub tau: f64,
    pub noise_power: f64,
    pub fh_bandwidth_ratio: f64,
    pub power_budget: f64,
    pub serving: Vec<usize>,
    pub cells: Vec<Vec<usize>>,
    /// `coupling[[i, k]]`: received power at user `k` per watt given to
    /// user `i`, signal included.
    coupling: Array2<f64>,
    /// Same with the own-signal term left out.
    coupling_int: Array2<f64>,
    /// Useful gain `v * theta[j_k, k]` of every user.
    signal_gain: Array1<f64>,
}

/// SINR denominators at one power vector.
#[derive(Debug, Clone)]
pub struct Denominators {
    /// Signal + interference + noise.
    pub full: Array1<f64>,
    /// Interference + noise.
    pub interference: Array1<f64>,
}

impl RadioModel {
    pub fn new(scenario: &Scenario, precoder: Precoder, cfg: &NetworkConfig) -> Result<Self, ModelError> {
        scenario.validate()?;
        let (l, k) = scenario.beta.dim();
        let antennas = cfg.antennas_per_rru;
        let array_gain = match precoder {
            Precoder::Mrt => antennas as f64,
            Precoder::Zf => {
                if antennas <= cfg.pilot_length {
                    return Err(ModelError::ZfAntennaDeficit {
                        antennas,
                        pilots: cfg.pilot_length,
                    });
                }
                (antennas - cfg.pilot_length) as f64
            }
        };
        let estimation_noise = cfg.noise_power / (cfg.pilot_length as f64 * cfg.uplink_tx_power);
        let mut theta = Array2::zeros((l, k));
        for j in 0..l {
            for u in 0..k {
                let contaminated: f64 = (0..k)
                    .filter(|&i| scenario.pilots[i] == scenario.pilots[u])
                    .map(|i| scenario.beta[[j, i]])
                    .sum();
                theta[[j, u]] = scenario.beta[[j, u]].powi(2) / (contaminated + estimation_noise);
            }
        }
        let w = match precoder {
            Precoder::Mrt => scenario.beta.clone(),
            Precoder::Zf => &scenario.beta - &theta,
        };
        let coupling_int = Array2::from_shape_fn((k, k), |(i, u)| {
            let j = scenario.serving[i];
            let contamination = if i == u { 0.0 } else { scenario.pilot_share[[i, u]] };
            w[[j, u]] + array_gain * theta[[j, u]] * contamination
        });
        let signal_gain = Array1::from_shape_fn(k, |u| array_gain * theta[[scenario.serving[u], u]]);
        let mut coupling = coupling_int.clone();
        for u in 0..k {
            coupling[[u, u]] += signal_gain[u];
        }
        Ok(RadioModel {
            precoder,
            theta,
            w,
            array_gain,
            tau: cfg.tau(),
            noise_power: cfg.noise_power,
            fh_bandwidth_ratio: cfg.fh_bandwidth_ratio,
            power_budget: cfg.rru_power_budget,
            serving: scenario.serving.clone(),
            cells: scenario.cells(),
            coupling,
            coupling_int,
            signal_gain,
        })
    }

    pub fn num_users(&self) -> usize {
        self.serving.len()
    }

    pub fn num_rrus(&self) -> usize {
        self.cells.len()
    }

    pub fn coupling(&self) -> &Array2<f64> {
        &self.coupling
    }

    pub fn coupling_int(&self) -> &Array2<f64> {
        &self.coupling_int
    }

    pub fn signal_gain(&self) -> &Array1<f64> {
        &self.signal_gain
    }

    /// `eta * ln 2 / tau`: converts a bps/Hz capacity into a nats bound.
    pub fn eta_tilde(&self) -> f64 {
        self.fh_bandwidth_ratio * LN_2 / self.tau
    }

    /// Fronthaul capacity expressed as a bound on summed `ln(1 + sinr)`.
    pub fn capacity_nats(&self, capacity: f64) -> f64 {
        self.eta_tilde() * capacity
    }

    pub fn denominators(&self, p: &[f64]) -> Denominators {
        assert_eq!(p.len(), self.num_users());
        let mut interference = Array1::from_elem(p.len(), self.noise_power);
        for (i, &pi) in p.iter().enumerate() {
            interference.scaled_add(pi, &self.coupling_int.row(i));
        }
        let full = Array1::from_shape_fn(p.len(), |k| interference[k] + p[k] * self.signal_gain[k]);
        Denominators { full, interference }
    }

    pub fn sinr(&self, p: &[f64]) -> Vec<f64> {
        let d = self.denominators(p);
        (0..p.len())
            .map(|k| p[k] * self.signal_gain[k] / d.interference[k])
            .collect()
    }

    /// `ln(1 + sinr)` per user, computed as a difference of logs of the
    /// two denominators.
    pub fn rates_nats(&self, p: &[f64]) -> Vec<f64> {
        let d = self.denominators(p);
        d.full.iter().zip(&d.interference).map(|(f, i)| (f / i).ln()).collect()
    }

    /// Achievable rate per user, bps/Hz.
    pub fn user_rates(&self, p: &[f64]) -> Vec<f64> {
        self.sinr(p).into_iter().map(|g| self.tau * g.ln_1p() / LN_2).collect()
    }

    pub fn sum_rate(&self, p: &[f64]) -> f64 {
        self.user_rates(p).iter().sum()
    }

    pub fn weighted_sum_rate(&self, p: &[f64], weights: &[f64]) -> f64 {
        self.user_rates(p).iter().zip(weights).map(|(r, a)| r * a).sum()
    }

    /// Data rate carried by each RRU's fronthaul link, bps/Hz.
    pub fn per_link_loads(&self, p: &[f64]) -> Vec<f64> {
        let rates = self.user_rates(p);
        self.cells.iter().map(|c| c.iter().map(|&k| rates[k]).sum()).collect()
    }

    /// Fronthaul load per constraint of `fh` (one entry per link, a single
    /// entry for the sum constraint, none without a constraint).
    pub fn fronthaul_load(&self, p: &[f64], fh: &FronthaulConstraint) -> Vec<f64> {
        match fh {
            FronthaulConstraint::PerLink { .. } => self.per_link_loads(p),
            FronthaulConstraint::SumCapacity { .. } => vec![self.sum_rate(p)],
            FronthaulConstraint::None => Vec::new(),
        }
    }

    pub fn power_sums(&self, p: &[f64]) -> Vec<f64> {
        self.cells.iter().map(|c| c.iter().map(|&k| p[k]).sum()).collect()
    }

    /// Largest relative violation of the per-RRU budgets and of `fh`
    /// (0 when feasible).
    pub fn infeasibility(&self, p: &[f64], fh: &FronthaulConstraint) -> f64 {
        let power = self
            .power_sums(p)
            .into_iter()
            .map(|s| (s - self.power_budget) / self.power_budget)
            .fold(0.0, f64::max);
        let fronthaul = match fh.capacity() {
            Some(c) => {
                let limit = self.fh_bandwidth_ratio * c;
                self.fronthaul_load(p, fh)
                    .into_iter()
                    .map(|x| (x - limit) / limit)
                    .fold(0.0, f64::max)
            }
            None => 0.0,
        };
        let negative = p.iter().any(|&x| x < 0.0);
        if negative {
            f64::INFINITY
        } else {
            power.max(fronthaul)
        }
    }

    pub fn is_feasible(&self, p: &[f64], fh: &FronthaulConstraint, rel_tol: f64) -> bool {
        self.infeasibility(p, fh) <= rel_tol
    }
}

/// Static and dynamic consumption of the whole system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerModel {
    /// Per-user uplink consumption, watts.
    pub ue_power: f64,
    pub rru_fixed_power: f64,
    pub per_antenna_power: f64,
    pub fronthaul_power: f64,
    pub rru_pa_efficiency: f64,
    pub ue_pa_efficiency: f64,
    pub num_users: usize,
    pub num_rrus: usize,
    pub antennas_per_rru: usize,
    pub tau: f64,
}

impl PowerModel {
    pub fn new(net: &NetworkConfig, params: &PowerParams) -> Self {
        let tau = net.tau();
        PowerModel {
            ue_power: (1.0 - tau) * net.uplink_tx_power / params.ue_pa_efficiency,
            rru_fixed_power: params.rru_fixed_power,
            per_antenna_power: params.per_antenna_power,
            fronthaul_power: params.fronthaul_power,
            rru_pa_efficiency: params.rru_pa_efficiency,
            ue_pa_efficiency: params.ue_pa_efficiency,
            num_users: net.num_users,
            num_rrus: net.num_rrus,
            antennas_per_rru: net.antennas_per_rru,
            tau,
        }
    }

    /// Circuit power of all RRUs.
    pub fn rru_circuit_power(&self) -> f64 {
        self.num_rrus as f64 * (self.rru_fixed_power + self.antennas_per_rru as f64 * self.per_antenna_power)
    }

    pub fn static_power(&self) -> f64 {
        self.num_users as f64 * self.ue_power + self.rru_circuit_power() + self.fronthaul_power
    }

    /// Watts of consumption per watt of radiated downlink power.
    pub fn dynamic_slope(&self) -> f64 {
        self.tau / self.rru_pa_efficiency
    }

    pub fn consumed_power(&self, p: &[f64]) -> f64 {
        self.static_power() + self.dynamic_slope() * p.iter().sum::<f64>()
    }

    /// Sum rate per consumed watt, bps/Hz/W.
    pub fn energy_efficiency(&self, model: &RadioModel, p: &[f64]) -> f64 {
        model.sum_rate(p) / self.consumed_power(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{generate_drop, AssociationRule};

    fn one_user(beta: f64) -> (Scenario, NetworkConfig) {
        let sc = Scenario::from_parts(Array2::from_elem((1, 1), beta), vec![0], vec![0], 1).unwrap();
        let cfg = NetworkConfig {
            num_rrus: 1,
            num_users: 1,
            pilot_length: 1,
            ..NetworkConfig::default()
        };
        (sc, cfg)
    }

    #[test]
    fn perfect_estimation_limit() {
        let (sc, mut cfg) = one_user(1e-9);
        cfg.noise_power = 1e-30;
        let m = RadioModel::new(&sc, Precoder::Mrt, &cfg).unwrap();
        assert!((m.theta[[0, 0]] - 1e-9).abs() < 1e-9 * 1e-12);
    }

    #[test]
    fn contamination_halves_estimate() {
        let beta = Array2::from_elem((1, 2), 1e-8);
        let sc = Scenario::from_parts(beta, vec![0, 0], vec![0, 0], 1).unwrap();
        let cfg = NetworkConfig {
            noise_power: 1e-30,
            pilot_length: 1,
            ..NetworkConfig::default()
        };
        let m = RadioModel::new(&sc, Precoder::Mrt, &cfg).unwrap();
        for u in 0..2 {
            assert!((m.theta[[0, u]] / 0.5e-8 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zf_requires_more_antennas_than_pilots() {
        let (sc, mut cfg) = one_user(1e-9);
        cfg.antennas_per_rru = 1;
        assert!(matches!(
            RadioModel::new(&sc, Precoder::Zf, &cfg),
            Err(ModelError::ZfAntennaDeficit { .. })
        ));
    }

    #[test]
    fn single_user_sinr() {
        let (sc, cfg) = one_user(1e-10);
        let m = RadioModel::new(&sc, Precoder::Mrt, &cfg).unwrap();
        let p = 3.0;
        let theta = m.theta[[0, 0]];
        let expected = m.array_gain * p * theta / (p * 1e-10 + cfg.noise_power);
        assert!((m.sinr(&[p])[0] / expected - 1.0).abs() < 1e-12);
        assert_eq!(m.sinr(&[0.0]), vec![0.0]);
    }

    #[test]
    fn rate_conversions() {
        let (sc, cfg) = one_user(1e-10);
        let m = RadioModel::new(&sc, Precoder::Mrt, &cfg).unwrap();
        // choose p so that sinr == 3
        let theta_v = m.array_gain * m.theta[[0, 0]];
        let p = 3.0 * cfg.noise_power / (theta_v - 3.0 * 1e-10);
        let r = m.user_rates(&[p])[0];
        assert!((r - 2.0 * m.tau).abs() < 1e-12);
    }

    #[test]
    fn zero_power_zero_load() {
        let sc = generate_drop(
            &NetworkConfig {
                num_users: 14,
                ..NetworkConfig::default()
            },
            AssociationRule::Distance,
        )
        .unwrap();
        let m = RadioModel::new(&sc, Precoder::Zf, &NetworkConfig::default()).unwrap();
        let p = vec![0.0; 14];
        assert!(m.per_link_loads(&p).iter().all(|&x| x == 0.0));
        assert!(m.is_feasible(&p, &FronthaulConstraint::PerLink { capacity: 1e-9 }, 0.0));
    }

    #[test]
    fn paper_circuit_power() {
        let pm = PowerModel::new(&NetworkConfig::default(), &PowerParams::default());
        assert!((pm.rru_circuit_power() - 292.6).abs() < 1e-9);
        assert_eq!(pm.consumed_power(&[0.0; 70]), pm.static_power());
        let p = vec![1.0; 70];
        let p2 = vec![2.0; 70];
        let diff = pm.consumed_power(&p2) - pm.consumed_power(&p);
        assert!((diff - pm.dynamic_slope() * 70.0).abs() < 1e-9);
    }
}
