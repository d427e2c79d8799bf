//! Network and power-consumption parameters, plus the flat `key = value`
//! config file used by the CLI.
//!
//! Every key in a config file is a field name of one of the parameter
//! structs. Powers are linear (watts); the keys `noise_power_dbm`,
//! `uplink_tx_power_dbm` and `rru_power_budget_dbm` are accepted as dBm
//! aliases and converted on ingestion.

use std::collections::BTreeSet;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Thermal noise power in watts over `bandwidth_hz` with a receiver noise
/// figure, from a -174 dBm/Hz density.
pub fn thermal_noise_power(bandwidth_hz: f64, noise_figure_db: f64) -> f64 {
    dbm_to_watts(-174.0 + 10.0 * bandwidth_hz.log10() + noise_figure_db)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub num_rrus: usize,
    pub num_users: usize,
    pub antennas_per_rru: usize,
    /// Hexagon circumradius, meters.
    pub cell_radius: f64,
    /// Pathloss at 1 km, dB.
    pub pathloss_intercept: f64,
    /// dB per decade of distance in km.
    pub pathloss_slope: f64,
    pub shadowing_stddev: f64,
    /// Distances below this are clamped, meters.
    pub min_distance: f64,
    /// Watts.
    pub noise_power: f64,
    /// Uplink pilot power, watts.
    pub uplink_tx_power: f64,
    /// Per-RRU downlink budget, watts.
    pub rru_power_budget: f64,
    pub coherence_length: usize,
    pub pilot_length: usize,
    pub dl_fraction: f64,
    pub fh_bandwidth_ratio: f64,
    pub rng_seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            num_rrus: 7,
            num_users: 70,
            antennas_per_rru: 200,
            cell_radius: 500.0,
            pathloss_intercept: 128.1,
            pathloss_slope: 37.6,
            shadowing_stddev: 8.0,
            min_distance: 35.0,
            noise_power: thermal_noise_power(10e6, 9.0),
            uplink_tx_power: dbm_to_watts(23.0),
            rru_power_budget: dbm_to_watts(46.0),
            coherence_length: 200,
            pilot_length: 10,
            dl_fraction: 1.0,
            fh_bandwidth_ratio: 1.0,
            rng_seed: 0,
        }
    }
}

impl NetworkConfig {
    /// Fraction of the coherence interval used for downlink data.
    pub fn tau(&self) -> f64 {
        self.dl_fraction * (1.0 - self.pilot_length as f64 / self.coherence_length as f64)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        fn positive(key: &'static str, x: f64) -> Result<(), ConfigError> {
            if x.is_finite() && x > 0.0 {
                Ok(())
            } else {
                Err(ConfigError::invalid(
                    key,
                    format!("must be positive and finite, got {x}"),
                ))
            }
        }
        if self.num_rrus == 0 {
            return Err(ConfigError::invalid("num_rrus", "must be at least 1"));
        }
        if crate::scenario::hex_cluster_shape(self.num_rrus).is_none() {
            return Err(ConfigError::invalid(
                "num_rrus",
                format!("{} is not a hexagonal cluster size (1, 3, 4, 7, 9, ...)", self.num_rrus),
            ));
        }
        if self.num_users == 0 {
            return Err(ConfigError::invalid("num_users", "must be at least 1"));
        }
        if self.antennas_per_rru == 0 {
            return Err(ConfigError::invalid("antennas_per_rru", "must be at least 1"));
        }
        positive("cell_radius", self.cell_radius)?;
        positive("min_distance", self.min_distance)?;
        positive("noise_power", self.noise_power)?;
        positive("uplink_tx_power", self.uplink_tx_power)?;
        positive("rru_power_budget", self.rru_power_budget)?;
        positive("fh_bandwidth_ratio", self.fh_bandwidth_ratio)?;
        if !(self.shadowing_stddev.is_finite() && self.shadowing_stddev >= 0.0) {
            return Err(ConfigError::invalid("shadowing_stddev", "must be nonnegative"));
        }
        if !self.pathloss_intercept.is_finite() || !self.pathloss_slope.is_finite() {
            return Err(ConfigError::invalid(
                "pathloss_slope",
                "pathloss parameters must be finite",
            ));
        }
        if self.pilot_length == 0 {
            return Err(ConfigError::invalid("pilot_length", "must be at least 1"));
        }
        if self.pilot_length >= self.coherence_length {
            return Err(ConfigError::invalid(
                "pilot_length",
                format!("must be below coherence_length ({})", self.coherence_length),
            ));
        }
        if !(self.dl_fraction > 0.0 && self.dl_fraction <= 1.0) {
            return Err(ConfigError::invalid("dl_fraction", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Inputs of the circuit/consumption model. The per-user term is derived
/// from the uplink power and `tau`, see [`crate::radio::PowerModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PowerParams {
    /// Antenna-independent RRU circuit power, watts.
    pub rru_fixed_power: f64,
    /// Circuit power per antenna branch, watts.
    pub per_antenna_power: f64,
    /// Fixed fronthaul consumption, watts.
    pub fronthaul_power: f64,
    pub rru_pa_efficiency: f64,
    pub ue_pa_efficiency: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams {
            rru_fixed_power: 1.8,
            per_antenna_power: 0.2,
            fronthaul_power: 0.0,
            rru_pa_efficiency: 0.3,
            ue_pa_efficiency: 0.3,
        }
    }
}

impl PowerParams {
    pub fn validate(&self) -> Result<(), ConfigError> {
        for (key, x) in [
            ("rru_fixed_power", self.rru_fixed_power),
            ("per_antenna_power", self.per_antenna_power),
            ("fronthaul_power", self.fronthaul_power),
        ] {
            if !(x.is_finite() && x >= 0.0) {
                return Err(ConfigError::invalid(key, "must be nonnegative"));
            }
        }
        if !(self.rru_pa_efficiency > 0.0) {
            return Err(ConfigError::invalid("rru_pa_efficiency", "must be positive"));
        }
        if !(self.ue_pa_efficiency > 0.0 && self.ue_pa_efficiency <= 1.0) {
            return Err(ConfigError::invalid("ue_pa_efficiency", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

const DBM_ALIASES: [(&str, &str); 3] = [
    ("noise_power_dbm", "noise_power"),
    ("uplink_tx_power_dbm", "uplink_tx_power"),
    ("rru_power_budget_dbm", "rru_power_budget"),
];

/// A flat table of `key = value` pairs (TOML syntax, no sections).
#[derive(Debug, Clone, Default)]
pub struct FlatConfig {
    table: toml::Table,
}

impl FlatConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        if let Some((k, _)) = table.iter().find(|(_, v)| v.is_table()) {
            return Err(ConfigError::Parse(format!("sections are not supported (`{k}`)")));
        }
        let mut cfg = FlatConfig { table };
        cfg.normalize()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Override one key. The value is read as a TOML scalar, falling back
    /// to a bare string.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<(), ConfigError> {
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| toml::Value::String(raw.to_string()));
        self.table.insert(key.to_string(), value);
        self.normalize()
    }

    /// Parse a `key=value` override as given on the command line.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse(format!("expected key=value, got `{pair}`")))?;
        self.set(k.trim(), v.trim())
    }

    fn normalize(&mut self) -> Result<(), ConfigError> {
        for (alias, key) in DBM_ALIASES {
            if let Some(v) = self.table.remove(alias) {
                let dbm = v
                    .as_float()
                    .or_else(|| v.as_integer().map(|i| i as f64))
                    .ok_or_else(|| ConfigError::Parse(format!("`{alias}` must be numeric")))?;
                self.table
                    .insert(key.to_string(), toml::Value::Float(dbm_to_watts(dbm)));
            }
        }
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.table.keys().map(String::as_str)
    }

    /// Deserialize the subset of keys that belong to `T`; missing keys take
    /// `T::default()`.
    pub fn extract<T>(&self) -> Result<T, ConfigError>
    where
        T: DeserializeOwned + Serialize + Default,
    {
        let known = known_keys::<T>();
        let mut sub = toml::Table::new();
        let defaults = toml::Table::try_from(T::default()).map_err(|e| ConfigError::Parse(e.to_string()))?;
        for (k, v) in &self.table {
            if known.contains(k) {
                let v = match (&defaults.get(k), v) {
                    (Some(toml::Value::Float(_)), toml::Value::Integer(i)) => toml::Value::Float(*i as f64),
                    _ => v.clone(),
                };
                sub.insert(k.clone(), v);
            }
        }
        sub.try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))
    }

    /// Copy holding only the keys in `keys`.
    pub fn subset(&self, keys: &BTreeSet<String>) -> FlatConfig {
        let table = self
            .table
            .iter()
            .filter(|(k, _)| keys.contains(*k))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        FlatConfig { table }
    }

    /// Fail on any key not in `known`.
    pub fn check_keys(&self, known: &BTreeSet<String>) -> Result<(), ConfigError> {
        match self.table.keys().find(|k| !known.contains(*k)) {
            Some(k) => Err(ConfigError::UnknownKey(k.clone())),
            None => Ok(()),
        }
    }
}

/// Field names of a defaultable config struct.
pub fn known_keys<T: Serialize + Default>() -> BTreeSet<String> {
    toml::Table::try_from(T::default())
        .map(|t| t.keys().cloned().collect())
        .unwrap_or_default()
}
