//! Equal-power baseline, Monte Carlo sweeps over drops and fronthaul
//! capacities, and CSV output.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{known_keys, FlatConfig, NetworkConfig, PowerParams};
use crate::ee::solve_ee;
use crate::error::{ConfigError, SolveError};
use crate::radio::{FronthaulConstraint, PowerModel, PowerVector, Precoder, RadioModel};
use crate::scenario::{drop_seed, generate_drop, AssociationRule};
use crate::wsr::{solve_wsr_with_power, SolveReport, SolverConfig};

/// Every RRU splits `rho * P_t` equally over its users, with the largest
/// `rho` in `(0, 1]` that keeps the fronthaul constraints (found by
/// bisection). Powers never go below `floor`.
pub fn baseline_equal_power(model: &RadioModel, fh: &FronthaulConstraint, floor: f64) -> PowerVector {
    let mut share = vec![0.0; model.num_users()];
    for cell in &model.cells {
        for &u in cell {
            share[u] = model.power_budget / cell.len() as f64;
        }
    }
    let at = |rho: f64| -> Vec<f64> { share.iter().map(|s| (rho * s).max(floor)).collect() };
    let ok = |rho: f64| model.infeasibility(&at(rho), fh) <= 0.0;
    if ok(1.0) {
        return PowerVector(at(1.0));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    PowerVector(at(lo))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// SCA weighted sum-rate maximization (unit weights).
    Sca,
    /// SCA energy-efficiency maximization.
    ScaEe,
    Baseline,
    /// SCA sum-rate maximization without fronthaul constraints.
    Unconstrained,
    /// SCA energy-efficiency maximization without fronthaul constraints.
    UnconstrainedEe,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sca => "sca",
            Self::ScaEe => "sca_ee",
            Self::Baseline => "baseline",
            Self::Unconstrained => "unconstrained",
            Self::UnconstrainedEe => "unconstrained_ee",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    PerLink,
    SumCapacity,
}

impl ConstraintKind {
    pub fn with_capacity(&self, capacity: f64) -> FronthaulConstraint {
        if capacity.is_infinite() {
            return FronthaulConstraint::None;
        }
        match self {
            Self::PerLink => FronthaulConstraint::PerLink { capacity },
            Self::SumCapacity => FronthaulConstraint::SumCapacity { capacity },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PerLink => "per_link",
            Self::SumCapacity => "sum_capacity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub precoders: Vec<Precoder>,
    pub associations: Vec<AssociationRule>,
    pub constraint: ConstraintKind,
    /// Fronthaul capacities in bps/Hz, strictly increasing. `inf` means no
    /// constraint.
    pub capacities: Vec<f64>,
    pub schemes: Vec<Scheme>,
    pub num_drops: usize,
    pub seed: u64,
    pub network: NetworkConfig,
    pub power: PowerParams,
    pub solver: SolverConfig,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec {
            precoders: vec![Precoder::Mrt, Precoder::Zf],
            associations: vec![AssociationRule::SignalPower, AssociationRule::Distance],
            constraint: ConstraintKind::PerLink,
            capacities: vec![10.0, 20.0, 30.0, 40.0, 60.0, 80.0],
            schemes: vec![Scheme::Sca, Scheme::Baseline, Scheme::Unconstrained],
            num_drops: 20,
            seed: 1,
            network: NetworkConfig::default(),
            power: PowerParams::default(),
            solver: SolverConfig::default(),
        }
    }
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_drops == 0 {
            return Err(ConfigError::invalid("num_drops", "must be at least 1"));
        }
        if self.capacities.is_empty() || self.capacities.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(ConfigError::invalid(
                "capacities",
                "must be non-empty and strictly increasing",
            ));
        }
        if self.capacities.iter().any(|c| !(*c > 0.0)) {
            return Err(ConfigError::invalid("capacities", "must be positive"));
        }
        if self.precoders.is_empty() || self.associations.is_empty() || self.schemes.is_empty() {
            return Err(ConfigError::invalid(
                "schemes",
                "precoders, associations and schemes must be non-empty",
            ));
        }
        self.network.validate()?;
        self.power.validate()?;
        if self.precoders.contains(&Precoder::Zf) && self.network.antennas_per_rru <= self.network.pilot_length {
            return Err(ConfigError::invalid(
                "antennas_per_rru",
                "zero-forcing needs more antennas than pilots",
            ));
        }
        self.solver
            .validate(self.network.num_users)
            .map_err(|e| ConfigError::invalid("solver", e.to_string()))
    }
}

/// Sweep keys of a flat config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
struct SweepKeys {
    precoders: Vec<Precoder>,
    associations: Vec<AssociationRule>,
    constraint: ConstraintKind,
    capacities: Vec<f64>,
    schemes: Vec<Scheme>,
    num_drops: usize,
    seed: u64,
}

impl Default for SweepKeys {
    fn default() -> Self {
        let s = SweepSpec::default();
        SweepKeys {
            precoders: s.precoders,
            associations: s.associations,
            constraint: s.constraint,
            capacities: s.capacities,
            schemes: s.schemes,
            num_drops: s.num_drops,
            seed: s.seed,
        }
    }
}

impl SweepSpec {
    /// Keys accepted by [`SweepSpec::from_flat`].
    pub fn known_keys() -> BTreeSet<String> {
        let mut keys = known_keys::<SweepKeys>();
        keys.extend(known_keys::<NetworkConfig>());
        keys.extend(known_keys::<PowerParams>());
        keys.extend(known_keys::<SolverConfig>());
        keys.extend(["noise_power_dbm", "uplink_tx_power_dbm", "rru_power_budget_dbm"].map(String::from));
        keys
    }

    /// Build a spec from one flat table holding sweep, network, power and
    /// solver keys. Unknown keys are rejected.
    pub fn from_flat(cfg: &FlatConfig) -> Result<Self, ConfigError> {
        cfg.check_keys(&Self::known_keys())?;
        let k: SweepKeys = cfg.extract()?;
        let spec = SweepSpec {
            precoders: k.precoders,
            associations: k.associations,
            constraint: k.constraint,
            capacities: k.capacities,
            schemes: k.schemes,
            num_drops: k.num_drops,
            seed: k.seed,
            network: cfg.extract()?,
            power: cfg.extract()?,
            solver: cfg.extract()?,
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub drop: usize,
    pub scheme: Scheme,
    pub precoder: Precoder,
    pub association: AssociationRule,
    pub constraint: ConstraintKind,
    pub capacity: f64,
    /// bps/Hz.
    pub throughput: f64,
    /// bps/Hz/W.
    pub energy_efficiency: f64,
    pub sca_iters: usize,
    pub db_iters: usize,
    /// Seconds.
    pub wall_time: f64,
    pub kkt: f64,
    pub error: Option<String>,
}

fn row_from(
    report: Result<SolveReport, SolveError>,
    power: &PowerModel,
    model: &RadioModel,
    base: ResultRow,
) -> ResultRow {
    let (report, error) = match report {
        Ok(r) => (Some(r), None),
        Err(SolveError::IterationLimit(r)) => (Some(*r), Some("iteration limit".to_string())),
        Err(e) => (None, Some(e.to_string())),
    };
    match report {
        Some(r) => ResultRow {
            throughput: r.throughput,
            energy_efficiency: power.energy_efficiency(model, &r.p_star),
            sca_iters: r.sca_iterations,
            db_iters: r.db_iterations,
            kkt: r.kkt.max(),
            error,
            ..base
        },
        None => ResultRow { error, ..base },
    }
}

fn run_drop(spec: &SweepSpec, drop: usize) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    let net = NetworkConfig {
        rng_seed: drop_seed(spec.seed, drop as u64),
        ..spec.network.clone()
    };
    let power = PowerModel::new(&net, &spec.power);
    for &association in &spec.associations {
        let scenario = match generate_drop(&net, association) {
            Ok(s) => s,
            Err(e) => {
                log_failure(&mut rows, spec, drop, association, e.to_string());
                continue;
            }
        };
        for &precoder in &spec.precoders {
            let model = match RadioModel::new(&scenario, precoder, &net) {
                Ok(m) => m,
                Err(e) => {
                    log_failure(&mut rows, spec, drop, association, e.to_string());
                    continue;
                }
            };
            let blank = |scheme, capacity| ResultRow {
                drop,
                scheme,
                precoder,
                association,
                constraint: spec.constraint,
                capacity,
                throughput: f64::NAN,
                energy_efficiency: f64::NAN,
                sca_iters: 0,
                db_iters: 0,
                wall_time: 0.0,
                kkt: f64::NAN,
                error: None,
            };
            let timed = |scheme, capacity, f: &dyn Fn() -> Result<SolveReport, SolveError>| {
                let start = Instant::now();
                let res = f();
                let mut row = row_from(res, &power, &model, blank(scheme, capacity));
                row.wall_time = start.elapsed().as_secs_f64();
                row
            };
            // reference curves do not depend on the capacity
            let mut unconstrained = Vec::new();
            for scheme in [Scheme::Unconstrained, Scheme::UnconstrainedEe] {
                if spec.schemes.contains(&scheme) {
                    let fh = FronthaulConstraint::None;
                    let row = timed(scheme, f64::INFINITY, &|| match scheme {
                        Scheme::Unconstrained => {
                            solve_wsr_with_power(&model, &scenario, &fh, &spec.solver, Some(&power))
                        }
                        _ => solve_ee(&model, &scenario, &power, &fh, &spec.solver),
                    });
                    unconstrained.push(row);
                }
            }
            for &capacity in &spec.capacities {
                let fh = spec.constraint.with_capacity(capacity);
                for &scheme in &spec.schemes {
                    let row = match scheme {
                        Scheme::Sca => timed(scheme, capacity, &|| {
                            solve_wsr_with_power(&model, &scenario, &fh, &spec.solver, Some(&power))
                        }),
                        Scheme::ScaEe => timed(scheme, capacity, &|| {
                            solve_ee(&model, &scenario, &power, &fh, &spec.solver)
                        }),
                        Scheme::Baseline => {
                            let start = Instant::now();
                            let p = baseline_equal_power(&model, &fh, spec.solver.floor(model.power_budget));
                            ResultRow {
                                throughput: model.sum_rate(&p),
                                energy_efficiency: power.energy_efficiency(&model, &p),
                                wall_time: start.elapsed().as_secs_f64(),
                                ..blank(scheme, capacity)
                            }
                        }
                        Scheme::Unconstrained | Scheme::UnconstrainedEe => {
                            let found = unconstrained.iter().find(|r| r.scheme == scheme).expect("solved above");
                            ResultRow {
                                capacity,
                                ..found.clone()
                            }
                        }
                    };
                    rows.push(row);
                }
            }
        }
    }
    rows
}

fn log_failure(rows: &mut Vec<ResultRow>, spec: &SweepSpec, drop: usize, association: AssociationRule, msg: String) {
    for &precoder in &spec.precoders {
        for &capacity in &spec.capacities {
            for &scheme in &spec.schemes {
                rows.push(ResultRow {
                    drop,
                    scheme,
                    precoder,
                    association,
                    constraint: spec.constraint,
                    capacity,
                    throughput: f64::NAN,
                    energy_efficiency: f64::NAN,
                    sca_iters: 0,
                    db_iters: 0,
                    wall_time: 0.0,
                    kkt: f64::NAN,
                    error: Some(msg.clone()),
                });
            }
        }
    }
}

/// One row per drop, association, precoder, capacity and scheme, in that
/// nesting order. Drops run in parallel.
pub fn run_sweep(spec: &SweepSpec) -> Result<Vec<ResultRow>, ConfigError> {
    spec.validate()?;
    let per_drop: Vec<Vec<ResultRow>> = (0..spec.num_drops).into_par_iter().map(|d| run_drop(spec, d)).collect();
    Ok(per_drop.into_iter().flatten().collect())
}

/// Percentile with linear interpolation between order statistics.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Figure {
    Throughput,
    EnergyEfficiency,
}

impl Figure {
    fn value(&self, r: &ResultRow) -> f64 {
        match self {
            Self::Throughput => r.throughput,
            Self::EnergyEfficiency => r.energy_efficiency,
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Self::Throughput => "throughput",
            Self::EnergyEfficiency => "energy_efficiency",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub precoder: Precoder,
    pub constraint: ConstraintKind,
    pub capacity: f64,
    pub scheme: Scheme,
    pub association: AssociationRule,
    pub mean: f64,
    pub p5: f64,
    pub p95: f64,
    pub count: usize,
}

/// Mean and 5/95 percentiles over drops of `figure`, skipping rows without
/// a value. Sorted by precoder, constraint, capacity, scheme, association.
pub fn aggregate(rows: &[ResultRow], figure: Figure) -> Vec<AggregateRow> {
    type Key = (Precoder, ConstraintKind, u64, Scheme, AssociationRule);
    let mut groups: BTreeMap<Key, (f64, Vec<f64>)> = BTreeMap::new();
    for r in rows {
        let v = figure.value(r);
        let key = (r.precoder, r.constraint, r.capacity.to_bits(), r.scheme, r.association);
        let entry = groups.entry(key).or_insert((r.capacity, Vec::new()));
        if v.is_finite() {
            entry.1.push(v);
        }
    }
    let mut out: Vec<AggregateRow> = groups
        .into_iter()
        .map(
            |((precoder, constraint, _, scheme, association), (capacity, mut vals))| {
                vals.sort_by(f64::total_cmp);
                let mean = if vals.is_empty() {
                    f64::NAN
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                };
                AggregateRow {
                    precoder,
                    constraint,
                    capacity,
                    scheme,
                    association,
                    mean,
                    p5: percentile(&vals, 5.0),
                    p95: percentile(&vals, 95.0),
                    count: vals.len(),
                }
            },
        )
        .collect();
    out.sort_by(|a, b| {
        (a.precoder, a.constraint)
            .cmp(&(b.precoder, b.constraint))
            .then(a.capacity.total_cmp(&b.capacity))
            .then((a.scheme, a.association).cmp(&(b.scheme, b.association)))
    });
    out
}

/// Write one CSV per (precoder, constraint) pair present in `rows`, named
/// `<figure>_<precoder>_<constraint>.csv`. Returns the paths written. With
/// no rows a single header-only file is written.
pub fn emit_plot_data(rows: &[ResultRow], figure: Figure, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let agg = aggregate(rows, figure);
    let mut files: BTreeMap<(Precoder, ConstraintKind), Vec<&AggregateRow>> = BTreeMap::new();
    for a in &agg {
        files.entry((a.precoder, a.constraint)).or_default().push(a);
    }
    let header = ["capacity", "scheme", "association", "mean", "p5", "p95"];
    let mut written = Vec::new();
    if files.is_empty() {
        let path = dir.join(format!("{}.csv", figure.name()));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        w.flush()?;
        written.push(path);
        return Ok(written);
    }
    for ((precoder, constraint), list) in files {
        let path = dir.join(format!("{}_{}_{}.csv", figure.name(), precoder, constraint.name()));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(header)?;
        for a in list {
            w.write_record([
                a.capacity.to_string(),
                a.scheme.name().to_string(),
                a.association.to_string(),
                a.mean.to_string(),
                a.p5.to_string(),
                a.p95.to_string(),
            ])?;
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Every row as CSV.
pub fn write_rows(rows: &[ResultRow], path: &Path) -> csv::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "drop",
        "scheme",
        "precoder",
        "association",
        "constraint",
        "capacity",
        "throughput",
        "energy_efficiency",
        "sca_iters",
        "db_iters",
        "wall_time",
        "kkt",
        "error",
    ])?;
    for r in rows {
        w.write_record([
            r.drop.to_string(),
            r.scheme.name().to_string(),
            r.precoder.to_string(),
            r.association.to_string(),
            r.constraint.name().to_string(),
            r.capacity.to_string(),
            r.throughput.to_string(),
            r.energy_efficiency.to_string(),
            r.sca_iters.to_string(),
            r.db_iters.to_string(),
            format!("{:.6}", r.wall_time),
            r.kkt.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
