use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cran_sca::config::known_keys;
use cran_sca::experiments::{write_rows, ConstraintKind};
use cran_sca::verify::{oracle_suite, report_table, SuiteOptions};
use cran_sca::*;
use serde::{Deserialize, Serialize};

#[derive(Parser)]
#[command(
    name = "cran-sca",
    version,
    about = "Fronthaul-aware power allocation for cloud-RAN downlinks"
)]
struct Cli {
    /// Flat TOML file of `key = value` settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set num_users=40`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one network drop and write it as JSON.
    Drop {
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        users: Option<usize>,
        #[arg(long)]
        rrus: Option<usize>,
        /// `signal_power` or `distance`.
        #[arg(long)]
        association: Option<String>,
        /// Output file; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Optimize the powers of one drop.
    Solve {
        /// Scenario JSON written by `drop`; a fresh drop is generated otherwise.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// `mrt` or `zf`.
        #[arg(long)]
        precoder: Option<String>,
        #[arg(long)]
        association: Option<String>,
        /// `per_link` or `sum_capacity`.
        #[arg(long)]
        constraint: Option<String>,
        /// Fronthaul capacity in bps/Hz; `inf` drops the constraint.
        #[arg(long)]
        capacity: Option<String>,
        /// `wsr` or `ee`.
        #[arg(long)]
        objective: Option<String>,
        #[arg(long)]
        epsilon: Option<f64>,
        /// Per-iteration CSV trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Report JSON; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Monte Carlo sweep over fronthaul capacities.
    Sweep {
        #[arg(long)]
        drops: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        constraint: Option<String>,
        /// Comma-separated capacities, e.g. `10,20,40`.
        #[arg(long)]
        capacities: Option<String>,
        #[arg(long, default_value = "results")]
        out_dir: PathBuf,
    },
    /// Run the oracle suite; exits 1 if any check fails.
    Verify {
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Report JSON in addition to the table.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ObjectiveArg {
    Wsr,
    Ee,
}

/// Keys read by `solve` and `verify` on top of the sweep keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
struct RunKeys {
    precoder: Precoder,
    association: AssociationRule,
    constraint: ConstraintKind,
    capacity: f64,
    objective: ObjectiveArg,
    instances: usize,
}

impl Default for RunKeys {
    fn default() -> Self {
        RunKeys {
            precoder: Precoder::Mrt,
            association: AssociationRule::SignalPower,
            constraint: ConstraintKind::PerLink,
            capacity: 30.0,
            objective: ObjectiveArg::Wsr,
            instances: 4,
        }
    }
}

enum Failure {
    Config(String),
    Run(String),
    Oracle,
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        match e {
            SolveError::Bisection { .. } | SolveError::IterationLimit(_) => Failure::Run(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn io_failure(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::Run(format!("{}: {e}", path.display()))
}

fn all_keys() -> BTreeSet<String> {
    let mut keys = SweepSpec::known_keys();
    keys.extend(known_keys::<RunKeys>());
    keys
}

fn load_config(cli: &Cli) -> Result<FlatConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => FlatConfig::load(path)?,
        None => FlatConfig::default(),
    };
    for pair in &cli.overrides {
        cfg.set_pair(pair)?;
    }
    Ok(cfg)
}

fn set<T: ToString>(cfg: &mut FlatConfig, key: &str, value: &Option<T>) -> Result<(), Failure> {
    if let Some(v) = value {
        cfg.set(key, &v.to_string())?;
    }
    Ok(())
}

fn write_output(out: &Option<PathBuf>, text: &str) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(io_failure(path)),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut cfg = load_config(&cli)?;
    match &cli.command {
        Command::Drop {
            seed,
            users,
            rrus,
            association,
            out,
        } => {
            set(&mut cfg, "rng_seed", seed)?;
            set(&mut cfg, "num_users", users)?;
            set(&mut cfg, "num_rrus", rrus)?;
            set(&mut cfg, "association", association)?;
            cfg.check_keys(&all_keys())?;
            let net: NetworkConfig = cfg.extract()?;
            let keys: RunKeys = cfg.extract()?;
            let sc = generate_drop(&net, keys.association)?;
            write_output(out, &sc.to_json())
        }
        Command::Solve {
            scenario,
            seed,
            precoder,
            association,
            constraint,
            capacity,
            objective,
            epsilon,
            trace,
            out,
        } => {
            set(&mut cfg, "rng_seed", seed)?;
            set(&mut cfg, "precoder", precoder)?;
            set(&mut cfg, "association", association)?;
            set(&mut cfg, "constraint", constraint)?;
            set(&mut cfg, "capacity", capacity)?;
            set(&mut cfg, "objective", objective)?;
            set(&mut cfg, "epsilon", epsilon)?;
            cfg.check_keys(&all_keys())?;
            let mut net: NetworkConfig = cfg.extract()?;
            let keys: RunKeys = cfg.extract()?;
            let solver: SolverConfig = cfg.extract()?;
            let params: PowerParams = cfg.extract()?;
            params.validate()?;
            let sc = match scenario {
                Some(path) => {
                    let sc = Scenario::from_json(&fs::read_to_string(path).map_err(io_failure(path))?)?;
                    net.num_rrus = sc.num_rrus();
                    net.num_users = sc.num_users();
                    net.pilot_length = sc.num_pilots;
                    sc
                }
                None => generate_drop(&net, keys.association)?,
            };
            if keys.capacity.is_nan() || keys.capacity <= 0.0 {
                return Err(Failure::Config(format!(
                    "capacity must be positive, got {}",
                    keys.capacity
                )));
            }
            let fh = if keys.capacity.is_finite() {
                keys.constraint.with_capacity(keys.capacity)
            } else {
                FronthaulConstraint::None
            };
            let model = RadioModel::new(&sc, keys.precoder, &net)?;
            let power = PowerModel::new(&net, &params);
            let result = match keys.objective {
                ObjectiveArg::Wsr => cran_sca::wsr::solve_wsr_with_power(&model, &sc, &fh, &solver, Some(&power)),
                ObjectiveArg::Ee => solve_ee(&model, &sc, &power, &fh, &solver),
            };
            let report = match result {
                Ok(r) => r,
                Err(SolveError::IterationLimit(r)) => {
                    eprintln!("warning: iteration limit reached before convergence");
                    *r
                }
                Err(e) => return Err(e.into()),
            };
            if let Some(path) = trace {
                let file = fs::File::create(path).map_err(io_failure(path))?;
                report
                    .write_trace_csv(file)
                    .map_err(|e| Failure::Run(format!("{}: {e}", path.display())))?;
            }
            eprintln!(
                "{} iterations, throughput {:.3} bps/Hz, energy efficiency {:.3} bps/Hz/W",
                report.sca_iterations,
                report.throughput,
                report.energy_efficiency.unwrap_or(f64::NAN)
            );
            write_output(out, &report.to_json())
        }
        Command::Sweep {
            drops,
            seed,
            constraint,
            capacities,
            out_dir,
        } => {
            set(&mut cfg, "num_drops", drops)?;
            set(&mut cfg, "seed", seed)?;
            set(&mut cfg, "constraint", constraint)?;
            if let Some(list) = capacities {
                cfg.set("capacities", &format!("[{list}]"))?;
            }
            cfg.check_keys(&all_keys())?;
            let spec = SweepSpec::from_flat(&cfg.subset(&SweepSpec::known_keys()))?;
            let rows = run_sweep(&spec)?;
            fs::create_dir_all(out_dir).map_err(io_failure(out_dir))?;
            let rows_path = out_dir.join("rows.csv");
            write_rows(&rows, &rows_path).map_err(|e| Failure::Run(format!("{}: {e}", rows_path.display())))?;
            let mut written = vec![rows_path];
            for figure in [Figure::Throughput, Figure::EnergyEfficiency] {
                written.extend(emit_plot_data(&rows, figure, out_dir).map_err(io_failure(out_dir))?);
            }
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            if failed > 0 {
                eprintln!("warning: {failed} of {} runs did not converge", rows.len());
            }
            let mut stdout = std::io::stdout().lock();
            for path in written {
                let _ = writeln!(stdout, "{}", path.display());
            }
            Ok(())
        }
        Command::Verify { instances, seed, out } => {
            set(&mut cfg, "instances", instances)?;
            set(&mut cfg, "seed", seed)?;
            cfg.check_keys(&all_keys())?;
            let net: NetworkConfig = cfg.extract()?;
            let keys: RunKeys = cfg.extract()?;
            let spec = SweepSpec::from_flat(&cfg.subset(&SweepSpec::known_keys()))?;
            let opts = SuiteOptions {
                instances: keys.instances,
                seed: spec.seed,
                association: keys.association,
                capacity: keys.capacity,
            };
            let reports = oracle_suite(&net, &spec.power, &spec.solver, &opts)?;
            print!("{}", report_table(&reports));
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&reports).expect("reports serialize");
                fs::write(path, json).map_err(io_failure(path))?;
            }
            if reports.iter().all(|r| r.passed) {
                Ok(())
            } else {
                Err(Failure::Oracle)
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Oracle) => {
            eprintln!("oracle check failed");
            ExitCode::from(1)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(msg)) => {
            eprintln!("configuration error: {msg}");
            ExitCode::from(2)
        }
    }
}
