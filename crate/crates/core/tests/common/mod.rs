#![allow(dead_code)]

use cran_sca::*;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn small_config(l: usize, k: usize, pilots: usize) -> NetworkConfig {
    NetworkConfig {
        num_rrus: l,
        num_users: k,
        pilot_length: pilots,
        ..NetworkConfig::default()
    }
}

/// Random gains: the serving RRU is 10..30 dB stronger than the others.
pub fn random_scenario(rng: &mut impl Rng, l: usize, k: usize, pilots: usize) -> Scenario {
    let serving: Vec<usize> = (0..k).map(|u| if u < l { u } else { rng.random_range(0..l) }).collect();
    let pilot_map: Vec<usize> = (0..k).map(|_| rng.random_range(0..pilots)).collect();
    let beta = Array2::from_shape_fn((l, k), |(j, u)| {
        let db = if serving[u] == j {
            rng.random_range(-115.0..-95.0)
        } else {
            rng.random_range(-140.0..-115.0)
        };
        10f64.powf(db / 10.0)
    });
    Scenario::from_parts(beta, serving, pilot_map, pilots).unwrap()
}

pub fn random_instance(seed: u64, l: usize, k: usize, precoder: Precoder) -> (NetworkConfig, Scenario, RadioModel) {
    let mut r = rng(seed);
    let pilots = r.random_range(1..=k.min(3));
    let cfg = small_config(l, k, pilots);
    let sc = random_scenario(&mut r, l, k, pilots);
    let m = RadioModel::new(&sc, precoder, &cfg).unwrap();
    (cfg, sc, m)
}

/// Positive powers spread over several decades below the budget.
pub fn random_powers(rng: &mut impl Rng, k: usize, budget: f64) -> Vec<f64> {
    (0..k)
        .map(|_| budget * 10f64.powf(rng.random_range(-6.0..0.0)))
        .collect()
}

pub fn seven_cell_drop(seed: u64, rule: AssociationRule) -> (NetworkConfig, Scenario) {
    let cfg = NetworkConfig {
        rng_seed: seed,
        ..NetworkConfig::default()
    };
    let sc = generate_drop(&cfg, rule).unwrap();
    (cfg, sc)
}

/// Largest per-link load at full equal power, bps/Hz.
pub fn full_power_link_load(m: &RadioModel) -> f64 {
    let p = baseline_equal_power(m, &FronthaulConstraint::None, 0.0).0;
    m.per_link_loads(&p).into_iter().fold(0.0, f64::max)
}

pub fn report_of(r: Result<SolveReport, SolveError>) -> SolveReport {
    match r {
        Ok(r) => r,
        Err(SolveError::IterationLimit(r)) => *r,
        Err(e) => panic!("solve failed: {e}"),
    }
}
