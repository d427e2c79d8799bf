mod common;

use std::f64::consts::LN_2;

use common::*;
use cran_sca::subproblem::{coefficients, InnerSettings, StepRule, Surrogate};
use cran_sca::*;

fn cases() -> Vec<(String, NetworkConfig, Scenario, RadioModel, FronthaulConstraint)> {
    let mut out = Vec::new();
    for seed in 0..4u64 {
        let pre = if seed % 2 == 0 { Precoder::Mrt } else { Precoder::Zf };
        let (cfg, sc, m) = random_instance(500 + seed, 3, 6, pre);
        let c = 0.4 * full_power_link_load(&m);
        out.push((
            format!("small {seed} per-link"),
            cfg.clone(),
            sc.clone(),
            m.clone(),
            FronthaulConstraint::PerLink { capacity: c },
        ));
        out.push((
            format!("small {seed} sum"),
            cfg,
            sc,
            m,
            FronthaulConstraint::SumCapacity { capacity: 2.0 * c },
        ));
    }
    let (cfg, sc) = seven_cell_drop(11, AssociationRule::SignalPower);
    let m = RadioModel::new(&sc, Precoder::Mrt, &cfg).unwrap();
    out.push((
        "drop per-link".into(),
        cfg.clone(),
        sc.clone(),
        m.clone(),
        FronthaulConstraint::PerLink { capacity: 30.0 },
    ));
    out.push((
        "drop sum".into(),
        cfg,
        sc,
        m,
        FronthaulConstraint::SumCapacity { capacity: 210.0 },
    ));
    out
}

fn assert_monotone_feasible(name: &str, m: &RadioModel, fh: &FronthaulConstraint, rep: &SolveReport) {
    for w in rep.objective_trace.windows(2) {
        assert!(
            w[1] >= w[0] - 1e-9 * w[0].abs(),
            "{name}: trace drops {} -> {}",
            w[0],
            w[1]
        );
    }
    assert!(m.infeasibility(&rep.p_start, fh) <= 1e-6, "{name}: infeasible start");
    for it in &rep.iterations {
        let v = m.infeasibility(&it.p, fh);
        assert!(v <= 1e-6, "{name}: iterate {} violates by {v}", it.iteration);
    }
}

#[test]
fn wsr_trace_monotone_and_feasible() {
    for (name, _, sc, m, fh) in cases() {
        let rep = solve_wsr(&m, &sc, &fh, &SolverConfig::default()).unwrap();
        assert!(rep.converged);
        assert_monotone_feasible(&name, &m, &fh, &rep);
        assert!((rep.throughput - m.sum_rate(&rep.p_star.0)).abs() < 1e-9 * rep.throughput);
    }
}

#[test]
fn ee_trace_monotone_and_feasible() {
    for (name, cfg, sc, m, fh) in cases() {
        let power = PowerModel::new(&cfg, &PowerParams::default());
        let rep = solve_ee(&m, &sc, &power, &fh, &SolverConfig::default()).unwrap();
        assert_monotone_feasible(&name, &m, &fh, &rep);
        let ee = rep.energy_efficiency.unwrap();
        assert!((ee - power.energy_efficiency(&m, &rep.p_star.0)).abs() < 1e-12 * ee);
    }
}

#[test]
fn dinkelbach_parameter_grows_in_magnitude() {
    for (name, cfg, sc, m, fh) in cases() {
        let power = PowerModel::new(&cfg, &PowerParams::default());
        let rep = solve_ee(&m, &sc, &power, &fh, &SolverConfig::default()).unwrap();
        for it in &rep.iterations {
            assert!(it.q_trace.iter().all(|q| *q <= 0.0));
            for w in it.q_trace.windows(2) {
                assert!(
                    w[1].abs() >= w[0].abs() * (1.0 - 1e-9),
                    "{name}: |q| shrinks {} -> {}",
                    w[0],
                    w[1]
                );
            }
        }
    }
}

#[test]
fn dinkelbach_root_certificate() {
    let (cfg, sc, m) = random_instance(42, 2, 4, Precoder::Mrt);
    let power = PowerModel::new(&cfg, &PowerParams::default());
    let fh = FronthaulConstraint::PerLink {
        capacity: 0.5 * full_power_link_load(&m),
    };
    let rep = solve_ee(&m, &sc, &power, &fh, &SolverConfig::default()).unwrap();
    let q = *rep.iterations[0].q_trace.last().unwrap();

    let ctx = BoundContext::new(&m, &rep.p_start).unwrap();
    let weights = vec![1.0; 4];
    let mut sur = Surrogate::new(
        &ctx,
        &m,
        &weights,
        fh.groups(&m.cells),
        m.capacity_nats(fh.capacity().unwrap()),
    );
    sur.set_q_shift(q * power.dynamic_slope());
    let sol = sur.solve(&[0.0, 0.0], &inner(m.power_budget)).unwrap();
    let g = ctx.lower_bounds(&sol.p).sum();
    let root = g + q * power.consumed_power(&sol.p);
    assert!(root.abs() <= 1e-6 * g, "F(q*) = {root}, bound sum {g}");
}

fn inner(budget: f64) -> InnerSettings {
    InnerSettings {
        step_rule: StepRule::Adaptive,
        step0: 1.0,
        max_iters: 20000,
        tol: 1e-12,
        bisection_tol: 1e-13,
        floor: 1e-10 * budget,
    }
}

#[test]
fn weak_duality_holds_at_every_dual_iterate() {
    for (name, _, _, m, fh) in cases() {
        let p_r = baseline_equal_power(&m, &fh, 1e-10 * m.power_budget).0;
        let ctx = BoundContext::new(&m, &p_r).unwrap();
        let weights = vec![1.0; m.num_users()];
        let sur = Surrogate::new(
            &ctx,
            &m,
            &weights,
            fh.groups(&m.cells),
            m.capacity_nats(fh.capacity().unwrap()),
        );
        let lambda0 = vec![0.0; sur.num_constraints()];
        let sol = sur.solve(&lambda0, &inner(m.power_budget)).unwrap();
        // the expansion point is feasible, so its surrogate value bounds every dual value
        let primal = -sur.weighted_lower_bound(&p_r);
        for (t, d) in sol.dual_values.iter().enumerate() {
            assert!(
                *d <= primal + 1e-9 * primal.abs(),
                "{name}: dual {d} above primal {primal} at {t}"
            );
        }
        let best = -sur.weighted_lower_bound(&sol.p);
        assert!(best <= primal + 1e-9 * primal.abs());
    }
}

#[test]
fn sum_capacity_relaxes_per_link() {
    let cfg_tight = SolverConfig {
        epsilon: 1e-5,
        max_sca_iters: 2000,
        ..SolverConfig::default()
    };
    for seed in [3, 4] {
        for pre in [Precoder::Mrt, Precoder::Zf] {
            let (cfg, sc) = seven_cell_drop(seed, AssociationRule::SignalPower);
            let m = RadioModel::new(&sc, pre, &cfg).unwrap();
            let c = if pre == Precoder::Mrt { 30.0 } else { 70.0 };
            let pl = report_of(solve_wsr(
                &m,
                &sc,
                &FronthaulConstraint::PerLink { capacity: c },
                &cfg_tight,
            ));
            let sum = report_of(solve_wsr(
                &m,
                &sc,
                &FronthaulConstraint::SumCapacity { capacity: 7.0 * c },
                &cfg_tight,
            ));
            assert!(
                sum.throughput >= pl.throughput * (1.0 - 1e-3),
                "seed {seed} {pre:?}: sum {} per-link {}",
                sum.throughput,
                pl.throughput
            );
        }
    }
}

#[test]
fn wsr_grows_with_capacity_and_saturates() {
    let (cfg, sc) = seven_cell_drop(5, AssociationRule::SignalPower);
    let m = RadioModel::new(&sc, Precoder::Mrt, &cfg).unwrap();
    let s = SolverConfig {
        epsilon: 1e-5,
        max_sca_iters: 2000,
        ..SolverConfig::default()
    };
    let free = solve_wsr(&m, &sc, &FronthaulConstraint::None, &s).unwrap().throughput;
    let mut last = 0.0;
    for c in [20.0, 30.0, 40.0, 1e4] {
        let t = report_of(solve_wsr(&m, &sc, &FronthaulConstraint::PerLink { capacity: c }, &s)).throughput;
        assert!(t >= last * (1.0 - 1e-3), "C = {c}: {t} after {last}");
        assert!(t <= free * (1.0 + 1e-3));
        last = t;
    }
    assert!((last - free).abs() <= 1e-3 * free, "{last} vs {free}");
}

#[test]
fn expensive_static_power_pushes_to_full_power() {
    let (cfg, sc, m) = random_instance(9, 1, 1, Precoder::Mrt);
    let params = PowerParams {
        rru_fixed_power: 1e9,
        ..PowerParams::default()
    };
    let power = PowerModel::new(&cfg, &params);
    let rep = solve_ee(&m, &sc, &power, &FronthaulConstraint::None, &SolverConfig::default()).unwrap();
    assert!(rep.p_star[0] >= 0.9 * m.power_budget, "{:?}", rep.p_star);
}

#[test]
fn free_radiated_power_reduces_ee_to_wsr() {
    let (cfg, sc, m) = random_instance(10, 3, 6, Precoder::Zf);
    let params = PowerParams {
        rru_pa_efficiency: 1e12,
        ..PowerParams::default()
    };
    let power = PowerModel::new(&cfg, &params);
    let fh = FronthaulConstraint::PerLink {
        capacity: 0.5 * full_power_link_load(&m),
    };
    let s = SolverConfig {
        epsilon: 1e-8,
        max_sca_iters: 5000,
        ..SolverConfig::default()
    };
    let ee = solve_ee(&m, &sc, &power, &fh, &s).unwrap();
    let wsr = solve_wsr(&m, &sc, &fh, &s).unwrap();
    assert!(
        (ee.throughput - wsr.throughput).abs() <= 1e-4 * wsr.throughput,
        "{} vs {}",
        ee.throughput,
        wsr.throughput
    );
}

#[test]
fn ee_update_shift_behaviour() {
    let (cfg, _, m) = random_instance(12, 2, 5, Precoder::Mrt);
    let power = PowerModel::new(&cfg, &PowerParams::default());
    let p_r = random_powers(&mut rng(1), 5, m.power_budget);
    let ctx = BoundContext::new(&m, &p_r).unwrap();
    let (a, b) = coefficients(&ctx, &[1.0; 5], &[0.0; 5]);
    let huge = 1e6 * m.power_budget;
    let at = |q: f64| ee_power_update(&p_r, &a, &b, q, &m, &power, 0.0, 1e-14).unwrap().0;
    let wsr = cran_sca::subproblem::lagrangian_power_update(&p_r, &a, &b, 0.0, &m.cells, m.power_budget, 0.0, 1e-14)
        .unwrap()
        .0;
    assert_eq!(at(0.0), wsr);
    // without binding budgets the powers fall strictly as q decreases
    let mut loose = m.clone();
    loose.power_budget = huge;
    let free = |q: f64| ee_power_update(&p_r, &a, &b, q, &loose, &power, 0.0, 1e-14).unwrap().0;
    let (p0, p1) = (free(-0.1), free(-1.0));
    assert!(p0.iter().zip(&p1).all(|(x, y)| y < x), "{p0:?} {p1:?}");
}

#[test]
fn dinkelbach_update_at_expansion_point_is_minus_ee() {
    let (cfg, _, m) = random_instance(13, 2, 4, Precoder::Zf);
    let power = PowerModel::new(&cfg, &PowerParams::default());
    let p_r = random_powers(&mut rng(2), 4, m.power_budget);
    let ctx = BoundContext::new(&m, &p_r).unwrap();
    let q = dinkelbach_update(&ctx, &power, &p_r);
    let expected = -power.energy_efficiency(&m, &p_r) * LN_2 / m.tau;
    assert!((q - expected).abs() <= 1e-12 * expected.abs(), "{q} vs {expected}");
    let heavy = PowerModel {
        fronthaul_power: 1e15,
        ..power
    };
    let q_heavy = dinkelbach_update(&ctx, &heavy, &p_r);
    assert!(q_heavy < 0.0 && q_heavy > -1e-12);
}

#[test]
fn report_serializes() {
    let (_, sc, m) = random_instance(14, 2, 3, Precoder::Mrt);
    let rep = solve_wsr(
        &m,
        &sc,
        &FronthaulConstraint::SumCapacity { capacity: 5.0 },
        &SolverConfig::default(),
    )
    .unwrap();
    let back: SolveReport = serde_json::from_str(&rep.to_json()).unwrap();
    assert_eq!(back.p_star, rep.p_star);
    let mut csv = Vec::new();
    rep.write_trace_csv(&mut csv).unwrap();
    assert_eq!(
        String::from_utf8(csv).unwrap().lines().count(),
        rep.iterations.len() + 2
    );
}

#[test]
fn bad_inputs_are_rejected() {
    let (_, sc, m) = random_instance(15, 2, 3, Precoder::Mrt);
    let bad = SolverConfig {
        epsilon: -1.0,
        ..SolverConfig::default()
    };
    assert!(solve_wsr(&m, &sc, &FronthaulConstraint::None, &bad).is_err());
    assert!(solve_wsr(
        &m,
        &sc,
        &FronthaulConstraint::PerLink { capacity: 0.0 },
        &SolverConfig::default()
    )
    .is_err());
    let weights = SolverConfig {
        weights: vec![1.0; 2],
        ..SolverConfig::default()
    };
    assert!(solve_wsr(&m, &sc, &FronthaulConstraint::None, &weights).is_err());
}
