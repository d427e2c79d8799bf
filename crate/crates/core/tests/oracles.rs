mod common;

use common::*;
use cran_sca::subproblem::{InnerSettings, StepRule, Surrogate};
use cran_sca::verify::tolerances::*;
use cran_sca::verify::*;
use cran_sca::*;
use rand::Rng;

fn tight(m: &RadioModel, i: u64) -> FronthaulConstraint {
    let c = 0.5 * full_power_link_load(m);
    if i.is_multiple_of(2) {
        FronthaulConstraint::PerLink { capacity: c }
    } else {
        FronthaulConstraint::SumCapacity { capacity: 1.5 * c }
    }
}

fn tight_solver() -> SolverConfig {
    SolverConfig {
        epsilon: 1e-7,
        max_sca_iters: 5000,
        ..SolverConfig::default()
    }
}

fn settings(budget: f64) -> InnerSettings {
    InnerSettings {
        step_rule: StepRule::Adaptive,
        step0: 1.0,
        max_iters: 5000,
        tol: 1e-9,
        bisection_tol: 1e-12,
        floor: 1e-10 * budget,
    }
}

#[test]
fn wsr_matches_grid_search() {
    for i in 0..4 {
        let (_, sc, m) = random_instance(100 + i, 2, 3, Precoder::Mrt);
        let fh = tight(&m, i);
        let rep = solve_wsr(&m, &sc, &fh, &tight_solver()).unwrap();
        let grid = grid_search_solver(
            &m,
            &sc,
            &Objective::Wsr { weights: vec![1.0; 3] },
            &fh,
            &GridOptions::for_budget(m.power_budget),
        )
        .unwrap();
        let rel = (rep.final_objective() - grid.value).abs() / grid.value;
        assert!(
            rel < GRID_OBJECTIVE_REL,
            "instance {i}: sca {} grid {}",
            rep.final_objective(),
            grid.value
        );
    }
}

#[test]
fn ee_matches_grid_search() {
    for i in 0..4 {
        let (cfg, sc, m) = random_instance(200 + i, 2, 3, Precoder::Zf);
        let power = PowerModel::new(&cfg, &PowerParams::default());
        let fh = tight(&m, i);
        let rep = solve_ee(&m, &sc, &power, &fh, &tight_solver()).unwrap();
        let grid = grid_search_solver(
            &m,
            &sc,
            &Objective::Ee { power },
            &fh,
            &GridOptions::for_budget(m.power_budget),
        )
        .unwrap();
        let rel = (rep.final_objective() - grid.value).abs() / grid.value;
        assert!(
            rel < GRID_OBJECTIVE_REL,
            "instance {i}: sca {} grid {}",
            rep.final_objective(),
            grid.value
        );
    }
}

#[test]
fn closed_form_matches_projected_gradient() {
    let mut g = rng(7);
    for i in 0..6 {
        let (cfg, sc, m) = random_instance(300 + i, 2, 3, if i % 2 == 0 { Precoder::Mrt } else { Precoder::Zf });
        let power = PowerModel::new(&cfg, &PowerParams::default());
        let fh = tight(&m, i);
        let p_r = random_powers(&mut g, 3, m.power_budget);
        let ctx = BoundContext::new(&m, &p_r).unwrap();
        let weights = vec![1.0; 3];
        let groups = fh.groups(&m.cells);
        let mut sur = Surrogate::new(
            &ctx,
            &m,
            &weights,
            groups.clone(),
            m.capacity_nats(fh.capacity().unwrap()),
        );
        for (lambda_scale, q) in [(0.0, 0.0), (1.0, 0.0), (0.5, -0.3)] {
            let lambda: Vec<f64> = groups.iter().map(|_| lambda_scale * g.random_range(0.1..2.0)).collect();
            let q_shift = q * power.dynamic_slope();
            sur.set_q_shift(q_shift);
            let (closed, _) = sur.primal_for(&lambda, &settings(m.power_budget)).unwrap();
            let pgd = projected_gradient_reference(
                &m,
                &sc,
                &p_r,
                &weights,
                &fh,
                &lambda,
                q_shift,
                &PgdOptions::for_budget(m.power_budget),
            );
            assert!(pgd.converged, "pgd did not converge on instance {i}");
            let rep = OracleReport::compare("inner", &pgd.p, &closed, 1e-10 * m.power_budget, 1e-5);
            assert!(rep.passed, "instance {i}, lambda {lambda:?}: {}", rep.row());
        }
    }
}

#[test]
fn single_user_full_power_without_fronthaul() {
    let (_, sc, m) = random_instance(1, 1, 1, Precoder::Mrt);
    let rep = solve_wsr(&m, &sc, &FronthaulConstraint::None, &SolverConfig::default()).unwrap();
    assert!((rep.p_star[0] / m.power_budget - 1.0).abs() < 1e-9);
    let grid = grid_search_solver(
        &m,
        &sc,
        &Objective::Wsr { weights: vec![1.0] },
        &FronthaulConstraint::None,
        &GridOptions::for_budget(m.power_budget),
    )
    .unwrap();
    assert!((grid.p[0] / m.power_budget - 1.0).abs() < 1e-6);
}

#[test]
fn grid_search_rejects_large_instances() {
    let (_, sc, m) = random_instance(1, 2, 5, Precoder::Mrt);
    let obj = Objective::Wsr { weights: vec![1.0; 5] };
    assert!(grid_search_solver(&m, &sc, &obj, &FronthaulConstraint::None, &GridOptions::for_budget(1.0)).is_err());
}

#[test]
fn grid_search_symmetric_users() {
    use ndarray::array;
    let sc = Scenario::from_parts(array![[1e-10, 1e-12], [1e-12, 1e-10]], vec![0, 1], vec![0, 0], 1).unwrap();
    let cfg = small_config(2, 2, 1);
    let m = RadioModel::new(&sc, Precoder::Mrt, &cfg).unwrap();
    // both links saturate at the unique optimum
    let fh = FronthaulConstraint::PerLink {
        capacity: 0.5 * full_power_link_load(&m),
    };
    let grid = grid_search_solver(
        &m,
        &sc,
        &Objective::Wsr { weights: vec![1.0; 2] },
        &fh,
        &GridOptions::for_budget(m.power_budget),
    )
    .unwrap();
    assert!((grid.p[0] / grid.p[1] - 1.0).abs() < 1e-4, "{:?}", grid.p);
}

#[test]
fn kkt_residuals_behave() {
    // lone user at full power: budget multiplier equals the marginal rate
    let (_, sc, m) = random_instance(2, 1, 1, Precoder::Mrt);
    let rep = solve_wsr(&m, &sc, &FronthaulConstraint::None, &SolverConfig::default()).unwrap();
    let obj = Objective::Wsr { weights: vec![1.0] };
    let floor = 1e-10 * m.power_budget;
    let r = kkt_residuals(
        &m,
        &sc,
        &FronthaulConstraint::None,
        &rep.p_star,
        &rep.dual.lambda,
        &rep.dual.mu,
        &obj,
        floor,
    );
    assert!(r.max() < 1e-6, "{r:?}");

    let mut moved = rep.p_star.0.clone();
    moved[0] *= 0.5;
    let r2 = kkt_residuals(
        &m,
        &sc,
        &FronthaulConstraint::None,
        &moved,
        &rep.dual.lambda,
        &rep.dual.mu,
        &obj,
        floor,
    );
    assert!(r2.max() > 0.1, "{r2:?}");
}

#[test]
fn grid_incumbent_is_feasible_and_beats_baseline() {
    use cran_sca::verify::reference::Reference;
    for i in 0..4 {
        let (cfg, sc, m) = random_instance(600 + i, 2, 3, Precoder::Zf);
        let power = PowerModel::new(&cfg, &PowerParams::default());
        let fh = tight(&m, i);
        let r = Reference::new(&m, &sc);
        let base = baseline_equal_power(&m, &fh, 0.0);
        let opts = GridOptions::for_budget(m.power_budget);
        let wsr = grid_search_solver(&m, &sc, &Objective::Wsr { weights: vec![1.0; 3] }, &fh, &opts).unwrap();
        assert!(r.feasible(&wsr.p, &fh));
        assert!(wsr.value >= r.sum_rate_bps(&base));
        let ee = grid_search_solver(&m, &sc, &Objective::Ee { power }, &fh, &opts).unwrap();
        assert!(r.feasible(&ee.p, &fh));
        assert!(ee.value >= r.energy_efficiency(&power, &base));
    }
}
