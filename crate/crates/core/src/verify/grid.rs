use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::reference::Reference;
use super::Objective;
use crate::radio::{FronthaulConstraint, RadioModel};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct GridOptions {
    /// Points per dimension and pass.
    pub points: usize,
    /// Most refinement passes after the initial scan. Each pass scans a box
    /// centred on the incumbent; the box shrinks fourfold after a pass that
    /// finds nothing better, so the search can travel along a constraint
    /// boundary before it zooms in.
    pub refinements: usize,
    /// Stop refining once the log-spacing falls below this.
    pub resolution: f64,
    /// Smallest power on the grid, watts.
    pub floor: f64,
}

impl GridOptions {
    pub fn for_budget(budget: f64) -> Self {
        GridOptions {
            points: 30,
            refinements: 400,
            resolution: super::tolerances::GRID_LOG_RESOLUTION,
            floor: 1e-10 * budget,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridResult {
    pub p: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub passes: usize,
}

fn objective_value(r: &Reference, objective: &Objective, p: &[f64]) -> f64 {
    match objective {
        Objective::Wsr { weights } => (0..p.len()).map(|k| weights[k] * r.rate_bps(p, k)).sum(),
        Objective::Ee { power } => r.energy_efficiency(power, p),
    }
}

/// Largest feasible point on the ray through `p`. Rates grow along every
/// ray, so the feasible part of the ray is an interval starting at zero.
fn ray_boundary(r: &Reference, fh: &FronthaulConstraint, p: &[f64], budget: f64) -> Vec<f64> {
    let scaled = |t: f64| -> Vec<f64> { p.iter().map(|x| t * x).collect() };
    let t_max = r
        .rru_groups()
        .iter()
        .map(|g| g.iter().map(|&u| p[u]).sum::<f64>())
        .filter(|s| *s > 0.0)
        .map(|s| budget / s)
        .fold(f64::INFINITY, f64::min);
    if r.feasible(&scaled(t_max), fh) {
        return scaled(t_max);
    }
    let (mut lo, mut hi) = (t_max.ln() - 1.0, t_max.ln());
    while !r.feasible(&scaled(lo.exp()), fh) {
        hi = lo;
        lo -= 4.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if r.feasible(&scaled(mid.exp()), fh) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    scaled(lo.exp())
}

/// Per-link limits only: the componentwise largest per-RRU scaling of `p`
/// that keeps every link within capacity. A link's load grows with its own
/// scale and falls with the others', so feasible scalings are closed under
/// componentwise max and iterating each RRU's largest feasible scale from
/// the budgets descends to the greatest one.
fn cell_boundary(r: &Reference, fh: &FronthaulConstraint, p: &[f64], budget: f64) -> Vec<f64> {
    let cells = r.rru_groups();
    let limit = fh.capacity().map(|c| r.model.fh_bandwidth_ratio * c);
    let mut t: Vec<f64> = cells
        .iter()
        .map(|g| budget / g.iter().map(|&u| p[u]).sum::<f64>().max(f64::MIN_POSITIVE))
        .collect();
    let at = |t: &[f64]| -> Vec<f64> {
        let mut q = p.to_vec();
        for (g, s) in cells.iter().zip(t) {
            for &u in g {
                q[u] = s * p[u];
            }
        }
        q
    };
    if let Some(limit) = limit {
        let load = |q: &[f64], l: usize| cells[l].iter().map(|&u| r.rate_bps(q, u)).sum::<f64>();
        for _ in 0..200 {
            let mut change: f64 = 0.0;
            for l in 0..cells.len() {
                if cells[l].is_empty() {
                    continue;
                }
                let mut trial = t.clone();
                if load(&at(&trial), l) <= limit {
                    continue;
                }
                let (mut lo, mut hi) = (t[l].ln() - 1.0, t[l].ln());
                loop {
                    trial[l] = lo.exp();
                    if load(&at(&trial), l) <= limit {
                        break;
                    }
                    hi = lo;
                    lo -= 4.0;
                }
                for _ in 0..50 {
                    let mid = 0.5 * (lo + hi);
                    trial[l] = mid.exp();
                    if load(&at(&trial), l) <= limit {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                change = change.max(t[l].ln() - lo);
                t[l] = lo.exp();
            }
            if change < 1e-12 {
                break;
            }
        }
    }
    // later updates may have eaten into earlier links' margins
    ray_boundary(r, fh, &at(&t), budget)
}

fn product_len(sizes: &[usize]) -> usize {
    sizes.iter().product()
}

fn unflatten(mut flat: usize, axes: &[Vec<f64>], out: &mut [f64]) {
    for d in (0..axes.len()).rev() {
        let n = axes[d].len();
        out[d] = axes[d][flat % n];
        flat /= n;
    }
}

/// Best of the candidates produced by `point` for every grid index,
/// evaluated in parallel and merged in index order so ties resolve
/// identically on every run.
fn best_over(
    count: usize,
    r: &Reference,
    objective: &Objective,
    point: impl Fn(usize) -> Option<Vec<f64>> + Sync,
) -> Option<(Vec<f64>, f64)> {
    let chunk = count.div_ceil(64).max(1);
    let parts: Vec<Option<(Vec<f64>, f64)>> = (0..count.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut best: Option<(Vec<f64>, f64)> = None;
            for i in c * chunk..((c + 1) * chunk).min(count) {
                if let Some(p) = point(i) {
                    let v = objective_value(r, objective, &p);
                    if best.as_ref().is_none_or(|(_, b)| v > *b) {
                        best = Some((p, v));
                    }
                }
            }
            best
        })
        .collect();
    parts.into_iter().flatten().fold(None, |acc, cand| match acc {
        Some((_, b)) if cand.1 <= b => acc,
        _ => Some(cand),
    })
}

/// Feasible points of the box `axes[0] x axes[1] x ...` (log-powers).
fn scan_box(
    r: &Reference,
    objective: &Objective,
    fh: &FronthaulConstraint,
    axes: &[Vec<f64>],
) -> Option<(Vec<f64>, f64)> {
    let sizes: Vec<usize> = axes.iter().map(Vec::len).collect();
    best_over(product_len(&sizes), r, objective, |i| {
        let mut x = vec![0.0; axes.len()];
        unflatten(i, axes, &mut x);
        let p: Vec<f64> = x.iter().map(|v| v.exp()).collect();
        r.feasible(&p, fh).then_some(p)
    })
}

/// Boundary points of the rays whose log-ratios `ln p_d - ln p_0`,
/// `d >= 1`, range over `ratios`.
fn scan_rays(
    r: &Reference,
    objective: &Objective,
    fh: &FronthaulConstraint,
    ratios: &[Vec<f64>],
    budget: f64,
) -> Option<(Vec<f64>, f64)> {
    let sizes: Vec<usize> = ratios.iter().map(Vec::len).collect();
    best_over(product_len(&sizes), r, objective, |i| {
        let mut y = vec![0.0; ratios.len()];
        unflatten(i, ratios, &mut y);
        let p: Vec<f64> = std::iter::once(1.0).chain(y.iter().map(|v| v.exp())).collect();
        Some(ray_boundary(r, fh, &p, budget))
    })
}

/// Per-RRU boundary points of the directions whose log-ratios inside each
/// cell (against the cell's first user) range over `ratios`.
fn scan_cells(
    r: &Reference,
    objective: &Objective,
    fh: &FronthaulConstraint,
    ratios: &[Vec<f64>],
    budget: f64,
) -> Option<(Vec<f64>, f64)> {
    let cells = r.rru_groups();
    let sizes: Vec<usize> = ratios.iter().map(Vec::len).collect();
    best_over(product_len(&sizes), r, objective, |i| {
        let mut y = vec![0.0; ratios.len()];
        unflatten(i, ratios, &mut y);
        let mut p = vec![1.0; r.num_users()];
        let mut next = y.iter();
        for g in &cells {
            for &u in g.iter().skip(1) {
                p[u] = next.next().expect("one ratio per non-leading user").exp();
            }
        }
        Some(cell_boundary(r, fh, &p, budget))
    })
}

/// Log-ratios of every non-leading user of a cell against the cell's first
/// user, cell by cell.
fn cell_ratios(cells: &[Vec<usize>], logs: &[f64]) -> Vec<f64> {
    cells
        .iter()
        .flat_map(|g| g.iter().skip(1).map(move |&u| logs[u] - logs[g[0]]))
        .collect()
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n < 2 || hi <= lo {
        return vec![lo.max(hi.min(lo))];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Exhaustive search over a log-spaced power grid (at most 4 users),
/// followed by refinement passes around the incumbent.
pub fn grid_search_solver(
    model: &RadioModel,
    scenario: &Scenario,
    objective: &Objective,
    fh: &FronthaulConstraint,
    opts: &GridOptions,
) -> Result<GridResult, String> {
    let k = scenario.serving.len();
    if k > 4 {
        return Err(format!("grid search supports at most 4 users, got {k}"));
    }
    let r = Reference::new(model, scenario);
    let (lo, hi) = (opts.floor.ln(), model.power_budget.ln());
    let mut spacing = (hi - lo) / (opts.points - 1) as f64;
    let axes = vec![linspace(lo, hi, opts.points); k];
    let ratios = vec![linspace(lo - hi, hi - lo, opts.points); k - 1];
    let mut evaluations = opts.points.pow(k as u32) + opts.points.pow(k as u32 - 1);

    let per_cell = !matches!(fh, FronthaulConstraint::SumCapacity { .. });
    let cells = r.rru_groups();
    let inner = k - cells.iter().filter(|g| !g.is_empty()).count();
    let cell_axes = vec![linspace(lo - hi, hi - lo, opts.points); inner];
    let mut best = None;
    let found = [
        scan_box(&r, objective, fh, &axes),
        scan_rays(&r, objective, fh, &ratios, model.power_budget),
        per_cell
            .then(|| scan_cells(&r, objective, fh, &cell_axes, model.power_budget))
            .flatten(),
    ];
    for cand in found.into_iter().flatten() {
        if best.as_ref().is_none_or(|(_, b): &(Vec<f64>, f64)| cand.1 > *b) {
            best = Some(cand);
        }
    }
    let (mut best_p, mut best_v) = best.ok_or("no feasible grid point")?;
    let mut passes = 1;
    let mut half = 2.0 * spacing;
    for _ in 0..opts.refinements {
        if spacing < opts.resolution {
            break;
        }
        let logs: Vec<f64> = best_p.iter().map(|x| x.ln()).collect();
        let axes: Vec<Vec<f64>> = logs
            .iter()
            .map(|c| linspace((c - half).max(lo), (c + half).min(hi), opts.points))
            .collect();
        let ratios: Vec<Vec<f64>> = logs[1..]
            .iter()
            .map(|c| {
                let c = c - logs[0];
                linspace(c - half, c + half, opts.points)
            })
            .collect();
        let cell_axes: Vec<Vec<f64>> = cell_ratios(&cells, &logs)
            .into_iter()
            .map(|c| linspace(c - half, c + half, opts.points))
            .collect();
        evaluations += axes.iter().map(Vec::len).product::<usize>() + ratios.iter().map(Vec::len).product::<usize>();
        passes += 1;
        let found = [
            scan_box(&r, objective, fh, &axes),
            scan_rays(&r, objective, fh, &ratios, model.power_budget),
            per_cell
                .then(|| scan_cells(&r, objective, fh, &cell_axes, model.power_budget))
                .flatten(),
        ];
        let mut improved = false;
        for (p, v) in found.into_iter().flatten() {
            if v > best_v {
                best_p = p;
                best_v = v;
                improved = true;
            }
        }
        if !improved {
            half /= 4.0;
            spacing = 2.0 * half / (opts.points - 1) as f64;
        }
    }
    Ok(GridResult {
        p: best_p,
        value: best_v,
        evaluations,
        passes,
    })
}
