//! Network drops: hexagonal RRU layout with wrap-around, user placement,
//! large-scale fading, association and pilot allocation.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::config::NetworkConfig;
use crate::error::{ConfigError, ModelError};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssociationRule {
    /// Nearest RRU in wrap-around distance.
    Distance,
    /// Strongest received power with every RRU at full power.
    SignalPower,
}

impl std::str::FromStr for AssociationRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "distance" => Ok(Self::Distance),
            "signal_power" | "signal" => Ok(Self::SignalPower),
            other => Err(format!("unknown association rule `{other}`")),
        }
    }
}

impl std::fmt::Display for AssociationRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Distance => "distance",
            Self::SignalPower => "signal_power",
        })
    }
}

/// `(i, j)` with `i*i + i*j + j*j == cells`, if `cells` is a hexagonal
/// cluster size.
pub fn hex_cluster_shape(cells: usize) -> Option<(i64, i64)> {
    let n = cells as i64;
    for i in 1..=n {
        for j in 0..=i {
            if i * i + i * j + j * j == n {
                return Some((i, j));
            }
        }
    }
    None
}

fn rotate60(p: Point, times: usize) -> Point {
    let a = std::f64::consts::FRAC_PI_3 * times as f64;
    let (s, c) = a.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1]]
}

fn norm(p: Point) -> f64 {
    p[0].hypot(p[1])
}

/// Hexagonal cluster of `cells` sites that tiles the plane by translation.
#[derive(Debug, Clone)]
pub struct HexLayout {
    cell_radius: f64,
    centers: Vec<Point>,
    /// Zero plus the six nearest cluster translations.
    shifts: [Point; 7],
}

impl HexLayout {
    pub fn new(cells: usize, cell_radius: f64) -> Option<Self> {
        let (i, j) = hex_cluster_shape(cells)?;
        let isd = 3f64.sqrt() * cell_radius;
        let a1 = [isd, 0.0];
        let a2 = [0.5 * isd, 0.5 * 3f64.sqrt() * isd];
        let comb = |m: f64, n: f64| [m * a1[0] + n * a2[0], m * a1[1] + n * a2[1]];
        let t1 = comb(i as f64, j as f64);
        let t2 = rotate60(t1, 1);
        let mut shifts = [[0.0; 2]; 7];
        for (m, s) in shifts.iter_mut().skip(1).enumerate() {
            *s = rotate60(t1, m);
        }

        // Lattice points reduced modulo the cluster translations.
        let det = t1[0] * t2[1] - t1[1] * t2[0];
        let span = cells as i64 + 1;
        let mut centers: Vec<Point> = Vec::with_capacity(cells);
        for m in -span..=span {
            for n in -span..=span {
                let x = comb(m as f64, n as f64);
                let s = (x[0] * t2[1] - x[1] * t2[0]) / det;
                let t = (t1[0] * x[1] - t1[1] * x[0]) / det;
                let (s, t) = (s - (s + 1e-9).floor(), t - (t + 1e-9).floor());
                let mut best = [s * t1[0] + t * t2[0], s * t1[1] + t * t2[1]];
                for a in -1..=1 {
                    for b in -1..=1 {
                        let (a, b) = (f64::from(a), f64::from(b));
                        let cand = [(s + a) * t1[0] + (t + b) * t2[0], (s + a) * t1[1] + (t + b) * t2[1]];
                        if norm(cand) < norm(best) - 1e-9 * isd {
                            best = cand;
                        }
                    }
                }
                if !centers
                    .iter()
                    .any(|c| norm([c[0] - best[0], c[1] - best[1]]) < 1e-6 * isd)
                {
                    centers.push(best);
                }
            }
        }
        centers.sort_by(|p, q| {
            let key = |p: &Point| {
                (
                    (norm(*p) / isd * 1e6).round(),
                    p[1].atan2(p[0]).rem_euclid(std::f64::consts::TAU),
                )
            };
            key(p).partial_cmp(&key(q)).unwrap()
        });
        debug_assert_eq!(centers.len(), cells);
        Some(HexLayout {
            cell_radius,
            centers,
            shifts,
        })
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn inter_site_distance(&self) -> f64 {
        3f64.sqrt() * self.cell_radius
    }

    /// Distance to the nearest periodic image of `site`.
    pub fn wrap_distance(&self, user: Point, site: Point) -> f64 {
        self.shifts
            .iter()
            .map(|s| norm([user[0] - site[0] - s[0], user[1] - site[1] - s[1]]))
            .fold(f64::INFINITY, f64::min)
    }

    /// Whether `p` lies in the hexagon of circumradius `cell_radius`
    /// centered at the origin (flat sides facing the neighbours).
    pub fn in_hexagon(&self, p: Point) -> bool {
        let apothem = 0.5 * self.inter_site_distance();
        (0..3).all(|m| {
            let n = rotate60([1.0, 0.0], m);
            (p[0] * n[0] + p[1] * n[1]).abs() <= apothem
        })
    }

    /// Uniform point in the union of all cells.
    pub fn sample_user<R: Rng>(&self, rng: &mut R) -> Point {
        let cell = rng.random_range(0..self.centers.len());
        let apothem = 0.5 * self.inter_site_distance();
        loop {
            let p = [
                rng.random_range(-self.cell_radius..self.cell_radius),
                rng.random_range(-apothem..apothem),
            ];
            if self.in_hexagon(p) {
                let c = self.centers[cell];
                return [c[0] + p[0], c[1] + p[1]];
            }
        }
    }
}

/// Pathloss in dB at `distance_m` meters.
pub fn pathloss_db(cfg: &NetworkConfig, distance_m: f64) -> f64 {
    let d_km = distance_m.max(cfg.min_distance) / 1000.0;
    cfg.pathloss_intercept + cfg.pathloss_slope * d_km.log10()
}

/// One network drop. Indices are zero-based throughout; `pilots[k]` lies
/// in `0..num_pilots`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub rru_positions: Vec<Point>,
    pub user_positions: Vec<Point>,
    /// L x K large-scale fading, linear.
    pub beta: Array2<f64>,
    pub serving: Vec<usize>,
    pub pilots: Vec<usize>,
    pub num_pilots: usize,
    /// K x K, 1.0 where two users share a pilot.
    pub pilot_share: Array2<f64>,
}

impl Scenario {
    /// Assemble a scenario from explicit gains, checking all invariants.
    /// Positions are left empty.
    pub fn from_parts(
        beta: Array2<f64>,
        serving: Vec<usize>,
        pilots: Vec<usize>,
        num_pilots: usize,
    ) -> Result<Self, ModelError> {
        let pilot_share = share_matrix(&pilots);
        let s = Scenario {
            rru_positions: Vec::new(),
            user_positions: Vec::new(),
            beta,
            serving,
            pilots,
            num_pilots,
            pilot_share,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn num_rrus(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_users(&self) -> usize {
        self.beta.ncols()
    }

    /// Users served by each RRU, in index order.
    pub fn cells(&self) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.num_rrus()];
        for (k, &l) in self.serving.iter().enumerate() {
            cells[l].push(k);
        }
        cells
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let (l, k) = self.beta.dim();
        let bad = |msg: String| Err(ModelError::Scenario(msg));
        if l == 0 || k == 0 {
            return bad("empty network".into());
        }
        if self.beta.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return bad("large-scale gains must be positive and finite".into());
        }
        if self.serving.len() != k || self.pilots.len() != k {
            return bad(format!("expected {k} associations and pilots"));
        }
        if let Some(u) = self.serving.iter().position(|&j| j >= l) {
            return bad(format!("user {u} served by a nonexistent RRU"));
        }
        if let Some(u) = self.pilots.iter().position(|&b| b >= self.num_pilots) {
            return bad(format!("user {u} has pilot out of range"));
        }
        if self.pilot_share != share_matrix(&self.pilots) {
            return bad("pilot share matrix disagrees with pilot map".into());
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, ModelError> {
        let sc: Scenario = serde_json::from_str(s).map_err(|e| ModelError::Scenario(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }
}

pub fn share_matrix(pilots: &[usize]) -> Array2<f64> {
    let k = pilots.len();
    Array2::from_shape_fn((k, k), |(i, j)| if pilots[i] == pilots[j] { 1.0 } else { 0.0 })
}

/// Index of the best candidate; ties go to the lowest index.
fn arg_best(values: impl Iterator<Item = f64>, better: impl Fn(f64, f64) -> bool) -> usize {
    let mut best = (0, f64::NAN);
    for (j, x) in values.enumerate() {
        if j == 0 || better(x, best.1) {
            best = (j, x);
        }
    }
    best.0
}

/// Serving RRU of every user. `distances` is L x K wrap-around distance.
pub fn associate(distances: &Array2<f64>, beta: &Array2<f64>, rule: AssociationRule) -> Vec<usize> {
    (0..beta.ncols())
        .map(|k| match rule {
            AssociationRule::Distance => arg_best(distances.column(k).iter().copied(), |a, b| a < b),
            AssociationRule::SignalPower => arg_best(beta.column(k).iter().copied(), |a, b| a > b),
        })
        .collect()
}

/// Random pilot allocation, independently per cell: distinct pilots while
/// a cell has at most `num_pilots` users, uniform reuse for the overflow.
pub fn allocate_pilots<R: Rng>(serving: &[usize], num_rrus: usize, num_pilots: usize, rng: &mut R) -> Vec<usize> {
    let mut pilots = vec![0; serving.len()];
    for l in 0..num_rrus {
        let members: Vec<usize> = (0..serving.len()).filter(|&k| serving[k] == l).collect();
        let distinct = members.len().min(num_pilots);
        let perm = sample(rng, num_pilots, distinct);
        for (slot, &k) in members.iter().enumerate() {
            pilots[k] = if slot < distinct {
                perm.index(slot)
            } else {
                rng.random_range(0..num_pilots)
            };
        }
    }
    pilots
}

/// Draw one network drop. Positions and shadowing are drawn before the
/// association-dependent pilot allocation, so two rules with the same seed
/// see the same geometry and gains.
pub fn generate_drop(cfg: &NetworkConfig, rule: AssociationRule) -> Result<Scenario, ConfigError> {
    cfg.validate()?;
    let layout = HexLayout::new(cfg.num_rrus, cfg.cell_radius)
        .ok_or_else(|| ConfigError::invalid("num_rrus", "not a hexagonal cluster size"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let users: Vec<Point> = (0..cfg.num_users).map(|_| layout.sample_user(&mut rng)).collect();
    let (l, k) = (cfg.num_rrus, cfg.num_users);
    let distances = Array2::from_shape_fn((l, k), |(j, u)| layout.wrap_distance(users[u], layout.centers()[j]));
    let shadow = Normal::new(0.0, cfg.shadowing_stddev).expect("validated stddev");
    let mut beta = Array2::zeros((l, k));
    for j in 0..l {
        for u in 0..k {
            let x = if cfg.shadowing_stddev > 0.0 {
                shadow.sample(&mut rng)
            } else {
                0.0
            };
            beta[[j, u]] = 10f64.powf(-(pathloss_db(cfg, distances[[j, u]]) + x) / 10.0);
        }
    }
    let serving = associate(&distances, &beta, rule);
    let pilots = allocate_pilots(&serving, l, cfg.pilot_length, &mut rng);
    let pilot_share = share_matrix(&pilots);
    Ok(Scenario {
        rru_positions: layout.centers().to_vec(),
        user_positions: users,
        beta,
        serving,
        pilots,
        num_pilots: cfg.pilot_length,
        pilot_share,
    })
}

/// Seed for drop `drop` of a sweep seeded with `seed` (splitmix64 mix).
pub fn drop_seed(seed: u64, drop: u64) -> u64 {
    let mut z = seed ^ drop.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
