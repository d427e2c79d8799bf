use cran_sca::scenario::{allocate_pilots, associate, share_matrix, HexLayout};
use cran_sca::*;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(l: usize, k: usize, pilots: usize, shadowing: f64, seed: u64) -> NetworkConfig {
    NetworkConfig {
        num_rrus: l,
        num_users: k,
        pilot_length: pilots,
        shadowing_stddev: shadowing,
        rng_seed: seed,
        ..NetworkConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn drops_satisfy_invariants(seed in any::<u64>(), l in prop::sample::select(vec![1usize, 3, 4, 7]), k in 1usize..40, pilots in 1usize..8) {
        let cfg = config(l, k, pilots, 8.0, seed);
        let sc = generate_drop(&cfg, AssociationRule::SignalPower).unwrap();
        prop_assert!(sc.validate().is_ok());
        prop_assert!(sc.beta.iter().all(|b| *b > 0.0 && b.is_finite()));
        for u in 0..k {
            let col = sc.beta.column(u);
            prop_assert!(col.iter().all(|b| *b <= col[sc.serving[u]]));
        }
        for i in 0..k {
            for j in 0..k {
                let same = sc.pilots[i] == sc.pilots[j];
                prop_assert_eq!(sc.pilot_share[[i, j]], if same { 1.0 } else { 0.0 });
            }
        }
        for cell in sc.cells() {
            if cell.len() <= pilots {
                let mut used: Vec<usize> = cell.iter().map(|&u| sc.pilots[u]).collect();
                used.sort_unstable();
                used.dedup();
                prop_assert_eq!(used.len(), cell.len());
            }
        }
        prop_assert_eq!(generate_drop(&cfg, AssociationRule::SignalPower).unwrap(), sc);
    }

    #[test]
    fn zero_shadowing_rules_agree_with_nearest_site(seed in any::<u64>(), k in 1usize..40) {
        let cfg = config(7, k, 4, 0.0, seed);
        let by_power = generate_drop(&cfg, AssociationRule::SignalPower).unwrap();
        let by_distance = generate_drop(&cfg, AssociationRule::Distance).unwrap();
        prop_assert_eq!(&by_power.serving, &by_distance.serving);
        let layout = HexLayout::new(7, cfg.cell_radius).unwrap();
        for (u, pos) in by_distance.user_positions.iter().enumerate() {
            let d: Vec<f64> = layout.centers().iter().map(|c| layout.wrap_distance(*pos, *c)).collect();
            let best = d.iter().cloned().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(d[by_distance.serving[u]], best);
        }
    }

    #[test]
    fn wrap_distance_is_short_and_periodic(seed in any::<u64>()) {
        let layout = HexLayout::new(7, 500.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = layout.sample_user(&mut rng);
        let b = layout.sample_user(&mut rng);
        let d = layout.wrap_distance(a, b);
        let plain = ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        prop_assert!(d <= plain + 1e-9);
        prop_assert!((d - layout.wrap_distance(b, a)).abs() < 1e-9);
        // no point is farther than the cluster radius from any site image
        let cluster_radius = 7f64.sqrt() * layout.inter_site_distance();
        prop_assert!(d <= cluster_radius);
        for c in layout.centers() {
            prop_assert!(layout.wrap_distance(*c, *c) < 1e-9);
        }
    }

    #[test]
    fn small_cells_get_distinct_pilots(seed in any::<u64>(), k in 1usize..30, pilots in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let serving: Vec<usize> = (0..k).map(|u| u % 3).collect();
        let p = allocate_pilots(&serving, 3, pilots, &mut rng);
        prop_assert!(p.iter().all(|x| *x < pilots));
        let s = share_matrix(&p);
        for i in 0..k {
            prop_assert_eq!(s[[i, i]], 1.0);
            for j in 0..k {
                prop_assert_eq!(s[[i, j]], s[[j, i]]);
                if i != j && serving[i] == serving[j] && k.div_ceil(3) <= pilots {
                    prop_assert!(p[i] != p[j]);
                }
            }
        }
    }
}

#[test]
fn association_follows_the_rule() {
    use ndarray::array;
    let d = array![[10.0, 50.0], [20.0, 40.0]];
    let beta = array![[1.0, 1.0], [2.0, 0.5]];
    assert_eq!(associate(&d, &beta, AssociationRule::Distance), vec![0, 1]);
    assert_eq!(associate(&d, &beta, AssociationRule::SignalPower), vec![1, 0]);
}
