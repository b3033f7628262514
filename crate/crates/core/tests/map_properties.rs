use proptest::prelude::*;
use recmap_core::recoverability::{
    boundary_auc, envelopes, reliability, BoolGrid, IndicatorChannel, RecMap,
};

fn grid_strategy(max_n: usize) -> impl Strategy<Value = BoolGrid> {
    (2..=max_n).prop_flat_map(|n| {
        proptest::collection::vec(any::<bool>(), n * n).prop_map(move |bits| {
            BoolGrid::from_fn(n, |a, b| bits[a * n + b])
        })
    })
}

/// Direct reading of the definitions: per-slice maxima, trapezoids, conjunctive interior
/// test, and an all-pairs nearest boundary point.
fn brute_force(grid: &BoolGrid) -> (f64, f64, Vec<(usize, usize, f64)>) {
    let n = grid.size();
    let top = |a: usize| (0..n).rev().find(|&b| grid.get(a, b));
    let right = |b: usize| (0..n).rev().find(|&a| grid.get(a, b));
    let h = |v: Option<usize>| v.map_or(0.0, |x| x as f64);
    let mut area = 0.0;
    for i in 0..n - 1 {
        area += (h(top(i)) + h(top(i + 1))) / 2.0;
        area += (h(right(i)) + h(right(i + 1))) / 2.0;
    }
    let span = ((n - 1) * (n - 1)) as f64;
    let auc = area / (2.0 * span);
    let e = auc * span;

    let mut boundary = Vec::new();
    for a in 0..n {
        if let Some(b) = top(a) {
            boundary.push((a, b));
        }
    }
    for b in 0..n {
        if let Some(a) = right(b) {
            boundary.push((a, b));
        }
    }
    let mut holes = Vec::new();
    for a in 0..n {
        for b in 0..n {
            let inside = top(a).is_some_and(|t| b <= t) && right(b).is_some_and(|r| a <= r);
            if inside && !grid.get(a, b) {
                let d = boundary
                    .iter()
                    .map(|&(pa, pb)| {
                        let (da, db) = (pa as f64 - a as f64, pb as f64 - b as f64);
                        (da * da + db * db).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min);
                holes.push((a, b, d));
            }
        }
    }
    let f = if holes.is_empty() {
        0.0
    } else {
        (holes.iter().map(|h| h.2 * h.2).sum::<f64>() / e).sqrt()
    };
    (auc, f, holes)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn auc_and_f_match_brute_force(grid in grid_strategy(12)) {
        let env = envelopes(&grid);
        let auc = boundary_auc(&env);
        let (auc_ref, f_ref, holes) = brute_force(&grid);
        prop_assert!((auc - auc_ref).abs() < 1e-12);
        let (f, failures) = reliability(&grid, &env, auc).unwrap();
        prop_assert!((f - f_ref).abs() < 1e-9, "F {} vs oracle {}", f, f_ref);
        prop_assert_eq!(failures.len(), holes.len());
        for (got, want) in failures.iter().zip(&holes) {
            prop_assert_eq!((got.alpha, got.beta), (want.0, want.1));
            prop_assert!((got.distance - want.2).abs() < 1e-9);
        }
    }

    #[test]
    fn auc_is_bounded(grid in grid_strategy(30)) {
        let auc = boundary_auc(&envelopes(&grid));
        prop_assert!((0.0..=1.0).contains(&auc));
    }

    #[test]
    fn auc_monotone_under_single_flips(grid in grid_strategy(20), a in 0usize..20, b in 0usize..20) {
        let n = grid.size();
        let (a, b) = (a % n, b % n);
        let before = boundary_auc(&envelopes(&grid));
        let mut up = grid.clone();
        up.set(a, b, true);
        let mut down = grid.clone();
        down.set(a, b, false);
        prop_assert!(boundary_auc(&envelopes(&up)) >= before);
        prop_assert!(boundary_auc(&envelopes(&down)) <= before);
    }

    #[test]
    fn envelopes_bound_every_recoverable_cell(grid in grid_strategy(25)) {
        let env = envelopes(&grid);
        let n = grid.size();
        for a in 0..n {
            for b in 0..n {
                if grid.get(a, b) {
                    prop_assert!(b as i32 <= env.beta_max[a]);
                    prop_assert!(a as i32 <= env.alpha_max[b]);
                }
            }
            let m = env.beta_max[a];
            prop_assert!(m == -1 || grid.get(a, m as usize));
        }
    }

    #[test]
    fn recmap_rows_round_trip(grid in grid_strategy(15)) {
        let m = RecMap::from_grid(&grid, 0.9, IndicatorChannel::Plate, 0).unwrap();
        prop_assert_eq!(m.bool_grid().unwrap(), grid);
    }
}

#[test]
fn planted_hole_in_square_block() {
    let mut g = BoolGrid::from_fn(12, |a, b| a <= 10 && b <= 10);
    g.set(5, 5, false);
    let env = envelopes(&g);
    let auc = boundary_auc(&env);
    assert!((auc * 121.0 - 105.0).abs() < 1e-9);
    let (f, failures) = reliability(&g, &env, auc).unwrap();
    assert_eq!(failures.len(), 1);
    assert!((failures[0].distance - 5.0).abs() < 1e-12);
    assert!((f - (25.0f64 / 105.0).sqrt()).abs() < 1e-9);
}

#[test]
fn failure_free_maps_score_zero() {
    for g in [
        BoolGrid::new(90, true),
        BoolGrid::from_fn(90, |a, b| a + b < 100),
        BoolGrid::from_fn(90, |a, b| a <= 44 && b <= 44),
    ] {
        let env = envelopes(&g);
        let (f, failures) = reliability(&g, &env, boundary_auc(&env)).unwrap();
        assert_eq!(f, 0.0);
        assert!(failures.is_empty());
    }
}

#[test]
fn rectangle_auc_oracle() {
    let g = BoolGrid::from_fn(90, |a, b| a <= 44 && b <= 44);
    let auc = boundary_auc(&envelopes(&g));
    assert!((auc - 1958.0 / 7921.0).abs() < 1e-9);
}
