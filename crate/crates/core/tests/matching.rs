use proptest::prelude::*;
use pursuit_core::metrics::{
    assignment_cost, control_difference, hungarian, match_trajectories, mte, TrajPoint,
};

fn brute_force(cost: &[Vec<f64>]) -> f64 {
    fn go(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                go(cost, row + 1, used, acc + cost[row][j], best);
                used[j] = false;
            }
        }
    }
    // Rows ≤ columns; transpose otherwise.
    let (rows, cols) = (cost.len(), cost[0].len());
    let c: Vec<Vec<f64>> = if rows <= cols {
        cost.to_vec()
    } else {
        (0..cols).map(|j| (0..rows).map(|i| cost[i][j]).collect()).collect()
    };
    let mut best = f64::INFINITY;
    go(&c, 0, &mut vec![false; c[0].len()], 0.0, &mut best);
    best
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    // Integer-valued entries keep sums exact, so equality can be exact.
    prop::collection::vec(prop::collection::vec((0u32..100).prop_map(f64::from), cols), rows)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn square_matches_brute_force(m in (2usize..=6).prop_flat_map(|n| matrix(n, n))) {
        let a = hungarian(&m);
        prop_assert!(a.iter().all(Option::is_some));
        prop_assert_eq!(assignment_cost(&m, &a), brute_force(&m));
    }

    #[test]
    fn rectangular_matches_brute_force(
        m in (1usize..=5, 1usize..=5).prop_flat_map(|(r, c)| matrix(r, c))
    ) {
        let a = hungarian(&m);
        let assigned = a.iter().filter(|x| x.is_some()).count();
        prop_assert_eq!(assigned, m.len().min(m[0].len()));
        let mut cols: Vec<usize> = a.iter().flatten().copied().collect();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(cols.len(), assigned);
        prop_assert_eq!(assignment_cost(&m, &a), brute_force(&m));
    }

    #[test]
    fn uniform_shift_moves_every_translation(
        pts in prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), 2..30),
        dx in -0.3..0.3f64,
        dy in -0.3..0.3f64,
    ) {
        // Points at least 1 m apart so the shifted copy keeps the diagonal
        // assignment optimal.
        let mut kept: Vec<(f64, f64)> = Vec::new();
        for p in pts {
            if kept.iter().all(|q| (p.0 - q.0).hypot(p.1 - q.1) > 1.0) {
                kept.push(p);
            }
        }
        let reference: Vec<TrajPoint> = kept
            .iter()
            .map(|&(x, y)| TrajPoint { x, y, throttle: 0.5, steer: 0.0 })
            .collect();
        let ego: Vec<TrajPoint> = reference
            .iter()
            .map(|p| TrajPoint { x: p.x + dx, y: p.y + dy, ..*p })
            .collect();
        let m = match_trajectories(&ego, &reference, 500).unwrap();
        for pair in &m.pairs {
            prop_assert_eq!(pair.ego_index, pair.ref_index);
            prop_assert!((pair.translation.0 - dx).abs() < 1e-9);
            prop_assert!((pair.translation.1 - dy).abs() < 1e-9);
        }
        prop_assert!((mte(&m).unwrap() - (dx * dx + dy * dy)).abs() < 1e-9);
        prop_assert!(control_difference(&m).unwrap().abs() < 1e-12);
    }
}

#[test]
fn empty_matrix_gives_empty_assignment() {
    assert!(hungarian(&[]).is_empty());
    assert_eq!(hungarian(&[vec![]]), vec![None]);
}
