use canopy_core::assignment::{assign_gated, assignment_cost, hungarian};
use canopy_oracles::min_assignment_cost;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn matrix(max: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(0u32..50, c), r))
        .prop_map(|m| m.into_iter().map(|row| row.into_iter().map(f64::from).collect()).collect())
}

fn to_dmatrix(m: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j])
}

/// Best partial matching over admissible pairs by (more pairs, lower cost).
fn gated_reference(m: &[Vec<f64>], gate: f64) -> (usize, f64) {
    fn go(i: usize, m: &[Vec<f64>], gate: f64, used: &mut Vec<bool>) -> (usize, f64) {
        if i == m.len() {
            return (0, 0.0);
        }
        let mut best = go(i + 1, m, gate, used);
        for j in 0..used.len() {
            if !used[j] && m[i][j] <= gate {
                used[j] = true;
                let (n, c) = go(i + 1, m, gate, used);
                used[j] = false;
                let cand = (n + 1, c + m[i][j]);
                if cand.0 > best.0 || (cand.0 == best.0 && cand.1 < best.1) {
                    best = cand;
                }
            }
        }
        best
    }
    go(0, m, gate, &mut vec![false; m[0].len()])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn hungarian_is_optimal(m in matrix(7)) {
        let c = to_dmatrix(&m);
        let sol = hungarian(&c);
        prop_assert_eq!(assignment_cost(&c, &sol), min_assignment_cost(&m));
        let matched = sol.iter().flatten().count();
        prop_assert_eq!(matched, m.len().min(m[0].len()));
        let mut cols: Vec<usize> = sol.iter().flatten().copied().collect();
        cols.sort_unstable();
        cols.dedup();
        prop_assert_eq!(cols.len(), matched);
    }

    #[test]
    fn real_valued_costs(m in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| prop::collection::vec(prop::collection::vec(-5.0..5.0f64, c), r))) {
        let c = to_dmatrix(&m);
        let got = assignment_cost(&c, &hungarian(&c));
        prop_assert!((got - min_assignment_cost(&m)).abs() < 1e-9);
    }

    #[test]
    fn gated_matches_reference(m in matrix(5), gate in 0.0..50.0f64) {
        let c = to_dmatrix(&m);
        let a = assign_gated(&c, gate);
        let (n, cost) = gated_reference(&m, gate);
        prop_assert_eq!(a.pairs.len(), n);
        let got: f64 = a.pairs.iter().map(|&(i, j)| m[i][j]).sum();
        prop_assert_eq!(got, cost);
        prop_assert!(a.pairs.iter().all(|&(i, j)| m[i][j] <= gate));
        prop_assert_eq!(a.pairs.len() + a.unmatched_rows.len(), m.len());
        prop_assert_eq!(a.pairs.len() + a.unmatched_cols.len(), m[0].len());
        for &i in &a.unmatched_rows {
            for &j in &a.unmatched_cols {
                prop_assert!(m[i][j] > gate, "left an admissible pair ({i}, {j}) unmatched");
            }
        }
    }
}
