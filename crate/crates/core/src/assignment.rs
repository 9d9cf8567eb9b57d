//! Linear assignment (Hungarian method with potentials).

use nalgebra::DMatrix;

/// Minimum-cost assignment for a rectangular matrix with finite entries.
///
/// Returns, for each row, the assigned column. When there are more rows than
/// columns, the surplus rows get `None`. Runs in O(n²·m).
pub fn hungarian(cost: &DMatrix<f64>) -> Vec<Option<usize>> {
    let (rows, cols) = cost.shape();
    if rows == 0 || cols == 0 {
        return vec![None; rows];
    }
    if rows > cols {
        let by_col = hungarian(&cost.transpose());
        let mut out = vec![None; rows];
        for (c, r) in by_col.into_iter().enumerate() {
            if let Some(r) = r {
                out[r] = Some(c);
            }
        }
        return out;
    }
    assert!(cost.iter().all(|c| c.is_finite()), "cost matrix must be finite");

    // 1-based potentials formulation; column 0 is a virtual start.
    let (n, m) = (rows, cols);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut owner = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=m {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1, j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut out = vec![None; n];
    for j in 1..=m {
        if owner[j] != 0 {
            out[owner[j] - 1] = Some(j - 1);
        }
    }
    out
}

/// Result of a gated assignment between rows (e.g. tracks) and columns
/// (e.g. measurements).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Assignment {
    /// `(row, col)` pairs, sorted by row.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_rows: Vec<usize>,
    pub unmatched_cols: Vec<usize>,
}

/// Assigns rows to columns, forbidding any pair whose cost exceeds `gate` or
/// is not finite.
///
/// Inadmissible entries are replaced by a finite sentinel larger than the
/// sum of all admissible costs, so the solver first maximizes the number of
/// admissible pairs and then minimizes their total cost. Sentinel matches are
/// dropped afterwards.
pub fn assign_gated(cost: &DMatrix<f64>, gate: f64) -> Assignment {
    let (rows, cols) = cost.shape();
    let admissible = |c: f64| c.is_finite() && c <= gate;
    let total: f64 = cost.iter().copied().filter(|&c| admissible(c)).map(f64::abs).sum();
    let sentinel = 2.0 * total + 1.0;
    let masked = cost.map(|c| if admissible(c) { c } else { sentinel });
    let sol = hungarian(&masked);

    let mut out = Assignment::default();
    let mut col_used = vec![false; cols];
    for (r, c) in sol.into_iter().enumerate().take(rows) {
        match c {
            Some(c) if admissible(cost[(r, c)]) => {
                out.pairs.push((r, c));
                col_used[c] = true;
            }
            _ => out.unmatched_rows.push(r),
        }
    }
    out.unmatched_cols = (0..cols).filter(|&c| !col_used[c]).collect();
    out
}

/// Total cost of a row→column assignment.
pub fn assignment_cost(cost: &DMatrix<f64>, sol: &[Option<usize>]) -> f64 {
    sol.iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| cost[(r, c)]))
        .sum()
}
