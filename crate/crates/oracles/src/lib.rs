//! Slow reference implementations for tests. Plain arrays only, no shared
//! code with the pipeline crates.

use std::collections::{HashMap, VecDeque};
use std::hash::Hash;

fn dist2(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Textbook O(n²) DBSCAN. Points are visited in index order; each unvisited
/// core point seeds a cluster that is expanded breadth-first before the next
/// seed, so a border point joins the first cluster that reaches it.
pub fn dbscan_reference(points: &[[f64; 3]], eps: f64, min_samples: usize) -> Vec<Option<usize>> {
    let n = points.len();
    let neighbors: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| dist2(&points[i], &points[j]) <= eps * eps).collect())
        .collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_samples).collect();
    let mut label = vec![None; n];
    let mut next = 0;
    for seed in 0..n {
        if !core[seed] || label[seed].is_some() {
            continue;
        }
        label[seed] = Some(next);
        let mut queue = VecDeque::from([seed]);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbors[p] {
                if label[q].is_none() {
                    label[q] = Some(next);
                    if core[q] {
                        queue.push_back(q);
                    }
                }
            }
        }
        next += 1;
    }
    label
}

/// Whether two labelings induce the same partition with the same noise set.
pub fn same_partition<A: Copy + Eq + Hash, B: Copy + Eq + Hash>(a: &[Option<A>], b: &[Option<B>]) -> bool {
    if a.len() != b.len() {
        return false;
    }
    let mut fwd: HashMap<A, B> = HashMap::new();
    let mut back: HashMap<B, A> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        match (x, y) {
            (None, None) => {}
            (Some(x), Some(y)) => {
                if *fwd.entry(*x).or_insert(*y) != *y || *back.entry(*y).or_insert(*x) != *x {
                    return false;
                }
            }
            _ => return false,
        }
    }
    true
}

/// Minimum total cost over all assignments that match every row (or every
/// column, whichever side is smaller), by exhaustive search.
pub fn min_assignment_cost(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return 0.0;
    }
    let c = |i: usize, j: usize| if rows <= cols { cost[i][j] } else { cost[j][i] };
    let (small, large) = (rows.min(cols), rows.max(cols));
    fn go(k: usize, small: usize, large: usize, used: &mut Vec<bool>, c: &dyn Fn(usize, usize) -> f64) -> f64 {
        if k == small {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..large {
            if !used[j] {
                used[j] = true;
                best = best.min(c(k, j) + go(k + 1, small, large, used, c));
                used[j] = false;
            }
        }
        best
    }
    go(0, small, large, &mut vec![false; large], &c)
}

/// Γ(s) for s a positive multiple of 1/2.
fn gamma_half_integer(s: f64) -> f64 {
    let (mut g, mut x) = if (s * 2.0).round() as i64 % 2 == 0 { (1.0, 1.0) } else { (std::f64::consts::PI.sqrt(), 0.5) };
    while x + 0.5 < s {
        g *= x;
        x += 1.0;
    }
    g
}

/// Regularized lower incomplete gamma P(s, x) for half-integer `s`, from the
/// power series below `s + 1` and a Lentz continued fraction above it.
pub fn regularized_lower_gamma(s: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let prefactor = (s * x.ln() - x).exp() / gamma_half_integer(s);
    if x < s + 1.0 {
        let (mut term, mut sum, mut a) = (1.0 / s, 1.0 / s, s);
        while term.abs() > sum.abs() * 1e-17 {
            a += 1.0;
            term *= x / a;
            sum += term;
        }
        prefactor * sum
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..10_000 {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        1.0 - prefactor * h
    }
}

/// Chi-square quantile by bisection on the CDF.
pub fn chi2_quantile(dof: u32, p: f64) -> f64 {
    let s = dof as f64 / 2.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while regularized_lower_gamma(s, hi / 2.0) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if regularized_lower_gamma(s, mid / 2.0) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &v)| row.iter().copied().chain([v]).collect()).collect();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col] == 0.0 {
            return None;
        }
        m.swap(col, piv);
        for r in col + 1..n {
            let f = m[r][col] / m[col][col];
            for k in col..=n {
                m[r][k] -= f * m[col][k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    Some(x)
}

/// `yᵀ S⁻¹ y` through [`solve`].
pub fn mahalanobis2(s: &[Vec<f64>], y: &[f64]) -> Option<f64> {
    let x = solve(s, y)?;
    Some(y.iter().zip(&x).map(|(a, b)| a * b).sum())
}

fn det(m: &[Vec<f64>], idx: &[usize]) -> f64 {
    match idx.len() {
        1 => m[idx[0]][idx[0]],
        2 => m[idx[0]][idx[0]] * m[idx[1]][idx[1]] - m[idx[0]][idx[1]] * m[idx[1]][idx[0]],
        3 => {
            let g = |r: usize, c: usize| m[idx[r]][idx[c]];
            g(0, 0) * (g(1, 1) * g(2, 2) - g(1, 2) * g(2, 1)) - g(0, 1) * (g(1, 0) * g(2, 2) - g(1, 2) * g(2, 0))
                + g(0, 2) * (g(1, 0) * g(2, 1) - g(1, 1) * g(2, 0))
        }
        _ => unimplemented!("only up to 3x3"),
    }
}

/// Symmetric within `tol` and every principal minor of the 3x3 matrix is at
/// least `-tol` (scaled by the matrix magnitude).
pub fn is_symmetric_psd3(m: &[Vec<f64>], tol: f64) -> bool {
    let scale = m.iter().flatten().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
    let sym = (0..3).all(|i| (0..3).all(|j| (m[i][j] - m[j][i]).abs() <= tol * scale));
    let subsets: [&[usize]; 7] = [&[0], &[1], &[2], &[0, 1], &[0, 2], &[1, 2], &[0, 1, 2]];
    sym && subsets.iter().all(|s| det(m, s) >= -tol * scale.powi(s.len() as i32))
}
