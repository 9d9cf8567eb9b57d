use std::collections::HashMap;

use nalgebra::Point3;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

type CellKey = [i64; 3];

/// Points bucketed into cubes small enough that any two points sharing a
/// cube are within `eps` of each other.
struct Grid {
    /// Point indices sorted by cell, ascending index within a cell.
    order: Vec<u32>,
    /// `(key, start, end)` per non-empty cell, sorted by key.
    cells: Vec<(CellKey, u32, u32)>,
    /// Cell of each point.
    cell_of: Vec<u32>,
    /// Non-empty cells that can hold a point within `eps` of each cell,
    /// the cell itself included; cell `c` owns `neighbors[nbr_start[c]..nbr_start[c + 1]]`.
    neighbors: Vec<u32>,
    nbr_start: Vec<u32>,
}

impl Grid {
    fn new(points: &[Point3<f64>], eps: f64) -> Self {
        // The cube diagonal stays just under eps even after rounding in the key.
        let side = eps / 3f64.sqrt() * (1.0 - 1e-9);
        let inv_side = 1.0 / side;
        let mut keyed: Vec<(CellKey, u32)> = points
            .iter()
            .enumerate()
            .map(|(i, p)| (Self::key_of(p, inv_side), i as u32))
            .collect();
        keyed.sort_unstable();
        let mut cells = Vec::new();
        let mut cell_of = vec![0u32; points.len()];
        let mut start = 0;
        while start < keyed.len() {
            let k = keyed[start].0;
            let mut end = start + 1;
            while end < keyed.len() && keyed[end].0 == k {
                end += 1;
            }
            for (_, i) in &keyed[start..end] {
                cell_of[*i as usize] = cells.len() as u32;
            }
            cells.push((k, start as u32, end as u32));
            start = end;
        }
        // Cells are sorted by key, so each (x, y) column is a run ordered by z.
        let mut columns: FxHashMap<[i64; 2], (u32, u32)> = FxHashMap::default();
        for (c, ([x, y, _], _, _)) in cells.iter().enumerate() {
            columns.entry([*x, *y]).and_modify(|r| r.1 = c as u32 + 1).or_insert((c as u32, c as u32 + 1));
        }
        // Per (dx, dy), the largest |dz| whose cells can hold a point within eps.
        let gap = |d: i64| ((d.abs() - 1).max(0) as f64) * side;
        let mut column_offsets = Vec::new();
        for dx in -2i64..=2 {
            for dy in -2i64..=2 {
                if let Some(dz) = (0..=2i64).rev().find(|&dz| gap(dx).powi(2) + gap(dy).powi(2) + gap(dz).powi(2) <= eps * eps) {
                    column_offsets.push((dx, dy, dz));
                }
            }
        }
        let lists: Vec<Vec<u32>> = cells
            .par_iter()
            .map(|([x, y, z], _, _)| {
                let mut out = Vec::new();
                for &(dx, dy, dz) in &column_offsets {
                    let Some(&(s, e)) = columns.get(&[x + dx, y + dy]) else { continue };
                    let col = &cells[s as usize..e as usize];
                    let from = col.partition_point(|(k, _, _)| k[2] < z - dz);
                    let to = from + col[from..].iter().take_while(|(k, _, _)| k[2] <= z + dz).count();
                    out.extend(s + from as u32..s + to as u32);
                }
                out
            })
            .collect();
        let mut nbr_start = Vec::with_capacity(cells.len() + 1);
        nbr_start.push(0);
        for l in &lists {
            nbr_start.push(nbr_start.last().unwrap() + l.len() as u32);
        }
        let neighbors = lists.concat();
        Self { order: keyed.into_iter().map(|(_, i)| i).collect(), cells, cell_of, neighbors, nbr_start }
    }

    fn key_of(p: &Point3<f64>, inv: f64) -> CellKey {
        [(p.x * inv).floor() as i64, (p.y * inv).floor() as i64, (p.z * inv).floor() as i64]
    }

    fn members(&self, cell: usize) -> &[u32] {
        let (_, s, e) = self.cells[cell];
        &self.order[s as usize..e as usize]
    }

    fn neighbor_cells(&self, cell: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[self.nbr_start[cell] as usize..self.nbr_start[cell + 1] as usize].iter().map(|&c| c as usize)
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        parent[x as usize] = parent[parent[x as usize] as usize];
        x = parent[x as usize];
    }
    x
}

/// DBSCAN on a cell grid.
///
/// A point is core when its closed `eps`-ball, itself included, holds at
/// least `min_samples` points. Clusters are the connected components of core
/// points plus the border points they reach, numbered in order of their
/// lowest-index core point; a border point reachable from several clusters
/// joins the one with the lowest id. Noise is `None`.
///
/// Cells have a diagonal below `eps`, so a cell with `min_samples` points is
/// all core and the core points of a cell are always connected. Clustering
/// then reduces to joining neighboring cells that have a core pair within `eps`.
pub fn dbscan(points: &[Point3<f64>], eps: f64, min_samples: usize) -> Vec<Option<u32>> {
    assert!(eps > 0.0, "eps must be positive");
    assert!(min_samples >= 1, "min_samples must be >= 1");
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let grid = Grid::new(points, eps);
    let eps2 = eps * eps;
    let n_cells = grid.cells.len();

    let core_flags: Vec<Vec<(u32, bool)>> = (0..n_cells)
        .into_par_iter()
        .map(|c| {
            let own = grid.members(c);
            if own.len() >= min_samples {
                return own.iter().map(|&i| (i, true)).collect();
            }
            own.iter()
                .map(|&i| {
                    let p = &points[i as usize];
                    let mut count = 0;
                    'scan: for nc in grid.neighbor_cells(c) {
                        for &j in grid.members(nc) {
                            if (points[j as usize] - p).norm_squared() <= eps2 {
                                count += 1;
                                if count >= min_samples {
                                    break 'scan;
                                }
                            }
                        }
                    }
                    (i, count >= min_samples)
                })
                .collect()
        })
        .collect();
    let mut core = vec![false; n];
    for (i, f) in core_flags.into_iter().flatten() {
        core[i as usize] = f;
    }

    let core_in = |c: usize| grid.members(c).iter().copied().filter(|&i| core[i as usize]);
    let has_core: Vec<bool> = (0..n_cells).map(|c| core_in(c).next().is_some()).collect();

    // Cells already joined need no distance check, so walk pairs in order.
    let mut parent: Vec<u32> = (0..n_cells as u32).collect();
    for c in (0..n_cells).filter(|&c| has_core[c]) {
        for nc in grid.neighbor_cells(c).filter(|&nc| nc > c && has_core[nc]) {
            let (ra, rb) = (find(&mut parent, c as u32), find(&mut parent, nc as u32));
            if ra == rb {
                continue;
            }
            if core_in(c).any(|i| core_in(nc).any(|j| (points[i as usize] - points[j as usize]).norm_squared() <= eps2)) {
                parent[ra.max(rb) as usize] = ra.min(rb);
            }
        }
    }

    // Number components by their lowest-index core point.
    let mut first_core: HashMap<u32, u32> = HashMap::new();
    for c in (0..n_cells).filter(|&c| has_core[c]) {
        let root = find(&mut parent, c as u32);
        let lowest = core_in(c).min().expect("cell has a core point");
        first_core.entry(root).and_modify(|m| *m = (*m).min(lowest)).or_insert(lowest);
    }
    let mut roots: Vec<(u32, u32)> = first_core.into_iter().map(|(r, m)| (m, r)).collect();
    roots.sort_unstable();
    let id_of_root: HashMap<u32, u32> = roots.iter().enumerate().map(|(id, &(_, r))| (r, id as u32)).collect();
    let cell_id: Vec<Option<u32>> = (0..n_cells)
        .map(|c| has_core[c].then(|| id_of_root[&find(&mut parent, c as u32)]))
        .collect();

    (0..n)
        .into_par_iter()
        .map(|i| {
            let p = &points[i];
            let c = grid.cell_of[i] as usize;
            if core[i] {
                return cell_id[c];
            }
            let mut best: Option<u32> = None;
            for nc in grid.neighbor_cells(c) {
                let Some(id) = cell_id[nc] else { continue };
                if best.is_some_and(|b| b <= id) {
                    continue;
                }
                if core_in(nc).any(|j| (points[j as usize] - p).norm_squared() <= eps2) {
                    best = Some(id);
                }
            }
            best
        })
        .collect()
}
