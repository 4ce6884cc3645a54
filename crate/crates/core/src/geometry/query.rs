use std::collections::HashMap;

use super::sampling::dist2;
use crate::data::Point;
use crate::error::{Error, Result};

/// Neighbor table: `k` source indices per center, nearest first.
///
/// Rows with fewer than `k` genuine neighbors are padded by repeating their first entry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NeighborIndex {
    pub k: usize,
    /// Row-major `[centers, k]`.
    pub indices: Vec<u32>,
    /// Genuine (pre-padding) neighbors per row.
    pub valid_count: Vec<u32>,
}

impl NeighborIndex {
    pub fn rows(&self) -> usize {
        self.valid_count.len()
    }

    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[i * self.k..(i + 1) * self.k]
    }

    fn push_row(&mut self, found: &[(f32, u32)], fallback: u32) {
        let take = found.len().min(self.k);
        let first = found.first().map_or(fallback, |f| f.1);
        self.indices.extend(found[..take].iter().map(|f| f.1));
        self.indices.extend(std::iter::repeat(first).take(self.k - take));
        self.valid_count.push(take as u32);
    }
}

type Cell = [i64; 3];

/// Uniform hash grid over a point set.
pub struct HashGrid {
    cell: f32,
    buckets: HashMap<Cell, Vec<u32>>,
    lo: Cell,
    hi: Cell,
}

impl HashGrid {
    pub fn new(points: &[Point], cell: f32) -> Self {
        let mut buckets: HashMap<Cell, Vec<u32>> = HashMap::new();
        let mut lo = [i64::MAX; 3];
        let mut hi = [i64::MIN; 3];
        for (i, p) in points.iter().enumerate() {
            let c = Self::key(p, cell);
            for a in 0..3 {
                lo[a] = lo[a].min(c[a]);
                hi[a] = hi[a].max(c[a]);
            }
            buckets.entry(c).or_default().push(i as u32);
        }
        HashGrid { cell, buckets, lo, hi }
    }

    fn key(p: &Point, cell: f32) -> Cell {
        [(p[0] / cell).floor() as i64, (p[1] / cell).floor() as i64, (p[2] / cell).floor() as i64]
    }

    pub fn cell_of(&self, p: &Point) -> Cell {
        Self::key(p, self.cell)
    }

    /// Indices stored in cells within Chebyshev distance exactly `ring` of `center`.
    fn for_ring(&self, center: Cell, ring: i64, mut f: impl FnMut(u32)) {
        for dx in -ring..=ring {
            for dy in -ring..=ring {
                for dz in -ring..=ring {
                    if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                        continue;
                    }
                    if let Some(b) = self.buckets.get(&[center[0] + dx, center[1] + dy, center[2] + dz]) {
                        b.iter().copied().for_each(&mut f);
                    }
                }
            }
        }
    }

    /// Rings needed to cover every occupied cell from `center`.
    fn max_ring(&self, center: Cell) -> i64 {
        (0..3).map(|a| (center[a] - self.lo[a]).abs().max((self.hi[a] - center[a]).abs())).max().unwrap_or(0)
    }
}

fn nearest_first(found: &mut Vec<(f32, u32)>) {
    found.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
}

/// Up to `k` source points within `radius` of each center, nearest first (ties by index).
///
/// Rows with no genuine neighbor fall back to the nearest source point with `valid_count` 0.
pub fn ball_query(centers: &[Point], source: &[Point], radius: f32, k: usize) -> Result<NeighborIndex> {
    if source.is_empty() {
        return Err(Error::Query("ball query over an empty source set".into()));
    }
    if !(radius > 0.0) || k == 0 {
        return Err(Error::Query(format!("ball query needs radius > 0 and k ≥ 1 (radius {radius}, k {k})")));
    }
    let grid = HashGrid::new(source, radius);
    let r2 = radius * radius;
    let mut out = NeighborIndex { k, indices: Vec::with_capacity(centers.len() * k), valid_count: Vec::with_capacity(centers.len()) };
    let mut found = Vec::new();
    for c in centers {
        found.clear();
        grid.for_ring(grid.cell_of(c), 0, |i| push_if_within(&mut found, source, c, i, r2));
        grid.for_ring(grid.cell_of(c), 1, |i| push_if_within(&mut found, source, c, i, r2));
        nearest_first(&mut found);
        let fallback = if found.is_empty() { nearest_one(&grid, source, c) } else { 0 };
        out.push_row(&found, fallback);
    }
    Ok(out)
}

fn push_if_within(found: &mut Vec<(f32, u32)>, source: &[Point], c: &Point, i: u32, r2: f32) {
    let d = dist2(&source[i as usize], c);
    if d <= r2 {
        found.push((d, i));
    }
}

fn nearest_one(grid: &HashGrid, source: &[Point], c: &Point) -> u32 {
    knn_rows(grid, source, c, 1)[0].1
}

/// Cell size giving a few points per occupied cell for the source's bounding box.
fn knn_cell(source: &[Point], k: usize) -> f32 {
    let mut lo = [f32::INFINITY; 3];
    let mut hi = [f32::NEG_INFINITY; 3];
    for p in source {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let ext: Vec<f32> = (0..3).map(|a| hi[a] - lo[a]).collect();
    let max_ext = ext.iter().copied().fold(0.0f32, f32::max);
    if max_ext <= 0.0 {
        return 1.0;
    }
    let floor = max_ext * 1e-3;
    let vol: f32 = ext.iter().map(|e| e.max(floor)).product();
    let per_cell = k.max(4) as f32;
    (vol * per_cell / source.len() as f32).cbrt().max(floor)
}

fn knn_rows(grid: &HashGrid, source: &[Point], c: &Point, k: usize) -> Vec<(f32, u32)> {
    let center = grid.cell_of(c);
    let last = grid.max_ring(center);
    let mut found: Vec<(f32, u32)> = Vec::new();
    let mut ring = 0;
    loop {
        grid.for_ring(center, ring, |i| found.push((dist2(&source[i as usize], c), i)));
        // Points in rings beyond `ring` are at least ring·cell away.
        let reach = ring as f32 * grid.cell;
        if found.len() >= k {
            nearest_first(&mut found);
            found.truncate(k);
            if found[k - 1].0.sqrt() < reach || ring >= last {
                break;
            }
        } else if ring >= last {
            nearest_first(&mut found);
            break;
        }
        ring += 1;
    }
    found.truncate(k);
    found
}

/// Exact `k` nearest source points per center by Euclidean distance, ties by lower index.
pub fn knn_query(centers: &[Point], source: &[Point], k: usize) -> Result<NeighborIndex> {
    if source.is_empty() {
        return Err(Error::Query("knn query over an empty source set".into()));
    }
    if k > source.len() {
        return Err(Error::Count { requested: k, available: source.len() });
    }
    if k == 0 {
        return Err(Error::Query("knn query needs k ≥ 1".into()));
    }
    let grid = HashGrid::new(source, knn_cell(source, k));
    let mut out = NeighborIndex { k, indices: Vec::with_capacity(centers.len() * k), valid_count: Vec::with_capacity(centers.len()) };
    for c in centers {
        let rows = knn_rows(&grid, source, c, k);
        out.push_row(&rows, 0);
    }
    Ok(out)
}

/// Distances paired with [`knn_query`] rows (Euclidean, not squared).
pub fn knn_with_distances(centers: &[Point], source: &[Point], k: usize) -> Result<(NeighborIndex, Vec<f32>)> {
    let nbr = knn_query(centers, source, k)?;
    let d = centers
        .iter()
        .enumerate()
        .flat_map(|(i, c)| nbr.row(i).iter().map(move |&j| dist2(c, &source[j as usize]).sqrt()).collect::<Vec<_>>())
        .collect();
    Ok((nbr, d))
}
