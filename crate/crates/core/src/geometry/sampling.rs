use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::data::Point;
use crate::error::{Error, Result};

/// How farthest point sampling picks its first point and breaks ties.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FpsStart {
    /// Start at this index; ties go to the lower index.
    Index(usize),
    /// Start at the lexicographically smallest position and break ties by position,
    /// so the selected positions do not depend on input order.
    LowestPosition,
}

impl Default for FpsStart {
    fn default() -> Self {
        FpsStart::Index(0)
    }
}

pub(crate) fn dist2(a: &Point, b: &Point) -> f32 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

fn lex(a: &Point, b: &Point) -> Ordering {
    a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])).then(a[2].total_cmp(&b[2]))
}

/// Greedy max-min subset selection.
///
/// Each pick maximizes the distance to its nearest already-picked point.
pub fn farthest_point_sample(points: &[Point], m: usize, start: FpsStart) -> Result<Vec<usize>> {
    let p = points.len();
    if m > p {
        return Err(Error::Count { requested: m, available: p });
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let by_position = matches!(start, FpsStart::LowestPosition);
    let first = match start {
        FpsStart::Index(i) if i < p => i,
        FpsStart::Index(i) => return Err(Error::Count { requested: i + 1, available: p }),
        FpsStart::LowestPosition => (0..p).min_by(|&a, &b| lex(&points[a], &points[b]).then(a.cmp(&b))).unwrap(),
    };
    let mut chosen = Vec::with_capacity(m);
    chosen.push(first);
    let mut min_d = vec![f32::INFINITY; p];
    let mut taken = vec![false; p];
    taken[first] = true;
    let mut last = first;
    for _ in 1..m {
        let lp = points[last];
        let mut best = usize::MAX;
        let mut best_d = -1.0f32;
        for (i, (q, md)) in points.iter().zip(min_d.iter_mut()).enumerate() {
            let d = dist2(q, &lp);
            if d < *md {
                *md = d;
            }
            if taken[i] {
                continue;
            }
            let better = *md > best_d
                || (by_position && *md == best_d && best != usize::MAX && lex(q, &points[best]) == Ordering::Less);
            if better {
                best_d = *md;
                best = i;
            }
        }
        taken[best] = true;
        chosen.push(best);
        last = best;
    }
    Ok(chosen)
}
