use std::f32::consts::PI;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{Point, PointCloud};
use crate::error::{Error, Result};
use crate::geometry::{farthest_point_sample, FpsStart};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ResampleMode {
    /// Without replacement when `n ≤ P`, with replacement otherwise.
    #[default]
    Random,
    /// Farthest point sampling from index 0.
    Uniform,
}

pub fn resample_points(cloud: &PointCloud, n: usize, mode: ResampleMode, rng: &mut impl Rng) -> Result<PointCloud> {
    let p = cloud.len();
    if p == 0 {
        return Err(Error::Input("cannot resample an empty cloud".into()));
    }
    let idx: Vec<usize> = match mode {
        ResampleMode::Random if n <= p => sample(rng, p, n).into_vec(),
        ResampleMode::Random => (0..n).map(|_| rng.gen_range(0..p)).collect(),
        ResampleMode::Uniform => farthest_point_sample(&cloud.positions, n, FpsStart::Index(0))?,
    };
    Ok(cloud.select(&idx))
}

fn refresh_height(c: &mut PointCloud) {
    if c.heights.is_some() {
        c.heights = None;
        *c = append_height(c);
    }
}

fn map3(v: &mut [Point], f: impl Fn(Point) -> Point) {
    v.iter_mut().for_each(|p| *p = f(*p));
}

/// Rotation by `theta` about the z axis; normals follow, heights are unchanged.
pub fn rotate_z(cloud: &PointCloud, theta: f32) -> PointCloud {
    let (s, c) = theta.sin_cos();
    let rot = |p: Point| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]];
    let mut out = cloud.clone();
    map3(&mut out.positions, rot);
    if let Some(n) = out.normals.as_mut() {
        map3(n, rot);
    }
    out
}

/// Uniform rotation about the gravity axis, or over all of SO(3) when `so3` is set.
pub fn random_rotate(cloud: &PointCloud, so3: bool, rng: &mut impl Rng) -> PointCloud {
    if !so3 {
        return rotate_z(cloud, rng.gen_range(0.0..2.0 * PI));
    }
    let q = unit_quaternion(rng);
    let rot = |p: Point| quat_rotate(q, p);
    let mut out = cloud.clone();
    map3(&mut out.positions, rot);
    if let Some(n) = out.normals.as_mut() {
        map3(n, rot);
    }
    refresh_height(&mut out);
    out
}

/// Normalized 4D Gaussian: uniform over unit quaternions, hence over rotations.
fn unit_quaternion(rng: &mut impl Rng) -> [f32; 4] {
    loop {
        let q: [f64; 4] = [0; 4].map(|_| StandardNormal.sample(rng));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 1e-9 {
            return q.map(|v| (v / n) as f32);
        }
    }
}

fn quat_rotate(q: [f32; 4], p: Point) -> Point {
    let [w, x, y, z] = q;
    let m = [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ];
    [0, 1, 2].map(|r| m[r][0] * p[0] + m[r][1] * p[1] + m[r][2] * p[2])
}

/// One uniform factor in `[lo, hi]` for all coordinates.
pub fn random_scale(cloud: &PointCloud, lo: f32, hi: f32, rng: &mut impl Rng) -> Result<PointCloud> {
    if !(lo > 0.0 && lo <= hi) {
        return Err(Error::Config(format!("scale range [{lo}, {hi}] must be positive and ordered")));
    }
    let s = rng.gen_range(lo..=hi);
    let mut out = cloud.clone();
    map3(&mut out.positions, |p| p.map(|v| v * s));
    refresh_height(&mut out);
    Ok(out)
}

/// Uniform offset in `[-extent, extent]` per axis. Heights are translation invariant and kept.
pub fn random_translate(cloud: &PointCloud, extent: f32, rng: &mut impl Rng) -> PointCloud {
    let e = extent.abs();
    let t: Point = [0, 1, 2].map(|_| if e > 0.0 { rng.gen_range(-e..=e) } else { 0.0 });
    let mut out = cloud.clone();
    map3(&mut out.positions, |p| [p[0] + t[0], p[1] + t[1], p[2] + t[2]]);
    out
}

/// Independent Gaussian noise per coordinate, clipped to `[-clip, clip]`.
pub fn jitter(cloud: &PointCloud, sigma: f32, clip: f32, rng: &mut impl Rng) -> Result<PointCloud> {
    if !(sigma >= 0.0 && clip >= 0.0) {
        return Err(Error::Config(format!("jitter needs sigma ≥ 0 and clip ≥ 0, got {sigma}, {clip}")));
    }
    let mut out = cloud.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0f32, sigma).map_err(|e| Error::Config(e.to_string()))?;
    for p in out.positions.iter_mut() {
        for v in p.iter_mut() {
            *v += normal.sample(rng).clamp(-clip, clip);
        }
    }
    refresh_height(&mut out);
    Ok(out)
}

/// Sets heights to `z - min(z)`. Applying it again changes nothing.
pub fn append_height(cloud: &PointCloud) -> PointCloud {
    let mut out = cloud.clone();
    if out.heights.is_none() {
        let lo = out.positions.iter().map(|p| p[2]).fold(f32::INFINITY, f32::min);
        out.heights = Some(out.positions.iter().map(|p| p[2] - lo).collect());
    }
    out
}

/// With probability `p` zeroes all colors of the cloud, or (with `per_point`) each point's
/// colors independently.
pub fn color_drop(cloud: &PointCloud, p: f32, per_point: bool, rng: &mut impl Rng) -> PointCloud {
    let mut out = cloud.clone();
    if let Some(c) = out.colors.as_mut() {
        if per_point {
            c.iter_mut().for_each(|v| {
                if rng.gen::<f32>() < p {
                    *v = [0.0; 3];
                }
            });
        } else if rng.gen::<f32>() < p {
            c.iter_mut().for_each(|v| *v = [0.0; 3]);
        }
    }
    out
}

/// With probability `p`, stretches each color channel to span `[0, 1]`; constant channels stay.
pub fn color_autocontrast(cloud: &PointCloud, p: f32, rng: &mut impl Rng) -> PointCloud {
    let mut out = cloud.clone();
    let apply = rng.gen::<f32>() < p;
    if let (true, Some(c)) = (apply, out.colors.as_mut()) {
        for ch in 0..3 {
            let lo = c.iter().map(|v| v[ch]).fold(f32::INFINITY, f32::min);
            let hi = c.iter().map(|v| v[ch]).fold(f32::NEG_INFINITY, f32::max);
            if hi > lo {
                c.iter_mut().for_each(|v| v[ch] = ((v[ch] - lo) / (hi - lo)).clamp(0.0, 1.0));
            }
        }
    }
    out
}
