use std::f32::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Labels, Point, PointCloud};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Sphere, cube and plane surfaces with one label per cloud.
    Cls3,
    /// Spheres whose points are labeled by hemisphere (`z ≥ 0` is part 1).
    Parts2,
}

/// How colors relate to part labels in `Parts2` clouds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ColorMode {
    /// Uniform random colors.
    #[default]
    Random,
    /// Colors that encode the part label.
    Correlated,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub count: usize,
    pub points: usize,
    /// Standard deviation of Gaussian position noise.
    pub noise: f32,
    pub seed: u64,
    #[serde(default)]
    pub colors: ColorMode,
}

fn unit_vector(rng: &mut impl Rng, normal: &Normal<f32>) -> Point {
    loop {
        let v = [normal.sample(rng), normal.sample(rng), normal.sample(rng)];
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-6 {
            return v.map(|x| x / n);
        }
    }
}

fn cube_point(rng: &mut impl Rng) -> Point {
    let face = rng.gen_range(0..6);
    let mut p = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    p[face / 2] = if face % 2 == 0 { -0.5 } else { 0.5 };
    p
}

fn rotate_z(p: Point, theta: f32) -> Point {
    let (s, c) = theta.sin_cos();
    [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]]
}

fn cls3_cloud(rng: &mut ChaCha8Rng, label: u16, spec: &SyntheticSpec) -> PointCloud {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let noise = Normal::new(0.0, spec.noise.max(0.0)).unwrap();
    let scale = rng.gen_range(0.8..1.2);
    let theta = rng.gen_range(0.0..2.0 * PI);
    let tilt = rng.gen_range(-0.3f32..0.3);
    let positions = (0..spec.points)
        .map(|_| {
            let p = match label {
                0 => unit_vector(rng, &normal).map(|v| v * 0.5),
                1 => cube_point(rng),
                _ => {
                    let (x, y) = (rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6));
                    [x, y, tilt * x]
                }
            };
            rotate_z(p, theta).map(|v| v * scale + noise.sample(rng))
        })
        .collect();
    PointCloud::new(positions).with_labels(Labels::Cloud(label))
}

fn part_color(rng: &mut impl Rng, label: u16, mode: ColorMode) -> Point {
    match mode {
        ColorMode::Random => [rng.gen(), rng.gen(), rng.gen()],
        ColorMode::Correlated => {
            let j = |rng: &mut dyn rand::RngCore| rng.gen_range(0.0..0.2f32);
            if label == 1 {
                [0.8 + j(rng), j(rng), j(rng)]
            } else {
                [j(rng), j(rng), 0.8 + j(rng)]
            }
        }
    }
}

fn parts2_cloud(rng: &mut ChaCha8Rng, spec: &SyntheticSpec) -> PointCloud {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let noise = Normal::new(0.0, spec.noise.max(0.0)).unwrap();
    let radius = rng.gen_range(0.5..1.0);
    let mut positions = Vec::with_capacity(spec.points);
    let mut labels = Vec::with_capacity(spec.points);
    let mut colors = Vec::with_capacity(spec.points);
    for i in 0..spec.points {
        // Alternate hemispheres so both parts are always present.
        let want: u16 = (i % 2) as u16;
        let mut u = unit_vector(rng, &normal);
        if (u[2] >= 0.0) != (want == 1) {
            u[2] = -u[2];
        }
        let p = u.map(|v| v * radius + noise.sample(rng));
        positions.push(p);
        labels.push(want);
        colors.push(part_color(rng, want, spec.colors));
    }
    PointCloud::new(positions).with_colors(colors).with_labels(Labels::Points(labels))
}

/// Deterministic synthetic dataset. `Cls3` labels cycle 0, 1, 2 so classes stay balanced.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<PointCloud>> {
    if spec.points == 0 {
        return Err(Error::Config("synthetic clouds need at least one point".into()));
    }
    if spec.kind == SyntheticKind::Parts2 && spec.points < 2 {
        return Err(Error::Config("parts2 clouds need at least two points".into()));
    }
    if !(spec.noise >= 0.0) {
        return Err(Error::Config(format!("noise must be non-negative, got {}", spec.noise)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    Ok((0..spec.count)
        .map(|i| match spec.kind {
            SyntheticKind::Cls3 => cls3_cloud(&mut rng, (i % 3) as u16, spec),
            SyntheticKind::Parts2 => parts2_cloud(&mut rng, spec),
        })
        .collect())
}

/// Train clouds whose colors encode the part label and validation clouds with random colors.
pub fn spurious_color_benchmark(train: usize, val: usize, points: usize, noise: f32, seed: u64) -> Result<(Vec<PointCloud>, Vec<PointCloud>)> {
    let base = SyntheticSpec { kind: SyntheticKind::Parts2, count: train, points, noise, seed, colors: ColorMode::Correlated };
    let t = generate_synthetic(&base)?;
    let v = generate_synthetic(&SyntheticSpec { count: val, seed: seed ^ 0x5eed_0000_0000_0001, colors: ColorMode::Random, ..base })?;
    Ok((t, v))
}
