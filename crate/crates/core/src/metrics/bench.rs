use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{Point, PointCloud};
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThroughputReport {
    pub model: String,
    /// `<batch>x<points>`.
    pub shape: String,
    pub warmup: usize,
    pub iters: usize,
    /// Instances per second.
    pub mean: f64,
    pub std: f64,
}

fn random_input(model: &Model, batch: usize, points: usize, seed: u64) -> Vec<PointCloud> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let recipe = model.config.features;
    (0..batch)
        .map(|_| {
            let mut tri = |lo: f32, hi: f32| -> Vec<Point> {
                (0..points).map(|_| [rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi)]).collect()
            };
            let mut c = PointCloud::new(tri(-1.0, 1.0));
            if recipe.colors {
                c.colors = Some(tri(0.0, 1.0));
            }
            if recipe.normals {
                c.normals = Some(tri(-1.0, 1.0));
            }
            c
        })
        .collect()
}

/// Times eval-mode forward passes over a random `batch × points` input, split into
/// micro-batches of `micro` clouds. Warmup passes are not timed.
pub fn throughput_bench(model: &Model, batch: usize, points: usize, warmup: usize, iters: usize, micro: usize) -> Result<ThroughputReport> {
    if batch == 0 || points == 0 || iters == 0 {
        return Err(Error::Config("bench needs batch, points and iters ≥ 1".into()));
    }
    let input = random_input(model, batch, points, 0);
    for _ in 0..warmup {
        model.predict(&input, micro)?;
    }
    let mut rates = Vec::with_capacity(iters);
    for _ in 0..iters {
        let t = Instant::now();
        model.predict(&input, micro)?;
        rates.push(batch as f64 / t.elapsed().as_secs_f64());
    }
    let mean = rates.iter().sum::<f64>() / iters as f64;
    let std = if iters > 1 { (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (iters - 1) as f64).sqrt() } else { 0.0 };
    Ok(ThroughputReport { model: model.config.name.clone(), shape: format!("{batch}x{points}"), warmup, iters, mean, std })
}
