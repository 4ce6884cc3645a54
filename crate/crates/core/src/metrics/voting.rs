use rand::Rng;

use crate::augment::random_scale;
use crate::autodiff::Tensor;
use crate::data::PointCloud;
use crate::error::{Error, Result};
use crate::model::Model;

/// Logits averaged over `votes` evaluations of randomly scaled copies of `cloud`.
pub fn voting_eval(model: &Model, cloud: &PointCloud, votes: usize, scale: (f32, f32), rng: &mut impl Rng) -> Result<Tensor<f32>> {
    if votes == 0 {
        return Err(Error::Config("voting needs at least one vote".into()));
    }
    let mut sum: Vec<f64> = Vec::new();
    let mut shape = Vec::new();
    for _ in 0..votes {
        let scaled = random_scale(cloud, scale.0, scale.1, rng)?;
        let logits = model.predict(std::slice::from_ref(&scaled), 1)?.pop().unwrap();
        if sum.is_empty() {
            sum = vec![0.0; logits.len()];
            shape = logits.shape().to_vec();
        }
        sum.iter_mut().zip(logits.data()).for_each(|(s, &v)| *s += v as f64);
    }
    let n = votes as f64;
    Tensor::new(shape, sum.into_iter().map(|s| (s / n) as f32).collect())
}
