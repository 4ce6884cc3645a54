use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::PointCloud;
use crate::error::{Error, Result};

/// Train/validation index lists, stratified by cloud label (clouds without one form a
/// single stratum). Each stratum gets `round(n · train / (train + val))` training clouds.
pub fn split_indices(dataset: &[PointCloud], fractions: (f64, f64), seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let (a, b) = fractions;
    if !(a >= 0.0 && b >= 0.0 && a + b > 0.0) {
        return Err(Error::Config(format!("invalid split fractions ({a}, {b})")));
    }
    let share = a / (a + b);
    let mut strata: BTreeMap<Option<u16>, Vec<usize>> = BTreeMap::new();
    for (i, c) in dataset.iter().enumerate() {
        strata.entry(c.cloud_label()).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val) = (Vec::new(), Vec::new());
    for (_, mut idx) in strata {
        idx.shuffle(&mut rng);
        let n = (idx.len() as f64 * share).round() as usize;
        train.extend_from_slice(&idx[..n]);
        val.extend_from_slice(&idx[n..]);
    }
    train.sort_unstable();
    val.sort_unstable();
    Ok((train, val))
}

pub fn split(dataset: &[PointCloud], fractions: (f64, f64), seed: u64) -> Result<(Vec<PointCloud>, Vec<PointCloud>)> {
    let (t, v) = split_indices(dataset, fractions, seed)?;
    Ok((t.iter().map(|&i| dataset[i].clone()).collect(), v.iter().map(|&i| dataset[i].clone()).collect()))
}
