use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Splits sample indices so that every group (source image) lands wholly on
/// one side. `fraction` of the distinct groups, rounded and kept within
/// `[1, G - 1]`, go to the training side.
pub fn split_by_group(groups: &[usize], fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::param(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let mut unique: Vec<usize> = groups.to_vec();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() < 2 {
        return Err(Error::Dataset(format!("cannot split {} group(s) into train and test", unique.len())));
    }
    unique.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let g = unique.len();
    let n_train = ((fraction * g as f64).round() as usize).clamp(1, g - 1);
    let mut train_groups = unique[..n_train].to_vec();
    train_groups.sort_unstable();
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for (i, grp) in groups.iter().enumerate() {
        if train_groups.binary_search(grp).is_ok() {
            train.push(i);
        } else {
            test.push(i);
        }
    }
    Ok((train, test))
}
