use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ModelConfig, TrainConfig};
use super::model::Model;
use super::train::{evaluate, train_supervised, LabeledSet, Monitor};
use crate::error::{Error, Result};
use crate::metrics::{MetricsReport, SummaryRow};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub folds: Vec<MetricsReport>,
    pub summary: SummaryRow,
}

/// Sample indices of each test fold. Groups are bucketed by the sorted set of
/// classes they contain, shuffled, and dealt round-robin so every fold sees a
/// similar class mix; a group never spans two folds.
pub fn group_folds(set: &LabeledSet, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &g) in set.groups.iter().enumerate() {
        members.entry(g).or_default().push(i);
    }
    if k < 2 {
        return Err(Error::param(format!("cross-validation needs k >= 2, got {k}")));
    }
    if k > members.len() {
        return Err(Error::Dataset(format!("k = {k} exceeds the {} distinct groups", members.len())));
    }
    let mut strata: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for (&g, idx) in &members {
        let mut sig: Vec<usize> = idx.iter().map(|&i| set.labels[i]).collect();
        sig.sort_unstable();
        sig.dedup();
        strata.entry(sig).or_default().push(g);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0usize;
    for groups in strata.values_mut() {
        groups.shuffle(&mut rng);
        for g in groups.iter() {
            folds[next % k].extend_from_slice(&members[g]);
            next += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Runs `run(fold, train, test)` on each fold and aggregates mean and sample std.
pub fn cross_validate_with<F>(set: &LabeledSet, k: usize, seed: u64, label: (&str, &str), mut run: F) -> Result<CvResult>
where
    F: FnMut(usize, &LabeledSet, &LabeledSet) -> Result<MetricsReport>,
{
    let folds = group_folds(set, k, seed)?;
    let mut reports = Vec::with_capacity(k);
    for (f, test_idx) in folds.iter().enumerate() {
        let train_idx: Vec<usize> = (0..set.len()).filter(|i| test_idx.binary_search(i).is_err()).collect();
        let train = set.subset(&train_idx)?;
        let test = set.subset(test_idx)?;
        reports.push(run(f, &train, &test)?);
    }
    let summary = SummaryRow::from_reports(label.0, label.1, &reports);
    Ok(CvResult { folds: reports, summary })
}

/// k-fold cross-validation of a freshly initialised model per fold.
pub fn cross_validate(set: &LabeledSet, model: &ModelConfig, train: &TrainConfig, k: usize, dataset: &str) -> Result<CvResult> {
    let domain = model.domain().to_string();
    cross_validate_with(set, k, train.seed, (dataset, &domain), |_, tr, te| {
        let mut m = Model::new(model.clone(), false, train.seed)?;
        train_supervised(&mut m, tr, Monitor::default(), train)?;
        evaluate(&mut m, te)
    })
}
