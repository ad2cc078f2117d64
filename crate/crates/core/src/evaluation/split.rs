use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pipeline::DataSplit;
use crate::simulator::Dataset;

/// Held-out test set plus a k-fold partition of the training ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitPlan {
    pub train: Vec<u64>,
    pub test: Vec<u64>,
    pub folds: Vec<Vec<u64>>,
    pub seed: u64,
}

/// Uniformly random indentation-level split; ids inside each list are sorted.
pub fn make_split(dataset: &Dataset, test_frac: f64, k: usize, seed: u64) -> Result<SplitPlan> {
    if dataset.indentations.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    if !(0.0..1.0).contains(&test_frac) {
        return Err(Error::InvalidArgument(format!("test fraction {test_frac} outside [0, 1)")));
    }
    let mut ids: Vec<u64> = dataset.indentations.iter().map(|i| i.id).collect();
    ids.sort_unstable();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = (test_frac * ids.len() as f64).round() as usize;
    let (test, train) = ids.split_at(n_test);
    if k == 0 || k > train.len() {
        return Err(Error::InvalidArgument(format!("{k} folds for {} training indentations", train.len())));
    }
    let base = train.len() / k;
    let extra = train.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = train[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    let mut train = train.to_vec();
    let mut test = test.to_vec();
    train.sort_unstable();
    test.sort_unstable();
    Ok(SplitPlan { train, test, folds, seed })
}

impl SplitPlan {
    /// Checks the partition properties and that every id exists in `dataset`.
    pub fn validate(&self, dataset: &Dataset) -> Result<()> {
        let train: BTreeSet<u64> = self.train.iter().copied().collect();
        let test: BTreeSet<u64> = self.test.iter().copied().collect();
        if train.len() != self.train.len() || test.len() != self.test.len() {
            return Err(Error::Validation("duplicate ids in the split plan".into()));
        }
        if !train.is_disjoint(&test) {
            return Err(Error::Validation("train and test sets overlap".into()));
        }
        let folded: Vec<u64> = self.folds.iter().flatten().copied().collect();
        let folded_set: BTreeSet<u64> = folded.iter().copied().collect();
        if folded.len() != folded_set.len() || folded_set != train {
            return Err(Error::Validation("folds do not partition the training set".into()));
        }
        if let Some(id) = train.iter().chain(&test).find(|&&id| dataset.find(id).is_none()) {
            return Err(Error::Validation(format!("indentation {id} is not in the dataset")));
        }
        Ok(())
    }

    /// Training split holding out `fold` (and the test set).
    pub fn fold_split(&self, fold: usize) -> Result<DataSplit> {
        let held = self
            .folds
            .get(fold)
            .ok_or_else(|| Error::InvalidArgument(format!("fold {fold} of {}", self.folds.len())))?;
        let held_set: BTreeSet<u64> = held.iter().copied().collect();
        Ok(DataSplit {
            train: self.train.iter().copied().filter(|id| !held_set.contains(id)).collect(),
            held_out: held.iter().chain(&self.test).copied().collect(),
        })
    }

    pub fn final_split(&self) -> DataSplit {
        DataSplit { train: self.train.clone(), held_out: self.test.clone() }
    }
}
