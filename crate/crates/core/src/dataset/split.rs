use rand::seq::SliceRandom;

use crate::dataset::{Dataset, Record, SplitTag};
use crate::error::{Error, Result};
use crate::rng::stream_rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions { train: 0.6, val: 0.2, test: 0.2 }
    }
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = SplitFractions { train, val, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.train, self.val, self.test];
        if all.iter().any(|f| !(0.0..=1.0).contains(f)) || (all.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::config("split_train", format!("fractions {all:?} must lie in [0, 1] and sum to 1")));
        }
        Ok(())
    }

    /// Per-split counts for `n` records: train and val rounded, test takes the rest.
    pub fn counts(&self, n: usize) -> [usize; 3] {
        let train = (self.train * n as f64).round() as usize;
        let val = ((self.val * n as f64).round() as usize).min(n - train);
        [train, val, n - train - val]
    }
}

/// Tag every record train/val/test, stratified by class. Within each class
/// the assignment follows a seeded shuffle.
pub fn split_dataset<R: Record>(mut ds: Dataset<R>, fractions: SplitFractions, seed: u64) -> Result<Dataset<R>> {
    fractions.validate()?;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); ds.num_classes];
    for (i, r) in ds.records.iter().enumerate() {
        by_class
            .get_mut(r.class())
            .ok_or_else(|| Error::Dataset(format!("record {i} has class {} of {}", r.class(), ds.num_classes)))?
            .push(i);
    }
    let mut tags = vec![SplitTag::Train; ds.records.len()];
    for (c, mut idx) in by_class.into_iter().enumerate() {
        if idx.len() < 3 {
            return Err(Error::Dataset(format!("class {c} has {} records; splitting needs at least 3", idx.len())));
        }
        idx.shuffle(&mut stream_rng(seed, c as u64));
        let [train, val, _] = fractions.counts(idx.len());
        for (k, &i) in idx.iter().enumerate() {
            tags[i] = if k < train {
                SplitTag::Train
            } else if k < train + val {
                SplitTag::Val
            } else {
                SplitTag::Test
            };
        }
    }
    ds.splits = tags;
    Ok(ds)
}
