use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::config::SplitSizes;
use super::dataset::DatasetRecord;
use crate::rng::{StreamKey, Tag};
use crate::{Error, Result};

/// Record indices of the three splits, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub seed: u64,
    pub flat: bool,
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// Disjoint random train/validation/test subsets. Unless `flat`, whole
/// large-scale realizations are assigned to one split, so the sizes must be
/// multiples of the records per realization.
pub fn split_dataset(records: &[DatasetRecord], sizes: SplitSizes, seed: u64, flat: bool) -> Result<SplitIndices> {
    let total = records.len();
    if sizes.total() > total {
        return Err(Error::Split(format!("requested {} records from {total}", sizes.total())));
    }
    let mut rng = StreamKey::new(seed).child(Tag::Split, flat as u64).rng();

    let order: Vec<usize> = if flat {
        let mut idx: Vec<usize> = (0..total).collect();
        idx.shuffle(&mut rng);
        idx
    } else {
        let mut by_index: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (i, r) in records.iter().enumerate() {
            by_index.entry(r.ls_index).or_default().push(i);
        }
        let mut groups: Vec<(u32, Vec<usize>)> = by_index.into_iter().collect();
        let size = groups.first().map_or(0, |g| g.1.len());
        if groups.iter().any(|g| g.1.len() != size) {
            return Err(Error::Split("large-scale realizations hold different record counts".into()));
        }
        for s in [sizes.train, sizes.val, sizes.test] {
            if size > 0 && s % size != 0 {
                return Err(Error::Split(format!(
                    "split size {s} is not a multiple of the {size} records per large-scale realization"
                )));
            }
        }
        groups.shuffle(&mut rng);
        groups.into_iter().flat_map(|g| g.1).collect()
    };

    let take = |from: usize, n: usize| {
        let mut v = order[from..from + n].to_vec();
        v.sort_unstable();
        v
    };
    Ok(SplitIndices {
        seed,
        flat,
        train: take(0, sizes.train),
        val: take(sizes.train, sizes.val),
        test: take(sizes.train + sizes.val, sizes.test),
    })
}
