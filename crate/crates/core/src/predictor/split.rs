use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::ItemRecord;
use crate::error::{Error, Result};

pub const DEFAULT_PROPORTIONS: (f64, f64, f64) = (0.603, 0.196, 0.201);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitPart {
    Train,
    Validation,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<String>,
    pub validation: Vec<String>,
    pub test: Vec<String>,
    pub proportions: (f64, f64, f64),
}

impl DatasetSplit {
    pub fn part(&self, part: SplitPart) -> &[String] {
        match part {
            SplitPart::Train => &self.train,
            SplitPart::Validation => &self.validation,
            SplitPart::Test => &self.test,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Partitions parent items (those without a `parent_id`) by `proportions`
/// after a seeded shuffle; every patch follows its parent.
pub fn split_dataset(
    items: &[ItemRecord],
    proportions: (f64, f64, f64),
    seed: u64,
) -> Result<DatasetSplit> {
    let (p_train, p_val, p_test) = proportions;
    if [p_train, p_val, p_test].iter().any(|p| !(*p >= 0.0))
        || (p_train + p_val + p_test - 1.0).abs() > 1e-6
    {
        return Err(Error::Invalid(format!(
            "split proportions {proportions:?} must be non-negative and sum to 1"
        )));
    }
    let mut parents: Vec<&str> = items
        .iter()
        .filter(|i| i.parent_id.is_none())
        .map(|i| i.item_id.as_str())
        .collect();
    parents.sort_unstable();
    parents.dedup();
    if parents.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "splitting needs at least 3 parent images, got {}",
            parents.len()
        )));
    }
    parents.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n = parents.len() as f64;
    let n_train = (n * p_train).round() as usize;
    let n_val = ((n * p_val).round() as usize).min(parents.len() - n_train);

    let mut assigned: HashMap<&str, SplitPart> = HashMap::new();
    for (i, p) in parents.iter().enumerate() {
        let part = if i < n_train {
            SplitPart::Train
        } else if i < n_train + n_val {
            SplitPart::Validation
        } else {
            SplitPart::Test
        };
        assigned.insert(p, part);
    }
    let mut split = DatasetSplit {
        train: vec![],
        validation: vec![],
        test: vec![],
        proportions,
    };
    let mut ordered: Vec<&ItemRecord> = items.iter().collect();
    ordered.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    for item in ordered {
        let part = match &item.parent_id {
            None => assigned[item.item_id.as_str()],
            Some(parent) => *assigned.get(parent.as_str()).ok_or_else(|| {
                Error::Invalid(format!(
                    "patch `{}` refers to unknown parent `{parent}`",
                    item.item_id
                ))
            })?,
        };
        let list = match part {
            SplitPart::Train => &mut split.train,
            SplitPart::Validation => &mut split.validation,
            SplitPart::Test => &mut split.test,
        };
        if list.last() != Some(&item.item_id) {
            list.push(item.item_id.clone());
        }
    }
    Ok(split)
}
