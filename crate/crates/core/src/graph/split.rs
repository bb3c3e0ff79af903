use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Disjoint meta-train / meta-validation / meta-test class sets.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSplit {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl ClassSplit {
    pub fn new(train: Vec<usize>, val: Vec<usize>, test: Vec<usize>) -> Self {
        ClassSplit { train, val, test }
    }

    /// Checks pairwise disjointness and that every id is below `num_classes`.
    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let mut seen = BTreeSet::new();
        for (name, part) in [("train", &self.train), ("val", &self.val), ("test", &self.test)] {
            for &c in part {
                if c >= num_classes {
                    return Err(Error::InvalidSplit(format!(
                        "{name} lists unknown class {c} (graph has {num_classes} classes)"
                    )));
                }
                if !seen.insert(c) {
                    return Err(Error::InvalidSplit(format!("class {c} appears in more than one split")));
                }
            }
        }
        Ok(())
    }

    /// Contiguous split of `0..num_classes` into `(train, val, test)` counts.
    pub fn contiguous(train: usize, val: usize, test: usize) -> Self {
        ClassSplit {
            train: (0..train).collect(),
            val: (train..train + val).collect(),
            test: (train + val..train + val + test).collect(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).expect("split serializes");
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// Reads `splits.json` and validates it against the graph's label alphabet.
pub fn load_class_split(path: impl AsRef<Path>, num_classes: usize) -> Result<ClassSplit> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let split: ClassSplit = serde_json::from_str(&text)
        .map_err(|e| Error::parse(path, e.line(), e.to_string()))?;
    split.validate(num_classes)?;
    Ok(split)
}
