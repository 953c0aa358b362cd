//! Cost-sensitive policy learners.

use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

pub mod dlm;
pub mod filter_tree;
pub mod tree;

pub use dlm::{dlm_train, dlm_update, DlmConfig};
pub use filter_tree::{filter_tree_predict, filter_tree_train, FilterTreeModel};
pub use tree::{binary_tree_learn, BinaryClassifier, BinaryTreeConfig, WeightedExample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LearnerKind {
    Dlm,
    FilterTree,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 2] = [LearnerKind::Dlm, LearnerKind::FilterTree];
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LearnerKind::Dlm => "DLM",
            LearnerKind::FilterTree => "FT",
        })
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "dlm" => Ok(LearnerKind::Dlm),
            "ft" | "filter-tree" | "filtertree" => Ok(LearnerKind::FilterTree),
            other => Err(invalid(format!("unknown learner '{other}'"))),
        }
    }
}
