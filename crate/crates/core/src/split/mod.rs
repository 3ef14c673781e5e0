//! Split design: region assignment, attribute balance, automatic
//! partitioning, city-wise folds and split validation.

pub mod assign;
pub mod balance;
pub mod folds;
pub mod geometry;
pub mod partition;
pub mod regions;
pub mod validate;

use thiserror::Error;

use crate::leakage::{LeakageError, SetLabel};

pub use assign::{assign_by_regions, AssignMode, CutReport, Run, SequenceRuns};
pub use balance::{balance_report, BalanceReport};
pub use folds::{citywise_folds, Fold, FoldPreset, FoldSpec, FoldsFile};
pub use partition::{auto_partition, Partition, PartitionConfig, DEFAULT_TARGETS};
pub use regions::{Region, RegionSet};
pub use validate::{validate_split, ValidationConfig, ValidationReport};

#[derive(Debug, Error)]
pub enum SplitError {
    #[error("invalid polygon `{name}`: {reason}")]
    InvalidPolygon { name: String, reason: String },
    #[error("duplicate priority {priority} on map `{map_id}`")]
    DuplicatePriority { map_id: String, priority: i64 },
    #[error("invalid targets: {0}")]
    InvalidTargets(String),
    #[error("infeasible lock: {locked:.4} of samples locked to {set}, target {target}")]
    InfeasibleLock { set: SetLabel, locked: f64, target: f64 },
    #[error("fold `{fold}` lists map `{map_id}` as both train and val")]
    OverlappingMaps { fold: String, map_id: String },
    #[error("fold `{fold}` references map `{map_id}` absent from the dataset")]
    UnknownMap { fold: String, map_id: String },
    #[error(transparent)]
    Leakage(#[from] LeakageError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
