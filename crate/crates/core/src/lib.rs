//! Geographic leakage auditing, disjoint split design and vector map
//! evaluation for driving pose logs.

pub mod ingest;
pub mod leakage;
pub mod mapeval;
pub mod report;
pub mod spatial;
pub mod split;

#[cfg(feature = "service")]
pub mod service;

#[cfg(feature = "cli")]
pub mod cli;

pub use ingest::{Dataset, ElementClass, FrameElements, MapElement, Sample};
pub use leakage::{SetLabel, SplitAssignment};
