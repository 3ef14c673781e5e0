use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::geometry::{point_in_polygon, BBox};
use super::regions::{Region, RegionSet};
use super::SplitError;
use crate::ingest::Dataset;
use crate::leakage::{SetLabel, SplitAssignment};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignMode {
    PerSample,
    PerSequence,
}

impl FromStr for AssignMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "per_sample" | "per-sample" | "sample" => Ok(AssignMode::PerSample),
            "per_sequence" | "per-sequence" | "sequence" => Ok(AssignMode::PerSequence),
            other => Err(format!("unknown assignment mode `{other}`")),
        }
    }
}

/// A maximal stretch of consecutive samples of one sequence sharing a label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub set: SetLabel,
    pub first: String,
    pub last: String,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRuns {
    pub sequence_id: String,
    pub runs: Vec<Run>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CutReport {
    pub sequences: Vec<SequenceRuns>,
    /// Sequences split into more than one run.
    pub cut_sequences: usize,
}

impl CutReport {
    /// Build runs from dense per-sample labels.
    pub fn from_labels(ds: &Dataset, labels: &[SetLabel]) -> Self {
        let samples = ds.samples();
        let mut sequences = Vec::with_capacity(ds.sequences().len());
        let mut cut = 0;
        for (seq_id, members) in ds.sequences() {
            let mut runs: Vec<Run> = Vec::new();
            for &idx in members {
                match runs.last_mut() {
                    Some(run) if run.set == labels[idx] => {
                        run.last = samples[idx].id.clone();
                        run.samples += 1;
                    }
                    _ => runs.push(Run {
                        set: labels[idx],
                        first: samples[idx].id.clone(),
                        last: samples[idx].id.clone(),
                        samples: 1,
                    }),
                }
            }
            if runs.len() > 1 {
                cut += 1;
            }
            sequences.push(SequenceRuns {
                sequence_id: seq_id.clone(),
                runs,
            });
        }
        CutReport {
            sequences,
            cut_sequences: cut,
        }
    }

    pub fn check(&self) -> Result<(), String> {
        let mut cut = 0;
        for s in &self.sequences {
            if s.runs.windows(2).any(|w| w[0].set == w[1].set) {
                return Err(format!("sequence `{}` has adjacent runs with one label", s.sequence_id));
            }
            if s.runs.len() > 1 {
                cut += 1;
            }
        }
        if cut != self.cut_sequences {
            return Err("cut count disagrees with runs".into());
        }
        Ok(())
    }
}

struct Prepared<'a> {
    region: &'a Region,
    bbox: BBox,
}

/// Per-sample labels: the set of the highest-priority region containing
/// each sample, or unassigned.
pub fn region_labels(ds: &Dataset, regions: &RegionSet) -> Result<Vec<SetLabel>, SplitError> {
    regions.validate()?;
    let by_map: std::collections::BTreeMap<&str, Vec<Prepared>> = regions
        .by_map()
        .into_iter()
        .map(|(m, rs)| {
            let prepared = rs
                .into_iter()
                .map(|region| Prepared {
                    region,
                    bbox: BBox::of(&region.polygon),
                })
                .collect();
            (m, prepared)
        })
        .collect();
    Ok(ds
        .samples()
        .par_iter()
        .map(|s| {
            let p = [s.x, s.y];
            by_map
                .get(s.map_id.as_str())
                .and_then(|rs| {
                    rs.iter()
                        .find(|r| r.bbox.contains(p) && point_in_polygon(p, &r.region.polygon))
                })
                .map_or(SetLabel::Unassigned, |r| r.region.set)
        })
        .collect())
}

/// Majority label; ties go to train first, then val, test, unassigned.
fn majority(labels: impl Iterator<Item = SetLabel>) -> SetLabel {
    let mut counts = [0usize; 4];
    for l in labels {
        counts[l.index()] += 1;
    }
    let best = *counts.iter().max().unwrap_or(&0);
    SetLabel::ALL
        .into_iter()
        .find(|l| counts[l.index()] == best)
        .unwrap_or(SetLabel::Unassigned)
}

pub fn assign_by_regions(
    ds: &Dataset,
    regions: &RegionSet,
    mode: AssignMode,
) -> Result<(SplitAssignment, CutReport), SplitError> {
    let mut labels = region_labels(ds, regions)?;
    if mode == AssignMode::PerSequence {
        for members in ds.sequences().values() {
            let label = majority(members.iter().map(|&i| labels[i]));
            for &i in members {
                labels[i] = label;
            }
        }
    }
    let cuts = CutReport::from_labels(ds, &labels);
    let provenance = match mode {
        AssignMode::PerSample => "regions(per_sample)",
        AssignMode::PerSequence => "regions(per_sequence)",
    };
    Ok((SplitAssignment::from_dense(ds, &labels, provenance), cuts))
}
