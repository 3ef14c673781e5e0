//! City-wise cross-validation folds (Far Extrapolation).

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::SplitError;
use crate::ingest::Dataset;
use crate::leakage::{SetLabel, SplitAssignment};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub name: String,
    pub train_maps: Vec<String>,
    pub val_maps: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FoldsFile {
    pub folds: Vec<FoldSpec>,
}

impl FoldsFile {
    pub fn load(path: &Path) -> Result<Self, SplitError> {
        Ok(serde_json::from_reader(std::io::BufReader::new(std::fs::File::open(
            path,
        )?))?)
    }
}

// Map identifiers as they appear in the public dataset devkits.
pub const NUSCENES_BOSTON: &str = "boston-seaport";
pub const NUSCENES_ONENORTH: &str = "singapore-onenorth";
pub const NUSCENES_QUEENSTOWN: &str = "singapore-queenstown";
pub const NUSCENES_HOLLAND_VILLAGE: &str = "singapore-hollandvillage";

pub const AV2_MIAMI: &str = "MIA";
pub const AV2_PITTSBURGH: &str = "PIT";
/// Austin, Detroit, Palo Alto and Washington DC.
pub const AV2_REST: [&str; 4] = ["ATX", "DTW", "PAO", "WDC"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldPreset {
    Nuscenes,
    Argoverse2,
}

impl FromStr for FoldPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nuscenes" => Ok(FoldPreset::Nuscenes),
            "argoverse2" | "av2" => Ok(FoldPreset::Argoverse2),
            other => Err(format!("unknown fold preset `{other}` (nuscenes, argoverse2)")),
        }
    }
}

fn fold(name: &str, train: &[&str], val: &[&str]) -> FoldSpec {
    FoldSpec {
        name: name.into(),
        train_maps: train.iter().map(|s| s.to_string()).collect(),
        val_maps: val.iter().map(|s| s.to_string()).collect(),
    }
}

impl FoldPreset {
    pub fn folds(self) -> FoldsFile {
        let folds = match self {
            FoldPreset::Nuscenes => vec![
                fold(
                    "A",
                    &[NUSCENES_BOSTON, NUSCENES_ONENORTH],
                    &[NUSCENES_QUEENSTOWN, NUSCENES_HOLLAND_VILLAGE],
                ),
                fold(
                    "B",
                    &[NUSCENES_BOSTON, NUSCENES_QUEENSTOWN, NUSCENES_HOLLAND_VILLAGE],
                    &[NUSCENES_ONENORTH],
                ),
            ],
            FoldPreset::Argoverse2 => {
                let with_rest = |first: &'static str| {
                    let mut v = vec![first];
                    v.extend(AV2_REST);
                    v
                };
                vec![
                    fold("A", &[AV2_MIAMI, AV2_PITTSBURGH], &AV2_REST),
                    fold("B", &with_rest(AV2_MIAMI), &[AV2_PITTSBURGH]),
                    fold("C", &with_rest(AV2_PITTSBURGH), &[AV2_MIAMI]),
                ]
            }
        };
        FoldsFile { folds }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSize {
    pub train: usize,
    pub val: usize,
    pub unassigned: usize,
    /// Train share of the fold's assigned samples.
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub spec: FoldSpec,
    pub size: FoldSize,
    #[serde(skip)]
    pub split: SplitAssignment,
}

pub fn citywise_folds(ds: &Dataset, folds: &[FoldSpec]) -> Result<Vec<Fold>, SplitError> {
    let mut out = Vec::with_capacity(folds.len());
    for spec in folds {
        let train: BTreeSet<&str> = spec.train_maps.iter().map(String::as_str).collect();
        let val: BTreeSet<&str> = spec.val_maps.iter().map(String::as_str).collect();
        if let Some(m) = train.intersection(&val).next() {
            return Err(SplitError::OverlappingMaps {
                fold: spec.name.clone(),
                map_id: m.to_string(),
            });
        }
        if let Some(m) = train.iter().chain(&val).find(|m| !ds.maps().contains(**m)) {
            return Err(SplitError::UnknownMap {
                fold: spec.name.clone(),
                map_id: m.to_string(),
            });
        }
        let labels: Vec<SetLabel> = ds
            .samples()
            .iter()
            .map(|s| {
                if train.contains(s.map_id.as_str()) {
                    SetLabel::Train
                } else if val.contains(s.map_id.as_str()) {
                    SetLabel::Val
                } else {
                    SetLabel::Unassigned
                }
            })
            .collect();
        let count = |l: SetLabel| labels.iter().filter(|&&x| x == l).count();
        let (t, v) = (count(SetLabel::Train), count(SetLabel::Val));
        out.push(Fold {
            spec: spec.clone(),
            size: FoldSize {
                train: t,
                val: v,
                unassigned: ds.len() - t - v,
                train_fraction: (t + v > 0).then(|| t as f64 / (t + v) as f64),
            },
            split: SplitAssignment::from_dense(ds, &labels, format!("fold({})", spec.name)),
        });
    }
    Ok(out)
}
