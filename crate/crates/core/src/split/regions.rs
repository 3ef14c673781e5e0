use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geometry::{simple_polygon_defect, Point};
use super::SplitError;
use crate::leakage::SetLabel;

/// A named, set-labeled polygon in one map frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub name: String,
    pub map_id: String,
    pub set: SetLabel,
    /// Lower wins where regions overlap.
    pub priority: i64,
    pub polygon: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RegionSet {
    pub regions: Vec<Region>,
}

impl RegionSet {
    pub fn new(regions: Vec<Region>) -> Self {
        RegionSet { regions }
    }

    pub fn validate(&self) -> Result<(), SplitError> {
        let mut seen: BTreeSet<(&str, i64)> = BTreeSet::new();
        for r in &self.regions {
            if let Some(reason) = simple_polygon_defect(&r.polygon) {
                return Err(SplitError::InvalidPolygon {
                    name: r.name.clone(),
                    reason: reason.to_string(),
                });
            }
            if r.set == SetLabel::Unassigned {
                return Err(SplitError::InvalidPolygon {
                    name: r.name.clone(),
                    reason: "target set must be train, val or test".into(),
                });
            }
            if !seen.insert((r.map_id.as_str(), r.priority)) {
                return Err(SplitError::DuplicatePriority {
                    map_id: r.map_id.clone(),
                    priority: r.priority,
                });
            }
        }
        Ok(())
    }

    /// Regions of each map, ordered by priority.
    pub fn by_map(&self) -> BTreeMap<&str, Vec<&Region>> {
        let mut out: BTreeMap<&str, Vec<&Region>> = BTreeMap::new();
        for r in &self.regions {
            out.entry(r.map_id.as_str()).or_default().push(r);
        }
        for v in out.values_mut() {
            v.sort_by_key(|r| r.priority);
        }
        out
    }

    pub fn from_json_reader<R: Read>(r: R) -> Result<Self, SplitError> {
        let set: RegionSet = serde_json::from_reader(r)?;
        set.validate()?;
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, SplitError> {
        Self::from_json_reader(std::io::BufReader::new(std::fs::File::open(path)?))
    }

    /// Pretty JSON with a trailing newline. Output is stable for equal inputs.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("region set serializes");
        s.push('\n');
        s
    }

    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        w.write_all(self.to_json().as_bytes())
    }
}
