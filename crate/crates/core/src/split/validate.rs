use serde::{Deserialize, Serialize};
use serde_json::json;

use super::assign::{assign_by_regions, AssignMode};
use super::balance::balance_from_labels;
use super::regions::RegionSet;
use crate::ingest::Dataset;
use crate::leakage::{audit_labels, SetLabel, SplitAssignment};
use crate::spatial::DEFAULT_INDEX_CELL;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub targets: [f64; 3],
    pub proportion_tolerance: f64,
    pub leakage_threshold: f64,
    /// Largest acceptable val/test overlap ratio at `leakage_threshold`.
    pub leakage_bound: f64,
    pub balance_tolerance: f64,
    pub attribute_keys: Vec<String>,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            targets: super::partition::DEFAULT_TARGETS,
            proportion_tolerance: 0.02,
            leakage_threshold: 5.0,
            leakage_bound: 0.02,
            balance_tolerance: 0.05,
            attribute_keys: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub measured: serde_json::Value,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn check(name: &str, passed: bool, measured: serde_json::Value, detail: impl Into<String>) -> Check {
    Check {
        name: name.into(),
        passed,
        measured,
        detail: detail.into(),
    }
}

pub fn validate_split(
    ds: &Dataset,
    split: &SplitAssignment,
    regions: Option<&RegionSet>,
    cfg: &ValidationConfig,
) -> ValidationReport {
    let mut checks = Vec::new();
    let missing = split.missing(ds);
    let unknown: Vec<&String> = split.labels.keys().filter(|id| ds.index_of(id).is_none()).collect();
    let total = missing.is_empty() && unknown.is_empty();
    checks.push(check(
        "totality",
        total,
        json!({ "missing": missing, "unknown": unknown }),
        if total {
            "every sample has exactly one label".to_string()
        } else {
            format!("{} unlabeled, {} unknown ids", missing.len(), unknown.len())
        },
    ));
    if !total {
        for name in ["disjointness", "proportions", "balance"] {
            checks.push(check(name, false, json!(null), "skipped: split is not total"));
        }
        return ValidationReport { passed: false, checks };
    }
    let labels = split.resolve(ds).expect("totality checked");

    match audit_labels(ds, &labels, &[cfg.leakage_threshold], DEFAULT_INDEX_CELL) {
        Ok(report) => {
            let val = report.val.ratios[0];
            let test = report.test.ratios[0];
            let ok = [val, test].iter().flatten().all(|&r| r <= cfg.leakage_bound);
            checks.push(check(
                "disjointness",
                ok,
                json!({ "threshold": cfg.leakage_threshold, "val": val, "test": test, "bound": cfg.leakage_bound }),
                format!("val/test share within {} m of train", cfg.leakage_threshold),
            ));
        }
        Err(e) => checks.push(check("disjointness", false, json!(null), e.to_string())),
    }

    let balance = balance_from_labels(ds, &labels, &cfg.attribute_keys);
    let mut worst: f64 = 0.0;
    let mut proportions = serde_json::Map::new();
    for (k, set) in SetLabel::ASSIGNED.iter().enumerate() {
        let p = balance.proportions[set];
        proportions.insert(set.to_string(), json!(p));
        worst = worst.max(p.map_or(f64::INFINITY, |p| (p - cfg.targets[k]).abs()));
    }
    checks.push(check(
        "proportions",
        worst <= cfg.proportion_tolerance,
        json!({ "proportions": proportions, "targets": cfg.targets, "max_deviation": worst.is_finite().then_some(worst), "tolerance": cfg.proportion_tolerance }),
        "train/val/test shares of assigned samples",
    ));

    let dev = balance.max_deviation();
    checks.push(check(
        "balance",
        dev <= cfg.balance_tolerance,
        json!({ "max_deviation": dev, "tolerance": cfg.balance_tolerance, "keys": cfg.attribute_keys }),
        "largest per-set attribute ratio deviation from the full dataset",
    ));

    if let Some(regions) = regions {
        match assign_by_regions(ds, regions, AssignMode::PerSample) {
            Ok((derived, cuts)) => {
                let mismatched = ds
                    .samples()
                    .iter()
                    .zip(&labels)
                    .filter(|(s, &l)| derived.get(&s.id) != Some(l))
                    .count();
                checks.push(check(
                    "regions",
                    mismatched == 0,
                    json!({ "mismatched": mismatched, "cut_sequences": cuts.cut_sequences }),
                    "split agrees with per-sample region assignment",
                ));
            }
            Err(e) => checks.push(check("regions", false, json!(null), e.to_string())),
        }
    }

    ValidationReport {
        passed: checks.iter().all(|c| c.passed),
        checks,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Sample;

    fn dataset(points: &[(f64, f64)]) -> Dataset {
        let samples = points
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| Sample {
                id: format!("s{i}"),
                sequence_id: format!("q{i}"),
                map_id: "m".into(),
                x,
                y,
                t: 0,
                keyframe: true,
                attrs: Default::default(),
            })
            .collect();
        Dataset::new(samples).unwrap()
    }

    #[test]
    fn totality_lists_missing_ids() {
        let ds = dataset(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (3.0, 0.0), (4.0, 0.0)]);
        let mut split = SplitAssignment::from_dense(&ds, &[SetLabel::Train; 5], "t");
        for id in ["s1", "s2", "s4"] {
            split.labels.remove(id);
        }
        let r = validate_split(&ds, &split, None, &ValidationConfig::default());
        assert!(!r.passed);
        let t = r.check("totality").unwrap();
        assert!(!t.passed);
        assert_eq!(t.measured["missing"], json!(["s1", "s2", "s4"]));
    }

    #[test]
    fn disjoint_split_passes_disjointness() {
        // 70 train far from 15 val and 15 test.
        let mut pts = Vec::new();
        let mut labels = Vec::new();
        for i in 0..100 {
            let (x, l) = match i {
                0..=69 => (i as f64 * 10.0, SetLabel::Train),
                70..=84 => (5000.0 + i as f64 * 10.0, SetLabel::Val),
                _ => (9000.0 + i as f64 * 10.0, SetLabel::Test),
            };
            pts.push((x, 0.0));
            labels.push(l);
        }
        let ds = dataset(&pts);
        let split = SplitAssignment::from_dense(&ds, &labels, "t");
        let r = validate_split(&ds, &split, None, &ValidationConfig::default());
        assert!(r.check("disjointness").unwrap().passed);
        assert!(r.check("proportions").unwrap().passed);
        assert!(r.passed, "{r:?}");
    }
}
