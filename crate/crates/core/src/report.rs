//! Versioned, hash-stamped report bundles and plot-ready CSV series.
//!
//! All JSON written by this crate goes through [`canonical_json`]: object
//! keys sorted, floats in shortest round-trip form, two-space indentation
//! and a trailing newline. Equal inputs give byte-equal files.

use std::collections::BTreeMap;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::leakage::{audit_labels, write_split_csv, DistanceCurve, LeakageError, LeakageReport, SplitAssignment};
use crate::mapeval::{EvalReport, IouReport};
use crate::spatial::{CellHistogram, Heatmap, DEFAULT_INDEX_CELL};
use crate::split::balance::balance_from_labels;
use crate::split::{BalanceReport, CutReport, ValidationReport};

pub const TOOL_NAME: &str = "geosplit";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("section `{section}` is inconsistent: {reason}")]
    Inconsistent { section: String, reason: String },
    #[error("duplicate section `{0}`")]
    DuplicateSection(String),
}

/// Serialize with sorted keys and a trailing newline.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String, serde_json::Error> {
    // serde_json::Value keeps object keys in a BTreeMap, so going through it
    // sorts every level.
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<(String, u64), ReportError> {
    let mut f = std::fs::File::open(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut len = 0u64;
    loop {
        let n = f.read(&mut buf).map_err(|source| ReportError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        len += n as u64;
    }
    Ok((hex::encode(hasher.finalize()), len))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Current UTC time in RFC 3339, unless a timestamp is pinned.
pub fn timestamp(pinned: Option<&str>) -> String {
    match pinned {
        Some(t) => t.to_string(),
        None => chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "data", rename_all = "snake_case")]
pub enum Section {
    Leakage(LeakageReport),
    DistanceCurve(DistanceCurve),
    Balance(BalanceReport),
    Histogram(CellHistogram),
    Heatmap(Heatmap),
    Eval(EvalReport),
    Iou(IouReport),
    Cuts(CutReport),
    Validation(ValidationReport),
}

impl Section {
    pub fn kind(&self) -> &'static str {
        match self {
            Section::Leakage(_) => "leakage",
            Section::DistanceCurve(_) => "distance_curve",
            Section::Balance(_) => "balance",
            Section::Histogram(_) => "histogram",
            Section::Heatmap(_) => "heatmap",
            Section::Eval(_) => "eval",
            Section::Iou(_) => "iou",
            Section::Cuts(_) => "cuts",
            Section::Validation(_) => "validation",
        }
    }

    /// Re-check the embedded report's own invariants.
    pub fn check(&self) -> Result<(), String> {
        match self {
            Section::Leakage(r) => r.check(),
            Section::DistanceCurve(c) => c.check(),
            Section::Balance(b) => b.check(),
            Section::Histogram(h) => h.check(),
            Section::Heatmap(_) | Section::Iou(_) | Section::Validation(_) => Ok(()),
            Section::Eval(e) => e.check(),
            Section::Cuts(c) => c.check(),
        }
    }

    pub fn plot_csv(&self) -> String {
        match self {
            Section::Leakage(r) => r.plot_csv(),
            Section::DistanceCurve(c) => c.plot_csv(),
            Section::Balance(b) => b.plot_csv(),
            Section::Histogram(h) => h.plot_csv(),
            Section::Heatmap(h) => h.plot_csv(),
            Section::Eval(e) => e.plot_csv(),
            Section::Iou(r) => r.plot_csv(),
            Section::Cuts(c) => c.plot_csv(),
            Section::Validation(v) => v.plot_csv(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub tool: String,
    pub version: String,
    pub created: String,
    pub inputs: Vec<InputDigest>,
    pub sections: BTreeMap<String, Section>,
}

impl ReportBundle {
    pub fn to_json(&self) -> String {
        canonical_json(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ReportError> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Assemble named sections and digests of the input files into a bundle.
pub fn bundle(
    parts: Vec<(String, Section)>,
    inputs: &[PathBuf],
    created: Option<&str>,
) -> Result<ReportBundle, ReportError> {
    let mut sections = BTreeMap::new();
    for (name, section) in parts {
        section.check().map_err(|reason| ReportError::Inconsistent {
            section: name.clone(),
            reason,
        })?;
        if sections.insert(name.clone(), section).is_some() {
            return Err(ReportError::DuplicateSection(name));
        }
    }
    let inputs = inputs
        .iter()
        .map(|p| {
            let (sha256, bytes) = file_digest(p)?;
            Ok(InputDigest {
                path: p.to_string_lossy().into_owned(),
                sha256,
                bytes,
            })
        })
        .collect::<Result<_, ReportError>>()?;
    Ok(ReportBundle {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        created: timestamp(created),
        inputs,
        sections,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DigestMismatch {
    pub path: String,
    pub expected: String,
    /// `None` when the file could not be read.
    pub actual: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub mismatches: Vec<DigestMismatch>,
    /// Sections whose own invariants no longer hold.
    pub inconsistent: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatches.is_empty() && self.inconsistent.is_empty()
    }
}

/// Re-hash a bundle's inputs and re-check its sections. Relative input
/// paths resolve against `base`.
pub fn verify(bundle: &ReportBundle, base: Option<&Path>) -> VerifyReport {
    let mut out = VerifyReport::default();
    for input in &bundle.inputs {
        let p = PathBuf::from(&input.path);
        let p = match base {
            Some(b) if p.is_relative() => b.join(p),
            _ => p,
        };
        let actual = file_digest(&p).ok().map(|d| d.0);
        if actual.as_deref() != Some(input.sha256.as_str()) {
            out.mismatches.push(DigestMismatch {
                path: input.path.clone(),
                expected: input.sha256.clone(),
                actual,
            });
        }
    }
    for (name, s) in &bundle.sections {
        if let Err(reason) = s.check() {
            out.inconsistent.push(format!("{name}: {reason}"));
        }
    }
    out
}

/// Tidy CSV export of a report: one observation per row, fixed columns.
pub trait PlotData {
    fn plot_csv(&self) -> String;
}

fn opt(v: Option<f64>) -> String {
    crate::leakage::fmt_opt(v)
}

impl PlotData for LeakageReport {
    fn plot_csv(&self) -> String {
        self.to_csv()
    }
}

impl PlotData for DistanceCurve {
    fn plot_csv(&self) -> String {
        let mut out = String::from("set,threshold,ratio\n");
        for (name, pick) in [
            ("val", (|p: &crate::leakage::CurvePoint| p.val) as fn(&_) -> _),
            ("test", |p| p.test),
        ] {
            for p in &self.points {
                out.push_str(&format!("{name},{},{}\n", p.threshold, opt(pick(p))));
            }
        }
        out
    }
}

impl PlotData for CellHistogram {
    fn plot_csv(&self) -> String {
        let mut out = String::from("map_id,samples_per_cell,cells\n");
        for (map, h) in &self.maps {
            for b in &h.marginal {
                out.push_str(&format!("{map},{},{}\n", b.samples_per_cell, b.cells));
            }
        }
        out
    }
}

impl PlotData for Heatmap {
    fn plot_csv(&self) -> String {
        let mut out = String::from("map_id,i,j,x,y,count\n");
        for (di, row) in self.counts.iter().enumerate() {
            for (dj, &count) in row.iter().enumerate() {
                let (i, j) = (self.i0 + di as i64, self.j0 + dj as i64);
                out.push_str(&format!(
                    "{},{i},{j},{},{},{count}\n",
                    self.map_id,
                    i as f64 * self.cell_size,
                    j as f64 * self.cell_size
                ));
            }
        }
        out
    }
}

impl PlotData for BalanceReport {
    fn plot_csv(&self) -> String {
        let mut out = String::from("key,value,set,ratio\n");
        for (key, attr) in &self.attributes {
            for (value, v) in &attr.values {
                for (set, r) in &v.per_set {
                    out.push_str(&format!("{key},{value},{set},{}\n", opt(*r)));
                }
                out.push_str(&format!("{key},{value},full,{}\n", v.full));
            }
        }
        out
    }
}

impl PlotData for EvalReport {
    fn plot_csv(&self) -> String {
        self.to_csv()
    }
}

impl PlotData for IouReport {
    fn plot_csv(&self) -> String {
        let mut out = String::from("class,intersection,union,iou\n");
        for (class, c) in &self.classes {
            out.push_str(&format!("{class},{},{},{}\n", c.intersection, c.union, opt(c.iou)));
        }
        out
    }
}

impl PlotData for CutReport {
    fn plot_csv(&self) -> String {
        let mut out = String::from("sequence_id,run,set,first,last,samples\n");
        for s in &self.sequences {
            for (k, r) in s.runs.iter().enumerate() {
                out.push_str(&format!(
                    "{},{k},{},{},{},{}\n",
                    s.sequence_id, r.set, r.first, r.last, r.samples
                ));
            }
        }
        out
    }
}

impl PlotData for ValidationReport {
    fn plot_csv(&self) -> String {
        let mut out = String::from("check,passed\n");
        for c in &self.checks {
            out.push_str(&format!("{},{}\n", c.name, c.passed));
        }
        out
    }
}

/// Summary written next to every split file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub tool: String,
    pub version: String,
    pub created: String,
    pub provenance: String,
    /// Input role (`samples`, `regions`, `lock`, ...) to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
    pub counts: BTreeMap<crate::leakage::SetLabel, usize>,
    pub proportions: BTreeMap<crate::leakage::SetLabel, Option<f64>>,
    /// Val/test overlap ratio at 5 m; absent when there is no train sample.
    pub leakage_5m: Option<BTreeMap<String, Option<f64>>>,
    pub balance_max_deviation: f64,
    pub balance_keys: Vec<String>,
    pub cut_sequences: usize,
    /// SHA-256 of the accompanying split.csv.
    pub split_sha256: String,
}

pub const MANIFEST_LEAKAGE_THRESHOLD: f64 = 5.0;

/// Files written by `assign` and by the service export.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitOutputs {
    pub split_csv: Vec<u8>,
    pub manifest_json: String,
    pub cuts_json: String,
    pub manifest: SplitManifest,
}

/// Render split.csv, manifest.json and cuts.json for a split.
///
/// `inputs` maps a role name to the bytes' SHA-256, so the output does not
/// depend on where the inputs live.
pub fn split_outputs(
    ds: &Dataset,
    split: &SplitAssignment,
    cuts: &CutReport,
    inputs: BTreeMap<String, String>,
    attribute_keys: &[String],
    created: Option<&str>,
) -> Result<SplitOutputs, LeakageError> {
    let labels = split.resolve(ds)?;
    let mut split_csv = Vec::new();
    write_split_csv(ds, split, &mut split_csv)?;
    let balance = balance_from_labels(ds, &labels, attribute_keys);
    let leakage_5m = match audit_labels(ds, &labels, &[MANIFEST_LEAKAGE_THRESHOLD], DEFAULT_INDEX_CELL) {
        Ok(r) => Some(
            [
                ("test".to_string(), r.test.ratios[0]),
                ("val".to_string(), r.val.ratios[0]),
            ]
            .into_iter()
            .collect(),
        ),
        Err(LeakageError::NoTrainSamples) => None,
        Err(e) => return Err(e),
    };
    let manifest = SplitManifest {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        created: timestamp(created),
        provenance: split.provenance.clone(),
        inputs,
        counts: balance.counts.clone(),
        proportions: balance.proportions.clone(),
        leakage_5m,
        balance_max_deviation: balance.max_deviation(),
        balance_keys: attribute_keys.to_vec(),
        cut_sequences: cuts.cut_sequences,
        split_sha256: sha256_hex(&split_csv),
    };
    Ok(SplitOutputs {
        split_csv,
        manifest_json: canonical_json(&manifest).expect("manifest serializes"),
        cuts_json: canonical_json(cuts).expect("cuts serialize"),
        manifest,
    })
}

impl SplitOutputs {
    /// Write `split.csv`, `manifest.json` and `cuts.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<(), ReportError> {
        std::fs::create_dir_all(dir).map_err(|source| ReportError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        for (name, bytes) in [
            ("split.csv", self.split_csv.as_slice()),
            ("manifest.json", self.manifest_json.as_bytes()),
            ("cuts.json", self.cuts_json.as_bytes()),
        ] {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|source| ReportError::Io { path, source })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leakage::CurvePoint;
    use crate::spatial::{MapHistogram, MarginalBin};

    #[test]
    fn canonical_sorts_keys() {
        let mut m = std::collections::HashMap::new();
        m.insert("b", 1.5);
        m.insert("a", 0.1);
        assert_eq!(canonical_json(&m).unwrap(), "{\n  \"a\": 0.1,\n  \"b\": 1.5\n}\n");
    }

    #[test]
    fn curve_rows() {
        let c = DistanceCurve {
            points: (1..=3)
                .map(|k| CurvePoint {
                    threshold: k as f64 * 5.0,
                    val: Some(0.1 * k as f64),
                    test: None,
                })
                .collect(),
        };
        let csv = c.plot_csv();
        assert_eq!(csv.lines().count(), 1 + 6);
        assert!(csv.contains("test,15,\n"));
    }

    #[test]
    fn marginal_rows_and_empty() {
        let mut h = CellHistogram {
            cell_size: 60.0,
            maps: BTreeMap::new(),
        };
        assert_eq!(h.plot_csv(), "map_id,samples_per_cell,cells\n");
        h.maps.insert(
            "m".into(),
            MapHistogram {
                samples: 20,
                cells: Vec::new(),
                marginal: vec![
                    MarginalBin {
                        samples_per_cell: 1,
                        cells: 10,
                    },
                    MarginalBin {
                        samples_per_cell: 5,
                        cells: 2,
                    },
                ],
            },
        );
        assert_eq!(h.plot_csv(), "map_id,samples_per_cell,cells\nm,1,10\nm,5,2\n");
        assert_eq!(DistanceCurve::default().plot_csv(), "set,threshold,ratio\n");
    }
}
