//! Inter-set geographic overlap between training and evaluation samples.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{self, Read, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;
use crate::spatial::{SpatialError, SpatialIndex, DEFAULT_INDEX_CELL};

#[derive(Debug, Error)]
pub enum LeakageError {
    #[error("split is not total: {} sample(s) without a label (first: {})", missing.len(), missing.first().map(String::as_str).unwrap_or("-"))]
    NotTotal { missing: Vec<String> },
    #[error("split labels unknown sample `{0}`")]
    UnknownSample(String),
    #[error("split has no train samples")]
    NoTrainSamples,
    #[error("invalid thresholds: {0}")]
    InvalidThresholds(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("split file line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Spatial(#[from] SpatialError),
    #[error("io error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetLabel {
    Train,
    Val,
    Test,
    Unassigned,
}

impl SetLabel {
    pub const ALL: [SetLabel; 4] = [SetLabel::Train, SetLabel::Val, SetLabel::Test, SetLabel::Unassigned];
    pub const ASSIGNED: [SetLabel; 3] = [SetLabel::Train, SetLabel::Val, SetLabel::Test];
    pub const EVAL: [SetLabel; 2] = [SetLabel::Val, SetLabel::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            SetLabel::Train => "train",
            SetLabel::Val => "val",
            SetLabel::Test => "test",
            SetLabel::Unassigned => "unassigned",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for SetLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SetLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(SetLabel::Train),
            "val" => Ok(SetLabel::Val),
            "test" => Ok(SetLabel::Test),
            "unassigned" => Ok(SetLabel::Unassigned),
            other => Err(format!("unknown set `{other}`")),
        }
    }
}

/// Mapping from sample id to set label.
///
/// The map may be partial while being read from disk; every analysis first
/// resolves it against a dataset, which fails unless it is total.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub labels: BTreeMap<String, SetLabel>,
    pub provenance: String,
}

impl SplitAssignment {
    pub fn from_dense(ds: &Dataset, labels: &[SetLabel], provenance: impl Into<String>) -> Self {
        assert_eq!(ds.len(), labels.len(), "one label per sample");
        SplitAssignment {
            labels: ds
                .samples()
                .iter()
                .zip(labels)
                .map(|(s, &l)| (s.id.clone(), l))
                .collect(),
            provenance: provenance.into(),
        }
    }

    pub fn get(&self, id: &str) -> Option<SetLabel> {
        self.labels.get(id).copied()
    }

    /// Labels in dataset order.
    pub fn resolve(&self, ds: &Dataset) -> Result<Vec<SetLabel>, LeakageError> {
        if let Some(id) = self.labels.keys().find(|id| ds.index_of(id).is_none()) {
            return Err(LeakageError::UnknownSample(id.clone()));
        }
        let missing = self.missing(ds);
        if !missing.is_empty() {
            return Err(LeakageError::NotTotal { missing });
        }
        Ok(ds.samples().iter().map(|s| self.labels[&s.id]).collect())
    }

    /// Dataset sample ids with no label, in dataset order.
    pub fn missing(&self, ds: &Dataset) -> Vec<String> {
        ds.samples()
            .iter()
            .filter(|s| !self.labels.contains_key(&s.id))
            .map(|s| s.id.clone())
            .collect()
    }

    pub fn counts(&self) -> BTreeMap<SetLabel, usize> {
        let mut out: BTreeMap<SetLabel, usize> = SetLabel::ALL.iter().map(|&l| (l, 0)).collect();
        for l in self.labels.values() {
            *out.get_mut(l).unwrap() += 1;
        }
        out
    }
}

pub fn read_split_csv<R: Read>(reader: R) -> Result<SplitAssignment, LeakageError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| LeakageError::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    if headers.len() < 2 || &headers[0] != "sample_id" || &headers[1] != "set" {
        return Err(LeakageError::Parse {
            line: 1,
            message: "expected header `sample_id,set`".into(),
        });
    }
    let mut labels = BTreeMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| LeakageError::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let set: SetLabel = rec[1]
            .parse()
            .map_err(|message| LeakageError::Parse { line, message })?;
        if labels.insert(rec[0].to_string(), set).is_some() {
            return Err(LeakageError::Parse {
                line,
                message: format!("duplicate sample id `{}`", &rec[0]),
            });
        }
    }
    Ok(SplitAssignment {
        labels,
        provenance: "split.csv".into(),
    })
}

pub fn load_split_csv(path: &Path) -> Result<SplitAssignment, LeakageError> {
    let mut split = read_split_csv(io::BufReader::new(std::fs::File::open(path)?))?;
    split.provenance = format!(
        "file:{}",
        path.file_name()
            .map_or_else(String::new, |n| n.to_string_lossy().into_owned())
    );
    Ok(split)
}

/// Writes `sample_id,set`, one row per dataset sample in dataset order.
pub fn write_split_csv<W: Write>(ds: &Dataset, split: &SplitAssignment, mut w: W) -> Result<(), LeakageError> {
    let labels = split.resolve(ds)?;
    writeln!(w, "sample_id,set")?;
    for (s, l) in ds.samples().iter().zip(labels) {
        if s.id.contains([',', '"', '\n', '\r']) {
            writeln!(w, "\"{}\",{}", s.id.replace('"', "\"\""), l)?;
        } else {
            writeln!(w, "{},{}", s.id, l)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub min: f64,
    pub p05: f64,
    pub p25: f64,
    pub p50: f64,
    pub p75: f64,
    pub p95: f64,
    pub max: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles of an ascending slice.
    fn of_sorted(sorted: &[f64]) -> Option<Self> {
        if sorted.is_empty() {
            return None;
        }
        let rank = |p: f64| {
            let k = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
            sorted[k.clamp(1, sorted.len()) - 1]
        };
        Some(Percentiles {
            min: sorted[0],
            p05: rank(5.0),
            p25: rank(25.0),
            p50: rank(50.0),
            p75: rank(75.0),
            p95: rank(95.0),
            max: sorted[sorted.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetLeakage {
    /// Samples carrying this label.
    pub samples: usize,
    /// Samples with a defined nearest-train distance (the ratio denominator).
    pub evaluated: usize,
    /// Samples on maps that have no train sample.
    pub no_train_map: usize,
    /// One entry per threshold; `None` when nothing could be evaluated.
    pub ratios: Vec<Option<f64>>,
    pub percentiles: Option<Percentiles>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageReport {
    pub thresholds: Vec<f64>,
    pub train_samples: usize,
    pub val: SetLeakage,
    pub test: SetLeakage,
    /// Same audit restricted to keyframes on both sides; present when the
    /// dataset mixes keyframes and non-keyframes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyframes_only: Option<Box<LeakageReport>>,
}

impl LeakageReport {
    pub fn set(&self, label: SetLabel) -> Option<&SetLeakage> {
        match label {
            SetLabel::Val => Some(&self.val),
            SetLabel::Test => Some(&self.test),
            _ => None,
        }
    }

    pub fn ratio(&self, label: SetLabel, threshold: f64) -> Option<f64> {
        let k = self.thresholds.iter().position(|&t| t == threshold)?;
        self.set(label)?.ratios[k]
    }

    /// Re-check the report's own invariants.
    pub fn check(&self) -> Result<(), String> {
        for (name, s) in [("val", &self.val), ("test", &self.test)] {
            if s.ratios.len() != self.thresholds.len() {
                return Err(format!("{name}: one ratio per threshold expected"));
            }
            let vals: Vec<f64> = s.ratios.iter().flatten().copied().collect();
            if vals.iter().any(|r| !(0.0..=1.0).contains(r)) {
                return Err(format!("{name}: ratio outside [0, 1]"));
            }
            if vals.windows(2).any(|w| w[1] < w[0]) {
                return Err(format!("{name}: ratios decrease with threshold"));
            }
            if s.evaluated + s.no_train_map != s.samples {
                return Err(format!("{name}: sample tallies disagree"));
            }
        }
        if let Some(k) = &self.keyframes_only {
            k.check()?;
        }
        Ok(())
    }

    /// `set,threshold,ratio` rows; an undefined ratio is an empty cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("set,threshold,ratio\n");
        for (name, s) in [("val", &self.val), ("test", &self.test)] {
            for (t, r) in self.thresholds.iter().zip(&s.ratios) {
                out.push_str(&format!("{name},{t},{}\n", fmt_opt(*r)));
            }
        }
        out
    }
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn check_thresholds(thresholds: &[f64]) -> Result<(), LeakageError> {
    if thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(LeakageError::InvalidThresholds(
            "thresholds must be positive and finite".into(),
        ));
    }
    if thresholds.windows(2).any(|w| w[1] < w[0]) {
        return Err(LeakageError::InvalidThresholds(
            "thresholds must be sorted ascending".into(),
        ));
    }
    Ok(())
}

/// Nearest-train distances of every val and test sample.
struct EvalDistances {
    train: usize,
    /// Sorted finite distances, plus count of samples on maps without train.
    sets: [(usize, Vec<f64>, usize); 2],
}

impl EvalDistances {
    fn compute(ds: &Dataset, labels: &[SetLabel], keyframes_only: bool, cell_size: f64) -> Result<Self, LeakageError> {
        let samples = ds.samples();
        let keep = |i: usize| !keyframes_only || samples[i].keyframe;
        let train: Vec<usize> = (0..ds.len())
            .filter(|&i| labels[i] == SetLabel::Train && keep(i))
            .collect();
        let index = SpatialIndex::from_indices(ds, train.iter().copied(), cell_size)?;
        let mut sets: [(usize, Vec<f64>, usize); 2] = Default::default();
        for (slot, label) in SetLabel::EVAL.iter().enumerate() {
            let members: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] == *label && keep(i)).collect();
            let dists = index.nearest_distances(ds, &members);
            let mut finite: Vec<f64> = dists.iter().flatten().copied().collect();
            finite.sort_by(f64::total_cmp);
            let none = dists.len() - finite.len();
            sets[slot] = (members.len(), finite, none);
        }
        Ok(EvalDistances {
            train: train.len(),
            sets,
        })
    }

    fn ratio(&self, slot: usize, threshold: f64) -> Option<f64> {
        let sorted = &self.sets[slot].1;
        if sorted.is_empty() {
            return None;
        }
        let within = sorted.partition_point(|&d| d < threshold);
        Some(within as f64 / sorted.len() as f64)
    }

    fn set_report(&self, slot: usize, thresholds: &[f64]) -> SetLeakage {
        let (samples, sorted, none) = &self.sets[slot];
        SetLeakage {
            samples: *samples,
            evaluated: sorted.len(),
            no_train_map: *none,
            ratios: thresholds.iter().map(|&t| self.ratio(slot, t)).collect(),
            percentiles: Percentiles::of_sorted(sorted),
        }
    }

    fn report(&self, thresholds: &[f64]) -> LeakageReport {
        LeakageReport {
            thresholds: thresholds.to_vec(),
            train_samples: self.train,
            val: self.set_report(0, thresholds),
            test: self.set_report(1, thresholds),
            keyframes_only: None,
        }
    }
}

pub fn audit(ds: &Dataset, split: &SplitAssignment, thresholds: &[f64]) -> Result<LeakageReport, LeakageError> {
    audit_with_cell(ds, split, thresholds, DEFAULT_INDEX_CELL)
}

/// Audit with an explicit index bucket size. The bucket size only affects speed.
pub fn audit_with_cell(
    ds: &Dataset,
    split: &SplitAssignment,
    thresholds: &[f64],
    cell_size: f64,
) -> Result<LeakageReport, LeakageError> {
    check_thresholds(thresholds)?;
    let labels = split.resolve(ds)?;
    audit_labels(ds, &labels, thresholds, cell_size)
}

pub(crate) fn audit_labels(
    ds: &Dataset,
    labels: &[SetLabel],
    thresholds: &[f64],
    cell_size: f64,
) -> Result<LeakageReport, LeakageError> {
    let dist = EvalDistances::compute(ds, labels, false, cell_size)?;
    if dist.train == 0 {
        return Err(LeakageError::NoTrainSamples);
    }
    let mut report = dist.report(thresholds);
    let keyframes = ds.samples().iter().filter(|s| s.keyframe).count();
    if keyframes > 0 && keyframes < ds.len() {
        let kf = EvalDistances::compute(ds, labels, true, cell_size)?;
        report.keyframes_only = Some(Box::new(kf.report(thresholds)));
    }
    Ok(report)
}

/// Relabel every val/test sample closer than `buffer` to a train sample as
/// unassigned.
pub fn buffer_filter(ds: &Dataset, split: &SplitAssignment, buffer: f64) -> Result<SplitAssignment, LeakageError> {
    if !(buffer.is_finite() && buffer > 0.0) {
        return Err(LeakageError::InvalidArgument(format!(
            "buffer must be positive, got {buffer}"
        )));
    }
    let mut labels = split.resolve(ds)?;
    let train = (0..ds.len()).filter(|&i| labels[i] == SetLabel::Train);
    let index = SpatialIndex::from_indices(ds, train, DEFAULT_INDEX_CELL)?;
    let eval: Vec<usize> = (0..ds.len())
        .filter(|&i| matches!(labels[i], SetLabel::Val | SetLabel::Test))
        .collect();
    let dists = index.nearest_distances(ds, &eval);
    for (&i, d) in eval.iter().zip(dists) {
        if matches!(d, Some(d) if d < buffer) {
            labels[i] = SetLabel::Unassigned;
        }
    }
    let provenance = format!("{}+buffer_filter({buffer})", split.provenance);
    Ok(SplitAssignment::from_dense(ds, &labels, provenance))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub val: Option<f64>,
    pub test: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DistanceCurve {
    pub points: Vec<CurvePoint>,
}

impl DistanceCurve {
    pub fn check(&self) -> Result<(), String> {
        for pick in [|p: &CurvePoint| p.val, |p: &CurvePoint| p.test] {
            let vals: Vec<f64> = self.points.iter().filter_map(pick).collect();
            if vals.iter().any(|r| !(0.0..=1.0).contains(r)) || vals.windows(2).any(|w| w[1] < w[0]) {
                return Err("distance curve is not a non-decreasing ratio series".into());
            }
        }
        Ok(())
    }
}

/// Overlap ratios at `step, 2*step, ..., max_range` from a single distance pass.
pub fn distance_curve(
    ds: &Dataset,
    split: &SplitAssignment,
    max_range: f64,
    step: f64,
) -> Result<DistanceCurve, LeakageError> {
    if !(step.is_finite() && step > 0.0 && max_range.is_finite() && max_range >= step) {
        return Err(LeakageError::InvalidArgument(format!(
            "need step > 0 and max_range >= step, got {max_range}:{step}"
        )));
    }
    let labels = split.resolve(ds)?;
    let dist = EvalDistances::compute(ds, &labels, false, DEFAULT_INDEX_CELL)?;
    if dist.train == 0 {
        return Err(LeakageError::NoTrainSamples);
    }
    let n = (max_range / step + 1e-9).floor() as usize;
    let points = (1..=n)
        .map(|k| {
            let threshold = k as f64 * step;
            CurvePoint {
                threshold,
                val: dist.ratio(0, threshold),
                test: dist.ratio(1, threshold),
            }
        })
        .collect();
    Ok(DistanceCurve { points })
}
