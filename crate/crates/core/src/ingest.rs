//! Pose-log and map-element ingestion.
//!
//! Two neutral sample formats are accepted (JSON lines and CSV) plus one
//! JSON-lines format for vectorized map elements. Loading is all-or-nothing:
//! the first malformed record aborts the whole file with its line number.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("parse error at line {line}, field `{field}`: {message}")]
    Parse {
        line: usize,
        field: String,
        message: String,
    },
    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),
    #[error("timestamps not strictly increasing in sequence `{0}`")]
    NonMonotoneTime(String),
    #[error("sequence `{sequence_id}` spans maps `{first}` and `{second}`")]
    MixedMap {
        sequence_id: String,
        first: String,
        second: String,
    },
    #[error("missing confidence for prediction in frame `{0}`")]
    MissingConfidence(String),
    #[error("degenerate polyline in frame `{0}`")]
    DegeneratePolyline(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

fn parse_err(line: usize, field: &str, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        line,
        field: field.to_string(),
        message: message.into(),
    }
}

/// One timestamped vehicle pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub sequence_id: String,
    pub map_id: String,
    pub x: f64,
    pub y: f64,
    /// Microseconds since epoch.
    pub t: i64,
    pub keyframe: bool,
    #[serde(default)]
    pub attrs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SampleFormat {
    Jsonl,
    Csv,
}

impl SampleFormat {
    /// Guess from the file extension; anything that is not `.csv` is JSON lines.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => SampleFormat::Csv,
            _ => SampleFormat::Jsonl,
        }
    }
}

impl FromStr for SampleFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" | "json" => Ok(SampleFormat::Jsonl),
            "csv" => Ok(SampleFormat::Csv),
            other => Err(format!("unknown sample format `{other}`")),
        }
    }
}

/// An immutable, validated collection of samples.
///
/// Samples keep their input order. `sequences` lists sample indices of each
/// sequence in time order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    samples: Vec<Sample>,
    sequences: BTreeMap<String, Vec<usize>>,
    maps: BTreeSet<String>,
    by_id: HashMap<String, usize>,
}

impl Dataset {
    /// Validates the sample invariants and builds the derived indices.
    ///
    /// Within a sequence the samples must already appear in strictly
    /// increasing time order.
    pub fn new(samples: Vec<Sample>) -> Result<Self, IngestError> {
        let mut by_id = HashMap::with_capacity(samples.len());
        let mut sequences: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        let mut maps = BTreeSet::new();
        for (idx, s) in samples.iter().enumerate() {
            if !s.x.is_finite() || !s.y.is_finite() {
                return Err(parse_err(idx + 1, "x/y", "coordinates must be finite"));
            }
            if by_id.insert(s.id.clone(), idx).is_some() {
                return Err(IngestError::DuplicateId(s.id.clone()));
            }
            let seq = sequences.entry(s.sequence_id.clone()).or_default();
            if let Some(&prev) = seq.last() {
                let p = &samples[prev];
                if p.map_id != s.map_id {
                    return Err(IngestError::MixedMap {
                        sequence_id: s.sequence_id.clone(),
                        first: p.map_id.clone(),
                        second: s.map_id.clone(),
                    });
                }
                if s.t <= p.t {
                    return Err(IngestError::NonMonotoneTime(s.sequence_id.clone()));
                }
            }
            seq.push(idx);
            if !maps.contains(&s.map_id) {
                maps.insert(s.map_id.clone());
            }
        }
        Ok(Dataset {
            samples,
            sequences,
            maps,
            by_id,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn sequences(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.sequences
    }

    pub fn maps(&self) -> &BTreeSet<String> {
        &self.maps
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.by_id.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Sample> {
        self.index_of(id).map(|i| &self.samples[i])
    }

    /// Union of attribute keys over all samples, sorted.
    pub fn attribute_keys(&self) -> BTreeSet<String> {
        self.samples.iter().flat_map(|s| s.attrs.keys().cloned()).collect()
    }

    /// Sample counts per map.
    pub fn map_counts(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for s in &self.samples {
            *out.entry(s.map_id.clone()).or_insert(0) += 1;
        }
        out
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    id: String,
    sequence_id: String,
    map_id: String,
    x: f64,
    y: f64,
    t: i64,
    keyframe: bool,
    #[serde(default)]
    attrs: BTreeMap<String, String>,
}

pub fn load_samples(path: &Path, format: SampleFormat) -> Result<Dataset, IngestError> {
    let file = File::open(path)?;
    read_samples(BufReader::new(file), format)
}

pub fn read_samples<R: BufRead>(reader: R, format: SampleFormat) -> Result<Dataset, IngestError> {
    let samples = match format {
        SampleFormat::Jsonl => read_samples_jsonl(reader)?,
        SampleFormat::Csv => read_samples_csv(reader)?,
    };
    Dataset::new(samples)
}

fn json_error_field(err: &serde_json::Error) -> String {
    // serde_json reports the offending field only inside the message text.
    let msg = err.to_string();
    if let Some(start) = msg.find('`') {
        if let Some(len) = msg[start + 1..].find('`') {
            return msg[start + 1..start + 1 + len].to_string();
        }
    }
    "record".to_string()
}

fn read_samples_jsonl<R: BufRead>(reader: R) -> Result<Vec<Sample>, IngestError> {
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SampleRecord =
            serde_json::from_str(&line).map_err(|e| parse_err(lineno, &json_error_field(&e), e.to_string()))?;
        if !rec.x.is_finite() || !rec.y.is_finite() {
            return Err(parse_err(lineno, "x/y", "coordinates must be finite"));
        }
        out.push(Sample {
            id: rec.id,
            sequence_id: rec.sequence_id,
            map_id: rec.map_id,
            x: rec.x,
            y: rec.y,
            t: rec.t,
            keyframe: rec.keyframe,
            attrs: rec.attrs,
        });
    }
    Ok(out)
}

const CSV_FIXED: [&str; 7] = ["id", "sequence_id", "map_id", "x", "y", "t", "keyframe"];

fn read_samples_csv<R: BufRead>(reader: R) -> Result<Vec<Sample>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) => return Err(csv_error(e, 1)),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Ok(Vec::new());
    }
    for (i, want) in CSV_FIXED.iter().enumerate() {
        match headers.get(i) {
            Some(h) if h == *want => {}
            got => {
                return Err(parse_err(
                    1,
                    want,
                    format!("expected column {} to be `{want}`, found {:?}", i + 1, got),
                ))
            }
        }
    }
    let attr_keys: Vec<String> = headers.iter().skip(CSV_FIXED.len()).map(String::from).collect();

    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            csv_error(e, line)
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let x: f64 = parse_num(field(3), line, "x")?;
        let y: f64 = parse_num(field(4), line, "y")?;
        if !x.is_finite() || !y.is_finite() {
            return Err(parse_err(line, "x/y", "coordinates must be finite"));
        }
        let t: i64 = parse_num(field(5), line, "t")?;
        let keyframe = match field(6) {
            "true" => true,
            "false" => false,
            other => {
                return Err(parse_err(
                    line,
                    "keyframe",
                    format!("expected true or false, found `{other}`"),
                ))
            }
        };
        for (i, name) in CSV_FIXED.iter().enumerate().take(3) {
            if field(i).is_empty() {
                return Err(parse_err(line, name, "empty value"));
            }
        }
        let attrs = attr_keys
            .iter()
            .enumerate()
            .filter_map(|(k, key)| {
                let v = field(CSV_FIXED.len() + k);
                (!v.is_empty()).then(|| (key.clone(), v.to_string()))
            })
            .collect();
        out.push(Sample {
            id: field(0).to_string(),
            sequence_id: field(1).to_string(),
            map_id: field(2).to_string(),
            x,
            y,
            t,
            keyframe,
            attrs,
        });
    }
    Ok(out)
}

fn csv_error(e: csv::Error, line: usize) -> IngestError {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => IngestError::Io(io),
            _ => unreachable!(),
        },
        _ => parse_err(line, "record", e.to_string()),
    }
}

fn parse_num<T: FromStr>(s: &str, line: usize, field: &str) -> Result<T, IngestError>
where
    T::Err: std::fmt::Display,
{
    s.trim()
        .parse::<T>()
        .map_err(|e| parse_err(line, field, format!("`{s}`: {e}")))
}

pub fn write_samples_jsonl<W: Write>(ds: &Dataset, mut w: W) -> io::Result<()> {
    for s in ds.samples() {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

/// Writes the CSV form. Attribute columns are the sorted union of keys;
/// an absent attribute is an empty cell.
pub fn write_samples_csv<W: Write>(ds: &Dataset, w: W) -> Result<(), IngestError> {
    let keys: Vec<String> = ds.attribute_keys().into_iter().collect();
    let mut wtr = csv::Writer::from_writer(w);
    let mut header: Vec<&str> = CSV_FIXED.to_vec();
    header.extend(keys.iter().map(String::as_str));
    wtr.write_record(&header).map_err(to_io)?;
    for s in ds.samples() {
        let mut row = vec![
            s.id.clone(),
            s.sequence_id.clone(),
            s.map_id.clone(),
            format!("{:?}", s.x),
            format!("{:?}", s.y),
            s.t.to_string(),
            s.keyframe.to_string(),
        ];
        row.extend(keys.iter().map(|k| s.attrs.get(k).cloned().unwrap_or_default()));
        wtr.write_record(&row).map_err(to_io)?;
    }
    wtr.flush()?;
    Ok(())
}

fn to_io(e: csv::Error) -> IngestError {
    IngestError::Io(io::Error::other(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resample {
    KeyframesOnly,
    /// Keep the 1st, (n+1)th, (2n+1)th ... sample of every sequence.
    EveryNth(usize),
    All,
}

impl FromStr for Resample {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "keyframes" | "keyframes_only" => Ok(Resample::KeyframesOnly),
            "all" => Ok(Resample::All),
            other => {
                let n = other
                    .strip_prefix("every_nth:")
                    .or_else(|| other.strip_prefix("every-nth:"))
                    .ok_or_else(|| format!("unknown resample mode `{other}`"))?;
                let n: usize = n.parse().map_err(|e| format!("bad n `{n}`: {e}"))?;
                Ok(Resample::EveryNth(n))
            }
        }
    }
}

pub fn resample_sequences(ds: &Dataset, mode: Resample) -> Result<Dataset, IngestError> {
    let keep: Vec<bool> = match mode {
        Resample::All => vec![true; ds.len()],
        Resample::KeyframesOnly => ds.samples().iter().map(|s| s.keyframe).collect(),
        Resample::EveryNth(0) => return Err(IngestError::InvalidArgument("every_nth requires n >= 1".into())),
        Resample::EveryNth(n) => {
            let mut keep = vec![false; ds.len()];
            for seq in ds.sequences().values() {
                for &idx in seq.iter().step_by(n) {
                    keep[idx] = true;
                }
            }
            keep
        }
    };
    let samples = ds
        .samples()
        .iter()
        .zip(keep)
        .filter(|&(_, k)| k)
        .map(|(s, _)| s.clone())
        .collect();
    Dataset::new(samples)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementClass {
    Divider,
    Boundary,
    Crossing,
}

impl ElementClass {
    pub const ALL: [ElementClass; 3] = [ElementClass::Divider, ElementClass::Boundary, ElementClass::Crossing];

    pub fn as_str(self) -> &'static str {
        match self {
            ElementClass::Divider => "divider",
            ElementClass::Boundary => "boundary",
            ElementClass::Crossing => "crossing",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::fmt::Display for ElementClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A class-labeled polyline in frame-local coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapElement {
    pub frame_id: String,
    pub class: ElementClass,
    pub points: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
}

impl MapElement {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.points.len() < 2 {
            return Err(IngestError::DegeneratePolyline(self.frame_id.clone()));
        }
        if self.points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(IngestError::DegeneratePolyline(self.frame_id.clone()));
        }
        if self.points.windows(2).any(|w| w[0] == w[1]) {
            return Err(IngestError::DegeneratePolyline(self.frame_id.clone()));
        }
        Ok(())
    }
}

/// Map elements grouped by frame id; element order within a frame is file order.
pub type FrameElements = BTreeMap<String, Vec<MapElement>>;

pub fn load_map_elements(path: &Path, require_confidence: bool) -> Result<FrameElements, IngestError> {
    let file = File::open(path)?;
    read_map_elements(BufReader::new(file), require_confidence)
}

pub fn read_map_elements<R: BufRead>(reader: R, require_confidence: bool) -> Result<FrameElements, IngestError> {
    let mut out = FrameElements::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = n + 1;
        if line.trim().is_empty() {
            continue;
        }
        let el: MapElement =
            serde_json::from_str(&line).map_err(|e| parse_err(lineno, &json_error_field(&e), e.to_string()))?;
        el.validate()?;
        match el.confidence {
            None if require_confidence => {
                return Err(IngestError::MissingConfidence(el.frame_id));
            }
            Some(c) if !(0.0..=1.0).contains(&c) => {
                return Err(parse_err(lineno, "confidence", format!("{c} outside [0, 1]")));
            }
            _ => {}
        }
        out.entry(el.frame_id.clone()).or_default().push(el);
    }
    Ok(out)
}

pub fn write_map_elements<W: Write>(frames: &FrameElements, mut w: W) -> io::Result<()> {
    for el in frames.values().flatten() {
        serde_json::to_writer(&mut w, el)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jsonl(rows: &[&str]) -> Result<Dataset, IngestError> {
        read_samples(rows.join("\n").as_bytes(), SampleFormat::Jsonl)
    }

    fn row(id: &str, seq: &str, t: i64) -> String {
        format!(
            r#"{{"id":"{id}","sequence_id":"{seq}","map_id":"m","x":1.0,"y":2.0,"t":{t},"keyframe":true,"attrs":{{}}}}"#
        )
    }

    #[test]
    fn three_rows_two_sequences() {
        let rows = [row("a", "s1", 1), row("b", "s1", 2), row("c", "s2", 1)];
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        let ds = jsonl(&refs).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.sequences().len(), 2);
        assert_eq!(ds.sequences()["s1"], vec![0, 1]);
    }

    #[test]
    fn duplicate_id_rejected() {
        let rows = [row("s1", "q", 1), row("s1", "q", 2)];
        let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
        match jsonl(&refs) {
            Err(IngestError::DuplicateId(id)) => assert_eq!(id, "s1"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_empty_dataset() {
        let ds = read_samples(&b""[..], SampleFormat::Jsonl).unwrap();
        assert!(ds.is_empty());
        let ds = read_samples(&b""[..], SampleFormat::Csv).unwrap();
        assert!(ds.is_empty());
    }

    #[test]
    fn time_ties_and_reversals_rejected() {
        for ts in [[5, 5], [5, 4]] {
            let rows = [row("a", "q", ts[0]), row("b", "q", ts[1])];
            let refs: Vec<&str> = rows.iter().map(String::as_str).collect();
            assert!(matches!(jsonl(&refs), Err(IngestError::NonMonotoneTime(s)) if s == "q"));
        }
    }

    #[test]
    fn parse_error_reports_line() {
        let good = row("a", "q", 1);
        let bad = r#"{"id":"b","sequence_id":"q","map_id":"m","x":"oops","y":2,"t":2,"keyframe":true}"#;
        match jsonl(&[&good, bad]) {
            Err(IngestError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let missing = r#"{"id":"b","sequence_id":"q","map_id":"m","y":2,"t":2,"keyframe":true}"#;
        match jsonl(&[missing]) {
            Err(IngestError::Parse { line, field, .. }) => {
                assert_eq!(line, 1);
                assert_eq!(field, "x");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_folds_extra_columns_into_attrs() {
        let text = "id,sequence_id,map_id,x,y,t,keyframe,weather,tod\n\
                    a,q,m,1.5,-2,10,true,rain,night\n\
                    b,q,m,3,4,20,false,,day\n";
        let ds = read_samples(text.as_bytes(), SampleFormat::Csv).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.samples()[0].attrs["weather"], "rain");
        assert!(!ds.samples()[1].attrs.contains_key("weather"));
        assert_eq!(ds.samples()[1].attrs["tod"], "day");
        assert!(!ds.samples()[1].keyframe);
    }

    #[test]
    fn csv_rejects_bad_keyframe_and_wrong_header() {
        let text = "id,sequence_id,map_id,x,y,t,keyframe\na,q,m,1,2,3,yes\n";
        match read_samples(text.as_bytes(), SampleFormat::Csv) {
            Err(IngestError::Parse { line, field, .. }) => {
                assert_eq!(line, 2);
                assert_eq!(field, "keyframe");
            }
            other => panic!("unexpected {other:?}"),
        }
        let text = "id,map_id,sequence_id,x,y,t,keyframe\n";
        assert!(matches!(
            read_samples(text.as_bytes(), SampleFormat::Csv),
            Err(IngestError::Parse { line: 1, .. })
        ));
        let text = "id,sequence_id,map_id,x,y,t,keyframe\na,q,m,NaN,2,3,true\n";
        assert!(read_samples(text.as_bytes(), SampleFormat::Csv).is_err());
    }

    #[test]
    fn mixed_map_sequence_rejected() {
        let a = r#"{"id":"a","sequence_id":"q","map_id":"m1","x":0,"y":0,"t":1,"keyframe":true}"#;
        let b = r#"{"id":"b","sequence_id":"q","map_id":"m2","x":0,"y":0,"t":2,"keyframe":true}"#;
        assert!(matches!(jsonl(&[a, b]), Err(IngestError::MixedMap { .. })));
    }

    fn seq_dataset(len: usize, keyframe_every: usize) -> Dataset {
        let samples = (0..len)
            .map(|i| Sample {
                id: format!("s{i}"),
                sequence_id: "q".into(),
                map_id: "m".into(),
                x: i as f64,
                y: 0.0,
                t: i as i64,
                keyframe: i % keyframe_every == 0,
                attrs: BTreeMap::new(),
            })
            .collect();
        Dataset::new(samples).unwrap()
    }

    #[test]
    fn every_fourth_of_ten() {
        let ds = seq_dataset(10, 1);
        let out = resample_sequences(&ds, Resample::EveryNth(4)).unwrap();
        let ids: Vec<&str> = out.samples().iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["s0", "s4", "s8"]);
    }

    #[test]
    fn every_first_is_identity_and_zero_rejected() {
        let ds = seq_dataset(7, 1);
        assert_eq!(resample_sequences(&ds, Resample::EveryNth(1)).unwrap(), ds);
        assert_eq!(resample_sequences(&ds, Resample::All).unwrap(), ds);
        assert!(resample_sequences(&ds, Resample::EveryNth(0)).is_err());
    }

    #[test]
    fn keyframes_only_filters() {
        let samples = (0..20)
            .map(|i| Sample {
                id: format!("s{i}"),
                sequence_id: format!("q{}", i % 3),
                map_id: "m".into(),
                x: 0.0,
                y: 0.0,
                t: i as i64,
                keyframe: i < 8,
                attrs: BTreeMap::new(),
            })
            .collect();
        let ds = Dataset::new(samples).unwrap();
        assert_eq!(resample_sequences(&ds, Resample::KeyframesOnly).unwrap().len(), 8);
    }

    #[test]
    fn map_elements_grouped_and_validated() {
        let text = r#"{"frame_id":"f1","class":"divider","points":[[0,0],[1,0]]}
{"frame_id":"f1","class":"boundary","points":[[0,1],[1,1],[2,2]]}
{"frame_id":"f2","class":"crossing","points":[[0,0],[0,1]]}"#;
        let frames = read_map_elements(text.as_bytes(), false).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames["f1"].len(), 2);
        assert_eq!(frames["f2"].len(), 1);

        assert!(matches!(
            read_map_elements(text.as_bytes(), true),
            Err(IngestError::MissingConfidence(f)) if f == "f1"
        ));

        let one = r#"{"frame_id":"f9","class":"divider","points":[[0,0]]}"#;
        assert!(matches!(
            read_map_elements(one.as_bytes(), false),
            Err(IngestError::DegeneratePolyline(f)) if f == "f9"
        ));
        let dup = r#"{"frame_id":"f9","class":"divider","points":[[0,0],[0,0],[1,1]]}"#;
        assert!(read_map_elements(dup.as_bytes(), false).is_err());
        let conf = r#"{"frame_id":"f9","class":"divider","points":[[0,0],[1,1]],"confidence":1.5}"#;
        assert!(read_map_elements(conf.as_bytes(), true).is_err());
    }
}
