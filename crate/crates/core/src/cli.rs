//! `geosplit` command line.
//!
//! Exit codes: 0 success, 1 domain or validation failure, 2 usage or input
//! parse error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::ingest::{self, Dataset, IngestError, Resample, SampleFormat};
use crate::leakage::{self, LeakageError, SplitAssignment};
use crate::mapeval::{self, MapEvalError, RasterSpec};
use crate::report::{self, canonical_json, sha256_hex, PlotData, ReportBundle, ReportError, Section};
use crate::spatial::{self, SpatialError};
use crate::split::{self, AssignMode, CutReport, FoldPreset, FoldsFile, PartitionConfig, RegionSet, SplitError};

#[derive(Debug, Parser)]
#[command(
    name = "geosplit",
    version,
    about = "Geographic leakage audits, disjoint splits and map-evaluation metrics"
)]
pub struct Cli {
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true, env = "GEOSPLIT_THREADS", default_value_t = 0)]
    pub threads: usize,
    /// Fixed `created` stamp for manifests and bundles.
    #[arg(long, global = true)]
    pub timestamp: Option<String>,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct SamplesArg {
    /// Pose samples (.jsonl or .csv).
    #[arg(long)]
    pub samples: PathBuf,
    /// Override the format guessed from the extension.
    #[arg(long)]
    pub format: Option<SampleFormat>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    PerSample,
    PerSequence,
}

impl From<ModeArg> for AssignMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::PerSample => AssignMode::PerSample,
            ModeArg::PerSequence => AssignMode::PerSequence,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum PresetArg {
    Nuscenes,
    #[value(alias = "av2")]
    Argoverse2,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Share of val/test samples within given distances of a train sample.
    Audit {
        #[command(flatten)]
        samples: SamplesArg,
        #[arg(long)]
        split: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "5")]
        thresholds: Vec<f64>,
        /// Also compute the overlap curve at STEP, 2*STEP, ..., MAX.
        #[arg(long, value_name = "MAX:STEP")]
        curve: Option<String>,
        /// Spatial index bucket size in meters.
        #[arg(long, default_value_t = spatial::DEFAULT_INDEX_CELL)]
        cell: f64,
        /// Report JSON (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Plot CSV: curve rows when --curve is given, else threshold rows.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Samples-per-cell histogram, or one map's dense heatmap.
    Histogram {
        #[command(flatten)]
        samples: SamplesArg,
        #[arg(long, default_value_t = spatial::DEFAULT_ANALYSIS_CELL)]
        cell: f64,
        /// Emit the heatmap of this map instead of the histogram.
        #[arg(long, value_name = "MAP_ID")]
        heatmap: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Label samples by region polygons; writes split.csv, manifest.json, cuts.json.
    Assign {
        #[command(flatten)]
        samples: SamplesArg,
        #[arg(long)]
        regions: PathBuf,
        #[arg(long, value_enum, default_value = "per-sample")]
        mode: ModeArg,
        /// Attribute keys for the balance summary (default: all keys present).
        #[arg(long, value_delimiter = ',')]
        attrs: Option<Vec<String>>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Grow disjoint cell-block regions automatically; writes regions.json too.
    Partition {
        #[command(flatten)]
        samples: SamplesArg,
        /// Train, val and test shares.
        #[arg(long, value_delimiter = ',', default_value = "0.70,0.15,0.15")]
        targets: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = spatial::DEFAULT_ANALYSIS_CELL)]
        cell: f64,
        /// Weight of attribute balance against proportion error.
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// split.csv pinning samples to sets; `unassigned` rows are free.
        #[arg(long)]
        lock: Option<PathBuf>,
        #[arg(long, value_delimiter = ',')]
        attrs: Option<Vec<String>>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// City-wise train/val folds from a preset or a folds.json file.
    Folds {
        #[command(flatten)]
        samples: SamplesArg,
        #[arg(long, value_enum, conflicts_with = "folds", required_unless_present = "folds")]
        preset: Option<PresetArg>,
        #[arg(long)]
        folds: Option<PathBuf>,
        /// Writes folds.json and one directory per fold; report to stdout when omitted.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Drop val/test samples closer than BUFFER meters to any train sample.
    Filter {
        #[command(flatten)]
        samples: SamplesArg,
        #[arg(long)]
        split: PathBuf,
        #[arg(long, default_value_t = 60.0)]
        buffer: f64,
        #[arg(long, value_delimiter = ',')]
        attrs: Option<Vec<String>>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Attribute balance of a split.
    Balance {
        #[command(flatten)]
        samples: SamplesArg,
        #[arg(long)]
        split: PathBuf,
        #[arg(long, value_delimiter = ',')]
        attrs: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Chamfer AP / mAP of predicted map elements, optionally raster IoU.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0.5,1.0,1.5")]
        thresholds: Vec<f64>,
        /// Polyline resampling interval in meters.
        #[arg(long, default_value_t = mapeval::DEFAULT_RESAMPLE_INTERVAL)]
        interval: f64,
        /// Also rasterize and report per-class IoU.
        #[arg(long)]
        iou: bool,
        #[arg(long, value_name = "MIN:MAX", default_value = "-30:30", allow_hyphen_values = true)]
        x_range: String,
        #[arg(long, value_name = "MIN:MAX", default_value = "-15:15", allow_hyphen_values = true)]
        y_range: String,
        #[arg(long, default_value_t = 0.15)]
        resolution: f64,
        #[arg(long, default_value_t = 0.5)]
        half_width: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Check totality, disjointness, proportions and balance; exit 1 on failure.
    Validate {
        #[command(flatten)]
        samples: SamplesArg,
        #[arg(long)]
        split: PathBuf,
        #[arg(long)]
        regions: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_value = "0.70,0.15,0.15")]
        targets: Vec<f64>,
        #[arg(long, default_value_t = 0.02)]
        tolerance: f64,
        #[arg(long, default_value_t = 5.0)]
        leakage_threshold: f64,
        #[arg(long, default_value_t = 0.02)]
        leakage_bound: f64,
        #[arg(long, default_value_t = 0.05)]
        balance_tolerance: f64,
        #[arg(long, value_delimiter = ',')]
        attrs: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Start the local split-designer service.
    Serve {
        #[command(flatten)]
        samples: SamplesArg,
        /// Initial regions.json.
        #[arg(long)]
        regions: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = 8642)]
        port: u16,
        #[arg(long, value_enum, default_value = "per-sample")]
        mode: ModeArg,
        #[arg(long, value_delimiter = ',')]
        attrs: Option<Vec<String>>,
        #[arg(long, default_value = "export")]
        export_dir: PathBuf,
        /// Static UI assets to serve at `/`.
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    /// Thin out sequences: keyframes, every_nth:N or all.
    Resample {
        #[command(flatten)]
        samples: SamplesArg,
        #[arg(long, default_value = "every_nth:4")]
        mode: Resample,
        /// Output file; format follows its extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Combine report JSON files into one hash-stamped bundle.
    Bundle {
        /// KIND=PATH, kind one of leakage, distance_curve, balance, histogram,
        /// heatmap, eval, iou, cuts, validation.
        #[arg(long = "section", value_name = "KIND=PATH", required = true)]
        sections: Vec<String>,
        /// Input files whose digests are recorded.
        #[arg(long = "input")]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-hash a bundle's inputs; exit 1 on any mismatch.
    Verify {
        bundle: PathBuf,
        /// Directory relative input paths resolve against.
        #[arg(long)]
        base: Option<PathBuf>,
    },
    /// Write each bundle section as a plot-ready CSV.
    Plot {
        bundle: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn usage(e: impl Display) -> Self {
        Failure {
            code: 2,
            message: e.to_string(),
        }
    }

    fn domain(e: impl Display) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        Failure::usage(e)
    }
}

impl From<LeakageError> for Failure {
    fn from(e: LeakageError) -> Self {
        match e {
            LeakageError::Parse { .. }
            | LeakageError::Io(_)
            | LeakageError::InvalidThresholds(_)
            | LeakageError::InvalidArgument(_) => Failure::usage(e),
            _ => Failure::domain(e),
        }
    }
}

impl From<SplitError> for Failure {
    fn from(e: SplitError) -> Self {
        match e {
            SplitError::InvalidPolygon { .. }
            | SplitError::DuplicatePriority { .. }
            | SplitError::InvalidTargets(_)
            | SplitError::Json(_)
            | SplitError::Io(_) => Failure::usage(e),
            SplitError::Leakage(inner) => inner.into(),
            _ => Failure::domain(e),
        }
    }
}

impl From<MapEvalError> for Failure {
    fn from(e: MapEvalError) -> Self {
        match e {
            MapEvalError::InvalidArgument(_) | MapEvalError::InvalidRaster(_) => Failure::usage(e),
            _ => Failure::domain(e),
        }
    }
}

impl From<SpatialError> for Failure {
    fn from(e: SpatialError) -> Self {
        match e {
            SpatialError::InvalidCellSize(_) => Failure::usage(e),
            _ => Failure::domain(e),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        match e {
            ReportError::Io { .. } | ReportError::Json(_) => Failure::usage(e),
            _ => Failure::domain(e),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn require_file(path: &Path) -> CliResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("no such file: {}", path.display())))
    }
}

fn read_bytes(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, bytes: &[u8]) -> CliResult {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Failure::usage(format!("{}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

/// Write to `path`, or stdout when absent.
fn emit(path: Option<&Path>, text: &str) -> CliResult {
    match path {
        Some(p) => write_file(p, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn json<T: serde::Serialize>(v: &T) -> String {
    canonical_json(v).expect("reports serialize")
}

fn load(samples: &SamplesArg) -> CliResult<(Dataset, String)> {
    let bytes = read_bytes(&samples.samples)?;
    let format = samples
        .format
        .unwrap_or_else(|| SampleFormat::from_path(&samples.samples));
    let ds = ingest::read_samples(bytes.as_slice(), format)?;
    log::info!("{} samples, {} maps", ds.len(), ds.maps().len());
    Ok((ds, sha256_hex(&bytes)))
}

fn load_split(path: &Path) -> CliResult<(SplitAssignment, String)> {
    let bytes = read_bytes(path)?;
    Ok((leakage::read_split_csv(bytes.as_slice())?, sha256_hex(&bytes)))
}

fn attr_keys(ds: &Dataset, attrs: &Option<Vec<String>>) -> Vec<String> {
    match attrs {
        Some(keys) => keys.iter().filter(|k| !k.is_empty()).cloned().collect(),
        None => ds.attribute_keys().into_iter().collect(),
    }
}

fn targets3(v: &[f64]) -> CliResult<[f64; 3]> {
    <[f64; 3]>::try_from(v).map_err(|_| Failure::usage(format!("--targets needs 3 values, got {}", v.len())))
}

fn pair(s: &str, flag: &str) -> CliResult<(f64, f64)> {
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| Failure::usage(format!("{flag} expects A:B, got `{s}`")))?;
    let parse = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| Failure::usage(format!("{flag}: `{v}` is not a number")))
    };
    Ok((parse(a)?, parse(b)?))
}

fn write_split_dir(
    dir: &Path,
    ds: &Dataset,
    split: &SplitAssignment,
    cuts: &CutReport,
    inputs: BTreeMap<String, String>,
    keys: &[String],
    timestamp: Option<&str>,
) -> CliResult<report::SplitOutputs> {
    let out = report::split_outputs(ds, split, cuts, inputs, keys, timestamp)?;
    out.write_to(dir)?;
    Ok(out)
}

fn inputs(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

#[derive(serde::Serialize)]
struct AuditOutput {
    #[serde(flatten)]
    leakage: leakage::LeakageReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    distance_curve: Option<leakage::DistanceCurve>,
}

#[derive(serde::Serialize)]
struct EvalOutput {
    #[serde(flatten)]
    eval: mapeval::EvalReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    iou: Option<mapeval::IouReport>,
}

fn parse_section(spec: &str) -> CliResult<(String, Section)> {
    let (kind, path) = spec
        .split_once('=')
        .ok_or_else(|| Failure::usage(format!("--section expects KIND=PATH, got `{spec}`")))?;
    let path = Path::new(path);
    let text = String::from_utf8(read_bytes(path)?).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    let tagged = serde_json::json!({ "kind": kind, "data": value });
    let section: Section = serde_json::from_value(tagged)
        .map_err(|e| Failure::usage(format!("{}: not a `{kind}` report: {e}", path.display())))?;
    Ok((kind.to_string(), section))
}

fn run_command(cli: &Cli) -> CliResult {
    let ts = cli.timestamp.as_deref();
    match &cli.command {
        Command::Audit {
            samples,
            split,
            thresholds,
            curve,
            cell,
            out,
            csv,
        } => {
            require_file(&samples.samples)?;
            require_file(split)?;
            let curve = curve.as_deref().map(|c| pair(c, "--curve")).transpose()?;
            let (ds, _) = load(samples)?;
            let (split, _) = load_split(split)?;
            let leakage = leakage::audit_with_cell(&ds, &split, thresholds, *cell)?;
            let distance_curve = curve
                .map(|(max, step)| leakage::distance_curve(&ds, &split, max, step))
                .transpose()?;
            for (t, (v, te)) in thresholds
                .iter()
                .zip(leakage.val.ratios.iter().zip(&leakage.test.ratios))
            {
                eprintln!(
                    "within {t} m: val {} test {}",
                    v.map_or("n/a".into(), |r| format!("{:.4}", r)),
                    te.map_or("n/a".into(), |r| format!("{:.4}", r))
                );
            }
            if let Some(path) = csv {
                let text = distance_curve
                    .as_ref()
                    .map_or_else(|| leakage.plot_csv(), |c| c.plot_csv());
                write_file(path, text.as_bytes())?;
            }
            emit(
                out.as_deref(),
                &json(&AuditOutput {
                    leakage,
                    distance_curve,
                }),
            )
        }
        Command::Histogram {
            samples,
            cell,
            heatmap,
            out,
            csv,
        } => {
            require_file(&samples.samples)?;
            let (ds, _) = load(samples)?;
            let hist = spatial::cell_histogram_indices(&ds, 0..ds.len(), *cell)?;
            match heatmap {
                Some(map) => {
                    let h = spatial::heatmap_export(&hist, map)?;
                    if let Some(path) = csv {
                        write_file(path, h.plot_csv().as_bytes())?;
                    }
                    emit(out.as_deref(), &json(&h))
                }
                None => {
                    if let Some(path) = csv {
                        write_file(path, hist.plot_csv().as_bytes())?;
                    }
                    emit(out.as_deref(), &json(&hist))
                }
            }
        }
        Command::Assign {
            samples,
            regions,
            mode,
            attrs,
            out_dir,
        } => {
            require_file(&samples.samples)?;
            require_file(regions)?;
            let (ds, samples_sha) = load(samples)?;
            let region_bytes = read_bytes(regions)?;
            let region_set = RegionSet::from_json_reader(region_bytes.as_slice())?;
            let (split, cuts) = split::assign_by_regions(&ds, &region_set, (*mode).into())?;
            let keys = attr_keys(&ds, attrs);
            let ins = inputs(&[("regions", &sha256_hex(&region_bytes)), ("samples", &samples_sha)]);
            let out = write_split_dir(out_dir, &ds, &split, &cuts, ins, &keys, ts)?;
            eprintln!("{} cut sequences; counts {:?}", cuts.cut_sequences, out.manifest.counts);
            Ok(())
        }
        Command::Partition {
            samples,
            targets,
            seed,
            cell,
            lambda,
            lock,
            attrs,
            out_dir,
        } => {
            require_file(&samples.samples)?;
            if let Some(l) = lock {
                require_file(l)?;
            }
            let targets = targets3(targets)?;
            let (ds, samples_sha) = load(samples)?;
            let keys = attr_keys(&ds, attrs);
            let mut ins = inputs(&[("samples", &samples_sha)]);
            let locked = match lock {
                Some(path) => {
                    let (split, sha) = load_split(path)?;
                    ins.insert("lock".into(), sha);
                    Some(split)
                }
                None => None,
            };
            let cfg = PartitionConfig {
                targets,
                cell_size: *cell,
                attribute_keys: keys.clone(),
                lambda: *lambda,
                seed: *seed,
            };
            let p = split::auto_partition(&ds, &cfg, locked.as_ref())?;
            let regions_json = p.regions.to_json();
            write_file(&out_dir.join("regions.json"), regions_json.as_bytes())?;
            let out = write_split_dir(out_dir, &ds, &p.split, &p.cuts, ins, &keys, ts)?;
            eprintln!(
                "{} regions; proportions {:?}",
                p.regions.regions.len(),
                out.manifest.proportions
            );
            Ok(())
        }
        Command::Folds {
            samples,
            preset,
            folds,
            out_dir,
        } => {
            require_file(&samples.samples)?;
            if let Some(f) = folds {
                require_file(f)?;
            }
            let (ds, samples_sha) = load(samples)?;
            let (file, source_sha) = match (preset, folds) {
                (Some(p), _) => {
                    let preset = match p {
                        PresetArg::Nuscenes => FoldPreset::Nuscenes,
                        PresetArg::Argoverse2 => FoldPreset::Argoverse2,
                    };
                    (preset.folds(), None)
                }
                (None, Some(path)) => (FoldsFile::load(path)?, Some(sha256_hex(&read_bytes(path)?))),
                (None, None) => return Err(Failure::usage("need --preset or --folds")),
            };
            let result = split::citywise_folds(&ds, &file.folds)?;
            let text = json(&serde_json::json!({ "folds": result }));
            match out_dir {
                Some(dir) => {
                    write_file(&dir.join("folds.json"), text.as_bytes())?;
                    for fold in &result {
                        let labels = fold.split.resolve(&ds)?;
                        let cuts = CutReport::from_labels(&ds, &labels);
                        let mut ins = inputs(&[("samples", &samples_sha)]);
                        if let Some(sha) = &source_sha {
                            ins.insert("folds".into(), sha.clone());
                        }
                        let keys = attr_keys(&ds, &None);
                        write_split_dir(&dir.join(&fold.spec.name), &ds, &fold.split, &cuts, ins, &keys, ts)?;
                    }
                    Ok(())
                }
                None => emit(None, &text),
            }
        }
        Command::Filter {
            samples,
            split,
            buffer,
            attrs,
            out_dir,
        } => {
            require_file(&samples.samples)?;
            require_file(split)?;
            let (ds, samples_sha) = load(samples)?;
            let (split, split_sha) = load_split(split)?;
            let filtered = leakage::buffer_filter(&ds, &split, *buffer)?;
            let labels = filtered.resolve(&ds)?;
            let cuts = CutReport::from_labels(&ds, &labels);
            let keys = attr_keys(&ds, attrs);
            let ins = inputs(&[("samples", &samples_sha), ("split", &split_sha)]);
            let before = split.counts();
            let out = write_split_dir(out_dir, &ds, &filtered, &cuts, ins, &keys, ts)?;
            eprintln!("counts {before:?} -> {:?}", out.manifest.counts);
            Ok(())
        }
        Command::Balance {
            samples,
            split,
            attrs,
            out,
            csv,
        } => {
            require_file(&samples.samples)?;
            require_file(split)?;
            let (ds, _) = load(samples)?;
            let (split, _) = load_split(split)?;
            let report = split::balance_report(&ds, &split, &attr_keys(&ds, attrs))?;
            if let Some(path) = csv {
                write_file(path, report.plot_csv().as_bytes())?;
            }
            emit(out.as_deref(), &json(&report))
        }
        Command::Eval {
            pred,
            gt,
            thresholds,
            interval,
            iou,
            x_range,
            y_range,
            resolution,
            half_width,
            out,
            csv,
        } => {
            require_file(pred)?;
            require_file(gt)?;
            let spec = RasterSpec {
                x_range: pair(x_range, "--x-range").map(|(a, b)| [a, b])?,
                y_range: pair(y_range, "--y-range").map(|(a, b)| [a, b])?,
                resolution: *resolution,
                half_width: *half_width,
            };
            let preds = ingest::load_map_elements(pred, true)?;
            let gts = ingest::load_map_elements(gt, false)?;
            let eval = mapeval::evaluate(&preds, &gts, thresholds, *interval)?;
            let iou = if *iou {
                Some(mapeval::evaluate_iou(&preds, &gts, &spec)?)
            } else {
                None
            };
            eprintln!(
                "overall mAP {}",
                eval.overall.map_or("n/a".into(), |m| format!("{m:.4}"))
            );
            if let Some(path) = csv {
                write_file(path, eval.plot_csv().as_bytes())?;
            }
            emit(out.as_deref(), &json(&EvalOutput { eval, iou }))
        }
        Command::Validate {
            samples,
            split,
            regions,
            targets,
            tolerance,
            leakage_threshold,
            leakage_bound,
            balance_tolerance,
            attrs,
            out,
        } => {
            require_file(&samples.samples)?;
            require_file(split)?;
            if let Some(r) = regions {
                require_file(r)?;
            }
            let targets = targets3(targets)?;
            let (ds, _) = load(samples)?;
            let (split, _) = load_split(split)?;
            let regions = regions.as_deref().map(RegionSet::load).transpose()?;
            let cfg = split::ValidationConfig {
                targets,
                proportion_tolerance: *tolerance,
                leakage_threshold: *leakage_threshold,
                leakage_bound: *leakage_bound,
                balance_tolerance: *balance_tolerance,
                attribute_keys: attr_keys(&ds, attrs),
            };
            let report = split::validate_split(&ds, &split, regions.as_ref(), &cfg);
            for c in &report.checks {
                eprintln!(
                    "{:<12} {}  {}",
                    c.name,
                    if c.passed { "pass" } else { "FAIL" },
                    c.detail
                );
            }
            emit(out.as_deref(), &json(&report))?;
            if report.passed {
                Ok(())
            } else {
                Err(Failure::domain("validation failed"))
            }
        }
        Command::Serve {
            samples,
            regions,
            host,
            port,
            mode,
            attrs,
            export_dir,
            ui,
        } => serve(
            cli,
            samples,
            regions.as_deref(),
            host,
            *port,
            *mode,
            attrs,
            export_dir,
            ui.clone(),
        ),
        Command::Resample { samples, mode, out } => {
            require_file(&samples.samples)?;
            let (ds, _) = load(samples)?;
            let thinned = ingest::resample_sequences(&ds, *mode)?;
            let mut buf = Vec::new();
            match SampleFormat::from_path(out) {
                SampleFormat::Csv => ingest::write_samples_csv(&thinned, &mut buf)?,
                SampleFormat::Jsonl => ingest::write_samples_jsonl(&thinned, &mut buf).map_err(Failure::usage)?,
            }
            eprintln!("{} -> {} samples", ds.len(), thinned.len());
            write_file(out, &buf)
        }
        Command::Bundle { sections, inputs, out } => {
            for p in inputs {
                require_file(p)?;
            }
            let parts = sections
                .iter()
                .map(|s| parse_section(s))
                .collect::<CliResult<Vec<_>>>()?;
            let b = report::bundle(parts, inputs, ts)?;
            emit(out.as_deref(), &b.to_json())
        }
        Command::Verify { bundle, base } => {
            require_file(bundle)?;
            let text = String::from_utf8(read_bytes(bundle)?).map_err(Failure::usage)?;
            let b = ReportBundle::from_json(&text)?;
            let report = report::verify(&b, base.as_deref());
            for m in &report.mismatches {
                eprintln!(
                    "digest mismatch: {} expected {} got {}",
                    m.path,
                    m.expected,
                    m.actual.as_deref().unwrap_or("unreadable")
                );
            }
            for s in &report.inconsistent {
                eprintln!("inconsistent section {s}");
            }
            if report.ok() {
                eprintln!("ok: {} inputs, {} sections", b.inputs.len(), b.sections.len());
                Ok(())
            } else {
                Err(Failure::domain("bundle verification failed"))
            }
        }
        Command::Plot { bundle, out_dir } => {
            require_file(bundle)?;
            let text = String::from_utf8(read_bytes(bundle)?).map_err(Failure::usage)?;
            let b = ReportBundle::from_json(&text)?;
            for (name, section) in &b.sections {
                write_file(&out_dir.join(format!("{name}.csv")), section.plot_csv().as_bytes())?;
            }
            Ok(())
        }
    }
}

#[cfg(feature = "service")]
#[allow(clippy::too_many_arguments)]
fn serve(
    cli: &Cli,
    samples: &SamplesArg,
    regions: Option<&Path>,
    host: &str,
    port: u16,
    mode: ModeArg,
    attrs: &Option<Vec<String>>,
    export_dir: &Path,
    ui: Option<PathBuf>,
) -> CliResult {
    use crate::service::{self, AppState, ProjectConfig};
    require_file(&samples.samples)?;
    if let Some(r) = regions {
        require_file(r)?;
    }
    let (ds, samples_sha) = load(samples)?;
    let region_set = match regions {
        Some(r) => RegionSet::load(r)?,
        None => RegionSet::default(),
    };
    let addr: std::net::SocketAddr = format!("{host}:{port}")
        .parse()
        .map_err(|e| Failure::usage(format!("bad address {host}:{port}: {e}")))?;
    let config = ProjectConfig {
        id: samples
            .samples
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "project".into()),
        samples_sha256: samples_sha,
        mode: mode.into(),
        attribute_keys: attr_keys(&ds, attrs),
        validation: Default::default(),
        export_dir: export_dir.to_path_buf(),
        timestamp: cli.timestamp.clone(),
    };
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(Failure::domain)?;
    runtime.block_on(async move {
        let state = AppState::new(ds, region_set, config).map_err(Failure::usage)?;
        eprintln!("serving on http://{addr}");
        service::serve(state, addr, ui).await.map_err(Failure::domain)
    })
}

#[cfg(not(feature = "service"))]
#[allow(clippy::too_many_arguments)]
fn serve(
    _: &Cli,
    _: &SamplesArg,
    _: Option<&Path>,
    _: &str,
    _: u16,
    _: ModeArg,
    _: &Option<Vec<String>>,
    _: &Path,
    _: Option<PathBuf>,
) -> CliResult {
    Err(Failure::usage("built without the `service` feature"))
}

/// Parse `args` and run; returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).try_init();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global() {
            log::debug!("thread pool already configured: {e}");
        }
    }
    match run_command(&cli) {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("geosplit: {}", f.message);
            f.code
        }
    }
}
