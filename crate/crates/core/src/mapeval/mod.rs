//! Vector map evaluation: Chamfer-thresholded AP / mAP and raster IoU.

pub mod ap;
pub mod chamfer;
pub mod raster;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{ElementClass, FrameElements, MapElement};

pub use ap::{ap_at_threshold, average_precision, match_predictions, MatchResult, PredMatch};
pub use chamfer::{chamfer, resample_polyline, DEFAULT_RESAMPLE_INTERVAL};
pub use raster::{iou, rasterize, ClassMasks, Mask, RasterSpec};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.5, 1.0, 1.5];

#[derive(Debug, Error, PartialEq)]
pub enum MapEvalError {
    #[error("degenerate polyline")]
    DegeneratePolyline,
    #[error("degenerate polyline in frame `{0}`")]
    Degenerate(String),
    #[error("prediction without confidence in frame `{0}`")]
    MissingConfidence(String),
    #[error("prediction frame `{0}` has no ground truth entry")]
    UnknownFrame(String),
    #[error("mask shapes differ: {pred:?} vs {gt:?}")]
    ShapeMismatch { pred: (usize, usize), gt: (usize, usize) },
    #[error("invalid raster spec: {0}")]
    InvalidRaster(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// One entry per threshold, `None` when the class has no ground truth.
    pub ap: Vec<Option<f64>>,
    pub map: Option<f64>,
    pub gt_elements: usize,
    pub pred_elements: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub thresholds: Vec<f64>,
    pub resample_interval: f64,
    pub classes: BTreeMap<ElementClass, ClassReport>,
    /// Mean of the defined class mAPs.
    pub overall: Option<f64>,
    /// Classes without ground truth, left out of `overall`.
    pub absent_classes: Vec<ElementClass>,
    pub frames: usize,
    pub gt_elements: usize,
    pub pred_elements: usize,
}

pub(crate) fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

impl EvalReport {
    pub fn check(&self) -> Result<(), String> {
        let mut maps = Vec::new();
        for (class, r) in &self.classes {
            if r.ap.len() != self.thresholds.len() {
                return Err(format!("{class}: one AP per threshold expected"));
            }
            let aps: Vec<f64> = r.ap.iter().flatten().copied().collect();
            if aps.iter().any(|a| !(0.0..=1.0).contains(a)) {
                return Err(format!("{class}: AP outside [0, 1]"));
            }
            let expect = if aps.len() == r.ap.len() { mean(&aps) } else { None };
            if expect != r.map {
                return Err(format!("{class}: mAP is not the mean of its APs"));
            }
            maps.extend(r.map);
        }
        if mean(&maps) != self.overall {
            return Err("overall is not the mean of class mAPs".into());
        }
        Ok(())
    }

    /// `class,threshold,ap` rows; an undefined AP is an empty cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("class,threshold,ap\n");
        for (class, r) in &self.classes {
            for (t, ap) in self.thresholds.iter().zip(&r.ap) {
                out.push_str(&format!("{class},{t},{}\n", crate::leakage::fmt_opt(*ap)));
            }
        }
        out
    }
}

fn check_thresholds(thresholds: &[f64]) -> Result<(), MapEvalError> {
    if thresholds.is_empty() || thresholds.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(MapEvalError::InvalidArgument(
            "thresholds must be non-empty and positive".into(),
        ));
    }
    Ok(())
}

/// Per-class AP at every threshold, class mAP and the overall mean.
pub fn evaluate(
    preds: &FrameElements,
    gts: &FrameElements,
    thresholds: &[f64],
    interval: f64,
) -> Result<EvalReport, MapEvalError> {
    check_thresholds(thresholds)?;
    let prepared = ap::prepare(preds, gts, interval)?;
    let mut classes = BTreeMap::new();
    let mut absent = Vec::new();
    let mut maps = Vec::new();
    for class in ElementClass::ALL {
        let frames = prepared.get(&class).map(Vec::as_slice).unwrap_or(&[]);
        let gt_elements: usize = frames.iter().map(|f| f.gts.len()).sum();
        let pred_elements: usize = frames.iter().map(|f| f.preds.len()).sum();
        let ap: Vec<Option<f64>> = thresholds
            .iter()
            .map(|&t| ap::match_class(class, frames, t).average_precision())
            .collect();
        let defined: Vec<f64> = ap.iter().flatten().copied().collect();
        let map = if gt_elements > 0 { mean(&defined) } else { None };
        if gt_elements == 0 {
            absent.push(class);
        }
        maps.extend(map);
        classes.insert(
            class,
            ClassReport {
                ap,
                map,
                gt_elements,
                pred_elements,
            },
        );
    }
    Ok(EvalReport {
        thresholds: thresholds.to_vec(),
        resample_interval: interval,
        overall: mean(&maps),
        absent_classes: absent,
        frames: gts.len(),
        gt_elements: gts.values().map(Vec::len).sum(),
        pred_elements: preds.values().map(Vec::len).sum(),
        classes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassIou {
    pub intersection: u64,
    pub union: u64,
    /// Dataset-level IoU; `None` when the class never appears.
    pub iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouReport {
    pub raster: RasterSpec,
    pub classes: BTreeMap<ElementClass, ClassIou>,
    pub mean: Option<f64>,
}

/// Rasterize predictions and ground truth frame by frame and accumulate
/// intersection and union per class over all frames.
pub fn evaluate_iou(preds: &FrameElements, gts: &FrameElements, spec: &RasterSpec) -> Result<IouReport, MapEvalError> {
    use rayon::prelude::*;
    spec.validate()?;
    ap::check_frames(preds, gts)?;
    let empty: Vec<MapElement> = Vec::new();
    let frames: Vec<(&String, &Vec<MapElement>)> = gts.iter().collect();
    let per_frame = frames
        .par_iter()
        .map(|&(frame, gt)| {
            let pm = rasterize(preds.get(frame).unwrap_or(&empty), spec)?;
            let gm = rasterize(gt, spec)?;
            let mut acc = [(0u64, 0u64); 3];
            for class in ElementClass::ALL {
                let (i, u) = raster::overlap(pm.get(class), gm.get(class))?;
                acc[class.index()] = (i as u64, u as u64);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>, MapEvalError>>()?;
    let mut classes = BTreeMap::new();
    let mut ious = Vec::new();
    for class in ElementClass::ALL {
        let (i, u) = per_frame
            .iter()
            .fold((0, 0), |(i, u), f| (i + f[class.index()].0, u + f[class.index()].1));
        let iou = (u > 0).then(|| i as f64 / u as f64);
        ious.extend(iou);
        classes.insert(
            class,
            ClassIou {
                intersection: i,
                union: u,
                iou,
            },
        );
    }
    Ok(IouReport {
        raster: spec.clone(),
        classes,
        mean: mean(&ious),
    })
}
