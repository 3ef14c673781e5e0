//! Greedy Chamfer matching and average precision.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::chamfer::{chamfer_resampled, check_polyline, resample_polyline};
use super::MapEvalError;
use crate::ingest::{ElementClass, FrameElements, MapElement};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredMatch {
    pub frame_id: String,
    /// Index of the prediction within its frame's element list.
    pub index: usize,
    pub confidence: f64,
    /// Index of the matched ground-truth element within its frame.
    pub gt: Option<usize>,
    /// Chamfer distance to the closest unmatched ground truth, if any was left.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub class: ElementClass,
    pub threshold: f64,
    /// Predictions in ranking order.
    pub matches: Vec<PredMatch>,
    pub gt_count: usize,
}

impl MatchResult {
    pub fn true_positives(&self) -> usize {
        self.matches.iter().filter(|m| m.gt.is_some()).count()
    }

    /// All-point average precision; `None` without ground truth.
    pub fn average_precision(&self) -> Option<f64> {
        let flags: Vec<bool> = self.matches.iter().map(|m| m.gt.is_some()).collect();
        average_precision(&flags, self.gt_count)
    }
}

/// Exact area under the precision/recall curve after making precision
/// non-increasing from the right. `hits` are TP flags in ranking order.
pub fn average_precision(hits: &[bool], gt_count: usize) -> Option<f64> {
    if gt_count == 0 {
        return None;
    }
    let mut tp = 0usize;
    let precision: Vec<f64> = hits
        .iter()
        .enumerate()
        .map(|(k, &hit)| {
            tp += hit as usize;
            tp as f64 / (k + 1) as f64
        })
        .collect();
    let mut envelope = precision;
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].max(envelope[k + 1]);
    }
    let area: f64 = hits
        .iter()
        .zip(&envelope)
        .filter(|(hit, _)| **hit)
        .map(|(_, p)| p)
        .sum();
    Some(area / gt_count as f64)
}

/// Resampled geometry and pairwise distances for one frame and class.
pub(crate) struct FrameClass {
    pub frame_rank: usize,
    pub frame_id: String,
    /// (index within frame, confidence)
    pub preds: Vec<(usize, f64)>,
    pub gts: Vec<usize>,
    /// `dist[p][g]`
    pub dist: Vec<Vec<f64>>,
}

impl FrameClass {
    /// Greedy matching for one threshold. Returns matches in frame ranking order.
    fn greedy(&self, threshold: f64) -> Vec<PredMatch> {
        let mut order: Vec<usize> = (0..self.preds.len()).collect();
        order.sort_by(|&a, &b| self.preds[b].1.total_cmp(&self.preds[a].1).then(a.cmp(&b)));
        let mut taken = vec![false; self.gts.len()];
        order
            .into_iter()
            .map(|p| {
                let nearest = (0..self.gts.len())
                    .filter(|&g| !taken[g])
                    .min_by(|&a, &b| self.dist[p][a].total_cmp(&self.dist[p][b]).then(a.cmp(&b)));
                let distance = nearest.map(|g| self.dist[p][g]);
                let gt = nearest.filter(|&g| self.dist[p][g] < threshold);
                if let Some(g) = gt {
                    taken[g] = true;
                }
                PredMatch {
                    frame_id: self.frame_id.clone(),
                    index: self.preds[p].0,
                    confidence: self.preds[p].1,
                    gt: gt.map(|g| self.gts[g]),
                    distance,
                }
            })
            .collect()
    }
}

pub(crate) fn check_frames(preds: &FrameElements, gts: &FrameElements) -> Result<(), MapEvalError> {
    if let Some(f) = preds.keys().find(|f| !gts.contains_key(*f)) {
        return Err(MapEvalError::UnknownFrame(f.clone()));
    }
    for (frame, els) in preds {
        for el in els {
            check_polyline(&el.points).map_err(|_| MapEvalError::Degenerate(frame.clone()))?;
            match el.confidence {
                None => return Err(MapEvalError::MissingConfidence(frame.clone())),
                Some(c) if !c.is_finite() => return Err(MapEvalError::MissingConfidence(frame.clone())),
                _ => {}
            }
        }
    }
    for (frame, els) in gts {
        for el in els {
            check_polyline(&el.points).map_err(|_| MapEvalError::Degenerate(frame.clone()))?;
        }
    }
    Ok(())
}

/// Precompute per frame and class all prediction/ground-truth distances.
pub(crate) fn prepare(
    preds: &FrameElements,
    gts: &FrameElements,
    interval: f64,
) -> Result<BTreeMap<ElementClass, Vec<FrameClass>>, MapEvalError> {
    check_frames(preds, gts)?;
    if !(interval.is_finite() && interval > 0.0) {
        return Err(MapEvalError::InvalidArgument(format!(
            "resample interval must be positive, got {interval}"
        )));
    }
    let empty: Vec<MapElement> = Vec::new();
    let frames: Vec<(usize, &String, &Vec<MapElement>)> =
        gts.iter().enumerate().map(|(rank, (f, g))| (rank, f, g)).collect();
    let per_frame: Vec<Vec<(ElementClass, FrameClass)>> = frames
        .par_iter()
        .map(|&(rank, frame, gt_els)| {
            let pred_els = preds.get(frame).unwrap_or(&empty);
            ElementClass::ALL
                .iter()
                .map(|&class| {
                    let p: Vec<(usize, &MapElement)> =
                        pred_els.iter().enumerate().filter(|(_, e)| e.class == class).collect();
                    let g: Vec<(usize, &MapElement)> =
                        gt_els.iter().enumerate().filter(|(_, e)| e.class == class).collect();
                    let gr: Vec<Vec<[f64; 2]>> =
                        g.iter().map(|(_, e)| resample_polyline(&e.points, interval)).collect();
                    let dist = p
                        .iter()
                        .map(|(_, e)| {
                            let pr = resample_polyline(&e.points, interval);
                            gr.iter().map(|g| chamfer_resampled(&pr, g)).collect()
                        })
                        .collect();
                    (
                        class,
                        FrameClass {
                            frame_rank: rank,
                            frame_id: frame.clone(),
                            preds: p.iter().map(|(i, e)| (*i, e.confidence.unwrap_or(0.0))).collect(),
                            gts: g.iter().map(|(i, _)| *i).collect(),
                            dist,
                        },
                    )
                })
                .collect()
        })
        .collect();
    let mut out: BTreeMap<ElementClass, Vec<FrameClass>> = BTreeMap::new();
    for frame in per_frame {
        for (class, fc) in frame {
            out.entry(class).or_default().push(fc);
        }
    }
    Ok(out)
}

pub(crate) fn match_class(class: ElementClass, frames: &[FrameClass], threshold: f64) -> MatchResult {
    let mut ranked: Vec<(f64, usize, usize, PredMatch)> = Vec::new();
    for fc in frames {
        for m in fc.greedy(threshold) {
            ranked.push((m.confidence, fc.frame_rank, m.index, m));
        }
    }
    // Descending confidence; ties by input order (frame, then element).
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    MatchResult {
        class,
        threshold,
        matches: ranked.into_iter().map(|r| r.3).collect(),
        gt_count: frames.iter().map(|f| f.gts.len()).sum(),
    }
}

pub fn match_predictions(
    preds: &FrameElements,
    gts: &FrameElements,
    class: ElementClass,
    threshold: f64,
    interval: f64,
) -> Result<MatchResult, MapEvalError> {
    let prepared = prepare(preds, gts, interval)?;
    let frames = prepared.get(&class).map(Vec::as_slice).unwrap_or(&[]);
    Ok(match_class(class, frames, threshold))
}

/// AP of one class at one Chamfer threshold; `None` when the class has no
/// ground truth anywhere.
pub fn ap_at_threshold(
    preds: &FrameElements,
    gts: &FrameElements,
    class: ElementClass,
    threshold: f64,
    interval: f64,
) -> Result<Option<f64>, MapEvalError> {
    Ok(match_predictions(preds, gts, class, threshold, interval)?.average_precision())
}
