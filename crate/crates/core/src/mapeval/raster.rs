//! Bird's-eye-view rasterization of map elements and mask IoU.

use serde::{Deserialize, Serialize};

use super::MapEvalError;
use crate::ingest::{ElementClass, MapElement};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RasterSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    /// Meters per pixel.
    pub resolution: f64,
    /// Pixels whose centre lies within this distance of a polyline are set.
    pub half_width: f64,
}

impl Default for RasterSpec {
    fn default() -> Self {
        RasterSpec {
            x_range: [-30.0, 30.0],
            y_range: [-15.0, 15.0],
            resolution: 0.15,
            half_width: 0.5,
        }
    }
}

impl RasterSpec {
    pub fn validate(&self) -> Result<(), MapEvalError> {
        let finite = self.x_range.iter().chain(&self.y_range).all(|v| v.is_finite());
        if !finite
            || self.x_range[0] >= self.x_range[1]
            || self.y_range[0] >= self.y_range[1]
            || !(self.resolution.is_finite() && self.resolution > 0.0)
            || !(self.half_width.is_finite() && self.half_width >= 0.0)
        {
            return Err(MapEvalError::InvalidRaster(format!("{self:?}")));
        }
        if self.width() == 0 || self.height() == 0 {
            return Err(MapEvalError::InvalidRaster("raster has no pixels".into()));
        }
        Ok(())
    }

    pub fn width(&self) -> usize {
        ((self.x_range[1] - self.x_range[0]) / self.resolution).round() as usize
    }

    pub fn height(&self) -> usize {
        ((self.y_range[1] - self.y_range[0]) / self.resolution).round() as usize
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        RasterSpec {
            x_range: [self.x_range[0] + dx, self.x_range[1] + dx],
            y_range: [self.y_range[0] + dy, self.y_range[1] + dy],
            ..*self
        }
    }
}

/// Row-major binary mask; row 0 is the lowest `y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize) -> Self {
        Mask {
            width,
            height,
            data: vec![false; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize) {
        self.data[row * self.width + col] = true;
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn rows_with_pixels(&self) -> Vec<usize> {
        (0..self.height)
            .filter(|&r| self.data[r * self.width..(r + 1) * self.width].iter().any(|&b| b))
            .collect()
    }
}

/// One mask per element class, indexed by `ElementClass::index`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassMasks {
    pub masks: [Mask; 3],
}

impl ClassMasks {
    pub fn get(&self, class: ElementClass) -> &Mask {
        &self.masks[class.index()]
    }
}

fn segment_distance(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    (cx * cx + cy * cy).sqrt()
}

fn draw_segment(mask: &mut Mask, spec: &RasterSpec, a: [f64; 2], b: [f64; 2]) {
    let res = spec.resolution;
    let hw = spec.half_width;
    let lo_x = a[0].min(b[0]) - hw;
    let hi_x = a[0].max(b[0]) + hw;
    let lo_y = a[1].min(b[1]) - hw;
    let hi_y = a[1].max(b[1]) + hw;
    // Pixel ranges padded by one so the exact distance test decides.
    let c0 = ((lo_x / res).floor() as i64 - 1).max(0);
    let c1 = ((hi_x / res).ceil() as i64 + 1).min(mask.width as i64 - 1);
    let r0 = ((lo_y / res).floor() as i64 - 1).max(0);
    let r1 = ((hi_y / res).ceil() as i64 + 1).min(mask.height as i64 - 1);
    for r in r0..=r1 {
        let cy = (r as f64 + 0.5) * res;
        for c in c0..=c1 {
            let cx = (c as f64 + 0.5) * res;
            if segment_distance([cx, cy], a, b) <= hw {
                mask.set(r as usize, c as usize);
            }
        }
    }
}

/// Draw every element into its class mask. Geometry is expressed relative to
/// the raster origin, and pixels outside the window are clipped.
pub fn rasterize(elements: &[MapElement], spec: &RasterSpec) -> Result<ClassMasks, MapEvalError> {
    spec.validate()?;
    let (w, h) = (spec.width(), spec.height());
    let mut masks = [Mask::new(w, h), Mask::new(w, h), Mask::new(w, h)];
    let origin = [spec.x_range[0], spec.y_range[0]];
    for el in elements {
        let rel: Vec<[f64; 2]> = el.points.iter().map(|p| [p[0] - origin[0], p[1] - origin[1]]).collect();
        let mask = &mut masks[el.class.index()];
        if rel.len() == 1 {
            draw_segment(mask, spec, rel[0], rel[0]);
        }
        for seg in rel.windows(2) {
            draw_segment(mask, spec, seg[0], seg[1]);
        }
    }
    Ok(ClassMasks { masks })
}

/// Intersection over union; two empty masks score 1.
pub fn iou(pred: &Mask, gt: &Mask) -> Result<f64, MapEvalError> {
    let (inter, union) = overlap(pred, gt)?;
    Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
}

pub(crate) fn overlap(pred: &Mask, gt: &Mask) -> Result<(usize, usize), MapEvalError> {
    if (pred.width, pred.height) != (gt.width, gt.height) {
        return Err(MapEvalError::ShapeMismatch {
            pred: (pred.height, pred.width),
            gt: (gt.height, gt.width),
        });
    }
    let mut inter = 0;
    let mut union = 0;
    for (&a, &b) in pred.data.iter().zip(&gt.data) {
        inter += (a && b) as usize;
        union += (a || b) as usize;
    }
    Ok((inter, union))
}
