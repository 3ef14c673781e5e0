//! Uniform-grid spatial index and cell density statistics.
//!
//! Cells are anchored at the origin of each map frame: a point `(x, y)` lies
//! in cell `(floor(x / size), floor(y / size))`.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::Dataset;

pub const DEFAULT_INDEX_CELL: f64 = 50.0;
pub const DEFAULT_ANALYSIS_CELL: f64 = 60.0;

#[derive(Debug, Error, PartialEq)]
pub enum SpatialError {
    #[error("unknown sample id `{0}`")]
    UnknownSampleId(String),
    #[error("unknown map `{0}`")]
    UnknownMap(String),
    #[error("cell size must be positive and finite, got {0}")]
    InvalidCellSize(f64),
}

pub type Cell = (i64, i64);

#[inline]
pub fn cell_of(x: f64, y: f64, cell_size: f64) -> Cell {
    ((x / cell_size).floor() as i64, (y / cell_size).floor() as i64)
}

#[inline]
pub fn planar_distance(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let dx = ax - bx;
    let dy = ay - by;
    (dx * dx + dy * dy).sqrt()
}

fn check_cell_size(cell_size: f64) -> Result<(), SpatialError> {
    if cell_size > 0.0 && cell_size.is_finite() {
        Ok(())
    } else {
        Err(SpatialError::InvalidCellSize(cell_size))
    }
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    idx: usize,
    x: f64,
    y: f64,
}

#[derive(Debug, Clone, Default)]
struct MapGrid {
    buckets: HashMap<Cell, Vec<Entry>>,
    min: Cell,
    max: Cell,
}

impl MapGrid {
    fn scan(&self, cell: Cell, qx: f64, qy: f64, best: &mut f64) {
        if let Some(entries) = self.buckets.get(&cell) {
            for e in entries {
                let d = planar_distance(qx, qy, e.x, e.y);
                if d < *best {
                    *best = d;
                }
            }
        }
    }

    fn nearest(&self, qx: f64, qy: f64, cell_size: f64) -> f64 {
        let (qi, qj) = cell_of(qx, qy, cell_size);
        // Rings closer than the occupied bounding box are empty.
        let gap_i = (self.min.0 - qi).max(qi - self.max.0).max(0);
        let gap_j = (self.min.1 - qj).max(qj - self.max.1).max(0);
        let first = gap_i.max(gap_j);
        let last = (qi - self.min.0)
            .abs()
            .max((qi - self.max.0).abs())
            .max((qj - self.min.1).abs())
            .max((qj - self.max.1).abs());

        let mut best = f64::INFINITY;
        for r in first..=last {
            self.scan_ring(qi, qj, r, qx, qy, &mut best);
            if best.is_finite() {
                // Every point outside rings 0..=r lies outside the square
                // [qi-r, qi+r] x [qj-r, qj+r] of cells.
                let lo_x = (qi - r) as f64 * cell_size;
                let hi_x = (qi + r + 1) as f64 * cell_size;
                let lo_y = (qj - r) as f64 * cell_size;
                let hi_y = (qj + r + 1) as f64 * cell_size;
                let bound = (qx - lo_x).min(hi_x - qx).min(qy - lo_y).min(hi_y - qy);
                // x / cell_size can round across a cell edge; stop a little late.
                let slack = 1e-9 * (1.0 + qx.abs().max(qy.abs()));
                if best <= bound - slack {
                    break;
                }
            }
        }
        best
    }

    fn scan_ring(&self, qi: i64, qj: i64, r: i64, qx: f64, qy: f64, best: &mut f64) {
        if r == 0 {
            self.scan((qi, qj), qx, qy, best);
            return;
        }
        let i_lo = (qi - r).max(self.min.0);
        let i_hi = (qi + r).min(self.max.0);
        let j_lo = (qj - r).max(self.min.1);
        let j_hi = (qj + r).min(self.max.1);
        for j in [qj - r, qj + r] {
            if j < self.min.1 || j > self.max.1 {
                continue;
            }
            for i in i_lo..=i_hi {
                self.scan((i, j), qx, qy, best);
            }
        }
        for i in [qi - r, qi + r] {
            if i < self.min.0 || i > self.max.0 {
                continue;
            }
            for j in j_lo.max(qj - r + 1)..=j_hi.min(qj + r - 1) {
                self.scan((i, j), qx, qy, best);
            }
        }
    }
}

/// Immutable per-map bucket index over a subset of a dataset's samples.
#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell_size: f64,
    maps: BTreeMap<String, MapGrid>,
    len: usize,
}

impl SpatialIndex {
    /// Index the samples at the given dataset positions.
    pub fn from_indices(
        ds: &Dataset,
        indices: impl IntoIterator<Item = usize>,
        cell_size: f64,
    ) -> Result<Self, SpatialError> {
        check_cell_size(cell_size)?;
        let samples = ds.samples();
        let mut maps: BTreeMap<String, MapGrid> = BTreeMap::new();
        let mut len = 0;
        for idx in indices {
            let s = &samples[idx];
            let cell = cell_of(s.x, s.y, cell_size);
            let grid = match maps.get_mut(&s.map_id) {
                Some(g) => g,
                None => maps.entry(s.map_id.clone()).or_insert_with(|| MapGrid {
                    buckets: HashMap::new(),
                    min: cell,
                    max: cell,
                }),
            };
            grid.min = (grid.min.0.min(cell.0), grid.min.1.min(cell.1));
            grid.max = (grid.max.0.max(cell.0), grid.max.1.max(cell.1));
            grid.buckets
                .entry(cell)
                .or_default()
                .push(Entry { idx, x: s.x, y: s.y });
            len += 1;
        }
        Ok(SpatialIndex { cell_size, maps, len })
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn has_map(&self, map_id: &str) -> bool {
        self.maps.contains_key(map_id)
    }

    pub fn bucket_count(&self, map_id: &str) -> usize {
        self.maps.get(map_id).map_or(0, |g| g.buckets.len())
    }

    /// Dataset indices stored in one bucket, in insertion order.
    pub fn bucket(&self, map_id: &str, cell: Cell) -> Vec<usize> {
        self.maps
            .get(map_id)
            .and_then(|g| g.buckets.get(&cell))
            .map(|es| es.iter().map(|e| e.idx).collect())
            .unwrap_or_default()
    }

    /// Exact planar distance from `(x, y)` to the closest indexed sample on
    /// `map_id`, or `None` when that map has nothing indexed.
    pub fn nearest_distance_at(&self, map_id: &str, x: f64, y: f64) -> Option<f64> {
        let grid = self.maps.get(map_id)?;
        Some(grid.nearest(x, y, self.cell_size))
    }

    pub fn nearest_distance(&self, query: &crate::ingest::Sample) -> Option<f64> {
        self.nearest_distance_at(&query.map_id, query.x, query.y)
    }

    /// Nearest distances for many dataset samples, computed in parallel.
    pub fn nearest_distances(&self, ds: &Dataset, queries: &[usize]) -> Vec<Option<f64>> {
        let samples = ds.samples();
        queries
            .par_iter()
            .map(|&i| self.nearest_distance(&samples[i]))
            .collect()
    }
}

/// Build an index over the samples named in `subset`.
pub fn build_index<'a>(
    ds: &Dataset,
    subset: impl IntoIterator<Item = &'a str>,
    cell_size: f64,
) -> Result<SpatialIndex, SpatialError> {
    let indices = subset
        .into_iter()
        .map(|id| {
            ds.index_of(id)
                .ok_or_else(|| SpatialError::UnknownSampleId(id.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    SpatialIndex::from_indices(ds, indices, cell_size)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCount {
    pub i: i64,
    pub j: i64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarginalBin {
    pub samples_per_cell: u64,
    pub cells: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapHistogram {
    pub samples: u64,
    /// Non-empty cells sorted by `(i, j)`.
    pub cells: Vec<CellCount>,
    /// Number of cells holding each sample count, ascending by count.
    pub marginal: Vec<MarginalBin>,
}

impl MapHistogram {
    pub fn non_empty_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn max_count(&self) -> u64 {
        self.cells.iter().map(|c| c.count).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellHistogram {
    pub cell_size: f64,
    pub maps: BTreeMap<String, MapHistogram>,
}

impl CellHistogram {
    pub fn total(&self) -> u64 {
        self.maps.values().map(|m| m.samples).sum()
    }

    /// Recheck conservation: per map, cell counts and marginal both sum to
    /// the sample count.
    pub fn check(&self) -> Result<(), String> {
        for (map, h) in &self.maps {
            let cells: u64 = h.cells.iter().map(|c| c.count).sum();
            let marg: u64 = h.marginal.iter().map(|b| b.samples_per_cell * b.cells).sum();
            let ncells: u64 = h.marginal.iter().map(|b| b.cells).sum();
            if cells != h.samples || marg != h.samples || ncells != h.cells.len() as u64 {
                return Err(format!("histogram for map `{map}` is not conservative"));
            }
        }
        Ok(())
    }
}

pub fn cell_histogram_indices(
    ds: &Dataset,
    indices: impl IntoIterator<Item = usize>,
    cell_size: f64,
) -> Result<CellHistogram, SpatialError> {
    check_cell_size(cell_size)?;
    let samples = ds.samples();
    let mut per_map: BTreeMap<&str, BTreeMap<Cell, u64>> = BTreeMap::new();
    for idx in indices {
        let s = &samples[idx];
        *per_map
            .entry(s.map_id.as_str())
            .or_default()
            .entry(cell_of(s.x, s.y, cell_size))
            .or_insert(0) += 1;
    }
    let maps = per_map
        .into_iter()
        .map(|(map, cells)| {
            let mut marginal: BTreeMap<u64, u64> = BTreeMap::new();
            for &c in cells.values() {
                *marginal.entry(c).or_insert(0) += 1;
            }
            let hist = MapHistogram {
                samples: cells.values().sum(),
                cells: cells
                    .into_iter()
                    .map(|((i, j), count)| CellCount { i, j, count })
                    .collect(),
                marginal: marginal
                    .into_iter()
                    .map(|(samples_per_cell, cells)| MarginalBin {
                        samples_per_cell,
                        cells,
                    })
                    .collect(),
            };
            (map.to_string(), hist)
        })
        .collect();
    Ok(CellHistogram { cell_size, maps })
}

pub fn cell_histogram<'a>(
    ds: &Dataset,
    subset: Option<impl IntoIterator<Item = &'a str>>,
    cell_size: f64,
) -> Result<CellHistogram, SpatialError> {
    match subset {
        None => cell_histogram_indices(ds, 0..ds.len(), cell_size),
        Some(ids) => {
            let indices = ids
                .into_iter()
                .map(|id| {
                    ds.index_of(id)
                        .ok_or_else(|| SpatialError::UnknownSampleId(id.to_string()))
                })
                .collect::<Result<Vec<_>, _>>()?;
            cell_histogram_indices(ds, indices, cell_size)
        }
    }
}

/// Dense count matrix over the bounding box of a map's non-empty cells.
/// `counts[i - i0][j - j0]` is the count of cell `(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub map_id: String,
    pub cell_size: f64,
    pub i0: i64,
    pub j0: i64,
    pub counts: Vec<Vec<u64>>,
}

impl Heatmap {
    pub fn sum(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn heatmap_export(h: &CellHistogram, map_id: &str) -> Result<Heatmap, SpatialError> {
    let mh = h
        .maps
        .get(map_id)
        .ok_or_else(|| SpatialError::UnknownMap(map_id.to_string()))?;
    if mh.cells.is_empty() {
        return Ok(Heatmap {
            map_id: map_id.to_string(),
            cell_size: h.cell_size,
            i0: 0,
            j0: 0,
            counts: Vec::new(),
        });
    }
    let i0 = mh.cells.iter().map(|c| c.i).min().unwrap_or(0);
    let i1 = mh.cells.iter().map(|c| c.i).max().unwrap_or(0);
    let j0 = mh.cells.iter().map(|c| c.j).min().unwrap_or(0);
    let j1 = mh.cells.iter().map(|c| c.j).max().unwrap_or(0);
    let mut counts = vec![vec![0u64; (j1 - j0 + 1) as usize]; (i1 - i0 + 1) as usize];
    for c in &mh.cells {
        counts[(c.i - i0) as usize][(c.j - j0) as usize] = c.count;
    }
    Ok(Heatmap {
        map_id: map_id.to_string(),
        cell_size: h.cell_size,
        i0,
        j0,
        counts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Sample;

    pub(crate) fn ds_from(points: &[(&str, f64, f64)]) -> Dataset {
        let samples = points
            .iter()
            .enumerate()
            .map(|(i, &(map, x, y))| Sample {
                id: format!("s{i}"),
                sequence_id: format!("q{i}"),
                map_id: map.into(),
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
    fn four_samples_one_bucket() {
        let ds = ds_from(&[("m", 1.0, 1.0), ("m", 10.0, 2.0), ("m", 30.0, 40.0), ("m", 49.0, 0.0)]);
        let idx = SpatialIndex::from_indices(&ds, 0..4, 50.0).unwrap();
        assert_eq!(idx.bucket_count("m"), 1);
        assert_eq!(idx.bucket("m", (0, 0)).len(), 4);
    }

    #[test]
    fn floor_rule_same_bucket() {
        let ds = ds_from(&[("m", 0.0, 0.0), ("m", 49.9, 49.9), ("m", -0.1, 0.0)]);
        let idx = build_index(&ds, ["s0", "s1", "s2"], 50.0).unwrap();
        assert_eq!(idx.bucket("m", (0, 0)), vec![0, 1]);
        assert_eq!(idx.bucket("m", (-1, 0)), vec![2]);
    }

    #[test]
    fn empty_index_has_no_neighbor() {
        let ds = ds_from(&[("m", 0.0, 0.0)]);
        let idx = build_index(&ds, std::iter::empty(), 50.0).unwrap();
        assert!(idx.is_empty());
        assert_eq!(idx.nearest_distance(&ds.samples()[0]), None);
    }

    #[test]
    fn unknown_id_and_bad_cell() {
        let ds = ds_from(&[("m", 0.0, 0.0)]);
        assert_eq!(
            build_index(&ds, ["nope"], 50.0).unwrap_err(),
            SpatialError::UnknownSampleId("nope".into())
        );
        assert!(build_index(&ds, ["s0"], 0.0).is_err());
        assert!(build_index(&ds, ["s0"], f64::NAN).is_err());
    }

    #[test]
    fn three_four_five() {
        let ds = ds_from(&[("m", 0.0, 0.0)]);
        let idx = build_index(&ds, ["s0"], 50.0).unwrap();
        assert_eq!(idx.nearest_distance_at("m", 3.0, 4.0), Some(5.0));
        assert_eq!(idx.nearest_distance_at("other", 3.0, 4.0), None);
    }

    #[test]
    fn far_queries_are_exact() {
        let ds = ds_from(&[("m", 0.0, 0.0), ("m", 120.0, -75.0), ("m", -3000.0, 10.0)]);
        let idx = SpatialIndex::from_indices(&ds, 0..3, 50.0).unwrap();
        for &(x, y) in &[(1e5, 1e5), (-1e4, 0.0), (60.0, -40.0), (-1500.0, 0.0)] {
            let brute = ds
                .samples()
                .iter()
                .map(|s| planar_distance(x, y, s.x, s.y))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(idx.nearest_distance_at("m", x, y), Some(brute));
        }
    }

    #[test]
    fn histogram_examples() {
        let ds = ds_from(&[("m", 10.0, 10.0); 5]);
        let h = cell_histogram_indices(&ds, 0..5, 60.0).unwrap();
        let m = &h.maps["m"];
        assert_eq!(m.cells, vec![CellCount { i: 0, j: 0, count: 5 }]);
        assert_eq!(
            m.marginal,
            vec![MarginalBin {
                samples_per_cell: 5,
                cells: 1
            }]
        );
        h.check().unwrap();

        let ds = ds_from(&[("m", 10.0, 10.0), ("m", 70.0, 10.0)]);
        let h = cell_histogram(&ds, None::<Vec<&str>>, 60.0).unwrap();
        let counts: Vec<u64> = h.maps["m"].cells.iter().map(|c| c.count).collect();
        assert_eq!(counts, vec![1, 1]);
        assert_eq!(h.maps["m"].non_empty_cells(), 2);
    }

    #[test]
    fn heatmap_shapes() {
        let ds = ds_from(&[("m", 10.0, 10.0)]);
        let h = cell_histogram_indices(&ds, 0..1, 60.0).unwrap();
        let hm = heatmap_export(&h, "m").unwrap();
        assert_eq!(hm.counts, vec![vec![1]]);

        let ds = ds_from(&[("m", 1.0, 1.0), ("m", 121.0, 1.0)]);
        let h = cell_histogram_indices(&ds, 0..2, 60.0).unwrap();
        let hm = heatmap_export(&h, "m").unwrap();
        assert_eq!(hm.counts, vec![vec![1], vec![0], vec![1]]);
        assert_eq!((hm.i0, hm.j0), (0, 0));
        assert_eq!(
            heatmap_export(&h, "x").unwrap_err(),
            SpatialError::UnknownMap("x".into())
        );
    }
}
