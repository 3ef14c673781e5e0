//! Automatic Near-Extrapolation partitioning.
//!
//! Each map is discretized into square cells. Every set starts from one seed
//! cell and grows by attaching neighbouring cells; at each step the set
//! furthest below its target proportion grows by the frontier cell that
//! minimizes the deficit score
//!
//! ```text
//! sum_s |p_s - t_s| + lambda * sum_k sum_s tv(ratios_{s,k}, ratios_{full,k})
//! ```
//!
//! where `tv` is the total-variation distance between a set's value
//! distribution for attribute `k` and the map-wide distribution. A set
//! whose frontier is exhausted restarts from the most isolated free cell.
//! The owned cells are emitted as axis-aligned rectangles and the final
//! assignment is obtained by region assignment, with locked samples
//! keeping their locked label.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::assign::{assign_by_regions, AssignMode, CutReport};
use super::regions::{Region, RegionSet};
use super::SplitError;
use crate::ingest::Dataset;
use crate::leakage::{SetLabel, SplitAssignment};
use crate::spatial::{cell_of, Cell, DEFAULT_ANALYSIS_CELL};

pub const DEFAULT_TARGETS: [f64; 3] = [0.70, 0.15, 0.15];
/// A lock may push a set at most this far above its target.
pub const LOCK_SLACK: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionConfig {
    /// Train, val, test.
    pub targets: [f64; 3],
    pub cell_size: f64,
    pub attribute_keys: Vec<String>,
    pub lambda: f64,
    pub seed: u64,
}

impl Default for PartitionConfig {
    fn default() -> Self {
        PartitionConfig {
            targets: DEFAULT_TARGETS,
            cell_size: DEFAULT_ANALYSIS_CELL,
            attribute_keys: Vec::new(),
            lambda: 1.0,
            seed: 0,
        }
    }
}

pub fn check_targets(targets: &[f64; 3]) -> Result<(), SplitError> {
    if targets.iter().any(|t| !(t.is_finite() && *t > 0.0)) || (targets.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
        return Err(SplitError::InvalidTargets(format!(
            "targets must be positive and sum to 1, got {targets:?}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Partition {
    pub regions: RegionSet,
    pub split: SplitAssignment,
    pub cuts: CutReport,
    /// Owned cells per map, for inspection.
    pub cells: BTreeMap<String, BTreeMap<Cell, SetLabel>>,
}

struct CellData {
    cell: Cell,
    count: usize,
    /// Per attribute key: count per value index.
    attrs: Vec<Vec<usize>>,
    carriers: Vec<usize>,
    locked: [usize; 3],
}

#[derive(Clone)]
struct SetStats {
    count: usize,
    attrs: Vec<Vec<usize>>,
    carriers: Vec<usize>,
}

struct Grower<'a> {
    cfg: &'a PartitionConfig,
    cells: Vec<CellData>,
    lookup: HashMap<Cell, usize>,
    owner: Vec<Option<usize>>,
    rank: Vec<usize>,
    frontier: [BTreeSet<(Cell, usize)>; 3],
    stats: [SetStats; 3],
    full: Vec<Vec<f64>>,
    total: usize,
    free: usize,
}

const NEIGHBOURS: [(i64, i64); 8] = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)];

impl<'a> Grower<'a> {
    fn new(cfg: &'a PartitionConfig, cells: Vec<CellData>, value_counts: &[usize], rng: &mut ChaCha8Rng) -> Self {
        let lookup = cells.iter().enumerate().map(|(i, c)| (c.cell, i)).collect();
        let empty = SetStats {
            count: 0,
            attrs: value_counts.iter().map(|&n| vec![0; n]).collect(),
            carriers: vec![0; value_counts.len()],
        };
        let total = cells.iter().map(|c| c.count).sum();
        let mut full = Vec::with_capacity(value_counts.len());
        for (k, &n) in value_counts.iter().enumerate() {
            let carriers: usize = cells.iter().map(|c| c.carriers[k]).sum();
            full.push(
                (0..n)
                    .map(|v| {
                        if carriers == 0 {
                            0.0
                        } else {
                            cells.iter().map(|c| c.attrs[k][v]).sum::<usize>() as f64 / carriers as f64
                        }
                    })
                    .collect(),
            );
        }
        let mut order: Vec<usize> = (0..cells.len()).collect();
        order.shuffle(rng);
        let mut rank = vec![0; cells.len()];
        for (r, &i) in order.iter().enumerate() {
            rank[i] = r;
        }
        let n = cells.len();
        Grower {
            cfg,
            cells,
            lookup,
            owner: vec![None; n],
            rank,
            frontier: Default::default(),
            stats: [empty.clone(), empty.clone(), empty],
            full,
            total,
            free: n,
        }
    }

    fn component(&self, s: usize, extra: Option<&CellData>) -> f64 {
        let st = &self.stats[s];
        let count = st.count + extra.map_or(0, |c| c.count);
        let mut score = (count as f64 / self.total as f64 - self.cfg.targets[s]).abs();
        if self.cfg.lambda != 0.0 {
            let mut dev = 0.0;
            for (k, full) in self.full.iter().enumerate() {
                let carriers = st.carriers[k] + extra.map_or(0, |c| c.carriers[k]);
                if carriers == 0 {
                    continue;
                }
                let tv: f64 = full
                    .iter()
                    .enumerate()
                    .map(|(v, &r)| {
                        let n = st.attrs[k][v] + extra.map_or(0, |c| c.attrs[k][v]);
                        (n as f64 / carriers as f64 - r).abs()
                    })
                    .sum();
                dev += tv / 2.0;
            }
            score += self.cfg.lambda * dev;
        }
        score
    }

    fn attach(&mut self, idx: usize, s: usize) {
        debug_assert!(self.owner[idx].is_none());
        self.owner[idx] = Some(s);
        self.free -= 1;
        let key = (self.cells[idx].cell, idx);
        for f in &mut self.frontier {
            f.remove(&key);
        }
        let c = &self.cells[idx];
        let st = &mut self.stats[s];
        st.count += c.count;
        for (k, vals) in c.attrs.iter().enumerate() {
            st.carriers[k] += c.carriers[k];
            for (v, n) in vals.iter().enumerate() {
                st.attrs[k][v] += n;
            }
        }
        let (i, j) = c.cell;
        for (di, dj) in NEIGHBOURS {
            if let Some(&n) = self.lookup.get(&(i + di, j + dj)) {
                if self.owner[n].is_none() {
                    self.frontier[s].insert((self.cells[n].cell, n));
                }
            }
        }
    }

    fn owned_neighbours(&self, idx: usize) -> usize {
        let (i, j) = self.cells[idx].cell;
        NEIGHBOURS
            .iter()
            .filter(|(di, dj)| {
                self.lookup
                    .get(&(i + di, j + dj))
                    .is_some_and(|&n| self.owner[n].is_some())
            })
            .count()
    }

    /// Free cell farthest from every owned cell; the first seed is random.
    fn seed_cell(&self) -> Option<usize> {
        let owned: Vec<Cell> = (0..self.cells.len())
            .filter(|&i| self.owner[i].is_some())
            .map(|i| self.cells[i].cell)
            .collect();
        (0..self.cells.len())
            .filter(|&i| self.owner[i].is_none())
            .map(|i| {
                let (ci, cj) = self.cells[i].cell;
                let d = owned
                    .iter()
                    .map(|&(oi, oj)| (ci - oi).pow(2) + (cj - oj).pow(2))
                    .min()
                    .unwrap_or(0);
                (i, d)
            })
            .max_by(|a, b| a.1.cmp(&b.1).then(self.rank[b.0].cmp(&self.rank[a.0])))
            .map(|(i, _)| i)
    }

    /// Free cell with the fewest owned neighbours.
    fn jump_cell(&self) -> Option<usize> {
        (0..self.cells.len())
            .filter(|&i| self.owner[i].is_none())
            .min_by_key(|&i| (self.owned_neighbours(i), self.rank[i]))
    }

    fn best_in_frontier(&self, s: usize) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64)> = None;
        for &(_, idx) in &self.frontier[s] {
            let score = self.component(s, Some(&self.cells[idx]));
            if best.is_none_or(|(_, b)| score < b) {
                best = Some((idx, score));
            }
        }
        best
    }

    fn grow(&mut self) {
        // Cells holding locked samples belong to the locked majority.
        for idx in 0..self.cells.len() {
            let locked = self.cells[idx].locked;
            let most = *locked.iter().max().unwrap();
            if most > 0 {
                let s = locked.iter().position(|&n| n == most).unwrap();
                self.attach(idx, s);
            }
        }
        for s in 0..3 {
            if self.stats[s].count == 0 {
                if let Some(idx) = self.seed_cell() {
                    self.attach(idx, s);
                }
            }
        }
        while self.free > 0 {
            let mut order: Vec<(f64, usize)> = (0..3)
                .map(|s| {
                    let p = self.stats[s].count as f64 / self.total as f64;
                    ((self.cfg.targets[s] - p) / self.cfg.targets[s], s)
                })
                .collect();
            order.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));

            let mut step = None;
            if let Some(&(_, s)) = order.iter().find(|(d, _)| *d > 0.0) {
                step = match self.best_in_frontier(s) {
                    Some((idx, _)) => Some((idx, s)),
                    None => self.jump_cell().map(|idx| (idx, s)),
                };
            }
            if step.is_none() {
                // Every set is at or above target: place the remaining cells
                // where they hurt the score least.
                let mut best: Option<(usize, usize, f64)> = None;
                for s in 0..3 {
                    if let Some((idx, score)) = self.best_in_frontier(s) {
                        let delta = score - self.component(s, None);
                        if best.is_none_or(|(_, _, b)| delta < b) {
                            best = Some((idx, s, delta));
                        }
                    }
                }
                step = best.map(|(idx, s, _)| (idx, s)).or_else(|| {
                    let idx = self.jump_cell()?;
                    let s = (0..3)
                        .min_by(|&a, &b| {
                            let da = self.component(a, Some(&self.cells[idx])) - self.component(a, None);
                            let db = self.component(b, Some(&self.cells[idx])) - self.component(b, None);
                            da.total_cmp(&db)
                        })
                        .unwrap();
                    Some((idx, s))
                });
            }
            let (idx, s) = step.expect("a free cell exists");
            self.attach(idx, s);
        }
    }
}

/// Merge owned cells into maximal horizontal strips, then stack identical
/// strips of consecutive rows into rectangles `(set, i0, i1, j0, j1)`.
fn rectangles(owned: &BTreeMap<Cell, SetLabel>) -> Vec<(SetLabel, i64, i64, i64, i64)> {
    let mut rows: BTreeMap<i64, Vec<(i64, SetLabel)>> = BTreeMap::new();
    for (&(i, j), &s) in owned {
        rows.entry(j).or_default().push((i, s));
    }
    let mut done = Vec::new();
    let mut open: BTreeMap<(SetLabel, i64, i64), (i64, i64)> = BTreeMap::new();
    for (&j, cells) in &rows {
        let mut strips = Vec::new();
        let mut iter = cells.iter().copied();
        if let Some((mut start, mut set)) = iter.next() {
            let mut end = start;
            for (i, s) in iter {
                if i == end + 1 && s == set {
                    end = i;
                } else {
                    strips.push((set, start, end));
                    start = i;
                    end = i;
                    set = s;
                }
            }
            strips.push((set, start, end));
        }
        let mut next_open = BTreeMap::new();
        for key in strips {
            match open.remove(&key) {
                Some((j0, j1)) if j1 == j - 1 => {
                    next_open.insert(key, (j0, j));
                }
                stale => {
                    if let Some((j0, j1)) = stale {
                        done.push((key.0, key.1, key.2, j0, j1));
                    }
                    next_open.insert(key, (j, j));
                }
            }
        }
        for ((s, i0, i1), (j0, j1)) in std::mem::replace(&mut open, next_open) {
            done.push((s, i0, i1, j0, j1));
        }
    }
    for ((s, i0, i1), (j0, j1)) in open {
        done.push((s, i0, i1, j0, j1));
    }
    done.sort_by_key(|&(s, i0, i1, j0, j1)| (j0, i0, j1, i1, s));
    done
}

pub fn auto_partition(
    ds: &Dataset,
    cfg: &PartitionConfig,
    locked: Option<&SplitAssignment>,
) -> Result<Partition, SplitError> {
    check_targets(&cfg.targets)?;
    if !(cfg.cell_size.is_finite() && cfg.cell_size > 0.0) {
        return Err(SplitError::InvalidTargets(format!(
            "cell size must be positive, got {}",
            cfg.cell_size
        )));
    }
    let samples = ds.samples();

    let mut lock_of: Vec<Option<usize>> = vec![None; ds.len()];
    if let Some(lock) = locked {
        let mut per_set = [0usize; 3];
        for (id, &label) in &lock.labels {
            let idx = ds
                .index_of(id)
                .ok_or_else(|| SplitError::Leakage(crate::leakage::LeakageError::UnknownSample(id.clone())))?;
            if let Some(s) = SetLabel::ASSIGNED.iter().position(|&l| l == label) {
                lock_of[idx] = Some(s);
                per_set[s] += 1;
            }
        }
        for (s, &locked) in per_set.iter().enumerate() {
            let share = if ds.is_empty() {
                0.0
            } else {
                locked as f64 / ds.len() as f64
            };
            if share > cfg.targets[s] + LOCK_SLACK {
                return Err(SplitError::InfeasibleLock {
                    set: SetLabel::ASSIGNED[s],
                    locked: share,
                    target: cfg.targets[s],
                });
            }
        }
    }

    // Attribute value vocabularies, shared across maps.
    let vocab: Vec<BTreeMap<&str, usize>> = cfg
        .attribute_keys
        .iter()
        .map(|k| {
            let values: BTreeSet<&str> = samples
                .iter()
                .filter_map(|s| s.attrs.get(k).map(String::as_str))
                .collect();
            values.into_iter().enumerate().map(|(i, v)| (v, i)).collect()
        })
        .collect();
    let value_counts: Vec<usize> = vocab.iter().map(BTreeMap::len).collect();

    let mut per_map: BTreeMap<&str, BTreeMap<Cell, CellData>> = BTreeMap::new();
    for (idx, s) in samples.iter().enumerate() {
        let cell = cell_of(s.x, s.y, cfg.cell_size);
        let data = per_map
            .entry(s.map_id.as_str())
            .or_default()
            .entry(cell)
            .or_insert_with(|| CellData {
                cell,
                count: 0,
                attrs: value_counts.iter().map(|&n| vec![0; n]).collect(),
                carriers: vec![0; value_counts.len()],
                locked: [0; 3],
            });
        data.count += 1;
        for (k, key) in cfg.attribute_keys.iter().enumerate() {
            if let Some(v) = s.attrs.get(key) {
                data.attrs[k][vocab[k][v.as_str()]] += 1;
                data.carriers[k] += 1;
            }
        }
        if let Some(s) = lock_of[idx] {
            data.locked[s] += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut owned_cells: BTreeMap<String, BTreeMap<Cell, SetLabel>> = BTreeMap::new();
    let mut regions = Vec::new();
    for (map_id, cells) in per_map {
        let mut grower = Grower::new(cfg, cells.into_values().collect(), &value_counts, &mut rng);
        grower.grow();
        let owned: BTreeMap<Cell, SetLabel> = grower
            .cells
            .iter()
            .zip(&grower.owner)
            .map(|(c, o)| (c.cell, SetLabel::ASSIGNED[o.expect("all cells owned")]))
            .collect();
        let cs = cfg.cell_size;
        for (k, (set, i0, i1, j0, j1)) in rectangles(&owned).into_iter().enumerate() {
            let (x0, x1) = (i0 as f64 * cs, (i1 + 1) as f64 * cs);
            let (y0, y1) = (j0 as f64 * cs, (j1 + 1) as f64 * cs);
            regions.push(Region {
                name: format!("auto/{map_id}/{set}/{k}"),
                map_id: map_id.to_string(),
                set,
                priority: k as i64,
                polygon: vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]],
            });
        }
        owned_cells.insert(map_id.to_string(), owned);
    }
    let regions = RegionSet::new(regions);

    let (split, _) = assign_by_regions(ds, &regions, AssignMode::PerSample)?;
    let mut labels = split.resolve(ds)?;
    for (l, lock) in labels.iter_mut().zip(&lock_of) {
        if let Some(s) = lock {
            *l = SetLabel::ASSIGNED[*s];
        }
    }
    let cuts = CutReport::from_labels(ds, &labels);
    let provenance = format!("auto_partition(seed={}, cell={})", cfg.seed, cfg.cell_size);
    Ok(Partition {
        regions,
        split: SplitAssignment::from_dense(ds, &labels, provenance),
        cuts,
        cells: owned_cells,
    })
}
