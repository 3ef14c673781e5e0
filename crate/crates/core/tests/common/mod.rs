//! Generators and brute-force references shared by the integration tests.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use geosplit::ingest::{ElementClass, FrameElements, MapElement};
use geosplit::split::{Region, RegionSet};
use geosplit::{Dataset, Sample, SetLabel, SplitAssignment};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn sample(id: String, seq: String, map: &str, x: f64, y: f64, t: i64) -> Sample {
    Sample {
        id,
        sequence_id: seq,
        map_id: map.to_string(),
        x,
        y,
        t,
        keyframe: true,
        attrs: BTreeMap::new(),
    }
}

/// Random drives: each sequence is a jittered walk on one map.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, maps: usize, extent: f64) -> Dataset {
    let mut out = Vec::with_capacity(n);
    let mut seq = 0;
    while out.len() < n {
        let map = format!("map{}", rng.random_range(0..maps.max(1)));
        let len = rng.random_range(1..=40).min(n - out.len());
        let (mut x, mut y) = (rng.random_range(-extent..extent), rng.random_range(-extent..extent));
        let heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        for k in 0..len {
            let mut s = sample(
                format!("s{}", out.len()),
                format!("q{seq}"),
                &map,
                x,
                y,
                k as i64 * 500_000,
            );
            s.keyframe = k % 5 == 0;
            if rng.random_bool(0.8) {
                s.attrs.insert(
                    "weather".into(),
                    if rng.random_bool(0.3) { "rain" } else { "clear" }.into(),
                );
            }
            s.attrs
                .insert("tod".into(), ["day", "night", "dusk"][rng.random_range(0..3)].into());
            out.push(s);
            let step = rng.random_range(0.0..8.0);
            x += step * heading.cos() + rng.random_range(-0.5..0.5);
            y += step * heading.sin() + rng.random_range(-0.5..0.5);
        }
        seq += 1;
    }
    Dataset::new(out).unwrap()
}

/// Independent points, optionally clustered, over one or more maps.
pub fn scattered_dataset(rng: &mut ChaCha8Rng, n: usize, maps: usize, extent: f64, clustered: bool) -> Dataset {
    let centers: Vec<(f64, f64)> = (0..5)
        .map(|_| (rng.random_range(-extent..extent), rng.random_range(-extent..extent)))
        .collect();
    let samples = (0..n)
        .map(|i| {
            let map = format!("map{}", rng.random_range(0..maps.max(1)));
            let (x, y) = if clustered {
                let c = centers[rng.random_range(0..centers.len())];
                (c.0 + rng.random_range(-20.0..20.0), c.1 + rng.random_range(-20.0..20.0))
            } else {
                (rng.random_range(-extent..extent), rng.random_range(-extent..extent))
            };
            sample(format!("p{i}"), format!("q{i}"), &map, x, y, 0)
        })
        .collect();
    Dataset::new(samples).unwrap()
}

/// `side x side` samples at `spacing` meters on one map, one sequence per row.
pub fn grid_dataset(side: usize, spacing: f64, map: &str) -> Dataset {
    let mut out = Vec::with_capacity(side * side);
    for r in 0..side {
        for c in 0..side {
            out.push(sample(
                format!("g{r}_{c}"),
                format!("row{r}"),
                map,
                c as f64 * spacing,
                r as f64 * spacing,
                c as i64,
            ));
        }
    }
    Dataset::new(out).unwrap()
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, weights: [f64; 4]) -> Vec<SetLabel> {
    let total: f64 = weights.iter().sum();
    (0..n)
        .map(|_| {
            let mut u = rng.random_range(0.0..total);
            for (k, w) in weights.iter().enumerate() {
                if u < *w {
                    return SetLabel::ALL[k];
                }
                u -= w;
            }
            SetLabel::Unassigned
        })
        .collect()
}

pub fn dist(ax: f64, ay: f64, bx: f64, by: f64) -> f64 {
    let (dx, dy) = (ax - bx, ay - by);
    (dx * dx + dy * dy).sqrt()
}

/// Linear scan over indexed samples of `map`.
pub fn brute_nearest(ds: &Dataset, indexed: &[usize], map: &str, x: f64, y: f64) -> Option<f64> {
    indexed
        .iter()
        .map(|&i| &ds.samples()[i])
        .filter(|s| s.map_id == map)
        .map(|s| dist(x, y, s.x, s.y))
        .fold(None, |best: Option<f64>, d| Some(best.map_or(d, |b| b.min(d))))
}

/// Share of `eval` samples strictly closer than `t` to any train sample,
/// over eval samples on maps that have train samples.
pub fn brute_ratio(ds: &Dataset, labels: &[SetLabel], eval: SetLabel, t: f64) -> Option<f64> {
    let train: Vec<usize> = (0..ds.len()).filter(|&i| labels[i] == SetLabel::Train).collect();
    let mut hits = 0;
    let mut total = 0;
    for i in (0..ds.len()).filter(|&i| labels[i] == eval) {
        let s = &ds.samples()[i];
        if let Some(d) = brute_nearest(ds, &train, &s.map_id, s.x, s.y) {
            total += 1;
            hits += (d < t) as usize;
        }
    }
    (total > 0).then(|| hits as f64 / total as f64)
}

/// A star-shaped, hence simple, polygon: jittered even angles keep every
/// angular gap below half a turn.
pub fn star_polygon(rng: &mut ChaCha8Rng, cx: f64, cy: f64, r_max: f64) -> Vec<[f64; 2]> {
    let n = rng.random_range(3..9);
    let step = std::f64::consts::TAU / n as f64;
    (0..n)
        .map(|k| {
            let a = (k as f64 + rng.random_range(0.1..0.9)) * step;
            let r = rng.random_range(0.2 * r_max..r_max);
            [cx + r * a.cos(), cy + r * a.sin()]
        })
        .collect()
}

pub fn random_regions(rng: &mut ChaCha8Rng, ds: &Dataset, count: usize, extent: f64) -> RegionSet {
    let maps: Vec<String> = ds.maps().iter().cloned().collect();
    let mut priorities: Vec<i64> = (0..count as i64 * 3).collect();
    priorities.shuffle(rng);
    let regions = (0..count)
        .map(|k| {
            let map = maps[rng.random_range(0..maps.len())].clone();
            let (cx, cy) = (rng.random_range(-extent..extent), rng.random_range(-extent..extent));
            let polygon = if rng.random_bool(0.3) {
                let (w, h) = (rng.random_range(5.0..extent), rng.random_range(5.0..extent));
                vec![[cx, cy], [cx + w, cy], [cx + w, cy + h], [cx, cy + h]]
            } else {
                let r_max = rng.random_range(10.0..extent);
                star_polygon(rng, cx, cy, r_max)
            };
            Region {
                name: format!("r{k}"),
                map_id: map,
                set: SetLabel::ASSIGNED[rng.random_range(0..3)],
                priority: priorities[k],
                polygon,
            }
        })
        .collect();
    RegionSet::new(regions)
}

pub fn split_of(ds: &Dataset, labels: &[SetLabel]) -> SplitAssignment {
    SplitAssignment::from_dense(ds, labels, "test")
}

/// Polyline with `n` points and no consecutive duplicates.
pub fn random_polyline(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<[f64; 2]> {
    let mut pts: Vec<[f64; 2]> = Vec::with_capacity(n);
    while pts.len() < n {
        let p = [rng.random_range(-extent..extent), rng.random_range(-extent..extent)];
        if pts.last() != Some(&p) {
            pts.push(p);
        }
    }
    pts
}

/// Random ground truth and predictions over a few frames.
pub fn micro_instance(rng: &mut ChaCha8Rng) -> (FrameElements, FrameElements) {
    let frames = rng.random_range(1..=3);
    let mut gts = FrameElements::new();
    let mut preds = FrameElements::new();
    for f in 0..frames {
        gts.insert(format!("f{f}"), Vec::new());
    }
    let n_gt = rng.random_range(0..=4);
    let n_pred = rng.random_range(0..=5);
    let mut gt_lines = Vec::new();
    for _ in 0..n_gt {
        let frame = format!("f{}", rng.random_range(0..frames));
        let class = ElementClass::ALL[rng.random_range(0..2)];
        let n = rng.random_range(2..=6);
        let points = random_polyline(rng, n, 3.0);
        gt_lines.push((frame.clone(), class, points.clone()));
        gts.get_mut(&frame).unwrap().push(MapElement {
            frame_id: frame,
            class,
            points,
            confidence: None,
        });
    }
    for _ in 0..n_pred {
        let (frame, class, points) = if !gt_lines.is_empty() && rng.random_bool(0.6) {
            // Perturb a ground-truth line so some predictions land near.
            let (f, c, pts) = gt_lines[rng.random_range(0..gt_lines.len())].clone();
            let noise = rng.random_range(0.0..1.5);
            let pts = pts
                .iter()
                .map(|p| {
                    [
                        p[0] + rng.random_range(-noise..=noise),
                        p[1] + rng.random_range(-noise..=noise),
                    ]
                })
                .collect::<Vec<_>>();
            (f, c, pts)
        } else {
            let f = format!("f{}", rng.random_range(0..frames));
            let class = ElementClass::ALL[rng.random_range(0..2)];
            let n = rng.random_range(2..=6);
            (f, class, random_polyline(rng, n, 3.0))
        };
        if points.windows(2).any(|w| w[0] == w[1]) {
            continue;
        }
        // Coarse confidences force ties.
        let confidence = Some((rng.random_range(0..5) as f64) / 4.0);
        preds.entry(frame.clone()).or_default().push(MapElement {
            frame_id: frame,
            class,
            points,
            confidence,
        });
    }
    (preds, gts)
}

/// Reference arc-length resampling, written independently of the library.
pub fn ref_resample(points: &[[f64; 2]], interval: f64) -> Vec<[f64; 2]> {
    let seg_len: Vec<f64> = points
        .windows(2)
        .map(|w| dist(w[0][0], w[0][1], w[1][0], w[1][1]))
        .collect();
    let total: f64 = seg_len.iter().sum();
    let mut out = Vec::new();
    let mut k = 0usize;
    while (k as f64) * interval < total {
        let target = k as f64 * interval;
        let mut start = 0.0;
        let mut placed = false;
        for (i, &len) in seg_len.iter().enumerate() {
            if target <= start + len && len > 0.0 {
                let t = (target - start) / len;
                let (a, b) = (points[i], points[i + 1]);
                out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
                placed = true;
                break;
            }
            start += len;
        }
        assert!(placed);
        k += 1;
    }
    out.push(*points.last().unwrap());
    out
}

/// Double-loop Chamfer distance.
pub fn ref_chamfer(a: &[[f64; 2]], b: &[[f64; 2]], interval: f64) -> f64 {
    let (ra, rb) = (ref_resample(a, interval), ref_resample(b, interval));
    let one_way = |p: &[[f64; 2]], q: &[[f64; 2]]| {
        let mut sum = 0.0;
        for x in p {
            let mut best = f64::INFINITY;
            for y in q {
                let d = dist(x[0], x[1], y[0], y[1]);
                if d < best {
                    best = d;
                }
            }
            sum += best;
        }
        sum / p.len() as f64
    };
    0.5 * (one_way(&ra, &rb) + one_way(&rb, &ra))
}

/// Greedy matching followed by interpolated AP, computed from scratch.
pub fn ref_ap(preds: &FrameElements, gts: &FrameElements, class: ElementClass, tau: f64, interval: f64) -> Option<f64> {
    let frame_rank: BTreeMap<&String, usize> = gts.keys().enumerate().map(|(i, f)| (f, i)).collect();
    let gt_count: usize = gts.values().flatten().filter(|e| e.class == class).count();
    if gt_count == 0 {
        return None;
    }
    let mut order: Vec<(&String, usize, &MapElement)> = preds
        .iter()
        .flat_map(|(f, els)| els.iter().enumerate().map(move |(i, e)| (f, i, e)))
        .filter(|(_, _, e)| e.class == class)
        .collect();
    order.sort_by(|a, b| {
        b.2.confidence
            .unwrap()
            .total_cmp(&a.2.confidence.unwrap())
            .then(frame_rank[a.0].cmp(&frame_rank[b.0]))
            .then(a.1.cmp(&b.1))
    });
    let mut used: BTreeMap<(&String, usize), bool> = BTreeMap::new();
    let mut hits = Vec::new();
    for (frame, _, p) in &order {
        let mut best: Option<(f64, usize)> = None;
        for (j, g) in gts[*frame].iter().enumerate() {
            if g.class != class || used.contains_key(&(*frame, j)) {
                continue;
            }
            let d = ref_chamfer(&p.points, &g.points, interval);
            if best.is_none_or(|(bd, _)| d < bd) {
                best = Some((d, j));
            }
        }
        match best {
            Some((d, j)) if d < tau => {
                used.insert((*frame, j), true);
                hits.push(true);
            }
            _ => hits.push(false),
        }
    }
    // Sum over recall steps of the best precision at or beyond that step.
    let mut ap = 0.0;
    let mut tp = 0;
    for k in 0..hits.len() {
        if !hits[k] {
            continue;
        }
        tp += 1;
        let recall_step = 1.0 / gt_count as f64;
        let mut best_p: f64 = 0.0;
        let mut tp_j = tp - 1;
        for (j, &h) in hits.iter().enumerate().skip(k) {
            tp_j += h as usize;
            best_p = best_p.max(tp_j as f64 / (j + 1) as f64);
        }
        ap += recall_step * best_p;
    }
    Some(ap)
}

pub fn bin() -> PathBuf {
    PathBuf::from(env!("CARGO_BIN_EXE_geosplit"))
}

pub fn run_cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(bin())
        .args(args)
        .current_dir(cwd)
        .env_remove("GEOSPLIT_THREADS")
        .output()
        .expect("spawn geosplit")
}

pub fn write_dataset(ds: &Dataset, path: &Path) {
    let mut buf = Vec::new();
    if path.extension().is_some_and(|e| e == "csv") {
        geosplit::ingest::write_samples_csv(ds, &mut buf).unwrap();
    } else {
        geosplit::ingest::write_samples_jsonl(ds, &mut buf).unwrap();
    }
    std::fs::write(path, buf).unwrap();
}

pub fn write_split(ds: &Dataset, split: &SplitAssignment, path: &Path) {
    let mut buf = Vec::new();
    geosplit::leakage::write_split_csv(ds, split, &mut buf).unwrap();
    std::fs::write(path, buf).unwrap();
}

/// Train samples spread 1 km apart; a fraction `p` of `n_val` val samples
/// sits within 5 m of a train sample and the rest at least 50 m from all.
pub fn planted(p: f64, n_val: usize, rng: &mut ChaCha8Rng) -> (Dataset, SplitAssignment) {
    let n_train = 200;
    let mut samples = Vec::new();
    let mut labels = Vec::new();
    for i in 0..n_train {
        samples.push(sample(
            format!("t{i}"),
            format!("tq{i}"),
            "m",
            i as f64 * 1000.0,
            0.0,
            0,
        ));
        labels.push(SetLabel::Train);
    }
    let near = (p * n_val as f64).round() as usize;
    for k in 0..n_val {
        let anchor = rng.random_range(0..n_train) as f64 * 1000.0;
        let (x, y) = if k < near {
            let r = rng.random_range(0.0..4.99);
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            (anchor + r * a.cos(), r * a.sin())
        } else {
            let r = rng.random_range(50.0..450.0);
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            (anchor + r * a.cos(), r * a.sin())
        };
        samples.push(sample(format!("v{k}"), format!("vq{k}"), "m", x, y, 0));
        labels.push(SetLabel::Val);
    }
    for k in 0..n_val / 2 {
        let anchor = rng.random_range(0..n_train) as f64 * 1000.0;
        samples.push(sample(format!("e{k}"), format!("eq{k}"), "m", anchor + 500.0, 200.0, 0));
        labels.push(SetLabel::Test);
    }
    let ds = Dataset::new(samples).unwrap();
    let split = split_of(&ds, &labels);
    (ds, split)
}
