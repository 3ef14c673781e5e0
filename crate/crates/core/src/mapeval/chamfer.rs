use super::MapEvalError;
use crate::spatial::planar_distance;

pub const DEFAULT_RESAMPLE_INTERVAL: f64 = 0.5;

pub(crate) fn check_polyline(points: &[[f64; 2]]) -> Result<(), MapEvalError> {
    if points.len() < 2
        || points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite())
        || points.windows(2).any(|w| w[0] == w[1])
    {
        return Err(MapEvalError::DegeneratePolyline);
    }
    Ok(())
}

/// Points at arc length `0, interval, 2*interval, ...` strictly below the
/// total length, followed by the final vertex.
pub fn resample_polyline(points: &[[f64; 2]], interval: f64) -> Vec<[f64; 2]> {
    let mut cum = Vec::with_capacity(points.len());
    let mut acc = 0.0;
    cum.push(0.0);
    for w in points.windows(2) {
        acc += planar_distance(w[0][0], w[0][1], w[1][0], w[1][1]);
        cum.push(acc);
    }
    let total = acc;
    let mut out = Vec::with_capacity((total / interval) as usize + 2);
    let mut seg = 0;
    let mut k = 0usize;
    loop {
        let s = k as f64 * interval;
        if s >= total {
            break;
        }
        while cum[seg + 1] < s {
            seg += 1;
        }
        let (a, b) = (points[seg], points[seg + 1]);
        let len = cum[seg + 1] - cum[seg];
        let t = if len > 0.0 { (s - cum[seg]) / len } else { 0.0 };
        out.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        k += 1;
    }
    out.push(points[points.len() - 1]);
    out
}

fn mean_nearest(from: &[[f64; 2]], to: &[[f64; 2]]) -> f64 {
    let sum: f64 = from
        .iter()
        .map(|p| {
            to.iter()
                .map(|q| planar_distance(p[0], p[1], q[0], q[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    sum / from.len() as f64
}

/// Symmetric Chamfer distance between two already-resampled point sets.
pub fn chamfer_resampled(a: &[[f64; 2]], b: &[[f64; 2]]) -> f64 {
    0.5 * (mean_nearest(a, b) + mean_nearest(b, a))
}

/// Symmetric Chamfer distance between two polylines after arc-length
/// resampling.
pub fn chamfer(a: &[[f64; 2]], b: &[[f64; 2]], resample_interval: f64) -> Result<f64, MapEvalError> {
    check_polyline(a)?;
    check_polyline(b)?;
    if !(resample_interval.is_finite() && resample_interval > 0.0) {
        return Err(MapEvalError::InvalidArgument(format!(
            "resample interval must be positive, got {resample_interval}"
        )));
    }
    Ok(chamfer_resampled(
        &resample_polyline(a, resample_interval),
        &resample_polyline(b, resample_interval),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_is_zero() {
        let a = [[0.0, 0.0], [3.3, 1.0], [7.0, -2.5]];
        assert_eq!(chamfer(&a, &a, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn parallel_offset() {
        let a = [[0.0, 0.0], [10.0, 0.0]];
        let b = [[0.0, 2.0], [10.0, 2.0]];
        assert_eq!(chamfer(&a, &b, 0.5).unwrap(), 2.0);
    }

    #[test]
    fn resampling_keeps_endpoints() {
        let pts = resample_polyline(&[[0.0, 0.0], [1.2, 0.0]], 0.5);
        assert_eq!(pts, vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0], [1.2, 0.0]]);
        let pts = resample_polyline(&[[0.0, 0.0], [1.0, 0.0]], 0.5);
        assert_eq!(pts, vec![[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]]);
        let pts = resample_polyline(&[[0.0, 0.0], [0.2, 0.0]], 0.5);
        assert_eq!(pts, vec![[0.0, 0.0], [0.2, 0.0]]);
    }

    #[test]
    fn degenerate_rejected() {
        assert!(chamfer(&[[0.0, 0.0]], &[[0.0, 0.0], [1.0, 0.0]], 0.5).is_err());
        assert!(chamfer(&[[0.0, 0.0], [0.0, 0.0]], &[[0.0, 0.0], [1.0, 0.0]], 0.5).is_err());
        assert!(chamfer(&[[0.0, 0.0], [1.0, 0.0]], &[[0.0, 0.0], [1.0, 0.0]], 0.0).is_err());
    }
}
