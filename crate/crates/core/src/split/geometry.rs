//! Planar polygon predicates used by region assignment.

pub type Point = [f64; 2];

#[inline]
fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

#[inline]
fn within_box(p: Point, a: Point, b: Point) -> bool {
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

pub fn on_segment(p: Point, a: Point, b: Point) -> bool {
    cross(a, b, p) == 0.0 && within_box(p, a, b)
}

/// Even-odd containment; points on the boundary count as inside.
pub fn point_in_polygon(p: Point, polygon: &[Point]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[j];
        if on_segment(p, a, b) {
            return true;
        }
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) * (b[0] - a[0]) / (b[1] - a[1]);
            if p[0] < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

pub fn signed_area(polygon: &[Point]) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|i| {
            let a = polygon[i];
            let b = polygon[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

fn segments_intersect(a: Point, b: Point, c: Point, d: Point) -> bool {
    let d1 = cross(c, d, a);
    let d2 = cross(c, d, b);
    let d3 = cross(a, b, c);
    let d4 = cross(a, b, d);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0)) && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0)) {
        return true;
    }
    (d1 == 0.0 && within_box(a, c, d))
        || (d2 == 0.0 && within_box(b, c, d))
        || (d3 == 0.0 && within_box(c, a, b))
        || (d4 == 0.0 && within_box(d, a, b))
}

/// Why a polygon is rejected, or `None` when it is a valid simple polygon.
pub fn simple_polygon_defect(polygon: &[Point]) -> Option<&'static str> {
    let n = polygon.len();
    if n < 3 {
        return Some("fewer than 3 vertices");
    }
    if polygon.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Some("non-finite vertex");
    }
    if (0..n).any(|i| polygon[i] == polygon[(i + 1) % n]) {
        return Some("repeated consecutive vertex");
    }
    for i in 0..n {
        let (a, b) = (polygon[i], polygon[(i + 1) % n]);
        for j in i + 1..n {
            let (c, d) = (polygon[j], polygon[(j + 1) % n]);
            let adjacent = j == i + 1 || (i == 0 && j == n - 1);
            if adjacent {
                // Neighbouring edges share one vertex; they may not fold back
                // over each other.
                let (shared, p, q) = if j == i + 1 { (b, a, d) } else { (a, b, c) };
                if cross(shared, p, q) == 0.0 {
                    let dot = (p[0] - shared[0]) * (q[0] - shared[0]) + (p[1] - shared[1]) * (q[1] - shared[1]);
                    if dot > 0.0 {
                        return Some("self-overlapping edges");
                    }
                }
                continue;
            }
            if segments_intersect(a, b, c, d) {
                return Some("self-intersecting");
            }
        }
    }
    if signed_area(polygon) == 0.0 {
        return Some("zero area");
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min: Point,
    pub max: Point,
}

impl BBox {
    pub fn of(points: &[Point]) -> Self {
        let mut min = [f64::INFINITY; 2];
        let mut max = [f64::NEG_INFINITY; 2];
        for p in points {
            min = [min[0].min(p[0]), min[1].min(p[1])];
            max = [max[0].max(p[0]), max[1].max(p[1])];
        }
        BBox { min, max }
    }

    pub fn contains(&self, p: Point) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SQUARE: [Point; 4] = [[0.0, 0.0], [10.0, 0.0], [10.0, 10.0], [0.0, 10.0]];

    #[test]
    fn square_containment() {
        assert!(point_in_polygon([5.0, 5.0], &SQUARE));
        assert!(!point_in_polygon([15.0, 5.0], &SQUARE));
        assert!(!point_in_polygon([-0.001, 5.0], &SQUARE));
        // Boundary and corners are inside.
        assert!(point_in_polygon([10.0, 5.0], &SQUARE));
        assert!(point_in_polygon([0.0, 0.0], &SQUARE));
        assert!(point_in_polygon([5.0, 10.0], &SQUARE));
    }

    #[test]
    fn concave_even_odd() {
        // U shape opening upward.
        let u = [
            [0.0, 0.0],
            [9.0, 0.0],
            [9.0, 9.0],
            [6.0, 9.0],
            [6.0, 3.0],
            [3.0, 3.0],
            [3.0, 9.0],
            [0.0, 9.0],
        ];
        assert!(point_in_polygon([1.0, 5.0], &u));
        assert!(!point_in_polygon([4.5, 5.0], &u));
        assert!(point_in_polygon([4.5, 1.0], &u));
        // Ray through a vertex at y = 3.
        assert!(!point_in_polygon([-1.0, 3.0], &u));
        assert!(point_in_polygon([1.0, 3.0], &u));
    }

    #[test]
    fn simplicity() {
        assert_eq!(simple_polygon_defect(&SQUARE), None);
        let bowtie = [[0.0, 0.0], [10.0, 10.0], [10.0, 0.0], [0.0, 10.0]];
        assert_eq!(simple_polygon_defect(&bowtie), Some("self-intersecting"));
        assert!(simple_polygon_defect(&[[0.0, 0.0], [1.0, 1.0]]).is_some());
        assert!(simple_polygon_defect(&[[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_some());
        assert!(simple_polygon_defect(&[[0.0, 0.0], [1.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).is_some());
        assert!(simple_polygon_defect(&[[0.0, 0.0], [f64::NAN, 0.0], [0.0, 1.0]]).is_some());
        let spike = [[0.0, 0.0], [10.0, 0.0], [5.0, 0.0], [5.0, 5.0]];
        assert!(simple_polygon_defect(&spike).is_some());
    }
}
