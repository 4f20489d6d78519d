//! Planar geometry primitives. All coordinates are meters in a projected CRS.
//!
//! Rings are stored open (first vertex not repeated) with counter-clockwise
//! orientation; edge i runs from `ring[i]` to `ring[(i + 1) % n]`. Boundary
//! points count as inside everywhere in this module.

use serde::{Deserialize, Serialize};

/// Distance below which a point is treated as lying on a segment or ring.
pub const BOUNDARY_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2D {
    pub x: f64,
    pub y: f64,
}

impl Point2D {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist(self, other: Point2D) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bbox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bbox {
    pub fn of_ring(ring: &[Point2D]) -> Self {
        let mut b = Bbox {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        };
        for p in ring {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        b
    }

    pub fn of_segment(a: Point2D, b: Point2D) -> Self {
        Bbox {
            min_x: a.x.min(b.x),
            min_y: a.y.min(b.y),
            max_x: a.x.max(b.x),
            max_y: a.y.max(b.y),
        }
    }

    pub fn expand(mut self, pad: f64) -> Self {
        self.min_x -= pad;
        self.min_y -= pad;
        self.max_x += pad;
        self.max_y += pad;
        self
    }

    pub fn union(self, other: Bbox) -> Bbox {
        Bbox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn intersects(self, other: Bbox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn contains(self, p: Point2D) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }
}

/// Twice the signed area of triangle (a, b, c); > 0 when c lies left of a->b.
pub fn cross(a: Point2D, b: Point2D, c: Point2D) -> f64 {
    (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x)
}

/// Signed ring area (positive for counter-clockwise orientation).
pub fn ring_signed_area(ring: &[Point2D]) -> f64 {
    let n = ring.len();
    let mut acc = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        acc += a.x * b.y - b.x * a.y;
    }
    acc / 2.0
}

/// Area-weighted centroid. Falls back to the vertex mean for near-zero areas.
pub fn ring_centroid(ring: &[Point2D]) -> Point2D {
    let area = ring_signed_area(ring);
    if area.abs() < 1e-12 {
        let n = ring.len() as f64;
        let (sx, sy) = ring.iter().fold((0.0, 0.0), |(x, y), p| (x + p.x, y + p.y));
        return Point2D::new(sx / n, sy / n);
    }
    let n = ring.len();
    let (mut cx, mut cy) = (0.0, 0.0);
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let w = a.x * b.y - b.x * a.y;
        cx += (a.x + b.x) * w;
        cy += (a.y + b.y) * w;
    }
    Point2D::new(cx / (6.0 * area), cy / (6.0 * area))
}

pub fn dist_point_segment(p: Point2D, a: Point2D, b: Point2D) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.dist(Point2D::new(a.x + t * dx, a.y + t * dy))
}

fn on_segment_collinear(p: Point2D, a: Point2D, b: Point2D) -> bool {
    p.x >= a.x.min(b.x) - BOUNDARY_EPS
        && p.x <= a.x.max(b.x) + BOUNDARY_EPS
        && p.y >= a.y.min(b.y) - BOUNDARY_EPS
        && p.y <= a.y.max(b.y) + BOUNDARY_EPS
}

/// Inclusive segment intersection test (shared endpoints and collinear
/// overlap count as intersecting).
pub fn segments_intersect(p1: Point2D, p2: Point2D, q1: Point2D, q2: Point2D) -> bool {
    let d1 = cross(q1, q2, p1);
    let d2 = cross(q1, q2, p2);
    let d3 = cross(p1, p2, q1);
    let d4 = cross(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment_collinear(p1, q1, q2))
        || (d2 == 0.0 && on_segment_collinear(p2, q1, q2))
        || (d3 == 0.0 && on_segment_collinear(q1, p1, p2))
        || (d4 == 0.0 && on_segment_collinear(q2, p1, p2))
}

pub fn dist_segment_segment(p1: Point2D, p2: Point2D, q1: Point2D, q2: Point2D) -> f64 {
    if segments_intersect(p1, p2, q1, q2) {
        return 0.0;
    }
    dist_point_segment(p1, q1, q2)
        .min(dist_point_segment(p2, q1, q2))
        .min(dist_point_segment(q1, p1, p2))
        .min(dist_point_segment(q2, p1, p2))
}

/// Boundary-inclusive point-in-ring test (ray cast with an explicit
/// on-boundary pass so edges and vertices count as inside).
pub fn point_in_ring(p: Point2D, ring: &[Point2D]) -> bool {
    let n = ring.len();
    for i in 0..n {
        if dist_point_segment(p, ring[i], ring[(i + 1) % n]) <= BOUNDARY_EPS {
            return true;
        }
    }
    let mut inside = false;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        if (a.y > p.y) != (b.y > p.y) {
            let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
            if p.x < x_cross {
                inside = !inside;
            }
        }
    }
    inside
}

/// Distance from a point to a filled ring: zero inside, else boundary distance.
pub fn dist_point_ring(p: Point2D, ring: &[Point2D]) -> f64 {
    if point_in_ring(p, ring) {
        return 0.0;
    }
    let n = ring.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        best = best.min(dist_point_segment(p, ring[i], ring[(i + 1) % n]));
    }
    best
}

/// Does segment a-b touch the filled ring (boundary crossing or an endpoint
/// inside)?
pub fn segment_intersects_ring(a: Point2D, b: Point2D, ring: &[Point2D]) -> bool {
    if point_in_ring(a, ring) || point_in_ring(b, ring) {
        return true;
    }
    let n = ring.len();
    (0..n).any(|i| segments_intersect(a, b, ring[i], ring[(i + 1) % n]))
}

/// Distance from segment a-b to a filled ring: zero when they touch.
pub fn dist_segment_ring(a: Point2D, b: Point2D, ring: &[Point2D]) -> f64 {
    if segment_intersects_ring(a, b, ring) {
        return 0.0;
    }
    let n = ring.len();
    let mut best = f64::INFINITY;
    for i in 0..n {
        best = best.min(dist_segment_segment(a, b, ring[i], ring[(i + 1) % n]));
    }
    best
}

/// Simplicity check: no two non-adjacent edges intersect and no edge is
/// degenerate. O(n^2), fine for footprint-sized rings.
pub fn ring_is_simple(ring: &[Point2D]) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        if ring[i].dist(ring[(i + 1) % n]) <= BOUNDARY_EPS {
            return false;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            // Skip edges sharing a vertex (adjacent, incl. the wrap pair).
            if j == i || (j + 1) % n == i || (i + 1) % n == j {
                continue;
            }
            if segments_intersect(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}

/// Do two filled rings share any area or boundary?
pub fn rings_overlap(a: &[Point2D], b: &[Point2D]) -> bool {
    if !Bbox::of_ring(a).intersects(Bbox::of_ring(b)) {
        return false;
    }
    if a.iter().any(|p| point_in_ring(*p, b)) || b.iter().any(|p| point_in_ring(*p, a)) {
        return true;
    }
    let (n, m) = (a.len(), b.len());
    for i in 0..n {
        for j in 0..m {
            if segments_intersect(a[i], a[(i + 1) % n], b[j], b[(j + 1) % m]) {
                return true;
            }
        }
    }
    false
}

/// Convex hull (Andrew monotone chain), CCW, collinear points dropped.
/// Returns fewer than 3 points for degenerate input.
pub fn convex_hull(points: &[Point2D]) -> Vec<Point2D> {
    let mut pts: Vec<Point2D> = points.to_vec();
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point2D> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2D> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Outward miter offset of a convex CCW ring. The result contains every point
/// within `width` of the input ring (it circumscribes the rounded buffer).
/// `width` must be >= 0; zero returns the ring unchanged.
pub fn offset_convex_ring(ring: &[Point2D], width: f64) -> Vec<Point2D> {
    assert!(width >= 0.0, "offset width must be non-negative");
    if width == 0.0 || ring.len() < 3 {
        return ring.to_vec();
    }
    let n = ring.len();
    // Offset each edge outward; for CCW rings the outward normal of direction
    // (dx, dy) is (dy, -dx).
    let mut lines: Vec<(Point2D, Point2D)> = Vec::with_capacity(n);
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        let (dx, dy) = (b.x - a.x, b.y - a.y);
        let len = dx.hypot(dy);
        let (nx, ny) = (dy / len * width, -dx / len * width);
        lines.push((
            Point2D::new(a.x + nx, a.y + ny),
            Point2D::new(b.x + nx, b.y + ny),
        ));
    }
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let prev = lines[(i + n - 1) % n];
        let cur = lines[i];
        out.push(line_intersection(prev, cur).unwrap_or_else(|| {
            // Near-parallel joint: fall back to the shared offset endpoint.
            cur.0
        }));
    }
    out
}

fn line_intersection(l1: (Point2D, Point2D), l2: (Point2D, Point2D)) -> Option<Point2D> {
    let (p, p2) = l1;
    let (q, q2) = l2;
    let r = Point2D::new(p2.x - p.x, p2.y - p.y);
    let s = Point2D::new(q2.x - q.x, q2.y - q.y);
    let denom = r.x * s.y - r.y * s.x;
    if denom.abs() < 1e-12 {
        return None;
    }
    let t = ((q.x - p.x) * s.y - (q.y - p.y) * s.x) / denom;
    Some(Point2D::new(p.x + t * r.x, p.y + t * r.y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn square(x0: f64, y0: f64, side: f64) -> Vec<Point2D> {
        vec![
            Point2D::new(x0, y0),
            Point2D::new(x0 + side, y0),
            Point2D::new(x0 + side, y0 + side),
            Point2D::new(x0, y0 + side),
        ]
    }

    #[test]
    fn area_and_centroid_of_square() {
        let sq = square(580.0, 240.0, 10.0);
        assert_relative_eq!(ring_signed_area(&sq), 100.0);
        let c = ring_centroid(&sq);
        assert_relative_eq!(c.x, 585.0);
        assert_relative_eq!(c.y, 245.0);
    }

    #[test]
    fn point_in_ring_interior_boundary_exterior() {
        let sq = square(500.0, 500.0, 10.0);
        assert!(point_in_ring(Point2D::new(505.0, 505.0), &sq));
        assert!(point_in_ring(Point2D::new(500.0, 505.0), &sq)); // edge
        assert!(point_in_ring(Point2D::new(510.0, 510.0), &sq)); // vertex
        assert!(!point_in_ring(Point2D::new(511.0, 505.0), &sq));
        assert!(!point_in_ring(Point2D::new(499.999, 500.0), &sq));
    }

    #[test]
    fn point_in_concave_ring() {
        // L-shape: notch at the top-right.
        let l = vec![
            Point2D::new(300.0, 300.0),
            Point2D::new(320.0, 300.0),
            Point2D::new(320.0, 310.0),
            Point2D::new(310.0, 310.0),
            Point2D::new(310.0, 320.0),
            Point2D::new(300.0, 320.0),
        ];
        assert!(point_in_ring(Point2D::new(305.0, 315.0), &l));
        assert!(!point_in_ring(Point2D::new(315.0, 315.0), &l)); // inside notch
        assert!(point_in_ring(Point2D::new(315.0, 305.0), &l));
    }

    #[test]
    fn segment_intersections() {
        let a = Point2D::new(0.0, 0.0);
        let b = Point2D::new(10.0, 10.0);
        assert!(segments_intersect(
            a,
            b,
            Point2D::new(0.0, 10.0),
            Point2D::new(10.0, 0.0)
        ));
        // Touching at an endpoint counts.
        assert!(segments_intersect(
            a,
            b,
            Point2D::new(10.0, 10.0),
            Point2D::new(20.0, 0.0)
        ));
        // Collinear overlap counts.
        assert!(segments_intersect(
            a,
            b,
            Point2D::new(5.0, 5.0),
            Point2D::new(15.0, 15.0)
        ));
        // Parallel disjoint does not.
        assert!(!segments_intersect(
            a,
            b,
            Point2D::new(0.0, 1.0),
            Point2D::new(10.0, 11.0)
        ));
    }

    #[test]
    fn point_segment_distance() {
        let a = Point2D::new(0.0, 0.0);
        let b = Point2D::new(10.0, 0.0);
        assert_relative_eq!(dist_point_segment(Point2D::new(5.0, 3.0), a, b), 3.0);
        assert_relative_eq!(dist_point_segment(Point2D::new(-4.0, 3.0), a, b), 5.0);
        assert_relative_eq!(dist_point_segment(Point2D::new(13.0, 4.0), a, b), 5.0);
    }

    #[test]
    fn segment_segment_distance() {
        let d = dist_segment_segment(
            Point2D::new(0.0, 0.0),
            Point2D::new(10.0, 0.0),
            Point2D::new(0.0, 4.0),
            Point2D::new(10.0, 4.0),
        );
        assert_relative_eq!(d, 4.0);
        let crossing = dist_segment_segment(
            Point2D::new(0.0, 0.0),
            Point2D::new(10.0, 10.0),
            Point2D::new(0.0, 10.0),
            Point2D::new(10.0, 0.0),
        );
        assert_relative_eq!(crossing, 0.0);
    }

    #[test]
    fn segment_ring_contact() {
        let sq = square(100.0, 100.0, 10.0);
        // Fully outside, passing nearby.
        assert!(!segment_intersects_ring(
            Point2D::new(90.0, 95.0),
            Point2D::new(120.0, 95.0),
            &sq
        ));
        // Crossing through.
        assert!(segment_intersects_ring(
            Point2D::new(90.0, 105.0),
            Point2D::new(120.0, 105.0),
            &sq
        ));
        // Endpoint inside.
        assert!(segment_intersects_ring(
            Point2D::new(105.0, 105.0),
            Point2D::new(200.0, 200.0),
            &sq
        ));
        assert_relative_eq!(
            dist_segment_ring(Point2D::new(90.0, 95.0), Point2D::new(120.0, 95.0), &sq),
            5.0
        );
    }

    #[test]
    fn simplicity() {
        assert!(ring_is_simple(&square(0.0, 0.0, 5.0)));
        let bowtie = vec![
            Point2D::new(0.0, 0.0),
            Point2D::new(10.0, 10.0),
            Point2D::new(10.0, 0.0),
            Point2D::new(0.0, 10.0),
        ];
        assert!(!ring_is_simple(&bowtie));
    }

    #[test]
    fn hull_of_cloud() {
        let pts = vec![
            Point2D::new(0.0, 0.0),
            Point2D::new(4.0, 0.0),
            Point2D::new(4.0, 4.0),
            Point2D::new(0.0, 4.0),
            Point2D::new(2.0, 2.0),
            Point2D::new(1.0, 3.0),
        ];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 4);
        assert!(ring_signed_area(&hull) > 0.0);
        for p in &pts {
            assert!(point_in_ring(*p, &hull));
        }
    }

    #[test]
    fn miter_offset_contains_rounded_buffer() {
        let sq = square(0.0, 0.0, 10.0);
        let off = offset_convex_ring(&sq, 2.0);
        assert_eq!(off.len(), 4);
        // Square corners miter to corner + (+-2, +-2).
        assert!(off
            .iter()
            .any(|p| p.dist(Point2D::new(-2.0, -2.0)) < 1e-9));
        assert!(off
            .iter()
            .any(|p| p.dist(Point2D::new(12.0, 12.0)) < 1e-9));
        // Every point within 2 m of the ring is inside the offset ring.
        for i in 0..40 {
            let ang = i as f64 / 40.0 * std::f64::consts::TAU;
            let p = Point2D::new(10.0 + 2.0 * ang.cos(), 5.0 + 2.0 * ang.sin());
            let q = Point2D::new(ang.cos().mul_add(2.0, 0.0), ang.sin().mul_add(2.0, 0.0));
            assert!(point_in_ring(p, &off), "missing {p:?}");
            assert!(point_in_ring(q, &off), "missing {q:?}");
        }
        // Zero width is the identity.
        assert_eq!(offset_convex_ring(&sq, 0.0), sq);
    }
}
