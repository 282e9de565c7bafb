//! Planar geometry kernel.
//!
//! All coordinates are projected meters. Polygons are immutable once built;
//! every predicate here is a pure function.

use std::fmt;

use thiserror::Error;

/// Distance under which a point is treated as lying on a segment.
pub const BOUNDARY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("coordinate is not finite: ({0}, {1})")]
    NonFinite(f64, f64),
    #[error("ring needs at least 3 distinct vertices, got {0}")]
    TooFewVertices(usize),
    #[error("exterior ring has zero area")]
    ZeroArea,
    #[error("hole {0} lies outside the exterior bounding box")]
    HoleOutsideExterior(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    fn sub(self, other: Point) -> (f64, f64) {
        (self.x - other.x, self.y - other.y)
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundingBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BoundingBox {
    /// Builds a box from two corners in any order.
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        BoundingBox {
            min_x: x0.min(x1),
            min_y: y0.min(y1),
            max_x: x0.max(x1),
            max_y: y0.max(y1),
        }
    }

    pub fn around(p: Point, radius: f64) -> Self {
        BoundingBox {
            min_x: p.x - radius,
            min_y: p.y - radius,
            max_x: p.x + radius,
            max_y: p.y + radius,
        }
    }

    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a Point>) -> Option<Self> {
        let mut iter = points.into_iter();
        let first = iter.next()?;
        let mut b = BoundingBox::around(*first, 0.0);
        for p in iter {
            b.min_x = b.min_x.min(p.x);
            b.min_y = b.min_y.min(p.y);
            b.max_x = b.max_x.max(p.x);
            b.max_y = b.max_y.max(p.y);
        }
        Some(b)
    }

    /// Closed-interval overlap: touching boxes intersect.
    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        self.min_x <= other.min_x
            && self.min_y <= other.min_y
            && self.max_x >= other.max_x
            && self.max_y >= other.max_y
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            min_x: self.min_x.min(other.min_x),
            min_y: self.min_y.min(other.min_y),
            max_x: self.max_x.max(other.max_x),
            max_y: self.max_y.max(other.max_y),
        }
    }

    pub fn area(&self) -> f64 {
        (self.max_x - self.min_x) * (self.max_y - self.min_y)
    }

    pub fn center(&self) -> Point {
        Point::new(
            (self.min_x + self.max_x) / 2.0,
            (self.min_y + self.max_y) / 2.0,
        )
    }
}

/// A closed ring stored without its closing duplicate vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    vertices: Vec<Point>,
}

impl Ring {
    /// A trailing vertex equal to the first one is dropped.
    pub fn new(mut vertices: Vec<Point>) -> Result<Self, GeometryError> {
        if let Some(bad) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(GeometryError::NonFinite(bad.x, bad.y));
        }
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        let mut distinct: Vec<(u64, u64)> = vertices
            .iter()
            .map(|p| (p.x.to_bits(), p.y.to_bits()))
            .collect();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() < 3 {
            return Err(GeometryError::TooFewVertices(distinct.len()));
        }
        Ok(Ring { vertices })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    /// Edges including the implicit closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Shoelace area, positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        self.edges()
            .map(|(a, b)| a.x * b.y - b.x * a.y)
            .sum::<f64>()
            / 2.0
    }

    pub fn bounding_box(&self) -> BoundingBox {
        BoundingBox::of_points(&self.vertices).expect("ring has vertices")
    }

    /// Even-odd crossing test, ignoring the boundary.
    fn crossing_parity(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x_cross = a.x + (p.y - a.y) / (b.y - a.y) * (b.x - a.x);
                if p.x < x_cross {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn on_boundary(&self, p: Point) -> bool {
        self.edges()
            .any(|(a, b)| segment_distance(p, a, b) <= BOUNDARY_TOLERANCE)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    exterior: Ring,
    holes: Vec<Ring>,
    bbox: BoundingBox,
}

/// Where a point sits relative to a polygon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Location {
    Interior,
    Boundary,
    Exterior,
}

impl Polygon {
    pub fn new(exterior: Ring, holes: Vec<Ring>) -> Result<Self, GeometryError> {
        if exterior.signed_area() == 0.0 {
            return Err(GeometryError::ZeroArea);
        }
        let bbox = exterior.bounding_box();
        for (i, hole) in holes.iter().enumerate() {
            if !bbox.contains_box(&hole.bounding_box()) {
                return Err(GeometryError::HoleOutsideExterior(i));
            }
        }
        Ok(Polygon {
            exterior,
            holes,
            bbox,
        })
    }

    /// Axis-aligned rectangle; corners in any order.
    pub fn rectangle(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<Self, GeometryError> {
        let b = BoundingBox::new(x0, y0, x1, y1);
        let ring = Ring::new(vec![
            Point::new(b.min_x, b.min_y),
            Point::new(b.max_x, b.min_y),
            Point::new(b.max_x, b.max_y),
            Point::new(b.min_x, b.max_y),
        ])?;
        Polygon::new(ring, Vec::new())
    }

    pub fn from_coords(exterior: &[(f64, f64)]) -> Result<Self, GeometryError> {
        let ring = Ring::new(exterior.iter().map(|&(x, y)| Point::new(x, y)).collect())?;
        Polygon::new(ring, Vec::new())
    }

    pub fn exterior(&self) -> &Ring {
        &self.exterior
    }

    pub fn holes(&self) -> &[Ring] {
        &self.holes
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        self.rings().flat_map(|r| r.edges())
    }

    pub fn vertices(&self) -> impl Iterator<Item = &Point> {
        self.rings().flat_map(|r| r.vertices().iter())
    }

    /// Tight extent of the exterior ring.
    pub fn bounding_box(&self) -> BoundingBox {
        self.bbox
    }

    pub fn locate(&self, p: Point) -> Location {
        if p.x < self.bbox.min_x - BOUNDARY_TOLERANCE
            || p.x > self.bbox.max_x + BOUNDARY_TOLERANCE
            || p.y < self.bbox.min_y - BOUNDARY_TOLERANCE
            || p.y > self.bbox.max_y + BOUNDARY_TOLERANCE
        {
            return Location::Exterior;
        }
        if self.rings().any(|r| r.on_boundary(p)) {
            return Location::Boundary;
        }
        let inside_exterior = self.exterior.crossing_parity(p);
        if inside_exterior && !self.holes.iter().any(|h| h.crossing_parity(p)) {
            Location::Interior
        } else {
            Location::Exterior
        }
    }

    /// Boundary-inclusive even-odd containment.
    pub fn contains(&self, p: Point) -> bool {
        self.locate(p) != Location::Exterior
    }

    /// Zero when contained, otherwise the distance to the nearest boundary segment.
    pub fn distance(&self, p: Point) -> f64 {
        if self.contains(p) {
            return 0.0;
        }
        self.boundary_distance(p)
    }

    fn boundary_distance(&self, p: Point) -> f64 {
        self.edges()
            .map(|(a, b)| segment_distance(p, a, b))
            .fold(f64::INFINITY, f64::min)
    }

    /// True when the two interiors overlap with positive area. Shared edges
    /// and touching vertices do not count.
    pub fn intersects_interior(&self, other: &Polygon) -> bool {
        let (a, b) = (self.bbox, other.bbox);
        if a.min_x >= b.max_x || b.min_x >= a.max_x || a.min_y >= b.max_y || b.min_y >= a.max_y {
            return false;
        }
        if self
            .vertices()
            .any(|&v| other.locate(v) == Location::Interior)
            || other
                .vertices()
                .any(|&v| self.locate(v) == Location::Interior)
        {
            return true;
        }
        for (p, q) in self.edges() {
            for (r, s) in other.edges() {
                if segments_cross_properly(p, q, r, s) {
                    return true;
                }
            }
        }
        if boundary_enters(self, other) || boundary_enters(other, self) {
            return true;
        }
        // Neither boundary reaches the other's interior, so the interiors are
        // either disjoint or coincide.
        match self.interior_point() {
            Some(p) => other.locate(p) == Location::Interior,
            None => false,
        }
    }

    /// A point strictly inside the polygon, found by stepping inward from the
    /// midpoint of the longest exterior edge.
    pub fn interior_point(&self) -> Option<Point> {
        let orientation = self.exterior.signed_area().signum();
        let (a, b) = self.exterior.edges().max_by(|(a0, b0), (a1, b1)| {
            let l0 = (b0.x - a0.x).hypot(b0.y - a0.y);
            let l1 = (b1.x - a1.x).hypot(b1.y - a1.y);
            l0.total_cmp(&l1)
        })?;
        let mid = Point::new((a.x + b.x) / 2.0, (a.y + b.y) / 2.0);
        let (dx, dy) = b.sub(a);
        let len = dx.hypot(dy);
        // Inward normal: left of the edge for counter-clockwise rings.
        let normal = (-dy / len * orientation, dx / len * orientation);
        let far = Point::new(mid.x + normal.0, mid.y + normal.1);
        let mut nearest = f64::INFINITY;
        for (r, s) in self.edges() {
            if let Some(t) = ray_hit(mid, far, r, s) {
                if t > BOUNDARY_TOLERANCE && t < nearest {
                    nearest = t;
                }
            }
        }
        if !nearest.is_finite() {
            return None;
        }
        let p = Point::new(
            mid.x + normal.0 * nearest / 2.0,
            mid.y + normal.1 * nearest / 2.0,
        );
        (self.locate(p) == Location::Interior).then_some(p)
    }
}

/// Splits each edge of `a` at the vertices of `b` lying on it and checks if
/// any piece passes through the interior of `b`.
fn boundary_enters(a: &Polygon, b: &Polygon) -> bool {
    let b_vertices: Vec<Point> = b.vertices().copied().collect();
    for (p, q) in a.edges() {
        let (dx, dy) = q.sub(p);
        let len2 = dx * dx + dy * dy;
        let mut cuts = vec![0.0, 1.0];
        for &v in &b_vertices {
            if segment_distance(v, p, q) <= BOUNDARY_TOLERANCE {
                let t = ((v.x - p.x) * dx + (v.y - p.y) * dy) / len2;
                cuts.push(t.clamp(0.0, 1.0));
            }
        }
        cuts.sort_by(f64::total_cmp);
        for w in cuts.windows(2) {
            if w[1] - w[0] <= f64::EPSILON {
                continue;
            }
            let t = (w[0] + w[1]) / 2.0;
            let m = Point::new(p.x + dx * t, p.y + dy * t);
            if b.locate(m) == Location::Interior {
                return true;
            }
        }
    }
    false
}

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Segments intersect at a single point interior to both.
fn segments_cross_properly(p: Point, q: Point, r: Point, s: Point) -> bool {
    let d1 = cross(r, s, p);
    let d2 = cross(r, s, q);
    let d3 = cross(p, q, r);
    let d4 = cross(p, q, s);
    d1 * d2 < 0.0 && d3 * d4 < 0.0
}

/// Parameter along the ray `origin -> through` (unit length) where it meets
/// segment `r-s`.
fn ray_hit(origin: Point, through: Point, r: Point, s: Point) -> Option<f64> {
    let (dx, dy) = through.sub(origin);
    let (ex, ey) = s.sub(r);
    let denom = dx * ey - dy * ex;
    if denom == 0.0 {
        return None;
    }
    let (wx, wy) = r.sub(origin);
    let t = (wx * ey - wy * ex) / denom;
    let u = (wx * dy - wy * dx) / denom;
    ((0.0..=1.0).contains(&u) && t >= 0.0).then_some(t)
}

/// Euclidean distance from `p` to the closed segment `a-b`.
pub fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = b.sub(a);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.x - (a.x + t * dx)).hypot(p.y - (a.y + t * dy))
}
