use parcelfuse_core::geometry::{segment_distance, Location, Point, Polygon};
use proptest::prelude::*;

/// Winding number of `ring` around `p`; nonzero means inside.
fn winding(ring: &[(f64, f64)], p: (f64, f64)) -> i32 {
    let cross =
        |a: (f64, f64), b: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (p.0 - a.0) * (b.1 - a.1);
    let mut w = 0;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        if a.1 <= p.1 {
            if b.1 > p.1 && cross(a, b) > 0.0 {
                w += 1;
            }
        } else if b.1 <= p.1 && cross(a, b) < 0.0 {
            w -= 1;
        }
    }
    w
}

fn boundary_distance(ring: &[(f64, f64)], p: (f64, f64)) -> f64 {
    (0..ring.len())
        .map(|i| {
            let a = ring[i];
            let b = ring[(i + 1) % ring.len()];
            segment_distance(
                Point::new(p.0, p.1),
                Point::new(a.0, a.1),
                Point::new(b.0, b.1),
            )
        })
        .fold(f64::INFINITY, f64::min)
}

/// Counter-clockwise convex polygon: points on an ellipse at sorted angles.
fn convex() -> impl Strategy<Value = Vec<(f64, f64)>> {
    (
        proptest::collection::btree_set(0u32..360, 3..9),
        -50.0..50.0f64,
        -50.0..50.0f64,
        1.0..30.0f64,
        1.0..30.0f64,
    )
        .prop_map(|(angles, cx, cy, rx, ry)| {
            angles
                .into_iter()
                .map(|a| {
                    let t = (a as f64).to_radians();
                    (cx + rx * t.cos(), cy + ry * t.sin())
                })
                .collect::<Vec<_>>()
        })
        .prop_filter("non-degenerate", |ring: &Vec<(f64, f64)>| {
            area(ring).abs() > 1e-3
        })
}

fn area(ring: &[(f64, f64)]) -> f64 {
    let mut s = 0.0;
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        s += a.0 * b.1 - b.0 * a.1;
    }
    s / 2.0
}

/// Sutherland–Hodgman: `subject` clipped by convex counter-clockwise `clip`.
fn clip(subject: &[(f64, f64)], clip: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = subject.to_vec();
    for i in 0..clip.len() {
        let a = clip[i];
        let b = clip[(i + 1) % clip.len()];
        let side = |p: (f64, f64)| (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
        let input = std::mem::take(&mut out);
        for j in 0..input.len() {
            let cur = input[j];
            let prev = input[(j + input.len() - 1) % input.len()];
            let (sc, sp) = (side(cur), side(prev));
            if (sc >= 0.0) != (sp >= 0.0) {
                let t = sp / (sp - sc);
                out.push((prev.0 + t * (cur.0 - prev.0), prev.1 + t * (cur.1 - prev.1)));
            }
            if sc >= 0.0 {
                out.push(cur);
            }
        }
        if out.is_empty() {
            break;
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn ray_casting_matches_winding(ring in convex(), px in -90.0..90.0f64, py in -90.0..90.0f64) {
        let poly = Polygon::from_coords(&ring).unwrap();
        prop_assume!(boundary_distance(&ring, (px, py)) > 1e-6);
        let inside = winding(&ring, (px, py)) != 0;
        prop_assert_eq!(poly.contains(Point::new(px, py)), inside);
    }
}

proptest! {
    #[test]
    fn containment_implies_zero_distance(ring in convex(), px in -90.0..90.0f64, py in -90.0..90.0f64) {
        let poly = Polygon::from_coords(&ring).unwrap();
        let p = Point::new(px, py);
        if poly.contains(p) {
            prop_assert_eq!(poly.distance(p), 0.0);
        } else {
            prop_assert!(poly.distance(p) > 0.0);
        }
    }

    #[test]
    fn vertices_are_on_the_boundary(ring in convex()) {
        let poly = Polygon::from_coords(&ring).unwrap();
        for v in poly.vertices() {
            prop_assert_eq!(poly.locate(*v), Location::Boundary);
            prop_assert!(poly.contains(*v));
            prop_assert_eq!(poly.distance(*v), 0.0);
        }
    }

    /// Quarter-meter grids keep translated coordinates exact.
    #[test]
    fn translation_invariance(
        corners in proptest::collection::vec((-200i32..200, -200i32..200), 4),
        p in (-300i32..300, -300i32..300),
        d in (-4000i32..4000, -4000i32..4000),
    ) {
        let q = |v: i32| v as f64 * 0.25;
        let xs = (corners[0].0.min(corners[1].0), corners[0].0.max(corners[1].0));
        let ys = (corners[0].1.min(corners[1].1), corners[0].1.max(corners[1].1));
        prop_assume!(xs.0 < xs.1 && ys.0 < ys.1);
        let ring = [(q(xs.0), q(ys.0)), (q(xs.1), q(ys.0)), (q(corners[2].0.max(xs.1) + 1), q(ys.1)), (q(xs.0), q(ys.1))];
        let poly = Polygon::from_coords(&ring).unwrap();
        let moved: Vec<(f64, f64)> = ring.iter().map(|&(x, y)| (x + q(d.0), y + q(d.1))).collect();
        let moved = Polygon::from_coords(&moved).unwrap();
        let pt = Point::new(q(p.0), q(p.1));
        let pm = Point::new(q(p.0) + q(d.0), q(p.1) + q(d.1));
        prop_assert_eq!(poly.locate(pt), moved.locate(pm));
        prop_assert!((poly.distance(pt) - moved.distance(pm)).abs() < 1e-9);
    }

    #[test]
    fn interior_intersection_is_symmetric(a in convex(), b in convex()) {
        let pa = Polygon::from_coords(&a).unwrap();
        let pb = Polygon::from_coords(&b).unwrap();
        prop_assert_eq!(pa.intersects_interior(&pb), pb.intersects_interior(&pa));
        prop_assert!(pa.intersects_interior(&pa));
    }

    #[test]
    fn interior_intersection_matches_clipped_area(a in convex(), b in convex()) {
        let overlap = area(&clip(&a, &b)).abs();
        // Slivers are too close to call in floating point.
        prop_assume!(overlap == 0.0 || overlap > 1e-6);
        let pa = Polygon::from_coords(&a).unwrap();
        let pb = Polygon::from_coords(&b).unwrap();
        prop_assert_eq!(pa.intersects_interior(&pb), overlap > 0.0);
    }

    #[test]
    fn shared_edge_is_not_overlap(x0 in -100i32..100, y0 in -100i32..100, w1 in 1i32..50, w2 in 1i32..50, h in 1i32..50) {
        let (x0, y0, w1, w2, h) = (x0 as f64, y0 as f64, w1 as f64, w2 as f64, h as f64);
        let left = Polygon::rectangle(x0, y0, x0 + w1, y0 + h).unwrap();
        let right = Polygon::rectangle(x0 + w1, y0, x0 + w1 + w2, y0 + h).unwrap();
        prop_assert!(!left.intersects_interior(&right));
        let corner = Polygon::rectangle(x0 + w1, y0 + h, x0 + w1 + w2, y0 + 2.0 * h).unwrap();
        prop_assert!(!left.intersects_interior(&corner));
    }

    #[test]
    fn interior_point_is_inside(ring in convex()) {
        let poly = Polygon::from_coords(&ring).unwrap();
        let p = poly.interior_point().unwrap();
        prop_assert_eq!(poly.locate(p), Location::Interior);
    }
}
