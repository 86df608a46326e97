//! Square-cap buffer: the Minkowski sum with the axis-aligned square `[-d, d]²`.

use super::overlay::{Arrangement, Operand};
use super::{cross, GeometryConfig, Point, Polygon, Region, Ring};

/// Andrew's monotone chain; counter-clockwise, collinear points dropped.
pub(crate) fn convex_hull(mut pts: Vec<Point>) -> Vec<Point> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], *p) <= 0.0 {
            lower.pop();
        }
        lower.push(*p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], *p) <= 0.0 {
            upper.pop();
        }
        upper.push(*p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn corners(p: Point, d: f64) -> [Point; 4] {
    [
        Point::new(p.x - d, p.y - d),
        Point::new(p.x + d, p.y - d),
        Point::new(p.x + d, p.y + d),
        Point::new(p.x - d, p.y + d),
    ]
}

/// Grows `g` by distance `d` with mitred corners; `buffer(Empty, d)` is Empty.
pub fn buffer(g: &Region, d: f64, cfg: &GeometryConfig) -> Region {
    if g.is_empty_set() || d <= 0.0 {
        return g.clone();
    }
    if g.polygons().len() == 1 && g.polygons()[0].is_convex() {
        let pts: Vec<Point> = g.polygons()[0]
            .exterior
            .points()
            .iter()
            .flat_map(|p| corners(*p, d))
            .collect();
        let hull = convex_hull(pts);
        return Region::canonicalize(vec![Polygon {
            exterior: Ring::new(hull),
            holes: Vec::new(),
        }]);
    }
    let mut rings = g.ring_vec();
    for r in g.rings() {
        for (a, b) in r.edges() {
            let mut pts = corners(a, d).to_vec();
            pts.extend(corners(b, d));
            rings.push(Ring::new(convex_hull(pts)));
        }
    }
    let arr = Arrangement::build(&[Operand::Rings(&rings)]);
    arr.extract(|m| m & 1 != 0, cfg.area_epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{area, covered_by, difference, geom_equal};

    fn cfg() -> GeometryConfig {
        GeometryConfig::new(0.1, 1e-9).unwrap()
    }

    #[test]
    fn empty_stays_empty() {
        assert!(buffer(&Region::empty(), 0.1, &cfg()).is_empty_set());
    }

    #[test]
    fn unit_square_grows_to_square() {
        let c = cfg();
        let b = buffer(&Region::rect(0.0, 0.0, 1.0, 1.0), 0.1, &c);
        assert!(geom_equal(&b, &Region::rect(-0.1, -0.1, 1.1, 1.1), &c));
        assert!((area(&b) - 1.44).abs() < 1e-12);
        assert_eq!(b.vertex_count(), 4);
    }

    #[test]
    fn non_convex_buffer_matches_per_piece_growth() {
        let c = cfg();
        let l = crate::geometry::geom_union(
            &[Region::rect(0.0, 0.0, 3.0, 1.0), Region::rect(0.0, 0.0, 1.0, 3.0)],
            &c,
        );
        let b = buffer(&l, 0.5, &c);
        let want = crate::geometry::geom_union(
            &[Region::rect(-0.5, -0.5, 3.5, 1.5), Region::rect(-0.5, -0.5, 1.5, 3.5)],
            &c,
        );
        assert!(geom_equal(&b, &want, &c), "{b}");
    }

    #[test]
    fn holes_shrink() {
        let c = cfg();
        let ring = difference(&Region::rect(0.0, 0.0, 10.0, 10.0), &Region::rect(2.0, 2.0, 8.0, 8.0), &c);
        let b = buffer(&ring, 1.0, &c);
        let want = difference(&Region::rect(-1.0, -1.0, 11.0, 11.0), &Region::rect(3.0, 3.0, 7.0, 7.0), &c);
        assert!(geom_equal(&b, &want, &c), "{b}");
    }

    #[test]
    fn buffer_strictly_contains() {
        let c = cfg();
        let tri = Region::polygon(
            vec![Point::new(0.0, 0.0), Point::new(4.0, 1.0), Point::new(1.0, 3.0)],
            vec![],
            1e-12,
        )
        .unwrap();
        let b = buffer(&tri, 0.2, &c);
        assert!(covered_by(&tri, &b, &c));
        assert!(area(&b) > area(&tri));
    }
}
