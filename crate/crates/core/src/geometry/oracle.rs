//! Sampling oracle for the topological predicates.
//!
//! The plane around both regions is sampled on a regular grid. Each sample is
//! labelled interior, boundary (within one cell of an edge) or exterior for
//! each region, and the four intersections are read from the label pairs.
//! Only used to cross-check [`classify`](super::classify) in tests.

use super::predicates::{FourIntersection, Predicate};
use super::{GeometryError, Point, Region};

const OUT: u8 = 0;
const IN: u8 = 1;
const BND: u8 = 2;

fn solve(a: f64, b: f64, lo: f64, hi: f64) -> Option<(f64, f64)> {
    // lo <= a*x + b <= hi
    if a == 0.0 {
        return (lo <= b && b <= hi).then_some((f64::NEG_INFINITY, f64::INFINITY));
    }
    let (x0, x1) = ((lo - b) / a, (hi - b) / a);
    Some((x0.min(x1), x0.max(x1)))
}

/// Horizontal extent of the set of points at distance <= h from `pq` on line y.
fn band(p: Point, q: Point, h: f64, y: f64) -> Option<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in [p, q] {
        let dy = y - c.y;
        if dy.abs() <= h {
            let r = (h * h - dy * dy).sqrt();
            lo = lo.min(c.x - r);
            hi = hi.max(c.x + r);
        }
    }
    let (vx, vy) = (q.x - p.x, q.y - p.y);
    let l2 = vx * vx + vy * vy;
    let l = l2.sqrt();
    let along = solve(vx, (y - p.y) * vy - p.x * vx, 0.0, l2);
    let across = solve(-vy, vx * (y - p.y) + vy * p.x, -h * l, h * l);
    if let (Some(a), Some(b)) = (along, across) {
        let (s, e) = (a.0.max(b.0), a.1.min(b.1));
        if s <= e {
            lo = lo.min(s);
            hi = hi.max(e);
        }
    }
    (lo <= hi).then_some((lo, hi))
}

struct Grid {
    x0: f64,
    y0: f64,
    hx: f64,
    hy: f64,
    n: usize,
}

impl Grid {
    fn cols(&self, a: f64, b: f64) -> std::ops::Range<usize> {
        let s = ((a - self.x0) / self.hx - 0.5).ceil().max(0.0);
        let e = ((b - self.x0) / self.hx - 0.5).floor();
        if e < s {
            return 0..0;
        }
        (s as usize).min(self.n)..((e as usize) + 1).min(self.n)
    }
}

fn label_row(g: &Region, grid: &Grid, h: f64, y: f64, out: &mut [u8]) {
    out.fill(OUT);
    let mut xs = Vec::new();
    for r in g.rings() {
        for (a, b) in r.edges() {
            if (a.y > y) != (b.y > y) {
                xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
    }
    xs.sort_by(f64::total_cmp);
    for pair in xs.chunks(2) {
        if let [a, b] = pair {
            for i in grid.cols(*a, *b) {
                out[i] = IN;
            }
        }
    }
    for r in g.rings() {
        for (a, b) in r.edges() {
            if y < a.y.min(b.y) - h || y > a.y.max(b.y) + h {
                continue;
            }
            if let Some((lo, hi)) = band(a, b, h, y) {
                for i in grid.cols(lo, hi) {
                    out[i] = BND;
                }
            }
        }
    }
}

/// Base relation estimated by sampling a `resolution × resolution` grid.
pub fn oracle_relation(g1: &Region, g2: &Region, resolution: usize) -> Result<Predicate, GeometryError> {
    if g1.is_empty_set() || g2.is_empty_set() {
        return Err(GeometryError::EmptyArgument);
    }
    let bb = g1.bbox().merge(&g2.bbox());
    let margin = 0.05 * bb.width().max(bb.height());
    let bb = bb.expand(margin);
    let n = resolution.max(8);
    let grid = Grid {
        x0: bb.min_x,
        y0: bb.min_y,
        hx: bb.width() / n as f64,
        hy: bb.height() / n as f64,
        n,
    };
    // An irrational multiple of the cell keeps samples of lattice data off the
    // band edge, where the two regions' bands could round differently.
    let h = grid.hx.max(grid.hy) * (0.75 * std::f64::consts::SQRT_2);
    let shortest = g1
        .rings()
        .chain(g2.rings())
        .flat_map(|r| r.edges())
        .map(|(a, b)| (b.x - a.x).hypot(b.y - a.y))
        .fold(f64::INFINITY, f64::min);
    if shortest < 4.0 * h {
        return Err(GeometryError::ResolutionTooCoarse { edge: shortest, min: 4.0 * h });
    }
    let mut s1 = vec![OUT; n];
    let mut s2 = vec![OUT; n];
    let mut fi = FourIntersection { bb: false, ii: false, bi: false, ib: false };
    let (mut a_out, mut b_out) = (false, false);
    for row in 0..n {
        let y = grid.y0 + (row as f64 + 0.5) * grid.hy;
        label_row(g1, &grid, h, y, &mut s1);
        label_row(g2, &grid, h, y, &mut s2);
        for (a, b) in s1.iter().zip(&s2) {
            match (*a, *b) {
                (BND, BND) => fi.bb = true,
                (IN, IN) => fi.ii = true,
                (BND, IN) => fi.bi = true,
                (IN, BND) => fi.ib = true,
                (IN, OUT) => a_out = true,
                (OUT, IN) => b_out = true,
                _ => {}
            }
        }
    }
    // With several components the four intersections alone cannot tell
    // containment from overlap, so interior samples outside the other region
    // decide it.
    let rel = match (fi.ii, a_out, b_out) {
        (false, _, _) => fi.relation(),
        (true, true, true) => Some(Predicate::OV),
        (true, false, false) => (fi.bb && !fi.bi && !fi.ib).then_some(Predicate::EQ),
        (true, false, true) => Some(if fi.bb { Predicate::CB } else { Predicate::IS }),
        (true, true, false) => Some(if fi.bb { Predicate::CV } else { Predicate::IC }),
    };
    rel.ok_or(GeometryError::OracleInconclusive)
}

/// Evaluates `T(g1, g2)` with the sampling oracle.
pub fn topo_oracle(t: Predicate, g1: &Region, g2: &Region, resolution: usize) -> Result<bool, GeometryError> {
    if g1.is_empty_set() || g2.is_empty_set() {
        return Ok(false);
    }
    Ok(t.holds_for(oracle_relation(g1, g2, resolution)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_of_horizontal_segment() {
        let (lo, hi) = band(Point::new(0.0, 0.0), Point::new(2.0, 0.0), 0.5, 0.3).unwrap();
        assert!((lo - (-0.4)).abs() < 1e-12 && (hi - 2.4).abs() < 1e-12);
        assert!(band(Point::new(0.0, 0.0), Point::new(2.0, 0.0), 0.5, 0.6).is_none());
    }

    #[test]
    fn band_of_vertical_segment() {
        let (lo, hi) = band(Point::new(1.0, 0.0), Point::new(1.0, 2.0), 0.5, 1.0).unwrap();
        assert!((lo - 0.5).abs() < 1e-12 && (hi - 1.5).abs() < 1e-12);
    }

    #[test]
    fn basic_relations() {
        let a = Region::rect(0.0, 0.0, 4.0, 4.0);
        let b = Region::rect(2.0, 0.0, 6.0, 4.0);
        assert_eq!(oracle_relation(&a, &b, 512).unwrap(), Predicate::OV);
        assert!(topo_oracle(Predicate::DJ, &a, &Region::rect(10.0, 10.0, 14.0, 14.0), 512).unwrap());
        assert_eq!(oracle_relation(&a, &Region::rect(4.0, 0.0, 8.0, 4.0), 512).unwrap(), Predicate::TO);
        assert_eq!(oracle_relation(&a, &a, 512).unwrap(), Predicate::EQ);
        assert_eq!(oracle_relation(&Region::rect(1.0, 1.0, 2.0, 2.0), &a, 512).unwrap(), Predicate::IS);
    }

    #[test]
    fn coarse_grid_is_rejected() {
        let a = Region::rect(0.0, 0.0, 100.0, 100.0);
        let b = Region::rect(0.0, 0.0, 0.1, 0.1);
        assert!(matches!(oracle_relation(&a, &b, 64), Err(GeometryError::ResolutionTooCoarse { .. })));
    }
}
