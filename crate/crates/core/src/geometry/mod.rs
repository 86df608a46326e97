//! Regularized polygonal regions.
//!
//! A [`Region`] is either empty or a finite set of polygons with disjoint
//! interiors. Every constructor and every boolean operation returns a
//! normalized region: outer rings counter-clockwise, holes clockwise, slivers
//! below the area tolerance removed, rings rotated to a canonical start.

mod buffer;
mod index;
mod io;
mod oracle;
mod overlay;
mod predicates;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use buffer::buffer;
pub use index::GridIndex;
pub use io::{region_from_geojson, region_from_wkt, region_to_geojson, region_to_wkt};
pub use oracle::{oracle_relation, topo_oracle};
pub use predicates::{classify, four_intersection, topo, FourIntersection, Predicate};

use overlay::{Arrangement, Operand};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unknown topological predicate `{0}`")]
    UnknownPredicate(String),
    #[error("four-intersection is undefined for empty regions")]
    EmptyArgument,
    #[error("invalid geometry: {0}")]
    Invalid(String),
    #[error("unsupported geometry type `{0}`")]
    Unsupported(String),
    #[error("oracle resolution too coarse: shortest edge {edge} is below {min}")]
    ResolutionTooCoarse { edge: f64, min: f64 },
    #[error("oracle could not classify the sampled intersection pattern")]
    OracleInconclusive,
    #[error("invalid geometry configuration: {0}")]
    Config(String),
}

/// A point in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

pub(crate) fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn empty() -> Self {
        Self {
            min_x: f64::INFINITY,
            min_y: f64::INFINITY,
            max_x: f64::NEG_INFINITY,
            max_y: f64::NEG_INFINITY,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.min_x > self.max_x || self.min_y > self.max_y
    }

    pub fn add(&mut self, p: Point) {
        self.min_x = self.min_x.min(p.x);
        self.min_y = self.min_y.min(p.y);
        self.max_x = self.max_x.max(p.x);
        self.max_y = self.max_y.max(p.y);
    }

    pub fn merge(&self, o: &BBox) -> BBox {
        BBox {
            min_x: self.min_x.min(o.min_x),
            min_y: self.min_y.min(o.min_y),
            max_x: self.max_x.max(o.max_x),
            max_y: self.max_y.max(o.max_y),
        }
    }

    pub fn expand(&self, r: f64) -> BBox {
        BBox {
            min_x: self.min_x - r,
            min_y: self.min_y - r,
            max_x: self.max_x + r,
            max_y: self.max_y + r,
        }
    }

    /// Closed-box intersection test.
    pub fn intersects(&self, o: &BBox) -> bool {
        !(self.is_empty() || o.is_empty())
            && self.min_x <= o.max_x
            && o.min_x <= self.max_x
            && self.min_y <= o.max_y
            && o.min_y <= self.max_y
    }

    pub fn width(&self) -> f64 {
        (self.max_x - self.min_x).max(0.0)
    }

    pub fn height(&self) -> f64 {
        (self.max_y - self.min_y).max(0.0)
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diagonal(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn max_abs(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.min_x
            .abs()
            .max(self.max_x.abs())
            .max(self.min_y.abs())
            .max(self.max_y.abs())
    }
}

/// A closed ring stored without the repeated closing vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct Ring {
    points: Vec<Point>,
}

impl Ring {
    pub fn new(mut points: Vec<Point>) -> Self {
        if points.len() > 1 && points.first() == points.last() {
            points.pop();
        }
        Self { points }
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Shoelace area; positive for counter-clockwise rings.
    pub fn signed_area(&self) -> f64 {
        let n = self.points.len();
        if n < 3 {
            return 0.0;
        }
        let o = self.points[0];
        let mut s = 0.0;
        for i in 1..n - 1 {
            s += cross(o, self.points[i], self.points[i + 1]);
        }
        s * 0.5
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point, Point)> + '_ {
        let n = self.points.len();
        (0..n).map(move |i| (self.points[i], self.points[(i + 1) % n]))
    }

    pub(crate) fn reversed(&self) -> Ring {
        let mut p = self.points.clone();
        p.reverse();
        Ring { points: p }
    }

    /// Even-odd containment of a point strictly off the ring.
    pub fn contains_point(&self, p: Point) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if (a.y > p.y) != (b.y > p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if x > p.x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    fn canonicalize(&mut self) {
        if let Some((k, _)) = self
            .points
            .iter()
            .enumerate()
            .min_by(|a, b| cmp_point(a.1, b.1))
        {
            self.points.rotate_left(k);
        }
    }
}

fn cmp_point(a: &Point, b: &Point) -> std::cmp::Ordering {
    a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y))
}

/// An outer ring with zero or more holes.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub exterior: Ring,
    pub holes: Vec<Ring>,
}

impl Polygon {
    pub fn area(&self) -> f64 {
        self.exterior.signed_area().abs()
            - self.holes.iter().map(|h| h.signed_area().abs()).sum::<f64>()
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        std::iter::once(&self.exterior).chain(self.holes.iter())
    }

    fn is_convex(&self) -> bool {
        if !self.holes.is_empty() {
            return false;
        }
        let p = self.exterior.points();
        let n = p.len();
        (0..n).all(|i| cross(p[i], p[(i + 1) % n], p[(i + 2) % n]) >= 0.0)
    }
}

/// A regularized planar region. The empty region has no polygons.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Region {
    polygons: Vec<Polygon>,
}

impl Region {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Axis-aligned rectangle spanned by two corners.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        let (ax, bx) = (x0.min(x1), x0.max(x1));
        let (ay, by) = (y0.min(y1), y0.max(y1));
        if ax == bx || ay == by {
            return Self::empty();
        }
        let ring = Ring::new(vec![
            Point::new(ax, ay),
            Point::new(bx, ay),
            Point::new(bx, by),
            Point::new(ax, by),
        ]);
        Self {
            polygons: vec![Polygon {
                exterior: ring,
                holes: Vec::new(),
            }],
        }
    }

    /// Builds a region from raw rings of any orientation. Overlapping parts
    /// are merged, self-intersections resolved, and slivers of at most
    /// `area_epsilon` dropped.
    pub fn from_polygons(
        raw: Vec<(Vec<Point>, Vec<Vec<Point>>)>,
        area_epsilon: f64,
    ) -> Result<Self, GeometryError> {
        let mut rings = Vec::new();
        for (outer, holes) in raw {
            for p in outer.iter().chain(holes.iter().flatten()) {
                if !p.x.is_finite() || !p.y.is_finite() {
                    return Err(GeometryError::Invalid("non-finite coordinate".into()));
                }
            }
            let outer = Ring::new(outer);
            if outer.len() < 3 {
                return Err(GeometryError::Invalid("ring with fewer than 3 vertices".into()));
            }
            rings.push(orient(outer, true));
            for h in holes {
                let h = Ring::new(h);
                if h.len() < 3 {
                    return Err(GeometryError::Invalid("ring with fewer than 3 vertices".into()));
                }
                rings.push(orient(h, false));
            }
        }
        if rings.is_empty() {
            return Ok(Self::empty());
        }
        let arr = Arrangement::build(&[Operand::Rings(&rings)]);
        Ok(arr.extract(|m| m & 1 != 0, area_epsilon))
    }

    pub fn polygon(exterior: Vec<Point>, holes: Vec<Vec<Point>>, area_epsilon: f64) -> Result<Self, GeometryError> {
        Self::from_polygons(vec![(exterior, holes)], area_epsilon)
    }

    pub fn polygons(&self) -> &[Polygon] {
        &self.polygons
    }

    pub fn is_empty_set(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.polygons.iter().map(Polygon::area).sum()
    }

    pub fn bbox(&self) -> BBox {
        let mut b = BBox::empty();
        for p in &self.polygons {
            for q in p.exterior.points() {
                b.add(*q);
            }
        }
        b
    }

    pub fn vertex_count(&self) -> usize {
        self.polygons
            .iter()
            .flat_map(|p| p.rings())
            .map(Ring::len)
            .sum()
    }

    pub fn rings(&self) -> impl Iterator<Item = &Ring> {
        self.polygons.iter().flat_map(|p| p.rings())
    }

    pub(crate) fn ring_vec(&self) -> Vec<Ring> {
        self.rings().cloned().collect()
    }

    /// Stable fingerprint of the coordinates quantized to `grid`.
    pub fn fingerprint(&self, grid: f64) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.polygons.len().hash(&mut h);
        for r in self.rings() {
            r.len().hash(&mut h);
            for p in r.points() {
                ((p.x / grid).round() as i64).hash(&mut h);
                ((p.y / grid).round() as i64).hash(&mut h);
            }
        }
        h.finish()
    }

    pub(crate) fn canonicalize(mut polygons: Vec<Polygon>) -> Self {
        for p in &mut polygons {
            p.exterior.canonicalize();
            for h in &mut p.holes {
                h.canonicalize();
            }
            p.holes
                .sort_by(|a, b| cmp_point(&a.points()[0], &b.points()[0]));
        }
        polygons.sort_by(|a, b| cmp_point(&a.exterior.points()[0], &b.exterior.points()[0]));
        Self { polygons }
    }
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&region_to_wkt(self))
    }
}

fn orient(r: Ring, ccw: bool) -> Ring {
    if (r.signed_area() > 0.0) == ccw {
        r
    } else {
        r.reversed()
    }
}

/// Buffer distance and area tolerance shared by all geometric operations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryConfig {
    pub d: f64,
    pub area_epsilon: f64,
}

impl GeometryConfig {
    pub fn new(d: f64, area_epsilon: f64) -> Result<Self, GeometryError> {
        if !(d > 0.0 && d.is_finite()) {
            return Err(GeometryError::Config(format!("buffer distance must be positive, got {d}")));
        }
        if !(area_epsilon > 0.0 && area_epsilon.is_finite()) {
            return Err(GeometryError::Config(format!(
                "area tolerance must be positive, got {area_epsilon}"
            )));
        }
        Ok(Self { d, area_epsilon })
    }

    /// Defaults tied to an extent: `d` is 1e-3 of the diagonal and the area
    /// tolerance 1e-9 of the box area.
    pub fn for_extent(b: &BBox) -> Self {
        if b.is_empty() || b.area() <= 0.0 {
            return Self::default();
        }
        Self {
            d: 1e-3 * b.diagonal(),
            area_epsilon: 1e-9 * b.area(),
        }
    }

    /// Overrides either value while keeping the other default.
    pub fn with_overrides(self, d: Option<f64>, eps: Option<f64>) -> Result<Self, GeometryError> {
        Self::new(d.unwrap_or(self.d), eps.unwrap_or(self.area_epsilon))
    }

    /// Quantization step used for state fingerprints.
    pub fn hash_grid(&self) -> f64 {
        self.area_epsilon.sqrt() * 1e-3
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            d: 1e-3,
            area_epsilon: 1e-9,
        }
    }
}

/// Area of a region; zero for the empty region.
pub fn area(g: &Region) -> f64 {
    g.area()
}

pub fn is_empty(g: &Region, cfg: &GeometryConfig) -> bool {
    g.area() <= cfg.area_epsilon
}

#[derive(Clone, Copy)]
enum BoolOp {
    Intersection,
    Union,
    Difference,
    SymDifference,
}

impl BoolOp {
    fn select(self, m: u8) -> bool {
        let (a, b) = (m & 1 != 0, m & 2 != 0);
        match self {
            BoolOp::Intersection => a && b,
            BoolOp::Union => a || b,
            BoolOp::Difference => a && !b,
            BoolOp::SymDifference => a != b,
        }
    }
}

fn binary(op: BoolOp, a: &Region, b: &Region, cfg: &GeometryConfig) -> Region {
    if a.is_empty_set() || b.is_empty_set() || !a.bbox().intersects(&b.bbox()) {
        return match op {
            BoolOp::Intersection => Region::empty(),
            BoolOp::Difference => a.clone(),
            BoolOp::Union | BoolOp::SymDifference => {
                if a.is_empty_set() {
                    b.clone()
                } else if b.is_empty_set() {
                    a.clone()
                } else {
                    let mut p = a.polygons.clone();
                    p.extend(b.polygons.iter().cloned());
                    Region::canonicalize(p)
                }
            }
        };
    }
    let (ra, rb) = (a.ring_vec(), b.ring_vec());
    let arr = Arrangement::build(&[Operand::Rings(&ra), Operand::Rings(&rb)]);
    arr.extract(|m| op.select(m), cfg.area_epsilon)
}

fn binary_area(op: BoolOp, a: &Region, b: &Region) -> f64 {
    if a.is_empty_set() || b.is_empty_set() || !a.bbox().intersects(&b.bbox()) {
        return match op {
            BoolOp::Intersection => 0.0,
            BoolOp::Difference => a.area(),
            BoolOp::Union | BoolOp::SymDifference => a.area() + b.area(),
        };
    }
    let (ra, rb) = (a.ring_vec(), b.ring_vec());
    let arr = Arrangement::build(&[Operand::Rings(&ra), Operand::Rings(&rb)]);
    arr.area(|m| op.select(m))
}

/// Regularized set difference `g1 \ g2`.
pub fn difference(g1: &Region, g2: &Region, cfg: &GeometryConfig) -> Region {
    binary(BoolOp::Difference, g1, g2, cfg)
}

pub fn intersection(g1: &Region, g2: &Region, cfg: &GeometryConfig) -> Region {
    binary(BoolOp::Intersection, g1, g2, cfg)
}

pub fn union(g1: &Region, g2: &Region, cfg: &GeometryConfig) -> Region {
    binary(BoolOp::Union, g1, g2, cfg)
}

pub fn sym_difference(g1: &Region, g2: &Region, cfg: &GeometryConfig) -> Region {
    binary(BoolOp::SymDifference, g1, g2, cfg)
}

/// Area of `g1 ∩ g2` without building the result rings.
pub fn intersection_area(g1: &Region, g2: &Region) -> f64 {
    binary_area(BoolOp::Intersection, g1, g2)
}

/// Area of `g1 \ g2` without building the result rings.
pub fn difference_area(g1: &Region, g2: &Region) -> f64 {
    binary_area(BoolOp::Difference, g1, g2)
}

/// Area of the symmetric difference.
pub fn sym_difference_area(g1: &Region, g2: &Region) -> f64 {
    binary_area(BoolOp::SymDifference, g1, g2)
}

/// Union of any number of regions.
pub fn geom_union(gs: &[Region], cfg: &GeometryConfig) -> Region {
    let live: Vec<&Region> = gs.iter().filter(|g| !g.is_empty_set()).collect();
    match live.len() {
        0 => return Region::empty(),
        1 => return live[0].clone(),
        _ => {}
    }
    let rings: Vec<Ring> = live.iter().flat_map(|g| g.rings().cloned()).collect();
    let arr = Arrangement::build(&[Operand::Rings(&rings)]);
    arr.extract(|m| m & 1 != 0, cfg.area_epsilon)
}

/// Equality up to the area tolerance.
pub fn geom_equal(g1: &Region, g2: &Region, cfg: &GeometryConfig) -> bool {
    sym_difference_area(g1, g2) <= cfg.area_epsilon
}

/// Containment `g1 ⊆ g2` up to the area tolerance.
pub fn covered_by(g1: &Region, g2: &Region, cfg: &GeometryConfig) -> bool {
    difference_area(g1, g2) <= cfg.area_epsilon
}
