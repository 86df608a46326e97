//! Seeded data generators: grid-of-rectangles instances with injected
//! conflicts, and small lattice regions and instances for property tests.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::constraints::{find_all_violations, CoreSIC, DenialSIC};
use crate::geometry::{union, BBox, GeometryConfig, Point, Predicate, Region};
use crate::model::{load_instance, Instance, RelationSchema, Row, Schema, Tid, Value, ValueType};

#[derive(Debug, Error)]
pub enum GenError {
    #[error("cannot place {conflicting} conflicting tuples among {n}")]
    Infeasible { n: usize, conflicting: usize },
    #[error("conflict percentage must lie in [0, 100], got {0}")]
    Percentage(f64),
    #[error("unknown conflict mode `{0}`")]
    Mode(String),
}

/// Kind of injected conflict and the constraint it violates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConflictMode {
    /// Duplicated geometries, violating an Equals constraint.
    Equals,
    /// Overlapping geometries, violating an IIntersects constraint.
    IIntersects,
    /// Touching geometries, violating an Intersects constraint.
    Intersects,
}

impl ConflictMode {
    pub const ALL: [ConflictMode; 3] = [ConflictMode::Equals, ConflictMode::IIntersects, ConflictMode::Intersects];

    pub fn predicate(self) -> Predicate {
        match self {
            ConflictMode::Equals => Predicate::EQ,
            ConflictMode::IIntersects => Predicate::II,
            ConflictMode::Intersects => Predicate::IT,
        }
    }

    /// The single-relation constraint over the generated relation.
    pub fn sic(self) -> CoreSIC {
        CoreSIC::new(0, RELATION, self.predicate()).expect("core predicate")
    }

    pub fn denial(self) -> DenialSIC {
        self.sic().to_denial(&synthetic_schema()).expect("generated schema")
    }
}

impl fmt::Display for ConflictMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConflictMode::Equals => "equals",
            ConflictMode::IIntersects => "iintersects",
            ConflictMode::Intersects => "intersects",
        })
    }
}

impl FromStr for ConflictMode {
    type Err = GenError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "equals" | "equal" | "eq" => Ok(ConflictMode::Equals),
            "iintersects" | "ii" => Ok(ConflictMode::IIntersects),
            "intersects" | "it" | "touches" => Ok(ConflictMode::Intersects),
            _ => Err(GenError::Mode(s.to_string())),
        }
    }
}

pub const RELATION: &str = "R";
const CELL: f64 = 10.0;

pub fn synthetic_schema() -> Arc<Schema> {
    Arc::new(Schema::new(vec![RelationSchema::new(RELATION, &[("id", ValueType::Integer)], &["id"])]).expect("valid"))
}

/// Number of tuples that take part in conflicts for a request.
pub fn conflicting_count(n: usize, pct: f64) -> usize {
    (n as f64 * pct / 100.0 + 1e-9).floor() as usize
}

#[derive(Clone, Copy)]
struct Rect {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
}

impl Rect {
    fn shifted(self, dx: f64) -> Rect {
        Rect { x0: self.x0 + dx, ..self }
    }

    fn region(self) -> Region {
        Region::rect(self.x0, self.y0, self.x0 + self.w, self.y0 + self.h)
    }
}

/// `n` rectangles on a square grid with jittered sizes, of which exactly
/// `⌊n·pct/100⌋` take part in conflicts of the given kind. Conflicts come in
/// pairs of horizontal neighbours, plus one chain of three when the count is odd.
pub fn gen_synthetic(n: usize, pct: f64, mode: ConflictMode, seed: u64) -> Result<Instance, GenError> {
    if !(0.0..=100.0).contains(&pct) {
        return Err(GenError::Percentage(pct));
    }
    let m = conflicting_count(n, pct);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cols = (n as f64).sqrt().ceil().max(1.0) as usize;
    let q = |rng: &mut ChaCha8Rng, lo: u32, hi: u32| rng.gen_range(lo..=hi) as f64 * 0.25;
    let mut rects: Vec<Rect> = (0..n)
        .map(|i| {
            let (c, r) = ((i % cols) as f64, (i / cols) as f64);
            let w = q(&mut rng, 12, 24);
            let h = q(&mut rng, 12, 24);
            let x0 = c * CELL + 2.0 + q(&mut rng, 0, ((6.0 - w) * 4.0) as u32);
            let y0 = r * CELL + 2.0 + q(&mut rng, 0, ((6.0 - h) * 4.0) as u32);
            Rect { x0, y0, w, h }
        })
        .collect();
    if m == 0 {
        return Ok(build(&rects));
    }
    if m == 1 || m > n {
        return Err(GenError::Infeasible { n, conflicting: m });
    }
    let row_len = |r: usize| cols.min(n - r * cols);
    let rows = n.div_ceil(cols);
    let triple = m % 2 == 1;
    if triple && row_len(0) < 3 {
        return Err(GenError::Infeasible { n, conflicting: m });
    }
    let mut slots = Vec::new();
    for r in 0..rows {
        let start = if r == 0 && triple { 3 } else { 0 };
        let mut c = start;
        while c + 1 < row_len(r) {
            slots.push(r * cols + c);
            c += 2;
        }
    }
    let pairs = (m - if triple { 3 } else { 0 }) / 2;
    if pairs > slots.len() {
        return Err(GenError::Infeasible { n, conflicting: m });
    }
    slots.shuffle(&mut rng);
    let mut groups: Vec<Vec<usize>> = slots[..pairs].iter().map(|&a| vec![a, a + 1]).collect();
    if triple {
        groups.push(vec![0, 1, 2]);
    }
    for g in groups {
        for k in 1..g.len() {
            let prev = rects[g[k - 1]];
            rects[g[k]] = match mode {
                ConflictMode::Equals => rects[g[0]],
                ConflictMode::IIntersects => prev.shifted(prev.w / 2.0),
                ConflictMode::Intersects => prev.shifted(prev.w),
            };
        }
    }
    Ok(build(&rects))
}

fn build(rects: &[Rect]) -> Instance {
    let rows = rects
        .iter()
        .enumerate()
        .map(|(i, r)| Row::new(RELATION, vec![Value::Int(i as i64 + 1)], r.region()))
        .collect();
    load_instance(synthetic_schema(), rows, None).expect("generated rows are valid")
}

/// Tids taking part in at least one violation.
pub fn conflicting_tids(d: &Instance, sics: &[DenialSIC], cfg: &GeometryConfig) -> Vec<Tid> {
    let mut t: Vec<Tid> = find_all_violations(d, sics, cfg)
        .expect("valid constraints")
        .into_iter()
        .flat_map(|v| v.tids)
        .collect();
    t.sort_unstable();
    t.dedup();
    t
}

/// A random axis-parallel window whose side is `frac` of the extent's sides.
pub fn random_window(rng: &mut impl Rng, extent: &BBox, frac: f64) -> Region {
    let (w, h) = (extent.width() * frac, extent.height() * frac);
    let x0 = extent.min_x + rng.gen::<f64>() * (extent.width() - w);
    let y0 = extent.min_y + rng.gen::<f64>() * (extent.height() - h);
    Region::rect(x0, y0, x0 + w, y0 + h)
}

/// Lattice regions inside `[0, size]²`: rectangles, unions of rectangles, and
/// octagons with chamfered corners.
pub fn random_region(rng: &mut impl Rng, size: i32) -> Region {
    let rect = |rng: &mut dyn rand::RngCore| {
        let x0 = rng.gen_range(0..size - 1);
        let y0 = rng.gen_range(0..size - 1);
        let x1 = rng.gen_range(x0 + 1..=size);
        let y1 = rng.gen_range(y0 + 1..=size);
        (x0 as f64, y0 as f64, x1 as f64, y1 as f64)
    };
    match rng.gen_range(0..10) {
        0..=5 => {
            let (a, b, c, d) = rect(rng);
            Region::rect(a, b, c, d)
        }
        6..=7 => {
            let (a, b, c, d) = rect(rng);
            let (e, f, g, h) = rect(rng);
            union(&Region::rect(a, b, c, d), &Region::rect(e, f, g, h), &GeometryConfig::default())
        }
        _ => {
            let (x0, y0, x1, y1) = rect(rng);
            let k = ((x1 - x0).min(y1 - y0) / 2.0).floor();
            if k < 1.0 {
                return Region::rect(x0, y0, x1, y1);
            }
            let c = rng.gen_range(1..=k as i32) as f64;
            let p = |x, y| Point { x, y };
            let ring = vec![
                p(x0 + c, y0),
                p(x1 - c, y0),
                p(x1, y0 + c),
                p(x1, y1 - c),
                p(x1 - c, y1),
                p(x0 + c, y1),
                p(x0, y1 - c),
                p(x0, y0 + c),
            ];
            Region::polygon(ring, vec![], 0.0).expect("convex octagon")
        }
    }
}

/// A small instance over the generated schema with between 1 and
/// `max_conflicts` violating pairs under `pred`.
pub fn random_small_instance(rng: &mut impl Rng, pred: Predicate, max_tuples: usize, max_conflicts: usize) -> Instance {
    let sic = CoreSIC::new(0, RELATION, pred).expect("core predicate").to_denial(&synthetic_schema()).expect("schema");
    loop {
        let n = rng.gen_range(2..=max_tuples);
        let mut gs: Vec<Region> = (0..n).map(|_| random_region(rng, 16)).collect();
        if pred == Predicate::EQ {
            for _ in 0..rng.gen_range(1..=2) {
                let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                gs[b] = gs[a].clone();
            }
        }
        let rows = gs
            .into_iter()
            .enumerate()
            .map(|(i, g)| Row::new(RELATION, vec![Value::Int(i as i64 + 1)], g))
            .collect();
        let d = load_instance(synthetic_schema(), rows, None).expect("valid rows");
        if d.len() < 2 {
            continue;
        }
        let v = find_all_violations(&d, std::slice::from_ref(&sic), &d.default_config()).expect("valid");
        if (1..=max_conflicts).contains(&v.len()) {
            return d;
        }
    }
}
