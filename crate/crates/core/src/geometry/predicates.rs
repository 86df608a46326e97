//! Topological predicates between regions.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::overlay::{Arrangement, Operand};
use super::{GeometryConfig, GeometryError, Region};

/// The eight base relations and the four derived ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Predicate {
    /// Overlaps
    OV,
    /// Equals
    EQ,
    /// CoveredBy
    CB,
    /// Inside
    IS,
    /// Covers
    CV,
    /// Includes
    IC,
    /// Touches
    TO,
    /// Disjoint
    DJ,
    /// Intersects
    IT,
    /// Within
    WI,
    /// Contains
    CO,
    /// IIntersects: interiors intersect
    II,
}

impl Predicate {
    pub const BASE: [Predicate; 8] = [
        Predicate::OV,
        Predicate::EQ,
        Predicate::CB,
        Predicate::IS,
        Predicate::CV,
        Predicate::IC,
        Predicate::TO,
        Predicate::DJ,
    ];

    pub const ALL: [Predicate; 12] = [
        Predicate::OV,
        Predicate::EQ,
        Predicate::CB,
        Predicate::IS,
        Predicate::CV,
        Predicate::IC,
        Predicate::TO,
        Predicate::DJ,
        Predicate::IT,
        Predicate::WI,
        Predicate::CO,
        Predicate::II,
    ];

    pub fn is_base(self) -> bool {
        Self::BASE.contains(&self)
    }

    pub fn converse(self) -> Predicate {
        use Predicate::*;
        match self {
            CB => CV,
            CV => CB,
            IS => IC,
            IC => IS,
            WI => CO,
            CO => WI,
            p => p,
        }
    }

    /// Whether the predicate holds given the base relation of a pair.
    pub fn holds_for(self, base: Predicate) -> bool {
        use Predicate::*;
        match self {
            IT => base != DJ,
            WI => matches!(base, IS | CB | EQ),
            CO => matches!(base, IC | CV | EQ),
            II => matches!(base, OV | IS | CB | EQ | IC | CV),
            p => p == base,
        }
    }

    pub fn name(self) -> &'static str {
        use Predicate::*;
        match self {
            OV => "Overlaps",
            EQ => "Equals",
            CB => "CoveredBy",
            IS => "Inside",
            CV => "Covers",
            IC => "Includes",
            TO => "Touches",
            DJ => "Disjoint",
            IT => "Intersects",
            WI => "Within",
            CO => "Contains",
            II => "IIntersects",
        }
    }

    pub fn code(self) -> &'static str {
        use Predicate::*;
        match self {
            OV => "OV",
            EQ => "EQ",
            CB => "CB",
            IS => "IS",
            CV => "CV",
            IC => "IC",
            TO => "TO",
            DJ => "DJ",
            IT => "IT",
            WI => "WI",
            CO => "CO",
            II => "II",
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Predicate {
    type Err = GeometryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let k = s.trim().to_ascii_lowercase().replace(['_', '-', ' '], "");
        Predicate::ALL
            .into_iter()
            .find(|p| p.code().eq_ignore_ascii_case(&k) || p.name().eq_ignore_ascii_case(&k))
            .or(match k.as_str() {
                "equal" => Some(Predicate::EQ),
                "touch" => Some(Predicate::TO),
                "overlap" => Some(Predicate::OV),
                "intersect" => Some(Predicate::IT),
                "iintersect" => Some(Predicate::II),
                "coveredby" | "covered" => Some(Predicate::CB),
                "include" => Some(Predicate::IC),
                _ => None,
            })
            .ok_or_else(|| GeometryError::UnknownPredicate(s.to_string()))
    }
}

/// Non-emptiness of ∂∂, ∘∘, ∂∘ and ∘∂.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FourIntersection {
    pub bb: bool,
    pub ii: bool,
    pub bi: bool,
    pub ib: bool,
}

impl FourIntersection {
    pub fn of(base: Predicate) -> Option<Self> {
        use Predicate::*;
        let row = |bb, ii, bi, ib| Some(FourIntersection { bb, ii, bi, ib });
        match base {
            DJ => row(false, false, false, false),
            TO => row(true, false, false, false),
            EQ => row(true, true, false, false),
            IS => row(false, true, true, false),
            CB => row(true, true, true, false),
            IC => row(false, true, false, true),
            CV => row(true, true, false, true),
            OV => row(true, true, true, true),
            _ => None,
        }
    }

    /// The base relation whose matrix row equals this pattern.
    pub fn relation(&self) -> Option<Predicate> {
        Predicate::BASE.into_iter().find(|p| Self::of(*p).as_ref() == Some(self))
    }
}

/// Base relation between two non-empty regions.
///
/// Interiors meet when the intersection has area above the tolerance; the
/// inclusion direction is decided by the area of each side's remainder, and
/// boundary contact by shared vertices in the noded arrangement.
pub fn classify(g1: &Region, g2: &Region, cfg: &GeometryConfig) -> Result<Predicate, GeometryError> {
    if g1.is_empty_set() || g2.is_empty_set() {
        return Err(GeometryError::EmptyArgument);
    }
    if g1 == g2 && g1.area() > cfg.area_epsilon {
        return Ok(Predicate::EQ);
    }
    let tolerance_box = g1.bbox().expand(g1.bbox().diagonal() * 1e-12);
    if !tolerance_box.intersects(&g2.bbox().expand(g2.bbox().diagonal() * 1e-12)) {
        return Ok(Predicate::DJ);
    }
    let (ra, rb) = (g1.ring_vec(), g2.ring_vec());
    let arr = Arrangement::build(&[Operand::Rings(&ra), Operand::Rings(&rb)]);
    let eps = cfg.area_epsilon;
    let ii = arr.area(|m| m == 3) > eps;
    let bb = arr.boundaries_meet();
    if !ii {
        return Ok(if bb { Predicate::TO } else { Predicate::DJ });
    }
    let a_out = arr.area(|m| m == 1) > eps;
    let b_out = arr.area(|m| m == 2) > eps;
    Ok(match (a_out, b_out) {
        (false, false) => Predicate::EQ,
        (false, true) => {
            if bb {
                Predicate::CB
            } else {
                Predicate::IS
            }
        }
        (true, false) => {
            if bb {
                Predicate::CV
            } else {
                Predicate::IC
            }
        }
        (true, true) => Predicate::OV,
    })
}

pub fn four_intersection(
    g1: &Region,
    g2: &Region,
    cfg: &GeometryConfig,
) -> Result<FourIntersection, GeometryError> {
    let base = classify(g1, g2, cfg)?;
    Ok(FourIntersection::of(base).expect("base relation"))
}

/// Evaluates `T(g1, g2)`; false whenever either argument is empty.
pub fn topo(t: Predicate, g1: &Region, g2: &Region, cfg: &GeometryConfig) -> bool {
    if g1.area() <= cfg.area_epsilon || g2.area() <= cfg.area_epsilon {
        return false;
    }
    match classify(g1, g2, cfg) {
        Ok(base) => t.holds_for(base),
        Err(_) => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Predicate::*;

    fn cfg() -> GeometryConfig {
        GeometryConfig::new(0.1, 1e-9).unwrap()
    }

    fn r(x0: f64, y0: f64, x1: f64, y1: f64) -> Region {
        Region::rect(x0, y0, x1, y1)
    }

    #[test]
    fn table_rows() {
        let c = cfg();
        let a = r(0.0, 0.0, 1.0, 1.0);
        let cases = [
            (r(5.0, 5.0, 6.0, 6.0), DJ),
            (r(1.0, 0.0, 2.0, 1.0), TO),
            (r(1.0, 1.0, 2.0, 2.0), TO),
            (r(0.0, 0.0, 1.0, 1.0), EQ),
            (r(-1.0, -1.0, 2.0, 2.0), IS),
            (r(0.0, 0.0, 2.0, 2.0), CB),
            (r(0.5, 0.0, 1.5, 1.0), OV),
        ];
        for (b, want) in cases {
            assert_eq!(classify(&a, &b, &c).unwrap(), want, "{b}");
            assert_eq!(classify(&b, &a, &c).unwrap(), want.converse());
        }
        assert_eq!(classify(&r(0.0, 0.0, 4.0, 4.0), &r(1.0, 1.0, 2.0, 2.0), &c).unwrap(), IC);
        assert_eq!(classify(&r(0.0, 0.0, 4.0, 4.0), &r(0.0, 1.0, 2.0, 2.0), &c).unwrap(), CV);
    }

    #[test]
    fn four_intersection_rows() {
        let c = cfg();
        let a = r(0.0, 0.0, 1.0, 1.0);
        let far = four_intersection(&a, &r(4.0, 4.0, 5.0, 5.0), &c).unwrap();
        assert_eq!(far, FourIntersection { bb: false, ii: false, bi: false, ib: false });
        let eq = four_intersection(&a, &a, &c).unwrap();
        assert_eq!(eq, FourIntersection { bb: true, ii: true, bi: false, ib: false });
        let ov = four_intersection(&a, &r(0.5, 0.0, 1.5, 1.0), &c).unwrap();
        assert_eq!(ov, FourIntersection { bb: true, ii: true, bi: true, ib: true });
        assert_eq!(four_intersection(&a, &Region::empty(), &c), Err(GeometryError::EmptyArgument));
    }

    #[test]
    fn empty_arguments_make_every_predicate_false() {
        let c = cfg();
        let g = r(0.0, 0.0, 1.0, 1.0);
        for p in Predicate::ALL {
            assert!(!topo(p, &g, &Region::empty(), &c));
            assert!(!topo(p, &Region::empty(), &g, &c));
        }
        assert!(!topo(OV, &g, &g, &c));
        assert!(topo(EQ, &g, &g, &c));
        assert!(topo(WI, &g, &g, &c) && topo(CO, &g, &g, &c) && topo(II, &g, &g, &c));
    }

    #[test]
    fn derived_predicates() {
        let c = cfg();
        let a = r(0.0, 0.0, 1.0, 1.0);
        let touch = r(1.0, 0.0, 2.0, 1.0);
        assert!(topo(IT, &a, &touch, &c));
        assert!(!topo(II, &a, &touch, &c));
        assert!(topo(II, &a, &r(0.5, 0.5, 3.0, 3.0), &c));
        assert!(topo(WI, &a, &r(-1.0, -1.0, 2.0, 2.0), &c));
        assert!(topo(CO, &r(-1.0, -1.0, 2.0, 2.0), &a, &c));
        assert!(!topo(IT, &a, &r(1.5, 0.0, 2.0, 1.0), &c));
    }

    #[test]
    fn multipart_inclusion_uses_remainders() {
        let c = cfg();
        let two = crate::geometry::geom_union(&[r(0.0, 0.0, 1.0, 1.0), r(3.0, 0.0, 4.0, 1.0)], &c);
        assert_eq!(classify(&r(0.0, 0.0, 1.0, 1.0), &two, &c).unwrap(), CB);
        assert_eq!(classify(&two, &two, &c).unwrap(), EQ);
    }

    #[test]
    fn parse_names() {
        assert_eq!("iintersects".parse::<Predicate>().unwrap(), II);
        assert_eq!("Touches".parse::<Predicate>().unwrap(), TO);
        assert_eq!("it".parse::<Predicate>().unwrap(), IT);
        assert_eq!("equal".parse::<Predicate>().unwrap(), EQ);
        assert!("nearby".parse::<Predicate>().is_err());
    }
}
