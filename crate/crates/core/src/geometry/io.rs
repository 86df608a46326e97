//! WKT and GeoJSON conversion.

use std::fmt::Write as _;
use std::str::FromStr;

use geojson::{Geometry, Value};
use wkt::Wkt;

use super::{GeometryError, Point, Region, Ring};

type RawPolygon = (Vec<Point>, Vec<Vec<Point>>);

fn wkt_polygon(p: &wkt::types::Polygon<f64>) -> Option<RawPolygon> {
    let mut rings = p
        .0
        .iter()
        .map(|ls| ls.0.iter().map(|c| Point::new(c.x, c.y)).collect::<Vec<_>>());
    let outer = rings.next()?;
    Some((outer, rings.collect()))
}

/// Parses POLYGON, MULTIPOLYGON and their EMPTY forms.
pub fn region_from_wkt(s: &str, area_epsilon: f64) -> Result<Region, GeometryError> {
    let w = Wkt::<f64>::from_str(s.trim()).map_err(|e| GeometryError::Invalid(e.to_string()))?;
    let raw: Vec<RawPolygon> = match &w {
        Wkt::Polygon(p) => wkt_polygon(p).into_iter().collect(),
        Wkt::MultiPolygon(mp) => mp.0.iter().filter_map(wkt_polygon).collect(),
        Wkt::GeometryCollection(gc) if gc.0.is_empty() => Vec::new(),
        other => {
            let name = format!("{other:?}");
            let name = name.split('(').next().unwrap_or("geometry").to_string();
            return Err(GeometryError::Unsupported(name));
        }
    };
    Region::from_polygons(raw, area_epsilon)
}

fn write_ring(out: &mut String, r: &Ring) {
    out.push('(');
    let pts = r.points();
    for (k, p) in pts.iter().chain(pts.first()).enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{} {}", p.x, p.y);
    }
    out.push(')');
}

fn write_polygon(out: &mut String, p: &super::Polygon) {
    out.push('(');
    for (k, r) in p.rings().enumerate() {
        if k > 0 {
            out.push_str(", ");
        }
        write_ring(out, r);
    }
    out.push(')');
}

/// Serializes with shortest round-trip coordinates.
pub fn region_to_wkt(g: &Region) -> String {
    let polys = g.polygons();
    let mut out = String::new();
    match polys.len() {
        0 => out.push_str("POLYGON EMPTY"),
        1 => {
            out.push_str("POLYGON ");
            write_polygon(&mut out, &polys[0]);
        }
        _ => {
            out.push_str("MULTIPOLYGON (");
            for (k, p) in polys.iter().enumerate() {
                if k > 0 {
                    out.push_str(", ");
                }
                write_polygon(&mut out, p);
            }
            out.push(')');
        }
    }
    out
}

fn closed(r: &Ring) -> Vec<Vec<f64>> {
    let pts = r.points();
    pts.iter().chain(pts.first()).map(|p| vec![p.x, p.y]).collect()
}

pub fn region_to_geojson(g: &Region) -> Geometry {
    let polys: Vec<Vec<Vec<Vec<f64>>>> = g
        .polygons()
        .iter()
        .map(|p| p.rings().map(closed).collect())
        .collect();
    match polys.len() {
        1 => Geometry::new(Value::Polygon(polys.into_iter().next().unwrap_or_default())),
        _ => Geometry::new(Value::MultiPolygon(polys)),
    }
}

fn gj_polygon(rings: &[Vec<Vec<f64>>]) -> Result<Option<RawPolygon>, GeometryError> {
    let mut conv = Vec::with_capacity(rings.len());
    for r in rings {
        let mut pts = Vec::with_capacity(r.len());
        for c in r {
            if c.len() < 2 {
                return Err(GeometryError::Invalid("position with fewer than 2 coordinates".into()));
            }
            pts.push(Point::new(c[0], c[1]));
        }
        conv.push(pts);
    }
    let mut it = conv.into_iter();
    Ok(it.next().map(|outer| (outer, it.collect())))
}

pub fn region_from_geojson(g: &Geometry, area_epsilon: f64) -> Result<Region, GeometryError> {
    let raw: Vec<RawPolygon> = match &g.value {
        Value::Polygon(rings) => gj_polygon(rings)?.into_iter().collect(),
        Value::MultiPolygon(ps) => {
            let mut v = Vec::new();
            for p in ps {
                v.extend(gj_polygon(p)?);
            }
            v
        }
        Value::GeometryCollection(gs) if gs.is_empty() => Vec::new(),
        other => return Err(GeometryError::Unsupported(other.type_name().to_string())),
    };
    Region::from_polygons(raw, area_epsilon)
}
