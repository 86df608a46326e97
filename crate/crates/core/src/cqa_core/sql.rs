//! SQL view text for the core of one relation, in PostGIS-style function names.

use crate::constraints::CoreSIC;
use crate::geometry::Predicate;
use crate::model::RelationSchema;

#[derive(Debug, Clone, PartialEq)]
pub struct SqlOptions {
    /// Text substituted for the buffer distance, e.g. `d` or `0.001`.
    pub distance: String,
    /// Carry every thematic attribute instead of only the key.
    pub all_attributes: bool,
    /// Overrides the default `Core_<Predicate>` view name.
    pub view_name: Option<String>,
}

impl Default for SqlOptions {
    fn default() -> Self {
        Self { distance: "d".into(), all_attributes: false, view_name: None }
    }
}

fn view_suffix(p: Predicate) -> &'static str {
    match p {
        Predicate::IT => "Intersects",
        Predicate::II => "IIntersects",
        _ => "Equal",
    }
}

fn key_ne(rel: &RelationSchema) -> String {
    let col = |alias: &str| -> Vec<String> { rel.key.iter().map(|k| format!("{alias}.{k}")).collect() };
    let (a, b) = (col("r1"), col("r2"));
    if a.len() == 1 {
        format!("{} <> {}", a[0], b[0])
    } else {
        format!("({}) <> ({})", a.join(", "), b.join(", "))
    }
}

/// One `CREATE VIEW` statement computing the core of `rel` under `sic`.
pub fn emit_core_sql(sic: &CoreSIC, rel: &RelationSchema, opts: &SqlOptions) -> String {
    let g = &rel.geometry;
    let r = &rel.name;
    let attrs: Vec<&str> = if opts.all_attributes {
        rel.attributes.iter().map(|a| a.name.as_str()).collect()
    } else {
        rel.key.iter().map(String::as_str).collect()
    };
    let select_attrs: Vec<String> = attrs.iter().map(|a| format!("r1.{a} AS {a}")).collect();
    let select_attrs = select_attrs.join(", ");
    let mut group: Vec<String> = attrs.iter().map(|a| format!("r1.{a}")).collect();
    group.push(format!("r1.{g}"));
    let group = group.join(", ");
    let r2_cols: Vec<String> = rel.key.iter().map(|k| format!("r2.{k}")).chain([format!("r2.{g}")]).collect();
    let r2_cols = r2_cols.join(", ");
    let ne = key_ne(rel);
    let name = opts.view_name.clone().unwrap_or_else(|| format!("Core_{}", view_suffix(sic.pred)));
    let conflict = match sic.pred {
        Predicate::IT => format!("Intersects(r1.{g}, r2.{g})"),
        Predicate::II => format!("Intersects(r1.{g}, r2.{g}) AND NOT Touches(r1.{g}, r2.{g})"),
        _ => format!("Equals(r1.{g}, r2.{g})"),
    };
    let keep = format!(
        "SELECT {select_attrs}, r1.{g} AS {g}\n\
         FROM {r} AS r1\n\
         WHERE NOT EXISTS (SELECT {r2_cols}\n\
         \x20   FROM {r} AS r2\n\
         \x20   WHERE {ne} AND {conflict})"
    );
    let shrunk = match sic.pred {
        Predicate::IT => format!("difference(r1.{g}, Buffer(geomunion(r2.{g}), {}))", opts.distance),
        Predicate::II => format!("difference(r1.{g}, geomunion(r2.{g}))"),
        _ => return format!("CREATE VIEW {name} AS (\n{keep});\n"),
    };
    format!(
        "CREATE VIEW {name} AS (\n\
         SELECT {select_attrs}, {shrunk} AS {g}\n\
         FROM {r} AS r1, {r} AS r2\n\
         WHERE {ne} AND {conflict}\n\
         GROUP BY {group}\n\
         UNION\n\
         {keep});\n"
    )
}

/// One view per constraint; names get the relation appended when several
/// relations are involved.
pub fn emit_core_sql_all(sics: &[(CoreSIC, RelationSchema)], opts: &SqlOptions) -> String {
    let many = sics.len() > 1;
    sics.iter()
        .map(|(s, rel)| {
            let mut o = opts.clone();
            if many && o.view_name.is_none() {
                o.view_name = Some(format!("Core_{}_{}", view_suffix(s.pred), rel.name));
            }
            emit_core_sql(s, rel, &o)
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ValueType;

    fn r() -> RelationSchema {
        RelationSchema::new("R", &[("id", ValueType::Integer)], &["id"])
    }

    const INTERSECTS: &str = "CREATE VIEW Core_Intersects AS (
SELECT r1.id AS id, difference(r1.geometry, Buffer(geomunion(r2.geometry), d)) AS geometry
FROM R AS r1, R AS r2
WHERE r1.id <> r2.id AND Intersects(r1.geometry, r2.geometry)
GROUP BY r1.id, r1.geometry
UNION
SELECT r1.id AS id, r1.geometry AS geometry
FROM R AS r1
WHERE NOT EXISTS (SELECT r2.id, r2.geometry
    FROM R AS r2
    WHERE r1.id <> r2.id AND Intersects(r1.geometry, r2.geometry)));
";

    const IINTERSECTS: &str = "CREATE VIEW Core_IIntersects AS (
SELECT r1.id AS id, difference(r1.geometry, geomunion(r2.geometry)) AS geometry
FROM R AS r1, R AS r2
WHERE r1.id <> r2.id AND Intersects(r1.geometry, r2.geometry) AND NOT Touches(r1.geometry, r2.geometry)
GROUP BY r1.id, r1.geometry
UNION
SELECT r1.id AS id, r1.geometry AS geometry
FROM R AS r1
WHERE NOT EXISTS (SELECT r2.id, r2.geometry
    FROM R AS r2
    WHERE r1.id <> r2.id AND Intersects(r1.geometry, r2.geometry) AND NOT Touches(r1.geometry, r2.geometry)));
";

    const EQUAL: &str = "CREATE VIEW Core_Equal AS (
SELECT r1.id AS id, r1.geometry AS geometry
FROM R AS r1
WHERE NOT EXISTS (SELECT r2.id, r2.geometry
    FROM R AS r2
    WHERE r1.id <> r2.id AND Equals(r1.geometry, r2.geometry)));
";

    #[test]
    fn golden_views() {
        let o = SqlOptions::default();
        let sql = |p| emit_core_sql(&CoreSIC::new(0, "R", p).unwrap(), &r(), &o);
        assert_eq!(sql(Predicate::IT), INTERSECTS);
        assert_eq!(sql(Predicate::II), IINTERSECTS);
        assert_eq!(sql(Predicate::EQ), EQUAL);
        assert!(sql(Predicate::IT).contains("difference(r1.geometry, Buffer(geomunion(r2.geometry), d))"));
        assert!(!sql(Predicate::EQ).contains("UNION"));
    }

    #[test]
    fn attributes_and_composite_keys() {
        let rel = RelationSchema::new(
            "LandP",
            &[("idl", ValueType::String), ("name", ValueType::String), ("owner", ValueType::String)],
            &["idl"],
        );
        let o = SqlOptions { all_attributes: true, view_name: Some("Core".into()), ..Default::default() };
        let s = emit_core_sql(&CoreSIC::new(0, "LandP", Predicate::II).unwrap(), &rel, &o);
        assert!(s.starts_with("CREATE VIEW Core AS (\nSELECT r1.idl AS idl, r1.name AS name, r1.owner AS owner,"));
        assert!(s.contains("GROUP BY r1.idl, r1.name, r1.owner, r1.geometry\n"));
        let rel = RelationSchema::new("S", &[("a", ValueType::Integer), ("b", ValueType::Integer)], &["a", "b"]);
        let o = SqlOptions { distance: "0.5".into(), ..Default::default() };
        let s = emit_core_sql(&CoreSIC::new(0, "S", Predicate::IT).unwrap(), &rel, &o);
        assert!(s.contains("WHERE (r1.a, r1.b) <> (r2.a, r2.b) AND"));
        assert!(s.contains("Buffer(geomunion(r2.geometry), 0.5)"));
    }
}
