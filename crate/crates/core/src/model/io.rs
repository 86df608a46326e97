//! Instance files: CSV with a WKT geometry column, and GeoJSON feature collections.

use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;
use std::sync::Arc;

use geojson::{Feature, FeatureCollection, GeoJson, JsonObject, JsonValue};

use super::{load_instance, Instance, ModelError, RelationSchema, Row, Schema, Value};
use crate::geometry::{region_from_geojson, region_from_wkt, region_to_geojson, region_to_wkt, GeometryConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Csv,
    GeoJson,
}

impl DataFormat {
    pub fn from_path(p: &Path) -> DataFormat {
        match p.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("json") | Some("geojson") => DataFormat::GeoJson,
            _ => DataFormat::Csv,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            DataFormat::Csv => "csv",
            DataFormat::GeoJson => "geojson",
        }
    }
}

pub fn read_schema(path: &Path) -> Result<Schema, ModelError> {
    let s: Schema = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    s.validate()?;
    Ok(s)
}

/// Reads rows of one relation from CSV; the header names the columns.
pub fn read_csv(rel: &RelationSchema, reader: impl Read) -> Result<Vec<Row>, ModelError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::Headers).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize, ModelError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ModelError::Schema(format!("relation `{}`: missing column `{name}`", rel.name)))
    };
    let attr_cols: Vec<usize> = rel.attributes.iter().map(|a| col(&a.name)).collect::<Result<_, _>>()?;
    let geom_col = col(&rel.geometry)?;
    let mut rows = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let row = n + 1;
        let rec = rec?;
        let mut values = Vec::with_capacity(attr_cols.len());
        for (a, &c) in rel.attributes.iter().zip(&attr_cols) {
            let raw = rec.get(c).unwrap_or("");
            values.push(Value::parse(a.ty, raw).ok_or_else(|| ModelError::Row {
                row,
                message: format!("attribute `{}` expects {}, got `{raw}`", a.name, a.ty),
            })?);
        }
        let wkt = rec.get(geom_col).unwrap_or("");
        let region = region_from_wkt(wkt, 0.0).map_err(|e| ModelError::Row { row, message: e.to_string() })?;
        rows.push(Row { relation: rel.name.clone(), values, region });
    }
    Ok(rows)
}

fn json_to_value(v: &JsonValue) -> Option<Value> {
    match v {
        JsonValue::String(s) => Some(Value::Str(s.clone())),
        JsonValue::Number(n) => n.as_i64().map(Value::Int).or_else(|| n.as_f64().map(Value::Real)),
        JsonValue::Bool(b) => Some(Value::Str(b.to_string())),
        _ => None,
    }
}

fn value_to_json(v: &Value) -> JsonValue {
    match v {
        Value::Int(i) => JsonValue::from(*i),
        Value::Real(r) => JsonValue::from(*r),
        Value::Str(s) => JsonValue::from(s.clone()),
    }
}

/// Reads rows of one relation from a GeoJSON FeatureCollection.
pub fn read_geojson(rel: &RelationSchema, mut reader: impl Read) -> Result<Vec<Row>, ModelError> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let gj: GeoJson = text.parse().map_err(|e| ModelError::GeoJson(Box::new(e)))?;
    let fc = FeatureCollection::try_from(gj).map_err(|e| ModelError::GeoJson(Box::new(e)))?;
    let mut rows = Vec::with_capacity(fc.features.len());
    for (n, f) in fc.features.iter().enumerate() {
        let row = n + 1;
        let props = f.properties.clone().unwrap_or_default();
        let mut values = Vec::with_capacity(rel.arity());
        for a in &rel.attributes {
            let v = props
                .get(&a.name)
                .and_then(json_to_value)
                .and_then(|v| v.coerce(a.ty))
                .ok_or_else(|| ModelError::Row {
                    row,
                    message: format!("attribute `{}` is missing or not a {}", a.name, a.ty),
                })?;
            values.push(v);
        }
        let region = match &f.geometry {
            Some(g) => region_from_geojson(g, 0.0).map_err(|e| ModelError::Row { row, message: e.to_string() })?,
            None => crate::geometry::Region::empty(),
        };
        rows.push(Row { relation: rel.name.clone(), values, region });
    }
    Ok(rows)
}

/// Loads `relation=path` pairs into one instance.
pub fn read_instance_files(
    schema: Arc<Schema>,
    files: &[(String, std::path::PathBuf)],
    cfg: Option<&GeometryConfig>,
) -> Result<Instance, ModelError> {
    let mut rows = Vec::new();
    for (rel, path) in files {
        let r = schema.relation(rel)?;
        let f = BufReader::new(File::open(path)?);
        rows.extend(match DataFormat::from_path(path) {
            DataFormat::Csv => read_csv(r, f)?,
            DataFormat::GeoJson => read_geojson(r, f)?,
        });
    }
    load_instance(schema, rows, cfg)
}

/// Writes one relation as CSV with a trailing WKT geometry column.
pub fn write_csv(d: &Instance, relation: &str, writer: impl Write) -> Result<(), ModelError> {
    let rel = d.schema().relation(relation)?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = rel.attributes.iter().map(|a| a.name.as_str()).collect();
    header.push(&rel.geometry);
    w.write_record(&header)?;
    for t in d.relation_tuples(relation) {
        let mut rec: Vec<String> = t.values.iter().map(|v| v.to_string()).collect();
        rec.push(region_to_wkt(&t.region));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Feature collection of the tuples of `relation` (all tuples when `None`).
/// Each feature carries the thematic attributes plus `tid` and `relation`.
pub fn write_geojson(d: &Instance, relation: Option<&str>) -> Result<FeatureCollection, ModelError> {
    let mut features = Vec::new();
    for t in d.tuples() {
        if relation.is_some_and(|r| r != &*t.relation) {
            continue;
        }
        let rel = d.schema().relation(&t.relation)?;
        let mut props = JsonObject::new();
        for (a, v) in rel.attributes.iter().zip(t.values.iter()) {
            props.insert(a.name.clone(), value_to_json(v));
        }
        props.insert("tid".into(), JsonValue::from(t.tid));
        props.insert("relation".into(), JsonValue::from(t.relation.to_string()));
        features.push(Feature {
            bbox: None,
            geometry: Some(region_to_geojson(&t.region)),
            id: None,
            properties: Some(props),
            foreign_members: None,
        });
    }
    Ok(FeatureCollection { bbox: None, features, foreign_members: None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{geom_equal, Region};
    use crate::model::ValueType;

    fn rel() -> RelationSchema {
        RelationSchema::new("R", &[("id", ValueType::Integer), ("name", ValueType::String), ("w", ValueType::Real)], &["id"])
    }

    fn instance() -> Instance {
        let schema = Arc::new(Schema::new(vec![rel()]).unwrap());
        let rows = vec![
            Row::new("R", vec![Value::Int(1), "a, b".into(), Value::Real(0.1)], Region::rect(0.0, 0.0, 1.0, 1.0)),
            Row::new("R", vec![Value::Int(2), "c".into(), Value::Real(-3.5e-7)], Region::rect(2.0, 0.0, 3.5, 1.0)),
            Row::new("R", vec![Value::Int(3), "d".into(), Value::Real(2.0)], Region::empty()),
        ];
        load_instance(schema, rows, None).unwrap()
    }

    #[test]
    fn csv_round_trip() {
        let d = instance();
        let mut buf = Vec::new();
        write_csv(&d, "R", &mut buf).unwrap();
        let rows = read_csv(&rel(), buf.as_slice()).unwrap();
        let c = d.default_config();
        for (t, r) in d.tuples().iter().zip(&rows) {
            assert_eq!(&*t.values, r.values.as_slice());
            assert!(geom_equal(&t.region, &r.region, &c));
        }
    }

    #[test]
    fn geojson_round_trip() {
        let d = instance();
        let fc = write_geojson(&d, Some("R")).unwrap();
        let text = fc.to_string();
        let rows = read_geojson(&rel(), text.as_bytes()).unwrap();
        for (t, r) in d.tuples().iter().zip(&rows) {
            assert_eq!(&*t.values, r.values.as_slice());
            assert_eq!(*t.region, r.region);
        }
    }

    #[test]
    fn malformed_wkt_reports_row() {
        let text = "id,name,w,geometry\n1,a,0.5,\"POLYGON ((0 0, 1 0, 1 1, 0 0))\"\n2,b,1,\"POLYGON ((0 0, 1\"\n";
        match read_csv(&rel(), text.as_bytes()) {
            Err(ModelError::Row { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
