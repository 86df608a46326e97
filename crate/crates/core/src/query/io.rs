//! Query files and answer export.

use std::io::Write;
use std::path::Path;

use geojson::{Feature, FeatureCollection, Geometry, JsonObject, JsonValue};
use serde::Deserialize;

use super::{AnswerSet, JoinQuery, Query, QueryError, RangeQuery};
use crate::geometry::{region_from_wkt, region_to_geojson, region_to_wkt, Predicate};
use crate::model::{Schema, Value};

#[derive(Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawQuery {
    Range {
        relation: String,
        pred: String,
        window: String,
        #[serde(default)]
        project: Option<Vec<String>>,
    },
    Join {
        relations: [String; 2],
        pred: String,
        #[serde(default)]
        project: Option<[Vec<String>; 2]>,
    },
}

fn all_attributes(schema: &Schema, relation: &str) -> Result<Vec<String>, QueryError> {
    Ok(schema.relation(relation)?.attributes.iter().map(|a| a.name.clone()).collect())
}

/// Parses a JSON query; omitted projections default to every thematic attribute.
pub fn parse_query(text: &str, schema: &Schema) -> Result<Query, QueryError> {
    let raw: RawQuery = serde_json::from_str(text)?;
    let q = match raw {
        RawQuery::Range { relation, pred, window, project } => {
            let project = match project {
                Some(p) => p,
                None => all_attributes(schema, &relation)?,
            };
            Query::Range(RangeQuery {
                pred: pred.parse::<Predicate>()?,
                window: region_from_wkt(&window, 0.0)?,
                relation,
                project,
            })
        }
        RawQuery::Join { relations: [left, right], pred, project } => {
            let project = match project {
                Some([a, b]) => (a, b),
                None => (all_attributes(schema, &left)?, all_attributes(schema, &right)?),
            };
            Query::Join(JoinQuery { pred: pred.parse::<Predicate>()?, left, right, project })
        }
    };
    q.validate(schema)?;
    Ok(q)
}

pub fn read_query(path: &Path, schema: &Schema) -> Result<Query, QueryError> {
    parse_query(&std::fs::read_to_string(path)?, schema)
}

fn value_json(v: &Value) -> JsonValue {
    match v {
        Value::Int(i) => JsonValue::from(*i),
        Value::Real(r) => JsonValue::from(*r),
        Value::Str(s) => JsonValue::from(s.clone()),
    }
}

/// Range answers carry their region; join answers a collection of both regions.
/// `explain` adds a `rel_change` property per row.
pub fn answers_to_geojson(a: &AnswerSet, explain: Option<&[Vec<f64>]>) -> FeatureCollection {
    let features = a
        .rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut props = JsonObject::new();
            for (c, v) in a.columns.iter().zip(&r.values) {
                props.insert(c.clone(), value_json(v));
            }
            props.insert("tids".into(), JsonValue::from(r.tids.clone()));
            if let Some(e) = explain {
                props.insert("rel_change".into(), JsonValue::from(e[i].clone()));
            }
            let geometry = if r.regions.len() == 1 {
                region_to_geojson(&r.regions[0])
            } else {
                Geometry::new(geojson::Value::GeometryCollection(r.regions.iter().map(region_to_geojson).collect()))
            };
            Feature { bbox: None, geometry: Some(geometry), id: None, properties: Some(props), foreign_members: None }
        })
        .collect();
    FeatureCollection { bbox: None, features, foreign_members: None }
}

/// `explain` appends one `rel_change` column per geometry.
pub fn answers_to_csv(a: &AnswerSet, explain: Option<&[Vec<f64>]>, writer: impl Write) -> Result<(), QueryError> {
    let mut w = csv::Writer::from_writer(writer);
    let width = a.rows.first().map_or(1, |r| r.regions.len());
    let mut header = a.columns.clone();
    header.push("geometry".into());
    if width == 2 {
        header.push("geometry2".into());
    }
    if explain.is_some() {
        header.push("rel_change".into());
        if width == 2 {
            header.push("rel_change2".into());
        }
    }
    w.write_record(&header).map_err(|e| QueryError::Io(e.into()))?;
    for (i, r) in a.rows.iter().enumerate() {
        let mut rec: Vec<String> = r.values.iter().map(|v| v.to_string()).collect();
        rec.extend(r.regions.iter().map(region_to_wkt));
        if let Some(e) = explain {
            rec.extend(e[i].iter().map(|x| x.to_string()));
        }
        w.write_record(&rec).map_err(|e| QueryError::Io(e.into()))?;
    }
    w.flush()?;
    Ok(())
}
