//! Range and join queries, and consistent answers over minimal repairs.

mod io;

use std::collections::BTreeMap;

use rayon::prelude::*;
use thiserror::Error;

use crate::constraints::DenialSIC;
use crate::geometry::{intersection, topo, GeometryConfig, GridIndex, Predicate, Region};
use crate::model::{Instance, ModelError, Schema, SpatialTuple, Tid, Value};
use crate::repair::{enumerate_repairs, RepairError, RepairOptions, RepairSet};

pub use io::{answers_to_csv, answers_to_geojson, parse_query, read_query};

#[derive(Debug, Error)]
pub enum QueryError {
    #[error("invalid query: {0}")]
    Invalid(String),
    #[error("query predicate {0} is not basic; use repair-based answering")]
    NotBasic(Predicate),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Repair(#[from] RepairError),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `Q(x̄; s) ← R(x̄; s) ∧ T(s, w)`
#[derive(Debug, Clone, PartialEq)]
pub struct RangeQuery {
    pub relation: String,
    pub pred: Predicate,
    pub window: Region,
    pub project: Vec<String>,
}

/// `Q(x̄, ȳ; s1, s2) ← R1(x̄; s1) ∧ R2(ȳ; s2) ∧ T(s1, s2)`
#[derive(Debug, Clone, PartialEq)]
pub struct JoinQuery {
    pub left: String,
    pub right: String,
    pub pred: Predicate,
    pub project: (Vec<String>, Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    Range(RangeQuery),
    Join(JoinQuery),
}

fn check_projection(schema: &Schema, relation: &str, project: &[String]) -> Result<(), QueryError> {
    let rel = schema.relation(relation)?;
    for a in project {
        if rel.attribute_index(a).is_none() {
            return Err(QueryError::Invalid(format!("relation `{relation}` has no attribute `{a}`")));
        }
    }
    for k in &rel.key {
        if !project.contains(k) {
            return Err(QueryError::Invalid(format!("projection on `{relation}` must include key attribute `{k}`")));
        }
    }
    Ok(())
}

impl Query {
    pub fn pred(&self) -> Predicate {
        match self {
            Query::Range(q) => q.pred,
            Query::Join(q) => q.pred,
        }
    }

    /// Basic queries use Intersects or IIntersects.
    pub fn is_basic(&self) -> bool {
        matches!(self.pred(), Predicate::IT | Predicate::II)
    }

    pub fn validate(&self, schema: &Schema) -> Result<(), QueryError> {
        if self.pred() == Predicate::DJ {
            return Err(QueryError::Invalid("Disjoint is not a query predicate".into()));
        }
        match self {
            Query::Range(q) => {
                if q.window.is_empty_set() {
                    return Err(QueryError::Invalid("query window is empty".into()));
                }
                check_projection(schema, &q.relation, &q.project)
            }
            Query::Join(q) => {
                check_projection(schema, &q.left, &q.project.0)?;
                check_projection(schema, &q.right, &q.project.1)
            }
        }
    }
}

/// One answer: projected thematic values, one region per spatial column, and
/// the tids the row came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Answer {
    pub values: Vec<Value>,
    pub regions: Vec<Region>,
    pub tids: Vec<Tid>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AnswerSet {
    pub columns: Vec<String>,
    pub rows: Vec<Answer>,
}

impl AnswerSet {
    pub(crate) fn sorted(columns: Vec<String>, mut rows: Vec<Answer>) -> Self {
        rows.sort_by(|a, b| a.values.cmp(&b.values).then_with(|| a.tids.cmp(&b.tids)));
        Self { columns, rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The thematic part of each row, in order.
    pub fn thematic(&self) -> Vec<Vec<Value>> {
        self.rows.iter().map(|r| r.values.clone()).collect()
    }

    /// Per row and geometry, `δ(g, g′) / area(g)` against the tuple's region in `d`.
    pub fn relative_changes(&self, d: &Instance) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                r.tids
                    .iter()
                    .zip(&r.regions)
                    .map(|(&tid, g)| match d.get(tid) {
                        Some(t) if t.region.area() > 0.0 => crate::model::delta_regions(&t.region, g) / t.region.area(),
                        _ => 0.0,
                    })
                    .collect()
            })
            .collect()
    }

    /// Drops rows whose geometries are all empty.
    pub fn without_empty(mut self) -> Self {
        self.rows.retain(|r| r.regions.iter().any(|g| !g.is_empty_set()));
        self
    }
}

fn live(t: &SpatialTuple, cfg: &GeometryConfig) -> bool {
    t.region.area() > cfg.area_epsilon
}

pub(crate) fn columns(q: &Query) -> Vec<String> {
    match q {
        Query::Range(r) => r.project.iter().map(|a| format!("{}.{a}", r.relation)).collect(),
        Query::Join(j) => j
            .project
            .0
            .iter()
            .map(|a| format!("{}.{a}", j.left))
            .chain(j.project.1.iter().map(|a| format!("{}.{a}", j.right)))
            .collect(),
    }
}

pub fn eval_range(q: &RangeQuery, d: &Instance, cfg: &GeometryConfig) -> Result<AnswerSet, QueryError> {
    let query = Query::Range(q.clone());
    query.validate(d.schema())?;
    let mut rows = Vec::new();
    let wb = q.window.bbox();
    for t in d.relation_tuples(&q.relation) {
        if !live(t, cfg) || !t.region.bbox().intersects(&wb.expand(1e-9 * wb.diagonal())) {
            continue;
        }
        if topo(q.pred, &t.region, &q.window, cfg) {
            rows.push(Answer {
                values: d.project(t, &q.project)?,
                regions: vec![(*t.region).clone()],
                tids: vec![t.tid],
            });
        }
    }
    Ok(AnswerSet::sorted(columns(&query), rows))
}

/// Ordered pairs of distinct tuples satisfying the predicate.
pub fn eval_join(q: &JoinQuery, d: &Instance, cfg: &GeometryConfig) -> Result<AnswerSet, QueryError> {
    let query = Query::Join(q.clone());
    query.validate(d.schema())?;
    let left: Vec<&SpatialTuple> = d.relation_tuples(&q.left).filter(|t| live(t, cfg)).collect();
    let right: Vec<&SpatialTuple> = d.relation_tuples(&q.right).filter(|t| live(t, cfg)).collect();
    let index = GridIndex::new(right.iter().map(|t| t.region.bbox()).collect());
    let per_left: Vec<Result<Vec<Answer>, QueryError>> = left
        .par_iter()
        .map(|t1| {
            let b = t1.region.bbox();
            let mut out = Vec::new();
            for k in index.query(&b.expand(1e-9 * b.diagonal())) {
                let t2 = right[k];
                if t1.tid == t2.tid || !topo(q.pred, &t1.region, &t2.region, cfg) {
                    continue;
                }
                let mut values = d.project(t1, &q.project.0)?;
                values.extend(d.project(t2, &q.project.1)?);
                out.push(Answer {
                    values,
                    regions: vec![(*t1.region).clone(), (*t2.region).clone()],
                    tids: vec![t1.tid, t2.tid],
                });
            }
            Ok(out)
        })
        .collect();
    let mut rows = Vec::new();
    for r in per_left {
        rows.extend(r?);
    }
    Ok(AnswerSet::sorted(columns(&query), rows))
}

pub fn eval(q: &Query, d: &Instance, cfg: &GeometryConfig) -> Result<AnswerSet, QueryError> {
    match q {
        Query::Range(r) => eval_range(r, d, cfg),
        Query::Join(j) => eval_join(j, d, cfg),
    }
}

/// Rows answered in every minimal repair, with geometries intersected per tid.
pub fn cqa_from_repairs(q: &Query, set: &RepairSet, cfg: &GeometryConfig) -> Result<AnswerSet, QueryError> {
    let minimal: Vec<&Instance> = set.minimal().map(|r| &r.instance).collect();
    let answers: Vec<Result<AnswerSet, QueryError>> = minimal.par_iter().map(|d| eval(q, d, cfg)).collect();
    let mut acc: Option<BTreeMap<Vec<Tid>, Answer>> = None;
    for a in answers {
        let here: BTreeMap<Vec<Tid>, Answer> = a?.rows.into_iter().map(|r| (r.tids.clone(), r)).collect();
        acc = Some(match acc {
            None => here,
            Some(prev) => prev
                .into_iter()
                .filter_map(|(k, mut row)| {
                    let other = here.get(&k)?;
                    for (g, h) in row.regions.iter_mut().zip(&other.regions) {
                        *g = intersection(g, h, cfg);
                    }
                    Some((k, row))
                })
                .collect(),
        });
    }
    let rows = acc.map(|m| m.into_values().collect()).unwrap_or_default();
    Ok(AnswerSet::sorted(columns(q), rows))
}

/// Consistent answers by enumerating the minimal repairs.
pub fn cqa_via_repairs(
    q: &Query,
    d: &Instance,
    sics: &[DenialSIC],
    cfg: &GeometryConfig,
    opts: &RepairOptions,
) -> Result<AnswerSet, QueryError> {
    q.validate(d.schema())?;
    let set = enumerate_repairs(d, sics, cfg, opts)?;
    cqa_from_repairs(q, &set, cfg)
}

/// Same thematic rows in the same order, and geometries equal up to `tol` in
/// symmetric-difference area.
pub fn answers_match(a: &AnswerSet, b: &AnswerSet, tol: f64) -> bool {
    a.rows.len() == b.rows.len()
        && a.rows.iter().zip(&b.rows).all(|(x, y)| {
            x.values == y.values
                && x.regions.len() == y.regions.len()
                && x.regions
                    .iter()
                    .zip(&y.regions)
                    .all(|(g, h)| crate::geometry::sym_difference_area(g, h) <= tol)
        })
}
