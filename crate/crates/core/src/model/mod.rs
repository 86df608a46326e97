//! Spatio-relational schemas and instances.
//!
//! Every tuple carries a surrogate id (`tid`) that survives all repair steps,
//! so the correlation between an instance and any instance derived from it is
//! the identity on tids.

mod io;

use std::cmp::Ordering;
use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{self, BBox, GeometryConfig, GeometryError, Region};

pub use io::{
    read_csv, read_geojson, read_instance_files, read_schema, write_csv, write_geojson, DataFormat,
};

pub type Tid = u64;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
    #[error("relation `{relation}`: expected {expected} thematic values, got {got}")]
    Arity { relation: String, expected: usize, got: usize },
    #[error("relation `{relation}`: attribute `{attribute}` expects {expected}, got `{got}`")]
    Type { relation: String, attribute: String, expected: ValueType, got: String },
    #[error("relation `{relation}`: key {key:?} is shared by tuples with different values")]
    KeyViolation { relation: String, key: Vec<String> },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("correlation is not a bijection: {0}")]
    Correlation(String),
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    GeoJson(#[from] Box<geojson::Error>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueType {
    String,
    Integer,
    Real,
}

impl fmt::Display for ValueType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ValueType::String => "string",
            ValueType::Integer => "integer",
            ValueType::Real => "real",
        })
    }
}

/// A thematic value.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Str(String),
}

impl Value {
    pub fn value_type(&self) -> ValueType {
        match self {
            Value::Int(_) => ValueType::Integer,
            Value::Real(_) => ValueType::Real,
            Value::Str(_) => ValueType::String,
        }
    }

    /// Parses text as a value of type `t`.
    pub fn parse(t: ValueType, s: &str) -> Option<Value> {
        match t {
            ValueType::String => Some(Value::Str(s.to_string())),
            ValueType::Integer => s.trim().parse().ok().map(Value::Int),
            ValueType::Real => s.trim().parse().ok().map(Value::Real),
        }
    }

    /// Coerces a value to type `t` where lossless (integers widen to reals).
    pub fn coerce(self, t: ValueType) -> Option<Value> {
        match (self, t) {
            (v @ Value::Int(_), ValueType::Integer)
            | (v @ Value::Real(_), ValueType::Real)
            | (v @ Value::Str(_), ValueType::String) => Some(v),
            (Value::Int(i), ValueType::Real) => Some(Value::Real(i as f64)),
            (Value::Real(r), ValueType::Integer) if r.fract() == 0.0 && r.abs() < 9e15 => {
                Some(Value::Int(r as i64))
            }
            (Value::Str(s), t) => Value::parse(t, &s),
            _ => None,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Int(_) => 0,
            Value::Real(_) => 1,
            Value::Str(_) => 2,
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Value {}

impl PartialOrd for Value {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Value {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Int(a), Value::Int(b)) => a.cmp(b),
            (Value::Real(a), Value::Real(b)) => a.total_cmp(b),
            (Value::Int(a), Value::Real(b)) => (*a as f64).total_cmp(b),
            (Value::Real(a), Value::Int(b)) => a.total_cmp(&(*b as f64)),
            (Value::Str(a), Value::Str(b)) => a.cmp(b),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Value {
    fn hash<H: Hasher>(&self, state: &mut H) {
        match self {
            Value::Int(i) => (*i as f64).to_bits().hash(state),
            Value::Real(r) => r.to_bits().hash(state),
            Value::Str(s) => s.hash(state),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(i) => write!(f, "{i}"),
            Value::Real(r) => write!(f, "{r}"),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<i64> for Value {
    fn from(i: i64) -> Self {
        Value::Int(i)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(rename = "type")]
    pub ty: ValueType,
}

/// One relation: thematic attributes, the key subset and the spatial attribute.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationSchema {
    pub name: String,
    pub attributes: Vec<Attribute>,
    pub key: Vec<String>,
    #[serde(default = "default_geometry")]
    pub geometry: String,
}

fn default_geometry() -> String {
    "geometry".to_string()
}

impl RelationSchema {
    pub fn new(name: &str, attributes: &[(&str, ValueType)], key: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            attributes: attributes
                .iter()
                .map(|(n, t)| Attribute { name: n.to_string(), ty: *t })
                .collect(),
            key: key.iter().map(|k| k.to_string()).collect(),
            geometry: default_geometry(),
        }
    }

    pub fn attribute_index(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    pub fn key_indices(&self) -> Vec<usize> {
        self.key
            .iter()
            .filter_map(|k| self.attribute_index(k))
            .collect()
    }

    pub fn arity(&self) -> usize {
        self.attributes.len()
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.key.is_empty() {
            return Err(ModelError::Schema(format!("relation `{}` has an empty key", self.name)));
        }
        for k in &self.key {
            if self.attribute_index(k).is_none() {
                return Err(ModelError::Schema(format!(
                    "relation `{}`: key attribute `{k}` is not a thematic attribute",
                    self.name
                )));
            }
        }
        let mut seen = std::collections::HashSet::new();
        for a in &self.attributes {
            if !seen.insert(&a.name) || a.name == self.geometry {
                return Err(ModelError::Schema(format!(
                    "relation `{}`: duplicate attribute `{}`",
                    self.name, a.name
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub relations: Vec<RelationSchema>,
}

impl Schema {
    pub fn new(relations: Vec<RelationSchema>) -> Result<Self, ModelError> {
        let s = Self { relations };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let mut names = std::collections::HashSet::new();
        for r in &self.relations {
            if !names.insert(&r.name) {
                return Err(ModelError::Schema(format!("duplicate relation `{}`", r.name)));
            }
            r.validate()?;
        }
        Ok(())
    }

    pub fn relation(&self, name: &str) -> Result<&RelationSchema, ModelError> {
        self.relations
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| ModelError::UnknownRelation(name.to_string()))
    }
}

/// A tuple `R(ā; g)` with its surrogate id.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialTuple {
    pub tid: Tid,
    pub relation: Arc<str>,
    pub values: Arc<[Value]>,
    pub region: Arc<Region>,
}

/// A row before tids are assigned.
#[derive(Debug, Clone)]
pub struct Row {
    pub relation: String,
    pub values: Vec<Value>,
    pub region: Region,
}

impl Row {
    pub fn new(relation: &str, values: Vec<Value>, region: Region) -> Self {
        Self { relation: relation.to_string(), values, region }
    }
}

/// An immutable instance; tuples are kept sorted by tid.
#[derive(Debug, Clone)]
pub struct Instance {
    schema: Arc<Schema>,
    tuples: Vec<SpatialTuple>,
}

impl Instance {
    pub fn empty(schema: Arc<Schema>) -> Self {
        Self { schema, tuples: Vec::new() }
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn tuples(&self) -> &[SpatialTuple] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }

    pub fn get(&self, tid: Tid) -> Option<&SpatialTuple> {
        self.tuples
            .binary_search_by_key(&tid, |t| t.tid)
            .ok()
            .map(|i| &self.tuples[i])
    }

    pub fn relation_tuples<'a>(&'a self, relation: &'a str) -> impl Iterator<Item = &'a SpatialTuple> + 'a {
        self.tuples.iter().filter(move |t| &*t.relation == relation)
    }

    pub fn tids(&self) -> Vec<Tid> {
        self.tuples.iter().map(|t| t.tid).collect()
    }

    /// A copy with the region of `tid` replaced; all other tuples are shared.
    pub fn with_region(&self, tid: Tid, region: Region) -> Option<Instance> {
        let i = self.tuples.binary_search_by_key(&tid, |t| t.tid).ok()?;
        let mut tuples = self.tuples.clone();
        tuples[i].region = Arc::new(region);
        Some(Self { schema: self.schema.clone(), tuples })
    }

    /// Same tuples with regions replaced by `f(tuple)`.
    pub fn map_regions(&self, mut f: impl FnMut(&SpatialTuple) -> Region) -> Instance {
        let tuples = self
            .tuples
            .iter()
            .map(|t| SpatialTuple { region: Arc::new(f(t)), ..t.clone() })
            .collect();
        Self { schema: self.schema.clone(), tuples }
    }

    /// Like `map_regions`, sharing the returned region handles.
    pub fn map_shared(&self, f: impl Fn(&SpatialTuple) -> Arc<Region>) -> Instance {
        let tuples = self.tuples.iter().map(|t| SpatialTuple { region: f(t), ..t.clone() }).collect();
        Self { schema: self.schema.clone(), tuples }
    }

    pub fn bbox(&self) -> BBox {
        self.tuples
            .iter()
            .fold(BBox::empty(), |b, t| b.merge(&t.region.bbox()))
    }

    /// Default buffer distance and area tolerance for this instance's extent.
    pub fn default_config(&self) -> GeometryConfig {
        GeometryConfig::for_extent(&self.bbox())
    }

    pub fn total_area(&self) -> f64 {
        self.tuples.iter().map(|t| t.region.area()).sum()
    }

    /// Projects the named attributes of a tuple.
    pub fn project(&self, t: &SpatialTuple, attrs: &[String]) -> Result<Vec<Value>, ModelError> {
        let rel = self.schema.relation(&t.relation)?;
        attrs
            .iter()
            .map(|a| {
                rel.attribute_index(a)
                    .map(|i| t.values[i].clone())
                    .ok_or_else(|| ModelError::Schema(format!("relation `{}` has no attribute `{a}`", rel.name)))
            })
            .collect()
    }

    pub fn key_of(&self, t: &SpatialTuple) -> Vec<Value> {
        match self.schema.relation(&t.relation) {
            Ok(rel) => rel.key_indices().into_iter().map(|i| t.values[i].clone()).collect(),
            Err(_) => Vec::new(),
        }
    }
}

/// Builds an instance with fresh tids `1..=n`, enforcing arity, types and keys.
///
/// Identical duplicate rows collapse into one tuple; rows sharing a key but
/// differing elsewhere are rejected.
pub fn load_instance(schema: Arc<Schema>, rows: Vec<Row>, cfg: Option<&GeometryConfig>) -> Result<Instance, ModelError> {
    let mut checked = Vec::with_capacity(rows.len());
    for row in rows {
        let rel = schema.relation(&row.relation)?;
        if row.values.len() != rel.arity() {
            return Err(ModelError::Arity {
                relation: rel.name.clone(),
                expected: rel.arity(),
                got: row.values.len(),
            });
        }
        let mut vals = Vec::with_capacity(row.values.len());
        for (v, a) in row.values.into_iter().zip(&rel.attributes) {
            let shown = v.to_string();
            vals.push(v.coerce(a.ty).ok_or_else(|| ModelError::Type {
                relation: rel.name.clone(),
                attribute: a.name.clone(),
                expected: a.ty,
                got: shown,
            })?);
        }
        checked.push((rel, vals, row.region));
    }
    let cfg = match cfg {
        Some(c) => *c,
        None => GeometryConfig::for_extent(
            &checked.iter().fold(BBox::empty(), |b, r| b.merge(&r.2.bbox())),
        ),
    };
    let mut by_key: HashMap<(String, Vec<Value>), usize> = HashMap::new();
    let mut tuples: Vec<SpatialTuple> = Vec::new();
    let mut names: HashMap<String, Arc<str>> = HashMap::new();
    for (rel, vals, region) in checked {
        let key: Vec<Value> = rel.key_indices().into_iter().map(|i| vals[i].clone()).collect();
        if let Some(&k) = by_key.get(&(rel.name.clone(), key.clone())) {
            let prev = &tuples[k];
            if *prev.values == *vals && geometry::geom_equal(&prev.region, &region, &cfg) {
                continue;
            }
            return Err(ModelError::KeyViolation {
                relation: rel.name.clone(),
                key: key.iter().map(|v| v.to_string()).collect(),
            });
        }
        by_key.insert((rel.name.clone(), key), tuples.len());
        let name = names
            .entry(rel.name.clone())
            .or_insert_with(|| Arc::from(rel.name.as_str()))
            .clone();
        tuples.push(SpatialTuple {
            tid: tuples.len() as Tid + 1,
            relation: name,
            values: vals.into(),
            region: Arc::new(region),
        });
    }
    Ok(Instance { schema, tuples })
}

/// Area of the symmetric difference.
pub fn delta_regions(g1: &Region, g2: &Region) -> f64 {
    geometry::sym_difference_area(g1, g2)
}

/// A bijection between the tuples of two instances.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Correlation {
    map: BTreeMap<Tid, Tid>,
}

impl Correlation {
    pub fn identity(d: &Instance) -> Self {
        Self { map: d.tuples.iter().map(|t| (t.tid, t.tid)).collect() }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Tid, Tid)>) -> Self {
        Self { map: pairs.into_iter().collect() }
    }

    pub fn image(&self, tid: Tid) -> Option<Tid> {
        self.map.get(&tid).copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (Tid, Tid)> + '_ {
        self.map.iter().map(|(a, b)| (*a, *b))
    }

    /// Checks bijectivity and that relation names and thematic values are kept.
    pub fn check(&self, d: &Instance, d2: &Instance) -> Result<(), ModelError> {
        if self.map.len() != d.len() || d.len() != d2.len() {
            return Err(ModelError::Correlation(format!(
                "{} pairs between instances of {} and {} tuples",
                self.map.len(),
                d.len(),
                d2.len()
            )));
        }
        let mut hit = std::collections::HashSet::new();
        for t in d.tuples() {
            let Some(u) = self.image(t.tid) else {
                return Err(ModelError::Correlation(format!("tid {} has no image", t.tid)));
            };
            let Some(t2) = d2.get(u) else {
                return Err(ModelError::Correlation(format!("image {u} is not in the target")));
            };
            if !hit.insert(u) {
                return Err(ModelError::Correlation(format!("image {u} is hit twice")));
            }
            if t.relation != t2.relation || t.values != t2.values {
                return Err(ModelError::Correlation(format!(
                    "tid {} changes relation or thematic values",
                    t.tid
                )));
            }
        }
        Ok(())
    }
}

/// Sum of per-tuple symmetric-difference areas under the correlation.
pub fn delta_instances(d: &Instance, d2: &Instance, f: &Correlation) -> Result<f64, ModelError> {
    f.check(d, d2)?;
    Ok(d.tuples()
        .iter()
        .map(|t| {
            let u = d2.get(f.image(t.tid).expect("checked")).expect("checked");
            if Arc::ptr_eq(&t.region, &u.region) {
                0.0
            } else {
                delta_regions(&t.region, &u.region)
            }
        })
        .sum())
}
