//! Denial constraints over topological predicates.
//!
//! A [`DenialSIC`] forbids any combination of tuples that satisfies its
//! relational atoms, its thematic comparisons and all of its topological atoms.
//! [`CoreSIC`] is the single-relation shape
//! `¬(R(x̄; s1) ∧ R(ȳ; s2) ∧ key(x̄) ≠ key(ȳ) ∧ T(s1, s2))` with T in {II, IT, EQ}.

mod parse;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{topo, GeometryConfig, GridIndex, Predicate, Region};
use crate::model::{Instance, ModelError, Schema, SpatialTuple, Tid, Value};

pub use parse::{parse_sic_json, parse_sics, read_sics};

#[derive(Debug, Error)]
pub enum ConstraintError {
    #[error("constraint {sic}: {message}")]
    Invalid { sic: String, message: String },
    #[error("cannot parse constraint: {0}")]
    Parse(String),
    #[error("constraint {0} is not of the core shape")]
    NotCore(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Term {
    Var(String),
    Const(Value),
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(v) => f.write_str(v),
            Term::Const(Value::Str(s)) => write!(f, "'{s}'"),
            Term::Const(v) => write!(f, "{v}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    fn symbol(self) -> &'static str {
        match self {
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// A comparison between terms or, for `=` and `!=`, between term tuples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub lhs: Vec<Term>,
    pub op: CmpOp,
    pub rhs: Vec<Term>,
}

impl Comparison {
    fn eval(&self, env: &HashMap<&str, &Value>) -> Option<bool> {
        let get = |t: &Term| -> Option<Value> {
            match t {
                Term::Var(v) => env.get(v.as_str()).map(|v| (*v).clone()),
                Term::Const(c) => Some(c.clone()),
            }
        };
        let l: Option<Vec<Value>> = self.lhs.iter().map(get).collect();
        let r: Option<Vec<Value>> = self.rhs.iter().map(get).collect();
        let (l, r) = (l?, r?);
        Some(match self.op {
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Gt => l > r,
            CmpOp::Ge => l >= r,
        })
    }

    fn vars(&self) -> impl Iterator<Item = &str> {
        self.lhs.iter().chain(&self.rhs).filter_map(|t| match t {
            Term::Var(v) => Some(v.as_str()),
            Term::Const(_) => None,
        })
    }
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = |ts: &[Term]| {
            let s: Vec<String> = ts.iter().map(|t| t.to_string()).collect();
            if ts.len() == 1 {
                s[0].clone()
            } else {
                format!("({})", s.join(", "))
            }
        };
        write!(f, "{} {} {}", side(&self.lhs), self.op.symbol(), side(&self.rhs))
    }
}

/// `R(x̄; s)`; `vars` holds one variable per thematic attribute, `_` is a wildcard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelAtom {
    pub relation: String,
    pub vars: Vec<String>,
    pub spatial: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopoAtom {
    pub pred: Predicate,
    pub left: String,
    pub right: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenialSIC {
    /// Position in the constraint set; violations are ordered by it.
    pub id: usize,
    pub label: String,
    pub atoms: Vec<RelAtom>,
    pub condition: Vec<Comparison>,
    pub topo: Vec<TopoAtom>,
}

impl fmt::Display for DenialSIC {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self
            .atoms
            .iter()
            .map(|a| format!("{}({}; {})", a.relation, a.vars.join(", "), a.spatial))
            .collect();
        parts.extend(self.condition.iter().map(|c| c.to_string()));
        parts.extend(self.topo.iter().map(|t| format!("{}({}, {})", t.pred, t.left, t.right)));
        write!(f, "{}: not({})", self.label, parts.join(" and "))
    }
}

fn is_wild(v: &str) -> bool {
    v == "_"
}

impl DenialSIC {
    fn invalid(&self, message: impl Into<String>) -> ConstraintError {
        ConstraintError::Invalid { sic: self.label.clone(), message: message.into() }
    }

    /// Checks the constraint against a schema.
    pub fn validate(&self, schema: &Schema) -> Result<(), ConstraintError> {
        if self.atoms.is_empty() {
            return Err(self.invalid("no relational atoms"));
        }
        if self.topo.is_empty() {
            return Err(self.invalid("no topological atoms"));
        }
        let mut thematic = HashSet::new();
        let mut spatial = HashSet::new();
        for a in &self.atoms {
            let rel = schema.relation(&a.relation)?;
            if a.vars.len() != rel.arity() {
                return Err(self.invalid(format!(
                    "atom over `{}` has {} variables, relation has {} thematic attributes",
                    a.relation,
                    a.vars.len(),
                    rel.arity()
                )));
            }
            thematic.extend(a.vars.iter().filter(|v| !is_wild(v)).map(String::as_str));
            spatial.insert(a.spatial.as_str());
        }
        for t in &self.topo {
            if t.pred == Predicate::DJ {
                return Err(self.invalid("Disjoint is not allowed in constraints"));
            }
            for v in [&t.left, &t.right] {
                if !spatial.contains(v.as_str()) {
                    return Err(self.invalid(format!("spatial variable `{v}` is not bound by an atom")));
                }
            }
        }
        for c in &self.condition {
            if matches!(c.op, CmpOp::Lt | CmpOp::Le | CmpOp::Gt | CmpOp::Ge) && (c.lhs.len() != 1 || c.rhs.len() != 1) {
                return Err(self.invalid("ordering comparisons take single terms"));
            }
            if c.lhs.len() != c.rhs.len() {
                return Err(self.invalid("comparison sides differ in length"));
            }
            for v in c.vars() {
                if !thematic.contains(v) {
                    return Err(self.invalid(format!("variable `{v}` is not bound by an atom")));
                }
            }
        }
        Ok(())
    }

    /// Recognizes the core shape.
    pub fn as_core(&self, schema: &Schema) -> Option<CoreSIC> {
        if self.atoms.len() != 2 || self.topo.len() != 1 || self.condition.len() != 1 {
            return None;
        }
        let (a, b) = (&self.atoms[0], &self.atoms[1]);
        if a.relation != b.relation || a.spatial == b.spatial {
            return None;
        }
        let t = &self.topo[0];
        if !matches!(t.pred, Predicate::II | Predicate::IT | Predicate::EQ) {
            return None;
        }
        let pair = (t.left.as_str(), t.right.as_str());
        if pair != (a.spatial.as_str(), b.spatial.as_str()) && pair != (b.spatial.as_str(), a.spatial.as_str()) {
            return None;
        }
        let mut seen = HashSet::new();
        for v in a.vars.iter().chain(&b.vars).filter(|v| !is_wild(v)) {
            if !seen.insert(v) {
                return None;
            }
        }
        let rel = schema.relation(&a.relation).ok()?;
        let key = rel.key_indices();
        let ka: Vec<Term> = key.iter().map(|&i| Term::Var(a.vars[i].clone())).collect();
        let kb: Vec<Term> = key.iter().map(|&i| Term::Var(b.vars[i].clone())).collect();
        if key.iter().any(|&i| is_wild(&a.vars[i]) || is_wild(&b.vars[i])) {
            return None;
        }
        let c = &self.condition[0];
        let same = |l: &[Term], r: &[Term]| c.lhs == l && c.rhs == r;
        if c.op != CmpOp::Ne || !(same(&ka, &kb) || same(&kb, &ka)) {
            return None;
        }
        Some(CoreSIC { id: self.id, label: self.label.clone(), relation: a.relation.clone(), pred: t.pred })
    }
}

/// The tractable single-relation constraint shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoreSIC {
    pub id: usize,
    pub label: String,
    pub relation: String,
    pub pred: Predicate,
}

impl CoreSIC {
    pub fn new(id: usize, relation: &str, pred: Predicate) -> Result<Self, ConstraintError> {
        if !matches!(pred, Predicate::II | Predicate::IT | Predicate::EQ) {
            return Err(ConstraintError::NotCore(format!("{relation}/{pred}")));
        }
        Ok(Self { id, label: format!("{relation}_{}", pred.name()), relation: relation.to_string(), pred })
    }

    /// Expands into the general denial form.
    pub fn to_denial(&self, schema: &Schema) -> Result<DenialSIC, ConstraintError> {
        let rel = schema.relation(&self.relation)?;
        let vars = |suffix: &str| -> Vec<String> {
            rel.attributes.iter().map(|a| format!("{}{suffix}", a.name)).collect()
        };
        let (va, vb) = (vars("_1"), vars("_2"));
        let key = rel.key_indices();
        let cond = Comparison {
            lhs: key.iter().map(|&i| Term::Var(va[i].clone())).collect(),
            op: CmpOp::Ne,
            rhs: key.iter().map(|&i| Term::Var(vb[i].clone())).collect(),
        };
        Ok(DenialSIC {
            id: self.id,
            label: self.label.clone(),
            atoms: vec![
                RelAtom { relation: self.relation.clone(), vars: va, spatial: "s1".into() },
                RelAtom { relation: self.relation.clone(), vars: vb, spatial: "s2".into() },
            ],
            condition: vec![cond],
            topo: vec![TopoAtom { pred: self.pred, left: "s1".into(), right: "s2".into() }],
        })
    }

    fn strength(&self) -> u8 {
        match self.pred {
            Predicate::IT => 0,
            Predicate::II => 1,
            _ => 2,
        }
    }
}

/// Keeps, per relation, only the weakest predicate (IT weaker than II weaker than EQ).
pub fn normalize_core_sics(sics: &[CoreSIC]) -> Vec<CoreSIC> {
    let mut best: BTreeMap<&str, &CoreSIC> = BTreeMap::new();
    for s in sics {
        match best.get(s.relation.as_str()) {
            Some(b) if b.strength() <= s.strength() => {}
            _ => {
                best.insert(&s.relation, s);
            }
        }
    }
    let mut out: Vec<CoreSIC> = best.into_values().cloned().collect();
    out.sort_by_key(|s| s.id);
    out
}

/// A ground witness: one tid per relational atom.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub sic: usize,
    pub tids: Vec<Tid>,
}

impl Violation {
    /// Sorted participating tids; together with the SIC id this identifies a witness.
    pub fn tid_set(&self) -> Vec<Tid> {
        let mut v = self.tids.clone();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn order_key(&self) -> (Vec<Tid>, usize, Vec<Tid>) {
        (self.tid_set(), self.sic, self.tids.clone())
    }
}

fn live(t: &SpatialTuple, cfg: &GeometryConfig) -> bool {
    t.region.area() > cfg.area_epsilon
}

struct Search<'a> {
    sic: &'a DenialSIC,
    cfg: &'a GeometryConfig,
    cands: Vec<Vec<&'a SpatialTuple>>,
    index: Vec<GridIndex>,
    /// For atom i, earlier atoms whose spatial variable shares a topological atom.
    links: Vec<Vec<usize>>,
}

impl<'a> Search<'a> {
    fn new(d: &'a Instance, sic: &'a DenialSIC, cfg: &'a GeometryConfig) -> Self {
        let cands: Vec<Vec<&SpatialTuple>> = sic
            .atoms
            .iter()
            .map(|a| d.relation_tuples(&a.relation).filter(|t| live(t, cfg)).collect())
            .collect();
        let index = cands
            .iter()
            .map(|c| GridIndex::new(c.iter().map(|t| t.region.bbox()).collect()))
            .collect();
        let links = (0..sic.atoms.len())
            .map(|i| {
                (0..i)
                    .filter(|&j| {
                        let (si, sj) = (&sic.atoms[i].spatial, &sic.atoms[j].spatial);
                        si == sj
                            || sic.topo.iter().any(|t| {
                                (&t.left == si && &t.right == sj) || (&t.left == sj && &t.right == si)
                            })
                    })
                    .collect()
            })
            .collect();
        Self { sic, cfg, cands, index, links }
    }

    fn candidates(&self, i: usize, bound: &[&'a SpatialTuple]) -> Vec<&'a SpatialTuple> {
        let Some(&j) = self.links[i].first() else {
            return self.cands[i].clone();
        };
        let b = bound[j].region.bbox();
        let q = b.expand(1e-9 * b.diagonal());
        self.index[i].query(&q).into_iter().map(|k| self.cands[i][k]).collect()
    }

    fn consistent(&self, bound: &[&SpatialTuple]) -> bool {
        let n = bound.len();
        let mut env: HashMap<&str, &Value> = HashMap::new();
        let mut regions: HashMap<&str, &Region> = HashMap::new();
        for (a, t) in self.sic.atoms[..n].iter().zip(bound) {
            for (v, val) in a.vars.iter().zip(t.values.iter()) {
                if is_wild(v) {
                    continue;
                }
                if let Some(prev) = env.insert(v, val) {
                    if prev != val {
                        return false;
                    }
                }
            }
            if let Some(prev) = regions.insert(&a.spatial, &t.region) {
                if !std::ptr::eq(prev, &*t.region) && prev != &*t.region {
                    return false;
                }
            }
        }
        // Only test what the newest atom completes.
        let newest = &self.sic.atoms[n - 1];
        for c in &self.sic.condition {
            let touches_new = c.vars().any(|v| newest.vars.iter().any(|w| w == v));
            if !touches_new && n > 1 {
                continue;
            }
            if let Some(false) = c.eval(&env) {
                return false;
            }
        }
        for t in &self.sic.topo {
            if t.left != newest.spatial && t.right != newest.spatial {
                continue;
            }
            if let (Some(l), Some(r)) = (regions.get(t.left.as_str()), regions.get(t.right.as_str())) {
                if !topo(t.pred, l, r, self.cfg) {
                    return false;
                }
            }
        }
        true
    }

    fn extend(&self, bound: &mut Vec<&'a SpatialTuple>, out: &mut Vec<Violation>) {
        let i = bound.len();
        if i == self.sic.atoms.len() {
            out.push(Violation { sic: self.sic.id, tids: bound.iter().map(|t| t.tid).collect() });
            return;
        }
        for t in self.candidates(i, bound) {
            bound.push(t);
            if self.consistent(bound) {
                self.extend(bound, out);
            }
            bound.pop();
        }
    }
}

/// All witnesses of `sic` in `d`, one per (tid set, constraint), in canonical order.
pub fn find_violations(d: &Instance, sic: &DenialSIC, cfg: &GeometryConfig) -> Result<Vec<Violation>, ConstraintError> {
    sic.validate(d.schema())?;
    let s = Search::new(d, sic, cfg);
    let found: Vec<Vec<Violation>> = s.cands[0]
        .par_iter()
        .map(|t| {
            let mut out = Vec::new();
            let mut bound = vec![*t];
            if s.consistent(&bound) {
                s.extend(&mut bound, &mut out);
            }
            out
        })
        .collect();
    Ok(dedup(found.into_iter().flatten().collect()))
}

fn dedup(mut vs: Vec<Violation>) -> Vec<Violation> {
    vs.sort_by_key(|v| v.order_key());
    let mut seen = HashSet::new();
    vs.retain(|v| seen.insert((v.tid_set(), v.sic)));
    vs
}

/// Violations of every constraint, ordered by (tid set, constraint id).
pub fn find_all_violations(d: &Instance, sics: &[DenialSIC], cfg: &GeometryConfig) -> Result<Vec<Violation>, ConstraintError> {
    let mut all = Vec::new();
    for s in sics {
        all.extend(find_violations(d, s, cfg)?);
    }
    all.sort_by_key(|v| v.order_key());
    Ok(all)
}

pub fn is_consistent(d: &Instance, sics: &[DenialSIC], cfg: &GeometryConfig) -> Result<bool, ConstraintError> {
    for s in sics {
        if !find_violations(d, s, cfg)?.is_empty() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Every constraint in core shape, or `None` if any is general.
pub fn as_core_sics(sics: &[DenialSIC], schema: &Schema) -> Option<Vec<CoreSIC>> {
    sics.iter().map(|s| s.as_core(schema)).collect()
}

/// Reference evaluation by plain nested loops over all tuple combinations.
pub fn find_violations_naive(d: &Instance, sic: &DenialSIC, cfg: &GeometryConfig) -> Result<Vec<Violation>, ConstraintError> {
    sic.validate(d.schema())?;
    let per_atom: Vec<Vec<&SpatialTuple>> = sic
        .atoms
        .iter()
        .map(|a| d.relation_tuples(&a.relation).filter(|t| live(t, cfg)).collect())
        .collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; per_atom.len()];
    if per_atom.iter().any(|c| c.is_empty()) {
        return Ok(out);
    }
    loop {
        let tuples: Vec<&SpatialTuple> = idx.iter().zip(&per_atom).map(|(&i, c)| c[i]).collect();
        if holds(sic, &tuples, cfg) {
            out.push(Violation { sic: sic.id, tids: tuples.iter().map(|t| t.tid).collect() });
        }
        let mut k = idx.len();
        loop {
            if k == 0 {
                return Ok(dedup(out));
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < per_atom[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn holds(sic: &DenialSIC, tuples: &[&SpatialTuple], cfg: &GeometryConfig) -> bool {
    let mut env: HashMap<&str, &Value> = HashMap::new();
    let mut regions: HashMap<&str, &Region> = HashMap::new();
    for (a, t) in sic.atoms.iter().zip(tuples) {
        for (v, val) in a.vars.iter().zip(t.values.iter()) {
            if !is_wild(v) && env.insert(v, val).is_some_and(|p| p != val) {
                return false;
            }
        }
        if regions.insert(&a.spatial, &t.region).is_some_and(|p| p != &*t.region) {
            return false;
        }
    }
    sic.condition.iter().all(|c| c.eval(&env) == Some(true))
        && sic.topo.iter().all(|t| topo(t.pred, regions[t.left.as_str()], regions[t.right.as_str()], cfg))
}
