//! Operational repairs: admissible transformations, the accessible-instance
//! search and minimal repair enumeration.

mod export;

use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{as_core_sics, find_all_violations, ConstraintError, DenialSIC, Violation};
use crate::geometry::{
    buffer, covered_by, difference, intersection_area, difference_area, topo, GeometryConfig, Predicate, Region,
};
use crate::model::{delta_regions, Correlation, Instance, ModelError, Tid};

pub use export::{write_repairs, Manifest, ManifestEntry};

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("no transformation for predicate {0}")]
    Unsupported(Predicate),
    #[error("violation {0:?} does not hold in this instance")]
    StaleViolation(Vec<Tid>),
    #[error("search limit exceeded after {nodes} nodes at depth {depth}; {} consistent leaves found so far", .partial.repairs.len())]
    LimitExceeded { nodes: usize, depth: usize, partial: Box<RepairSet> },
    #[error("invariant broken: {0}")]
    Invariant(String),
    #[error("unknown tid {0}")]
    UnknownTid(Tid),
    #[error(transparent)]
    Constraint(#[from] ConstraintError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// `tr^T(g1, g2)`: shrinks `g1` until `T(g1, g2)` no longer holds.
pub fn tr(t: Predicate, g1: &Region, g2: &Region, cfg: &GeometryConfig) -> Result<Region, RepairError> {
    if t == Predicate::DJ {
        return Err(RepairError::Unsupported(t));
    }
    if !topo(t, g1, g2, cfg) {
        return Ok(g1.clone());
    }
    Ok(match t {
        Predicate::OV | Predicate::IC | Predicate::CV => {
            let rest = difference(g1, g2, cfg);
            if intersection_area(g1, g2) <= difference_area(g1, g2) {
                rest
            } else {
                difference(g1, &rest, cfg)
            }
        }
        Predicate::IS | Predicate::CB | Predicate::II | Predicate::WI | Predicate::CO => difference(g1, g2, cfg),
        Predicate::TO | Predicate::IT => difference(g1, &buffer(g2, cfg.d, cfg), cfg),
        Predicate::EQ => Region::empty(),
        Predicate::DJ => unreachable!(),
    })
}

/// Shrinks the second argument of `T(g1, g2)`: `tr^{T^c}(g2, g1)`.
pub fn tr_converse(t: Predicate, g2: &Region, g1: &Region, cfg: &GeometryConfig) -> Result<Region, RepairError> {
    tr(t.converse(), g2, g1, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Choice {
    FirstAtom,
    SecondAtom,
}

/// One application of a transformation to a violation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub sic: usize,
    pub witness: Vec<Tid>,
    /// Index of the falsified topological atom within the constraint.
    pub topo: usize,
    pub pred: Predicate,
    pub choice: Choice,
    pub modified: Tid,
}

#[derive(Debug, Clone)]
pub struct RepairNode {
    pub instance: Instance,
    pub applied: Vec<Step>,
    pub total_area: f64,
}

impl RepairNode {
    pub fn root(d: &Instance) -> Self {
        Self { instance: d.clone(), applied: Vec::new(), total_area: d.total_area() }
    }
}

fn sic_by_id(sics: &[DenialSIC], id: usize) -> Option<&DenialSIC> {
    sics.iter().find(|s| s.id == id)
}

/// Applies one step of the accessible-instance construction.
pub fn apply_step(
    node: &RepairNode,
    sics: &[DenialSIC],
    v: &Violation,
    topo_atom: usize,
    choice: Choice,
    cfg: &GeometryConfig,
) -> Result<RepairNode, RepairError> {
    let stale = || RepairError::StaleViolation(v.tids.clone());
    let sic = sic_by_id(sics, v.sic).ok_or_else(stale)?;
    let atom = sic.topo.get(topo_atom).ok_or_else(stale)?;
    let pos = |var: &str| sic.atoms.iter().position(|a| a.spatial == var);
    let (i, j) = (pos(&atom.left).ok_or_else(stale)?, pos(&atom.right).ok_or_else(stale)?);
    let (t1, t2) = (v.tids[i], v.tids[j]);
    let d = &node.instance;
    let g1 = &d.get(t1).ok_or(RepairError::UnknownTid(t1))?.region;
    let g2 = &d.get(t2).ok_or(RepairError::UnknownTid(t2))?.region;
    if !topo(atom.pred, g1, g2, cfg) {
        return Err(stale());
    }
    let (modified, region) = match choice {
        Choice::FirstAtom => (t1, tr(atom.pred, g1, g2, cfg)?),
        Choice::SecondAtom => (t2, tr_converse(atom.pred, g2, g1, cfg)?),
    };
    let old = d.get(modified).expect("present").region.area();
    let total_area = node.total_area - old + region.area();
    let instance = d.with_region(modified, region).expect("present");
    let mut applied = node.applied.clone();
    applied.push(Step { sic: v.sic, witness: v.tids.clone(), topo: topo_atom, pred: atom.pred, choice, modified });
    Ok(RepairNode { instance, applied, total_area })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairLimits {
    pub max_nodes: usize,
    pub max_depth: usize,
}

impl Default for RepairLimits {
    fn default() -> Self {
        Self { max_nodes: 1_000_000, max_depth: 1_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RepairOptions {
    pub limits: RepairLimits,
    /// Run sibling expansion on the rayon pool; the result is identical either way.
    pub parallel: bool,
    /// Branch on every current violation instead of only the first one.
    pub all_orderings: bool,
}

#[derive(Debug, Clone)]
pub struct Repair {
    pub instance: Instance,
    pub delta: f64,
    pub minimal: bool,
    pub applied: Vec<Step>,
}

/// All consistent leaves of the search, with the Δ-minimal ones flagged.
#[derive(Debug, Clone)]
pub struct RepairSet {
    pub original: Instance,
    pub repairs: Vec<Repair>,
    pub nodes: usize,
}

impl RepairSet {
    pub fn minimal(&self) -> impl Iterator<Item = &Repair> {
        self.repairs.iter().filter(|r| r.minimal)
    }

    pub fn minimal_count(&self) -> usize {
        self.minimal().count()
    }

    pub fn min_delta(&self) -> Option<f64> {
        self.minimal().map(|r| r.delta).reduce(f64::min)
    }
}

fn state_key(d: &Instance, grid: f64) -> Vec<u64> {
    d.tuples().iter().map(|t| t.region.fingerprint(grid)).collect()
}

fn delta(d: &Instance, d2: &Instance) -> f64 {
    d.tuples()
        .iter()
        .zip(d2.tuples())
        .map(|(a, b)| if Arc::ptr_eq(&a.region, &b.region) { 0.0 } else { delta_regions(&a.region, &b.region) })
        .sum()
}

fn pair_set(vs: &[Violation]) -> HashSet<Vec<Tid>> {
    vs.iter().map(|v| v.tid_set()).collect()
}

enum Expansion {
    Leaf,
    Children(Vec<RepairNode>),
}

fn expand(
    node: &RepairNode,
    sics: &[DenialSIC],
    cfg: &GeometryConfig,
    opts: &RepairOptions,
    core_pairs: Option<&HashSet<Vec<Tid>>>,
) -> Result<Expansion, RepairError> {
    let vs = find_all_violations(&node.instance, sics, cfg)?;
    if vs.is_empty() {
        return Ok(Expansion::Leaf);
    }
    if let Some(pairs) = core_pairs {
        if let Some(v) = vs.iter().find(|v| !pairs.contains(&v.tid_set())) {
            return Err(RepairError::Invariant(format!("repair step created a new conflict between {:?}", v.tids)));
        }
    }
    let chosen: &[Violation] = if opts.all_orderings { &vs } else { &vs[..1] };
    let grid = cfg.hash_grid();
    let mut children = Vec::new();
    for v in chosen {
        let sic = sic_by_id(sics, v.sic).expect("violation of a known constraint");
        for k in 0..sic.topo.len() {
            for choice in [Choice::FirstAtom, Choice::SecondAtom] {
                let child = apply_step(node, sics, v, k, choice, cfg)?;
                let m = child.applied.last().expect("one step").modified;
                let before = node.instance.get(m).expect("present");
                let after = child.instance.get(m).expect("present");
                if before.region.fingerprint(grid) == after.region.fingerprint(grid) {
                    continue;
                }
                if after.region.area() > before.region.area() + cfg.area_epsilon {
                    return Err(RepairError::Invariant(format!("step on tid {m} increased its area")));
                }
                children.push(child);
            }
        }
    }
    Ok(Expansion::Children(children))
}

/// Exhaustive search over accessible instances; returns every consistent leaf.
pub fn enumerate_repairs(
    d: &Instance,
    sics: &[DenialSIC],
    cfg: &GeometryConfig,
    opts: &RepairOptions,
) -> Result<RepairSet, RepairError> {
    let grid = cfg.hash_grid();
    let core_pairs = match as_core_sics(sics, d.schema()) {
        Some(_) if !sics.is_empty() => Some(pair_set(&find_all_violations(d, sics, cfg)?)),
        _ => None,
    };
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    seen.insert(state_key(d, grid));
    let mut level = vec![RepairNode::root(d)];
    let mut leaves: Vec<RepairNode> = Vec::new();
    let mut nodes = 1usize;
    let mut depth = 0usize;
    let mut exceeded = false;
    while !level.is_empty() {
        let run = |n: &RepairNode| expand(n, sics, cfg, opts, core_pairs.as_ref());
        let expanded: Vec<Result<Expansion, RepairError>> = if opts.parallel {
            level.par_iter().map(run).collect()
        } else {
            level.iter().map(run).collect()
        };
        let mut next = Vec::new();
        for (node, e) in level.into_iter().zip(expanded) {
            match e? {
                Expansion::Leaf => leaves.push(node),
                Expansion::Children(cs) => {
                    for c in cs {
                        if seen.insert(state_key(&c.instance, grid)) {
                            next.push(c);
                        }
                    }
                }
            }
        }
        nodes += next.len();
        depth += 1;
        if !next.is_empty() && (nodes > opts.limits.max_nodes || depth > opts.limits.max_depth) {
            exceeded = true;
            break;
        }
        level = next;
    }
    let set = finish(d, leaves, cfg, nodes);
    if exceeded {
        return Err(RepairError::LimitExceeded { nodes, depth, partial: Box::new(set) });
    }
    Ok(set)
}

fn finish(d: &Instance, leaves: Vec<RepairNode>, cfg: &GeometryConfig, nodes: usize) -> RepairSet {
    let grid = cfg.hash_grid();
    let mut repairs: Vec<(Vec<u64>, Repair)> = leaves
        .into_iter()
        .map(|n| {
            let delta = delta(d, &n.instance);
            (state_key(&n.instance, grid), Repair { instance: n.instance, delta, minimal: false, applied: n.applied })
        })
        .collect();
    repairs.sort_by(|a, b| a.0.cmp(&b.0));
    // Merge leaves that differ only by quantization noise.
    let mut kept: Vec<(Vec<u64>, Repair)> = Vec::new();
    for (k, r) in repairs {
        let dup = kept.iter().any(|(_, o)| {
            (o.delta - r.delta).abs() <= d.len() as f64 * cfg.area_epsilon
                && o.instance
                    .tuples()
                    .iter()
                    .zip(r.instance.tuples())
                    .all(|(a, b)| delta_regions(&a.region, &b.region) <= cfg.area_epsilon)
        });
        if !dup {
            kept.push((k, r));
        }
    }
    let mut repairs: Vec<Repair> = kept.into_iter().map(|(_, r)| r).collect();
    let tol = d.len().max(1) as f64 * cfg.area_epsilon;
    if let Some(min) = repairs.iter().map(|r| r.delta).reduce(f64::min) {
        for r in &mut repairs {
            r.minimal = r.delta <= min + tol;
        }
    }
    RepairSet { original: d.clone(), repairs, nodes }
}

/// Distinct geometries one tuple takes across the minimal repairs.
#[derive(Debug, Clone)]
pub struct VersionSet {
    pub tid: Tid,
    pub versions: Vec<Region>,
}

impl VersionSet {
    /// The version contained in all others, if there is one.
    pub fn minimum(&self, cfg: &GeometryConfig) -> Option<&Region> {
        self.versions
            .iter()
            .find(|g| self.versions.iter().all(|h| covered_by(g, h, cfg)))
    }
}

pub fn versions(set: &RepairSet, tid: Tid, cfg: &GeometryConfig) -> Result<VersionSet, RepairError> {
    set.original.get(tid).ok_or(RepairError::UnknownTid(tid))?;
    let mut out: Vec<Region> = Vec::new();
    let mut keys = BTreeSet::new();
    for r in set.minimal() {
        let g = &r.instance.get(tid).ok_or(RepairError::UnknownTid(tid))?.region;
        if keys.insert(g.fingerprint(cfg.hash_grid()))
            && !out.iter().any(|h| delta_regions(g, h) <= cfg.area_epsilon)
        {
            out.push((**g).clone());
        }
    }
    Ok(VersionSet { tid, versions: out })
}

/// Consistent, correlated, and every correlated region shrinks.
pub fn validate_shrink_repair(
    d: &Instance,
    d2: &Instance,
    f: &Correlation,
    sics: &[DenialSIC],
    cfg: &GeometryConfig,
) -> bool {
    if f.check(d, d2).is_err() {
        return false;
    }
    let shrinks = d.tuples().iter().all(|t| {
        let u = d2.get(f.image(t.tid).expect("checked")).expect("checked");
        covered_by(&u.region, &t.region, cfg)
    });
    shrinks && matches!(crate::constraints::is_consistent(d2, sics, cfg), Ok(true))
}

/// Tuples whose geometry differs between the original and a repair.
pub fn changed_tids(set: &RepairSet, r: &Repair, cfg: &GeometryConfig) -> Vec<Tid> {
    let grid = cfg.hash_grid();
    set.original
        .tuples()
        .iter()
        .zip(r.instance.tuples())
        .filter(|(a, b)| a.region.fingerprint(grid) != b.region.fingerprint(grid))
        .map(|(a, _)| a.tid)
        .collect()
}
