//! The core: one instance whose geometries are the per-tuple intersection of
//! all minimal repairs. Computed either from the repairs or directly from the
//! conflict sets of single-relation constraints.

mod sql;

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{as_core_sics, normalize_core_sics, CoreSIC, DenialSIC};
use crate::geometry::{buffer, BBox, difference, geom_union, intersection, topo, GeometryConfig, GridIndex, Predicate, Region};
use crate::model::{Instance, SpatialTuple, Tid};
use crate::query::{columns, eval, eval_join, Answer, AnswerSet, Query, QueryError, RangeQuery};
use crate::repair::{enumerate_repairs, RepairError, RepairOptions, RepairSet};

pub use sql::{emit_core_sql, emit_core_sql_all, SqlOptions};

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("constraint `{0}` is not a single-relation key constraint over IIntersects, Intersects or Equals")]
    NotCore(String),
    #[error(transparent)]
    Repair(#[from] RepairError),
    #[error(transparent)]
    Query(#[from] QueryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoreProvenance {
    Repairs,
    AllLeaves,
    Direct,
}

#[derive(Debug, Clone)]
pub struct CoreInstance {
    pub instance: Instance,
    pub provenance: CoreProvenance,
}

/// For each tid, the tids it conflicts with under its relation's constraint.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ConflictSet {
    pub conflicts: BTreeMap<Tid, BTreeSet<Tid>>,
    pub pred: BTreeMap<Tid, Predicate>,
}

impl ConflictSet {
    /// Conflicts of `tids` against all tuples of their relations.
    fn build_for(d: &Instance, sics: &[CoreSIC], cfg: &GeometryConfig, only: Option<&BTreeSet<Tid>>) -> Self {
        let mut out = ConflictSet::default();
        for s in sics {
            let tuples: Vec<&SpatialTuple> =
                d.relation_tuples(&s.relation).filter(|t| t.region.area() > cfg.area_epsilon).collect();
            let index = GridIndex::new(tuples.iter().map(|t| t.region.bbox()).collect());
            let per: Vec<(Tid, BTreeSet<Tid>)> = tuples
                .par_iter()
                .filter(|t| only.is_none_or(|o| o.contains(&t.tid)))
                .map(|t| {
                    let b = t.region.bbox();
                    let hits = index
                        .query(&b.expand(1e-9 * b.diagonal()))
                        .into_iter()
                        .map(|k| tuples[k])
                        .filter(|u| u.tid != t.tid && d.key_of(u) != d.key_of(t))
                        .filter(|u| topo(s.pred, &t.region, &u.region, cfg))
                        .map(|u| u.tid)
                        .collect();
                    (t.tid, hits)
                })
                .collect();
            for (tid, hits) in per {
                out.pred.insert(tid, s.pred);
                if !hits.is_empty() {
                    out.conflicts.insert(tid, hits);
                }
            }
        }
        out
    }

    pub fn build(d: &Instance, sics: &[CoreSIC], cfg: &GeometryConfig) -> Self {
        Self::build_for(d, &normalize_core_sics(sics), cfg, None)
    }

    pub fn of(&self, tid: Tid) -> impl Iterator<Item = Tid> + '_ {
        self.conflicts.get(&tid).into_iter().flatten().copied()
    }

    pub fn is_symmetric(&self) -> bool {
        self.conflicts.iter().all(|(a, bs)| bs.iter().all(|b| self.of(*b).any(|x| x == *a)))
    }
}

fn core_sics(sics: &[DenialSIC], d: &Instance) -> Result<Vec<CoreSIC>, CoreError> {
    match as_core_sics(sics, d.schema()) {
        Some(c) => Ok(normalize_core_sics(&c)),
        None => {
            let bad = sics.iter().find(|s| s.as_core(d.schema()).is_none()).expect("one is not core");
            Err(CoreError::NotCore(bad.label.clone()))
        }
    }
}

fn core_geometry(d: &Instance, t: &SpatialTuple, conf: &ConflictSet, cfg: &GeometryConfig) -> Region {
    let others: Vec<&Region> = conf.of(t.tid).map(|u| &*d.get(u).expect("conflict tid").region).collect();
    if others.is_empty() {
        return (*t.region).clone();
    }
    match conf.pred[&t.tid] {
        Predicate::EQ => Region::empty(),
        Predicate::II => {
            let u = geom_union(&others.into_iter().cloned().collect::<Vec<_>>(), cfg);
            difference(&t.region, &u, cfg)
        }
        Predicate::IT => {
            let bs: Vec<Region> = others.into_iter().map(|g| buffer(g, cfg.d, cfg)).collect();
            difference(&t.region, &geom_union(&bs, cfg), cfg)
        }
        p => unreachable!("{p} is not a core predicate"),
    }
}

fn direct(d: &Instance, sics: &[CoreSIC], cfg: &GeometryConfig) -> Instance {
    let (eq, rest): (Vec<CoreSIC>, Vec<CoreSIC>) = sics.iter().cloned().partition(|s| s.pred == Predicate::EQ);
    let conf = ConflictSet::build_for(d, &rest, cfg, None);
    let changed: BTreeMap<Tid, Arc<Region>> = conf
        .conflicts
        .keys()
        .copied()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&tid| (tid, Arc::new(core_geometry(d, d.get(tid).expect("tid"), &conf, cfg))))
        .collect();
    let top = d.tuples().iter().map(|t| t.tid as usize).max().unwrap_or(0);
    let mut emptied = vec![false; top + 1];
    for tid in eq.iter().flat_map(|s| equal_conflicting(d, s, cfg)) {
        emptied[tid as usize] = true;
    }
    let empty = Arc::new(Region::empty());
    d.map_shared(|t| {
        if emptied[t.tid as usize] {
            empty.clone()
        } else {
            changed.get(&t.tid).unwrap_or(&t.region).clone()
        }
    })
}

/// Tids with an Equals conflict. Tuples sharing a quantized bounding box are
/// compared for exact equality first; every tuple not settled that way is
/// probed against its index neighbours. A probe that hits one copy has hit
/// the whole group, so each group is indexed once.
fn equal_conflicting(d: &Instance, s: &CoreSIC, cfg: &GeometryConfig) -> Vec<Tid> {
    let tuples: Vec<&SpatialTuple> =
        d.relation_tuples(&s.relation).filter(|t| t.region.area() > cfg.area_epsilon).collect();
    let boxes: Vec<BBox> = tuples.iter().map(|t| t.region.bbox()).collect();
    let grid = cfg.hash_grid();
    // Exact copies share a key; distinct boxes may collide, which only costs a compare.
    let key = |b: &BBox| {
        [b.min_x, b.min_y, b.max_x, b.max_y]
            .into_iter()
            .fold(0u64, |h, v| (h ^ (v / grid).round() as i64 as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15))
    };
    let mut keyed: Vec<(u64, u32)> = boxes.iter().enumerate().map(|(i, b)| (key(b), i as u32)).collect();
    keyed.sort_unstable();
    // Only the first member of each copy group goes into the index.
    let mut copies = vec![false; tuples.len()];
    let mut spare = vec![false; tuples.len()];
    for run in keyed.chunk_by(|a, b| a.0 == b.0).filter(|r| r.len() > 1) {
        for (x, &(_, i)) in run.iter().enumerate() {
            let i = i as usize;
            if spare[i] {
                continue;
            }
            for &(_, j) in &run[x + 1..] {
                let j = j as usize;
                if !spare[j]
                    && (Arc::ptr_eq(&tuples[i].region, &tuples[j].region) || tuples[i].region == tuples[j].region)
                {
                    copies[i] = true;
                    copies[j] = true;
                    spare[j] = true;
                }
            }
        }
    }
    let kept: Vec<usize> = (0..tuples.len()).filter(|&i| !spare[i]).collect();
    let index = GridIndex::new(kept.iter().map(|&i| boxes[i]).collect());
    let probed: Vec<Tid> = (0..tuples.len())
        .into_par_iter()
        .filter(|&i| !copies[i])
        .filter(|&i| {
            let t = tuples[i];
            let b = &boxes[i];
            index
                .query(&b.expand(1e-9 * b.diagonal()))
                .into_iter()
                .map(|k| kept[k])
                .any(|k| k != i && topo(Predicate::EQ, &t.region, &tuples[k].region, cfg))
        })
        .map(|i| tuples[i].tid)
        .collect();
    tuples.iter().zip(&copies).filter(|(_, c)| **c).map(|(t, _)| t.tid).chain(probed).collect()
}

/// Each geometry minus the union of its conflicting geometries (buffered for
/// Intersects, everything for Equals). No repairs are enumerated.
pub fn core_direct(d: &Instance, sics: &[DenialSIC], cfg: &GeometryConfig) -> Result<CoreInstance, CoreError> {
    let cs = core_sics(sics, d)?;
    Ok(CoreInstance { instance: direct(d, &cs, cfg), provenance: CoreProvenance::Direct })
}

/// Per-tid intersection over the minimal repairs (or over every consistent leaf).
pub fn core_from_repairs(set: &RepairSet, cfg: &GeometryConfig, all_leaves: bool) -> CoreInstance {
    let chosen: Vec<&Instance> =
        set.repairs.iter().filter(|r| all_leaves || r.minimal).map(|r| &r.instance).collect();
    let instance = set.original.map_regions(|t| {
        let gs: Vec<&Arc<Region>> =
            chosen.iter().map(|d| &d.get(t.tid).expect("repairs keep every tid").region).collect();
        if gs.iter().all(|g| Arc::ptr_eq(g, &t.region)) {
            return (*t.region).clone();
        }
        gs.iter().skip(1).fold((**gs[0]).clone(), |a, g| intersection(&a, g, cfg))
    });
    let provenance = if all_leaves { CoreProvenance::AllLeaves } else { CoreProvenance::Repairs };
    CoreInstance { instance, provenance }
}

pub fn core_via_repairs(
    d: &Instance,
    sics: &[DenialSIC],
    cfg: &GeometryConfig,
    opts: &RepairOptions,
) -> Result<CoreInstance, CoreError> {
    let set = enumerate_repairs(d, sics, cfg, opts)?;
    Ok(core_from_repairs(&set, cfg, false))
}

fn require_basic(q: &Query) -> Result<(), CoreError> {
    if q.is_basic() {
        Ok(())
    } else {
        Err(QueryError::NotBasic(q.pred()).into())
    }
}

/// Evaluates a basic query over an already computed core.
pub fn cqa_on_core(q: &Query, core: &CoreInstance, cfg: &GeometryConfig) -> Result<AnswerSet, CoreError> {
    require_basic(q)?;
    Ok(eval(q, &core.instance, cfg)?)
}

/// Consistent answers to a basic query through the core. Range queries only
/// compute core geometries for tuples whose box meets the window.
pub fn cqa_via_core(q: &Query, d: &Instance, sics: &[DenialSIC], cfg: &GeometryConfig) -> Result<AnswerSet, CoreError> {
    require_basic(q)?;
    q.validate(d.schema()).map_err(CoreError::Query)?;
    let cs = core_sics(sics, d)?;
    match q {
        Query::Range(r) => Ok(range_on_local_core(r, d, &cs, cfg)?),
        Query::Join(j) => {
            let core = direct(d, &cs, cfg);
            Ok(eval_join(j, &core, cfg)?)
        }
    }
}

fn range_on_local_core(q: &RangeQuery, d: &Instance, cs: &[CoreSIC], cfg: &GeometryConfig) -> Result<AnswerSet, QueryError> {
    let wb = q.window.bbox();
    let wb = wb.expand(1e-9 * wb.diagonal());
    let cand: BTreeSet<Tid> =
        d.relation_tuples(&q.relation).filter(|t| t.region.bbox().intersects(&wb)).map(|t| t.tid).collect();
    let conf = ConflictSet::build_for(d, cs, cfg, Some(&cand));
    let rows: Vec<Result<Option<Answer>, QueryError>> = cand
        .iter()
        .copied()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&tid| {
            let t = d.get(tid).expect("tid");
            let g = if conf.conflicts.contains_key(&tid) { core_geometry(d, t, &conf, cfg) } else { (*t.region).clone() };
            if g.area() <= cfg.area_epsilon || !topo(q.pred, &g, &q.window, cfg) {
                return Ok(None);
            }
            Ok(Some(Answer { values: d.project(t, &q.project)?, regions: vec![g], tids: vec![tid] }))
        })
        .collect();
    let mut out = Vec::new();
    for r in rows {
        out.extend(r?);
    }
    Ok(AnswerSet::sorted(columns(&Query::Range(q.clone())), out))
}
