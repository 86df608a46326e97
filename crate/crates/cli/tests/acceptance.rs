//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spatial_cqa::bench::{run_bench, BenchConfig, BenchRow};
use spatial_cqa::constraints::{find_all_violations, parse_sics, CoreSIC, DenialSIC};
use spatial_cqa::cqa_core::{core_direct, core_from_repairs, cqa_via_core};
use spatial_cqa::geometry::{
    covered_by, difference, geom_equal, oracle_relation, sym_difference_area, topo, GeometryConfig,
    Predicate, Region,
};
use spatial_cqa::model::{load_instance, Correlation, Instance, RelationSchema, Row, Schema, Value, ValueType};
use spatial_cqa::query::{answers_match, cqa_from_repairs, cqa_via_repairs, eval, JoinQuery, Query, RangeQuery};
use spatial_cqa::repair::{enumerate_repairs, tr, validate_shrink_repair, RepairOptions, RepairSet};
use spatial_cqa::synthetic::{random_region, random_small_instance, random_window, ConflictMode};

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion { id: 1, name: "predicate soundness", budget: Duration::from_secs(60), run: predicate_soundness },
        Criterion { id: 2, name: "transformation correctness", budget: Duration::from_secs(60), run: transformations },
        Criterion { id: 3, name: "exponential repair count", budget: Duration::from_secs(30), run: repair_count },
        Criterion { id: 4, name: "core equivalence", budget: Duration::from_secs(300), run: core_equivalence },
        Criterion { id: 5, name: "core and repair answers agree", budget: Duration::from_secs(300), run: cqa_equivalence },
        Criterion { id: 6, name: "touches counterexample", budget: Duration::MAX, run: touches_counterexample },
        Criterion { id: 7, name: "figure regressions", budget: Duration::MAX, run: figure_regressions },
        Criterion { id: 8, name: "benchmark trends", budget: Duration::MAX, run: bench_trends },
        Criterion { id: 9, name: "determinism across thread counts", budget: Duration::MAX, run: determinism },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    for c in criteria.iter().filter(|c| filter.is_empty() || filter.contains(&c.id)) {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if took > c.budget => Err(format!("{detail}; took {took:.1?}, budget {:?}", c.budget)),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS {} {}: {detail} ({took:.1?})", c.id, c.name),
            Err(detail) => {
                println!("FAIL {} {}: {detail} ({took:.1?})", c.id, c.name);
                failed.push(c.id);
            }
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lattice_cfg() -> GeometryConfig {
    GeometryConfig::new(0.05, 1e-9).unwrap()
}

fn predicate_soundness() -> Outcome {
    let c = lattice_cfg();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pairs = 1000;
    for i in 0..pairs {
        let a = random_region(&mut rng, 12);
        let b = random_region(&mut rng, 12);
        let holding: Vec<Predicate> = Predicate::BASE.into_iter().filter(|&p| topo(p, &a, &b, &c)).collect();
        check(holding.len() == 1, || format!("pair {i}: base relations {holding:?}"))?;
        for p in Predicate::ALL {
            check(topo(p, &a, &b, &c) == topo(p.converse(), &b, &a, &c), || format!("pair {i}: converse of {p}"))?;
        }
        let raster = oracle_relation(&a, &b, 512).map_err(|e| format!("pair {i}: oracle {e}"))?;
        for p in Predicate::ALL {
            check(topo(p, &a, &b, &c) == p.holds_for(raster), || {
                format!("pair {i}: {p} disagrees with the raster oracle ({} vs {raster})", holding[0])
            })?;
        }
    }
    Ok(format!("{pairs} pairs, JEPD, converses and raster agreement at 512x512"))
}

fn transformations() -> Outcome {
    let c = lattice_cfg();
    let ts = [
        Predicate::OV,
        Predicate::IS,
        Predicate::CB,
        Predicate::EQ,
        Predicate::IC,
        Predicate::CV,
        Predicate::TO,
        Predicate::IT,
        Predicate::II,
        Predicate::WI,
        Predicate::CO,
    ];
    let want = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut counts = [0usize; 11];
    let mut attempts = 0;
    while counts.iter().any(|&n| n < want) && attempts < 200_000 {
        attempts += 1;
        let a = random_region(&mut rng, 12);
        let b = if rng.gen_bool(0.05) { a.clone() } else { random_region(&mut rng, 12) };
        for (k, &t) in ts.iter().enumerate() {
            if counts[k] >= want || !topo(t, &a, &b, &c) {
                continue;
            }
            counts[k] += 1;
            let g = tr(t, &a, &b, &c).map_err(|e| format!("tr({t}) failed: {e}"))?;
            check(!topo(t, &g, &b, &c), || format!("{t} still holds after its transformation"))?;
            check(covered_by(&g, &a, &c), || format!("tr({t}) grew its first argument"))?;
        }
    }
    let short: Vec<String> =
        ts.iter().zip(counts).filter(|(_, n)| *n < want).map(|(t, n)| format!("{t}: {n}")).collect();
    check(short.is_empty(), || format!("too few true atoms found: {}", short.join(", ")))?;
    Ok(format!("{want} true atoms for each of {} predicates", ts.len()))
}

fn r_schema() -> Arc<Schema> {
    Arc::new(Schema::new(vec![RelationSchema::new("R", &[("id", ValueType::Integer)], &["id"])]).unwrap())
}

fn r_instance(gs: Vec<Region>) -> Instance {
    let rows = gs.into_iter().enumerate().map(|(i, g)| Row::new("R", vec![Value::Int(i as i64 + 1)], g)).collect();
    load_instance(r_schema(), rows, None).unwrap()
}

fn r_sics(p: Predicate) -> Vec<DenialSIC> {
    vec![CoreSIC::new(0, "R", p).unwrap().to_denial(&r_schema()).unwrap()]
}

fn repair_count() -> Outcome {
    let c = GeometryConfig::new(0.01, 1e-9).unwrap();
    let sics = r_sics(Predicate::II);
    let mut counts = Vec::new();
    for n in 2..=5usize {
        let d = r_instance((0..n).map(|i| Region::rect(2.0 * i as f64, 0.0, 2.0 * i as f64 + 3.0, 1.0)).collect());
        let set = enumerate_repairs(&d, &sics, &c, &RepairOptions::default()).map_err(|e| e.to_string())?;
        let full = enumerate_repairs(&d, &sics, &c, &RepairOptions { all_orderings: true, ..Default::default() })
            .map_err(|e| e.to_string())?;
        let want = 1usize << (n - 1);
        check(set.minimal_count() == want, || format!("chain of {n}: {} minimal repairs, want {want}", set.minimal_count()))?;
        check(full.minimal_count() == want, || format!("chain of {n}: full search finds {}", full.minimal_count()))?;
        let floor = full.repairs.iter().map(|r| r.delta).fold(f64::INFINITY, f64::min);
        let tol = n as f64 * c.area_epsilon;
        for r in set.minimal() {
            check(validate_shrink_repair(&d, &r.instance, &Correlation::identity(&d), &sics, &c), || {
                format!("chain of {n}: a minimal repair fails validation")
            })?;
            check(r.delta <= floor + tol, || format!("chain of {n}: delta {} above leaf minimum {floor}", r.delta))?;
        }
        for r in full.repairs.iter().filter(|r| !r.minimal) {
            check(r.delta > floor + tol, || format!("chain of {n}: unflagged leaf at minimum delta"))?;
        }
        counts.push(format!("n={n}: {}/{} leaves", set.minimal_count(), full.repairs.len()));
    }
    Ok(counts.join(", "))
}

const CORE_PREDS: [Predicate; 3] = [Predicate::II, Predicate::IT, Predicate::EQ];

/// The seeded population shared by the core and answer equivalence checks.
fn population(p: Predicate) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(400 + p as u64);
    (0..100).map(|_| random_small_instance(&mut rng, p, 8, 4)).collect()
}

fn minimal_repairs(d: &Instance, sics: &[DenialSIC], c: &GeometryConfig) -> Result<RepairSet, String> {
    enumerate_repairs(d, sics, c, &RepairOptions::default()).map_err(|e| e.to_string())
}

fn core_equivalence() -> Outcome {
    let mut report = Vec::new();
    let mut bad = Vec::new();
    for p in CORE_PREDS {
        let sics = r_sics(p);
        let mut mismatched = 0;
        for (i, d) in population(p).iter().enumerate() {
            let c = d.default_config();
            let tol = 1e-9 * d.bbox().area();
            let direct = core_direct(d, &sics, &c).map_err(|e| e.to_string())?.instance;
            let set = minimal_repairs(d, &sics, &c)?;
            let via = core_from_repairs(&set, &c, false).instance;
            let worst = direct
                .tuples()
                .iter()
                .zip(via.tuples())
                .map(|(a, b)| sym_difference_area(&a.region, &b.region))
                .fold(0.0, f64::max);
            if worst > tol {
                mismatched += 1;
                if bad.len() < 3 {
                    bad.push(format!("{p} #{i} differs by {worst:.3}"));
                }
            }
        }
        report.push(format!("{p}: {}/100 equal", 100 - mismatched));
    }
    check(bad.is_empty(), || format!("{}; {}", report.join(", "), bad.join(", ")))?;
    Ok(report.join(", "))
}

fn cqa_equivalence() -> Outcome {
    let mut report = Vec::new();
    let mut bad = Vec::new();
    for p in CORE_PREDS {
        let sics = r_sics(p);
        let mut rng = ChaCha8Rng::seed_from_u64(500 + p as u64);
        let (mut asked, mut differ) = (0, 0);
        for (i, d) in population(p).iter().enumerate() {
            let c = d.default_config();
            let set = minimal_repairs(d, &sics, &c)?;
            let mut queries = Vec::new();
            for t in [Predicate::IT, Predicate::II] {
                for _ in 0..3 {
                    queries.push(Query::Range(RangeQuery {
                        relation: "R".into(),
                        pred: t,
                        window: random_window(&mut rng, &d.bbox(), 0.01),
                        project: vec!["id".into()],
                    }));
                }
                queries.push(Query::Join(JoinQuery {
                    left: "R".into(),
                    right: "R".into(),
                    pred: t,
                    project: (vec!["id".into()], vec!["id".into()]),
                }));
            }
            for q in &queries {
                asked += 1;
                let core = cqa_via_core(q, d, &sics, &c).map_err(|e| e.to_string())?;
                let reps = cqa_from_repairs(q, &set, &c).map_err(|e| e.to_string())?;
                if !answers_match(&core, &reps, c.area_epsilon) {
                    differ += 1;
                    if bad.len() < 3 {
                        let kind = if matches!(q, Query::Join(_)) { "join" } else { "range" };
                        bad.push(format!(
                            "{p} #{i} {kind} {}: core {} rows, repairs {} rows",
                            q.pred(),
                            core.len(),
                            reps.len()
                        ));
                    }
                }
            }
        }
        report.push(format!("{p}: {}/{asked} agree", asked - differ));
    }
    check(bad.is_empty(), || format!("{}; {}", report.join(", "), bad.join(", ")))?;
    Ok(report.join(", "))
}

fn touches_counterexample() -> Outcome {
    let c = GeometryConfig::new(0.01, 1e-9).unwrap();
    let d = r_instance(vec![Region::rect(0.0, 0.0, 2.0, 1.0), Region::rect(1.0, 0.0, 3.0, 1.0)]);
    let sics = r_sics(Predicate::II);
    let q = Query::Range(RangeQuery {
        relation: "R".into(),
        pred: Predicate::TO,
        window: Region::rect(1.0, 0.2, 1.5, 0.8),
        project: vec!["id".into()],
    });
    let core = core_direct(&d, &sics, &c).map_err(|e| e.to_string())?;
    let on_core = eval(&q, &core.instance, &c).map_err(|e| e.to_string())?;
    let set = minimal_repairs(&d, &sics, &c)?;
    let touched = set.minimal().filter(|r| !eval(&q, &r.instance, &c).unwrap().is_empty()).count();
    let reps = cqa_from_repairs(&q, &set, &c).map_err(|e| e.to_string())?;
    check(!on_core.is_empty(), || "core gives no rows".into())?;
    check(reps.is_empty(), || format!("repairs give {} rows", reps.len()))?;
    check(touched == 1, || format!("window touches in {touched} of {} repairs", set.minimal_count()))?;
    Ok(format!("core {} row(s), repairs 0 rows, touched in 1 of {} repairs", on_core.len(), set.minimal_count()))
}

fn two_relation_schema(parcel_attrs: &[(&str, ValueType)]) -> Arc<Schema> {
    Arc::new(
        Schema::new(vec![
            RelationSchema::new("LandP", parcel_attrs, &["idl"]),
            RelationSchema::new("Building", &[("idb", ValueType::String)], &["idb"]),
        ])
        .unwrap(),
    )
}

fn key_of(d: &Instance, key: &str) -> u64 {
    d.tuples().iter().find(|t| t.values[0] == Value::from(key)).unwrap().tid
}

fn figure_regressions() -> Outcome {
    let c = GeometryConfig::new(0.01, 1e-9).unwrap();
    let ids = |a: &spatial_cqa::query::AnswerSet| -> Vec<String> {
        a.rows.iter().map(|r| r.values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("/")).collect()
    };

    // Range and touches-join answers.
    let s = two_relation_schema(&[("idl", ValueType::String)]);
    let rows = vec![
        Row::new("LandP", vec!["idl1".into()], Region::rect(0.0, 0.0, 2.0, 1.0)),
        Row::new("LandP", vec!["idl2".into()], Region::rect(0.0, 1.0, 1.0, 2.0)),
        Row::new("LandP", vec!["idl3".into()], Region::rect(1.0, 1.0, 2.0, 2.0)),
        Row::new("Building", vec!["idb1".into()], Region::rect(0.2, 0.2, 0.6, 0.6)),
        Row::new("Building", vec!["idb2".into()], Region::rect(1.4, 1.4, 1.8, 1.8)),
    ];
    let d = load_instance(s, rows, None).unwrap();
    let q1 = Query::Range(RangeQuery {
        relation: "Building".into(),
        pred: Predicate::IT,
        window: Region::rect(1.2, 1.2, 2.6, 2.6),
        project: vec!["idb".into()],
    });
    let a1 = ids(&eval(&q1, &d, &c).map_err(|e| e.to_string())?);
    check(a1 == ["idb2"], || format!("range answers {a1:?}"))?;
    let q2 = Query::Join(JoinQuery {
        left: "LandP".into(),
        right: "LandP".into(),
        pred: Predicate::TO,
        project: (vec!["idl".into()], vec!["idl".into()]),
    });
    let a2 = ids(&eval(&q2, &d, &c).map_err(|e| e.to_string())?);
    let want = ["idl1/idl2", "idl1/idl3", "idl2/idl1", "idl2/idl3", "idl3/idl1", "idl3/idl2"];
    check(a2 == want, || format!("touches join answers {a2:?}"))?;

    // Parcels with a nested parcel and two buildings.
    let s = two_relation_schema(&[("idl", ValueType::String), ("name", ValueType::String), ("owner", ValueType::String)]);
    let parcel = |id: &str, g| Row::new("LandP", vec![id.into(), format!("n_{id}").as_str().into(), "o".into()], g);
    let rows = vec![
        parcel("idl1", Region::rect(0.0, 0.0, 4.0, 4.0)),
        parcel("idl2", Region::rect(4.0, 0.0, 10.0, 4.0)),
        parcel("idl3", Region::rect(8.0, 0.0, 14.0, 4.0)),
        parcel("idl4", Region::rect(5.0, 0.0, 7.0, 1.0)),
        Row::new("Building", vec!["idb1".into()], Region::rect(1.0, 2.5, 3.0, 4.5)),
        Row::new("Building", vec!["idb2".into()], Region::rect(9.5, 1.0, 11.0, 2.0)),
    ];
    let d = load_instance(s.clone(), rows, None).unwrap();
    let sics = parse_sics(
        r#"[{"relation":"LandP","pred":"iintersects"},
            {"atoms":[{"relation":"Building","vars":["b","s1"]},{"relation":"LandP","vars":["l","n","o","s2"]}],
             "topo":["Overlaps(s1, s2)"]}]"#,
        &s,
    )
    .map_err(|e| e.to_string())?;
    let nv = find_all_violations(&d, &sics, &c).map_err(|e| e.to_string())?.len();
    check(nv == 4, || format!("{nv} violations"))?;
    let set = minimal_repairs(&d, &sics, &c)?;
    let core = core_from_repairs(&set, &c, false).instance;
    let emptied: Vec<u64> = core.tuples().iter().filter(|t| t.region.is_empty_set()).map(|t| t.tid).collect();
    check(emptied == [key_of(&d, "idl4")], || format!("core empties {emptied:?}"))?;
    let g2 = &core.get(key_of(&d, "idl2")).unwrap().region;
    let want_g2 = difference(&Region::rect(4.0, 0.0, 8.0, 4.0), &Region::rect(5.0, 0.0, 7.0, 1.0), &c);
    check(geom_equal(g2, &want_g2, &c), || "core geometry of idl2".into())?;

    let q = Query::Range(RangeQuery {
        relation: "LandP".into(),
        pred: Predicate::IT,
        window: Region::rect(-1.0, -1.0, 15.0, 5.0),
        project: vec!["idl".into()],
    });
    let a = cqa_via_repairs(&q, &d, &sics, &c, &RepairOptions::default()).map_err(|e| e.to_string())?;
    let got = ids(&a);
    check(got == ["idl1", "idl2", "idl3"], || format!("consistent answers {got:?}"))?;
    let (now, before) = (a.rows[1].regions[0].area(), d.get(key_of(&d, "idl2")).unwrap().region.area());
    check(now < before, || format!("middle geometry not smaller ({now} vs {before})"))?;
    Ok(format!("range {a1:?}, {} touching pairs, core empties idl4, answers {got:?}", a2.len()))
}

fn strictly_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] > w[0])
}

fn non_increasing(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] <= w[0])
}

fn ms(rows: &[&BenchRow]) -> Vec<f64> {
    rows.iter().map(|r| (r.core_ms * 1000.0).round() / 1000.0).collect()
}

fn bench_trends() -> Outcome {
    let sweep = BenchConfig {
        modes: vec![ConflictMode::IIntersects, ConflictMode::Intersects],
        ..BenchConfig::default()
    };
    let report = run_bench(&sweep).map_err(|e| e.to_string())?;
    let mut notes = Vec::new();
    for mode in [ConflictMode::IIntersects, ConflictMode::Intersects] {
        let core = ms(&report.select(mode).collect::<Vec<_>>());
        check(strictly_increasing(&core), || format!("{mode} core ms over 1k..8k not increasing: {core:?}"))?;
        notes.push(format!("{mode} core {core:?}"));
    }
    for r in &report.rows {
        check(r.range_ratio() > 1.0, || format!("{} n={} range ratio {:.2}", r.mode, r.tuples, r.range_ratio()))?;
        check(r.join_ratio() <= 3.0, || format!("{} n={} join ratio {:.2}", r.mode, r.tuples, r.join_ratio()))?;
    }
    let worst_join = report.rows.iter().map(|r| r.join_ratio()).fold(0.0, f64::max);
    let eq = BenchConfig {
        sizes: vec![8000],
        pcts: vec![0.0, 20.0, 40.0, 60.0, 80.0],
        modes: vec![ConflictMode::Equals],
        windows: 5,
        joins: false,
        ..BenchConfig::default()
    };
    let eq_report = run_bench(&eq).map_err(|e| e.to_string())?;
    let core = ms(&eq_report.select(ConflictMode::Equals).collect::<Vec<_>>());
    check(non_increasing(&core), || format!("equals core ms over 0..80% not non-increasing: {core:?}"))?;
    notes.push(format!("equals core over % {core:?}, worst join ratio {worst_join:.2}"));
    Ok(notes.join("; "))
}

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_spatial-cqa")
}

fn run(args: &[&str], threads: Option<&str>) -> Result<(), String> {
    let mut cmd = Command::new(bin());
    if let Some(t) = threads {
        cmd.args(["--threads", t]);
    }
    let out = cmd.args(args).env_remove("SPATIAL_CQA_SEED").output().map_err(|e| e.to_string())?;
    check(out.status.success(), || {
        format!("`{}` failed: {}", args.join(" "), String::from_utf8_lossy(&out.stderr))
    })
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

fn same_instances(a: &Instance, b: &Instance) -> bool {
    a.tuples().iter().zip(b.tuples()).all(|(x, y)| x.tid == y.tid && x.region == y.region) && a.len() == b.len()
}

fn determinism() -> Outcome {
    // Library level: sequential and parallel repair search and core.
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for p in CORE_PREDS {
        for _ in 0..10 {
            let d = random_small_instance(&mut rng, p, 8, 4);
            let (sics, c) = (r_sics(p), d.default_config());
            let seq = enumerate_repairs(&d, &sics, &c, &RepairOptions::default()).map_err(|e| e.to_string())?;
            let par = enumerate_repairs(&d, &sics, &c, &RepairOptions { parallel: true, ..Default::default() })
                .map_err(|e| e.to_string())?;
            let same = seq.repairs.len() == par.repairs.len()
                && seq.repairs.iter().zip(&par.repairs).all(|(a, b)| {
                    a.delta == b.delta && a.minimal == b.minimal && same_instances(&a.instance, &b.instance)
                });
            check(same, || format!("{p}: repair sets differ between sequential and parallel search"))?;
        }
    }

    // Command level: every output file byte-for-byte.
    let root = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance-determinism");
    let _ = std::fs::remove_dir_all(&root);
    let data = root.join("data");
    let data_s = data.to_str().unwrap();
    run(&["gen", "--n", "64", "--pct", "10", "--mode", "iintersects", "--out", data_s], None)?;
    let q_range = root.join("range.json");
    std::fs::write(&q_range, r#"{"type":"range","relation":"R","pred":"IIntersects","window":"POLYGON((0 0,45 0,45 45,0 45,0 0))"}"#)
        .unwrap();
    let q_join = root.join("join.json");
    std::fs::write(&q_join, r#"{"type":"join","relations":["R","R"],"pred":"Intersects"}"#).unwrap();
    let schema = data.join("schema.json");
    let sics = data.join("sics.json");
    let csv = data.join("R.csv");
    let common = ["--schema", schema.to_str().unwrap(), "--data", csv.to_str().unwrap(), "--sics", sics.to_str().unwrap()];
    let mut compared = 0;
    for (name, extra) in [
        ("repair", vec![]),
        ("core", vec![]),
        ("cqa", vec!["--query", q_range.to_str().unwrap(), "--query", q_join.to_str().unwrap()]),
        ("cqa-repairs", vec!["--via", "repairs", "--query", q_range.to_str().unwrap()]),
    ] {
        let sub = name.split('-').next().unwrap();
        let mut outs = Vec::new();
        for threads in [Some("1"), None] {
            let dir = root.join(format!("{name}-{}", threads.unwrap_or("par")));
            let mut args = vec![sub];
            args.extend(common);
            args.extend(extra.iter().copied());
            args.extend(["--out", dir.to_str().unwrap()]);
            run(&args, threads)?;
            outs.push(files(&dir));
        }
        let strip = |fs: &[(String, Vec<u8>)]| -> Vec<(String, Vec<u8>)> {
            fs.iter()
                .map(|(n, b)| {
                    // The run manifest records the thread setting itself.
                    if n == "run.json" {
                        let mut v: serde_json::Value = serde_json::from_slice(b).unwrap();
                        v.as_object_mut().unwrap().remove("threads");
                        (n.clone(), v.to_string().into_bytes())
                    } else {
                        (n.clone(), b.clone())
                    }
                })
                .collect()
        };
        check(strip(&outs[0]) == strip(&outs[1]), || format!("`{name}` outputs differ between --threads 1 and parallel"))?;
        compared += outs[0].len();
    }
    Ok(format!("30 repair searches and {compared} output files identical"))
}
