//! Small hand-built instances with known answers.

use std::sync::Arc;

use spatial_cqa::constraints::{find_all_violations, parse_sics, DenialSIC};
use spatial_cqa::cqa_core::{core_direct, core_from_repairs};
use spatial_cqa::geometry::{geom_equal, GeometryConfig, Predicate, Region};
use spatial_cqa::model::{load_instance, Instance, RelationSchema, Row, Schema, Value, ValueType};
use spatial_cqa::query::{cqa_from_repairs, cqa_via_repairs, eval, JoinQuery, Query, RangeQuery};
use spatial_cqa::repair::{enumerate_repairs, RepairOptions};
use spatial_cqa::synthetic::{conflicting_tids, gen_synthetic, ConflictMode};

fn cfg() -> GeometryConfig {
    GeometryConfig::new(0.01, 1e-9).unwrap()
}

fn parcels_schema() -> Arc<Schema> {
    Arc::new(
        Schema::new(vec![
            RelationSchema::new(
                "LandP",
                &[("idl", ValueType::String), ("name", ValueType::String), ("owner", ValueType::String)],
                &["idl"],
            ),
            RelationSchema::new("Building", &[("idb", ValueType::String)], &["idb"]),
        ])
        .unwrap(),
    )
}

fn parcel(id: &str, g: Region) -> Row {
    Row::new("LandP", vec![id.into(), format!("n_{id}").as_str().into(), "o".into()], g)
}

fn building(id: &str, g: Region) -> Row {
    Row::new("Building", vec![id.into()], g)
}

/// Parcels may not internally intersect; buildings may not overlap parcels.
fn parcel_sics() -> Vec<DenialSIC> {
    parse_sics(
        r#"[
          {"relation":"LandP","pred":"iintersects"},
          {"atoms":[{"relation":"Building","vars":["b","s1"]},{"relation":"LandP","vars":["l","n","o","s2"]}],
           "topo":["Overlaps(s1, s2)"]}
        ]"#,
        &parcels_schema(),
    )
    .unwrap()
}

/// Three parcels, a building and a parcel nested inside the second parcel.
///
/// g1 touches g2; g3 overlaps g2 on `[8,10]×[0,4]`; g4 sits inside g2 on its
/// lower edge; building g5 sticks out of g1; building g6 lies inside g3 and
/// crosses into g2.
fn inconsistent_parcels() -> Instance {
    let rows = vec![
        parcel("idl1", Region::rect(0.0, 0.0, 4.0, 4.0)),
        parcel("idl2", Region::rect(4.0, 0.0, 10.0, 4.0)),
        parcel("idl3", Region::rect(8.0, 0.0, 14.0, 4.0)),
        parcel("idl4", Region::rect(5.0, 0.0, 7.0, 1.0)),
        building("idb1", Region::rect(1.0, 2.5, 3.0, 4.5)),
        building("idb2", Region::rect(9.5, 1.0, 11.0, 2.0)),
    ];
    load_instance(parcels_schema(), rows, None).unwrap()
}

fn tid_of(d: &Instance, key: &str) -> u64 {
    d.tuples().iter().find(|t| t.values[0] == Value::from(key)).unwrap().tid
}

#[test]
fn nested_parcel_instance_has_four_violations() {
    let d = inconsistent_parcels();
    let v = find_all_violations(&d, &parcel_sics(), &cfg()).unwrap();
    assert_eq!(v.len(), 4);
}

#[test]
fn nested_parcel_instance_has_two_minimal_repairs() {
    let c = cfg();
    let d = inconsistent_parcels();
    let set = enumerate_repairs(&d, &parcel_sics(), &c, &RepairOptions::default()).unwrap();
    assert_eq!(set.minimal_count(), 2);
    let g2 = tid_of(&d, "idl2");
    let g4 = tid_of(&d, "idl4");
    let g5 = tid_of(&d, "idb1");
    let mut emptied_g4 = 0;
    for r in set.minimal() {
        assert!((r.delta - 11.0).abs() < 1e-9, "delta {}", r.delta);
        assert!(geom_equal(&r.instance.get(g5).unwrap().region, &Region::rect(1.0, 2.5, 3.0, 4.0), &c));
        let g2r = &r.instance.get(g2).unwrap().region;
        assert!((g2r.area() - 14.0).abs() < 1e-9 || (g2r.area() - 16.0).abs() < 1e-9);
        emptied_g4 += r.instance.get(g4).unwrap().region.is_empty_set() as usize;
    }
    assert_eq!(emptied_g4, 1);
}

#[test]
fn nested_parcel_core_empties_one_geometry() {
    let c = cfg();
    let d = inconsistent_parcels();
    let set = enumerate_repairs(&d, &parcel_sics(), &c, &RepairOptions::default()).unwrap();
    let core = core_from_repairs(&set, &c, false).instance;
    let emptied: Vec<u64> = core.tuples().iter().filter(|t| t.region.is_empty_set()).map(|t| t.tid).collect();
    assert_eq!(emptied, vec![tid_of(&d, "idl4")]);
    let g2 = core.get(tid_of(&d, "idl2")).unwrap();
    let want = Region::rect(4.0, 0.0, 8.0, 4.0);
    let hole = Region::rect(5.0, 0.0, 7.0, 1.0);
    let want = spatial_cqa::geometry::difference(&want, &hole, &c);
    assert!(geom_equal(&g2.region, &want, &c));
    for key in ["idl1", "idl3", "idb2"] {
        let t = tid_of(&d, key);
        assert_eq!(core.get(t).unwrap().region, d.get(t).unwrap().region);
    }
}

#[test]
fn nested_parcel_range_answer_keeps_three_rows() {
    let c = cfg();
    let d = inconsistent_parcels();
    let q = Query::Range(RangeQuery {
        relation: "LandP".into(),
        pred: Predicate::IT,
        window: Region::rect(-1.0, -1.0, 15.0, 5.0),
        project: vec!["idl".into()],
    });
    let a = cqa_via_repairs(&q, &d, &parcel_sics(), &c, &RepairOptions::default()).unwrap();
    let ids: Vec<String> = a.rows.iter().map(|r| r.values[0].to_string()).collect();
    assert_eq!(ids, ["idl1", "idl2", "idl3"]);
    let orig = d.get(tid_of(&d, "idl2")).unwrap().region.area();
    let now = a.rows[1].regions[0].area();
    assert!(now < orig && (now - 14.0).abs() < 1e-9);
    let changes = a.relative_changes(&d);
    assert!((changes[1][0] - 10.0 / 24.0).abs() < 1e-12);
    assert_eq!(changes[0][0], 0.0);
}

fn query_figure() -> Instance {
    let s = Arc::new(
        Schema::new(vec![
            RelationSchema::new("LandP", &[("idl", ValueType::String)], &["idl"]),
            RelationSchema::new("Building", &[("idb", ValueType::String)], &["idb"]),
        ])
        .unwrap(),
    );
    let rows = vec![
        Row::new("LandP", vec!["idl1".into()], Region::rect(0.0, 0.0, 2.0, 1.0)),
        Row::new("LandP", vec!["idl2".into()], Region::rect(0.0, 1.0, 1.0, 2.0)),
        Row::new("LandP", vec!["idl3".into()], Region::rect(1.0, 1.0, 2.0, 2.0)),
        Row::new("Building", vec!["idb1".into()], Region::rect(0.2, 0.2, 0.6, 0.6)),
        Row::new("Building", vec!["idb2".into()], Region::rect(1.4, 1.4, 1.8, 1.8)),
    ];
    load_instance(s, rows, None).unwrap()
}

#[test]
fn range_and_touches_join_answers() {
    let c = cfg();
    let d = query_figure();
    let q1 = Query::Range(RangeQuery {
        relation: "Building".into(),
        pred: Predicate::IT,
        window: Region::rect(1.2, 1.2, 2.6, 2.6),
        project: vec!["idb".into()],
    });
    let a = eval(&q1, &d, &c).unwrap();
    assert_eq!(a.thematic(), vec![vec![Value::from("idb2")]]);
    assert_eq!(a.rows[0].regions[0], *d.get(5).unwrap().region);
    let q2 = Query::Join(JoinQuery {
        left: "LandP".into(),
        right: "LandP".into(),
        pred: Predicate::TO,
        project: (vec!["idl".into()], vec!["idl".into()]),
    });
    let pairs: Vec<(String, String)> =
        eval(&q2, &d, &c).unwrap().rows.iter().map(|r| (r.values[0].to_string(), r.values[1].to_string())).collect();
    let want = [("idl1", "idl2"), ("idl1", "idl3"), ("idl2", "idl1"), ("idl2", "idl3"), ("idl3", "idl1"), ("idl3", "idl2")];
    assert_eq!(pairs, want.map(|(a, b)| (a.to_string(), b.to_string())));
}

#[test]
fn touches_window_core_answers_but_repairs_do_not() {
    let c = cfg();
    let s = Arc::new(Schema::new(vec![RelationSchema::new("R", &[("id", ValueType::Integer)], &["id"])]).unwrap());
    let rows = vec![
        Row::new("R", vec![Value::Int(1)], Region::rect(0.0, 0.0, 2.0, 1.0)),
        Row::new("R", vec![Value::Int(2)], Region::rect(1.0, 0.0, 3.0, 1.0)),
    ];
    let d = load_instance(s.clone(), rows, None).unwrap();
    let sics = parse_sics(r#"{"relation":"R","pred":"iintersects"}"#, &s).unwrap();
    let q = Query::Range(RangeQuery {
        relation: "R".into(),
        pred: Predicate::TO,
        window: Region::rect(1.0, 0.2, 1.5, 0.8),
        project: vec!["id".into()],
    });
    let core = core_direct(&d, &sics, &c).unwrap();
    assert!(!eval(&q, &core.instance, &c).unwrap().is_empty());
    let set = enumerate_repairs(&d, &sics, &c, &RepairOptions::default()).unwrap();
    assert_eq!(set.minimal_count(), 2);
    // The window touches the shrunk first rectangle in one repair only.
    let per_repair: Vec<usize> = set.minimal().map(|r| eval(&q, &r.instance, &c).unwrap().len()).collect();
    assert_eq!(per_repair.iter().filter(|&&n| n > 0).count(), 1);
    assert!(cqa_from_repairs(&q, &set, &c).unwrap().is_empty());
}

#[test]
fn generator_counts() {
    let d = gen_synthetic(100, 10.0, ConflictMode::IIntersects, 9).unwrap();
    let sics = [ConflictMode::IIntersects.denial()];
    let c = d.default_config();
    assert_eq!(conflicting_tids(&d, &sics, &c).len(), 10);
    assert_eq!(find_all_violations(&d, &sics, &c).unwrap().len(), 5);
    let d = gen_synthetic(5000, 5.0, ConflictMode::Equals, 9).unwrap();
    let c = d.default_config();
    assert_eq!(conflicting_tids(&d, &[ConflictMode::Equals.denial()], &c).len(), 250);
    for mode in ConflictMode::ALL {
        let d = gen_synthetic(400, 0.0, mode, 1).unwrap();
        assert!(conflicting_tids(&d, &[mode.denial()], &d.default_config()).is_empty());
    }
}
