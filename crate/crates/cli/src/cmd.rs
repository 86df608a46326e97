//! Subcommand bodies.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use serde_json::json;
use spatial_cqa::bench::{run_bench, BenchConfig};
use spatial_cqa::constraints::{as_core_sics, find_all_violations, read_sics, DenialSIC};
use spatial_cqa::cqa_core::{
    core_direct, core_from_repairs, cqa_on_core, cqa_via_core, emit_core_sql_all, CoreInstance, SqlOptions,
};
use spatial_cqa::geometry::{covered_by, GeometryConfig};
use spatial_cqa::model::{write_csv, write_geojson, Correlation, Instance};
use spatial_cqa::query::{answers_to_csv, answers_to_geojson, cqa_from_repairs, read_query, AnswerSet, Query};
use spatial_cqa::repair::{enumerate_repairs, validate_shrink_repair, write_repairs, RepairLimits, RepairOptions, RepairSet};
use spatial_cqa::synthetic::{conflicting_count, conflicting_tids, gen_synthetic, synthetic_schema, ConflictMode, RELATION};

use crate::input::{self, Loaded};
use crate::{Format, Inputs, Route};

fn repair_options(inputs: &Inputs, parallel: bool, all_orderings: bool) -> RepairOptions {
    let mut limits = RepairLimits::default();
    if let Some(n) = inputs.limit_nodes {
        limits.max_nodes = n;
    }
    RepairOptions { limits, parallel, all_orderings }
}

fn describe(d: &Instance, tid: u64) -> String {
    match d.get(tid) {
        Some(t) => {
            let key: Vec<String> = d.key_of(t).iter().map(|v| v.to_string()).collect();
            format!("{}({})", t.relation, key.join(","))
        }
        None => format!("#{tid}"),
    }
}

pub fn check(inputs: &Inputs, report: Option<&Path>) -> Result<ExitCode> {
    let Loaded { instance, sics, cfg } = input::load(inputs)?;
    let violations = find_all_violations(&instance, &sics, &cfg)?;
    let mut listing = Vec::new();
    for v in &violations {
        let who: Vec<String> = v.tids.iter().map(|&t| describe(&instance, t)).collect();
        println!("violation of {}: {}", sics[v.sic].label, who.join(", "));
        listing.push(json!({ "sic": sics[v.sic].label, "tids": v.tids, "tuples": who }));
    }
    println!("{} violation(s) over {} tuple(s)", violations.len(), instance.len());
    let doc = json!({ "consistent": violations.is_empty(), "violations": listing });
    println!("{}", serde_json::to_string(&doc)?);
    if let Some(p) = report {
        fs::write(p, serde_json::to_string_pretty(&doc)?)?;
    }
    Ok(if violations.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

/// Every exported repair must be consistent and shrink each geometry.
fn verify_repairs(set: &RepairSet, sics: &[DenialSIC], cfg: &GeometryConfig, all_leaves: bool) -> Result<()> {
    let f = Correlation::identity(&set.original);
    for (i, r) in set.repairs.iter().enumerate().filter(|(_, r)| all_leaves || r.minimal) {
        if !validate_shrink_repair(&set.original, &r.instance, &f, sics, cfg) {
            bail!("invariant failure: repair {} is not a consistent shrink of the input", i + 1);
        }
    }
    if set.minimal_count() == 0 && !set.repairs.is_empty() {
        bail!("invariant failure: no minimal repair among {} leaves", set.repairs.len());
    }
    Ok(())
}

pub fn repair(inputs: &Inputs, out: &Path, all_leaves: bool, all_orderings: bool, parallel: bool) -> Result<ExitCode> {
    let Loaded { instance, sics, cfg } = input::load(inputs)?;
    let set = enumerate_repairs(&instance, &sics, &cfg, &repair_options(inputs, parallel, all_orderings))?;
    verify_repairs(&set, &sics, &cfg, all_leaves)?;
    let m = write_repairs(&set, out, all_leaves)?;
    println!(
        "{} minimal repair(s), {} file(s), {} search node(s) -> {}",
        m.minimal_count,
        m.repairs.len(),
        m.nodes,
        out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn use_core_route(via: Route, eligible: bool, what: &str) -> Result<bool> {
    match via {
        Route::Auto => Ok(eligible),
        Route::Core if !eligible => bail!("{what} cannot go through the core"),
        Route::Core => Ok(true),
        Route::Repairs => Ok(false),
    }
}

fn verify_core(d: &Instance, core: &CoreInstance, cfg: &GeometryConfig) -> Result<()> {
    for t in d.tuples() {
        let c = core.instance.get(t.tid).context("core lost a tuple")?;
        if !covered_by(&c.region, &t.region, cfg) {
            bail!("invariant failure: core geometry of {} exceeds the original", describe(d, t.tid));
        }
    }
    Ok(())
}

fn write_instance(d: &Instance, dir: &Path, stem: &str, format: Format) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    match format {
        Format::Geojson => {
            let p = dir.join(format!("{stem}.geojson"));
            fs::write(&p, write_geojson(d, None)?.to_string())?;
            written.push(p);
        }
        Format::Csv => {
            for rel in &d.schema().relations {
                let p = dir.join(format!("{stem}_{}.csv", rel.name));
                write_csv(d, &rel.name, fs::File::create(&p)?)?;
                written.push(p);
            }
        }
    }
    Ok(written)
}

pub fn core(inputs: &Inputs, out: &Path, format: Format, via: Route, parallel: bool) -> Result<ExitCode> {
    let Loaded { instance, sics, cfg } = input::load(inputs)?;
    let eligible = as_core_sics(&sics, instance.schema()).is_some();
    let direct = use_core_route(via, eligible, "a constraint set that is not single-relation IIntersects/Intersects/Equals")?;
    let core = if direct {
        core_direct(&instance, &sics, &cfg)?
    } else {
        let set = enumerate_repairs(&instance, &sics, &cfg, &repair_options(inputs, parallel, false))?;
        verify_repairs(&set, &sics, &cfg, false)?;
        core_from_repairs(&set, &cfg, false)
    };
    verify_core(&instance, &core, &cfg)?;
    let files = write_instance(&core.instance, out, "core", format)?;
    let emptied = core.instance.tuples().iter().filter(|t| t.region.is_empty_set()).count();
    let changed = instance
        .tuples()
        .iter()
        .zip(core.instance.tuples())
        .filter(|(a, b)| !std::sync::Arc::ptr_eq(&a.region, &b.region))
        .count();
    let manifest = json!({
        "provenance": core.provenance,
        "tuples": instance.len(),
        "changed": changed,
        "emptied": emptied,
        "d": cfg.d,
        "epsilon": cfg.area_epsilon,
        "files": files.iter().map(|p| p.file_name().unwrap().to_string_lossy()).collect::<Vec<_>>(),
    });
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    println!("core of {} tuple(s): {changed} changed, {emptied} emptied -> {}", instance.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

pub struct CqaArgs {
    pub queries: Vec<PathBuf>,
    pub out: Option<PathBuf>,
    pub format: Format,
    pub via: Route,
    pub materialize: bool,
    pub explain: bool,
    pub parallel: bool,
    pub threads: usize,
}

fn render(a: &AnswerSet, explain: Option<&[Vec<f64>]>, format: Format) -> Result<Vec<u8>> {
    Ok(match format {
        Format::Csv => {
            let mut buf = Vec::new();
            answers_to_csv(a, explain, &mut buf)?;
            buf
        }
        Format::Geojson => answers_to_geojson(a, explain).to_string().into_bytes(),
    })
}

pub fn cqa(inputs: &Inputs, args: &CqaArgs) -> Result<ExitCode> {
    let Loaded { instance, sics, cfg } = input::load(inputs)?;
    let schema = instance.schema().clone();
    let core_sics = as_core_sics(&sics, &schema).is_some();
    let mut repairs: Option<RepairSet> = None;
    let mut materialized: Option<CoreInstance> = None;
    let mut runs = Vec::new();
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
    }
    for (i, path) in args.queries.iter().enumerate() {
        let q: Query = read_query(path, &schema).with_context(|| format!("reading query {}", path.display()))?;
        let basic = q.is_basic();
        let via_core = use_core_route(args.via, basic && core_sics, "this query and constraint set")?;
        let answers = if via_core {
            if args.materialize {
                if materialized.is_none() {
                    let c = core_direct(&instance, &sics, &cfg)?;
                    verify_core(&instance, &c, &cfg)?;
                    materialized = Some(c);
                }
                cqa_on_core(&q, materialized.as_ref().expect("just set"), &cfg)?
            } else {
                cqa_via_core(&q, &instance, &sics, &cfg)?
            }
        } else {
            if repairs.is_none() {
                let set = enumerate_repairs(&instance, &sics, &cfg, &repair_options(inputs, args.parallel, false))?;
                verify_repairs(&set, &sics, &cfg, false)?;
                repairs = Some(set);
            }
            cqa_from_repairs(&q, repairs.as_ref().expect("just set"), &cfg)?
        };
        let changes = args.explain.then(|| answers.relative_changes(&instance));
        let bytes = render(&answers, changes.as_deref(), args.format)?;
        let output = match &args.out {
            Some(dir) => {
                let name = if args.queries.len() == 1 {
                    format!("answers.{}", args.format.extension())
                } else {
                    format!("answers_{}.{}", i + 1, args.format.extension())
                };
                fs::write(dir.join(&name), &bytes)?;
                Some(name)
            }
            None => {
                std::io::stdout().write_all(&bytes)?;
                None
            }
        };
        runs.push(json!({
            "query": path.display().to_string(),
            "path": if via_core { "core" } else { "repairs" },
            "basic": basic,
            "core_sics": core_sics,
            "rows": answers.len(),
            "output": output,
        }));
    }
    let mut core_file = None;
    if let (Some(dir), Some(c)) = (&args.out, &materialized) {
        let files = write_instance(&c.instance, dir, "core", args.format)?;
        core_file = Some(files.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect::<Vec<_>>());
    }
    let manifest = json!({
        "queries": runs,
        "materialized": core_file,
        "explain": args.explain,
        "threads": args.threads,
        "d": cfg.d,
        "epsilon": cfg.area_epsilon,
        "repair_nodes": repairs.as_ref().map(|s| s.nodes),
    });
    match &args.out {
        Some(dir) => fs::write(dir.join("run.json"), serde_json::to_string_pretty(&manifest)?)?,
        None => eprintln!("{}", serde_json::to_string(&manifest)?),
    }
    Ok(ExitCode::SUCCESS)
}

pub fn sqlgen(
    schema_path: &Path,
    sics_path: &Path,
    d: String,
    all_attributes: bool,
    materialize: bool,
    out: Option<&Path>,
) -> Result<ExitCode> {
    let schema = input::schema(schema_path)?;
    let sics = read_sics(sics_path, &schema)?;
    let Some(core) = as_core_sics(&sics, &schema) else {
        bail!("SQL views exist only for single-relation IIntersects/Intersects/Equals constraints");
    };
    let pairs = core
        .into_iter()
        .map(|s| {
            let rel = schema.relation(&s.relation)?.clone();
            Ok((s, rel))
        })
        .collect::<Result<Vec<_>>>()?;
    let opts = SqlOptions { distance: d, all_attributes, view_name: None };
    let mut sql = emit_core_sql_all(&pairs, &opts);
    if materialize {
        sql = sql.replace("CREATE VIEW", "CREATE MATERIALIZED VIEW");
    }
    match out {
        Some(p) => fs::write(p, sql)?,
        None => print!("{sql}"),
    }
    Ok(ExitCode::SUCCESS)
}

pub fn gen(n: usize, pct: f64, mode: &str, seed: u64, out: &Path, format: Format) -> Result<ExitCode> {
    let mode: ConflictMode = mode.parse()?;
    let d = gen_synthetic(n, pct, mode, seed)?;
    fs::create_dir_all(out)?;
    let data = out.join(format!("{RELATION}.{}", format.extension()));
    match format {
        Format::Csv => write_csv(&d, RELATION, fs::File::create(&data)?)?,
        Format::Geojson => fs::write(&data, write_geojson(&d, Some(RELATION))?.to_string())?,
    }
    fs::write(out.join("schema.json"), serde_json::to_string_pretty(&*synthetic_schema())?)?;
    let sic = json!([{ "relation": RELATION, "key": ["id"], "pred": mode.predicate().name() }]);
    fs::write(out.join("sics.json"), serde_json::to_string_pretty(&sic)?)?;
    let cfg = d.default_config();
    if conflicting_tids(&d, &[mode.denial()], &cfg).len() != conflicting_count(n, pct) {
        bail!("invariant failure: generated instance disagrees with the requested conflict percentage");
    }
    println!("{n} tuple(s), {mode} conflicts at {pct}% -> {}", out.display());
    Ok(ExitCode::SUCCESS)
}

pub fn bench(cfg: &BenchConfig, out: Option<&Path>) -> Result<ExitCode> {
    let report = run_bench(cfg)?;
    match out {
        Some(p) => report.write_csv(fs::File::create(p)?)?,
        None => report.write_csv(std::io::stdout())?,
    }
    Ok(ExitCode::SUCCESS)
}
