//! Timing harness over generated instances: core computation, simple range and
//! join queries, and their consistent counterparts through the core.

use std::io::Write;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::constraints::DenialSIC;
use crate::cqa_core::{core_direct, cqa_via_core, CoreError};
use crate::geometry::Region;
use crate::model::Instance;
use crate::query::{eval, JoinQuery, Query, RangeQuery};
use crate::synthetic::{conflicting_tids, gen_synthetic, random_window, ConflictMode, GenError, RELATION};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Gen(#[from] GenError),
    #[error(transparent)]
    Core(#[from] CoreError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub sizes: Vec<usize>,
    pub pcts: Vec<f64>,
    pub modes: Vec<ConflictMode>,
    /// Window side as a fraction of the extent side.
    pub window_fracs: Vec<f64>,
    /// Range queries per measurement.
    pub windows: usize,
    pub runs: usize,
    pub seed: u64,
    pub joins: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1000, 2000, 4000, 8000],
            pcts: vec![10.0],
            modes: ConflictMode::ALL.to_vec(),
            window_fracs: vec![0.01],
            windows: 20,
            runs: 5,
            seed: 42,
            joins: true,
        }
    }
}

/// One measurement; times are medians in milliseconds.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BenchRow {
    pub mode: String,
    pub tuples: usize,
    pub conflict_pct: f64,
    pub conflicting: usize,
    pub window_frac: f64,
    pub core_ms: f64,
    pub range_ms: f64,
    pub range_cqa_ms: f64,
    pub range_answers: usize,
    pub range_cqa_answers: usize,
    pub join_ms: f64,
    pub join_cqa_ms: f64,
    pub join_answers: usize,
    pub join_cqa_answers: usize,
}

impl BenchRow {
    pub fn range_ratio(&self) -> f64 {
        self.range_cqa_ms / self.range_ms
    }

    pub fn join_ratio(&self) -> f64 {
        self.join_cqa_ms / self.join_ms
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), BenchError> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r)?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn select(&self, mode: ConflictMode) -> impl Iterator<Item = &BenchRow> {
        let m = mode.to_string();
        self.rows.iter().filter(move |r| r.mode == m)
    }
}

/// Shortest timed batch; faster calls are repeated until a batch spans this.
const MIN_BATCH: Duration = Duration::from_millis(100);

/// Calls per batch, sized from the duration of one untimed call.
fn batch_size(once: Duration) -> usize {
    (MIN_BATCH.as_secs_f64() / once.as_secs_f64().max(1e-9)).ceil().clamp(1.0, 10_000.0) as usize
}

/// Wall time per call over one batch, in milliseconds.
fn batch_ms(per_batch: usize, mut f: impl FnMut()) -> f64 {
    let t = Instant::now();
    for _ in 0..per_batch {
        f();
    }
    t.elapsed().as_secs_f64() * 1e3 / per_batch as f64
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

/// Median over `runs` timed batches of the wall time per call, in
/// milliseconds, and the last result. An untimed first call sizes the batches.
pub fn time_median<T>(runs: usize, mut f: impl FnMut() -> T) -> (f64, T) {
    let t = Instant::now();
    let mut last = f();
    let per_batch = batch_size(t.elapsed());
    let times = (0..runs.max(1)).map(|_| batch_ms(per_batch, || last = f())).collect();
    (median(times), last)
}

fn range(window: Region) -> Query {
    Query::Range(RangeQuery { relation: RELATION.into(), pred: crate::geometry::Predicate::IT, window, project: vec!["id".into()] })
}

fn self_join() -> Query {
    Query::Join(JoinQuery {
        left: RELATION.into(),
        right: RELATION.into(),
        pred: crate::geometry::Predicate::IT,
        project: (vec!["id".into()], vec!["id".into()]),
    })
}

/// One output row with the data it is measured on.
struct Case {
    row: BenchRow,
    d: Arc<Instance>,
    sics: Arc<Vec<DenialSIC>>,
    windows: Vec<Query>,
    /// Index of the case whose core and join timings this row shares.
    leader: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum Task {
    Core,
    Join,
    JoinCqa,
    Range,
    RangeCqa,
}

/// Runs one task once; returns its answer count.
fn perform(c: &Case, task: Task) -> Result<usize, BenchError> {
    let gc = c.d.default_config();
    let (d, sics) = (&*c.d, &c.sics[..]);
    Ok(match task {
        Task::Core => core_direct(d, sics, &gc)?.instance.len(),
        Task::Join => eval(&self_join(), d, &gc).map_err(CoreError::from)?.len(),
        Task::JoinCqa => cqa_via_core(&self_join(), d, sics, &gc)?.len(),
        Task::Range => c.windows.iter().map(|q| eval(q, d, &gc).map(|a| a.len())).sum::<Result<usize, _>>().map_err(CoreError::from)?,
        Task::RangeCqa => c.windows.iter().map(|q| cqa_via_core(q, d, sics, &gc).map(|a| a.len())).sum::<Result<usize, _>>()?,
    })
}

/// Builds every instance first, then takes the timing rounds across all
/// cases in turn, so slow drift of the machine hits every row alike.
pub fn run_bench(cfg: &BenchConfig) -> Result<BenchReport, BenchError> {
    let mut cases: Vec<Case> = Vec::new();
    for &mode in &cfg.modes {
        let sics = Arc::new(vec![mode.denial()]);
        for &pct in &cfg.pcts {
            for &n in &cfg.sizes {
                let d = Arc::new(gen_synthetic(n, pct, mode, cfg.seed)?);
                let conflicting = conflicting_tids(&d, &sics, &d.default_config()).len();
                let extent = d.bbox();
                let leader = cases.len();
                for &frac in &cfg.window_fracs {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (n as u64) ^ frac.to_bits());
                    let windows = (0..cfg.windows).map(|_| range(random_window(&mut rng, &extent, frac))).collect();
                    let row = BenchRow {
                        mode: mode.to_string(),
                        tuples: n,
                        conflict_pct: pct,
                        conflicting,
                        window_frac: frac,
                        core_ms: 0.0,
                        range_ms: 0.0,
                        range_cqa_ms: 0.0,
                        range_answers: 0,
                        range_cqa_answers: 0,
                        join_ms: 0.0,
                        join_cqa_ms: 0.0,
                        join_answers: 0,
                        join_cqa_answers: 0,
                    };
                    cases.push(Case { row, d: d.clone(), sics: sics.clone(), windows, leader });
                }
            }
        }
    }
    let mut tasks: Vec<(usize, Task)> = Vec::new();
    for (i, c) in cases.iter().enumerate() {
        if c.leader == i {
            tasks.push((i, Task::Core));
            if cfg.joins {
                tasks.extend([(i, Task::Join), (i, Task::JoinCqa)]);
            }
        }
        tasks.extend([(i, Task::Range), (i, Task::RangeCqa)]);
    }
    let mut batches = Vec::with_capacity(tasks.len());
    for &(i, task) in &tasks {
        let t = Instant::now();
        let answers = perform(&cases[i], task)?;
        batches.push(batch_size(t.elapsed()));
        let row = &mut cases[i].row;
        match task {
            Task::Core => {}
            Task::Join => row.join_answers = answers,
            Task::JoinCqa => row.join_cqa_answers = answers,
            Task::Range => row.range_answers = answers,
            Task::RangeCqa => row.range_cqa_answers = answers,
        }
    }
    let mut samples = vec![Vec::with_capacity(cfg.runs); tasks.len()];
    for _ in 0..cfg.runs.max(1) {
        for (k, &(i, task)) in tasks.iter().enumerate() {
            samples[k].push(batch_ms(batches[k], || {
                let _ = perform(&cases[i], task);
            }));
        }
    }
    for (&(i, task), xs) in tasks.iter().zip(samples) {
        let ms = median(xs);
        let row = &mut cases[i].row;
        match task {
            Task::Core => row.core_ms = ms,
            Task::Join => row.join_ms = ms,
            Task::JoinCqa => row.join_cqa_ms = ms,
            Task::Range => row.range_ms = ms,
            Task::RangeCqa => row.range_cqa_ms = ms,
        }
    }
    let rows: Vec<BenchRow> = (0..cases.len())
        .map(|i| {
            let lead = &cases[cases[i].leader].row;
            BenchRow {
                core_ms: lead.core_ms,
                join_ms: lead.join_ms,
                join_cqa_ms: lead.join_cqa_ms,
                join_answers: lead.join_answers,
                join_cqa_answers: lead.join_cqa_answers,
                ..cases[i].row.clone()
            }
        })
        .collect();
    Ok(BenchReport { rows })
}
