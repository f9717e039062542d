//! Presets and config-driven runs producing result records and plot-ready
//! tables.
//!
//! Everything written to CSV and JSON is a deterministic function of the
//! config and the seed; wall times go to a separate `timings.csv`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::bowen::{metric_entropy_estimate, BowenConfig, EntropyEstimate};
use crate::config::{
    BowenExperiment, CellsConfig, CoverExperiment, ExperimentConfig, ExperimentKind, Expectation,
    InfinityConfig, JordanExperiment, MeasureConfig, MeasureExperiment, OpenSetConfig, PartitionConfig,
    RegionConfig, ScheduleConfig, SystemConfig, SCHEMA_VERSION,
};
use crate::cover::{covering_entropy, CoverEntropyEstimate, CoveringSpec};
use crate::dynamics::{MapSpec, MetricSpec, SquareMatrix, StatePoint};
use crate::error::{EntropyError, Result};
use crate::linear::{classical_entropy, jordan_multiplicative, recurrence_oracle, recurrent_set, JordanConfig};
use crate::measure::{lifted_identity, measure_entropy_estimate, refined_entropy, FinitePartition, InvariantMeasure};
use crate::nilpotent::{
    automorphism_apply, bch_product, covering_projection_check, exp_algebra, exp_conjugacy_check, log_group,
    AlgebraAutomorphism, HeisenbergAlgebraElement, HeisenbergGroupElement,
};
use crate::setcover::SolverConfig;

pub const PRESETS: [&str; 8] = [
    "doubling-bowen",
    "doubling-cover",
    "linear-euclid-vs-compactified",
    "jordan-battery",
    "variational-shift",
    "lifted-measure",
    "heisenberg-zero",
    "counterexample-circle",
];

pub const DEFAULT_SEED: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Overrides the config seed.
    pub seed: Option<u64>,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
    Both,
}

/// One assertion or measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRecord {
    pub experiment: String,
    pub record: String,
    pub parameters: String,
    /// `NaN` when no value could be computed.
    pub value: f64,
    pub passed: bool,
    pub diagnostics: String,
    #[serde(skip)]
    pub wall_seconds: f64,
}

/// A fixed-column table, written as `<name>.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub id: String,
    pub seed: u64,
    pub records: Vec<ResultRecord>,
    pub tables: Vec<Table>,
}

#[derive(Serialize)]
struct Summary<'a> {
    schema_version: u32,
    experiment: &'a str,
    seed: u64,
    passed: bool,
    failures: Vec<&'a str>,
    records: &'a [ResultRecord],
    tables: Vec<&'a str>,
}

impl RunOutput {
    pub fn passed(&self) -> bool {
        self.records.iter().all(|r| r.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ResultRecord> {
        self.records.iter().filter(|r| !r.passed)
    }

    pub fn records_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(RECORD_COLUMNS).map_err(io)?;
        for r in &self.records {
            w.write_record([
                r.experiment.as_str(),
                &r.record,
                &r.parameters,
                &num(r.value),
                if r.passed { "true" } else { "false" },
                &r.diagnostics,
            ])
            .map_err(io)?;
        }
        finish(w)
    }

    pub fn table_csv(table: &Table) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&table.header).map_err(io)?;
        for row in &table.rows {
            w.write_record(row).map_err(io)?;
        }
        finish(w)
    }

    pub fn summary_json(&self) -> Result<String> {
        let s = Summary {
            schema_version: SCHEMA_VERSION,
            experiment: &self.id,
            seed: self.seed,
            passed: self.passed(),
            failures: self.failures().map(|r| r.record.as_str()).collect(),
            records: &self.records,
            tables: self.tables.iter().map(|t| t.name.as_str()).collect(),
        };
        let mut text = serde_json::to_string_pretty(&s).map_err(io)?;
        text.push('\n');
        Ok(text)
    }

    /// Writes the outputs into `dir`, returning the paths written.
    pub fn write(&self, dir: &Path, format: OutputFormat) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir).map_err(io)?;
        let mut files: Vec<(String, String)> = Vec::new();
        if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
            files.push(("records.csv".into(), self.records_csv()?));
            for t in &self.tables {
                files.push((format!("{}.csv", t.name), Self::table_csv(t)?));
            }
        }
        if matches!(format, OutputFormat::Json | OutputFormat::Both) {
            files.push(("summary.json".into(), self.summary_json()?));
        }
        let mut timings = String::from("record,wall_seconds\n");
        for r in &self.records {
            let _ = writeln!(timings, "{},{:.6}", r.record, r.wall_seconds);
        }
        files.push(("timings.csv".into(), timings));
        files
            .into_iter()
            .map(|(name, text)| {
                let path = dir.join(name);
                std::fs::write(&path, text).map_err(io)?;
                Ok(path)
            })
            .collect()
    }
}

pub const RECORD_COLUMNS: [&str; 6] = ["experiment", "record", "parameters", "value", "passed", "diagnostics"];
const BOWEN_CELL_COLUMNS: [&str; 8] = ["run", "eps", "n", "count", "raw_count", "lower_bound", "exact", "resolved"];
const BOWEN_SLOPE_COLUMNS: [&str; 5] = ["run", "eps", "slope", "fit_points", "rms_residual"];
const COVER_COLUMNS: [&str; 7] = ["run", "n", "refined_elements", "count", "lower_bound", "exact", "log_count"];
const MEASURE_COLUMNS: [&str; 4] = ["run", "n", "entropy", "cells"];
const JORDAN_COLUMNS: [&str; 9] =
    ["run", "index", "dim", "recomposition", "commutation", "hyperbolic", "unipotent", "elliptic", "passed"];
const RECURRENCE_COLUMNS: [&str; 8] = [
    "case",
    "label",
    "dim",
    "expected_dim",
    "recurrent_dim",
    "basis_recurrent",
    "complement_nonrecurrent",
    "agree",
];
const VARIATIONAL_COLUMNS: [&str; 5] = ["p", "n", "entropy", "closed_form", "rate"];
const LIFTED_COLUMNS: [&str; 11] =
    ["infinity", "c", "n", "lifted_entropy", "base_entropy", "a", "b", "phi_a", "rhs", "residual", "bounded"];

fn io(e: impl std::fmt::Display) -> EntropyError {
    EntropyError::Io(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(io)?;
    String::from_utf8(bytes).map_err(io)
}

/// Shortest round-trip form; `NaN` for missing values.
fn num(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:?}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, num)
}

fn flag(b: bool) -> String {
    b.to_string()
}

struct Collector {
    id: String,
    records: Vec<ResultRecord>,
    tables: Vec<Table>,
    clock: Instant,
}

impl Collector {
    fn new(id: &str) -> Self {
        Self { id: id.into(), records: Vec::new(), tables: Vec::new(), clock: Instant::now() }
    }

    /// Records an assertion; its wall time runs from the previous record.
    fn record(&mut self, name: &str, parameters: &str, value: f64, passed: bool, diagnostics: String) {
        let wall = self.clock.elapsed().as_secs_f64();
        self.clock = Instant::now();
        self.records.push(ResultRecord {
            experiment: self.id.clone(),
            record: name.into(),
            parameters: parameters.into(),
            value,
            passed,
            diagnostics,
            wall_seconds: wall,
        });
    }

    fn rows(&mut self, table: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) {
        let idx = match self.tables.iter().position(|t| t.name == table) {
            Some(i) => i,
            None => {
                self.tables.push(Table {
                    name: table.into(),
                    header: header.iter().map(|s| s.to_string()).collect(),
                    rows: Vec::new(),
                });
                self.tables.len() - 1
            }
        };
        self.tables[idx].rows.extend(rows);
    }

    fn finish(self, seed: u64) -> RunOutput {
        RunOutput { id: self.id, seed, records: self.records, tables: self.tables }
    }
}

/// Loads, validates and runs a config file.
pub fn run_config(path: &Path, opts: RunOptions) -> Result<RunOutput> {
    let cfg = crate::config::load_config(path)?;
    run(&cfg, opts)
}

pub fn run_preset(name: &str, opts: RunOptions) -> Result<RunOutput> {
    if !PRESETS.contains(&name) {
        return Err(EntropyError::config("preset", format!("unknown preset {name:?}; expected one of {}", PRESETS.join(", "))));
    }
    let cfg = ExperimentConfig {
        schema_version: SCHEMA_VERSION,
        id: None,
        seed: None,
        experiment: ExperimentKind::Preset { name: name.into() },
    };
    run(&cfg, opts)
}

pub fn run(cfg: &ExperimentConfig, opts: RunOptions) -> Result<RunOutput> {
    crate::config::validate(cfg)?;
    let seed = opts.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let go = || dispatch(cfg, seed);
    match opts.threads {
        None => go(),
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(io)?.install(go),
    }
}

fn dispatch(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let default_id = match &cfg.experiment {
        ExperimentKind::Preset { name } => name.as_str(),
        ExperimentKind::Bowen(_) => "bowen",
        ExperimentKind::Cover(_) => "cover",
        ExperimentKind::Measure(_) => "measure",
        ExperimentKind::Jordan(_) => "jordan",
    };
    let mut c = Collector::new(cfg.id.as_deref().unwrap_or(default_id));
    match &cfg.experiment {
        ExperimentKind::Preset { name } => preset(&mut c, name, seed)?,
        ExperimentKind::Bowen(b) => {
            bowen_run(&mut c, "bowen", b)?;
        }
        ExperimentKind::Cover(k) => {
            cover_run(&mut c, "cover", k)?;
        }
        ExperimentKind::Measure(m) => measure_run(&mut c, "measure", m)?,
        ExperimentKind::Jordan(j) => jordan_run(&mut c, "jordan", j)?,
    }
    Ok(c.finish(seed))
}

fn preset(c: &mut Collector, name: &str, seed: u64) -> Result<()> {
    match name {
        "doubling-bowen" => bowen_run(c, "bowen", &doubling_bowen()).map(drop),
        "doubling-cover" => cover_run(c, "cover", &doubling_cover()).map(drop),
        "linear-euclid-vs-compactified" => linear_contrast(c),
        "jordan-battery" => jordan_battery(c, seed),
        "variational-shift" => variational_shift(c),
        "lifted-measure" => lifted_measure(c),
        "heisenberg-zero" => heisenberg_zero(c, seed),
        "counterexample-circle" => counterexample_circle(c, seed),
        _ => Err(EntropyError::config("experiment.name", format!("unknown preset {name:?}"))),
    }
}

/// The explicit config equivalent to a preset, for presets that are a
/// single Bowen or covering experiment.
pub fn preset_config(name: &str) -> Option<ExperimentConfig> {
    let experiment = match name {
        "doubling-bowen" => ExperimentKind::Bowen(doubling_bowen()),
        "doubling-cover" => ExperimentKind::Cover(doubling_cover()),
        _ => return None,
    };
    Some(ExperimentConfig { schema_version: SCHEMA_VERSION, id: Some(name.into()), seed: None, experiment })
}

const LOG2: f64 = std::f64::consts::LN_2;

fn within_ten_percent(x: f64) -> Expectation {
    Expectation::within(0.9 * x, 1.1 * x)
}

fn doubling_bowen() -> BowenExperiment {
    BowenExperiment {
        system: SystemConfig::CircleDoubling,
        metric: MetricSpec::CircleArc,
        region: RegionConfig::CircleGrid { points: 4096 },
        schedule: ScheduleConfig { eps_list: vec![2f64.powi(-5), 2f64.powi(-6), 2f64.powi(-7)], n_min: 4, n_max: 12 },
        mode: crate::bowen::SpanningMode::Greedy,
        min_occupancy: None,
        expect: Some(Expectation::within(0.62, 0.76)),
    }
}

fn doubling_cover() -> CoverExperiment {
    CoverExperiment {
        system: SystemConfig::CircleDoubling,
        elements: (0..3).map(|i| OpenSetConfig::Arc((i as f64 / 3.0, i as f64 / 3.0 + 0.4))).collect(),
        universe: RegionConfig::CircleGrid { points: 1 << 16 },
        n_max: 12,
        node_budget: None,
        max_unbounded: None,
        expect: Some(within_ten_percent(LOG2)),
    }
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| num(*x)).collect::<Vec<_>>().join("|")
}

fn bowen_run(c: &mut Collector, label: &str, b: &BowenExperiment) -> Result<EntropyEstimate> {
    let map = b.system.build()?;
    let region = b.region.build()?;
    let schedule = b.schedule.build()?;
    let mut cfg = BowenConfig { mode: b.mode, ..BowenConfig::default() };
    if let Some(k) = b.min_occupancy {
        cfg.min_occupancy = k;
    }
    let est = metric_entropy_estimate(&map, &b.metric, &region, &schedule, &cfg)?;
    let eps: Vec<f64> = schedule.entries().iter().map(|e| e.eps).collect();
    let params = format!(
        "region={};eps={};n={}..={};mode={}",
        region.description(),
        join(&eps),
        b.schedule.n_min,
        b.schedule.n_max,
        match b.mode {
            crate::bowen::SpanningMode::Greedy => "greedy",
            crate::bowen::SpanningMode::ExactSmall => "exact_small",
        }
    );
    c.rows(
        "bowen_cells",
        &BOWEN_CELL_COLUMNS,
        est.cells.iter().map(|cell| {
            vec![
                label.into(),
                num(cell.eps),
                cell.n.to_string(),
                cell.count.to_string(),
                cell.raw.count.to_string(),
                cell.raw.lower_bound.to_string(),
                flag(cell.raw.exact),
                flag(cell.resolved),
            ]
        }),
    );
    c.rows(
        "bowen_slopes",
        &BOWEN_SLOPE_COLUMNS,
        est.slopes.iter().map(|s| {
            vec![label.into(), num(s.eps), opt(s.slope), s.fit_points.to_string(), num(s.rms_residual)]
        }),
    );
    let d = &est.diagnostics;
    let resolved = est.slopes.iter().filter(|s| s.slope.is_some()).count();
    let diag = format!(
        "resolved_eps={resolved}/{};unresolved_cells={};n_violations={};eps_violations={};below_resolution={}",
        est.slopes.len(),
        d.unresolved_cells,
        d.n_monotonicity_violations,
        d.eps_monotonicity_violations,
        d.below_resolution
    );
    let value = est.value.unwrap_or(f64::NAN);
    let (passed, diag) = match &b.expect {
        Some(e) => (e.admits(value), format!("{diag};expected {}", e.describe())),
        None => (value.is_finite(), diag),
    };
    c.record(&format!("{label}.estimate"), &params, value, passed, diag);
    Ok(est)
}

fn cover_run(c: &mut Collector, label: &str, k: &CoverExperiment) -> Result<CoverEntropyEstimate> {
    let map = k.system.build()?;
    let elements = k.elements.iter().map(OpenSetConfig::build).collect::<Result<Vec<_>>>()?;
    let universe = k.universe.build()?.points().to_vec();
    let cov = match k.max_unbounded {
        Some(m) => CoveringSpec::with_max_unbounded(elements, universe, m)?,
        None => CoveringSpec::new(elements, universe)?,
    };
    let mut solver = SolverConfig::default();
    if let Some(budget) = k.node_budget {
        solver.node_budget = budget;
    }
    let est = covering_entropy(&cov, &map, k.n_max, solver)?;
    let params = format!("elements={};universe={};n=1..={}", cov.elements().len(), cov.universe().len(), k.n_max);
    c.rows(
        "cover_rows",
        &COVER_COLUMNS,
        est.rows.iter().map(|r| {
            vec![
                label.into(),
                r.n.to_string(),
                r.refined_elements.to_string(),
                r.count.count.to_string(),
                r.count.lower_bound.to_string(),
                flag(r.count.exact),
                num((r.count.count as f64).ln()),
            ]
        }),
    );
    let diag = format!(
        "fit=n{}..={};rms={};all_exact={};nondecreasing={}",
        est.fit_range.0,
        est.fit_range.1,
        num(est.fit_rms_residual),
        est.all_exact,
        est.nondecreasing
    );
    let (passed, slope_diag) = match &k.expect {
        Some(e) => (e.admits(est.slope), format!("{diag};expected {}", e.describe())),
        None => (est.slope.is_finite(), diag),
    };
    c.record(&format!("{label}.slope"), &params, est.slope, passed, slope_diag);
    let sub = est.subadditive == Some(true);
    let sub_diag = match est.subadditive {
        None => "some counts are not exact".to_string(),
        Some(b) => format!("N(m+n)<=N(m)N(n) on all pairs: {b}"),
    };
    c.record(&format!("{label}.subadditivity"), &params, if sub { 1.0 } else { 0.0 }, sub, sub_diag);
    Ok(est)
}

fn measure_run(c: &mut Collector, label: &str, m: &MeasureExperiment) -> Result<()> {
    let map = m.system.build()?;
    let mu = m.measure.build()?;
    let part = m.partition.build()?;
    let est = measure_entropy_estimate(&mu, &part, &map, m.n_max)?;
    let params = format!("cells={};n=0..={}", part.len(), m.n_max);
    c.rows(
        "measure_rows",
        &MEASURE_COLUMNS,
        est.rows.iter().map(|r| vec![label.into(), r.n.to_string(), num(r.entropy), r.cells.to_string()]),
    );
    let diag = format!("within_bounds={}", est.within_bounds);
    let (passed, diag) = match &m.expect {
        Some(e) => (e.admits(est.value), format!("{diag};expected {}", e.describe())),
        None => (est.value.is_finite(), diag),
    };
    c.record(&format!("{label}.entropy_rate"), &params, est.value, passed, diag);
    let sub = est.subadditive;
    c.record(&format!("{label}.subadditivity"), &params, if sub { 1.0 } else { 0.0 }, sub, String::new());
    Ok(())
}

struct JordanRow {
    dim: usize,
    residuals: [f64; 5],
    passed: [bool; 5],
}

const INVARIANTS: [&str; 5] = ["recomposition", "commutation", "hyperbolic", "unipotent", "elliptic"];

fn jordan_rows(matrices: &[SquareMatrix<f64>]) -> Vec<Result<JordanRow>> {
    let cfg = JordanConfig::default();
    matrices
        .par_iter()
        .map(|t| {
            let j = jordan_multiplicative(t, &cfg)?;
            let r = &j.report;
            let checks = [&r.recomposition, &r.commutation, &r.hyperbolic, &r.unipotent, &r.elliptic];
            Ok(JordanRow {
                dim: t.dim(),
                residuals: checks.map(|c| c.residual),
                passed: checks.map(|c| c.passed),
            })
        })
        .collect()
}

fn jordan_table(c: &mut Collector, label: &str, rows: &[Result<JordanRow>]) {
    c.rows(
        "jordan_table",
        &JORDAN_COLUMNS,
        rows.iter().enumerate().map(|(i, r)| {
            let mut row = vec![label.to_string(), i.to_string()];
            match r {
                Ok(r) => {
                    row.push(r.dim.to_string());
                    row.extend(r.residuals.iter().map(|x| num(*x)));
                    row.push(flag(r.passed.iter().all(|p| *p)));
                }
                Err(_) => {
                    row.push(String::new());
                    row.extend(std::iter::repeat_n(String::new(), 5));
                    row.push(flag(false));
                }
            }
            row
        }),
    );
}

fn jordan_run(c: &mut Collector, label: &str, j: &JordanExperiment) -> Result<()> {
    let matrices =
        j.matrices.iter().map(|m| SquareMatrix::from_rows(m.clone())).collect::<Result<Vec<_>>>()?;
    let rows = jordan_rows(&matrices);
    jordan_table(c, label, &rows);
    for (i, r) in rows.iter().enumerate() {
        let (passed, diag) = match r {
            Ok(r) => {
                let failed: Vec<&str> =
                    INVARIANTS.iter().zip(r.passed).filter(|(_, p)| !p).map(|(n, _)| *n).collect();
                (failed.is_empty(), format!("failed=[{}]", failed.join("|")))
            }
            Err(e) => (false, e.to_string()),
        };
        let value = r.as_ref().map_or(f64::NAN, |r| r.residuals[0]);
        c.record(&format!("{label}[{i}]"), &format!("dim={}", matrices[i].dim()), value, passed, diag);
    }
    Ok(())
}

fn linear_contrast(c: &mut Collector) -> Result<()> {
    let schedule = ScheduleConfig { eps_list: vec![0.125, 0.0625, 0.03125], n_min: 3, n_max: 8 };
    let system = SystemConfig::Diagonal { entries: vec![2.0] };
    bowen_run(
        c,
        "euclidean",
        &BowenExperiment {
            system: system.clone(),
            metric: MetricSpec::Euclidean,
            region: RegionConfig::IntervalGrid { lo: 0.0, hi: 1.0, points: 16385 },
            schedule: schedule.clone(),
            mode: crate::bowen::SpanningMode::Greedy,
            min_occupancy: None,
            expect: Some(within_ten_percent(LOG2)),
        },
    )?;
    bowen_run(
        c,
        "compactified",
        &BowenExperiment {
            system,
            metric: MetricSpec::Compactified { base_dimension: 1 },
            region: RegionConfig::IntervalGrid { lo: -1000.0, hi: 1000.0, points: 2001 },
            schedule,
            mode: crate::bowen::SpanningMode::Greedy,
            min_occupancy: None,
            expect: Some(Expectation { min: Some(0.0), max: Some(0.1) }),
        },
    )?;
    Ok(())
}

/// Random invertible matrices: `d` in 2..=5, entries uniform on [-2, 2],
/// rejecting `|det| < 1e-3`.
pub fn random_battery(seed: u64, count: usize) -> Vec<SquareMatrix<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let d = rng.random_range(2..=5usize);
        let m = SquareMatrix::<f64>::from_fn(d, |_, _| rng.random_range(-2.0..=2.0));
        if m.determinant().abs() >= 1e-3 {
            out.push(m);
        }
    }
    out
}

fn rot(q: f64) -> [[f64; 2]; 2] {
    let a = std::f64::consts::TAU * q;
    [[a.cos(), -a.sin()], [a.sin(), a.cos()]]
}

fn blocks(parts: &[Vec<Vec<f64>>]) -> SquareMatrix<f64> {
    let d: usize = parts.iter().map(|p| p.len()).sum();
    let mut rows = vec![vec![0.0; d]; d];
    let mut at = 0;
    for p in parts {
        for (i, r) in p.iter().enumerate() {
            rows[at + i][at..at + r.len()].copy_from_slice(r);
        }
        at += p.len();
    }
    SquareMatrix::from_rows(rows).expect("square blocks")
}

fn b2(m: [[f64; 2]; 2]) -> Vec<Vec<f64>> {
    m.iter().map(|r| r.to_vec()).collect()
}

fn scaled(s: f64, m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    m.map(|r| r.map(|x| s * x))
}

fn diag(xs: &[f64]) -> Vec<Vec<f64>> {
    (0..xs.len()).map(|i| (0..xs.len()).map(|j| if i == j { xs[i] } else { 0.0 }).collect()).collect()
}

fn conjugate(t: &SquareMatrix<f64>, p: &SquareMatrix<f64>, p_inv: &SquareMatrix<f64>) -> SquareMatrix<f64> {
    p.mul_mat(t).mul_mat(p_inv)
}

/// Thirty matrices with known recurrent-set dimension.
pub fn recurrence_battery() -> Vec<(&'static str, SquareMatrix<f64>, usize)> {
    let shear = [[1.0, 1.0], [0.0, 1.0]];
    let cat = [[2.0, 1.0], [1.0, 1.0]];
    let j3 = vec![vec![1.0, 1.0, 0.0], vec![0.0, 1.0, 1.0], vec![0.0, 0.0, 1.0]];
    let p2 = SquareMatrix::from_rows(vec![vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
    let p2_inv = SquareMatrix::from_rows(vec![vec![1.0, -1.0], vec![0.0, 1.0]]).unwrap();
    let p3 = SquareMatrix::from_rows(vec![vec![1.0, 2.0, 0.0], vec![0.0, 1.0, 1.0], vec![1.0, 0.0, 1.0]]).unwrap();
    let p3_inv = SquareMatrix::from_rows(vec![
        vec![1.0 / 3.0, -2.0 / 3.0, 2.0 / 3.0],
        vec![1.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0],
        vec![-1.0 / 3.0, 2.0 / 3.0, 1.0 / 3.0],
    ])
    .unwrap();
    let m = |parts: &[Vec<Vec<f64>>]| blocks(parts);
    let mut out = Vec::new();
    for q in [3.0, 4.0, 5.0, 6.0, 8.0, 12.0] {
        out.push(("rotation", m(&[b2(rot(1.0 / q))]), 2));
    }
    out.push(("conjugated rotation", conjugate(&m(&[b2(rot(2.0 / 7.0))]), &p2, &p2_inv), 2));
    out.push(("rotation with fixed axis", m(&[b2(rot(0.2)), diag(&[1.0])]), 3));
    out.push(("minus identity", m(&[diag(&[-1.0, -1.0])]), 2));
    out.push(("reflection", m(&[diag(&[1.0, -1.0])]), 2));
    out.push(("saddle", m(&[diag(&[2.0, 0.5])]), 0));
    out.push(("cat map", m(&[b2(cat)]), 0));
    out.push(("expanding with fixed axis", m(&[diag(&[3.0, 1.0])]), 1));
    out.push(("contraction", m(&[diag(&[0.5, 0.25])]), 0));
    out.push(("hyperbolic 3d", m(&[diag(&[2.0, 3.0, 0.2])]), 0));
    out.push(("expanding spiral", m(&[b2(scaled(2.0, rot(0.1)))]), 0));
    out.push(("contracting spiral", m(&[b2(scaled(0.5, rot(1.0 / 6.0)))]), 0));
    out.push(("shear", m(&[b2(shear)]), 1));
    out.push(("jordan block 3", m(&[j3]), 1));
    out.push((
        "partial shear 3d",
        m(&[vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]]),
        2,
    ));
    out.push(("negative shear", m(&[vec![vec![-1.0, 1.0], vec![0.0, -1.0]]]), 1));
    out.push(("two shears", m(&[b2(shear), b2(shear)]), 2));
    out.push(("rotation + shear", m(&[b2(rot(0.2)), b2(shear)]), 3));
    out.push(("rotation + expansion", m(&[b2(rot(1.0 / 3.0)), diag(&[2.0])]), 2));
    out.push(("saddle + rotation", m(&[diag(&[2.0, 0.5]), b2(rot(0.25))]), 2));
    out.push(("shear + contraction", m(&[b2(shear), diag(&[0.5])]), 1));
    out.push(("two rotations", m(&[b2(rot(1.0 / 6.0)), b2(rot(0.25))]), 4));
    out.push(("spiral + shear", m(&[b2(scaled(2.0, rot(0.125))), b2(shear)]), 1));
    out.push(("conjugated partial expansion", conjugate(&m(&[diag(&[1.0, 1.0, 2.0])]), &p3, &p3_inv), 2));
    out.push(("rotation + cat map", m(&[b2(rot(0.2)), b2(cat)]), 2));
    out
}

const RECURRENCE_EPS: f64 = 1e-3;
const RECURRENCE_STEPS: usize = 500;
const COMPLEMENT_SAMPLES: usize = 8;

struct RecurrenceCase {
    recurrent_dim: usize,
    basis_recurrent: usize,
    complement_nonrecurrent: usize,
    complement_tested: usize,
}

fn recurrence_case(t: &SquareMatrix<f64>, seed: u64) -> Result<RecurrenceCase> {
    let sub = recurrent_set(t, &JordanConfig::default())?;
    let mut basis_recurrent = 0;
    for v in &sub.basis {
        if recurrence_oracle(t, v, RECURRENCE_EPS, RECURRENCE_STEPS)?.recurrent {
            basis_recurrent += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut tested, mut nonrecurrent) = (0, 0);
    if sub.dim() < t.dim() {
        while tested < COMPLEMENT_SAMPLES {
            let x: Vec<f64> = (0..t.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y = sub.complement_component(&x);
            let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm < 1e-3 {
                continue;
            }
            let y: Vec<f64> = y.iter().map(|v| v / norm).collect();
            tested += 1;
            if !recurrence_oracle(t, &y, RECURRENCE_EPS, RECURRENCE_STEPS)?.recurrent {
                nonrecurrent += 1;
            }
        }
    }
    Ok(RecurrenceCase {
        recurrent_dim: sub.dim(),
        basis_recurrent,
        complement_nonrecurrent: nonrecurrent,
        complement_tested: tested,
    })
}

fn jordan_battery(c: &mut Collector, seed: u64) -> Result<()> {
    let matrices = random_battery(seed, 200);
    let rows = jordan_rows(&matrices);
    jordan_table(c, "battery", &rows);
    let params = format!("matrices=200;dims=2..=5;entries=U[-2,2];seed={seed}");
    let errors = rows.iter().filter(|r| r.is_err()).count();
    for (k, name) in INVARIANTS.iter().enumerate() {
        let fails = rows.iter().filter(|r| r.as_ref().map_or(true, |r| !r.passed[k])).count();
        let worst = rows.iter().filter_map(|r| r.as_ref().ok()).map(|r| r.residuals[k]).fold(0.0, f64::max);
        c.record(
            &format!("battery.{name}"),
            &params,
            fails as f64,
            fails == 0,
            format!("failures={fails};max_residual={};errors={errors}", num(worst)),
        );
    }
    let worst_recomp =
        rows.iter().filter_map(|r| r.as_ref().ok()).map(|r| r.residuals[0]).fold(0.0, f64::max);
    c.record(
        "battery.recomposition_max",
        &params,
        worst_recomp,
        errors == 0 && worst_recomp <= 1e-9,
        "expected <= 1e-9".into(),
    );

    let battery = recurrence_battery();
    let cases: Vec<Result<RecurrenceCase>> = battery
        .par_iter()
        .enumerate()
        .map(|(i, (_, t, _))| recurrence_case(t, seed.wrapping_add(i as u64)))
        .collect();
    let mut agree = 0;
    let mut disagreeing = Vec::new();
    let mut table = Vec::new();
    for (i, ((label, t, expected), case)) in battery.iter().zip(&cases).enumerate() {
        let ok = match case {
            Ok(k) => {
                k.recurrent_dim == *expected
                    && k.basis_recurrent == k.recurrent_dim
                    && k.complement_nonrecurrent == k.complement_tested
            }
            Err(_) => false,
        };
        if ok {
            agree += 1;
        } else {
            disagreeing.push(i.to_string());
        }
        let (rd, br, cn) = match case {
            Ok(k) => (
                k.recurrent_dim.to_string(),
                format!("{}/{}", k.basis_recurrent, k.recurrent_dim),
                format!("{}/{}", k.complement_nonrecurrent, k.complement_tested),
            ),
            Err(e) => (String::new(), e.to_string(), String::new()),
        };
        table.push(vec![i.to_string(), label.to_string(), t.dim().to_string(), expected.to_string(), rd, br, cn, flag(ok)]);
    }
    c.rows("recurrence_table", &RECURRENCE_COLUMNS, table);
    c.record(
        "recurrence.battery",
        &format!("cases={};eps={};n_max={RECURRENCE_STEPS};seed={seed}", battery.len(), num(RECURRENCE_EPS)),
        agree as f64,
        agree == battery.len(),
        format!("agree={agree}/{};disagree=[{}]", battery.len(), disagreeing.join("|")),
    );
    Ok(())
}

fn binary_entropy(p: f64) -> f64 {
    let h = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    h(p) + h(1.0 - p)
}

fn variational_shift(c: &mut Collector) -> Result<()> {
    let map = MapSpec::full_shift(2)?;
    let part = FinitePartition::generator(2)?;
    const N_EXACT: usize = 20;
    const N_GRID: usize = 10;
    let exact: Vec<(f64, f64)> = [0.1, 0.3, 0.5]
        .par_iter()
        .map(|&p| Ok((p, refined_entropy(&InvariantMeasure::bernoulli(vec![p, 1.0 - p])?, &part, &map, N_EXACT)?.0)))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (p, h) in &exact {
        let closed = (N_EXACT as f64 + 1.0) * binary_entropy(*p);
        let err = (h - closed).abs();
        rows.push(vec![num(*p), N_EXACT.to_string(), num(*h), num(closed), num(h / (N_EXACT as f64 + 1.0))]);
        c.record(
            &format!("shift.bernoulli_exact[p={}]", num(*p)),
            &format!("p={};n={N_EXACT}", num(*p)),
            err,
            err <= 1e-12,
            "|H - (n+1)H(p)| <= 1e-12".into(),
        );
    }
    let grid: Vec<f64> = (1..20).map(|k| k as f64 / 20.0).collect();
    let rates: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&p| {
            let (h, _) = refined_entropy(&InvariantMeasure::bernoulli(vec![p, 1.0 - p])?, &part, &map, N_GRID)?;
            Ok((p, h, h / (N_GRID as f64 + 1.0)))
        })
        .collect::<Result<_>>()?;
    for (p, h, rate) in &rates {
        rows.push(vec![num(*p), N_GRID.to_string(), num(*h), num((N_GRID as f64 + 1.0) * binary_entropy(*p)), num(*rate)]);
    }
    c.rows("variational_table", &VARIATIONAL_COLUMNS, rows);
    let (p_best, _, h_best) = rates.iter().copied().fold((f64::NAN, 0.0, f64::NEG_INFINITY), |a, b| if b.2 > a.2 { b } else { a });
    let grid_params = format!("p=k/20,k=1..19;n={N_GRID}");
    c.record(
        "shift.argmax",
        &grid_params,
        p_best,
        p_best == 0.5 && (h_best - LOG2).abs() <= 1e-12,
        format!("max_rate={};|max_rate-log2|={}", num(h_best), num((h_best - LOG2).abs())),
    );

    let cover = CoverExperiment {
        system: SystemConfig::FullShift { alphabet: 2 },
        elements: vec![OpenSetConfig::Cylinder("0".into()), OpenSetConfig::Cylinder("1".into())],
        universe: RegionConfig::Words { alphabet: 2, length: 12 },
        n_max: 10,
        node_budget: None,
        max_unbounded: None,
        expect: Some(Expectation::within(LOG2 - 1e-9, LOG2 + 1e-9)),
    };
    let est = cover_run(c, "cylinder_cover", &cover)?;
    let gap = (h_best - est.slope).abs();
    c.record(
        "shift.variational_gap",
        &grid_params,
        gap,
        gap <= 1e-9,
        format!("max_measure_rate={};cover_slope={}", num(h_best), num(est.slope)),
    );
    Ok(())
}

fn lifted_measure(c: &mut Collector) -> Result<()> {
    let map = MapSpec::full_shift(2)?;
    let base = MeasureConfig::Markov { transition: vec![vec![0.9, 0.1], vec![0.4, 0.6]], pi: None }.build()?;
    let part = PartitionConfig { cells: CellsConfig::Generator(2), infinity: InfinityConfig::None }.build()?;
    let cs = [0.0, 0.25, 0.5, 0.9, 1.0];
    let mut jobs = Vec::new();
    for merged in [Some(0usize), None] {
        for &cc in &cs {
            for n in 0..=12usize {
                jobs.push((merged, cc, n));
            }
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(merged, cc, n)| lifted_identity(&base, &part, merged, cc, &map, n).map(|r| (merged, cc, r)))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = 0.0f64;
    let mut worst_bound = 0.0f64;
    let mut bounded = true;
    let mut table = Vec::new();
    for (merged, cc, r) in &rows {
        worst = worst.max(r.residual);
        worst_bound = worst_bound.max(r.b + r.phi_a);
        bounded &= r.bounded;
        table.push(vec![
            merged.map_or("separate".into(), |i| format!("merged:{i}")),
            num(*cc),
            r.n.to_string(),
            num(r.lifted_entropy),
            num(r.base_entropy),
            num(r.a),
            num(r.b),
            num(r.phi_a),
            num(r.rhs),
            num(r.residual),
            flag(r.bounded),
        ]);
    }
    c.rows("lifted_table", &LIFTED_COLUMNS, table);
    let params = "measure=markov[[0.9,0.1],[0.4,0.6]];c=0|0.25|0.5|0.9|1;n=0..=12;infinity=merged:0|separate";
    c.record("lifted.identity", params, worst, worst <= 1e-12, "max residual <= 1e-12".into());
    c.record(
        "lifted.bound",
        params,
        worst_bound,
        bounded,
        format!("max(b+phi(a))={};2/e={}", num(worst_bound), num(2.0 / std::f64::consts::E)),
    );
    Ok(())
}

fn rand_vec3(rng: &mut ChaCha8Rng, half: f64) -> [f64; 3] {
    [rng.random_range(-half..half), rng.random_range(-half..half), rng.random_range(-half..half)]
}

fn group_gap(g: HeisenbergGroupElement<f64>, h: HeisenbergGroupElement<f64>) -> f64 {
    (g.x - h.x).abs().max((g.y - h.y).abs()).max((g.z - h.z).abs())
}

fn heisenberg_zero(c: &mut Collector, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut round_trip = 0.0f64;
    for _ in 0..1000 {
        let v = HeisenbergAlgebraElement::from_array(rand_vec3(&mut rng, 1.0));
        let w = log_group(exp_algebra(v)).to_array();
        let gap = v.to_array().iter().zip(w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        round_trip = round_trip.max(gap);
    }
    c.record(
        "heisenberg.round_trip",
        &format!("samples=1000;cube=[-1,1]^3;seed={seed}"),
        round_trip,
        round_trip <= 1e-15,
        "max |log(exp v) - v| <= 1e-15".into(),
    );

    let l = AlgebraAutomorphism::dilation(2.0, 3.0);
    let mut hom = 0.0f64;
    let mut aut = 0.0f64;
    for _ in 0..100 {
        let u = HeisenbergAlgebraElement::from_array(rand_vec3(&mut rng, 5.0));
        let v = HeisenbergAlgebraElement::from_array(rand_vec3(&mut rng, 5.0));
        let (g, h) = (exp_algebra(u), exp_algebra(v));
        hom = hom.max(group_gap(g * h, exp_algebra(bch_product(u, v))));
        aut = aut.max(group_gap(
            automorphism_apply(&l, g * h),
            automorphism_apply(&l, g) * automorphism_apply(&l, h),
        ));
    }
    let pair_params = format!("pairs=100;cube=[-5,5]^3;seed={seed}");
    c.record(
        "heisenberg.exp_homomorphism",
        &pair_params,
        hom,
        hom <= 1e-12,
        "max |exp u exp v - exp(u*v)| <= 1e-12".into(),
    );
    c.record(
        "heisenberg.automorphism_homomorphism",
        &pair_params,
        aut,
        aut <= 1e-12,
        "max |phi(gh) - phi(g)phi(h)| <= 1e-12".into(),
    );

    let samples: Vec<StatePoint<f64>> = (0..200).map(|_| StatePoint::Vector(rand_vec3(&mut rng, 5.0).to_vec())).collect();
    let rep = exp_conjugacy_check(&l, &samples, seed)?;
    c.record(
        "heisenberg.exp_conjugacy",
        &format!("samples=200;cube=[-5,5]^3;seed={seed}"),
        rep.residual,
        rep.residual <= 1e-12 && rep.evaluation_failures == 0,
        format!("evaluation_failures={}", rep.evaluation_failures),
    );

    let classical = classical_entropy(&l.to_square_matrix())?;
    let target = 2f64.ln() + 3f64.ln() + 6f64.ln();
    c.record(
        "heisenberg.classical_entropy",
        "L=diag(2,3,6)",
        classical,
        (classical - target).abs() <= 1e-12,
        format!("expected={};gap={}", num(target), num((classical - target).abs())),
    );

    bowen_run(
        c,
        "heisenberg",
        &BowenExperiment {
            system: SystemConfig::HeisenbergAutomorphism { matrix: l.matrix().iter().map(|r| r.to_vec()).collect() },
            metric: MetricSpec::Compactified { base_dimension: 3 },
            region: RegionConfig::BoxGrid { sides: vec![(-10.0, 10.0); 3], per_axis: 11 },
            schedule: ScheduleConfig { eps_list: vec![0.5, 0.25, 0.125], n_min: 3, n_max: 8 },
            mode: crate::bowen::SpanningMode::Greedy,
            min_occupancy: None,
            expect: Some(Expectation { min: Some(0.0), max: Some(0.1) }),
        },
    )?;
    Ok(())
}

fn counterexample_circle(c: &mut Collector, seed: u64) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples: Vec<StatePoint<f64>> =
        (0..400).map(|_| StatePoint::scalar(rng.random_range(-50.0..50.0))).collect();
    let rep = covering_projection_check(&samples, seed, None)?;
    let params = format!("f=exp(ix);S=2x;T=z^2;samples=400;line=[-50,50];seed={seed}");
    c.record(
        "circle.semiconjugacy",
        &params,
        rep.residual,
        rep.residual <= 1e-12 && rep.evaluation_failures == 0,
        format!("evaluation_failures={}", rep.evaluation_failures),
    );
    let probe = rep.probe.as_ref().expect("probe requested");
    c.record(
        "circle.properness_probe",
        &params,
        probe.largest_preimage_norm,
        !probe.passed,
        format!(
            "probe_passed={};hits_per_shell={}",
            probe.passed,
            probe.hits_per_shell.iter().map(|h| h.to_string()).collect::<Vec<_>>().join("|")
        ),
    );
    let line = bowen_run(
        c,
        "line_doubling",
        &BowenExperiment {
            system: SystemConfig::Diagonal { entries: vec![2.0] },
            metric: MetricSpec::Compactified { base_dimension: 1 },
            region: RegionConfig::IntervalGrid { lo: -1000.0, hi: 1000.0, points: 2001 },
            schedule: ScheduleConfig { eps_list: vec![0.125, 0.0625, 0.03125], n_min: 3, n_max: 8 },
            mode: crate::bowen::SpanningMode::Greedy,
            min_occupancy: None,
            expect: None,
        },
    )?;
    let circle = bowen_run(
        c,
        "circle_doubling",
        &BowenExperiment {
            system: SystemConfig::CircleDoubling,
            metric: MetricSpec::CircleArc,
            region: RegionConfig::CircleGrid { points: 1 << 14 },
            schedule: ScheduleConfig { eps_list: vec![0.125, 0.0625, 0.03125], n_min: 2, n_max: 6 },
            mode: crate::bowen::SpanningMode::Greedy,
            min_occupancy: None,
            expect: None,
        },
    )?;
    let gap = match (line.value, circle.value) {
        (Some(a), Some(b)) => (a - b).abs(),
        _ => f64::NAN,
    };
    c.record(
        "circle.entropy_gap",
        "source=line_doubling;target=circle_doubling",
        gap,
        gap >= 0.5,
        format!("source={};target={}", opt(line.value), opt(circle.value)),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn battery_is_seeded_and_invertible() {
        let a = random_battery(7, 20);
        assert_eq!(a, random_battery(7, 20));
        assert_ne!(a, random_battery(8, 20));
        assert!(a.iter().all(|m| (2..=5).contains(&m.dim()) && m.determinant().abs() >= 1e-3));
    }

    #[test]
    fn recurrence_battery_has_thirty_cases() {
        let b = recurrence_battery();
        assert_eq!(b.len(), 30);
        assert!(b.iter().all(|(_, t, d)| *d <= t.dim()));
    }

    #[test]
    fn csv_quotes_fields_with_separators() {
        let out = RunOutput {
            id: "x".into(),
            seed: 1,
            records: vec![ResultRecord {
                experiment: "x".into(),
                record: "r".into(),
                parameters: "a=1,b=2".into(),
                value: f64::NAN,
                passed: false,
                diagnostics: String::new(),
                wall_seconds: 0.0,
            }],
            tables: vec![],
        };
        let text = out.records_csv().unwrap();
        assert_eq!(text, "experiment,record,parameters,value,passed,diagnostics\nx,r,\"a=1,b=2\",NaN,false,\n");
        assert!(!out.passed());
    }

    #[test]
    fn unknown_preset_is_a_config_error() {
        assert!(matches!(run_preset("nope", RunOptions::default()), Err(EntropyError::Config { .. })));
    }

    #[test]
    fn preset_configs_round_trip_and_run() {
        let opts = RunOptions { seed: Some(3), threads: Some(2) };
        let preset = run_preset("lifted-measure", opts).unwrap();
        assert!(preset.passed());
        let cfg = preset_config("doubling-cover").unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        assert_eq!(crate::config::parse_config(&text).unwrap(), cfg);
    }
}
