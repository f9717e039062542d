//! Experiment configuration files (JSON).
//!
//! Parsing errors and validation errors both carry the path of the offending
//! field, e.g. `experiment.schedule.eps_list`.

use serde::{Deserialize, Serialize};

use crate::bowen::{SampleRegion, Schedule, SpanningMode};
use crate::cover::OpenSet;
use crate::dynamics::{MapSpec, MetricSpec, SquareMatrix, StatePoint};
use crate::error::{EntropyError, Result};
use crate::measure::{Cell, FinitePartition, InvariantMeasure};
use crate::nilpotent::AlgebraAutomorphism;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    /// Names output files; defaults to the preset name or the experiment kind.
    #[serde(default)]
    pub id: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    pub experiment: ExperimentKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExperimentKind {
    Preset { name: String },
    Bowen(BowenExperiment),
    Cover(CoverExperiment),
    Measure(MeasureExperiment),
    Jordan(JordanExperiment),
}

/// Inclusive bounds a result must meet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expectation {
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

impl Expectation {
    pub fn within(min: f64, max: f64) -> Self {
        Self { min: Some(min), max: Some(max) }
    }

    pub fn admits(&self, v: f64) -> bool {
        v.is_finite() && self.min.is_none_or(|m| v >= m) && self.max.is_none_or(|m| v <= m)
    }

    pub fn describe(&self) -> String {
        match (self.min, self.max) {
            (Some(a), Some(b)) => format!("in [{a}, {b}]"),
            (Some(a), None) => format!(">= {a}"),
            (None, Some(b)) => format!("<= {b}"),
            (None, None) => "finite".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BowenExperiment {
    pub system: SystemConfig,
    pub metric: MetricSpec,
    pub region: RegionConfig,
    pub schedule: ScheduleConfig,
    #[serde(default = "default_mode")]
    pub mode: SpanningMode,
    #[serde(default)]
    pub min_occupancy: Option<usize>,
    #[serde(default)]
    pub expect: Option<Expectation>,
}

fn default_mode() -> SpanningMode {
    SpanningMode::Greedy
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverExperiment {
    pub system: SystemConfig,
    pub elements: Vec<OpenSetConfig>,
    pub universe: RegionConfig,
    pub n_max: usize,
    #[serde(default)]
    pub node_budget: Option<u64>,
    #[serde(default)]
    pub max_unbounded: Option<usize>,
    #[serde(default)]
    pub expect: Option<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureExperiment {
    pub system: SystemConfig,
    pub measure: MeasureConfig,
    pub partition: PartitionConfig,
    pub n_max: usize,
    #[serde(default)]
    pub expect: Option<Expectation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JordanExperiment {
    pub matrices: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemConfig {
    Linear { matrix: Vec<Vec<f64>> },
    Diagonal { entries: Vec<f64> },
    CircleDoubling,
    CircleRotation { turns: f64 },
    FullShift { alphabet: usize },
    HeisenbergAutomorphism { matrix: Vec<Vec<f64>> },
    Composition { maps: Vec<SystemConfig> },
}

impl SystemConfig {
    pub fn build(&self) -> Result<MapSpec<f64>> {
        match self {
            SystemConfig::Linear { matrix } => MapSpec::linear(SquareMatrix::from_rows(matrix.clone())?),
            SystemConfig::Diagonal { entries } => MapSpec::diagonal(entries),
            SystemConfig::CircleDoubling => Ok(MapSpec::CircleDoubling),
            SystemConfig::CircleRotation { turns } => Ok(MapSpec::CircleRotation { turns: *turns }),
            SystemConfig::FullShift { alphabet } => MapSpec::full_shift(*alphabet),
            SystemConfig::HeisenbergAutomorphism { matrix } => {
                let m = SquareMatrix::from_rows(matrix.clone())?;
                if m.dim() != 3 {
                    return Err(EntropyError::domain("Heisenberg automorphism needs a 3x3 matrix"));
                }
                let rows = std::array::from_fn(|i| std::array::from_fn(|j| m.get(i, j)));
                Ok(MapSpec::HeisenbergAutomorphism(AlgebraAutomorphism::new(rows, 1e-9)?))
            }
            SystemConfig::Composition { maps } => MapSpec::composition(maps.iter().map(|m| m.build()).collect::<Result<_>>()?),
        }
    }
}

/// A state: a number, a coordinate list, a word such as `"0110"`, or
/// `"infinity"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointConfig {
    Scalar(f64),
    Vector(Vec<f64>),
    Text(String),
}

impl PointConfig {
    pub fn build(&self) -> Result<StatePoint<f64>> {
        match self {
            PointConfig::Scalar(x) => Ok(StatePoint::scalar(*x)),
            PointConfig::Vector(v) => Ok(StatePoint::Vector(v.clone())),
            PointConfig::Text(s) if s == "infinity" => Ok(StatePoint::Infinity),
            PointConfig::Text(s) => StatePoint::word_from_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionConfig {
    CircleGrid { points: usize },
    IntervalGrid { lo: f64, hi: f64, points: usize },
    BoxGrid { sides: Vec<(f64, f64)>, per_axis: usize },
    Words { alphabet: usize, length: usize },
    Points(Vec<PointConfig>),
}

impl RegionConfig {
    pub fn build(&self) -> Result<SampleRegion<f64>> {
        match self {
            RegionConfig::CircleGrid { points } => SampleRegion::circle_grid(*points),
            RegionConfig::IntervalGrid { lo, hi, points } => SampleRegion::interval_grid(*lo, *hi, *points),
            RegionConfig::BoxGrid { sides, per_axis } => SampleRegion::box_grid(sides, *per_axis),
            RegionConfig::Words { alphabet, length } => SampleRegion::words(*alphabet, *length),
            RegionConfig::Points(p) => SampleRegion::new(p.iter().map(PointConfig::build).collect::<Result<_>>()?, "explicit points"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub eps_list: Vec<f64>,
    pub n_min: usize,
    pub n_max: usize,
}

impl ScheduleConfig {
    /// Sorts `eps_list` into decreasing order; rejects empty lists,
    /// nonpositive or repeated values.
    pub fn build(&self) -> Result<Schedule<f64>> {
        if self.eps_list.is_empty() {
            return Err(EntropyError::domain("eps_list is empty"));
        }
        if let Some(bad) = self.eps_list.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(EntropyError::domain(format!("eps value {bad} is not positive")));
        }
        let mut eps = self.eps_list.clone();
        eps.sort_by(|a, b| b.partial_cmp(a).unwrap());
        if eps.windows(2).any(|w| w[0] == w[1]) {
            return Err(EntropyError::domain("eps_list has repeated values"));
        }
        Schedule::uniform(&eps, self.n_min, self.n_max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub center: PointConfig,
    pub radius: f64,
    #[serde(default = "default_metric")]
    pub metric: MetricSpec,
}

fn default_metric() -> MetricSpec {
    MetricSpec::Euclidean
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OpenSetConfig {
    Arc((f64, f64)),
    Interval((f64, f64)),
    Ball(BallConfig),
    ComplementBall(BallConfig),
    Cylinder(String),
}

impl OpenSetConfig {
    pub fn build(&self) -> Result<OpenSet<f64>> {
        Ok(match self {
            OpenSetConfig::Arc((a, b)) => OpenSet::arc(*a, *b),
            OpenSetConfig::Interval((a, b)) => OpenSet::interval(*a, *b),
            OpenSetConfig::Ball(b) => OpenSet::ball(b.center.build()?, b.radius, b.metric),
            OpenSetConfig::ComplementBall(b) => OpenSet::complement_ball(b.center.build()?, b.radius, b.metric),
            OpenSetConfig::Cylinder(w) => match StatePoint::<f64>::word_from_str(w)? {
                StatePoint::Word(w) => OpenSet::cylinder(&w),
                _ => unreachable!(),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum MeasureConfig {
    Bernoulli(Vec<f64>),
    Markov {
        #[serde(rename = "P")]
        transition: Vec<Vec<f64>>,
        #[serde(default)]
        pi: Option<Vec<f64>>,
    },
    LebesgueCircle,
    Lift { base: Box<MeasureConfig>, c: f64 },
}

impl MeasureConfig {
    pub fn build(&self) -> Result<InvariantMeasure<f64>> {
        match self {
            MeasureConfig::Bernoulli(p) => InvariantMeasure::bernoulli(p.clone()),
            MeasureConfig::Markov { transition, pi: Some(pi) } => InvariantMeasure::markov(transition.clone(), pi.clone()),
            MeasureConfig::Markov { transition, pi: None } => InvariantMeasure::markov_stationary(transition.clone()),
            MeasureConfig::LebesgueCircle => Ok(InvariantMeasure::LebesgueCircle),
            MeasureConfig::Lift { base, c } => InvariantMeasure::lift(base.build()?, *c),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CellsConfig {
    Generator(usize),
    DyadicArcs(u32),
    Cylinders(Vec<String>),
    Arcs(Vec<Vec<(f64, f64)>>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InfinityConfig {
    None,
    Separate,
    Merged(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub cells: CellsConfig,
    #[serde(default = "no_infinity")]
    pub infinity: InfinityConfig,
}

fn no_infinity() -> InfinityConfig {
    InfinityConfig::None
}

impl PartitionConfig {
    pub fn build(&self) -> Result<FinitePartition<f64>> {
        let p = match &self.cells {
            CellsConfig::Generator(k) => FinitePartition::generator(*k)?,
            CellsConfig::DyadicArcs(k) => FinitePartition::dyadic_arcs(*k)?,
            CellsConfig::Cylinders(words) => FinitePartition::new(
                words
                    .iter()
                    .map(|w| match StatePoint::<f64>::word_from_str(w)? {
                        StatePoint::Word(w) => Ok(Cell::cylinder(&w)),
                        _ => unreachable!(),
                    })
                    .collect::<Result<_>>()?,
            )?,
            CellsConfig::Arcs(cells) => FinitePartition::new(cells.iter().map(|c| Cell::arcs(c)).collect::<Result<_>>()?)?,
        };
        match self.infinity {
            InfinityConfig::None => Ok(p),
            InfinityConfig::Separate => p.with_infinity_cell(),
            InfinityConfig::Merged(i) => p.with_infinity_merged(i),
        }
    }
}

/// Parses a config, reporting the path of the first offending field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| EntropyError::config(".", e.to_string()))?;
    let cfg: ExperimentConfig = match serde_path_to_error::deserialize(&value) {
        Ok(c) => c,
        Err(e) => {
            // The `kind` tag makes serde buffer the experiment body, which
            // hides paths below it; retry the body alone to recover them.
            if e.path().to_string() == "experiment" {
                if let Some(inner) = experiment_error(&value) {
                    return Err(inner);
                }
            }
            let path = e.path().to_string();
            return Err(EntropyError::config(path, e.into_inner().to_string()));
        }
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn experiment_error(value: &serde_json::Value) -> Option<EntropyError> {
    let mut body = value.get("experiment")?.as_object()?.clone();
    let kind = body.remove("kind")?;
    let body = serde_json::Value::Object(body);
    fn probe<T: serde::de::DeserializeOwned>(v: &serde_json::Value) -> Option<EntropyError> {
        serde_path_to_error::deserialize::<_, T>(v)
            .err()
            .map(|e| EntropyError::config(format!("experiment.{}", e.path()), e.into_inner().to_string()))
    }
    match kind.as_str()? {
        "bowen" => probe::<BowenExperiment>(&body),
        "cover" => probe::<CoverExperiment>(&body),
        "measure" => probe::<MeasureExperiment>(&body),
        "jordan" => probe::<JordanExperiment>(&body),
        _ => None,
    }
}

pub fn load_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| EntropyError::config(path.display().to_string(), format!("cannot read: {e}")))?;
    parse_config(&text)
}

fn at(path: &str) -> impl Fn(EntropyError) -> EntropyError + '_ {
    move |e| match e {
        EntropyError::Config { .. } => e,
        other => EntropyError::config(path, other.to_string()),
    }
}

/// Builds every referenced object once so that errors surface with a path
/// before any computation starts.
pub fn validate(cfg: &ExperimentConfig) -> Result<()> {
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(EntropyError::config(
            "schema_version",
            format!("unsupported version {}, expected {SCHEMA_VERSION}", cfg.schema_version),
        ));
    }
    match &cfg.experiment {
        ExperimentKind::Preset { name } => {
            if !crate::experiments::PRESETS.contains(&name.as_str()) {
                return Err(EntropyError::config("experiment.name", format!("unknown preset {name:?}")));
            }
        }
        ExperimentKind::Bowen(b) => {
            b.system.build().map_err(at("experiment.system"))?;
            b.region.build().map_err(at("experiment.region"))?;
            b.schedule.build().map_err(at("experiment.schedule.eps_list"))?;
        }
        ExperimentKind::Cover(c) => {
            c.system.build().map_err(at("experiment.system"))?;
            if c.elements.is_empty() {
                return Err(EntropyError::config("experiment.elements", "covering has no elements"));
            }
            for (i, e) in c.elements.iter().enumerate() {
                e.build().map_err(at(&format!("experiment.elements[{i}]")))?;
            }
            c.universe.build().map_err(at("experiment.universe"))?;
            if c.n_max < 2 {
                return Err(EntropyError::config("experiment.n_max", "must be at least 2"));
            }
        }
        ExperimentKind::Measure(m) => {
            m.system.build().map_err(at("experiment.system"))?;
            m.measure.build().map_err(at("experiment.measure"))?;
            m.partition.build().map_err(at("experiment.partition"))?;
            if m.n_max < 2 {
                return Err(EntropyError::config("experiment.n_max", "must be at least 2"));
            }
        }
        ExperimentKind::Jordan(j) => {
            for (i, m) in j.matrices.iter().enumerate() {
                SquareMatrix::from_rows(m.clone()).map_err(at(&format!("experiment.matrices[{i}]")))?;
            }
        }
    }
    Ok(())
}
