//! Spanning sets for the Bowen metric `d_n`, their growth rates `g(ε, Y)` and
//! the d-entropy `h_d(T, Y)`.
//!
//! Spanning sets are drawn from the sample region itself and balls are open:
//! `y` is spanned by `x` when `d_n(x, y) < ε`.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{MapSpec, MetricSpec, StatePoint};
use crate::error::{EntropyError, Result};
use crate::scalar::{least_squares_slope, Real};
use crate::setcover::{self, SetCoverInstance, SolverConfig};

/// Finite witness set for a subset `Y` of the state space.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRegion<T> {
    points: Vec<StatePoint<T>>,
    description: String,
    /// Grid spacing, when the region is a grid.
    resolution: Option<T>,
}

impl<T: Real> SampleRegion<T> {
    pub fn new(points: Vec<StatePoint<T>>, description: impl Into<String>) -> Result<Self> {
        let first = points.iter().find(|p| !p.is_infinity()).or(points.first());
        let Some(first) = first else {
            return Err(EntropyError::domain("sample region is empty"));
        };
        let same = |p: &StatePoint<T>| match (first, p) {
            (_, StatePoint::Infinity) => {
                matches!(first, StatePoint::Vector(_) | StatePoint::Infinity)
            }
            (StatePoint::Vector(a), StatePoint::Vector(b)) => a.len() == b.len(),
            (StatePoint::Word(_), StatePoint::Word(_)) => true,
            _ => false,
        };
        if let Some(bad) = points.iter().position(|p| !same(p)) {
            return Err(EntropyError::domain(format!(
                "sample point {bad} is of a different kind than the first"
            )));
        }
        Ok(Self {
            points,
            description: description.into(),
            resolution: None,
        })
    }

    /// `m` evenly spaced circle points `k / m`.
    pub fn circle_grid(m: usize) -> Result<Self> {
        let pts = (0..m)
            .map(|k| StatePoint::scalar(T::from_count(k) / T::from_count(m)))
            .collect();
        Ok(Self::new(pts, format!("circle grid of {m} points"))?
            .with_resolution(T::one() / T::from_count(m)))
    }

    /// `m` evenly spaced points from `lo` to `hi` inclusive.
    pub fn interval_grid(lo: T, hi: T, m: usize) -> Result<Self> {
        Self::box_grid(&[(lo, hi)], m)
    }

    /// Product grid with `per_axis` points on each closed side.
    pub fn box_grid(sides: &[(T, T)], per_axis: usize) -> Result<Self> {
        if per_axis < 2 || sides.is_empty() || sides.iter().any(|&(lo, hi)| !(lo < hi)) {
            return Err(EntropyError::domain(
                "box grid needs sides lo < hi and at least 2 points per axis",
            ));
        }
        let step = |&(lo, hi): &(T, T)| (hi - lo) / T::from_count(per_axis - 1);
        let total = per_axis
            .checked_pow(sides.len() as u32)
            .ok_or_else(|| EntropyError::domain("box grid too large"))?;
        let pts = (0..total)
            .map(|mut c| {
                let mut v = vec![T::zero(); sides.len()];
                for (k, side) in sides.iter().enumerate().rev() {
                    v[k] = side.0 + step(side) * T::from_count(c % per_axis);
                    c /= per_axis;
                }
                StatePoint::Vector(v)
            })
            .collect();
        let res = sides.iter().map(step).fold(T::zero(), T::max);
        let desc = format!("grid of {per_axis}^{} points on {:?}", sides.len(), sides);
        Ok(Self::new(pts, desc)?.with_resolution(res))
    }

    /// All words of `length` over `alphabet`.
    pub fn words(alphabet: usize, length: usize) -> Result<Self> {
        let pts = crate::cover::all_words(alphabet, length);
        Self::new(pts, format!("all {alphabet}-ary words of length {length}"))
    }

    pub fn with_resolution(mut self, resolution: T) -> Self {
        self.resolution = Some(resolution);
        self
    }

    pub fn points(&self) -> &[StatePoint<T>] {
        &self.points
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    pub fn resolution(&self) -> Option<T> {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanningMode {
    Greedy,
    ExactSmall,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BowenConfig {
    pub mode: SpanningMode,
    /// Largest region handed to the exact solver.
    pub exact_cap: usize,
    /// A cell counts as resolved when `count * min_occupancy <= |region|`;
    /// 0 disables the check.
    pub min_occupancy: usize,
    pub solver: SolverConfig,
}

impl Default for BowenConfig {
    fn default() -> Self {
        Self {
            mode: SpanningMode::Greedy,
            exact_cap: 2048,
            min_occupancy: 8,
            solver: SolverConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SpanningCount {
    pub count: usize,
    /// Certified lower bound on the optimum over the sample.
    pub lower_bound: usize,
    pub exact: bool,
}

/// Orbits of every region point, `n_max + 1` states each.
struct OrbitCache<'a, T> {
    metric: &'a MetricSpec,
    orbits: Vec<Vec<StatePoint<T>>>,
}

impl<'a, T: Real> OrbitCache<'a, T> {
    fn new(
        map: &MapSpec<T>,
        metric: &'a MetricSpec,
        region: &SampleRegion<T>,
        n_max: usize,
    ) -> Result<Self> {
        let orbits = region
            .points
            .par_iter()
            .map(|x| map.orbit(x, n_max))
            .collect::<Result<_>>()?;
        Ok(Self { metric, orbits })
    }

    fn d(&self, j: usize, x: usize, y: usize) -> Result<T> {
        self.metric.distance(&self.orbits[x][j], &self.orbits[y][j])
    }

    fn close_through(&self, x: usize, y: usize, n: usize, eps: T) -> Result<bool> {
        for j in 0..=n {
            if self.d(j, x, y)? >= eps {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Open `d_n` balls of radius `eps`.
    ///
    /// For the euclidean and arc metrics, `d_n(x, y) < eps` forces the first
    /// coordinates of `T^j x` and `T^j y` to be within `eps` for each
    /// `j <= n`; candidates come from a sorted sweep at whichever `j` gives
    /// the fewest.
    fn balls(&self, eps: T, n: usize) -> Result<Vec<Vec<u32>>> {
        let r = self.orbits.len();
        let first = |j: usize, i: usize| self.orbits[i][j].coords().and_then(|c| c.first().copied());
        let sweep = matches!(self.metric, MetricSpec::Euclidean | MetricSpec::CircleArc)
            && (0..r).all(|i| (0..=n).all(|j| first(j, i).is_some()));
        if !sweep {
            return (0..r)
                .into_par_iter()
                .map(|x| {
                    let mut out = Vec::new();
                    for y in 0..r {
                        if self.close_through(x, y, n, eps)? {
                            out.push(y as u32);
                        }
                    }
                    Ok(out)
                })
                .collect();
        }
        let circle = matches!(self.metric, MetricSpec::CircleArc);
        let windows = |c: T| {
            let mut w = vec![(c - eps, c + eps)];
            if circle {
                w.push((c - eps + T::one(), c + eps + T::one()));
                w.push((c - eps - T::one(), c + eps - T::one()));
            }
            w
        };
        let sorted = |j: usize| {
            let mut order: Vec<(T, u32)> = (0..r).map(|i| (first(j, i).unwrap(), i as u32)).collect();
            order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            order
        };
        let span = |order: &[(T, u32)], lo: T, hi: T| {
            let start = order.partition_point(|o| o.0 < lo);
            start..order.partition_point(|o| o.0 <= hi).max(start)
        };
        let (_, j, order) = (0..=n)
            .into_par_iter()
            .map(|j| {
                let order = sorted(j);
                let work: usize = (0..r)
                    .map(|x| windows(first(j, x).unwrap()).into_iter().map(|(lo, hi)| span(&order, lo, hi).len()).sum::<usize>())
                    .sum();
                (work, j, order)
            })
            .min_by_key(|t| (t.0, t.1))
            .unwrap();
        (0..r)
            .into_par_iter()
            .map(|x| {
                let mut out = Vec::new();
                for (lo, hi) in windows(first(j, x).unwrap()) {
                    for &(_, y) in &order[span(&order, lo, hi)] {
                        if self.close_through(x, y as usize, n, eps)? {
                            out.push(y);
                        }
                    }
                }
                out.sort_unstable();
                out.dedup();
                Ok(out)
            })
            .collect()
    }

    /// Open `d_n` balls of radius `eps` for `n = n_min..=n_max`, handed to
    /// `visit` in increasing `n`.
    fn for_each_depth(
        &self,
        eps: T,
        n_min: usize,
        n_max: usize,
        mut visit: impl FnMut(usize, &[Vec<u32>]) -> Result<()>,
    ) -> Result<()> {
        let mut balls = self.balls(eps, n_min)?;
        visit(n_min, &balls)?;
        for n in n_min + 1..=n_max {
            balls = balls
                .into_par_iter()
                .enumerate()
                .map(|(x, ball)| {
                    let mut keep = Vec::with_capacity(ball.len());
                    for y in ball {
                        if self.d(n, x, y as usize)? < eps {
                            keep.push(y);
                        }
                    }
                    Ok(keep)
                })
                .collect::<Result<_>>()?;
            visit(n, &balls)?;
        }
        Ok(())
    }
}

fn count_cover(balls: &[Vec<u32>], cfg: &BowenConfig) -> Result<SpanningCount> {
    let inst = SetCoverInstance::new(balls.len(), balls.to_vec())?;
    match cfg.mode {
        SpanningMode::Greedy => {
            let g = setcover::greedy_cover(&inst)?.len();
            let ln = 1.0 + (balls.len() as f64).ln();
            Ok(SpanningCount {
                count: g,
                lower_bound: (g as f64 / ln).ceil() as usize,
                exact: false,
            })
        }
        SpanningMode::ExactSmall => {
            if balls.len() > cfg.exact_cap {
                return Err(EntropyError::Capability(format!(
                    "exact spanning count over {} points exceeds the cap {}",
                    balls.len(),
                    cfg.exact_cap
                )));
            }
            let sol = setcover::solve(&inst, cfg.solver)?;
            Ok(SpanningCount {
                count: sol.size,
                lower_bound: sol.lower_bound,
                exact: sol.exact,
            })
        }
    }
}

fn check_eps<T: Real>(eps: T) -> Result<()> {
    if eps > T::zero() && eps.is_finite() {
        Ok(())
    } else {
        Err(EntropyError::domain(format!(
            "eps must be positive and finite, got {eps}"
        )))
    }
}

/// Size of an `(n, ε)`-spanning subset of the region.
pub fn spanning_cardinality<T: Real>(
    map: &MapSpec<T>,
    metric: &MetricSpec,
    region: &SampleRegion<T>,
    n: usize,
    eps: T,
    cfg: &BowenConfig,
) -> Result<SpanningCount> {
    check_eps(eps)?;
    let counts = spanning_counts(map, metric, region, eps, n, n, cfg)?;
    Ok(counts[0])
}

/// Spanning counts for `n = n_min..=n_max`, before any running maximum.
pub fn spanning_counts<T: Real>(
    map: &MapSpec<T>,
    metric: &MetricSpec,
    region: &SampleRegion<T>,
    eps: T,
    n_min: usize,
    n_max: usize,
    cfg: &BowenConfig,
) -> Result<Vec<SpanningCount>> {
    check_eps(eps)?;
    if n_min > n_max {
        return Err(EntropyError::domain("empty n range"));
    }
    let cache = OrbitCache::new(map, metric, region, n_max)?;
    let mut out = Vec::with_capacity(n_max - n_min + 1);
    cache.for_each_depth(eps, n_min, n_max, |_, balls| {
        out.push(count_cover(balls, cfg)?);
        Ok(())
    })?;
    Ok(out)
}

/// Least-squares slope of `log G_n(ε)` over `n_range`, using the running
/// maximum of the counts in `n`.
pub fn epsilon_slope<T: Real>(
    map: &MapSpec<T>,
    metric: &MetricSpec,
    region: &SampleRegion<T>,
    eps: T,
    n_range: std::ops::RangeInclusive<usize>,
    cfg: &BowenConfig,
) -> Result<f64> {
    let (lo, hi) = (*n_range.start(), *n_range.end());
    if hi < lo + 2 {
        return Err(EntropyError::domain(
            "epsilon_slope needs at least 3 values of n",
        ));
    }
    let counts = spanning_counts(map, metric, region, eps, lo, hi, cfg)?;
    let env = running_max(counts.iter().map(|c| c.count));
    let xs: Vec<f64> = (lo..=hi).map(|n| n as f64).collect();
    let ys: Vec<f64> = env.iter().map(|&c| (c as f64).ln()).collect();
    Ok(least_squares_slope(&xs, &ys).map_or(0.0, |f| f.slope.max(0.0)))
}

fn running_max(xs: impl IntoIterator<Item = usize>) -> Vec<usize> {
    xs.into_iter()
        .scan(0, |m, c| {
            *m = (*m).max(c);
            Some(*m)
        })
        .collect()
}

/// One `ε` of a schedule with its `n` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleEntry<T> {
    pub eps: T,
    pub n_min: usize,
    pub n_max: usize,
}

/// Strictly decreasing `ε` values, each with an `n` range of at least 3 values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule<T> {
    entries: Vec<ScheduleEntry<T>>,
}

impl<T: Real> Schedule<T> {
    pub fn new(entries: Vec<ScheduleEntry<T>>) -> Result<Self> {
        if entries.is_empty() {
            return Err(EntropyError::domain("schedule has no eps values"));
        }
        for e in &entries {
            check_eps(e.eps)?;
            if e.n_max < e.n_min + 2 {
                return Err(EntropyError::domain(format!(
                    "n range {}..={} has fewer than 3 values",
                    e.n_min, e.n_max
                )));
            }
        }
        if entries.windows(2).any(|w| w[1].eps >= w[0].eps) {
            return Err(EntropyError::domain(
                "schedule eps values must be strictly decreasing",
            ));
        }
        Ok(Self { entries })
    }

    pub fn uniform(eps_list: &[T], n_min: usize, n_max: usize) -> Result<Self> {
        Self::new(
            eps_list
                .iter()
                .map(|&eps| ScheduleEntry { eps, n_min, n_max })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[ScheduleEntry<T>] {
        &self.entries
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BowenCell {
    pub eps: f64,
    pub n: usize,
    pub raw: SpanningCount,
    /// Running maximum of the raw counts over `n` at this `ε`.
    pub count: usize,
    /// `count * min_occupancy <= |region|`.
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsSlope {
    pub eps: f64,
    /// `None` when fewer than 3 cells are resolved.
    pub slope: Option<f64>,
    pub fit_points: usize,
    pub rms_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct BowenDiagnostics {
    /// Raw counts that dropped as `n` grew, before the running maximum.
    pub n_monotonicity_violations: usize,
    /// Cells at a shared `n` whose count dropped as `ε` decreased.
    pub eps_monotonicity_violations: usize,
    /// Slopes that dropped as `ε` decreased.
    pub slope_monotonicity_violations: usize,
    pub unresolved_cells: usize,
    /// Smallest `ε` is below four grid spacings.
    pub below_resolution: bool,
    pub all_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyEstimate {
    pub region: String,
    pub region_size: usize,
    pub cells: Vec<BowenCell>,
    pub slopes: Vec<EpsSlope>,
    /// Maximum of the available per-`ε` slopes.
    pub value: Option<f64>,
    pub diagnostics: BowenDiagnostics,
}

/// `h_d(T, Y)` estimated as the largest `g(ε, Y)` slope over the schedule.
pub fn metric_entropy_estimate<T: Real>(
    map: &MapSpec<T>,
    metric: &MetricSpec,
    region: &SampleRegion<T>,
    schedule: &Schedule<T>,
    cfg: &BowenConfig,
) -> Result<EntropyEstimate> {
    let n_top = schedule.entries.iter().map(|e| e.n_max).max().unwrap_or(0);
    let cache = OrbitCache::new(map, metric, region, n_top)?;
    let per_eps: Vec<Vec<SpanningCount>> = schedule
        .entries
        .par_iter()
        .map(|e| {
            let mut out = Vec::new();
            cache.for_each_depth(e.eps, e.n_min, e.n_max, |_, balls| {
                out.push(count_cover(balls, cfg)?);
                Ok(())
            })?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(summarize(region, schedule, per_eps, cfg.min_occupancy))
}

fn summarize<T: Real>(
    region: &SampleRegion<T>,
    schedule: &Schedule<T>,
    per_eps: Vec<Vec<SpanningCount>>,
    min_occupancy: usize,
) -> EntropyEstimate {
    let size = region.len();
    let mut diag = BowenDiagnostics {
        all_exact: true,
        ..Default::default()
    };
    let mut cells = Vec::new();
    let mut slopes: Vec<EpsSlope> = Vec::new();
    for (e, raw) in schedule.entries.iter().zip(per_eps) {
        diag.n_monotonicity_violations +=
            raw.windows(2).filter(|w| w[1].count < w[0].count).count();
        diag.all_exact &= raw.iter().all(|c| c.exact);
        let env = running_max(raw.iter().map(|c| c.count));
        let eps = e.eps.as_f64();
        let row: Vec<BowenCell> = (e.n_min..=e.n_max)
            .zip(raw.into_iter().zip(env))
            .map(|(n, (raw, count))| BowenCell {
                eps,
                n,
                raw,
                count,
                resolved: count.saturating_mul(min_occupancy) <= size,
            })
            .collect();
        let (xs, ys): (Vec<f64>, Vec<f64>) = row
            .iter()
            .filter(|c| c.resolved)
            .map(|c| (c.n as f64, (c.count as f64).ln()))
            .unzip();
        let fit = (xs.len() >= 3)
            .then(|| least_squares_slope(&xs, &ys))
            .flatten();
        diag.unresolved_cells += row.len() - xs.len();
        slopes.push(EpsSlope {
            eps,
            slope: fit.map(|f| f.slope.max(0.0)),
            fit_points: xs.len(),
            rms_residual: fit.map_or(0.0, |f| f.rms_residual),
        });
        cells.extend(row);
    }
    for (i, a) in cells.iter().enumerate() {
        diag.eps_monotonicity_violations += cells[i + 1..]
            .iter()
            .filter(|b| b.n == a.n && b.eps < a.eps && b.count < a.count)
            .count();
    }
    let present: Vec<f64> = slopes.iter().filter_map(|s| s.slope).collect();
    diag.slope_monotonicity_violations = present.windows(2).filter(|w| w[1] < w[0]).count();
    diag.below_resolution = match (region.resolution, schedule.entries.last()) {
        (Some(r), Some(e)) => e.eps < r * T::lit(4.0),
        _ => false,
    };
    let value = present.iter().copied().reduce(f64::max);
    EntropyEstimate {
        region: region.description.clone(),
        region_size: size,
        cells,
        slopes,
        value,
        diagnostics: diag,
    }
}
