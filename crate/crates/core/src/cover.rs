//! Admissible coverings, their refinements `α^n`, the minimal subcover count
//! `N(α^n)` and the covering entropy `h(T, α)`.
//!
//! Open sets are membership predicates; every statement is relative to a
//! finite witness universe of states.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{wrap_unit, MapSpec, MetricSpec, StatePoint};
use crate::error::{EntropyError, Result};
use crate::scalar::{least_squares_slope, Real};
use crate::setcover::{self, SetCoverInstance, SolverConfig};

type Predicate<T> = Arc<dyn Fn(&StatePoint<T>) -> bool + Send + Sync>;

/// Whether the closure or the complement of an element is compact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Admissibility {
    CompactClosure,
    CompactComplement,
}

#[derive(Clone)]
pub enum OpenSet<T> {
    /// `[start, end)` on the circle, read counterclockwise; `end` may exceed 1.
    Arc { start: T, end: T },
    /// `[lo, hi)` on the line.
    Interval { lo: T, hi: T },
    Ball {
        center: StatePoint<T>,
        radius: T,
        metric: MetricSpec,
    },
    /// `{x : d(x, center) > radius}`, together with the point at infinity.
    ComplementBall {
        center: StatePoint<T>,
        radius: T,
        metric: MetricSpec,
    },
    /// Sequences starting with `word`.
    Cylinder(Vec<u8>),
    Custom {
        predicate: Predicate<T>,
        description: String,
        admissibility: Admissibility,
    },
}

impl<T: Real> OpenSet<T> {
    pub fn arc(start: T, end: T) -> Self {
        Self::Arc { start, end }
    }

    pub fn interval(lo: T, hi: T) -> Self {
        Self::Interval { lo, hi }
    }

    pub fn ball(center: StatePoint<T>, radius: T, metric: MetricSpec) -> Self {
        Self::Ball {
            center,
            radius,
            metric,
        }
    }

    pub fn complement_ball(center: StatePoint<T>, radius: T, metric: MetricSpec) -> Self {
        Self::ComplementBall {
            center,
            radius,
            metric,
        }
    }

    pub fn cylinder(word: &[u8]) -> Self {
        Self::Cylinder(word.to_vec())
    }

    pub fn custom(
        description: impl Into<String>,
        admissibility: Admissibility,
        predicate: impl Fn(&StatePoint<T>) -> bool + Send + Sync + 'static,
    ) -> Self {
        Self::Custom {
            predicate: Arc::new(predicate),
            description: description.into(),
            admissibility,
        }
    }

    /// `f^{-1}(self)` for a map `f` from another state space into this one.
    pub fn preimage(
        &self,
        description: impl Into<String>,
        f: impl Fn(&StatePoint<T>) -> Option<StatePoint<T>> + Send + Sync + 'static,
    ) -> Self {
        let inner = self.clone();
        let adm = self.admissibility();
        Self::custom(description, adm, move |y| {
            f(y).is_some_and(|x| inner.contains(&x))
        })
    }

    pub fn contains(&self, x: &StatePoint<T>) -> bool {
        match self {
            OpenSet::Arc { start, end } => match x.coords() {
                Some([t]) => {
                    let len = *end - *start;
                    len >= T::one() || wrap_unit(*t - *start) < len
                }
                _ => false,
            },
            OpenSet::Interval { lo, hi } => {
                matches!(x.coords(), Some([t]) if *lo <= *t && *t < *hi)
            }
            OpenSet::Ball {
                center,
                radius,
                metric,
            } => !x.is_infinity() && metric.raw_distance(center, x).is_some_and(|d| d < *radius),
            OpenSet::ComplementBall {
                center,
                radius,
                metric,
            } => x.is_infinity() || metric.raw_distance(center, x).is_some_and(|d| d > *radius),
            OpenSet::Cylinder(w) => x.symbols().is_some_and(|s| s.starts_with(w)),
            OpenSet::Custom { predicate, .. } => predicate(x),
        }
    }

    pub fn admissibility(&self) -> Admissibility {
        match self {
            OpenSet::ComplementBall { .. } => Admissibility::CompactComplement,
            OpenSet::Custom { admissibility, .. } => *admissibility,
            _ => Admissibility::CompactClosure,
        }
    }

    pub fn description(&self) -> String {
        match self {
            OpenSet::Arc { start, end } => format!("arc [{start}, {end})"),
            OpenSet::Interval { lo, hi } => format!("interval [{lo}, {hi})"),
            OpenSet::Ball { center, radius, .. } => format!("ball({center:?}, {radius})"),
            OpenSet::ComplementBall { center, radius, .. } => {
                format!("complement of closed ball({center:?}, {radius})")
            }
            OpenSet::Cylinder(w) => format!(
                "cylinder [{}]",
                w.iter().map(|s| s.to_string()).collect::<String>()
            ),
            OpenSet::Custom { description, .. } => description.clone(),
        }
    }
}

impl<T: Real> fmt::Debug for OpenSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.description())
    }
}

/// A finite open covering together with the witness universe it covers.
#[derive(Debug, Clone)]
pub struct CoveringSpec<T: Real> {
    elements: Vec<OpenSet<T>>,
    universe: Vec<StatePoint<T>>,
}

impl<T: Real> CoveringSpec<T> {
    pub fn new(elements: Vec<OpenSet<T>>, universe: Vec<StatePoint<T>>) -> Result<Self> {
        Self::with_max_unbounded(elements, universe, usize::MAX)
    }

    /// Also caps the number of elements flagged with compact complement.
    pub fn with_max_unbounded(
        elements: Vec<OpenSet<T>>,
        universe: Vec<StatePoint<T>>,
        max_unbounded: usize,
    ) -> Result<Self> {
        if elements.is_empty() {
            return Err(EntropyError::domain(
                "a covering needs at least one element",
            ));
        }
        let unbounded = elements
            .iter()
            .filter(|e| e.admissibility() == Admissibility::CompactComplement)
            .count();
        if unbounded > max_unbounded {
            return Err(EntropyError::domain(format!(
                "{unbounded} elements have compact complement, at most {max_unbounded} allowed"
            )));
        }
        if let Some(point) = universe
            .iter()
            .position(|x| !elements.iter().any(|e| e.contains(x)))
        {
            return Err(EntropyError::CoverageViolation { point });
        }
        Ok(Self { elements, universe })
    }

    pub fn elements(&self) -> &[OpenSet<T>] {
        &self.elements
    }

    pub fn universe(&self) -> &[StatePoint<T>] {
        &self.universe
    }

    pub fn admissibility_flags(&self) -> Vec<Admissibility> {
        self.elements.iter().map(OpenSet::admissibility).collect()
    }

    fn memberships(&self, x: &StatePoint<T>) -> Vec<u16> {
        (0..self.elements.len())
            .filter(|&i| self.elements[i].contains(x))
            .map(|i| i as u16)
            .collect()
    }
}

/// `α^n` restricted to the universe: nonempty index tuples `(i_0, .., i_n)`
/// with the witness points `x` such that `T^j x ∈ A_{i_j}` for every `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RefinedCovering {
    pub depth: usize,
    pub base_len: usize,
    pub universe_len: usize,
    /// Index tuples in lexicographic order.
    pub tuples: Vec<Vec<u16>>,
    /// Witness indices belonging to each tuple, ascending.
    pub members: Vec<Vec<u32>>,
}

impl RefinedCovering {
    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

/// Builds `α^n` over the covering's universe.
pub fn refine_covering<T: Real>(
    cov: &CoveringSpec<T>,
    map: &MapSpec<T>,
    n: usize,
) -> Result<RefinedCovering> {
    let k = cov.elements.len();
    // Lexicographic tuple order equals numeric order of the base-k code.
    let fits = (n as u32 + 1) as f64 * (k.max(2) as f64).log2() < 127.0;
    if !fits {
        return Err(EntropyError::Capability(format!(
            "refinement depth {n} over {k} elements is too deep"
        )));
    }
    let per_point: Vec<Vec<u128>> = cov
        .universe
        .par_iter()
        .enumerate()
        .map(|(idx, x)| {
            let orbit = map.orbit(x, n)?;
            let mut codes: Vec<u128> = vec![0];
            for y in &orbit {
                let m = cov.memberships(y);
                if m.is_empty() {
                    return Err(EntropyError::CoverageViolation { point: idx });
                }
                codes = codes
                    .iter()
                    .flat_map(|&c| m.iter().map(move |&i| c * k as u128 + i as u128))
                    .collect();
            }
            Ok(codes)
        })
        .collect::<Result<_>>()?;
    let mut groups: BTreeMap<u128, Vec<u32>> = BTreeMap::new();
    for (idx, codes) in per_point.into_iter().enumerate() {
        for c in codes {
            groups.entry(c).or_default().push(idx as u32);
        }
    }
    let decode = |mut c: u128| {
        let mut t = vec![0u16; n + 1];
        for slot in t.iter_mut().rev() {
            *slot = (c % k as u128) as u16;
            c /= k as u128;
        }
        t
    };
    let (tuples, members) = groups.into_iter().map(|(c, m)| (decode(c), m)).unzip();
    Ok(RefinedCovering {
        depth: n,
        base_len: k,
        universe_len: cov.universe.len(),
        tuples,
        members,
    })
}

/// `N(α^n)` over the universe, possibly as an interval when the search budget
/// runs out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SubcoverCount {
    pub count: usize,
    pub lower_bound: usize,
    pub exact: bool,
}

pub fn minimal_subcover_cardinality(
    refined: &RefinedCovering,
    cfg: SolverConfig,
) -> Result<SubcoverCount> {
    let inst = SetCoverInstance::new(refined.universe_len, refined.members.clone())?;
    let sol = setcover::solve(&inst, cfg)?;
    Ok(SubcoverCount {
        count: sol.size,
        lower_bound: sol.lower_bound,
        exact: sol.exact,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverRow {
    pub n: usize,
    pub refined_elements: usize,
    pub count: SubcoverCount,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverEntropyEstimate {
    pub rows: Vec<CoverRow>,
    /// Least-squares slope of `log N(α^n)` over the upper half of the range.
    pub slope: f64,
    pub fit_range: (usize, usize),
    pub fit_rms_residual: f64,
    /// `N(α^{m+n}) ≤ N(α^m) N(α^n)` on every computed triple; `None` if some
    /// count is inexact.
    pub subadditive: Option<bool>,
    pub nondecreasing: bool,
    pub all_exact: bool,
}

/// `h(T, α)` estimated from `N(α^n)`, `n = 1..=n_max`.
pub fn covering_entropy<T: Real>(
    cov: &CoveringSpec<T>,
    map: &MapSpec<T>,
    n_max: usize,
    cfg: SolverConfig,
) -> Result<CoverEntropyEstimate> {
    if n_max < 2 {
        return Err(EntropyError::domain("covering entropy needs n_max >= 2"));
    }
    let rows = (1..=n_max)
        .map(|n| {
            let r = refine_covering(cov, map, n)?;
            let count = minimal_subcover_cardinality(&r, cfg)?;
            Ok(CoverRow {
                n,
                refined_elements: r.len(),
                count,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_cover_rows(rows))
}

pub(crate) fn summarize_cover_rows(rows: Vec<CoverRow>) -> CoverEntropyEstimate {
    let n_max = rows.last().map_or(0, |r| r.n);
    let lo = (n_max / 2 + 1).min(n_max.saturating_sub(1)).max(1);
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.n >= lo)
        .map(|r| (r.n as f64, (r.count.count as f64).ln()))
        .unzip();
    let fit = least_squares_slope(&xs, &ys);
    let all_exact = rows.iter().all(|r| r.count.exact);
    let count_at = |n: usize| {
        rows.iter()
            .find(|r| r.n == n)
            .map(|r| r.count.count as u128)
    };
    let subadditive = all_exact.then(|| {
        (1..=n_max).all(|m| {
            (1..=n_max - m).all(|n| match (count_at(m + n), count_at(m), count_at(n)) {
                (Some(a), Some(b), Some(c)) => a <= b * c,
                _ => true,
            })
        })
    });
    let nondecreasing = rows
        .windows(2)
        .all(|w| w[0].count.count <= w[1].count.count);
    CoverEntropyEstimate {
        slope: fit.map_or(0.0, |f| f.slope),
        fit_rms_residual: fit.map_or(0.0, |f| f.rms_residual),
        fit_range: (lo, n_max),
        rows,
        subadditive,
        nondecreasing,
        all_exact,
    }
}

/// Geometric grid `max, max/2, max/4, ..` searched by [`lebesgue_number`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LebesgueGrid<T> {
    /// `None` uses the diameter of the universe.
    pub max: Option<T>,
    pub steps: usize,
}

impl<T> Default for LebesgueGrid<T> {
    fn default() -> Self {
        Self {
            max: None,
            steps: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LebesgueNumber<T> {
    /// Zero when no grid value works.
    pub value: T,
    pub found: bool,
    /// Exact threshold over the universe: every ε at or below it works.
    pub threshold: T,
}

/// Largest grid ε such that every universe ε-ball lies in one element.
pub fn lebesgue_number<T: Real>(
    cov: &CoveringSpec<T>,
    metric: &MetricSpec,
    grid: LebesgueGrid<T>,
) -> Result<LebesgueNumber<T>> {
    let u = &cov.universe;
    let members: Vec<Vec<u16>> = u.iter().map(|x| cov.memberships(x)).collect();
    // For x and an element A ∋ x, the open ε-ball stays in A iff ε ≤ distance
    // from x to the nearest universe point outside A.
    let fits: Vec<(T, T)> = (0..u.len())
        .into_par_iter()
        .map(|i| {
            let mut room = vec![T::infinity(); members[i].len()];
            let mut far = T::zero();
            for (j, y) in u.iter().enumerate() {
                let d = metric.distance(&u[i], y)?;
                far = far.max(d);
                for (slot, a) in room.iter_mut().zip(&members[i]) {
                    if d < *slot && !members[j].contains(a) {
                        *slot = d;
                    }
                }
            }
            Ok((room.into_iter().fold(T::zero(), T::max), far))
        })
        .collect::<Result<_>>()?;
    let threshold = fits.iter().fold(T::infinity(), |m, &(f, _)| m.min(f));
    let diameter = fits.iter().fold(T::zero(), |m, &(_, d)| m.max(d));
    let top = grid.max.unwrap_or(diameter);
    let half = T::lit(0.5);
    let value = (0..=grid.steps)
        .map(|k| top * half.powi(k as i32))
        .find(|&e| e > T::zero() && e <= threshold);
    Ok(LebesgueNumber {
        value: value.unwrap_or_else(T::zero),
        found: value.is_some(),
        threshold,
    })
}

/// Evenly spaced circle witnesses `k / m`, `k = 0..m`.
pub fn circle_grid<T: Real>(m: usize) -> Vec<StatePoint<T>> {
    (0..m)
        .map(|k| StatePoint::scalar(T::from_count(k) / T::from_count(m)))
        .collect()
}

/// All words of `length` over `alphabet`, in lexicographic order.
pub fn all_words<T: Real>(alphabet: usize, length: usize) -> Vec<StatePoint<T>> {
    let total = alphabet.pow(length as u32);
    (0..total)
        .map(|mut c| {
            let mut w = vec![0u8; length];
            for s in w.iter_mut().rev() {
                *s = (c % alphabet) as u8;
                c /= alphabet;
            }
            StatePoint::Word(w)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn three_arcs() -> Vec<OpenSet<f64>> {
        (0..3)
            .map(|i| OpenSet::arc(i as f64 / 3.0, i as f64 / 3.0 + 0.4))
            .collect()
    }

    #[test]
    fn covering_must_cover_universe() {
        let err =
            CoveringSpec::new(vec![OpenSet::arc(0.0, 0.5)], circle_grid::<f64>(8)).unwrap_err();
        assert_eq!(err, EntropyError::CoverageViolation { point: 4 });
        assert!(CoveringSpec::<f64>::new(vec![], vec![]).is_err());
    }

    #[test]
    fn unbounded_element_cap() {
        let far = OpenSet::complement_ball(StatePoint::scalar(0.0), 1.0, MetricSpec::Euclidean);
        let elems = vec![OpenSet::interval(-2.0, 2.0), far.clone(), far];
        assert!(CoveringSpec::with_max_unbounded(elems.clone(), vec![], 1).is_err());
        let cov = CoveringSpec::with_max_unbounded(elems, vec![], 2).unwrap();
        assert_eq!(
            cov.admissibility_flags()[1],
            Admissibility::CompactComplement
        );
        assert!(cov.elements()[1].contains(&StatePoint::Infinity));
    }

    #[test]
    fn depth_zero_is_the_covering() {
        let cov = CoveringSpec::new(three_arcs(), circle_grid(1000)).unwrap();
        let r = refine_covering(&cov, &MapSpec::CircleDoubling, 0).unwrap();
        assert_eq!(r.tuples, vec![vec![0], vec![1], vec![2]]);
    }

    #[test]
    fn shift_cylinders_refine_to_depth_three_cylinders() {
        // Oracle: the eight words of length 3, each its own element.
        let cov = CoveringSpec::new(
            vec![OpenSet::cylinder(&[0]), OpenSet::cylinder(&[1])],
            all_words::<f64>(2, 6),
        )
        .unwrap();
        let r = refine_covering(&cov, &MapSpec::full_shift(2).unwrap(), 2).unwrap();
        assert_eq!(r.len(), 8);
        for (t, m) in r.tuples.iter().zip(&r.members) {
            let want: Vec<u8> = t.iter().map(|&i| i as u8).collect();
            for &p in m {
                assert!(cov.universe()[p as usize]
                    .symbols()
                    .unwrap()
                    .starts_with(&want));
            }
            assert_eq!(m.len(), 8);
        }
    }

    #[test]
    fn doubling_two_arcs_depth_one() {
        // A0 = [0, .6), A1 = [.5, 1.1). T^{-1}A0 = [0,.3) ∪ [.5,.8), T^{-1}A1 = [.25,.55) ∪ [.75,1.05).
        // All four intersections are nonempty intervals.
        let cov = CoveringSpec::new(
            vec![OpenSet::arc(0.0, 0.6), OpenSet::arc(0.5, 1.1)],
            circle_grid(10_000),
        )
        .unwrap();
        let r = refine_covering(&cov, &MapSpec::CircleDoubling, 1).unwrap();
        assert_eq!(
            r.tuples,
            vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]
        );
    }

    #[test]
    fn refinement_membership_matches_orbit() {
        let cov = CoveringSpec::new(three_arcs(), circle_grid(500)).unwrap();
        let map = MapSpec::CircleDoubling;
        let r = refine_covering(&cov, &map, 3).unwrap();
        assert!(r.len() <= 3usize.pow(4));
        for (t, m) in r.tuples.iter().zip(&r.members) {
            for (p, x) in cov.universe().iter().enumerate() {
                let orbit = map.orbit(x, 3).unwrap();
                let inside = t
                    .iter()
                    .zip(&orbit)
                    .all(|(&i, y)| cov.elements()[i as usize].contains(y));
                assert_eq!(inside, m.binary_search(&(p as u32)).is_ok());
            }
        }
        let mut seen = vec![false; 500];
        r.members
            .iter()
            .flatten()
            .for_each(|&p| seen[p as usize] = true);
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn escaping_orbit_is_a_coverage_violation() {
        let cov = CoveringSpec::new(
            vec![OpenSet::interval(-1.0, 1.0)],
            vec![StatePoint::scalar(0.5)],
        )
        .unwrap();
        let err = refine_covering(&cov, &MapSpec::diagonal(&[2.0]).unwrap(), 2).unwrap_err();
        assert_eq!(err, EntropyError::CoverageViolation { point: 0 });
    }

    #[test]
    fn three_arcs_need_all_three() {
        // Oracle: every proper subset of the three arcs leaves a gap.
        let cov = CoveringSpec::new(three_arcs(), circle_grid(10_000)).unwrap();
        let r = refine_covering(&cov, &MapSpec::CircleDoubling, 0).unwrap();
        for mask in 1u32..7 {
            let covered: std::collections::HashSet<u32> = (0..3)
                .filter(|k| mask >> k & 1 == 1)
                .flat_map(|k| r.members[k].iter().copied())
                .collect();
            assert!(covered.len() < 10_000);
        }
        assert_eq!(
            minimal_subcover_cardinality(&r, SolverConfig::default())
                .unwrap()
                .count,
            3
        );
    }

    #[test]
    fn partition_cover_counts_nonempty_parts() {
        let parts: Vec<OpenSet<f64>> = (0..4)
            .map(|i| OpenSet::arc(i as f64 / 4.0, (i + 1) as f64 / 4.0))
            .collect();
        let cov = CoveringSpec::new(parts, circle_grid(64)).unwrap();
        let r = refine_covering(&cov, &MapSpec::CircleRotation { turns: 0.0 }, 0).unwrap();
        assert_eq!(
            minimal_subcover_cardinality(&r, SolverConfig::default())
                .unwrap()
                .count,
            4
        );
    }

    #[test]
    fn full_shift_counts_are_powers_of_two() {
        let cov = CoveringSpec::new(
            vec![OpenSet::cylinder(&[0]), OpenSet::cylinder(&[1])],
            all_words::<f64>(2, 9),
        )
        .unwrap();
        let est = covering_entropy(
            &cov,
            &MapSpec::full_shift(2).unwrap(),
            7,
            SolverConfig::default(),
        )
        .unwrap();
        for row in &est.rows {
            assert_eq!(row.count.count, 1 << (row.n + 1));
        }
        assert!((est.slope - 2f64.ln()).abs() < 1e-12);
        assert_eq!(est.subadditive, Some(true));
    }

    #[test]
    fn identity_has_zero_slope() {
        let cov = CoveringSpec::new(
            vec![OpenSet::interval(-1.0, 0.2), OpenSet::interval(0.0, 1.0)],
            (0..200)
                .map(|k| StatePoint::scalar(-1.0 + k as f64 / 100.0))
                .collect(),
        )
        .unwrap();
        let est = covering_entropy(
            &cov,
            &MapSpec::diagonal(&[1.0]).unwrap(),
            5,
            SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(est.slope, 0.0);
        assert!(est.rows.iter().all(|r| r.count.count == 2));
    }

    #[test]
    fn lebesgue_number_of_two_long_arcs() {
        // Overlaps [0, .25) and [.5, .75) have half-width 1/8.
        let cov = CoveringSpec::new(
            vec![OpenSet::arc(0.0, 0.75), OpenSet::arc(0.5, 1.25)],
            circle_grid(4096),
        )
        .unwrap();
        let ln = lebesgue_number(
            &cov,
            &MetricSpec::CircleArc,
            LebesgueGrid {
                max: Some(1.0_f64),
                steps: 30,
            },
        )
        .unwrap();
        assert!(ln.found);
        assert!(ln.value >= 0.0625);
        assert!(ln.value <= 0.125 + 1.0 / 4096.0);
        assert!((ln.threshold - 0.125).abs() <= 1.0 / 4096.0);
    }

    #[test]
    fn lebesgue_number_edge_cases() {
        let univ: Vec<StatePoint<f64>> = (0..10).map(|k| StatePoint::scalar(k as f64)).collect();
        let touching = CoveringSpec::new(
            vec![OpenSet::interval(0.0, 5.0), OpenSet::interval(5.0, 10.0)],
            univ.clone(),
        )
        .unwrap();
        let ln =
            lebesgue_number(&touching, &MetricSpec::Euclidean, LebesgueGrid::default()).unwrap();
        assert!(ln.found && ln.value > 0.0);

        let single = CoveringSpec::new(vec![OpenSet::interval(-1.0, 11.0)], univ).unwrap();
        let ln = lebesgue_number(&single, &MetricSpec::Euclidean, LebesgueGrid::default()).unwrap();
        assert_eq!(ln.value, 9.0);
    }
}
