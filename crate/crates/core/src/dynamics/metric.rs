use serde::{Deserialize, Serialize};

use super::{MapSpec, StatePoint};
use crate::error::{EntropyError, Result};
use crate::scalar::Real;

/// Distance functions on the state spaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetricSpec {
    Euclidean,
    /// `min(|x - y|, 1 - |x - y|)` on `[0, 1)`.
    CircleArc,
    /// `2^-k` with `k` the length of the longest common prefix.
    ShiftCylinder,
    /// Chordal distance after inverse stereographic projection of ℝ^d onto
    /// the unit sphere `S^d`; infinity goes to the north pole.
    Compactified {
        base_dimension: usize,
    },
}

impl MetricSpec {
    pub fn distance<T: Real>(&self, x: &StatePoint<T>, y: &StatePoint<T>) -> Result<T> {
        self.raw_distance(x, y).ok_or_else(|| {
            EntropyError::domain(format!(
                "metric {self:?} is not defined between {x:?} and {y:?}"
            ))
        })
    }

    /// `None` when the points do not live in a space this metric measures.
    pub(crate) fn raw_distance<T: Real>(&self, x: &StatePoint<T>, y: &StatePoint<T>) -> Option<T> {
        use StatePoint::*;
        match (self, x, y) {
            (MetricSpec::Euclidean, Vector(a), Vector(b)) if a.len() == b.len() => Some(
                a.iter()
                    .zip(b)
                    .fold(T::zero(), |acc, (&p, &q)| acc.hypot(p - q)),
            ),
            (MetricSpec::CircleArc, Vector(a), Vector(b)) if a.len() == 1 && b.len() == 1 => {
                let d = (a[0] - b[0]).abs();
                let d = d - d.floor();
                Some(d.min(T::one() - d))
            }
            (MetricSpec::ShiftCylinder, Word(u), Word(v)) if u.len() == v.len() => {
                let k = u.iter().zip(v).take_while(|(a, b)| a == b).count();
                if k == u.len() {
                    Some(T::zero())
                } else {
                    Some(T::lit(0.5).powi(k as i32))
                }
            }
            (MetricSpec::Compactified { base_dimension }, _, _) => chordal(*base_dimension, x, y),
            _ => None,
        }
    }

    /// Upper bound on distances, when the metric is bounded.
    pub fn diameter_bound<T: Real>(&self) -> Option<T> {
        match self {
            MetricSpec::Euclidean => None,
            MetricSpec::CircleArc => Some(T::lit(0.5)),
            MetricSpec::ShiftCylinder => Some(T::one()),
            MetricSpec::Compactified { .. } => Some(T::lit(2.0)),
        }
    }
}

fn chordal<T: Real>(dim: usize, x: &StatePoint<T>, y: &StatePoint<T>) -> Option<T> {
    use StatePoint::*;
    let two = T::lit(2.0);
    // sqrt(1 + |v|^2) without overflow
    let lift = |v: &[T]| v.iter().fold(T::one(), |acc, &c| acc.hypot(c));
    match (x, y) {
        (Infinity, Infinity) => Some(T::zero()),
        (Vector(v), Infinity) | (Infinity, Vector(v)) if v.len() == dim => Some(two / lift(v)),
        (Vector(a), Vector(b)) if a.len() == dim && b.len() == dim => {
            let diff = a
                .iter()
                .zip(b)
                .fold(T::zero(), |acc, (&p, &q)| acc.hypot(p - q));
            Some(two * (diff / lift(a)) / lift(b))
        }
        _ => None,
    }
}

/// Inverse stereographic projection `ℝ^d → S^d ⊂ ℝ^{d+1}`.
///
/// `x ↦ (2x, |x|² - 1) / (1 + |x|²)`, infinity to `(0, .., 0, 1)`.
pub fn stereographic_embedding<T: Real>(dim: usize, x: &StatePoint<T>) -> Result<Vec<T>> {
    match x {
        StatePoint::Infinity => {
            let mut p = vec![T::zero(); dim + 1];
            p[dim] = T::one();
            Ok(p)
        }
        StatePoint::Vector(v) if v.len() == dim => {
            let r2 = v.iter().fold(T::zero(), |a, &c| a + c * c);
            let den = T::one() + r2;
            let mut p: Vec<T> = v.iter().map(|&c| (c + c) / den).collect();
            p.push((r2 - T::one()) / den);
            Ok(p)
        }
        _ => Err(EntropyError::domain(format!(
            "{x:?} is not a point of R^{dim} or infinity"
        ))),
    }
}

/// `d_n(x, y) = max_{0 ≤ i ≤ n} d(T^i x, T^i y)`.
pub fn bowen_distance<T: Real>(
    map: &MapSpec<T>,
    metric: &MetricSpec,
    n: usize,
    x: &StatePoint<T>,
    y: &StatePoint<T>,
) -> Result<T> {
    let ox = map.orbit(x, n)?;
    let oy = map.orbit(y, n)?;
    bowen_distance_of_orbits(metric, &ox, &oy)
}

/// Bowen distance of two precomputed orbit prefixes of equal length.
pub fn bowen_distance_of_orbits<T: Real>(
    metric: &MetricSpec,
    ox: &[StatePoint<T>],
    oy: &[StatePoint<T>],
) -> Result<T> {
    ox.iter()
        .zip(oy)
        .try_fold(T::zero(), |m, (a, b)| Ok(m.max(metric.distance(a, b)?)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::SquareMatrix;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> StatePoint<f64> {
        StatePoint::Vector(xs.to_vec())
    }

    #[test]
    fn euclidean_example() {
        assert_eq!(
            MetricSpec::Euclidean
                .distance(&v(&[0.0]), &v(&[3.0]))
                .unwrap(),
            3.0
        );
        assert!(MetricSpec::Euclidean
            .distance(&v(&[0.0]), &v(&[3.0, 1.0]))
            .is_err());
    }

    #[test]
    fn cylinder_example() {
        let d = MetricSpec::ShiftCylinder
            .distance::<f64>(
                &StatePoint::word_from_str("010").unwrap(),
                &StatePoint::word_from_str("011").unwrap(),
            )
            .unwrap();
        assert_eq!(d, 0.25);
    }

    #[test]
    fn circle_arc_wraps() {
        let d = MetricSpec::CircleArc
            .distance(&v(&[0.05]), &v(&[0.95]))
            .unwrap();
        assert!((d - 0.1).abs() < 1e-15);
    }

    #[test]
    fn compactified_distance_to_pole_is_approached_monotonically() {
        let m = MetricSpec::Compactified { base_dimension: 1 };
        let origin = v(&[0.0]);
        let to_pole: f64 = m.distance(&origin, &StatePoint::Infinity).unwrap();
        // Embedding formula: origin ↦ (0, -1), pole (0, 1), so the limit is 2.
        assert!((to_pole - 2.0).abs() < 1e-15);
        let ds: Vec<f64> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&t| m.distance(&origin, &v(&[t])).unwrap())
            .collect();
        let gaps: Vec<f64> = ds.iter().map(|d| to_pole - d).collect();
        assert!(ds.windows(2).all(|w| w[0] < w[1]));
        assert!(gaps.windows(2).all(|w| w[1] < w[0]));
        assert!(ds.iter().all(|&d| d <= 2.0));
        // Embedding of t is (2t, t²-1)/(1+t²); chord to (0,-1) is 2t/sqrt(1+t²).
        for (&t, &d) in [10.0_f64, 100.0, 1000.0].iter().zip(&ds) {
            assert!((d - 2.0 * t / (1.0 + t * t).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn compactified_matches_embedding_route() {
        let m = MetricSpec::Compactified { base_dimension: 2 };
        let pts = [
            v(&[0.3, -1.2]),
            v(&[40.0, 7.0]),
            v(&[-1e3, 2e3]),
            StatePoint::Infinity,
        ];
        for a in &pts {
            for b in &pts {
                let ea = stereographic_embedding(2, a).unwrap();
                let eb = stereographic_embedding(2, b).unwrap();
                let chord = ea
                    .iter()
                    .zip(&eb)
                    .map(|(p, q)| (p - q) * (p - q))
                    .sum::<f64>()
                    .sqrt();
                let d: f64 = m.distance(a, b).unwrap();
                assert!((d - chord).abs() < 1e-12, "{a:?} {b:?}: {d} vs {chord}");
            }
        }
    }

    #[test]
    fn bowen_examples() {
        let t = MapSpec::diagonal(&[2.0]).unwrap();
        let d = bowen_distance(&t, &MetricSpec::Euclidean, 3, &v(&[0.0]), &v(&[1.0])).unwrap();
        assert_eq!(d, 8.0);

        let rot = MapSpec::linear(SquareMatrix::rotation(0.7)).unwrap();
        let (x, y) = (v(&[0.3, 0.1]), v(&[-0.5, 0.9]));
        let d0 = MetricSpec::Euclidean.distance(&x, &y).unwrap();
        for n in [0, 1, 5, 20] {
            let dn = bowen_distance(&rot, &MetricSpec::Euclidean, n, &x, &y).unwrap();
            assert!((dn - d0).abs() < 1e-12);
        }
    }

    #[test]
    fn bowen_zero_steps_is_the_metric() {
        let t = MapSpec::<f64>::CircleDoubling;
        let (x, y) = (v(&[0.1]), v(&[0.37]));
        assert_eq!(
            bowen_distance(&t, &MetricSpec::CircleArc, 0, &x, &y).unwrap(),
            MetricSpec::CircleArc.distance(&x, &y).unwrap()
        );
    }

    fn metric_axioms(m: MetricSpec, pts: &[StatePoint<f64>]) {
        for a in pts {
            assert_eq!(m.distance(a, a).unwrap(), 0.0);
            for b in pts {
                let dab = m.distance(a, b).unwrap();
                assert!((dab - m.distance(b, a).unwrap()).abs() <= 1e-12);
                if a != b {
                    assert!(dab > 0.0, "{a:?} {b:?}");
                }
                for c in pts {
                    assert!(dab <= m.distance(a, c).unwrap() + m.distance(c, b).unwrap() + 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn euclidean_and_compactified_axioms(pts in prop::collection::vec(prop::collection::vec(-1e3..1e3_f64, 2), 3)) {
            let pts: Vec<_> = pts.into_iter().map(StatePoint::Vector).chain([StatePoint::Infinity]).collect();
            metric_axioms(MetricSpec::Euclidean, &pts[..3]);
            metric_axioms(MetricSpec::Compactified { base_dimension: 2 }, &pts);
            let m = MetricSpec::Compactified { base_dimension: 2 };
            for a in &pts {
                for b in &pts {
                    let d: f64 = m.distance(a, b).unwrap();
                    prop_assert!(d <= 2.0);
                }
            }
        }

        #[test]
        fn circle_axioms(pts in prop::collection::vec(0.0..1.0_f64, 3)) {
            let pts: Vec<_> = pts.into_iter().map(StatePoint::scalar).collect();
            metric_axioms(MetricSpec::CircleArc, &pts);
        }

        #[test]
        fn cylinder_axioms_and_shift_expansivity(words in prop::collection::vec(prop::collection::vec(0u8..2, 12), 3)) {
            let pts: Vec<StatePoint<f64>> = words.into_iter().map(StatePoint::Word).collect();
            metric_axioms(MetricSpec::ShiftCylinder, &pts);
            let s = MapSpec::full_shift(2).unwrap();
            for a in &pts {
                for b in &pts {
                    let d = MetricSpec::ShiftCylinder.distance(a, b).unwrap();
                    let d1 = MetricSpec::ShiftCylinder.distance(&s.apply(a).unwrap(), &s.apply(b).unwrap()).unwrap();
                    prop_assert!(d1 <= 2.0 * d);
                }
            }
        }

        #[test]
        fn bowen_distance_nondecreasing(x in -2.0..2.0_f64, y in -2.0..2.0_f64, a in 0.3..1.8_f64) {
            let t = MapSpec::diagonal(&[a, 1.0 / a]).unwrap();
            let m = MetricSpec::Compactified { base_dimension: 2 };
            let (px, py) = (v(&[x, y]), v(&[y, x]));
            let ds: Vec<f64> = (0..8).map(|n| bowen_distance(&t, &m, n, &px, &py).unwrap()).collect();
            prop_assert!(ds.windows(2).all(|w| w[0] <= w[1]));
            prop_assert_eq!(ds[0], m.distance(&px, &py).unwrap());
        }
    }
}
