//! Spot checks for `f ∘ S = T ∘ f` with a sampled properness probe and paired
//! entropy estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{automorphism_apply, exp_algebra, AlgebraAutomorphism, HeisenbergAlgebraElement, HeisenbergGroupElement};
use crate::bowen::{metric_entropy_estimate, BowenConfig, SampleRegion, Schedule};
use crate::dynamics::{wrap_unit, MapSpec, MetricSpec, StatePoint};
use crate::error::{EntropyError, Result};
use crate::scalar::Real;

/// A state map given as a closure.
pub type PointMap<'a, T> = &'a (dyn Fn(&StatePoint<T>) -> Result<StatePoint<T>> + Sync);

/// Samples shells `base_radius * 2^k <= |y| < base_radius * 2^{k+1}` of a
/// euclidean source and records which samples `f` sends into the target ball.
/// The probe passes when no sample in the outer half of the shells does.
#[derive(Debug, Clone, PartialEq)]
pub struct PropernessProbe<T> {
    pub center: StatePoint<T>,
    pub radius: T,
    pub metric: MetricSpec,
    pub source_dim: usize,
    pub base_radius: T,
    pub shells: usize,
    pub samples_per_shell: usize,
    pub seed: u64,
}

impl<T: Real> PropernessProbe<T> {
    pub fn new(center: StatePoint<T>, radius: T, metric: MetricSpec, source_dim: usize) -> Self {
        Self { center, radius, metric, source_dim, base_radius: T::one(), shells: 16, samples_per_shell: 64, seed: 0 }
    }

    pub fn run(&self, f: PointMap<'_, T>) -> Result<ProbeOutcome> {
        if self.source_dim == 0 || self.shells < 2 || self.samples_per_shell == 0 {
            return Err(EntropyError::domain("properness probe needs a source dimension, 2 shells and 1 sample"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut hits_per_shell = vec![0; self.shells];
        let mut largest = 0.0f64;
        for (k, hits) in hits_per_shell.iter_mut().enumerate() {
            let r = self.base_radius.as_f64() * 2f64.powi(k as i32);
            for _ in 0..self.samples_per_shell {
                let dir = loop {
                    let v: Vec<f64> = (0..self.source_dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if norm > 1e-3 && norm <= 1.0 {
                        break v.into_iter().map(|x| x / norm).collect::<Vec<_>>();
                    }
                };
                let len = r * (1.0 + rng.random_range(0.0..1.0));
                let y = StatePoint::Vector(dir.iter().map(|&d| T::lit(d * len)).collect());
                let inside = f(&y)
                    .ok()
                    .and_then(|x| self.metric.distance(&self.center, &x).ok())
                    .is_some_and(|d| d < self.radius);
                if inside {
                    *hits += 1;
                    largest = largest.max(len);
                }
            }
        }
        let passed = hits_per_shell[self.shells / 2..].iter().all(|&h| h == 0);
        Ok(ProbeOutcome { passed, hits_per_shell, largest_preimage_norm: largest, samples: self.shells * self.samples_per_shell })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeOutcome {
    /// Bounded preimage on the sample; a probe, not a proof.
    pub passed: bool,
    pub hits_per_shell: Vec<usize>,
    pub largest_preimage_norm: f64,
    pub samples: usize,
}

/// Inputs of one Bowen estimate.
#[derive(Debug, Clone)]
pub struct EstimatePlan<T: Real> {
    pub map: MapSpec<T>,
    pub metric: MetricSpec,
    pub region: SampleRegion<T>,
    pub schedule: Schedule<T>,
    pub config: BowenConfig,
}

impl<T: Real> EstimatePlan<T> {
    pub fn run(&self) -> Result<Option<f64>> {
        Ok(metric_entropy_estimate(&self.map, &self.metric, &self.region, &self.schedule, &self.config)?.value)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairedEstimates {
    /// Estimate for `S` on the source.
    pub source: Option<f64>,
    /// Estimate for `T` on the target.
    pub target: Option<f64>,
}

impl PairedEstimates {
    pub fn difference(&self) -> Option<f64> {
        Some((self.source? - self.target?).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SemiconjugacyReport {
    /// Largest `d(f(S y), T(f y))` over the samples that evaluated.
    pub residual: f64,
    pub samples: usize,
    pub evaluation_failures: usize,
    pub probe: Option<ProbeOutcome>,
    pub estimates: Option<PairedEstimates>,
}

/// Evaluates `f ∘ S` against `T ∘ f` on the samples.
pub fn semiconjugacy_check<T: Real>(
    f: PointMap<'_, T>,
    s: PointMap<'_, T>,
    t: PointMap<'_, T>,
    samples: &[StatePoint<T>],
    residual_metric: &MetricSpec,
    probe: Option<&PropernessProbe<T>>,
    estimates: Option<(&EstimatePlan<T>, &EstimatePlan<T>)>,
) -> Result<SemiconjugacyReport> {
    let mut residual = 0.0f64;
    let mut failures = 0;
    for y in samples {
        let r = (|| {
            let lhs = f(&s(y)?)?;
            let rhs = t(&f(y)?)?;
            residual_metric.distance(&lhs, &rhs)
        })();
        match r {
            Ok(d) => residual = residual.max(d.as_f64()),
            Err(_) => failures += 1,
        }
    }
    let probe = probe.map(|p| p.run(f)).transpose()?;
    let estimates = estimates
        .map(|(src, tgt)| Ok::<_, EntropyError>(PairedEstimates { source: src.run()?, target: tgt.run()? }))
        .transpose()?;
    Ok(SemiconjugacyReport { residual, samples: samples.len(), evaluation_failures: failures, probe, estimates })
}

fn vec3<T: Real>(y: &StatePoint<T>) -> Result<[T; 3]> {
    match y.coords() {
        Some(&[a, b, c]) => Ok([a, b, c]),
        _ => Err(EntropyError::domain("expected a point of R^3")),
    }
}

fn group_point<T: Real>(g: HeisenbergGroupElement<T>) -> StatePoint<T> {
    StatePoint::Vector(vec![g.x, g.y, g.z])
}

/// `f = exp` from the algebra to the group in matrix coordinates, `S = L`,
/// `T = φ`. The probe targets the unit ball around the identity.
pub fn exp_conjugacy_check<T: Real>(
    l: &AlgebraAutomorphism<T>,
    samples: &[StatePoint<T>],
    seed: u64,
) -> Result<SemiconjugacyReport> {
    let f = |y: &StatePoint<T>| Ok(group_point(exp_algebra(HeisenbergAlgebraElement::from_array(vec3(y)?))));
    let s = |y: &StatePoint<T>| Ok(StatePoint::Vector(l.apply(HeisenbergAlgebraElement::from_array(vec3(y)?)).to_array().to_vec()));
    let t = |g: &StatePoint<T>| {
        let [x, y, z] = vec3(g)?;
        Ok(group_point(automorphism_apply(l, HeisenbergGroupElement::from_matrix_entries(x, y, z))))
    };
    let mut probe = PropernessProbe::new(StatePoint::Vector(vec![T::zero(); 3]), T::one(), MetricSpec::Euclidean, 3);
    probe.seed = seed;
    semiconjugacy_check(&f, &s, &t, samples, &MetricSpec::Euclidean, Some(&probe), None)
}

/// `f(x) = e^{ix}` from the line onto the circle (in turns), `S = 2x`,
/// `T = z²`. The probe targets the arc of radius 0.1 around `1`.
pub fn covering_projection_check<T: Real>(
    samples: &[StatePoint<T>],
    seed: u64,
    estimates: Option<(&EstimatePlan<T>, &EstimatePlan<T>)>,
) -> Result<SemiconjugacyReport> {
    let f = |y: &StatePoint<T>| match y.coords() {
        Some(&[x]) => Ok(StatePoint::scalar(wrap_unit(x / T::TAU()))),
        _ => Err(EntropyError::domain("expected a point of R")),
    };
    let double = MapSpec::diagonal(&[T::lit(2.0)])?;
    let s = |y: &StatePoint<T>| double.apply(y);
    let t = |z: &StatePoint<T>| MapSpec::CircleDoubling.apply(z);
    let mut probe = PropernessProbe::new(StatePoint::scalar(T::zero()), T::lit(0.1), MetricSpec::CircleArc, 1);
    probe.seed = seed;
    semiconjugacy_check(&f, &s, &t, samples, &MetricSpec::CircleArc, Some(&probe), estimates)
}

/// `f = id` and `S = T = map`.
pub fn identity_check<T: Real>(
    map: &MapSpec<T>,
    metric: &MetricSpec,
    samples: &[StatePoint<T>],
    probe: Option<&PropernessProbe<T>>,
) -> Result<SemiconjugacyReport> {
    let f = |y: &StatePoint<T>| Ok(y.clone());
    let s = |y: &StatePoint<T>| map.apply(y);
    semiconjugacy_check(&f, &s, &s, samples, metric, probe, None)
}
