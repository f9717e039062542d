//! State spaces, maps, orbits and metrics shared by every estimator.

mod matrix;
mod metric;

use serde::{Deserialize, Serialize};

use crate::error::{EntropyError, Result};
use crate::nilpotent::{
    automorphism_apply, exp_algebra, log_group, AlgebraAutomorphism, HeisenbergAlgebraElement,
};
use crate::scalar::Real;

pub use matrix::SquareMatrix;
pub use metric::{bowen_distance, bowen_distance_of_orbits, stereographic_embedding, MetricSpec};

/// Default length of the finite words standing in for one-sided sequences.
pub const DEFAULT_WORD_LENGTH: usize = 32;

/// Ambient space of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Space {
    /// ℝ^dim.
    Euclidean { dim: usize },
    /// ℝ/ℤ parameterized by `[0, 1)`.
    Circle,
    /// One-sided sequences over `{0, .., alphabet - 1}`.
    Shift { alphabet: usize },
    /// Heisenberg group in exponential coordinates.
    Heisenberg,
}

impl Space {
    pub fn coordinate_dim(&self) -> Option<usize> {
        match self {
            Space::Euclidean { dim } => Some(*dim),
            Space::Circle => Some(1),
            Space::Heisenberg => Some(3),
            Space::Shift { .. } => None,
        }
    }

    /// Whether the space is non-compact, so that a point at infinity makes sense.
    pub fn admits_infinity(&self) -> bool {
        matches!(self, Space::Euclidean { .. } | Space::Heisenberg)
    }

    pub fn check<T: Real>(&self, x: &StatePoint<T>) -> Result<()> {
        match (self, x) {
            (_, StatePoint::Infinity) if self.admits_infinity() => Ok(()),
            (Space::Shift { alphabet }, StatePoint::Word(w)) => {
                match w.iter().find(|&&s| s as usize >= *alphabet) {
                    Some(s) => Err(EntropyError::domain(format!(
                        "symbol {s} outside alphabet of size {alphabet}"
                    ))),
                    None => Ok(()),
                }
            }
            (_, StatePoint::Vector(v)) if Some(v.len()) == self.coordinate_dim() => Ok(()),
            _ => Err(EntropyError::domain(format!(
                "state {x:?} does not belong to {self:?}"
            ))),
        }
    }
}

/// A point of one of the state spaces, or the point at infinity of a
/// one-point compactification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatePoint<T> {
    Vector(Vec<T>),
    Word(Vec<u8>),
    Infinity,
}

impl<T: Real> StatePoint<T> {
    pub fn scalar(x: T) -> Self {
        Self::Vector(vec![x])
    }

    pub fn word(symbols: &[u8]) -> Self {
        Self::Word(symbols.to_vec())
    }

    /// Parses a word like `"0110"`.
    pub fn word_from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| {
                c.to_digit(36)
                    .map(|d| d as u8)
                    .ok_or_else(|| EntropyError::domain(format!("bad symbol {c:?} in word")))
            })
            .collect::<Result<Vec<u8>>>()
            .map(Self::Word)
    }

    pub fn coords(&self) -> Option<&[T]> {
        match self {
            Self::Vector(v) => Some(v),
            _ => None,
        }
    }

    pub fn symbols(&self) -> Option<&[u8]> {
        match self {
            Self::Word(w) => Some(w),
            _ => None,
        }
    }

    pub fn is_infinity(&self) -> bool {
        matches!(self, Self::Infinity)
    }

    fn is_finite(&self) -> bool {
        match self {
            Self::Vector(v) => v.iter().all(|x| x.is_finite()),
            _ => true,
        }
    }
}

/// A dynamical system `T : X → X` as an evaluable forward map.
///
/// Every kind extends to the one-point compactification by fixing
/// [`StatePoint::Infinity`].
#[derive(Debug, Clone, PartialEq)]
pub enum MapSpec<T> {
    Linear(SquareMatrix<T>),
    CircleDoubling,
    CircleRotation { turns: T },
    FullShift { alphabet: usize },
    HeisenbergAutomorphism(AlgebraAutomorphism<T>),
    Composition(Vec<MapSpec<T>>),
}

/// Relative determinant threshold for accepting a linear map.
pub const INVERTIBILITY_TOL: f64 = 1e-12;

impl<T: Real> MapSpec<T> {
    /// Linear map; the matrix must be invertible.
    pub fn linear(m: SquareMatrix<T>) -> Result<Self> {
        if !m.is_finite() {
            return Err(EntropyError::domain("matrix has non-finite entries"));
        }
        let scale = m.max_abs().max(T::one()).powi(m.dim() as i32);
        if m.determinant().abs() <= T::lit(INVERTIBILITY_TOL) * scale {
            return Err(EntropyError::domain("linear map is not invertible"));
        }
        Ok(Self::Linear(m))
    }

    pub fn diagonal(diag: &[T]) -> Result<Self> {
        Self::linear(SquareMatrix::diagonal(diag))
    }

    pub fn full_shift(alphabet: usize) -> Result<Self> {
        if !(2..=256).contains(&alphabet) {
            return Err(EntropyError::domain(format!(
                "alphabet size {alphabet} outside 2..=256"
            )));
        }
        Ok(Self::FullShift { alphabet })
    }

    /// Applies `maps[0]` first.
    pub fn composition(maps: Vec<MapSpec<T>>) -> Result<Self> {
        let first = maps
            .first()
            .ok_or_else(|| EntropyError::domain("empty composition"))?
            .domain();
        if let Some(bad) = maps.iter().find(|m| m.domain() != first) {
            return Err(EntropyError::domain(format!(
                "composition mixes spaces {first:?} and {:?}",
                bad.domain()
            )));
        }
        Ok(Self::Composition(maps))
    }

    pub fn domain(&self) -> Space {
        match self {
            MapSpec::Linear(m) => Space::Euclidean { dim: m.dim() },
            MapSpec::CircleDoubling | MapSpec::CircleRotation { .. } => Space::Circle,
            MapSpec::FullShift { alphabet } => Space::Shift {
                alphabet: *alphabet,
            },
            MapSpec::HeisenbergAutomorphism(_) => Space::Heisenberg,
            MapSpec::Composition(maps) => maps[0].domain(),
        }
    }

    /// `T(x)`.
    pub fn apply(&self, x: &StatePoint<T>) -> Result<StatePoint<T>> {
        self.domain().check(x)?;
        self.apply_unchecked(x)
    }

    fn apply_unchecked(&self, x: &StatePoint<T>) -> Result<StatePoint<T>> {
        if x.is_infinity() {
            return Ok(StatePoint::Infinity);
        }
        Ok(match self {
            MapSpec::Linear(m) => StatePoint::Vector(m.mul_vec(x.coords().unwrap())),
            MapSpec::CircleDoubling => {
                let t = x.coords().unwrap()[0];
                StatePoint::scalar(wrap_unit(t + t))
            }
            MapSpec::CircleRotation { turns } => {
                StatePoint::scalar(wrap_unit(x.coords().unwrap()[0] + *turns))
            }
            MapSpec::FullShift { .. } => {
                let w = x.symbols().unwrap();
                if w.is_empty() {
                    return Err(EntropyError::domain("cannot shift an exhausted word"));
                }
                StatePoint::Word(w[1..].to_vec())
            }
            MapSpec::HeisenbergAutomorphism(l) => {
                let c = x.coords().unwrap();
                let g = exp_algebra(HeisenbergAlgebraElement::new(c[0], c[1], c[2]));
                StatePoint::Vector(log_group(automorphism_apply(l, g)).to_array().to_vec())
            }
            MapSpec::Composition(maps) => {
                let mut y = x.clone();
                for m in maps {
                    y = m.apply_unchecked(&y)?;
                }
                y
            }
        })
    }

    /// `[x, T(x), .., T^n(x)]`.
    pub fn orbit(&self, x: &StatePoint<T>, n: usize) -> Result<Vec<StatePoint<T>>> {
        self.domain().check(x)?;
        let mut out = Vec::with_capacity(n + 1);
        out.push(x.clone());
        for i in 1..=n {
            let next = self.apply_unchecked(&out[i - 1])?;
            if !next.is_finite() {
                return Err(EntropyError::Divergence { index: i });
            }
            out.push(next);
        }
        Ok(out)
    }
}

/// Reduces to `[0, 1)`.
pub fn wrap_unit<T: Real>(t: T) -> T {
    let r = t - t.floor();
    // t slightly below an integer can round up to exactly 1.
    if r >= T::one() {
        T::zero()
    } else {
        r
    }
}

/// `Space::Circle` state from an angle in turns.
pub fn circle_point<T: Real>(turns: T) -> StatePoint<T> {
    StatePoint::scalar(wrap_unit(turns))
}
