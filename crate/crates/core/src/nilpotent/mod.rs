//! The three-dimensional Heisenberg group, the minimal non-abelian simply
//! connected nilpotent Lie group.
//!
//! Algebra basis `X, Y, Z` with `[X, Y] = Z` and every other bracket zero.
//! Group elements are stored as the upper-triangular unipotent matrix
//!
//! ```text
//! | 1  x  z |
//! | 0  1  y |
//! | 0  0  1 |
//! ```
//!
//! so that the group law is polynomial and `exp`/`log` are finite series.
//! Everything here only needs field arithmetic, so exact rationals work as
//! well as floats.

mod semiconjugacy;

use std::ops::Mul;

use num_traits::{FromPrimitive, Num, Signed};
use serde::{Deserialize, Serialize};

use crate::dynamics::SquareMatrix;
use crate::error::{EntropyError, Result};

pub use semiconjugacy::{
    covering_projection_check, exp_conjugacy_check, identity_check, semiconjugacy_check, EstimatePlan,
    PairedEstimates, PointMap, ProbeOutcome, PropernessProbe, SemiconjugacyReport,
};

fn two<T: Num>() -> T {
    T::one() + T::one()
}

/// `a X + b Y + c Z` in the Lie algebra.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeisenbergAlgebraElement<T> {
    pub a: T,
    pub b: T,
    pub c: T,
}

impl<T: Num + Copy> HeisenbergAlgebraElement<T> {
    pub fn new(a: T, b: T, c: T) -> Self {
        Self { a, b, c }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn basis() -> [Self; 3] {
        let (o, z) = (T::one(), T::zero());
        [Self::new(o, z, z), Self::new(z, o, z), Self::new(z, z, o)]
    }

    pub fn to_array(self) -> [T; 3] {
        [self.a, self.b, self.c]
    }

    pub fn from_array([a, b, c]: [T; 3]) -> Self {
        Self::new(a, b, c)
    }

    pub fn add(self, o: Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c)
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s)
    }

    /// Lie bracket; only the `Z` component survives.
    pub fn bracket(self, o: Self) -> Self {
        Self::new(T::zero(), T::zero(), self.a * o.b - self.b * o.a)
    }
}

/// Group element in unipotent matrix coordinates `(x, y, z)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeisenbergGroupElement<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Num + Copy> HeisenbergGroupElement<T> {
    pub fn from_matrix_entries(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn identity() -> Self {
        Self::from_matrix_entries(T::zero(), T::zero(), T::zero())
    }

    /// Reads a 3x3 unipotent upper-triangular matrix.
    pub fn from_matrix(m: [[T; 3]; 3]) -> Result<Self> {
        let (o, z) = (T::one(), T::zero());
        let shape_ok = m[0][0] == o
            && m[1][1] == o
            && m[2][2] == o
            && m[1][0] == z
            && m[2][0] == z
            && m[2][1] == z;
        if !shape_ok {
            return Err(EntropyError::domain(
                "not a unipotent upper-triangular 3x3 matrix",
            ));
        }
        Ok(Self::from_matrix_entries(m[0][1], m[1][2], m[0][2]))
    }

    pub fn to_matrix(self) -> [[T; 3]; 3] {
        let (o, z) = (T::one(), T::zero());
        [[o, self.x, self.z], [z, o, self.y], [z, z, o]]
    }

    pub fn inverse(self) -> Self {
        Self::from_matrix_entries(
            T::zero() - self.x,
            T::zero() - self.y,
            self.x * self.y - self.z,
        )
    }
}

impl<T: Num + Copy> Mul for HeisenbergGroupElement<T> {
    type Output = Self;

    fn mul(self, o: Self) -> Self {
        Self::from_matrix_entries(self.x + o.x, self.y + o.y, self.z + o.z + self.x * o.y)
    }
}

/// `exp(N) = I + N + N²/2`; `N³ = 0`.
pub fn exp_algebra<T: Num + Copy>(v: HeisenbergAlgebraElement<T>) -> HeisenbergGroupElement<T> {
    HeisenbergGroupElement::from_matrix_entries(v.a, v.b, v.c + v.a * v.b / two())
}

/// `log(I + N) = N - N²/2`; inverse of [`exp_algebra`].
pub fn log_group<T: Num + Copy>(g: HeisenbergGroupElement<T>) -> HeisenbergAlgebraElement<T> {
    HeisenbergAlgebraElement::new(g.x, g.y, g.z - g.x * g.y / two())
}

/// Group product written in exponential coordinates:
/// `log(exp u · exp v) = u + v + [u, v] / 2`.
pub fn bch_product<T: Num + Copy>(
    u: HeisenbergAlgebraElement<T>,
    v: HeisenbergAlgebraElement<T>,
) -> HeisenbergAlgebraElement<T> {
    u.add(v).add(u.bracket(v).scale(T::one() / two()))
}

/// Linear map `L` of the algebra acting on coefficient vectors `(a, b, c)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<Vec<T>>",
    into = "Vec<Vec<T>>",
    bound(
        serialize = "T: Copy + Serialize",
        deserialize = "T: Num + Copy + Signed + PartialOrd + Default + FromPrimitive + Deserialize<'de>"
    )
)]
pub struct AlgebraAutomorphism<T> {
    matrix: [[T; 3]; 3],
}

impl<T: Num + Copy> AlgebraAutomorphism<T> {
    /// Wraps `matrix` without checking bracket preservation.
    pub fn new_unchecked(matrix: [[T; 3]; 3]) -> Self {
        Self { matrix }
    }

    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self::new_unchecked([[o, z, z], [z, o, z], [z, z, o]])
    }

    /// Graded dilation `diag(λ, μ, λμ)`, an automorphism for any nonzero λ, μ.
    pub fn dilation(lambda: T, mu: T) -> Self {
        let z = T::zero();
        Self::new_unchecked([[lambda, z, z], [z, mu, z], [z, z, lambda * mu]])
    }

    pub fn matrix(&self) -> [[T; 3]; 3] {
        self.matrix
    }

    pub fn to_square_matrix(&self) -> SquareMatrix<T> {
        SquareMatrix::from_fn(3, |i, j| self.matrix[i][j])
    }

    pub fn apply(&self, v: HeisenbergAlgebraElement<T>) -> HeisenbergAlgebraElement<T> {
        let x = v.to_array();
        let row = |r: [T; 3]| r[0] * x[0] + r[1] * x[1] + r[2] * x[2];
        HeisenbergAlgebraElement::new(
            row(self.matrix[0]),
            row(self.matrix[1]),
            row(self.matrix[2]),
        )
    }

    pub fn determinant(&self) -> T {
        let m = &self.matrix;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

impl<T: Num + Copy + Signed + PartialOrd> AlgebraAutomorphism<T> {
    /// Largest violation of `L[u, v] = [Lu, Lv]` over basis pairs.
    pub fn bracket_defect(&self) -> T {
        let basis = HeisenbergAlgebraElement::<T>::basis();
        let mut worst = T::zero();
        for i in 0..3 {
            for j in i + 1..3 {
                let (u, v) = (basis[i], basis[j]);
                let lhs = self.apply(u.bracket(v)).to_array();
                let rhs = self.apply(u).bracket(self.apply(v)).to_array();
                for k in 0..3 {
                    let d = (lhs[k] - rhs[k]).abs();
                    if d > worst {
                        worst = d;
                    }
                }
            }
        }
        worst
    }

    /// Checked constructor: bracket-preserving within `tol` and invertible.
    pub fn new(matrix: [[T; 3]; 3], tol: T) -> Result<Self> {
        let l = Self::new_unchecked(matrix);
        if l.bracket_defect() > tol {
            return Err(EntropyError::domain(
                "matrix does not preserve the Heisenberg bracket",
            ));
        }
        if l.determinant().abs() <= tol {
            return Err(EntropyError::domain("algebra map is not invertible"));
        }
        Ok(l)
    }
}

impl<T> TryFrom<Vec<Vec<T>>> for AlgebraAutomorphism<T>
where
    T: Num + Copy + Signed + PartialOrd + Default + FromPrimitive,
{
    type Error = EntropyError;

    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.len() != 3 || rows.iter().any(|r| r.len() != 3) {
            return Err(EntropyError::domain(
                "algebra automorphism must be a 3x3 matrix",
            ));
        }
        let mut m = [[T::zero(); 3]; 3];
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                m[i][j] = v;
            }
        }
        let tol = T::from_f64(1e-12).unwrap_or_default();
        Self::new(m, tol)
    }
}

impl<T: Copy> From<AlgebraAutomorphism<T>> for Vec<Vec<T>> {
    fn from(l: AlgebraAutomorphism<T>) -> Self {
        l.matrix.iter().map(|r| r.to_vec()).collect()
    }
}

/// The group automorphism `φ` with `dφ = L`: `φ(g) = exp(L log g)`.
pub fn automorphism_apply<T: Num + Copy>(
    l: &AlgebraAutomorphism<T>,
    g: HeisenbergGroupElement<T>,
) -> HeisenbergGroupElement<T> {
    exp_algebra(l.apply(log_group(g)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;

    type Q = Ratio<i128>;

    fn q(n: i128, d: i128) -> Q {
        Ratio::new(n, d)
    }

    #[test]
    fn exp_of_zero_is_identity() {
        assert_eq!(
            exp_algebra(HeisenbergAlgebraElement::<f64>::zero()),
            HeisenbergGroupElement::identity()
        );
        assert_eq!(
            log_group(HeisenbergGroupElement::<f64>::identity()),
            HeisenbergAlgebraElement::zero()
        );
    }

    #[test]
    fn exp_matrix_form() {
        // I + N + N²/2 with N = [[0,a,c],[0,0,b],[0,0,0]] has (1,3) entry c + ab/2.
        let g = exp_algebra(HeisenbergAlgebraElement::new(q(3, 1), q(5, 1), q(7, 1)));
        assert_eq!(g.to_matrix()[0][1], q(3, 1));
        assert_eq!(g.to_matrix()[1][2], q(5, 1));
        assert_eq!(g.to_matrix()[0][2], q(7, 1) + q(15, 2));
    }

    #[test]
    fn log_of_all_ones_matrix() {
        let one = q(1, 1);
        let zero = q(0, 1);
        let g = HeisenbergGroupElement::from_matrix([
            [one, one, one],
            [zero, one, one],
            [zero, zero, one],
        ])
        .unwrap();
        assert_eq!(
            log_group(g),
            HeisenbergAlgebraElement::new(one, one, q(1, 2))
        );
    }

    #[test]
    fn from_matrix_rejects_non_unipotent() {
        assert!(HeisenbergGroupElement::from_matrix([
            [2.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0]
        ])
        .is_err());
    }

    #[test]
    fn product_of_generators_carries_half_bracket() {
        let gx = exp_algebra(HeisenbergAlgebraElement::new(q(1, 1), q(0, 1), q(0, 1)));
        let gy = exp_algebra(HeisenbergAlgebraElement::new(q(0, 1), q(1, 1), q(0, 1)));
        // Explicit 3x3 products: [[1,1,0],[0,1,0],[0,0,1]]·[[1,0,0],[0,1,1],[0,0,1]] = [[1,1,1],[0,1,1],[0,0,1]].
        let p = gx * gy;
        assert_eq!((p.x, p.y, p.z), (q(1, 1), q(1, 1), q(1, 1)));
        assert_eq!(
            log_group(p),
            HeisenbergAlgebraElement::new(q(1, 1), q(1, 1), q(1, 2))
        );
    }

    #[test]
    fn round_trip_in_floats() {
        let v = HeisenbergAlgebraElement::new(1.0, 2.0, 3.0);
        let w = log_group(exp_algebra(v));
        assert!(
            (w.a - 1.0_f64).abs() <= 1e-15
                && (w.b - 2.0).abs() <= 1e-15
                && (w.c - 3.0).abs() <= 1e-15
        );
    }

    #[test]
    fn inverse_is_two_sided() {
        let g = HeisenbergGroupElement::from_matrix_entries(q(2, 3), q(-1, 5), q(4, 7));
        assert_eq!(g * g.inverse(), HeisenbergGroupElement::identity());
        assert_eq!(g.inverse() * g, HeisenbergGroupElement::identity());
    }

    #[test]
    fn dilation_on_exp_one_one_zero() {
        // exp(1,1,0) = (1, 1, 1/2); φ = exp ∘ L ∘ log gives exp(λ, μ, 0) = (λ, μ, λμ/2).
        let l = AlgebraAutomorphism::dilation(q(2, 1), q(3, 1));
        let g = exp_algebra(HeisenbergAlgebraElement::new(q(1, 1), q(1, 1), q(0, 1)));
        let img = automorphism_apply(&l, g);
        assert_eq!(
            img,
            exp_algebra(HeisenbergAlgebraElement::new(q(2, 1), q(3, 1), q(0, 1)))
        );
        assert_eq!(img.z, q(3, 1));
    }

    #[test]
    fn bracket_preservation_is_checked() {
        let tol = q(0, 1);
        assert!(AlgebraAutomorphism::new(
            AlgebraAutomorphism::dilation(q(2, 1), q(3, 1)).matrix(),
            tol
        )
        .is_ok());
        let bad = AlgebraAutomorphism::dilation(q(2, 1), q(3, 1)).matrix();
        let mut m = bad;
        m[2][2] = q(5, 1);
        assert!(AlgebraAutomorphism::new(m, tol).is_err());
        // Shear X -> X + Y with Z fixed preserves [X, Y] = Z.
        let (o, z) = (q(1, 1), q(0, 1));
        assert!(AlgebraAutomorphism::new([[o, z, z], [o, o, z], [z, z, o]], tol).is_ok());
    }

    #[test]
    fn serde_rejects_non_automorphism() {
        let ok: AlgebraAutomorphism<f64> =
            serde_json::from_str("[[2,0,0],[0,3,0],[0,0,6]]").unwrap();
        assert_eq!(ok, AlgebraAutomorphism::dilation(2.0, 3.0));
        assert!(
            serde_json::from_str::<AlgebraAutomorphism<f64>>("[[2,0,0],[0,3,0],[0,0,5]]").is_err()
        );
    }
}
