use std::ops::{Add, Mul, Sub};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{EntropyError, Result};
use crate::scalar::Real;

/// Dense row-major square matrix.
///
/// Deliberately small: the dynamical maps only need products and a
/// determinant. Spectral work converts to `nalgebra` in [`crate::linear`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "Vec<Vec<T>>",
    into = "Vec<Vec<T>>",
    bound(
        serialize = "T: Copy + Serialize",
        deserialize = "T: Copy + Deserialize<'de>"
    )
)]
pub struct SquareMatrix<T> {
    dim: usize,
    entries: Vec<T>,
}

impl<T: Copy> SquareMatrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(EntropyError::domain("matrix must have at least one row"));
        }
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(EntropyError::domain(format!(
                "matrix is not square: row {bad} has {} entries, expected {dim}",
                rows[bad].len()
            )));
        }
        Ok(Self {
            dim,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn from_row_major(dim: usize, entries: Vec<T>) -> Result<Self> {
        if dim == 0 || entries.len() != dim * dim {
            return Err(EntropyError::domain(format!(
                "{} entries cannot form a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        Ok(Self { dim, entries })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut entries = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                entries.push(f(i, j));
            }
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries[i * self.dim + j]
    }

    pub fn row_major(&self) -> &[T] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.entries.chunks(self.dim).map(<[T]>::to_vec).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self.get(j, i))
    }
}

impl<T> SquareMatrix<T>
where
    T: Copy + Zero + One + Add<Output = T> + Mul<Output = T> + Sub<Output = T>,
{
    pub fn identity(dim: usize) -> Self {
        Self::from_fn(dim, |i, j| if i == j { T::one() } else { T::zero() })
    }

    pub fn diagonal(diag: &[T]) -> Self {
        Self::from_fn(diag.len(), |i, j| if i == j { diag[i] } else { T::zero() })
    }

    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.dim);
        self.entries
            .chunks(self.dim)
            .map(|row| {
                row.iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn mul_mat(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch in matrix product");
        Self::from_fn(self.dim, |i, j| {
            (0..self.dim).fold(T::zero(), |acc, k| acc + self.get(i, k) * other.get(k, j))
        })
    }
}

impl<T: Real> SquareMatrix<T> {
    /// Determinant by Gaussian elimination with partial pivoting.
    pub fn determinant(&self) -> T {
        let n = self.dim;
        let mut a = self.entries.clone();
        let mut det = T::one();
        for col in 0..n {
            let pivot = (col..n)
                .max_by(|&r, &s| {
                    a[r * n + col]
                        .abs()
                        .partial_cmp(&a[s * n + col].abs())
                        .unwrap()
                })
                .unwrap();
            let p = a[pivot * n + col];
            if p == T::zero() {
                return T::zero();
            }
            if pivot != col {
                for k in 0..n {
                    a.swap(pivot * n + k, col * n + k);
                }
                det = -det;
            }
            det = det * p;
            for r in col + 1..n {
                let f = a[r * n + col] / p;
                for k in col..n {
                    a[r * n + k] = a[r * n + k] - f * a[col * n + k];
                }
            }
        }
        det
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|x| x.is_finite())
    }

    pub fn max_abs(&self) -> T {
        self.entries.iter().fold(T::zero(), |m, x| m.max(x.abs()))
    }

    /// Rotation of the plane by `angle` radians.
    pub fn rotation(angle: T) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            dim: 2,
            entries: vec![c, -s, s, c],
        }
    }
}

impl<T: Copy> TryFrom<Vec<Vec<T>>> for SquareMatrix<T> {
    type Error = EntropyError;

    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::from_rows(rows)
    }
}

impl<T: Copy> From<SquareMatrix<T>> for Vec<Vec<T>> {
    fn from(m: SquareMatrix<T>) -> Self {
        m.rows()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_rows() {
        assert!(SquareMatrix::from_rows(vec![vec![1.0, 2.0], vec![3.0]]).is_err());
        assert!(SquareMatrix::<f64>::from_rows(vec![]).is_err());
    }

    #[test]
    fn determinant_with_pivoting() {
        let m = SquareMatrix::from_rows(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(m.determinant(), -1.0);
        let m = SquareMatrix::from_rows(vec![
            vec![2.0, 1.0, 0.0],
            vec![1.0, 3.0, 1.0],
            vec![0.0, 1.0, 4.0],
        ])
        .unwrap();
        assert!((m.determinant() - 18.0_f64).abs() < 1e-12);
    }

    #[test]
    fn product_and_identity() {
        let m = SquareMatrix::from_rows(vec![vec![1, 2], vec![3, 4]]).unwrap();
        assert_eq!(m.mul_mat(&SquareMatrix::identity(2)), m);
        assert_eq!(m.mul_vec(&[1, 1]), vec![3, 7]);
    }

    #[test]
    fn serde_as_nested_arrays() {
        let m: SquareMatrix<f64> = serde_json::from_str("[[2.0, 0.0], [0.0, 0.5]]").unwrap();
        assert_eq!(m, SquareMatrix::diagonal(&[2.0, 0.5]));
        assert!(serde_json::from_str::<SquareMatrix<f64>>("[[1.0, 2.0]]").is_err());
    }
}
