//! Small dense linear algebra.
//!
//! Every matrix in this crate is at most (n + 2) x (n + 2) with n <= 4, so a
//! row-major `Vec` with partial-pivot LU covers all needs.

use crate::error::{FkError, Result};
use crate::{c, Scalar};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T> {
    pub rows: usize,
    pub cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Self {
        let r = rows.len();
        let cols = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * cols);
        for row in rows {
            assert_eq!(row.len(), cols, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols, data }
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                self.row(i)
                    .iter()
                    .zip(v)
                    .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
            })
            .collect()
    }

    pub fn transpose(&self) -> Mat<T> {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// Determinant via LU; zero if elimination finds a zero pivot.
    pub fn det(&self) -> T {
        assert_eq!(self.rows, self.cols, "det of non-square matrix");
        let n = self.rows;
        let mut a = self.data.clone();
        let mut det = T::one();
        for k in 0..n {
            let mut p = k;
            let mut pmax = a[k * n + k].abs();
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax == T::zero() {
                return T::zero();
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                det = -det;
            }
            det *= a[k * n + k];
            for i in (k + 1)..n {
                let m = a[i * n + k] / a[k * n + k];
                for j in (k + 1)..n {
                    let s = a[k * n + j];
                    a[i * n + j] -= m * s;
                }
            }
        }
        det
    }

    /// Solves `self * x = b` by LU with partial pivoting.
    pub fn solve(&self, b: &[T]) -> Result<Vec<T>> {
        assert_eq!(self.rows, self.cols, "solve needs a square matrix");
        assert_eq!(b.len(), self.rows);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut x: Vec<T> = b.to_vec();
        for k in 0..n {
            let mut p = k;
            let mut pmax = a[k * n + k].abs();
            for i in (k + 1)..n {
                let v = a[i * n + k].abs();
                if v > pmax {
                    pmax = v;
                    p = i;
                }
            }
            if pmax < c::<T>(1e-300) {
                return Err(FkError::NearBifurcation {
                    at: b.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect(),
                });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                x.swap(k, p);
            }
            for i in (k + 1)..n {
                let m = a[i * n + k] / a[k * n + k];
                a[i * n + k] = m;
                for j in (k + 1)..n {
                    let s = a[k * n + j];
                    a[i * n + j] -= m * s;
                }
                let xk = x[k];
                x[i] -= m * xk;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= a[i * n + j] * x[j];
            }
            x[i] = s / a[i * n + i];
        }
        Ok(x)
    }

    /// A unit vector spanning the (assumed one-dimensional) nullspace of a
    /// numerically singular square matrix. Uses elimination with full pivoting
    /// and back-substitutes through the dropped column.
    pub fn null_vector(&self) -> Vec<T> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.data.clone();
        let mut col_perm: Vec<usize> = (0..n).collect();
        // Eliminate n-1 pivots with full pivoting; the weakest direction is
        // left as the free variable.
        for k in 0..n.saturating_sub(1) {
            let (mut pi, mut pj) = (k, k);
            let mut pmax = T::zero();
            for i in k..n {
                for j in k..n {
                    let v = a[i * n + j].abs();
                    if v > pmax {
                        pmax = v;
                        pi = i;
                        pj = j;
                    }
                }
            }
            if pmax == T::zero() {
                break;
            }
            if pi != k {
                for j in 0..n {
                    a.swap(k * n + j, pi * n + j);
                }
            }
            if pj != k {
                for i in 0..n {
                    a.swap(i * n + k, i * n + pj);
                }
                col_perm.swap(k, pj);
            }
            for i in (k + 1)..n {
                let m = a[i * n + k] / a[k * n + k];
                for j in k..n {
                    let s = a[k * n + j];
                    a[i * n + j] -= m * s;
                }
            }
        }
        // Free variable = last permuted column; back-substitute.
        let mut y = vec![T::zero(); n];
        y[n - 1] = T::one();
        for i in (0..n.saturating_sub(1)).rev() {
            let mut s = T::zero();
            for j in (i + 1)..n {
                s += a[i * n + j] * y[j];
            }
            y[i] = -s / a[i * n + i];
        }
        let mut v = vec![T::zero(); n];
        for (permuted, &orig) in col_perm.iter().enumerate() {
            v[orig] = y[permuted];
        }
        let nrm = norm(&v);
        if nrm > T::zero() {
            for vi in &mut v {
                *vi /= nrm;
            }
        }
        v
    }
}

impl<T: Scalar> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T: Scalar> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Euclidean norm.
pub fn norm<T: Scalar>(v: &[T]) -> T {
    v.iter()
        .fold(T::zero(), |acc, &x| acc + x * x)
        .sqrt()
}

/// Euclidean distance.
pub fn dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (&x, &y)| acc + (x - y) * (x - y))
        .sqrt()
}

/// Dot product.
pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solve_2x2() {
        let a: Mat<f64> = Mat::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]);
        let x = a.solve(&[5.0, 10.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn det_matches_cofactor() {
        let a: Mat<f64> = Mat::from_rows(&[
            vec![1.0, 2.0, 3.0],
            vec![0.0, 4.0, 5.0],
            vec![1.0, 0.0, 6.0],
        ]);
        assert!((a.det() - 22.0).abs() < 1e-12);
    }

    #[test]
    fn null_vector_of_singular() {
        // rank-1 perturbation of I with eigenvalue 0 along (1, -1)
        let a: Mat<f64> = Mat::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let v = a.null_vector();
        let img = a.mul_vec(&v);
        assert!(norm(&img) < 1e-12);
        assert!((norm(&v) - 1.0).abs() < 1e-12);
    }
}
