//! Small dense matrices.
//!
//! Dimensions here are the state dimension `d` (2 in practice), so everything
//! is plain row-major storage with straightforward loops.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices. All rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::DimensionMismatch { expected: cols, found: r.len() });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix { rows: rows.len(), cols, data })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn fill(&mut self, value: f64) {
        self.data.iter_mut().for_each(|x| *x = value);
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn mul(&self, rhs: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        self.mul_into(rhs, &mut out)?;
        Ok(out)
    }

    /// `out = self · rhs`. `out` must already have the product's shape.
    pub fn mul_into(&self, rhs: &Matrix, out: &mut Matrix) -> Result<()> {
        if self.cols != rhs.rows {
            return Err(Error::DimensionMismatch { expected: self.cols, found: rhs.rows });
        }
        if out.rows != self.rows || out.cols != rhs.cols {
            return Err(Error::DimensionMismatch { expected: self.rows * rhs.cols, found: out.rows * out.cols });
        }
        for i in 0..self.rows {
            for j in 0..rhs.cols {
                let mut acc = 0.0;
                for k in 0..self.cols {
                    acc += self[(i, k)] * rhs[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        Ok(())
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::DimensionMismatch { expected: self.cols, found: v.len() });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * s).collect() }
    }

    /// `self += s · other`
    pub fn add_scaled(&mut self, other: &Matrix, s: f64) -> Result<()> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch { expected: self.data.len(), found: other.data.len() });
        }
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += s * b);
        Ok(())
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        let mut out = self.clone();
        out.add_scaled(other, -1.0)?;
        Ok(out)
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| f64::max(m, libm::fabs(*x)))
    }

    /// Operator norm induced by the max-norm (maximum absolute row sum).
    pub fn norm_inf(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).iter().map(|x| libm::fabs(*x)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Leading principal `(k × k)` submatrix.
    pub fn leading_minor(&self, k: usize) -> Matrix {
        let mut m = Matrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                m[(i, j)] = self[(i, j)];
            }
        }
        m
    }

    /// Determinant by LU decomposition with partial pivoting.
    pub fn det(&self) -> Result<f64> {
        if !self.is_square() {
            return Err(Error::DimensionMismatch { expected: self.rows, found: self.cols });
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut det = 1.0;
        for c in 0..n {
            let pivot = (c..n)
                .max_by(|&i, &j| libm::fabs(a[(i, c)]).total_cmp(&libm::fabs(a[(j, c)])))
                .unwrap_or(c);
            if a[(pivot, c)] == 0.0 {
                return Ok(0.0);
            }
            if pivot != c {
                for j in 0..n {
                    a.data.swap(pivot * n + j, c * n + j);
                }
                det = -det;
            }
            let p = a[(c, c)];
            det *= p;
            for i in c + 1..n {
                let f = a[(i, c)] / p;
                if f != 0.0 {
                    for j in c..n {
                        let v = a[(c, j)];
                        a[(i, j)] -= f * v;
                    }
                }
            }
        }
        Ok(det)
    }

    /// Singular values in decreasing order (one-sided Jacobi).
    pub fn singular_values(&self) -> Vec<f64> {
        // Work on the orientation with at least as many rows as columns.
        let a = if self.rows >= self.cols { self.clone() } else { self.transpose() };
        let (m, n) = (a.rows, a.cols);
        let mut cols: Vec<Vec<f64>> = (0..n).map(|j| (0..m).map(|i| a[(i, j)]).collect()).collect();
        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let alpha: f64 = cols[p].iter().map(|x| x * x).sum();
                    let beta: f64 = cols[q].iter().map(|x| x * x).sum();
                    let gamma: f64 = cols[p].iter().zip(&cols[q]).map(|(x, y)| x * y).sum();
                    if gamma == 0.0 || libm::fabs(gamma) <= 1e-15 * libm::sqrt(alpha * beta) {
                        continue;
                    }
                    rotated = true;
                    let zeta = (beta - alpha) / (2.0 * gamma);
                    let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                    let c = 1.0 / libm::sqrt(1.0 + t * t);
                    let s = c * t;
                    for i in 0..m {
                        let xp = cols[p][i];
                        let xq = cols[q][i];
                        cols[p][i] = c * xp - s * xq;
                        cols[q][i] = s * xp + c * xq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }
        let mut sv: Vec<f64> = cols.iter().map(|c| libm::sqrt(c.iter().map(|x| x * x).sum())).collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv
    }

    /// Number of singular values `≥ rel_tol · σ_max`. The zero matrix has rank 0.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let sv = self.singular_values();
        match sv.first() {
            Some(&top) if top > 0.0 => sv.iter().filter(|&&s| s >= rel_tol * top).count(),
            _ => 0,
        }
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut l = f.debug_list();
        for i in 0..self.rows {
            l.entry(&self.row(i));
        }
        l.finish()
    }
}

/// Orthoprojection onto the last coordinate axis, `P = e_d e_dᵀ`.
pub fn last_axis_projection(d: usize) -> Matrix {
    let mut p = Matrix::zeros(d, d);
    if d > 0 {
        p[(d - 1, d - 1)] = 1.0;
    }
    p
}

/// `I − u uᵀ / |u|²`: orthoprojection onto the complement of `u`.
pub fn complement_projection(u: &[f64]) -> Matrix {
    let d = u.len();
    let norm2: f64 = u.iter().map(|x| x * x).sum();
    let mut m = Matrix::identity(d);
    if norm2 > 0.0 {
        for i in 0..d {
            for j in 0..d {
                m[(i, j)] -= u[i] * u[j] / norm2;
            }
        }
    }
    m
}
