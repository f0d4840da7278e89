//! Small dense linear algebra for low-dimensional ambient spaces.
//!
//! Everything here targets d <= 10 or so; clarity and accuracy over speed.

use crate::scalar::Scalar;
use serde::{Deserialize, Serialize};

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    /// Build from a list of columns.
    pub fn from_cols(cols: &[Vec<S>]) -> Self {
        assert!(!cols.is_empty());
        let rows = cols[0].len();
        Mat::from_fn(rows, cols.len(), |i, j| cols[j][i])
    }

    pub fn col(&self, j: usize) -> Vec<S> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn matvec(&self, x: &[S]) -> Vec<S> {
        assert_eq!(self.cols, x.len(), "matvec shape mismatch");
        let mut y = vec![S::zero(); self.rows];
        for i in 0..self.rows {
            let row = &self.data[i * self.cols..(i + 1) * self.cols];
            let mut acc = S::zero();
            for (a, b) in row.iter().zip(x) {
                acc = acc + *a * *b;
            }
            y[i] = acc;
        }
        y
    }

    pub fn matmul(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Mat<S> {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn scale(&self, c: S) -> Mat<S> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| *v * c).collect(),
        }
    }

    pub fn add(&self, other: &Mat<S>) -> Mat<S> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a + *b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Mat<S>) -> Mat<S> {
        self.add(&other.scale(-S::one()))
    }

    pub fn frobenius_norm(&self) -> S {
        self.data
            .iter()
            .map(|v| *v * *v)
            .fold(S::zero(), |a, b| a + b)
            .sqrt()
    }

    /// Largest singular value.
    ///
    /// Exact closed form for 2x2; otherwise power iteration on AᵀA with a
    /// deterministic start, which converges fast at these sizes.
    pub fn spectral_norm(&self) -> S {
        if self.rows == 2 && self.cols == 2 {
            let (a, b, c, d) = (
                self[(0, 0)].f64(),
                self[(0, 1)].f64(),
                self[(1, 0)].f64(),
                self[(1, 1)].f64(),
            );
            // eigenvalues of AᵀA via trace/determinant
            let t = a * a + b * b + c * c + d * d;
            let det = (a * d - b * c).powi(2);
            let disc = (t * t / 4.0 - det).max(0.0).sqrt();
            return S::of((t / 2.0 + disc).max(0.0).sqrt());
        }
        let gram = self.transpose().matmul(self);
        let n = gram.rows;
        let mut v = vec![S::of(1.0 / (n as f64).sqrt()); n];
        let mut lambda = S::zero();
        for _ in 0..200 {
            let w = gram.matvec(&v);
            let norm = norm2(&w);
            if norm == S::zero() {
                return S::zero();
            }
            let next = lambda;
            lambda = norm;
            v = w.iter().map(|x| *x / norm).collect();
            if (lambda - next).abs() <= S::of(1e-15) * lambda {
                break;
            }
        }
        lambda.sqrt()
    }
}

impl<S> std::ops::Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

pub fn dot<S: Scalar>(a: &[S], b: &[S]) -> S {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}

pub fn norm2<S: Scalar>(a: &[S]) -> S {
    dot(a, a).sqrt()
}

/// ℓᵖ norm with p ∈ {1, 2, ∞} encoded as f64::INFINITY for the sup norm.
pub fn norm_p<S: Scalar>(a: &[S], p: f64) -> S {
    if p.is_infinite() {
        a.iter().fold(S::zero(), |m, x| m.max(x.abs()))
    } else if p == 2.0 {
        norm2(a)
    } else if p == 1.0 {
        a.iter().map(|x| x.abs()).sum()
    } else {
        let s: S = a.iter().map(|x| x.abs().powf(S::of(p))).sum();
        s.powf(S::of(1.0 / p))
    }
}

pub fn sub<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(x, y)| *x - *y).collect()
}

pub fn add<S: Scalar>(a: &[S], b: &[S]) -> Vec<S> {
    a.iter().zip(b).map(|(x, y)| *x + *y).collect()
}

pub fn scale<S: Scalar>(a: &[S], c: S) -> Vec<S> {
    a.iter().map(|x| *x * c).collect()
}

pub fn dist_p<S: Scalar>(a: &[S], b: &[S], p: f64) -> S {
    norm_p(&sub(a, b), p)
}

/// Matrix exponential of a skew-symmetric matrix.
///
/// d = 2 uses the rotation closed form; larger d uses scaling-and-squaring
/// with a Taylor series summed to machine precision (inputs here are small
/// skew fields, d <= 10).
pub fn expm_skew<S: Scalar>(a: &Mat<S>) -> Mat<S> {
    assert_eq!(a.rows, a.cols);
    if a.rows == 2 {
        let theta = a[(1, 0)].f64();
        let (s, c) = (S::of(theta.sin()), S::of(theta.cos()));
        let mut m = Mat::zeros(2, 2);
        m[(0, 0)] = c;
        m[(0, 1)] = -s;
        m[(1, 0)] = s;
        m[(1, 1)] = c;
        return m;
    }
    let norm = a.frobenius_norm().f64();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scaled = a.scale(S::of(0.5f64.powi(squarings as i32)));
    let mut term = Mat::identity(a.rows);
    let mut sum = Mat::identity(a.rows);
    for k in 1..60 {
        term = term.matmul(&scaled).scale(S::of(1.0 / k as f64));
        sum = sum.add(&term);
        if term.frobenius_norm() < S::of(1e-18) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.matmul(&sum);
    }
    sum
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns (eigenvalues, eigenvector columns), sorted by descending eigenvalue.
pub fn sym_eigh<S: Scalar>(m: &Mat<S>) -> (Vec<S>, Mat<S>) {
    assert_eq!(m.rows, m.cols);
    let n = m.rows;
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| m[(i, j)].f64()).collect())
        .collect();
    let mut v = vec![vec![0.0f64; n]; n];
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    for _ in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a[i][j] * a[i][j];
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j][j].partial_cmp(&a[i][i]).unwrap());
    let vals = order.iter().map(|&i| S::of(a[i][i])).collect();
    let vecs = Mat::from_fn(n, n, |i, j| S::of(v[i][order[j]]));
    (vals, vecs)
}
