//! Dense row-major matrices and the numeric routines built on them.

mod kmeans;
mod pca;

pub use kmeans::{kmeans, KMeansResult};
pub use pca::{pca_fit, PcaModel};

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Result, SdssError};
use crate::rng::rng_from_seed;

/// Dense `rows x cols` matrix of `f64`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(SdssError::ShapeMismatch {
                op: "from_vec",
                left: (rows, cols),
                right: (data.len(), 1),
            });
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from nested rows; all rows must have the same length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(SdssError::ShapeMismatch {
                    op: "from_rows",
                    left: (rows.len(), cols),
                    right: (1, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Copies the selected rows, in order, into a new matrix.
    pub fn select_rows(&self, idx: &[usize]) -> Matrix {
        let mut out = Matrix::zeros(idx.len(), self.cols);
        for (k, &i) in idx.iter().enumerate() {
            out.row_mut(k).copy_from_slice(self.row(i));
        }
        out
    }

    /// `self * rhs`. Zero entries of `self` are skipped, which makes products
    /// with sparse bag-of-words features cheap; the accumulation order is fixed.
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows {
            return Err(self.mismatch("matmul", rhs));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ * rhs` without materializing the transpose.
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows {
            return Err(self.mismatch("t_matmul", rhs));
        }
        let mut out = Matrix::zeros(self.cols, rhs.cols);
        for r in 0..self.rows {
            let rhs_row = rhs.row(r);
            for (i, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self * rhsᵀ`.
    pub fn matmul_t(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.cols {
            return Err(self.mismatch("matmul_t", rhs));
        }
        let mut out = Matrix::zeros(self.rows, rhs.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..rhs.rows {
                out.data[i * rhs.rows + j] = dot(a, rhs.row(j));
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        out
    }

    pub fn add(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with("add", rhs, |a, b| a + b)
    }

    pub fn sub(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with("sub", rhs, |a, b| a - b)
    }

    pub fn hadamard(&self, rhs: &Matrix) -> Result<Matrix> {
        self.zip_with("hadamard", rhs, |a, b| a * b)
    }

    /// In-place `self += scale * rhs`.
    pub fn add_scaled(&mut self, rhs: &Matrix, scale: f64) -> Result<()> {
        if self.shape() != rhs.shape() {
            return Err(self.mismatch("add_scaled", rhs));
        }
        for (a, &b) in self.data.iter_mut().zip(&rhs.data) {
            *a += scale * b;
        }
        Ok(())
    }

    pub fn scale(&self, s: f64) -> Matrix {
        self.map(|v| v * s)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn relu(&self) -> Matrix {
        self.map(|v| v.max(0.0))
    }

    /// Gradient through ReLU: passes `grad` where `pre > 0`, zero elsewhere
    /// (the subgradient at 0 is taken as 0).
    pub fn relu_backward(grad: &Matrix, pre: &Matrix) -> Result<Matrix> {
        grad.zip_with("relu_backward", pre, |g, p| if p > 0.0 { g } else { 0.0 })
    }

    /// Row-wise `softmax(row / temperature)` with max subtraction.
    pub fn softmax_rows(&self, temperature: f64) -> Result<Matrix> {
        if temperature.is_nan() || temperature <= 0.0 || !temperature.is_finite() {
            return Err(SdssError::InvalidParameter(format!(
                "softmax temperature must be positive, got {temperature}"
            )));
        }
        let mut out = self.clone();
        for r in 0..self.rows {
            softmax_in_place(out.row_mut(r), temperature);
        }
        Ok(out)
    }

    /// Index of the largest entry of each row (first one on ties).
    pub fn argmax_rows(&self) -> Vec<usize> {
        (0..self.rows)
            .map(|r| {
                let row = self.row(r);
                let mut best = 0;
                for (j, &v) in row.iter().enumerate() {
                    if v > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.cols];
        for r in 0..self.rows {
            for (m, &v) in mean.iter_mut().zip(self.row(r)) {
                *m += v;
            }
        }
        if self.rows > 0 {
            for m in &mut mean {
                *m /= self.rows as f64;
            }
        }
        mean
    }

    /// Scales every row to unit L1 norm; all-zero rows are left untouched.
    pub fn row_normalize_l1(&mut self) {
        for r in 0..self.rows {
            let row = self.row_mut(r);
            let s: f64 = row.iter().map(|v| v.abs()).sum();
            if s > 0.0 {
                for v in row.iter_mut() {
                    *v /= s;
                }
            }
        }
    }

    fn zip_with(
        &self,
        op: &'static str,
        rhs: &Matrix,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Matrix> {
        if self.shape() != rhs.shape() {
            return Err(self.mismatch(op, rhs));
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    fn mismatch(&self, op: &'static str, rhs: &Matrix) -> SdssError {
        SdssError::ShapeMismatch {
            op,
            left: self.shape(),
            right: rhs.shape(),
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn softmax_in_place(row: &mut [f64], temperature: f64) {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let mut total = 0.0;
    for v in row.iter_mut() {
        *v = ((*v - max) / temperature).exp();
        total += *v;
    }
    for v in row.iter_mut() {
        *v /= total;
    }
}

/// `log softmax(row / temperature)` for one row.
pub(crate) fn log_softmax(row: &[f64], temperature: f64) -> Vec<f64> {
    let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    let scaled: Vec<f64> = row.iter().map(|&v| (v - max) / temperature).collect();
    let lse = scaled.iter().map(|v| v.exp()).sum::<f64>().ln();
    scaled.into_iter().map(|v| v - lse).collect()
}

/// Glorot/Xavier uniform initialization in `(-a, a)`, `a = sqrt(6 / (rows + cols))`.
pub fn glorot_init(rows: usize, cols: usize, seed: u64) -> Matrix {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let mut rng = rng_from_seed(seed);
    let data = (0..rows * cols)
        .map(|_| loop {
            let v = rng.random_range(-bound..bound);
            // the open interval excludes -bound itself
            if v != -bound {
                break v;
            }
        })
        .collect();
    Matrix { rows, cols, data }
}

/// Matrix of i.i.d. standard normal entries.
pub fn standard_normal(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = rng_from_seed(seed);
    let data = (0..rows * cols)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    Matrix { rows, cols, data }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn naive_matmul(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut s = 0.0;
                for k in 0..a.cols() {
                    s += a.get(i, k) * b.get(k, j);
                }
                out.set(i, j, s);
            }
        }
        out
    }

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        a.as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn softmax_uniform_logits() {
        let m = Matrix::from_rows(&[[0.0, 0.0, 0.0]]).unwrap();
        let s = m.softmax_rows(1.0).unwrap();
        for &v in s.as_slice() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_high_temperature_flattens() {
        let m = Matrix::from_rows(&[[2.0, 0.0]]).unwrap();
        let s = m.softmax_rows(1e6).unwrap();
        assert!((s.get(0, 0) - 0.5).abs() < 1e-5);
        assert!((s.get(0, 1) - 0.5).abs() < 1e-5);
    }

    #[test]
    fn softmax_rejects_nonpositive_temperature() {
        let m = Matrix::zeros(1, 2);
        assert!(m.softmax_rows(0.0).is_err());
        assert!(m.softmax_rows(-1.0).is_err());
    }

    #[test]
    fn relu_backward_blocks_negative_preactivations() {
        let grad = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let pre = Matrix::from_rows(&[[-0.5, 0.0, 0.5]]).unwrap();
        let g = Matrix::relu_backward(&grad, &pre).unwrap();
        assert_eq!(g.as_slice(), &[0.0, 0.0, 3.0]);
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(2, 3);
        assert!(matches!(a.matmul(&b), Err(SdssError::ShapeMismatch { .. })));
        assert!(a.add(&Matrix::zeros(3, 2)).is_err());
    }

    #[test]
    fn glorot_is_seeded_and_bounded() {
        let a = glorot_init(100, 100, 42);
        let b = glorot_init(100, 100, 42);
        assert_eq!(a, b);
        let bound = (6.0f64 / 200.0).sqrt();
        assert!(a.as_slice().iter().all(|&v| v > -bound && v < bound));
        // std of the mean of 10^4 uniforms on (-a, a) is a / sqrt(3 * 10^4) ~ 1e-3
        let mean = a.sum() / 1e4;
        assert!(mean.abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn transpose_products_agree() {
        let a = standard_normal(5, 4, 1);
        let b = standard_normal(5, 3, 2);
        let c = standard_normal(6, 4, 3);
        assert!(max_abs_diff(&a.t_matmul(&b).unwrap(), &naive_matmul(&a.transpose(), &b)) < 1e-12);
        assert!(max_abs_diff(&a.matmul_t(&c).unwrap(), &naive_matmul(&a, &c.transpose())) < 1e-12);
    }

    proptest! {
        #[test]
        fn matmul_matches_triple_loop(r in 1usize..20, k in 1usize..20, c in 1usize..20, seed in any::<u64>()) {
            let a = standard_normal(r, k, seed);
            let b = standard_normal(k, c, seed.wrapping_add(1));
            let fast = a.matmul(&b).unwrap();
            prop_assert!(max_abs_diff(&fast, &naive_matmul(&a, &b)) < 1e-12);
        }

        #[test]
        fn softmax_rows_are_distributions(r in 1usize..8, c in 1usize..8, seed in any::<u64>(), tau in 0.1f64..10.0) {
            let z = standard_normal(r, c, seed).scale(5.0);
            let p = z.softmax_rows(tau).unwrap();
            for i in 0..r {
                let s: f64 = p.row(i).iter().sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
                prop_assert!(p.row(i).iter().all(|&v| v > 0.0 && v <= 1.0));
            }
        }
    }
}
