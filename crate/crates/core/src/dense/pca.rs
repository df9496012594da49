//! Principal component analysis via the eigendecomposition of the sample
//! covariance.

use nalgebra::DMatrix;

use super::{dot, Matrix};
use crate::error::{Result, SdssError};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// `k x f`, orthonormal rows, ordered by decreasing variance.
    pub components: Matrix,
    pub explained_variance: Vec<f64>,
}

/// Fits the top-`k` principal directions of `x` (rows are samples).
pub fn pca_fit(x: &Matrix, k: usize) -> Result<PcaModel> {
    let (n, f) = x.shape();
    if k == 0 || k > n.min(f) {
        return Err(SdssError::InvalidParameter(format!(
            "pca dimension must be in 1..={}, got {k}",
            n.min(f)
        )));
    }
    let mean = x.column_means();
    let mut cov = vec![0.0; f * f];
    let mut centered = vec![0.0; f];
    for r in 0..n {
        for ((c, &v), &m) in centered.iter_mut().zip(x.row(r)).zip(&mean) {
            *c = v - m;
        }
        for i in 0..f {
            let ci = centered[i];
            if ci == 0.0 {
                continue;
            }
            let row = &mut cov[i * f..(i + 1) * f];
            for j in i..f {
                row[j] += ci * centered[j];
            }
        }
    }
    let denom = if n > 1 { (n - 1) as f64 } else { 1.0 };
    for i in 0..f {
        for j in i..f {
            let v = cov[i * f + j] / denom;
            cov[i * f + j] = v;
            cov[j * f + i] = v;
        }
    }

    let eig = DMatrix::from_row_slice(f, f, &cov).symmetric_eigen();
    let mut order: Vec<usize> = (0..f).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .total_cmp(&eig.eigenvalues[a])
            .then(a.cmp(&b))
    });

    let mut components = Matrix::zeros(k, f);
    let mut explained_variance = Vec::with_capacity(k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let col = eig.eigenvectors.column(idx);
        let norm = col.norm();
        // sign convention: largest-magnitude entry positive
        let pivot = col
            .iter()
            .fold(0.0f64, |acc, &v| if v.abs() > acc.abs() { v } else { acc });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for (dst, &v) in components.row_mut(c).iter_mut().zip(col.iter()) {
            *dst = sign * v / norm;
        }
        explained_variance.push(eig.eigenvalues[idx].max(0.0));
    }
    Ok(PcaModel {
        mean,
        components,
        explained_variance,
    })
}

impl PcaModel {
    pub fn dim(&self) -> usize {
        self.components.rows()
    }

    /// Projects rows of `x` onto the principal directions.
    pub fn transform(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.mean.len() {
            return Err(SdssError::ShapeMismatch {
                op: "pca_transform",
                left: x.shape(),
                right: self.components.shape(),
            });
        }
        let mut out = Matrix::zeros(x.rows(), self.dim());
        let mut centered = vec![0.0; self.mean.len()];
        for r in 0..x.rows() {
            for ((c, &v), &m) in centered.iter_mut().zip(x.row(r)).zip(&self.mean) {
                *c = v - m;
            }
            for (j, o) in out.row_mut(r).iter_mut().enumerate() {
                *o = dot(&centered, self.components.row(j));
            }
        }
        Ok(out)
    }

    /// Maps codes back to the input space.
    pub fn inverse(&self, codes: &Matrix) -> Result<Matrix> {
        let mut out = codes.matmul(&self.components)?;
        for r in 0..out.rows() {
            for (v, &m) in out.row_mut(r).iter_mut().zip(&self.mean) {
                *v += m;
            }
        }
        Ok(out)
    }
}
