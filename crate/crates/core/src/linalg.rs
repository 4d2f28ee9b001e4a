//! Dense Cholesky factorization in packed row-major lower-triangular
//! storage.

use crate::error::{Error, Result};

/// Lower-triangular `L` with `L L^T = A`, rows stored contiguously.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedCholesky {
    n: usize,
    data: Vec<f64>,
}

#[inline]
fn row_offset(i: usize) -> usize {
    i * (i + 1) / 2
}

/// Dot product with independent accumulators so the loop vectorizes.
#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [0.0f64; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..8 {
            acc[k] += x[k] * y[k];
        }
    }
    let mut s = acc.iter().sum::<f64>();
    for (x, y) in ra.iter().zip(rb) {
        s += x * y;
    }
    s
}

impl PackedCholesky {
    /// Factors the symmetric matrix with entries `entry(i, j)` (only
    /// `j <= i` is queried) after adding `jitter` to the diagonal.
    pub fn factor(n: usize, entry: impl Fn(usize, usize) -> f64, jitter: f64) -> Result<Self> {
        let mut data = vec![0.0; row_offset(n)];
        for i in 0..n {
            let oi = row_offset(i);
            for j in 0..=i {
                let oj = row_offset(j);
                let s = dot(&data[oi..oi + j], &data[oj..oj + j]);
                let a = entry(i, j);
                if i == j {
                    let d = a + jitter - s;
                    if !(d > 0.0) || !d.is_finite() {
                        return Err(Error::CholeskyFailure { pivot: i, value: d });
                    }
                    data[oi + i] = d.sqrt();
                } else {
                    data[oi + j] = (a - s) / data[oj + j];
                }
            }
        }
        Ok(Self { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `L[i][j]`, zero above the diagonal.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.data[row_offset(i) + j]
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let o = row_offset(i);
        &self.data[o..o + i + 1]
    }

    /// `L z`.
    pub fn lower_mul(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.n, "dimension mismatch");
        (0..self.n).map(|i| dot(self.row(i), &z[..=i])).collect()
    }
}
