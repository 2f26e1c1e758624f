//! Symmetric pentadiagonal systems via banded `L D L^T`.

use crate::error::ModelError;

/// Symmetric matrix with two sub-diagonals: `a_i` on the diagonal,
/// `b_i = A[i+1][i]`, `c_i = A[i+2][i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricPentadiagonal {
    pub diag: Vec<f64>,
    pub off1: Vec<f64>,
    pub off2: Vec<f64>,
}

impl SymmetricPentadiagonal {
    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y: Vec<f64> = self.diag.iter().zip(x).map(|(a, x)| a * x).collect();
        for i in 0..n.saturating_sub(1) {
            y[i] += self.off1[i] * x[i + 1];
            y[i + 1] += self.off1[i] * x[i];
        }
        for i in 0..n.saturating_sub(2) {
            y[i] += self.off2[i] * x[i + 2];
            y[i + 2] += self.off2[i] * x[i];
        }
        y
    }

    pub fn factor(&self) -> Result<PentadiagonalLdl, ModelError> {
        let n = self.dim();
        if self.off1.len() != n.saturating_sub(1) || self.off2.len() != n.saturating_sub(2) {
            return Err(ModelError::new("band lengths do not match the dimension"));
        }
        let mut d = vec![0.0; n];
        let mut l1 = vec![0.0; n.saturating_sub(1)];
        let mut l2 = vec![0.0; n.saturating_sub(2)];
        for i in 0..n {
            let mut di = self.diag[i];
            if i >= 1 {
                di -= l1[i - 1] * l1[i - 1] * d[i - 1];
            }
            if i >= 2 {
                di -= l2[i - 2] * l2[i - 2] * d[i - 2];
            }
            if !(di > 0.0) {
                return Err(ModelError::new(format!("non-positive pivot {di} at row {i}")));
            }
            d[i] = di;
            if i + 1 < n {
                let mut b = self.off1[i];
                if i >= 1 {
                    b -= l2[i - 1] * l1[i - 1] * d[i - 1];
                }
                l1[i] = b / di;
            }
            if i + 2 < n {
                l2[i] = self.off2[i] / di;
            }
        }
        Ok(PentadiagonalLdl { d, l1, l2 })
    }
}

/// Factor `A = L D L^T` with unit lower `L` of bandwidth two.
#[derive(Debug, Clone, PartialEq)]
pub struct PentadiagonalLdl {
    d: Vec<f64>,
    l1: Vec<f64>,
    l2: Vec<f64>,
}

impl PentadiagonalLdl {
    pub fn dim(&self) -> usize {
        self.d.len()
    }

    /// Overwrites `b` with `A^{-1} b`.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        assert_eq!(b.len(), n);
        for i in 1..n {
            let mut z = b[i] - self.l1[i - 1] * b[i - 1];
            if i >= 2 {
                z -= self.l2[i - 2] * b[i - 2];
            }
            b[i] = z;
        }
        for (v, d) in b.iter_mut().zip(&self.d) {
            *v /= d;
        }
        for i in (0..n.saturating_sub(1)).rev() {
            let mut x = b[i] - self.l1[i] * b[i + 1];
            if i + 2 < n {
                x -= self.l2[i] * b[i + 2];
            }
            b[i] = x;
        }
    }
}
