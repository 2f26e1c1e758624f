//! Dense Cholesky factor with allocation-light triangular solves.

use nalgebra::DMatrix;

use crate::error::ModelError;

/// Lower-triangular factor `L` of an SPD matrix `A = L L^T`, rows packed.
#[derive(Debug, Clone, PartialEq)]
pub struct CholeskyFactor {
    dim: usize,
    // row i holds L[i][0..=i] starting at i*(i+1)/2
    packed: Vec<f64>,
    log_det: f64,
}

impl CholeskyFactor {
    /// Factors a row-major `dim x dim` matrix.
    pub fn new(dim: usize, row_major: &[f64]) -> Result<Self, ModelError> {
        assert_eq!(row_major.len(), dim * dim);
        let m = DMatrix::from_row_slice(dim, dim, row_major);
        let chol = m
            .cholesky()
            .ok_or_else(|| ModelError::new("matrix is not positive definite"))?;
        let l = chol.l();
        let mut packed = Vec::with_capacity(dim * (dim + 1) / 2);
        let mut log_det = 0.0;
        for i in 0..dim {
            for j in 0..=i {
                packed.push(l[(i, j)]);
            }
            log_det += 2.0 * l[(i, i)].ln();
        }
        if !log_det.is_finite() {
            return Err(ModelError::new("factor has a zero pivot"));
        }
        Ok(CholeskyFactor { dim, packed, log_det })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `log det A`.
    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    fn row(&self, i: usize) -> &[f64] {
        let start = i * (i + 1) / 2;
        &self.packed[start..start + i + 1]
    }

    /// Solves `L z = b` in place.
    pub fn forward_solve(&self, b: &mut [f64]) {
        debug_assert_eq!(b.len(), self.dim);
        for i in 0..self.dim {
            let row = self.row(i);
            let dot: f64 = row[..i].iter().zip(&b[..i]).map(|(l, z)| l * z).sum();
            b[i] = (b[i] - dot) / row[i];
        }
    }

    /// Solves `L^T x = z` in place.
    pub fn backward_solve(&self, z: &mut [f64]) {
        for i in (0..self.dim).rev() {
            let row = self.row(i);
            let xi = z[i] / row[i];
            z[i] = xi;
            for (zk, lk) in z[..i].iter_mut().zip(row) {
                *zk -= lk * xi;
            }
        }
    }

    /// `A^{-1} b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.forward_solve(&mut x);
        self.backward_solve(&mut x);
        x
    }

    /// `r^T A^{-1} r`, consuming the residual buffer.
    pub fn quad_form_in_place(&self, r: &mut [f64]) -> f64 {
        self.forward_solve(r);
        r.iter().map(|z| z * z).sum()
    }

    /// `L z` for a standard normal `z`, i.e. a draw with covariance `A`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| self.row(i).iter().zip(z).map(|(l, z)| l * z).sum())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_against_dense_inverse() {
        let a = [4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0];
        let c = CholeskyFactor::new(3, &a).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = c.solve(&b);
        let inv = DMatrix::from_row_slice(3, 3, &a).try_inverse().unwrap();
        for i in 0..3 {
            let expect: f64 = (0..3).map(|j| inv[(i, j)] * b[j]).sum();
            assert!((x[i] - expect).abs() < 1e-12);
        }
        let det = DMatrix::from_row_slice(3, 3, &a).determinant();
        assert!((c.log_det() - det.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite() {
        assert!(CholeskyFactor::new(2, &[1.0, 2.0, 2.0, 1.0]).is_err());
    }
}
