//! Symmetric operators on symmetric strains in Mandel coordinates.
//!
//! In one dimension a strain is the scalar `u'`. In two dimensions it is the
//! vector `(e11, e22, sqrt(2) e12)`, so that the Euclidean product of two
//! coordinate vectors equals the Frobenius product of the matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor {
    m: DMatrix<f64>,
}

/// Number of strain coordinates for a spatial dimension.
pub fn strain_size(dim: usize) -> usize {
    match dim {
        1 => 1,
        2 => 3,
        _ => panic!("unsupported dimension {dim}"),
    }
}

impl SymTensor {
    /// Builds a tensor from its coordinate matrix, which must be symmetric.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || !(m.nrows() == 1 || m.nrows() == 3) {
            return Err(Error::Domain(format!(
                "tensor matrix must be 1x1 or 3x3, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("tensor has non-finite entries".into()));
        }
        let scale = m.amax().max(1.0);
        for i in 0..m.nrows() {
            for j in 0..i {
                if (m[(i, j)] - m[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::Domain("tensor matrix is not symmetric".into()));
                }
            }
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self { m: sym })
    }

    pub fn scalar(value: f64) -> Self {
        Self {
            m: DMatrix::from_element(1, 1, value),
        }
    }

    pub fn identity(dim: usize) -> Self {
        let n = strain_size(dim);
        Self {
            m: DMatrix::identity(n, n),
        }
    }

    pub fn zero(dim: usize) -> Self {
        let n = strain_size(dim);
        Self {
            m: DMatrix::zeros(n, n),
        }
    }

    /// Isotropic plane tensor `xi -> 2 mu xi + lambda tr(xi) I`.
    pub fn isotropic(lambda: f64, mu: f64) -> Self {
        let mut m = DMatrix::zeros(3, 3);
        m[(0, 0)] = lambda + 2.0 * mu;
        m[(1, 1)] = lambda + 2.0 * mu;
        m[(0, 1)] = lambda;
        m[(1, 0)] = lambda;
        m[(2, 2)] = 2.0 * mu;
        Self { m }
    }

    pub fn size(&self) -> usize {
        self.m.nrows()
    }

    pub fn dim(&self) -> usize {
        if self.size() == 1 {
            1
        } else {
            2
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { m: &self.m * s }
    }

    pub fn apply(&self, strain: &[f64]) -> DVector<f64> {
        &self.m * DVector::from_column_slice(strain)
    }

    /// `T a . b`
    pub fn pair(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.size();
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                s += self.m[(i, j)] * a[j] * b[i];
            }
        }
        s
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.m.clone())
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_zero(&self) -> bool {
        self.m.iter().all(|v| *v == 0.0)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.size() == other.size() && (&self.m - &other.m).amax() <= tol
    }
}
