//! Sparse matrix helpers and the symmetric positive definite solvers.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::factorization::CscCholesky;
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};

use crate::domain::ConstrainedSpace;

/// Assembles from triplets; duplicates are summed in insertion order.
pub fn csr_from_triplets(n: usize, rows: &[usize], cols: &[usize], vals: &[f64]) -> CsrMatrix<f64> {
    let coo = CooMatrix::try_from_triplets(n, n, rows.to_vec(), cols.to_vec(), vals.to_vec())
        .expect("triplet indices in range");
    CsrMatrix::from(&coo)
}

/// `x^T A y`
pub fn quad(a: &CsrMatrix<f64>, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    let mut s = 0.0;
    for (i, row) in a.row_iter().enumerate() {
        let mut r = 0.0;
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            r += v * y[j];
        }
        s += x[i] * r;
    }
    s
}

pub fn matvec(a: &CsrMatrix<f64>, x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(a.nrows());
    for (i, row) in a.row_iter().enumerate() {
        let mut r = 0.0;
        for (&j, &v) in row.col_indices().iter().zip(row.values()) {
            r += v * x[j];
        }
        out[i] = r;
    }
    out
}

/// `sum_k c_k A_k` for matrices assembled on the same pattern.
pub fn combine(terms: &[(f64, &CsrMatrix<f64>)]) -> CsrMatrix<f64> {
    let first = terms[0].1;
    let mut out = first.clone();
    for (o, v) in out.values_mut().iter_mut().zip(first.values()) {
        *o = terms[0].0 * v;
    }
    for &(c, m) in &terms[1..] {
        assert_eq!(m.row_offsets(), first.row_offsets(), "patterns differ");
        assert_eq!(m.col_indices(), first.col_indices(), "patterns differ");
        for (o, v) in out.values_mut().iter_mut().zip(m.values()) {
            *o += c * v;
        }
    }
    out
}

/// `P^T A P` for the reduction map of a constrained space.
pub fn restrict(a: &CsrMatrix<f64>, space: &ConstrainedSpace) -> CsrMatrix<f64> {
    let n = space.n_free();
    let mut rows = Vec::new();
    let mut cols = Vec::new();
    let mut vals = Vec::new();
    for (i, j, &v) in a.triplet_iter() {
        if let (Some(ri), Some(rj)) = (space.slot(i), space.slot(j)) {
            rows.push(ri);
            cols.push(rj);
            vals.push(v);
        }
    }
    csr_from_triplets(n, &rows, &cols, &vals)
}

pub fn to_dense(a: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(a.nrows(), a.ncols());
    for (i, j, &v) in a.triplet_iter() {
        d[(i, j)] += v;
    }
    d
}

pub fn is_exactly_symmetric(a: &CsrMatrix<f64>) -> bool {
    let t = a.transpose();
    t.row_offsets() == a.row_offsets()
        && t.col_indices() == a.col_indices()
        && t.values() == a.values()
}

/// Linear solver selection.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub enum LinearSolver {
    /// Sparse Cholesky factorization.
    Direct,
    /// Jacobi-preconditioned conjugate gradients to a relative residual.
    Cg { tol: f64, max_iter: usize },
}

pub enum SpdSolver {
    Direct {
        factor: CscCholesky<f64>,
        matrix: CsrMatrix<f64>,
    },
    Cg {
        matrix: CsrMatrix<f64>,
        inv_diag: DVector<f64>,
        tol: f64,
        max_iter: usize,
    },
}

impl SpdSolver {
    pub fn new(matrix: CsrMatrix<f64>, kind: LinearSolver) -> Result<Self, String> {
        match kind {
            LinearSolver::Direct => {
                let csc = CscMatrix::from(&matrix);
                let factor = CscCholesky::factor(&csc)
                    .map_err(|e| format!("Cholesky factorization failed: {e:?}"))?;
                Ok(SpdSolver::Direct { factor, matrix })
            }
            LinearSolver::Cg { tol, max_iter } => {
                let mut inv_diag = DVector::zeros(matrix.nrows());
                for (i, j, &v) in matrix.triplet_iter() {
                    if i == j {
                        inv_diag[i] += v;
                    }
                }
                if inv_diag.iter().any(|d| !(*d > 0.0)) {
                    return Err("matrix has a nonpositive diagonal entry".into());
                }
                inv_diag.apply(|d| *d = 1.0 / *d);
                Ok(SpdSolver::Cg {
                    matrix,
                    inv_diag,
                    tol,
                    max_iter,
                })
            }
        }
    }

    pub fn matrix(&self) -> &CsrMatrix<f64> {
        match self {
            SpdSolver::Direct { matrix, .. } | SpdSolver::Cg { matrix, .. } => matrix,
        }
    }

    /// Solves `A x = b`; returns `x` and the relative residual `|b - A x| / |b|`.
    pub fn solve(&self, b: &DVector<f64>) -> Result<(DVector<f64>, f64), String> {
        let bnorm = b.norm();
        if bnorm == 0.0 {
            return Ok((DVector::zeros(b.len()), 0.0));
        }
        let x = match self {
            SpdSolver::Direct { factor, matrix } => {
                let mut x: DVector<f64> = factor.solve(b).column(0).into_owned();
                // one step of iterative refinement
                let r = b - matvec(matrix, &x);
                if r.norm() > 1e-15 * bnorm {
                    let dx: DVector<f64> = factor.solve(&r).column(0).into_owned();
                    x += dx;
                }
                x
            }
            SpdSolver::Cg {
                matrix,
                inv_diag,
                tol,
                max_iter,
            } => {
                let mut x = DVector::zeros(b.len());
                let mut r = b.clone();
                let mut z = r.component_mul(inv_diag);
                let mut p = z.clone();
                let mut rz = r.dot(&z);
                let mut converged = false;
                for _ in 0..*max_iter {
                    let ap = matvec(matrix, &p);
                    let alpha = rz / p.dot(&ap);
                    x.axpy(alpha, &p, 1.0);
                    r.axpy(-alpha, &ap, 1.0);
                    if r.norm() <= tol * bnorm {
                        converged = true;
                        break;
                    }
                    z = r.component_mul(inv_diag);
                    let rz_new = r.dot(&z);
                    p = &z + (rz_new / rz) * &p;
                    rz = rz_new;
                }
                if !converged {
                    return Err(format!(
                        "conjugate gradients did not reach {tol} in {max_iter} iterations"
                    ));
                }
                x
            }
        };
        let res = (b - matvec(self.matrix(), &x)).norm() / bnorm;
        Ok((x, res))
    }
}
