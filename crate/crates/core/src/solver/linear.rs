//! Sparse direct solves (faer LU with partial pivoting).

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseRowMatRef, SymbolicSparseRowMatRef};
use faer::Col;

use crate::error::{Error, Result};
use crate::sparse::{norm2, CsrMatrix};

/// LU factorisation of a square sparse matrix, kept together with the
/// matrix for residual checks and iterative refinement.
pub struct SparseLu {
    matrix: CsrMatrix,
    lu: Lu<usize, f64>,
}

impl std::fmt::Debug for SparseLu {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SparseLu")
            .field("n", &self.matrix.nrows)
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

/// Outcome of one solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    /// `|b - A x| / |b|` (absolute when `b = 0`).
    pub relative_residual: f64,
    pub refinement_steps: usize,
}

const MAX_REFINEMENT: usize = 3;

impl SparseLu {
    pub fn factor(matrix: CsrMatrix) -> Result<Self> {
        if matrix.nrows != matrix.ncols {
            return Err(Error::Solver(format!(
                "matrix is {}x{}, not square",
                matrix.nrows, matrix.ncols
            )));
        }
        if matrix.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Solver("matrix has non-finite entries".into()));
        }
        faer::set_global_parallelism(faer::Par::Seq);
        let n = matrix.nrows;
        let sym = SymbolicSparseRowMatRef::new_checked(n, n, &matrix.row_ptr, None, &matrix.col_idx);
        let lu = SparseRowMatRef::new(sym, &matrix.values)
            .sp_lu()
            .map_err(|e| Error::Solver(format!("LU factorisation failed: {e:?}")))?;
        Ok(SparseLu { matrix, lu })
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    fn raw_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut col = Col::<f64>::from_fn(b.len(), |i| b[i]);
        self.lu.solve_in_place(col.as_mat_mut());
        (0..b.len()).map(|i| col[i]).collect()
    }

    /// Solves `A x = b`, refining until the relative residual is at most `tol`.
    pub fn solve(&self, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
        if b.len() != self.matrix.nrows {
            return Err(Error::Solver(format!(
                "right-hand side has length {}, expected {}",
                b.len(),
                self.matrix.nrows
            )));
        }
        let scale = norm2(b);
        if scale == 0.0 {
            return Ok((
                vec![0.0; b.len()],
                SolveStats {
                    relative_residual: 0.0,
                    refinement_steps: 0,
                },
            ));
        }
        let mut x = self.raw_solve(b);
        let residual =
            |x: &[f64]| -> Vec<f64> { self.matrix.mul_vec(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
        let mut r = residual(&x);
        let mut rel = norm2(&r) / scale;
        let mut steps = 0;
        while rel > tol && steps < MAX_REFINEMENT && rel.is_finite() {
            let dx = self.raw_solve(&r);
            x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
            r = residual(&x);
            rel = norm2(&r) / scale;
            steps += 1;
        }
        if rel.is_nan() || rel > tol {
            return Err(Error::Solver(format!(
                "relative residual {rel:.3e} exceeds tolerance {tol:.1e} after {steps} refinement steps"
            )));
        }
        Ok((
            x,
            SolveStats {
                relative_residual: rel,
                refinement_steps: steps,
            },
        ))
    }
}

/// One-shot factor-and-solve.
pub fn solve_sparse(matrix: CsrMatrix, b: &[f64], tol: f64) -> Result<(Vec<f64>, SolveStats)> {
    SparseLu::factor(matrix)?.solve(b, tol)
}
