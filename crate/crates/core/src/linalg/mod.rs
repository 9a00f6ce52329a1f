//! Sparse storage, direct factorization with partial pivoting for the
//! bordered Jacobian, and the constrained eigensolvers used by the
//! hypothesis checks.

mod bordered;
mod eig;
mod lu;

pub use bordered::BorderedMatrix;
pub use eig::{eig_c0, eig_smallest_dirichlet, EigenPair};
pub use lu::{lu_factor, LuFactors};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is {nrows}x{ncols}, expected square")]
    NotSquare { nrows: usize, ncols: usize },
    #[error("entry ({row}, {col}) outside a {nrows}x{ncols} matrix")]
    EntryOutOfBounds {
        row: usize,
        col: usize,
        nrows: usize,
        ncols: usize,
    },
    #[error("vector length {got} does not match dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("singular system: pivot {pivot:.3e} at elimination step {pivot_index}")]
    Singular { pivot_index: usize, pivot: f64 },
    #[error("eigensolver did not converge within {iterations} iterations (residual {residual:.3e})")]
    NonConvergence { iterations: usize, residual: f64 },
}

/// Compressed-row sparse matrix. Column indices are sorted within each row
/// and duplicate coordinates are merged on construction.
#[derive(Debug, Clone)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds a matrix from coordinate triplets; duplicates are summed.
    pub fn from_triplets(
        nrows: usize,
        ncols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<SparseMatrix, LinalgError> {
        for &(r, c, _) in triplets {
            if r >= nrows || c >= ncols {
                return Err(LinalgError::EntryOutOfBounds {
                    row: r,
                    col: c,
                    nrows,
                    ncols,
                });
            }
        }
        let mut sorted: Vec<(usize, usize, f64)> = triplets.to_vec();
        sorted.sort_unstable_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; nrows + 1];
        let mut col_idx = Vec::with_capacity(sorted.len());
        let mut values = Vec::with_capacity(sorted.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in sorted {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
                continue;
            }
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] = col_idx.len();
            last = Some((r, c));
        }
        // make row_ptr cumulative across empty rows
        for r in 0..nrows {
            if row_ptr[r + 1] < row_ptr[r] {
                row_ptr[r + 1] = row_ptr[r];
            }
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        (&self.col_idx[lo..hi], &self.values[lo..hi])
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals.iter()) {
                acc += v * x[*c];
            }
            y[r] = acc;
        }
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|r| self.row(r).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0f64; self.ncols];
        for (c, v) in self.col_idx.iter().zip(self.values.iter()) {
            sums[*c] += v.abs();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    /// Compressed-column view `(col_ptr, row_idx, values)`.
    pub fn to_csc(&self) -> (Vec<usize>, Vec<usize>, Vec<f64>) {
        let mut counts = vec![0usize; self.ncols + 1];
        for &c in &self.col_idx {
            counts[c + 1] += 1;
        }
        for c in 0..self.ncols {
            counts[c + 1] += counts[c];
        }
        let col_ptr = counts.clone();
        let mut next = counts;
        let mut row_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0f64; self.nnz()];
        for r in 0..self.nrows {
            let (cols, vals) = self.row(r);
            for (c, v) in cols.iter().zip(vals.iter()) {
                let slot = next[*c];
                row_idx[slot] = r;
                values[slot] = *v;
                next[*c] += 1;
            }
        }
        (col_ptr, row_idx, values)
    }

    /// Dense identity of size `n` in sparse storage.
    pub fn identity(n: usize) -> SparseMatrix {
        let triplets: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 1.0)).collect();
        SparseMatrix::from_triplets(n, n, &triplets).expect("identity")
    }
}

/// Assembles the negative Dirichlet Laplacian `-Δ_h` of a mesh (symmetric
/// positive definite).
pub fn neg_laplacian_matrix(mesh: &crate::mesh::Mesh) -> SparseMatrix {
    let n = mesh.interior_count();
    let mut triplets = Vec::with_capacity(5 * n);
    let mut row = Vec::new();
    for i in 0..n {
        mesh.interior_stencil(i, &mut row);
        for &(j, c) in &row {
            triplets.push((i, j, -c));
        }
    }
    SparseMatrix::from_triplets(n, n, &triplets).expect("stencil matrix")
}
