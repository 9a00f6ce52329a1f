//! Interior operator bordered by the two dense constraint rows (flux and
//! average) and the two dense columns (sensitivities to `b` and `μ`).

use super::{LinalgError, SparseMatrix};

/// Block form of the linearized augmented system. Unknown ordering is the
/// interior field, then `b`, then `μ`; equation ordering is the interior PDE
/// rows, then the flux row, then the average row.
#[derive(Debug, Clone)]
pub struct BorderedMatrix {
    /// Interior block, `N x N`.
    pub interior: SparseMatrix,
    /// Column coupling interior rows to `b`.
    pub b_column: Vec<f64>,
    /// Column coupling interior rows to `μ`.
    pub mu_column: Vec<f64>,
    /// Flux row over interior unknowns.
    pub flux_row: Vec<(usize, f64)>,
    /// Average row over interior unknowns.
    pub average_row: Vec<f64>,
    /// `[[∂flux/∂b, ∂flux/∂μ], [∂avg/∂b, ∂avg/∂μ]]`.
    pub corner: [[f64; 2]; 2],
}

impl BorderedMatrix {
    pub fn interior_dim(&self) -> usize {
        self.interior.nrows()
    }

    /// Full `(N+2) x (N+2)` sparse matrix.
    pub fn assemble_full(&self) -> Result<SparseMatrix, LinalgError> {
        let n = self.interior_dim();
        let mut trips: Vec<(usize, usize, f64)> =
            Vec::with_capacity(self.interior.nnz() + 4 * n + 8);
        for r in 0..n {
            let (cols, vals) = self.interior.row(r);
            for (c, v) in cols.iter().zip(vals.iter()) {
                trips.push((r, *c, *v));
            }
        }
        for (r, v) in self.b_column.iter().enumerate() {
            if *v != 0.0 {
                trips.push((r, n, *v));
            }
        }
        for (r, v) in self.mu_column.iter().enumerate() {
            if *v != 0.0 {
                trips.push((r, n + 1, *v));
            }
        }
        for &(c, v) in &self.flux_row {
            trips.push((n, c, v));
        }
        for (c, v) in self.average_row.iter().enumerate() {
            if *v != 0.0 {
                trips.push((n + 1, c, *v));
            }
        }
        for (i, row) in self.corner.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if *v != 0.0 {
                    trips.push((n + i, n + j, *v));
                }
            }
        }
        SparseMatrix::from_triplets(n + 2, n + 2, &trips)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembles_blocks_in_place() {
        let interior =
            SparseMatrix::from_triplets(2, 2, &[(0, 0, 2.0), (1, 1, 3.0)]).unwrap();
        let m = BorderedMatrix {
            interior,
            b_column: vec![0.5, 0.0],
            mu_column: vec![-1.0, -1.0],
            flux_row: vec![(0, 7.0)],
            average_row: vec![0.25, 0.75],
            corner: [[9.0, 0.0], [0.0, 0.0]],
        };
        let full = m.assemble_full().unwrap();
        assert_eq!(full.nrows(), 4);
        let (cols, vals) = full.row(0);
        assert_eq!(cols, &[0, 2, 3]);
        assert_eq!(vals, &[2.0, 0.5, -1.0]);
        let (cols, vals) = full.row(2);
        assert_eq!(cols, &[0, 2]);
        assert_eq!(vals, &[7.0, 9.0]);
        let (cols, vals) = full.row(3);
        assert_eq!(cols, &[0, 1]);
        assert_eq!(vals, &[0.25, 0.75]);
    }
}
