//! Uniform finite-difference meshes on an interval `(-L, L)` or an
//! axis-aligned rectangle `(0, Lx) x (0, Ly)`, together with the discrete
//! Laplacian, the boundary flux functional, and volume quadrature.
//!
//! The flux functional and the interior quadrature form a compatible pair:
//! for every nodal field the discrete divergence identity
//!
//! ```text
//!   boundary_flux(u, b) = sum_i w_i (Δ_h u)_i
//! ```
//!
//! holds to roundoff. Interior weights are trapezoid-corrected (plain `h`
//! except `3h/2` on boundary-adjacent nodes), which makes the induced flux
//! functional the standard second-order one-sided derivative
//! `(3 u_0 - 4 u_1 + u_2) / (2h)` at each end. Both the quadrature and the
//! imposed flux constraint are then second-order accurate, matching the
//! interior stencil.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("subdivision count {got} too small, need at least {min}")]
    TooCoarse { got: usize, min: usize },
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("field has {got} entries, mesh has {expected} interior nodes")]
    FieldLength { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeshKind {
    Interval,
    Rectangle,
}

#[derive(Debug, Clone)]
enum Geometry {
    Interval {
        half_length: f64,
        n: usize,
        h: f64,
    },
    Rectangle {
        lx: f64,
        ly: f64,
        nx: usize,
        ny: usize,
        hx: f64,
        hy: f64,
    },
}

/// Discretized domain. Immutable after construction; all operations are pure.
#[derive(Debug, Clone)]
pub struct Mesh {
    geom: Geometry,
    weights: Vec<f64>,
    volume: f64,
}

impl Mesh {
    /// Uniform mesh on `(-L, L)` with `n` subdivisions (`n + 1` nodes).
    pub fn interval(half_length: f64, n: usize) -> Result<Mesh, MeshError> {
        if half_length <= 0.0 {
            return Err(MeshError::NonPositive {
                what: "half length",
                value: half_length,
            });
        }
        if n < 4 {
            return Err(MeshError::TooCoarse { got: n, min: 4 });
        }
        let h = 2.0 * half_length / n as f64;
        let interior = n - 1;
        let mut weights = vec![h; interior];
        weights[0] = 1.5 * h;
        weights[interior - 1] = 1.5 * h;
        let volume: f64 = weights.iter().sum();
        Ok(Mesh {
            geom: Geometry::Interval { half_length, n, h },
            weights,
            volume,
        })
    }

    /// Uniform mesh on `(0, Lx) x (0, Ly)` with `nx`, `ny` subdivisions.
    pub fn rectangle(lx: f64, ly: f64, nx: usize, ny: usize) -> Result<Mesh, MeshError> {
        if lx <= 0.0 {
            return Err(MeshError::NonPositive { what: "Lx", value: lx });
        }
        if ly <= 0.0 {
            return Err(MeshError::NonPositive { what: "Ly", value: ly });
        }
        if nx < 4 || ny < 4 {
            return Err(MeshError::TooCoarse {
                got: nx.min(ny),
                min: 4,
            });
        }
        let hx = lx / nx as f64;
        let hy = ly / ny as f64;
        let line = |h: f64, n: usize| -> Vec<f64> {
            let mut w = vec![h; n - 1];
            w[0] = 1.5 * h;
            w[n - 2] = 1.5 * h;
            w
        };
        let wx = line(hx, nx);
        let wy = line(hy, ny);
        let mut weights = Vec::with_capacity(wx.len() * wy.len());
        for wyj in &wy {
            for wxi in &wx {
                weights.push(wxi * wyj);
            }
        }
        let volume: f64 = weights.iter().sum();
        Ok(Mesh {
            geom: Geometry::Rectangle {
                lx,
                ly,
                nx,
                ny,
                hx,
                hy,
            },
            weights,
            volume,
        })
    }

    pub fn kind(&self) -> MeshKind {
        match self.geom {
            Geometry::Interval { .. } => MeshKind::Interval,
            Geometry::Rectangle { .. } => MeshKind::Rectangle,
        }
    }

    pub fn is_two_dimensional(&self) -> bool {
        self.kind() == MeshKind::Rectangle
    }

    /// Number of interior nodes.
    pub fn interior_count(&self) -> usize {
        self.weights.len()
    }

    /// Domain extents: `(2L, 0)` for an interval, `(Lx, Ly)` for a
    /// rectangle.
    pub fn extents(&self) -> (f64, f64) {
        match self.geom {
            Geometry::Interval { half_length, .. } => (2.0 * half_length, 0.0),
            Geometry::Rectangle { lx, ly, .. } => (lx, ly),
        }
    }

    /// Grid spacing `(hx, hy)`; `hy = 0` on an interval.
    pub fn spacing(&self) -> (f64, f64) {
        match self.geom {
            Geometry::Interval { h, .. } => (h, 0.0),
            Geometry::Rectangle { hx, hy, .. } => (hx, hy),
        }
    }

    /// Interior quadrature weights, one per interior node.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Discrete volume `|D|_h` (the sum of the interior weights; equals the
    /// exact volume for these weights).
    pub fn volume(&self) -> f64 {
        self.volume
    }

    /// Coordinates `(x, y)` of interior node `idx`; `y = 0` on an interval.
    pub fn interior_coord(&self, idx: usize) -> (f64, f64) {
        match self.geom {
            Geometry::Interval { half_length, h, .. } => {
                (-half_length + (idx as f64 + 1.0) * h, 0.0)
            }
            Geometry::Rectangle { nx, hx, hy, .. } => {
                let cols = nx - 1;
                let i = idx % cols;
                let j = idx / cols;
                ((i as f64 + 1.0) * hx, (j as f64 + 1.0) * hy)
            }
        }
    }

    fn check_len(&self, u: &[f64]) -> Result<(), MeshError> {
        if u.len() != self.interior_count() {
            return Err(MeshError::FieldLength {
                expected: self.interior_count(),
                got: u.len(),
            });
        }
        Ok(())
    }

    /// Second-order discrete Laplacian of the field `u` with boundary value
    /// `b` at every boundary node; returns one value per interior node.
    pub fn apply_laplacian(&self, u: &[f64], b: f64) -> Result<Vec<f64>, MeshError> {
        self.check_len(u)?;
        let mut out = vec![0.0; u.len()];
        match self.geom {
            Geometry::Interval { h, .. } => {
                let inv_h2 = 1.0 / (h * h);
                let m = u.len();
                for i in 0..m {
                    let left = if i == 0 { b } else { u[i - 1] };
                    let right = if i + 1 == m { b } else { u[i + 1] };
                    // difference-first: neighbor subtractions are exact for
                    // smooth fields, so large constant offsets in u do not
                    // inflate the roundoff floor by 1/h²
                    out[i] = ((left - u[i]) + (right - u[i])) * inv_h2;
                }
            }
            Geometry::Rectangle { nx, ny, hx, hy, .. } => {
                let cols = nx - 1;
                let rows = ny - 1;
                let ix2 = 1.0 / (hx * hx);
                let iy2 = 1.0 / (hy * hy);
                for j in 0..rows {
                    for i in 0..cols {
                        let c = u[j * cols + i];
                        let l = if i == 0 { b } else { u[j * cols + i - 1] };
                        let r = if i + 1 == cols { b } else { u[j * cols + i + 1] };
                        let d = if j == 0 { b } else { u[(j - 1) * cols + i] };
                        let t = if j + 1 == rows { b } else { u[(j + 1) * cols + i] };
                        out[j * cols + i] =
                            ((l - c) + (r - c)) * ix2 + ((d - c) + (t - c)) * iy2;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Total outward boundary flux of `(u, b)`: the sum over the boundary of
    /// second-order one-sided normal derivatives times transverse edge
    /// weights. Compatible with [`Mesh::apply_laplacian`] so that the
    /// discrete divergence identity holds exactly.
    pub fn boundary_flux(&self, u: &[f64], b: f64) -> Result<f64, MeshError> {
        self.check_len(u)?;
        Ok(match self.geom {
            Geometry::Interval { h, .. } => {
                let m = u.len();
                let left = (3.0 * (b - u[0]) + (u[1] - u[0])) / (2.0 * h);
                let right = (3.0 * (b - u[m - 1]) + (u[m - 2] - u[m - 1])) / (2.0 * h);
                left + right
            }
            Geometry::Rectangle { nx, ny, hx, hy, .. } => {
                let cols = nx - 1;
                let rows = ny - 1;
                let wline = |h: f64, n: usize, i: usize| -> f64 {
                    if i == 0 || i == n - 2 {
                        1.5 * h
                    } else {
                        h
                    }
                };
                let mut flux = 0.0;
                for j in 0..rows {
                    let t = wline(hy, ny, j);
                    let row = |i: usize| u[j * cols + i];
                    flux += t * (3.0 * (b - row(0)) + (row(1) - row(0))) / (2.0 * hx);
                    flux += t * (3.0 * (b - row(cols - 1)) + (row(cols - 2) - row(cols - 1)))
                        / (2.0 * hx);
                }
                for i in 0..cols {
                    let t = wline(hx, nx, i);
                    let col = |j: usize| u[j * cols + i];
                    flux += t * (3.0 * (b - col(0)) + (col(1) - col(0))) / (2.0 * hy);
                    flux += t * (3.0 * (b - col(rows - 1)) + (col(rows - 2) - col(rows - 1)))
                        / (2.0 * hy);
                }
                flux
            }
        })
    }

    /// Quadrature mean `(1/|D|_h) Σ w_i u_i` over the interior nodes.
    pub fn average(&self, u: &[f64]) -> Result<f64, MeshError> {
        self.check_len(u)?;
        let s: f64 = self
            .weights
            .iter()
            .zip(u.iter())
            .map(|(w, v)| w * v)
            .sum();
        Ok(s / self.volume)
    }

    /// Interior Laplacian stencil for row `idx`: pushes the couplings to the
    /// other interior nodes (including the diagonal) into `out` and returns
    /// the coefficient multiplying the boundary value `b`.
    pub fn interior_stencil(&self, idx: usize, out: &mut Vec<(usize, f64)>) -> f64 {
        out.clear();
        match self.geom {
            Geometry::Interval { h, .. } => {
                let inv_h2 = 1.0 / (h * h);
                let m = self.interior_count();
                let mut bcoef = 0.0;
                out.push((idx, -2.0 * inv_h2));
                if idx == 0 {
                    bcoef += inv_h2;
                } else {
                    out.push((idx - 1, inv_h2));
                }
                if idx + 1 == m {
                    bcoef += inv_h2;
                } else {
                    out.push((idx + 1, inv_h2));
                }
                bcoef
            }
            Geometry::Rectangle { nx, ny, hx, hy, .. } => {
                let cols = nx - 1;
                let rows = ny - 1;
                let i = idx % cols;
                let j = idx / cols;
                let ix2 = 1.0 / (hx * hx);
                let iy2 = 1.0 / (hy * hy);
                let mut bcoef = 0.0;
                out.push((idx, -2.0 * (ix2 + iy2)));
                if i == 0 {
                    bcoef += ix2;
                } else {
                    out.push((idx - 1, ix2));
                }
                if i + 1 == cols {
                    bcoef += ix2;
                } else {
                    out.push((idx + 1, ix2));
                }
                if j == 0 {
                    bcoef += iy2;
                } else {
                    out.push((idx - cols, iy2));
                }
                if j + 1 == rows {
                    bcoef += iy2;
                } else {
                    out.push((idx + cols, iy2));
                }
                bcoef
            }
        }
    }

    /// Boundary flux as a linear functional: sparse coefficients over the
    /// interior nodes plus the coefficient of `b`.
    pub fn flux_row(&self) -> (Vec<(usize, f64)>, f64) {
        let mut coeffs: Vec<f64> = vec![0.0; self.interior_count()];
        let mut bcoef = 0.0;
        match self.geom {
            Geometry::Interval { h, .. } => {
                let m = self.interior_count();
                let s = 1.0 / (2.0 * h);
                coeffs[0] += -4.0 * s;
                coeffs[1] += s;
                coeffs[m - 1] += -4.0 * s;
                coeffs[m - 2] += s;
                bcoef += 6.0 * s;
            }
            Geometry::Rectangle { nx, ny, hx, hy, .. } => {
                let cols = nx - 1;
                let rows = ny - 1;
                let wline = |h: f64, n: usize, i: usize| -> f64 {
                    if i == 0 || i == n - 2 {
                        1.5 * h
                    } else {
                        h
                    }
                };
                for j in 0..rows {
                    let t = wline(hy, ny, j) / (2.0 * hx);
                    coeffs[j * cols] += -4.0 * t;
                    coeffs[j * cols + 1] += t;
                    coeffs[j * cols + cols - 1] += -4.0 * t;
                    coeffs[j * cols + cols - 2] += t;
                    bcoef += 6.0 * t;
                }
                for i in 0..cols {
                    let t = wline(hx, nx, i) / (2.0 * hy);
                    coeffs[i] += -4.0 * t;
                    coeffs[cols + i] += t;
                    coeffs[(rows - 1) * cols + i] += -4.0 * t;
                    coeffs[(rows - 2) * cols + i] += t;
                    bcoef += 6.0 * t;
                }
            }
        }
        let sparse: Vec<(usize, f64)> = coeffs
            .into_iter()
            .enumerate()
            .filter(|(_, v)| *v != 0.0)
            .collect();
        (sparse, bcoef)
    }

    /// All nodes in lexicographic order as `(x, y, interior_index)`;
    /// `interior_index` is `None` on boundary nodes. Used for field output.
    pub fn all_nodes(&self) -> Vec<(f64, f64, Option<usize>)> {
        match self.geom {
            Geometry::Interval { half_length, n, h } => (0..=n)
                .map(|i| {
                    let x = -half_length + i as f64 * h;
                    let interior = if i >= 1 && i < n { Some(i - 1) } else { None };
                    (x, 0.0, interior)
                })
                .collect(),
            Geometry::Rectangle { nx, ny, hx, hy, .. } => {
                let cols = nx - 1;
                let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
                for j in 0..=ny {
                    for i in 0..=nx {
                        let interior = if i >= 1 && i < nx && j >= 1 && j < ny {
                            Some((j - 1) * cols + (i - 1))
                        } else {
                            None
                        };
                        nodes.push((i as f64 * hx, j as f64 * hy, interior));
                    }
                }
                nodes
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn divergence_gap(mesh: &Mesh, u: &[f64], b: f64) -> (f64, f64) {
        let lap = mesh.apply_laplacian(u, b).unwrap();
        let volsum: f64 = mesh
            .weights()
            .iter()
            .zip(lap.iter())
            .map(|(w, l)| w * l)
            .sum();
        let flux = mesh.boundary_flux(u, b).unwrap();
        let (h, _) = mesh.spacing();
        let scale = 1.0 + u.iter().map(|v| v.abs()).sum::<f64>() / (h * h);
        ((flux - volsum).abs(), scale)
    }

    #[test]
    fn constants_are_harmonic() {
        for mesh in [
            Mesh::interval(1.0, 16).unwrap(),
            Mesh::rectangle(1.0, 1.5, 8, 10).unwrap(),
        ] {
            let u = vec![3.25; mesh.interior_count()];
            let lap = mesh.apply_laplacian(&u, 3.25).unwrap();
            assert!(lap.iter().all(|v| v.abs() < 1e-12));
            assert!(mesh.boundary_flux(&u, 3.25).unwrap().abs() < 1e-12);
            assert!((mesh.average(&u).unwrap() - 3.25).abs() < 1e-13);
        }
    }

    #[test]
    fn affine_fields_are_harmonic() {
        let mesh = Mesh::rectangle(2.0, 1.0, 12, 8).unwrap();
        let u: Vec<f64> = (0..mesh.interior_count())
            .map(|i| {
                let (x, y) = mesh.interior_coord(i);
                0.7 * x - 0.3 * y + 0.1
            })
            .collect();
        // boundary value differs per node, so only test the stencil through
        // a field that is affine with equal boundary trace: skip flux, check
        // Laplacian rows away from the boundary instead.
        let lap = mesh.apply_laplacian(&u, 0.0).unwrap();
        let cols = 11usize;
        for j in 1..7 - 1 {
            for i in 1..cols - 1 {
                assert!(lap[j * cols + i].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn quadratic_is_exact_interval() {
        let mesh = Mesh::interval(1.0, 16).unwrap();
        let u: Vec<f64> = (0..mesh.interior_count())
            .map(|i| mesh.interior_coord(i).0.powi(2))
            .collect();
        let lap = mesh.apply_laplacian(&u, 1.0).unwrap();
        for v in lap {
            assert!((v - 2.0).abs() < 1e-12, "{v}");
        }
        // flux of x^2 with b = 1: exact because the one-sided stencil is
        // second order: ∮ ∂(x²)/∂n = 4.
        let flux = mesh.boundary_flux(&u, 1.0).unwrap();
        assert!((flux - 4.0).abs() < 1e-12, "{flux}");
    }

    #[test]
    fn laplacian_second_order_on_cosine() {
        let err_for = |n: usize| -> f64 {
            let mesh = Mesh::interval(1.0, n).unwrap();
            let u: Vec<f64> = (0..mesh.interior_count())
                .map(|i| (std::f64::consts::PI * mesh.interior_coord(i).0).cos() + 1.0)
                .collect();
            let lap = mesh.apply_laplacian(&u, 0.0).unwrap();
            let pi2 = std::f64::consts::PI.powi(2);
            (0..u.len())
                .map(|i| {
                    let x = mesh.interior_coord(i).0;
                    (lap[i] + pi2 * (std::f64::consts::PI * x).cos()).abs()
                })
                .fold(0.0f64, f64::max)
        };
        let e200 = err_for(200);
        let e400 = err_for(400);
        let ratio = e200 / e400;
        assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn average_of_quadratic() {
        let mesh = Mesh::interval(1.0, 400).unwrap();
        let u: Vec<f64> = (0..mesh.interior_count())
            .map(|i| mesh.interior_coord(i).0.powi(2))
            .collect();
        let avg = mesh.average(&u).unwrap();
        assert!((avg - 1.0 / 3.0).abs() < 1e-3, "{avg}");
    }

    #[test]
    fn average_of_cosine() {
        let mesh = Mesh::interval(1.0, 400).unwrap();
        let u: Vec<f64> = (0..mesh.interior_count())
            .map(|i| (std::f64::consts::PI * mesh.interior_coord(i).0).cos())
            .collect();
        assert!(mesh.average(&u).unwrap().abs() < 1e-3);
    }

    #[test]
    fn average_quadratic_converges_second_order() {
        let err_for = |n: usize| -> f64 {
            let mesh = Mesh::interval(1.0, n).unwrap();
            let u: Vec<f64> = (0..mesh.interior_count())
                .map(|i| mesh.interior_coord(i).0.powi(2))
                .collect();
            (mesh.average(&u).unwrap() - 1.0 / 3.0).abs()
        };
        let ratio = err_for(100) / err_for(200);
        assert!((3.4..=4.6).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn divergence_identity_random_fields() {
        use crate::rng::SplitMix64;
        let mut rng = SplitMix64::new(0xD17);
        for mesh in [
            Mesh::interval(1.0, 37).unwrap(),
            Mesh::rectangle(1.3, 0.8, 9, 13).unwrap(),
        ] {
            for _ in 0..50 {
                let u = rng.vector_in(mesh.interior_count(), -5.0, 5.0);
                let b = rng.next_in(-5.0, 5.0);
                let (gap, scale) = divergence_gap(&mesh, &u, b);
                assert!(gap <= 1e-12 * scale, "gap {gap}, scale {scale}");
            }
        }
    }

    #[test]
    fn discrete_volume_matches_domain() {
        let m1 = Mesh::interval(1.0, 17).unwrap();
        assert!((m1.volume() - 2.0).abs() < 1e-13);
        let m2 = Mesh::rectangle(1.0, 1.5, 8, 12).unwrap();
        assert!((m2.volume() - 1.5).abs() < 1e-13);
    }

    #[test]
    fn index_sets_cover_all_nodes() {
        let mesh = Mesh::rectangle(1.0, 1.0, 5, 6).unwrap();
        let nodes = mesh.all_nodes();
        assert_eq!(nodes.len(), 6 * 7);
        let interior = nodes.iter().filter(|(_, _, i)| i.is_some()).count();
        assert_eq!(interior, mesh.interior_count());
        assert_eq!(interior, 4 * 5);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mesh = Mesh::interval(1.0, 8).unwrap();
        let u = vec![0.0; 3];
        assert!(matches!(
            mesh.apply_laplacian(&u, 0.0),
            Err(MeshError::FieldLength { .. })
        ));
        assert!(mesh.boundary_flux(&u, 0.0).is_err());
        assert!(mesh.average(&u).is_err());
    }

    #[test]
    fn coarse_mesh_rejected() {
        assert!(Mesh::interval(1.0, 3).is_err());
        assert!(Mesh::rectangle(1.0, 1.0, 4, 3).is_err());
        assert!(Mesh::interval(-1.0, 10).is_err());
    }

    #[test]
    fn flux_row_matches_boundary_flux() {
        use crate::rng::SplitMix64;
        let mut rng = SplitMix64::new(99);
        for mesh in [
            Mesh::interval(0.7, 11).unwrap(),
            Mesh::rectangle(1.0, 2.0, 6, 7).unwrap(),
        ] {
            let (coeffs, bcoef) = mesh.flux_row();
            for _ in 0..10 {
                let u = rng.vector_in(mesh.interior_count(), -2.0, 2.0);
                let b = rng.next_in(-2.0, 2.0);
                let lin: f64 =
                    coeffs.iter().map(|(i, c)| c * u[*i]).sum::<f64>() + bcoef * b;
                let direct = mesh.boundary_flux(&u, b).unwrap();
                assert!((lin - direct).abs() < 1e-10 * (1.0 + direct.abs()));
            }
        }
    }

    #[test]
    fn stencil_matches_apply() {
        use crate::rng::SplitMix64;
        let mut rng = SplitMix64::new(5);
        let mesh = Mesh::rectangle(1.0, 1.0, 7, 5).unwrap();
        let u = rng.vector_in(mesh.interior_count(), -1.0, 1.0);
        let b = 0.37;
        let lap = mesh.apply_laplacian(&u, b).unwrap();
        let mut row = Vec::new();
        for idx in 0..mesh.interior_count() {
            let bcoef = mesh.interior_stencil(idx, &mut row);
            let v: f64 = row.iter().map(|(j, c)| c * u[*j]).sum::<f64>() + bcoef * b;
            assert!((v - lap[idx]).abs() < 1e-11);
        }
    }
}
