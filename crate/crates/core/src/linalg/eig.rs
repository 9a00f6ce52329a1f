//! Inverse-iteration eigensolvers for the Dirichlet Laplacian and for the
//! constrained Poincaré constant `c₀`.

use super::{lu_factor, neg_laplacian_matrix, LinalgError, LuFactors, SparseMatrix};
use crate::mesh::Mesh;
use crate::rng::SplitMix64;

const MAX_ITERATIONS: usize = 500;
const RESIDUAL_TOL: f64 = 1e-8;
const RQ_REL_TOL: f64 = 1e-10;
const START_SEED: u64 = 0x0eed_5eed;

/// Eigenvalue with its (Euclidean-normalized) eigenvector.
#[derive(Debug, Clone)]
pub struct EigenPair {
    pub value: f64,
    pub vector: Vec<f64>,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|t| t * t).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(p, q)| p * q).sum()
}

fn normalize(v: &mut [f64]) {
    let n = norm2(v);
    if n > 0.0 {
        v.iter_mut().for_each(|t| *t /= n);
    }
}

fn rayleigh(a: &SparseMatrix, v: &[f64], av: &mut [f64]) -> f64 {
    a.matvec(v, av);
    dot(v, av) / dot(v, v)
}

fn residual_norm(av: &[f64], v: &[f64], lambda: f64) -> f64 {
    av.iter()
        .zip(v.iter())
        .map(|(p, q)| (p - lambda * q).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// The `count` smallest eigenvalues of `-Δ_h` with zero boundary values,
/// by inverse iteration with deflation of the earlier eigenvectors.
pub fn eig_smallest_dirichlet(
    mesh: &Mesh,
    count: usize,
) -> Result<Vec<EigenPair>, LinalgError> {
    let a = neg_laplacian_matrix(mesh);
    let factors = lu_factor(&a)?;
    let n = a.nrows();
    let mut rng = SplitMix64::new(START_SEED);
    let mut pairs: Vec<EigenPair> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = rng.vector_in(n, -1.0, 1.0);
        deflate(&mut v, &pairs);
        normalize(&mut v);
        let mut av = vec![0.0; n];
        let mut lambda = rayleigh(&a, &v, &mut av);
        let mut converged = false;
        for _ in 0..MAX_ITERATIONS {
            let mut y = factors.solve(&v)?;
            deflate(&mut y, &pairs);
            normalize(&mut y);
            v = y;
            lambda = rayleigh(&a, &v, &mut av);
            if residual_norm(&av, &v, lambda) <= RESIDUAL_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(LinalgError::NonConvergence {
                iterations: MAX_ITERATIONS,
                residual: residual_norm(&av, &v, lambda),
            });
        }
        pairs.push(EigenPair { value: lambda, vector: v });
    }
    Ok(pairs)
}

fn deflate(v: &mut [f64], pairs: &[EigenPair]) {
    for p in pairs {
        let c = dot(v, &p.vector);
        v.iter_mut()
            .zip(p.vector.iter())
            .for_each(|(t, w)| *t -= c * w);
    }
}

/// Best constant of the Poincaré inequality over zero-boundary fields with
/// zero quadrature average: the minimum of the discrete Rayleigh quotient
/// `uᵀ(-Δ_h)u / uᵀu` subject to `Σ w_i u_i = 0`.
///
/// Computed by constrained inverse iteration: each step solves the bordered
/// system `-Δ_h y = v + γ w` with the multiplier `γ` chosen so that the
/// iterate satisfies the constraint (a plain solve followed by projection
/// drifts toward a spurious low-regularity mode on some rectangles), then
/// projects in the quadrature-weighted inner product to scrub roundoff.
pub fn eig_c0(mesh: &Mesh) -> Result<f64, LinalgError> {
    Ok(eig_c0_pair(mesh)?.value)
}

/// As [`eig_c0`], returning the minimizing field as well.
pub fn eig_c0_pair(mesh: &Mesh) -> Result<EigenPair, LinalgError> {
    let a = neg_laplacian_matrix(mesh);
    let factors = lu_factor(&a)?;
    let n = a.nrows();
    let w = mesh.weights();
    let kinv_w = factors.solve(w)?;
    let w_kinv_w = dot(w, &kinv_w);

    let mut rng = SplitMix64::new(START_SEED ^ 0xc0);
    let mut v = rng.vector_in(n, -1.0, 1.0);
    project_zero_average(&mut v, w);
    normalize(&mut v);

    let mut av = vec![0.0; n];
    let mut rq = rayleigh(&a, &v, &mut av);
    for _ in 0..MAX_ITERATIONS {
        let mut y = constrained_inverse_step(&factors, &v, w, &kinv_w, w_kinv_w)?;
        project_zero_average(&mut y, w);
        normalize(&mut y);
        debug_assert!(dot(&y, w).abs() <= 1e-12 * norm2(&y) * scale_of(w));
        v = y;
        let rq_new = rayleigh(&a, &v, &mut av);
        let done = (rq_new - rq).abs() < RQ_REL_TOL * rq_new.abs();
        rq = rq_new;
        if done {
            return Ok(EigenPair { value: rq, vector: v });
        }
    }
    Err(LinalgError::NonConvergence {
        iterations: MAX_ITERATIONS,
        residual: (rq - rayleigh(&a, &v, &mut av)).abs(),
    })
}

fn scale_of(w: &[f64]) -> f64 {
    w.iter().map(|t| t.abs()).fold(0.0, f64::max).max(1.0)
}

/// Solves `-Δ_h y = v + γ w` with `γ` such that `wᵀ y = 0`.
fn constrained_inverse_step(
    factors: &LuFactors,
    v: &[f64],
    w: &[f64],
    kinv_w: &[f64],
    w_kinv_w: f64,
) -> Result<Vec<f64>, LinalgError> {
    let kinv_v = factors.solve(v)?;
    let gamma = -dot(w, &kinv_v) / w_kinv_w;
    Ok(kinv_v
        .iter()
        .zip(kinv_w.iter())
        .map(|(a, b)| a + gamma * b)
        .collect())
}

/// Projection onto `{ Σ w_i u_i = 0 }` in the quadrature-weighted inner
/// product (subtracts the weighted mean).
fn project_zero_average(v: &mut [f64], w: &[f64]) {
    let wsum: f64 = w.iter().sum();
    let m = dot(v, w) / wsum;
    v.iter_mut().for_each(|t| *t -= m);
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Closed-form eigenvalues of the discrete 1D operator on `(-L, L)`:
    /// `λ_j = (4/h²) sin²(jπ / 2n)`.
    fn discrete_interval_eig(l: f64, n: usize, j: usize) -> f64 {
        let h = 2.0 * l / n as f64;
        let s = (j as f64 * PI / (2.0 * n as f64)).sin();
        4.0 / (h * h) * s * s
    }

    #[test]
    fn interval_eigenvalues_match_remark() {
        let mesh = Mesh::interval(1.0, 400).unwrap();
        let pairs = eig_smallest_dirichlet(&mesh, 2).unwrap();
        let l1 = pairs[0].value;
        let l2 = pairs[1].value;
        // λ_n = n²π²/(2L)² with 2L = 2: λ₁ = π²/4, λ₂ = π².
        assert!((l1 - PI * PI / 4.0).abs() / (PI * PI / 4.0) < 2e-3, "{l1}");
        assert!((l2 - PI * PI).abs() / (PI * PI) < 2e-3, "{l2}");
        // and they agree with the discrete closed form far more tightly
        assert!((l1 - discrete_interval_eig(1.0, 400, 1)).abs() < 1e-8);
        assert!((l2 - discrete_interval_eig(1.0, 400, 2)).abs() < 1e-8);
    }

    #[test]
    fn eigenvalues_scale_with_domain() {
        let a = eig_smallest_dirichlet(&Mesh::interval(1.0, 100).unwrap(), 2).unwrap();
        let b = eig_smallest_dirichlet(&Mesh::interval(2.0, 100).unwrap(), 2).unwrap();
        for (pa, pb) in a.iter().zip(b.iter()) {
            let ratio = pa.value / pb.value;
            assert!((ratio - 4.0).abs() < 1e-10 * 4.0, "ratio {ratio}");
        }
    }

    #[test]
    fn residual_bound_holds() {
        let mesh = Mesh::rectangle(1.0, 1.5, 24, 24).unwrap();
        let a = neg_laplacian_matrix(&mesh);
        let pairs = eig_smallest_dirichlet(&mesh, 2).unwrap();
        let mut av = vec![0.0; a.nrows()];
        for p in &pairs {
            a.matvec(&p.vector, &mut av);
            let r = residual_norm(&av, &p.vector, p.value);
            assert!(r <= RESIDUAL_TOL * norm2(&p.vector), "residual {r}");
            assert!(p.value > 0.0);
        }
        assert!(pairs[0].value < pairs[1].value);
    }

    #[test]
    fn c0_equals_lambda2_on_interval() {
        let mesh = Mesh::interval(1.0, 400).unwrap();
        let c0 = eig_c0(&mesh).unwrap();
        let l2 = eig_smallest_dirichlet(&mesh, 2).unwrap()[1].value;
        assert!((c0 - PI * PI).abs() / (PI * PI) < 2e-3, "{c0}");
        assert!((c0 - l2).abs() / l2 < 1e-3, "c0 {c0} vs λ₂ {l2}");
    }

    #[test]
    fn c0_on_rectangle_between_first_eigenvalues() {
        let mesh = Mesh::rectangle(1.0, 1.5, 20, 30).unwrap();
        let pairs = eig_smallest_dirichlet(&mesh, 2).unwrap();
        let c0 = eig_c0(&mesh).unwrap();
        assert!(pairs[0].value < c0, "λ₁ {} vs c₀ {c0}", pairs[0].value);
        assert!(c0 <= pairs[1].value + 1e-8, "c₀ {c0} vs λ₂ {}", pairs[1].value);
    }

    #[test]
    fn c0_iterate_keeps_zero_weighted_average() {
        let mesh = Mesh::interval(1.0, 64).unwrap();
        let pair = eig_c0_pair(&mesh).unwrap();
        let wsum: f64 = mesh
            .weights()
            .iter()
            .zip(pair.vector.iter())
            .map(|(w, v)| w * v)
            .sum();
        assert!(wsum.abs() <= 1e-12 * norm2(&pair.vector));
    }

    #[test]
    fn unit_square_tensor_eigenvalues() {
        let mesh = Mesh::rectangle(1.0, 1.0, 24, 24).unwrap();
        let pairs = eig_smallest_dirichlet(&mesh, 2).unwrap();
        // closed-form tensor eigenvalues of the 5-point operator
        let per_dir = |j: usize| {
            let h = 1.0 / 24.0;
            let s = (j as f64 * PI * h / 2.0).sin();
            4.0 / (h * h) * s * s
        };
        let l11 = 2.0 * per_dir(1);
        let l12 = per_dir(1) + per_dir(2);
        assert!((pairs[0].value - l11).abs() < 1e-7, "{}", pairs[0].value);
        assert!((pairs[1].value - l12).abs() < 1e-7, "{}", pairs[1].value);
    }
}
