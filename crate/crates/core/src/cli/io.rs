//! Curve, solution, and summary file formats. All floating-point values are
//! written with 17 significant digits so a read-back reproduces the doubles
//! bit for bit; files are written atomically (temp file + rename).

use super::CliError;
use crate::continuation::{ContinuationCurve, CurveSample, Provenance, TraceOutcome};
use crate::mesh::Mesh;
use crate::solver::AugmentedState;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::Path;

pub const CURVE_HEADER: &str = "xi1,mu,b,sup_norm_U,newton_iters,cond_est";

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `contents` through a temp file in the same directory, then renames.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), CliError> {
    let tmp = path.with_extension(match path.extension() {
        Some(e) => format!("{}.tmp", e.to_string_lossy()),
        None => "tmp".to_string(),
    });
    std::fs::write(&tmp, contents)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", tmp.display())))?;
    std::fs::rename(&tmp, path)
        .map_err(|e| CliError::Config(format!("cannot move {} into place: {e}", path.display())))
}

/// Serializes a curve to the CSV schema
/// `xi1,mu,b,sup_norm_U,newton_iters,cond_est`.
pub fn curve_to_csv(curve: &ContinuationCurve) -> String {
    let mut out = String::with_capacity(64 * (curve.samples.len() + 1));
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for s in &curve.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            fmt17(s.xi1),
            fmt17(s.mu),
            fmt17(s.b),
            fmt17(s.sup_norm_u),
            s.newton_iterations,
            fmt17(s.condition_estimate),
        );
    }
    out
}

/// Parses a curve CSV produced by [`curve_to_csv`].
pub fn curve_from_csv(text: &str, provenance: Provenance) -> Result<ContinuationCurve, CliError> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == CURVE_HEADER => {}
        other => {
            return Err(CliError::Config(format!(
                "curve file header mismatch: expected `{CURVE_HEADER}`, got {other:?}"
            )))
        }
    }
    let mut samples = Vec::new();
    for (ln, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 6 {
            return Err(CliError::Config(format!(
                "curve file line {}: expected 6 columns, got {}",
                ln + 2,
                cols.len()
            )));
        }
        let num = |i: usize| -> Result<f64, CliError> {
            cols[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("curve file line {}: {e}", ln + 2)))
        };
        samples.push(CurveSample {
            xi1: num(0)?,
            mu: num(1)?,
            b: num(2)?,
            sup_norm_u: num(3)?,
            newton_iterations: cols[4].trim().parse().map_err(|e| {
                CliError::Config(format!("curve file line {}: {e}", ln + 2))
            })?,
            condition_estimate: num(5)?,
        });
    }
    Ok(ContinuationCurve {
        samples,
        snapshots: Vec::new(),
        provenance,
        warnings: Vec::new(),
        stalls: Vec::new(),
    })
}

/// Sidecar metadata persisted next to `curve.csv`.
#[derive(Debug, Serialize, Deserialize)]
pub struct CurveMeta {
    /// Hex content hash of the problem (mesh, g, forcing, solver controls).
    pub spec_hash: String,
    pub newton_tolerance: f64,
    pub k_step: f64,
    pub xi_step: f64,
}

impl CurveMeta {
    pub fn from_provenance(p: &Provenance) -> CurveMeta {
        CurveMeta {
            spec_hash: format!("{:016x}", p.spec_hash),
            newton_tolerance: p.newton_tolerance,
            k_step: p.k_step,
            xi_step: p.xi_step,
        }
    }

    pub fn matches_hash(&self, hash: u64) -> bool {
        self.spec_hash == format!("{hash:016x}")
    }
}

/// Writes one solution field as CSV with columns `x[,y],u`; every node
/// appears, boundary nodes carrying the value `b`.
pub fn solution_to_csv(mesh: &Mesh, state: &AugmentedState) -> String {
    let two_d = mesh.is_two_dimensional();
    let mut out = String::new();
    out.push_str(if two_d { "x,y,u\n" } else { "x,u\n" });
    for (x, y, interior) in mesh.all_nodes() {
        let u = match interior {
            Some(i) => state.u_at(i),
            None => state.b(),
        };
        if two_d {
            let _ = writeln!(out, "{},{},{}", fmt17(x), fmt17(y), fmt17(u));
        } else {
            let _ = writeln!(out, "{},{}", fmt17(x), fmt17(u));
        }
    }
    out
}

/// gnuplot script plotting `μ(ξ₁)` from the curve CSV.
pub fn plot_script(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set xlabel 'xi1'\n\
         set ylabel 'mu'\n\
         set grid\n\
         plot '{csv_name}' skip 1 using 1:2 with lines title 'mu(xi1)'\n"
    )
}

/// Machine-readable record of a trace run.
#[derive(Debug, Serialize)]
pub struct TraceSummaryRecord {
    pub mu0: f64,
    pub crossing_count: usize,
    pub roots_xi1: Vec<f64>,
    pub roots_b: Vec<f64>,
    pub mu_minus: f64,
    pub mu_minus_at: f64,
    pub mu_plus: f64,
    pub mu_plus_at: f64,
    pub tail_lower: f64,
    pub tail_upper: f64,
    pub window_verdict: String,
    pub grazings: Vec<(f64, f64)>,
    pub failures: Vec<String>,
}

impl TraceSummaryRecord {
    pub fn build(
        mu0: f64,
        outcome: &TraceOutcome,
        summary: &crate::continuation::CurveSummary,
        verdict: &crate::analysis::MuVerdict,
    ) -> TraceSummaryRecord {
        TraceSummaryRecord {
            mu0,
            crossing_count: outcome.crossings.len(),
            roots_xi1: outcome.crossings.iter().map(|c| c.state.xi1).collect(),
            roots_b: outcome.crossings.iter().map(|c| c.state.b()).collect(),
            mu_minus: summary.mu_minus,
            mu_minus_at: summary.mu_minus_at,
            mu_plus: summary.mu_plus,
            mu_plus_at: summary.mu_plus_at,
            tail_lower: summary.tail_lower,
            tail_upper: summary.tail_upper,
            window_verdict: format!("{verdict:?}"),
            grazings: outcome.grazings.iter().map(|g| (g.xi1, g.mu)).collect(),
            failures: outcome.failures.iter().map(|f| f.reason.clone()).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::continuation::Provenance;

    fn prov() -> Provenance {
        Provenance {
            spec_hash: 0xdead_beef,
            newton_tolerance: 1e-10,
            k_step: 0.1,
            xi_step: 0.1,
        }
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let curve = ContinuationCurve {
            samples: vec![
                CurveSample {
                    xi1: -1.0 / 3.0,
                    mu: 0.1 + 0.2, // 0.30000000000000004
                    b: f64::MIN_POSITIVE,
                    sup_norm_u: 1.2345678901234567e-13,
                    newton_iterations: 7,
                    condition_estimate: 6.02e23,
                },
                CurveSample {
                    xi1: 2.0_f64.sqrt(),
                    mu: -1e300,
                    b: 0.0,
                    sup_norm_u: 3.0,
                    newton_iterations: 0,
                    condition_estimate: 1.0,
                },
            ],
            snapshots: Vec::new(),
            provenance: prov(),
            warnings: Vec::new(),
            stalls: Vec::new(),
        };
        let text = curve_to_csv(&curve);
        let back = curve_from_csv(&text, prov()).unwrap();
        assert_eq!(back.samples.len(), curve.samples.len());
        for (a, b) in curve.samples.iter().zip(back.samples.iter()) {
            assert_eq!(a.xi1.to_bits(), b.xi1.to_bits());
            assert_eq!(a.mu.to_bits(), b.mu.to_bits());
            assert_eq!(a.b.to_bits(), b.b.to_bits());
            assert_eq!(a.sup_norm_u.to_bits(), b.sup_norm_u.to_bits());
            assert_eq!(a.newton_iterations, b.newton_iterations);
            assert_eq!(a.condition_estimate.to_bits(), b.condition_estimate.to_bits());
        }
    }

    #[test]
    fn header_mismatch_rejected() {
        assert!(curve_from_csv("xi,mu\n", prov()).is_err());
    }

    #[test]
    fn meta_hash_round_trip() {
        let meta = CurveMeta::from_provenance(&prov());
        assert!(meta.matches_hash(0xdead_beef));
        assert!(!meta.matches_hash(0xdead_beee));
    }
}
