//! Structural pre-flight checks.
//!
//! Strong detectability of every vertex system `(A_i, G, C, H)` is necessary
//! for any observer of this class to exist. It is decided through the
//! equivalent decomposition test: `rank(C2 G2) = p - p_H` together with
//! detectability of the reduced pair `(Abar_i, C2)`. The Rosenbrock pencil
//! `[zI - A, -G; C, H]` is evaluated at the finitely many candidate zeros as
//! an independent cross-check.
//!
//! Per-vertex detectability of `(Abar_i, C2)` is only a heuristic for the
//! uniform detectability of the time-varying pair; it is not a certificate.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::decouple::DecoupledModel;
use crate::error::Result;
use crate::linalg::{self, Mat};
use crate::model::LpvModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectOptions {
    /// Eigenvalues with `|mu| >= 1 - stability_tol` count as not stable.
    pub stability_tol: f64,
    /// Relative rank tolerance for PBH and Rosenbrock tests.
    pub rank_tol: f64,
}

impl Default for DetectOptions {
    fn default() -> Self {
        Self {
            stability_tol: 1e-9,
            rank_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Detectable,
    NotDetectable,
    /// PBH test and Rosenbrock cross-check disagree.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
    pub magnitude: f64,
}

impl From<Complex<f64>> for ComplexValue {
    fn from(z: Complex<f64>) -> Self {
        Self {
            re: z.re,
            im: z.im,
            magnitude: z.norm(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexDetectability {
    pub verdict: Verdict,
    pub pair_detectable: bool,
    /// Eigenvalues of `Abar_i` unobservable through `C2` (invariant zeros).
    pub invariant_zeros: Vec<ComplexValue>,
    /// Eigenvalues inside the stability-boundary band.
    pub boundary_eigenvalues: Vec<ComplexValue>,
    /// Whether the Rosenbrock pencil agreed with PBH at every candidate.
    pub rosenbrock_consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectabilityReport {
    pub per_vertex_strong_detectable: Vec<bool>,
    pub invariant_zeros: Vec<Vec<ComplexValue>>,
    pub rank_condition_ok: bool,
    pub per_vertex_pair_detectable: Vec<bool>,
    pub overall_necessary_ok: bool,
    pub vertices: Vec<VertexDetectability>,
    pub warnings: Vec<String>,
}

struct PbhOutcome {
    detectable: bool,
    unobservable: Vec<Complex<f64>>,
    unobservable_unstable: Vec<Complex<f64>>,
    candidates: Vec<Complex<f64>>,
    boundary: Vec<Complex<f64>>,
}

fn pbh(a: &Mat, c: &Mat, opts: DetectOptions) -> Result<PbhOutcome> {
    let n = a.nrows();
    let eig = linalg::eigenvalues(a)?;
    let mut out = PbhOutcome {
        detectable: true,
        unobservable: Vec::new(),
        unobservable_unstable: Vec::new(),
        candidates: Vec::new(),
        boundary: Vec::new(),
    };
    for mu in eig {
        let mag = mu.norm();
        let unstable = mag >= 1.0 - opts.stability_tol;
        if (mag - 1.0).abs() < opts.stability_tol {
            out.boundary.push(mu);
        }
        let pencil = DMatrix::<Complex<f64>>::from_fn(n + c.nrows(), n, |i, j| {
            if i < n {
                let diag = if i == j { mu } else { Complex::new(0.0, 0.0) };
                diag - Complex::new(a[(i, j)], 0.0)
            } else {
                Complex::new(c[(i - n, j)], 0.0)
            }
        });
        let observable = linalg::complex_rank(&pencil, opts.rank_tol) == n;
        if !observable {
            out.unobservable.push(mu);
        }
        if unstable {
            out.candidates.push(mu);
            if !observable {
                out.detectable = false;
                out.unobservable_unstable.push(mu);
            }
        }
    }
    Ok(out)
}

/// PBH detectability test of the pair `(A, C)`: every eigenvalue with
/// `|mu| >= 1 - tol` must be observable.
pub fn pair_detectability(a: &Mat, c: &Mat, tol: f64) -> Result<bool> {
    let opts = DetectOptions {
        stability_tol: tol,
        ..DetectOptions::default()
    };
    Ok(pbh(a, c, opts)?.detectable)
}

fn rosenbrock_full_rank(model: &LpvModel, vertex: usize, z: Complex<f64>, rank_tol: f64) -> bool {
    let dims = model.dims;
    let (n, p, l) = (dims.n, dims.p, dims.l);
    let a = &model.a[vertex];
    let zero = Complex::new(0.0, 0.0);
    let r = DMatrix::<Complex<f64>>::from_fn(n + l, n + p, |i, j| match (i < n, j < n) {
        (true, true) => (if i == j { z } else { zero }) - Complex::new(a[(i, j)], 0.0),
        (true, false) => Complex::new(-model.g[(i, j - n)], 0.0),
        (false, true) => Complex::new(model.c[(i - n, j)], 0.0),
        (false, false) => Complex::new(model.h[(i - n, j - n)], 0.0),
    });
    linalg::complex_rank(&r, rank_tol) == n + p
}

/// Strong detectability of vertex `vertex`, decided by the rank condition
/// plus PBH detectability of `(Abar_i, C2)`, cross-checked against the
/// Rosenbrock pencil at every eigenvalue of `Abar_i` outside the open unit
/// disc.
pub fn strong_detectability(
    dm: &DecoupledModel,
    vertex: usize,
    opts: DetectOptions,
) -> Result<VertexDetectability> {
    let outcome = pbh(&dm.a_bar[vertex], &dm.c2, opts)?;

    let mut consistent = true;
    for z in &outcome.candidates {
        let pbh_deficient = outcome.unobservable_unstable.contains(z);
        let rosen_deficient = !rosenbrock_full_rank(&dm.model, vertex, *z, opts.rank_tol);
        if pbh_deficient != rosen_deficient {
            consistent = false;
        }
    }

    let verdict = if !consistent {
        Verdict::Inconclusive
    } else if outcome.detectable && dm.rank_condition_ok() {
        Verdict::Detectable
    } else {
        Verdict::NotDetectable
    };

    Ok(VertexDetectability {
        verdict,
        pair_detectable: outcome.detectable,
        invariant_zeros: outcome.unobservable.into_iter().map(Into::into).collect(),
        boundary_eigenvalues: outcome.boundary.into_iter().map(Into::into).collect(),
        rosenbrock_consistent: consistent,
    })
}

/// Aggregates the per-vertex checks. `overall_necessary_ok` is false when
/// no observer of this class can exist.
pub fn existence_report(dm: &DecoupledModel, opts: DetectOptions) -> Result<DetectabilityReport> {
    let mut vertices = Vec::with_capacity(dm.vertices());
    let mut warnings = Vec::new();
    for i in 0..dm.vertices() {
        let v = strong_detectability(dm, i, opts)?;
        if !v.boundary_eigenvalues.is_empty() {
            warnings.push(format!(
                "vertex {}: {} eigenvalue(s) of the reduced dynamics on the stability boundary",
                i + 1,
                v.boundary_eigenvalues.len()
            ));
        }
        if v.verdict == Verdict::Inconclusive {
            warnings.push(format!(
                "vertex {}: PBH test and Rosenbrock cross-check disagree",
                i + 1
            ));
        }
        vertices.push(v);
    }
    let rank_condition_ok = dm.rank_condition_ok();
    if !rank_condition_ok {
        warnings.push(format!(
            "rank(C2 G2) = {} but p - p_H = {}",
            dm.c2g2_rank,
            dm.model.dims.p - dm.p_h
        ));
    }
    let (kept, dropped) = dm.rank_margin();
    if kept.is_some_and(|r| r < 1e3) || dropped.is_some_and(|r| r > 1e-3) {
        warnings.push(format!(
            "rank of H is numerically marginal (retained/threshold = {kept:?}, discarded/threshold = {dropped:?})"
        ));
    }
    let per_vertex_strong_detectable: Vec<bool> = vertices
        .iter()
        .map(|v| v.verdict == Verdict::Detectable)
        .collect();
    let overall_necessary_ok = rank_condition_ok && per_vertex_strong_detectable.iter().all(|&b| b);
    Ok(DetectabilityReport {
        invariant_zeros: vertices.iter().map(|v| v.invariant_zeros.clone()).collect(),
        per_vertex_pair_detectable: vertices.iter().map(|v| v.pair_detectable).collect(),
        per_vertex_strong_detectable,
        rank_condition_ok,
        overall_necessary_ok,
        vertices,
        warnings,
    })
}

impl DetectabilityReport {
    /// One-line human summary, e.g. `strongly detectable: vertex 1 ✓, vertex 2 ✗`.
    pub fn summary(&self) -> String {
        let marks: Vec<String> = self
            .per_vertex_strong_detectable
            .iter()
            .enumerate()
            .map(|(i, ok)| format!("vertex {} {}", i + 1, if *ok { "✓" } else { "✗" }))
            .collect();
        format!("strongly detectable: {}", marks.join(", "))
    }
}
