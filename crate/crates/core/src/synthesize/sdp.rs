use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Symmetric matrix affine in the decision vector:
/// `M(x) = constant + sum_j x[j] * coefficients[j]`.
pub(crate) struct AffineLmi {
    pub constant: Mat,
    pub coefficients: Vec<Mat>,
}

pub(crate) struct SdpOutcome {
    pub x: Vec<f64>,
    pub status: SolverStatus,
}

impl SdpOutcome {
    pub fn solved(&self) -> bool {
        matches!(self.status, SolverStatus::Solved | SolverStatus::AlmostSolved)
    }

    pub fn infeasible(&self) -> bool {
        matches!(
            self.status,
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible
        )
    }
}

pub(crate) fn status_name(status: SolverStatus) -> String {
    match status {
        SolverStatus::Solved => "solved".into(),
        SolverStatus::AlmostSolved => "almost_solved".into(),
        SolverStatus::PrimalInfeasible => "infeasible".into(),
        SolverStatus::AlmostPrimalInfeasible => "almost_infeasible".into(),
        SolverStatus::DualInfeasible => "unbounded".into(),
        SolverStatus::AlmostDualInfeasible => "almost_unbounded".into(),
        other => format!("{other:?}").to_lowercase(),
    }
}

/// Scaled upper-triangle vectorization in the order the PSD triangle cone
/// expects: column-major, off-diagonal entries multiplied by sqrt(2).
fn svec(m: &Mat) -> Vec<f64> {
    let n = m.nrows();
    let mut out = Vec::with_capacity(n * (n + 1) / 2);
    for j in 0..n {
        for i in 0..=j {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            out.push(if i == j { v } else { v * std::f64::consts::SQRT_2 });
        }
    }
    out
}

/// Linear inequality `coefficients . x <= bound`.
pub(crate) struct LinearBound {
    pub coefficients: Vec<f64>,
    pub bound: f64,
}

/// Minimizes `objective . x` subject to `M_k(x) >= 0` for every LMI and the
/// given linear bounds.
pub(crate) fn solve(
    objective: &[f64],
    lmis: &[AffineLmi],
    bounds: &[LinearBound],
) -> Result<SdpOutcome> {
    let nvars = objective.len();
    let mut b = Vec::new();
    let mut cones = Vec::with_capacity(lmis.len() + 1);
    // Column-wise triplets for A, where A x + s = b.
    let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nvars];
    if !bounds.is_empty() {
        for bound in bounds {
            if bound.coefficients.len() != nvars {
                return Err(Error::Structural("linear bound has the wrong length".into()));
            }
            let row = b.len();
            for (j, &c) in bound.coefficients.iter().enumerate() {
                if c != 0.0 {
                    columns[j].push((row, c));
                }
            }
            b.push(bound.bound);
        }
        cones.push(SupportedConeT::NonnegativeConeT(bounds.len()));
    }
    for lmi in lmis {
        if lmi.coefficients.len() != nvars {
            return Err(Error::Structural(format!(
                "LMI has {} coefficient matrices for {nvars} variables",
                lmi.coefficients.len()
            )));
        }
        let offset = b.len();
        b.extend(svec(&lmi.constant));
        for (j, coeff) in lmi.coefficients.iter().enumerate() {
            for (r, v) in svec(coeff).into_iter().enumerate() {
                if v != 0.0 {
                    columns[j].push((offset + r, -v));
                }
            }
        }
        cones.push(SupportedConeT::PSDTriangleConeT(lmi.constant.nrows()));
    }

    let mut colptr = Vec::with_capacity(nvars + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for col in &columns {
        for &(r, v) in col {
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    let a = CscMatrix::new(b.len(), nvars, colptr, rowval, nzval);
    let p = CscMatrix::zeros((nvars, nvars));

    let settings = DefaultSettings {
        verbose: false,
        max_iter: 500,
        ..DefaultSettings::default()
    };
    let mut solver = DefaultSolver::new(&p, objective, &a, &b, &cones, settings)
        .map_err(|e| Error::SolverFailure {
            status: format!("setup: {e}"),
        })?;
    solver.solve();
    Ok(SdpOutcome {
        x: solver.solution.x.clone(),
        status: solver.solution.status,
    })
}
