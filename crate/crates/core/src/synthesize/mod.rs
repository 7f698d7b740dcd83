//! Observer gain synthesis by semidefinite programming.
//!
//! The decision vector is `(eta, svec(S), vec(Y))`; every vertex contributes
//! one PSD block. The optimal design minimizes eta. The convergent design
//! fixes eta, solves for any feasible `(S, Y)`, and line-searches eta for a
//! gain whose error transition norm stays below one.

mod constants;
mod lmi;
mod sdp;

pub use constants::{error_constants, ErrorConstants};
pub use lmi::{block_size, lmi_block, verify_lmi};

use serde::{Deserialize, Serialize};

use crate::decouple::DecoupledModel;
use crate::detect::{existence_report, DetectOptions};
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use sdp::AffineLmi;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthesisMode {
    Optimal,
    Convergent,
}

#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    /// Relative strictness margin; the blocks are required to satisfy
    /// `block >= margin * tr(S) * I`.
    pub margin: f64,
    pub cond_limit: f64,
    /// Accept certificates with `cond(S) > cond_limit`, attaching a warning.
    pub allow_ill_conditioned: bool,
    /// Skip the detectability precondition.
    pub force: bool,
    /// Upper bound on eta in the minimum-eta problem. Without it an
    /// infeasible model can look asymptotically feasible as eta grows.
    pub eta_max: f64,
    pub detect: DetectOptions,
    pub eta_lo: f64,
    pub eta_hi: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    /// Number of tenfold upward expansions of `eta_hi` tried before giving up.
    pub max_expansions: usize,
}

impl Default for SynthesisOptions {
    fn default() -> Self {
        Self {
            margin: 1e-8,
            cond_limit: 1e12,
            allow_ill_conditioned: false,
            force: false,
            eta_max: 1e6,
            detect: DetectOptions::default(),
            eta_lo: 1e-4,
            eta_hi: 1e4,
            rel_tol: 1e-3,
            max_iter: 60,
            max_expansions: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisCertificate {
    pub mode: SynthesisMode,
    pub eta: f64,
    pub s: Mat,
    pub y: Mat,
    pub l_tilde: Mat,
    pub min_block_eig: f64,
    /// Absolute margin the blocks were verified against.
    pub margin: f64,
    pub solver_status: String,
    pub cond_s: f64,
    pub warnings: Vec<String>,
}

impl SynthesisCertificate {
    /// Gain acting on the raw output, `L = L_tilde U2^T`.
    pub fn output_gain(&self, dm: &DecoupledModel) -> Mat {
        &self.l_tilde * dm.u2.transpose()
    }

    pub fn verify(&self, dm: &DecoupledModel) -> Result<bool> {
        Ok(verify_lmi(dm, &self.s, &self.y, self.eta, self.margin)?.0)
    }

    /// Rebuilds a certificate from stored `(S, Y, eta)`, recomputing the
    /// gain and the block eigenvalues.
    pub fn from_parts(
        dm: &DecoupledModel,
        mode: SynthesisMode,
        eta: f64,
        s: Mat,
        y: Mat,
        margin: f64,
        solver_status: String,
    ) -> Result<Self> {
        let l_tilde = gain_from(&s, &y)?;
        let (_, min_block_eig) = verify_lmi(dm, &s, &y, eta, margin)?;
        let cond_s = linalg::condition_number(&s);
        Ok(Self {
            mode,
            eta,
            s,
            y,
            l_tilde,
            min_block_eig,
            margin,
            solver_status,
            cond_s,
            warnings: Vec::new(),
        })
    }
}

/// `S^{-1} Y`, requiring `S` positive definite.
pub fn gain_from(s: &Mat, y: &Mat) -> Result<Mat> {
    if s.nrows() != s.ncols() || s.nrows() != y.nrows() {
        return Err(Error::Structural(format!(
            "S is {}x{} and Y is {}x{}",
            s.nrows(),
            s.ncols(),
            y.nrows(),
            y.ncols()
        )));
    }
    let chol = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Numerical("S is not positive definite".into()))?;
    Ok(chol.solve(y))
}

fn check_preconditions(dm: &DecoupledModel, opts: &SynthesisOptions) -> Result<()> {
    if !dm.rank_condition_ok() {
        return Err(Error::BoundednessPrecondition {
            rank: dm.c2g2_rank,
            expected: dm.model.dims.p - dm.p_h,
        });
    }
    if opts.force {
        return Ok(());
    }
    let report = existence_report(dm, opts.detect)?;
    if !report.overall_necessary_ok {
        return Err(Error::NecessaryConditionFailed(report.summary()));
    }
    Ok(())
}

/// Variable layout: optional eta, then the upper triangle of S column by
/// column, then Y column by column.
struct Layout {
    n: usize,
    q: usize,
    free_eta: bool,
}

impl Layout {
    fn s_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n * (self.n + 1) / 2);
        for j in 0..self.n {
            for i in 0..=j {
                out.push((i, j));
            }
        }
        out
    }

    fn s_offset(&self) -> usize {
        usize::from(self.free_eta)
    }

    fn y_offset(&self) -> usize {
        self.s_offset() + self.n * (self.n + 1) / 2
    }

    fn len(&self) -> usize {
        self.y_offset() + self.n * self.q
    }

    /// Decodes `(eta, S, Y)` from a decision vector.
    fn decode(&self, x: &[f64], fixed_eta: f64) -> (f64, Mat, Mat) {
        let eta = if self.free_eta { x[0] } else { fixed_eta };
        let mut s = Mat::zeros(self.n, self.n);
        for (k, (i, j)) in self.s_pairs().into_iter().enumerate() {
            let v = x[self.s_offset() + k];
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
        let y = Mat::from_column_slice(self.n, self.q, &x[self.y_offset()..self.len()]);
        (eta, s, y)
    }
}

fn build_lmis(
    dm: &DecoupledModel,
    layout: &Layout,
    fixed_eta: f64,
    rel_margin: f64,
) -> Result<Vec<AffineLmi>> {
    let (n, q) = (layout.n, layout.q);
    let size = block_size(n, q);
    let zero_s = Mat::zeros(n, n);
    let zero_y = Mat::zeros(n, q);
    let base_eta = if layout.free_eta { 0.0 } else { fixed_eta };
    let mut lmis = Vec::with_capacity(dm.vertices());
    for vertex in 0..dm.vertices() {
        let constant = lmi_block(dm, vertex, &zero_s, &zero_y, base_eta)?;
        let mut coefficients = Vec::with_capacity(layout.len());
        if layout.free_eta {
            coefficients.push(lmi_block(dm, vertex, &zero_s, &zero_y, 1.0)? - &constant);
        }
        for (i, j) in layout.s_pairs() {
            let mut e = Mat::zeros(n, n);
            e[(i, j)] = 1.0;
            e[(j, i)] = 1.0;
            let mut coeff = lmi_block(dm, vertex, &e, &zero_y, base_eta)? - &constant;
            if i == j {
                coeff -= Mat::identity(size, size) * rel_margin;
            }
            coefficients.push(coeff);
        }
        for c in 0..q {
            for r in 0..n {
                let mut e = Mat::zeros(n, q);
                e[(r, c)] = 1.0;
                coefficients.push(lmi_block(dm, vertex, &zero_s, &e, base_eta)? - &constant);
            }
        }
        lmis.push(AffineLmi {
            constant,
            coefficients,
        });
    }
    Ok(lmis)
}

fn solve_once(
    dm: &DecoupledModel,
    opts: &SynthesisOptions,
    mode: SynthesisMode,
    fixed_eta: Option<f64>,
) -> Result<SynthesisCertificate> {
    let layout = Layout {
        n: dm.n(),
        q: dm.q(),
        free_eta: fixed_eta.is_none(),
    };
    let eta_value = fixed_eta.unwrap_or(0.0);
    // The cone constraint uses twice the requested margin so that the
    // verified eigenvalue bound survives solver tolerances.
    let lmis = build_lmis(dm, &layout, eta_value, 2.0 * opts.margin)?;
    let mut objective = vec![0.0; layout.len()];
    if layout.free_eta {
        objective[0] = 1.0;
    }
    let mut bounds = Vec::new();
    if layout.free_eta {
        let mut coefficients = vec![0.0; layout.len()];
        coefficients[0] = 1.0;
        bounds.push(sdp::LinearBound {
            coefficients,
            bound: opts.eta_max,
        });
    }
    let outcome = sdp::solve(&objective, &lmis, &bounds)?;
    let status = sdp::status_name(outcome.status);
    if outcome.infeasible() {
        return Err(Error::Infeasible { status });
    }
    if !outcome.solved() {
        return Err(Error::SolverFailure { status });
    }
    let (eta, s, y) = layout.decode(&outcome.x, eta_value);
    let margin = opts.margin * s.trace();
    let mut cert = SynthesisCertificate::from_parts(dm, mode, eta, s, y, margin, status)?;
    if !(cert.min_block_eig >= cert.margin) {
        return Err(Error::SolverFailure {
            status: format!(
                "{}: returned point fails verification (min block eigenvalue {:e} < margin {:e})",
                cert.solver_status, cert.min_block_eig, cert.margin
            ),
        });
    }
    if !(cert.cond_s <= opts.cond_limit) {
        if !opts.allow_ill_conditioned {
            return Err(Error::IllConditioned {
                cond: cert.cond_s,
                limit: opts.cond_limit,
            });
        }
        cert.warnings.push(format!(
            "cond(S) = {:e} exceeds {:e}",
            cert.cond_s, opts.cond_limit
        ));
    }
    Ok(cert)
}

/// Minimum-eta design: one SDP over `(eta, S, Y)`.
pub fn synthesize_hinf(dm: &DecoupledModel, opts: &SynthesisOptions) -> Result<SynthesisCertificate> {
    check_preconditions(dm, opts)?;
    solve_once(dm, opts, SynthesisMode::Optimal, None)
}

/// Feasibility problem at a fixed eta.
pub fn synthesize_at_eta(
    dm: &DecoupledModel,
    eta: f64,
    opts: &SynthesisOptions,
) -> Result<SynthesisCertificate> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::InvalidInput(format!("eta must be positive, got {eta}")));
    }
    solve_once(dm, opts, SynthesisMode::Convergent, Some(eta))
}

enum Trial {
    Accepted(SynthesisCertificate),
    Rejected(String),
}

fn trial(dm: &DecoupledModel, eta: f64, opts: &SynthesisOptions) -> Result<Trial> {
    match synthesize_at_eta(dm, eta, opts) {
        Ok(cert) => {
            let theta = error_constants(dm, &cert.l_tilde)?.theta;
            if theta < 1.0 {
                Ok(Trial::Accepted(cert))
            } else {
                Ok(Trial::Rejected(format!("eta = {eta:e}: feasible but theta = {theta:.6}")))
            }
        }
        Err(Error::Infeasible { status }) => {
            Ok(Trial::Rejected(format!("eta = {eta:e}: infeasible ({status})")))
        }
        Err(Error::SolverFailure { status }) => {
            Ok(Trial::Rejected(format!("eta = {eta:e}: solver failure ({status})")))
        }
        Err(e) => Err(e),
    }
}

/// Smallest eta (within the bisection tolerance) whose feasible gain makes
/// every vertex error transition a strict contraction.
pub fn synthesize_convergent(
    dm: &DecoupledModel,
    opts: &SynthesisOptions,
) -> Result<SynthesisCertificate> {
    check_preconditions(dm, opts)?;
    let (mut lo, mut hi) = (opts.eta_lo, opts.eta_hi);
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "invalid eta bracket [{lo}, {hi}]"
        )));
    }

    let mut last_reason;
    let mut best = match trial(dm, hi, opts)? {
        Trial::Accepted(cert) => cert,
        Trial::Rejected(reason) => {
            last_reason = reason;
            let mut found = None;
            if lo < hi {
                for _ in 0..opts.max_expansions {
                    lo = hi;
                    hi *= 10.0;
                    match trial(dm, hi, opts)? {
                        Trial::Accepted(cert) => {
                            found = Some(cert);
                            break;
                        }
                        Trial::Rejected(reason) => last_reason = reason,
                    }
                }
            }
            found.ok_or_else(|| {
                Error::ConvergenceNotCertifiable(format!(
                    "no eta up to {hi:e} gives a feasible gain with theta < 1 (last trial: {last_reason})"
                ))
            })?
        }
    };
    if lo == hi {
        return Ok(best);
    }
    if let Trial::Accepted(cert) = trial(dm, lo, opts)? {
        return Ok(cert);
    }
    for _ in 0..opts.max_iter {
        if hi / lo - 1.0 <= opts.rel_tol {
            break;
        }
        let mid = (lo * hi).sqrt();
        match trial(dm, mid, opts)? {
            Trial::Accepted(cert) => {
                hi = mid;
                best = cert;
            }
            Trial::Rejected(_) => lo = mid,
        }
    }
    Ok(best)
}

/// Smallest eta at which a fixed `(S, Y)` passes `verify_lmi` with the given
/// margin, by bisection over `[0, eta_max]`. `None` if it fails at `eta_max`.
pub fn min_feasible_eta(
    dm: &DecoupledModel,
    s: &Mat,
    y: &Mat,
    margin: f64,
    eta_max: f64,
    rel_tol: f64,
) -> Result<Option<f64>> {
    if !verify_lmi(dm, s, y, eta_max, margin)?.0 {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, eta_max);
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        if verify_lmi(dm, s, y, mid, margin)?.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}
