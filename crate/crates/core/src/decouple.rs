//! Output/unknown-input decoupling through the SVD of the feedthrough
//! matrix `H = U1 Sigma V1^T`.
//!
//! The unknown input splits into `d1 = V1^T d` (seen directly in the output)
//! and `d2 = V2^T d` (seen only through the dynamics). The output splits into
//! `z1 = U1^T y`, which carries `Sigma d1`, and `z2 = U2^T y`, which is free
//! of any direct feedthrough.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, SortedSvd, Vector};
use crate::model::LpvModel;

#[derive(Debug, Clone)]
pub struct DecoupledModel {
    /// Numerical rank of `H`.
    pub p_h: usize,
    /// Diagonal of `Sigma` (length `p_h`), strictly positive, nonincreasing.
    pub sigma: Vector,
    pub u1: Mat,
    pub u2: Mat,
    pub v1: Mat,
    pub v2: Mat,
    pub t1: Mat,
    pub t2: Mat,
    pub g1: Mat,
    pub g2: Mat,
    pub h1: Mat,
    pub c1: Mat,
    pub c2: Mat,
    pub d1: Vec<Mat>,
    pub d2: Vec<Mat>,
    pub m1: Mat,
    pub m2: Mat,
    pub phi: Mat,
    /// Numerical rank of `C2 G2`; bounded estimates need `p - p_h`.
    pub c2g2_rank: usize,
    /// Per-vertex `A_i - G1 M1 C1`.
    pub a_hat: Vec<Mat>,
    /// Per-vertex `Phi (A_i - G1 M1 C1)`.
    pub a_bar: Vec<Mat>,
    /// All singular values of `H`, nonincreasing.
    pub h_singular_values: Vec<f64>,
    pub rank_tol: f64,
    pub model: LpvModel,
}

/// Decouples the model, failing if `rank(C2 G2) != p - p_H`.
pub fn decouple(model: &LpvModel, rank_tol: f64) -> Result<DecoupledModel> {
    let dm = decouple_unchecked(model, rank_tol)?;
    if !dm.rank_condition_ok() {
        return Err(Error::BoundednessPrecondition {
            rank: dm.c2g2_rank,
            expected: dm.model.dims.p - dm.p_h,
        });
    }
    Ok(dm)
}

/// Computes every transform product without enforcing the rank condition,
/// so that diagnostics can still inspect a defective model.
pub fn decouple_unchecked(model: &LpvModel, rank_tol: f64) -> Result<DecoupledModel> {
    model.check_structure()?;
    let dims = model.dims;
    let (n, p, l) = (dims.n, dims.p, dims.l);

    let svd = SortedSvd::new(&model.h)?;
    let p_h = svd.rank(rank_tol);
    let h_singular_values = svd.singular_values.iter().copied().collect();

    let u1 = svd.u.columns(0, p_h).into_owned();
    let v1 = svd.v.columns(0, p_h).into_owned();
    let sigma = svd.singular_values.rows(0, p_h).into_owned();
    let u2 = linalg::orthogonal_complement(&u1, l);
    let v2 = linalg::orthogonal_complement(&v1, p);

    let t1 = u1.transpose();
    let t2 = u2.transpose();
    let g1 = &model.g * &v1;
    let g2 = &model.g * &v2;
    let h1 = &model.h * &v1;
    let c1 = &t1 * &model.c;
    let c2 = &t2 * &model.c;
    let d1 = model.d.iter().map(|d| &t1 * d).collect();
    let d2 = model.d.iter().map(|d| &t2 * d).collect();
    let m1 = Mat::from_diagonal(&sigma.map(|s| 1.0 / s));

    let c2g2 = &c2 * &g2;
    let c2g2_rank = linalg::rank(&c2g2, rank_tol);
    let m2 = linalg::pinv(&c2g2, rank_tol)?;
    let phi = Mat::identity(n, n) - &g2 * &m2 * &c2;

    let feedthrough = &g1 * &m1 * &c1;
    let a_hat: Vec<Mat> = model.a.iter().map(|a| a - &feedthrough).collect();
    let a_bar = a_hat.iter().map(|a| &phi * a).collect();

    Ok(DecoupledModel {
        p_h,
        sigma,
        u1,
        u2,
        v1,
        v2,
        t1,
        t2,
        g1,
        g2,
        h1,
        c1,
        c2,
        d1,
        d2,
        m1,
        m2,
        phi,
        c2g2_rank,
        a_hat,
        a_bar,
        h_singular_values,
        rank_tol,
        model: model.clone(),
    })
}

impl DecoupledModel {
    pub fn rank_condition_ok(&self) -> bool {
        self.c2g2_rank == self.model.dims.p - self.p_h
    }

    /// Dimension of the feedthrough-free output channel `z2`.
    pub fn q(&self) -> usize {
        self.model.dims.l - self.p_h
    }

    pub fn n(&self) -> usize {
        self.model.dims.n
    }

    pub fn vertices(&self) -> usize {
        self.model.dims.vertices
    }

    pub fn sigma_matrix(&self) -> Mat {
        Mat::from_diagonal(&self.sigma)
    }

    /// `(z1, z2) = (U1^T y, U2^T y)`.
    pub fn split_output(&self, y: &Vector) -> Result<(Vector, Vector)> {
        if y.len() != self.model.dims.l {
            return Err(Error::Structural(format!(
                "measurement has length {}, expected l = {}",
                y.len(),
                self.model.dims.l
            )));
        }
        Ok((&self.t1 * y, &self.t2 * y))
    }

    /// `(d1, d2) = (V1^T d, V2^T d)`.
    pub fn split_unknown_input(&self, d: &Vector) -> Result<(Vector, Vector)> {
        if d.len() != self.model.dims.p {
            return Err(Error::Structural(format!(
                "unknown input has length {}, expected p = {}",
                d.len(),
                self.model.dims.p
            )));
        }
        Ok((self.v1.transpose() * d, self.v2.transpose() * d))
    }

    pub fn recombine_unknown_input(&self, d1: &Vector, d2: &Vector) -> Result<Vector> {
        if d1.len() != self.p_h || d2.len() != self.model.dims.p - self.p_h {
            return Err(Error::Structural(format!(
                "unknown-input components have lengths ({}, {}), expected ({}, {})",
                d1.len(),
                d2.len(),
                self.p_h,
                self.model.dims.p - self.p_h
            )));
        }
        Ok(&self.v1 * d1 + &self.v2 * d2)
    }

    /// How far the rank decision of `H` sits from its threshold: the ratio
    /// of the smallest retained singular value to the threshold, and of the
    /// largest discarded one to the threshold. Values near 1 mean the rank
    /// is numerically marginal.
    pub fn rank_margin(&self) -> (Option<f64>, Option<f64>) {
        let max = self.h_singular_values.first().copied().unwrap_or(0.0);
        let threshold = self.rank_tol * max;
        if threshold == 0.0 {
            return (None, None);
        }
        let kept = self
            .h_singular_values
            .get(self.p_h.wrapping_sub(1))
            .filter(|_| self.p_h > 0)
            .map(|s| s / threshold);
        let dropped = self.h_singular_values.get(self.p_h).map(|s| s / threshold);
        (kept, dropped)
    }
}
