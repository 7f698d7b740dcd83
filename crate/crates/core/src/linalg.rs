//! Dense linear-algebra helpers shared by every stage of the pipeline.
//!
//! All routines are total on empty (zero-row or zero-column) matrices:
//! an empty matrix has rank 0, norm 0 and an empty pseudoinverse.

use nalgebra::{Complex, DMatrix, DVector, Schur, SymmetricEigen, SVD};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative tolerance for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Convergence tolerance for the implicit-shift SVD (nalgebra default).
const SVD_EPS: f64 = 5.0 * f64::EPSILON;

/// Thin SVD with singular values sorted nonincreasing and a fixed sign
/// convention: the first nonzero component of every left singular vector is
/// positive (the matching right singular vector is flipped with it).
#[derive(Debug, Clone)]
pub struct SortedSvd {
    pub u: Mat,
    pub singular_values: Vector,
    pub v: Mat,
}

impl SortedSvd {
    pub fn new(m: &Mat) -> Result<Self> {
        let (rows, cols) = m.shape();
        let r = rows.min(cols);
        if r == 0 {
            return Ok(Self {
                u: Mat::zeros(rows, 0),
                singular_values: Vector::zeros(0),
                v: Mat::zeros(cols, 0),
            });
        }
        let svd = SVD::try_new(m.clone(), true, true, SVD_EPS, 0)
            .ok_or_else(|| Error::Numerical("SVD failed to converge".into()))?;
        let u = svd.u.expect("requested U");
        let v_t = svd.v_t.expect("requested V^T");
        let sv = svd.singular_values;

        let mut order: Vec<usize> = (0..r).collect();
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));

        let mut u_sorted = Mat::zeros(rows, r);
        let mut v_sorted = Mat::zeros(cols, r);
        let mut s_sorted = Vector::zeros(r);
        for (dst, &src) in order.iter().enumerate() {
            let mut uc = u.column(src).into_owned();
            let mut vc = v_t.row(src).transpose();
            if leading_sign(uc.as_slice()) < 0.0 {
                uc = -uc;
                vc = -vc;
            }
            u_sorted.set_column(dst, &uc);
            v_sorted.set_column(dst, &vc);
            s_sorted[dst] = sv[src];
        }
        let back = &u_sorted * Mat::from_diagonal(&s_sorted) * v_sorted.transpose();
        if (back - m).amax() > 1e-10 * m.amax().max(f64::MIN_POSITIVE) {
            return Err(Error::Numerical("SVD does not reconstruct its input".into()));
        }
        Ok(Self {
            u: u_sorted,
            singular_values: s_sorted,
            v: v_sorted,
        })
    }

    /// Number of singular values above `rank_tol * sigma_max`.
    pub fn rank(&self, rank_tol: f64) -> usize {
        rank_from_values(self.singular_values.as_slice(), rank_tol)
    }
}

fn leading_sign(v: &[f64]) -> f64 {
    let scale = v.iter().fold(0.0_f64, |a, x| a.max(x.abs()));
    let cutoff = scale * 1e-12;
    v.iter()
        .find(|x| x.abs() > cutoff)
        .map(|x| x.signum())
        .unwrap_or(1.0)
}

pub(crate) fn rank_from_values(values: &[f64], rank_tol: f64) -> usize {
    let max = values.iter().fold(0.0_f64, |a, &s| a.max(s));
    if max == 0.0 {
        return 0;
    }
    values.iter().filter(|&&s| s > rank_tol * max).count()
}

pub fn singular_values(m: &Mat) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    let mut s: Vec<f64> = m
        .clone()
        .try_svd(false, false, SVD_EPS, 0)
        .ok_or_else(|| Error::Numerical("SVD failed to converge".into()))?
        .singular_values
        .iter()
        .copied()
        .collect();
    s.sort_by(|a, b| b.total_cmp(a));
    Ok(s)
}

/// Scale-invariant numerical rank.
pub fn rank(m: &Mat, rank_tol: f64) -> usize {
    singular_values(m)
        .map(|s| rank_from_values(&s, rank_tol))
        .unwrap_or(0)
}

/// Induced 2-norm (largest singular value); zero for empty matrices.
pub fn norm2(m: &Mat) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    if m.nrows() == 1 || m.ncols() == 1 {
        return m.norm();
    }
    singular_values(m)
        .ok()
        .and_then(|s| s.first().copied())
        .unwrap_or(f64::NAN)
}

/// Moore-Penrose pseudoinverse, truncating singular values at
/// `rank_tol * sigma_max`.
pub fn pinv(m: &Mat, rank_tol: f64) -> Result<Mat> {
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(Mat::zeros(cols, rows));
    }
    let svd = SortedSvd::new(m)?;
    let r = svd.rank(rank_tol);
    let mut out = Mat::zeros(cols, rows);
    for i in 0..r {
        let s = svd.singular_values[i];
        out += svd.v.column(i) * svd.u.column(i).transpose() / s;
    }
    Ok(out)
}

/// Orthonormal completion of the columns of `basis` (assumed orthonormal)
/// to a basis of R^dim. Candidates are the standard basis vectors taken in
/// order, orthogonalized twice; an empty `basis` therefore yields the
/// identity.
pub fn orthogonal_complement(basis: &Mat, dim: usize) -> Mat {
    let need = dim - basis.ncols();
    let mut cols: Vec<Vector> = basis.column_iter().map(|c| c.into_owned()).collect();
    let mut extra = Vec::with_capacity(need);
    for j in 0..dim {
        if extra.len() == need {
            break;
        }
        let mut v = Vector::zeros(dim);
        v[j] = 1.0;
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v.axpy(-proj, c, 1.0);
            }
        }
        let nrm = v.norm();
        // a standard basis vector always keeps at least 1/sqrt(dim) of its
        // length against a subspace of lower dimension for some j
        if nrm > 0.5 / (dim as f64).sqrt() {
            v /= nrm;
            cols.push(v.clone());
            extra.push(v);
        }
    }
    debug_assert_eq!(extra.len(), need);
    if extra.is_empty() {
        return Mat::zeros(dim, 0);
    }
    Mat::from_columns(&extra)
}

/// Eigenvalues of a general real square matrix via a real Schur form.
pub fn eigenvalues(m: &Mat) -> Result<Vec<Complex<f64>>> {
    if m.nrows() == 0 {
        return Ok(Vec::new());
    }
    let schur = Schur::try_new(m.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

pub fn spectral_radius(m: &Mat) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm())))
}

/// Smallest eigenvalue of a symmetric matrix (symmetrized before solving).
pub fn min_sym_eigenvalue(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let sym = (m + m.transpose()) * 0.5;
    SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .fold(f64::INFINITY, |a, &e| a.min(e))
}

/// Numerical rank of a complex matrix.
pub fn complex_rank(m: &DMatrix<Complex<f64>>, rank_tol: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let s = m.clone().singular_values();
    rank_from_values(s.as_slice(), rank_tol)
}

/// 2-norm condition number of a square matrix.
pub fn condition_number(m: &Mat) -> f64 {
    match singular_values(m) {
        Ok(s) if !s.is_empty() => {
            let min = *s.last().unwrap();
            if min == 0.0 {
                f64::INFINITY
            } else {
                s[0] / min
            }
        }
        _ => f64::INFINITY,
    }
}

/// Build a matrix from row-major nested rows. `cols` is needed so that
/// zero-row inputs still carry their column count.
pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Mat> {
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(Error::Structural(format!(
                "row {i} has {} entries, expected {cols}",
                r.len()
            )));
        }
    }
    Ok(Mat::from_fn(rows.len(), cols, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    m.row_iter()
        .map(|r| r.iter().copied().collect())
        .collect()
}

pub fn all_finite(m: &Mat) -> bool {
    m.iter().all(|x| x.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sorted_svd_reconstructs_and_follows_sign_convention() {
        let h = Mat::from_row_slice(2, 2, &[1.1, 2.0, 2.2, 4.0]);
        let svd = SortedSvd::new(&h).unwrap();
        assert_eq!(svd.rank(DEFAULT_RANK_TOL), 1);
        assert!((svd.singular_values[0] - 26.05_f64.sqrt()).abs() < 1e-12);
        for j in 0..2 {
            let c = svd.u.column(j);
            assert!(leading_sign(c.as_slice()) > 0.0);
        }
        let recon = &svd.u * Mat::from_diagonal(&svd.singular_values) * svd.v.transpose();
        assert!((recon - h).norm() < 1e-12);
    }

    #[test]
    fn tall_rank_one_matrix_reconstructs() {
        let h = Mat::from_column_slice(
            3,
            2,
            &[
                0.653997836078065,
                -0.648453256157599,
                0.011831354403853016,
                0.514264997483358,
                -0.5099050696341404,
                0.009303473355829133,
            ],
        );
        let svd = SortedSvd::new(&h).unwrap();
        assert_eq!(svd.rank(DEFAULT_RANK_TOL), 1);
        let u1 = svd.u.columns(0, 1);
        let v1 = svd.v.columns(0, 1);
        let recon = u1 * svd.singular_values[0] * v1.transpose();
        assert!((recon - &h).amax() < 1e-14);
        assert!((singular_values(&h).unwrap()[0] - svd.singular_values[0]).abs() < 1e-14);
    }

    #[test]
    fn empty_matrices_are_total() {
        let e = Mat::zeros(3, 0);
        assert_eq!(rank(&e, 1e-10), 0);
        assert_eq!(norm2(&e), 0.0);
        assert_eq!(pinv(&e, 1e-10).unwrap().shape(), (0, 3));
        let svd = SortedSvd::new(&e).unwrap();
        assert_eq!(svd.u.shape(), (3, 0));
        assert_eq!(svd.v.shape(), (0, 0));
    }

    #[test]
    fn pinv_satisfies_penrose_axioms_on_rank_deficient_input() {
        let a = Mat::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, -1.0, -2.0]);
        let p = pinv(&a, 1e-10).unwrap();
        assert!((&a * &p * &a - &a).norm() < 1e-12);
        assert!((&p * &a * &p - &p).norm() < 1e-12);
        let ap = &a * &p;
        assert!((&ap - ap.transpose()).norm() < 1e-12);
    }

    #[test]
    fn complement_of_empty_basis_is_identity() {
        let c = orthogonal_complement(&Mat::zeros(3, 0), 3);
        assert_eq!(c, Mat::identity(3, 3));
    }

    #[test]
    fn complement_is_orthonormal_and_orthogonal_to_basis() {
        let b = Mat::from_column_slice(3, 1, &[0.6, 0.8, 0.0]);
        let c = orthogonal_complement(&b, 3);
        assert_eq!(c.shape(), (3, 2));
        let full = Mat::from_columns(&[b.column(0), c.column(0), c.column(1)]);
        assert!((full.transpose() * &full - Mat::identity(3, 3)).norm() < 1e-14);
    }

    #[test]
    fn eigenvalues_of_rotation_are_complex_pair() {
        let r = Mat::from_row_slice(2, 2, &[0.0, -2.0, 2.0, 0.0]);
        let ev = eigenvalues(&r).unwrap();
        assert_eq!(ev.len(), 2);
        for z in ev {
            assert!((z.norm() - 2.0).abs() < 1e-12);
        }
        assert!((spectral_radius(&r).unwrap() - 2.0).abs() < 1e-12);
    }
}
