//! Polytopic LPV plant description.
//!
//! The plant is
//!
//! ```text
//! x_{k+1} = sum_i lambda_{i,k} (A_i x_k + B_i u_k + w_{i,k}) + G d_k
//! y_k     = C x_k + sum_i lambda_{i,k} (D_i u_k + v_{i,k}) + H d_k
//! ```
//!
//! with known scheduling weights `lambda_k` on the probability simplex,
//! bounded noises `|w_{i,k}| <= eta_w`, `|v_{i,k}| <= eta_v`, and an
//! unknown input `d_k` about which nothing is assumed.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};

/// Tolerance on the weight sum.
pub const SIMPLEX_TOL: f64 = 1e-12;

/// Problem dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    /// Number of vertex (constituent) systems.
    pub vertices: usize,
    /// State dimension.
    pub n: usize,
    /// Known-input dimension.
    pub m: usize,
    /// Unknown-input dimension.
    pub p: usize,
    /// Output dimension.
    pub l: usize,
}

#[derive(Debug, Clone)]
pub struct LpvModel {
    pub dims: Dims,
    pub a: Vec<Mat>,
    pub b: Vec<Mat>,
    pub c: Mat,
    pub d: Vec<Mat>,
    pub g: Mat,
    pub h: Mat,
    pub eta_w: f64,
    pub eta_v: f64,
    pub x0_hat: Vector,
    pub delta0_x: f64,
}

/// Outcome of one modelling assumption check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn accepted(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Scheduling weights at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Accepts weights in [0, 1] whose sum is within [`SIMPLEX_TOL`] of one;
    /// such vectors are renormalized, anything else is rejected.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidWeights("empty weight vector".into()));
        }
        if let Some((i, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !w.is_finite() || **w < 0.0 || **w > 1.0)
        {
            return Err(Error::InvalidWeights(format!(
                "weight {i} = {w} outside [0, 1]"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InvalidWeights(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self(weights.into_iter().map(|w| w / sum).collect()))
    }

    /// Unit vector selecting vertex `j` (zero-based).
    pub fn vertex(count: usize, j: usize) -> Self {
        let mut w = vec![0.0; count];
        w[j] = 1.0;
        Self(w)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Convex combination of per-vertex matrices.
    pub fn combine(&self, mats: &[Mat]) -> Mat {
        let mut acc = Mat::zeros(mats[0].nrows(), mats[0].ncols());
        for (w, m) in self.0.iter().zip(mats) {
            acc += m * *w;
        }
        acc
    }

    /// Convex combination of per-vertex vectors.
    pub fn combine_vectors(&self, vecs: &[Vector]) -> Vector {
        let mut acc = Vector::zeros(vecs[0].len());
        for (w, v) in self.0.iter().zip(vecs) {
            acc += v * *w;
        }
        acc
    }
}

impl LpvModel {
    /// Assembles a model, inferring dimensions from the matrices. Call
    /// [`LpvModel::validate`] before use.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: Vec<Mat>,
        b: Vec<Mat>,
        c: Mat,
        d: Vec<Mat>,
        g: Mat,
        h: Mat,
        eta_w: f64,
        eta_v: f64,
        x0_hat: Vector,
        delta0_x: f64,
    ) -> Self {
        let dims = Dims {
            vertices: a.len(),
            n: a.first().map_or(0, |m| m.nrows()),
            m: b.first().map_or(0, |m| m.ncols()),
            p: g.ncols(),
            l: c.nrows(),
        };
        Self {
            dims,
            a,
            b,
            c,
            d,
            g,
            h,
            eta_w,
            eta_v,
            x0_hat,
            delta0_x,
        }
    }

    fn check_shape(name: &str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
        if m.shape() != (rows, cols) {
            return Err(Error::Structural(format!(
                "matrix {name} is {}x{}, expected {rows}x{cols}",
                m.nrows(),
                m.ncols()
            )));
        }
        Ok(())
    }

    /// Verifies that every matrix agrees with `self.dims`.
    pub fn check_structure(&self) -> Result<()> {
        let Dims {
            vertices,
            n,
            m,
            p,
            l,
        } = self.dims;
        if vertices == 0 {
            return Err(Error::Structural("model has no vertices (N = 0)".into()));
        }
        for (name, list) in [("A", &self.a), ("B", &self.b), ("D", &self.d)] {
            if list.len() != vertices {
                return Err(Error::Structural(format!(
                    "{name} has {} vertex matrices, expected N = {vertices}",
                    list.len()
                )));
            }
        }
        for i in 0..vertices {
            Self::check_shape(&format!("A[{i}]"), &self.a[i], n, n)?;
            Self::check_shape(&format!("B[{i}]"), &self.b[i], n, m)?;
            Self::check_shape(&format!("D[{i}]"), &self.d[i], l, m)?;
        }
        Self::check_shape("C", &self.c, l, n)?;
        Self::check_shape("G", &self.g, n, p)?;
        Self::check_shape("H", &self.h, l, p)?;
        if self.x0_hat.len() != n {
            return Err(Error::Structural(format!(
                "x0_hat has length {}, expected n = {n}",
                self.x0_hat.len()
            )));
        }
        let all = self
            .a
            .iter()
            .chain(&self.b)
            .chain(&self.d)
            .chain([&self.c, &self.g, &self.h]);
        for mat in all {
            if !linalg::all_finite(mat) {
                return Err(Error::Structural("non-finite matrix entry".into()));
            }
        }
        Ok(())
    }

    /// Checks the standing modelling assumptions. Dimension mismatches are
    /// hard errors; assumption failures are reported in the returned report.
    pub fn validate(&self, rank_tol: f64) -> Result<ValidationReport> {
        self.check_structure()?;
        let Dims { n, p, l, .. } = self.dims;
        let mut checks = Vec::new();

        checks.push(Check {
            name: "n >= l >= 1".into(),
            passed: n >= l && l >= 1,
            detail: format!("n = {n}, l = {l}"),
        });
        checks.push(Check {
            name: "l >= p".into(),
            passed: l >= p,
            detail: format!("l = {l}, p = {p}"),
        });

        let gh = stack_rows(&self.g, &self.h);
        let rk = linalg::rank(&gh, rank_tol);
        checks.push(Check {
            name: "rank [G; H] = p".into(),
            passed: rk == p,
            detail: format!("rank = {rk}, p = {p}"),
        });

        let bounds_ok = self.eta_w >= 0.0
            && self.eta_v >= 0.0
            && self.delta0_x >= 0.0
            && self.eta_w.is_finite()
            && self.eta_v.is_finite()
            && self.delta0_x.is_finite();
        checks.push(Check {
            name: "noise and initial-error bounds nonnegative".into(),
            passed: bounds_ok,
            detail: format!(
                "eta_w = {}, eta_v = {}, delta0_x = {}",
                self.eta_w, self.eta_v, self.delta0_x
            ),
        });

        Ok(ValidationReport { checks })
    }

    /// Returns `(A(lambda), B(lambda), D(lambda))`.
    pub fn evaluate_at(&self, lambda: &WeightVector) -> Result<(Mat, Mat, Mat)> {
        self.check_weights(lambda)?;
        Ok((
            lambda.combine(&self.a),
            lambda.combine(&self.b),
            lambda.combine(&self.d),
        ))
    }

    pub fn check_weights(&self, lambda: &WeightVector) -> Result<()> {
        if lambda.len() != self.dims.vertices {
            return Err(Error::InvalidWeights(format!(
                "{} weights for {} vertices",
                lambda.len(),
                self.dims.vertices
            )));
        }
        Ok(())
    }
}

pub(crate) fn stack_rows(top: &Mat, bottom: &Mat) -> Mat {
    let cols = top.ncols();
    let mut out = Mat::zeros(top.nrows() + bottom.nrows(), cols);
    out.rows_mut(0, top.nrows()).copy_from(top);
    out.rows_mut(top.nrows(), bottom.nrows()).copy_from(bottom);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::fixtures::paper_example;
    use proptest::prelude::*;

    fn scalar_model(g: f64, h: f64, p: usize) -> LpvModel {
        LpvModel::new(
            vec![Mat::from_element(1, 1, 0.5)],
            vec![Mat::zeros(1, 0)],
            Mat::from_element(1, 1, 1.0),
            vec![Mat::zeros(1, 0)],
            Mat::from_element(1, p, g),
            Mat::from_element(1, p, h),
            0.0,
            0.0,
            Vector::zeros(1),
            0.0,
        )
    }

    #[test]
    fn example_model_passes_all_checks() {
        let (model, _) = paper_example();
        let report = model.validate(linalg::DEFAULT_RANK_TOL).unwrap();
        assert!(report.accepted(), "{report:?}");
    }

    #[test]
    fn zero_attack_channel_fails_rank_check() {
        let report = scalar_model(0.0, 0.0, 1).validate(1e-10).unwrap();
        assert!(!report.accepted());
        let failed: Vec<_> = report.failures().map(|c| c.name.as_str()).collect();
        assert_eq!(failed, vec!["rank [G; H] = p"]);
    }

    #[test]
    fn more_outputs_than_states_is_rejected() {
        let model = LpvModel::new(
            vec![Mat::from_element(1, 1, 0.5)],
            vec![Mat::zeros(1, 0)],
            Mat::from_column_slice(2, 1, &[1.0, 1.0]),
            vec![Mat::zeros(2, 0)],
            Mat::zeros(1, 0),
            Mat::zeros(2, 0),
            0.0,
            0.0,
            Vector::zeros(1),
            0.0,
        );
        let report = model.validate(1e-10).unwrap();
        assert!(!report.accepted());
        assert!(report.failures().any(|c| c.name == "n >= l >= 1"));
    }

    #[test]
    fn dimension_mismatch_names_the_matrix() {
        let (mut model, _) = paper_example();
        model.b[1] = Mat::zeros(2, 3);
        let err = model.validate(1e-10).unwrap_err().to_string();
        assert!(err.contains("B[1]"), "{err}");
    }

    #[test]
    fn weights_outside_simplex_are_rejected() {
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![-0.1, 1.1]).is_err());
        assert!(WeightVector::new(vec![0.5, 0.5 + 5e-13]).is_ok());
        let w = WeightVector::new(vec![0.25, 0.75]).unwrap();
        assert_eq!(w.as_slice(), &[0.25, 0.75]);
    }

    #[test]
    fn unit_weights_select_vertex_exactly() {
        let (model, _) = paper_example();
        for j in 0..2 {
            let (a, b, d) = model.evaluate_at(&WeightVector::vertex(2, j)).unwrap();
            assert_eq!(a, model.a[j]);
            assert_eq!(b, model.b[j]);
            assert_eq!(d, model.d[j]);
        }
    }

    #[test]
    fn midpoint_weights_average_vertices() {
        let (model, _) = paper_example();
        let (a, _, _) = model
            .evaluate_at(&WeightVector::new(vec![0.5, 0.5]).unwrap())
            .unwrap();
        let expected = Mat::from_row_slice(2, 2, &[0.875, 0.525, -0.325, 1.0]);
        assert!((a - expected).amax() < 1e-15);
    }

    #[test]
    fn identical_vertices_are_weight_independent() {
        let mut model = scalar_model(1.0, 0.0, 1);
        model.a = vec![Mat::identity(1, 1), Mat::identity(1, 1)];
        model.b = vec![Mat::zeros(1, 0); 2];
        model.d = vec![Mat::zeros(1, 0); 2];
        model.dims.vertices = 2;
        let (a, _, _) = model
            .evaluate_at(&WeightVector::new(vec![0.3, 0.7]).unwrap())
            .unwrap();
        assert!((a - Mat::identity(1, 1)).amax() < 1e-15);
    }

    proptest! {
        #[test]
        fn evaluation_is_affine_in_weights(t1 in 0.0..1.0f64, t2 in 0.0..1.0f64, alpha in 0.0..1.0f64) {
            let (model, _) = paper_example();
            let l1 = WeightVector::new(vec![t1, 1.0 - t1]).unwrap();
            let l2 = WeightVector::new(vec![t2, 1.0 - t2]).unwrap();
            let mix = alpha * t1 + (1.0 - alpha) * t2;
            let lm = WeightVector::new(vec![mix, 1.0 - mix]).unwrap();
            let (a1, ..) = model.evaluate_at(&l1).unwrap();
            let (a2, ..) = model.evaluate_at(&l2).unwrap();
            let (am, ..) = model.evaluate_at(&lm).unwrap();
            let blend = a1 * alpha + a2 * (1.0 - alpha);
            prop_assert!((am - blend).amax() < 1e-14);
        }
    }
}
