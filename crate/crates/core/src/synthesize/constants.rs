use serde::{Deserialize, Serialize};

use crate::decouple::DecoupledModel;
use crate::error::{Error, Result};
use crate::linalg::{norm2, Mat};
use crate::model::WeightVector;

/// Constants of the estimation-error system for a fixed gain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorConstants {
    /// I - L C2
    pub psi: Mat,
    /// I - G2 M2 C2
    pub phi: Mat,
    /// Per-vertex state-error transition `psi * phi * a_hat[i]`.
    pub a_e: Vec<Mat>,
    pub theta: f64,
    /// Worst-case gain from the previous state error to the input error.
    pub beta: f64,
    pub gamma: Mat,
    /// Per-step bound on the noise contribution to the state error.
    pub eta_bar: f64,
    pub r: Mat,
    /// `V1 M1 C1`, reused by the time-varying input radius.
    pub v1m1c1: Mat,
    /// `V2 M2 C2`
    pub v2m2c2: Mat,
    /// `||V2 M2 C2||`, multiplies eta_w in the input radius.
    pub input_w_gain: f64,
    /// `||R|| + ||V2 M2 T2||`, multiplies eta_v in the input radius.
    pub input_v_gain: f64,
    pub eta_w: f64,
    pub eta_v: f64,
}

pub fn error_constants(dm: &DecoupledModel, l_tilde: &Mat) -> Result<ErrorConstants> {
    let n = dm.n();
    let q = dm.q();
    if l_tilde.shape() != (n, q) {
        return Err(Error::Structural(format!(
            "gain is {}x{}, expected {n}x{q}",
            l_tilde.nrows(),
            l_tilde.ncols()
        )));
    }
    let psi = Mat::identity(n, n) - l_tilde * &dm.c2;
    let phi = dm.phi.clone();
    let psi_phi = &psi * &phi;
    let a_e: Vec<Mat> = dm.a_hat.iter().map(|a| &psi_phi * a).collect();
    let theta = a_e.iter().map(norm2).fold(0.0, f64::max);

    let v1m1c1 = &dm.v1 * &dm.m1 * &dm.c1;
    let v2m2c2 = &dm.v2 * &dm.m2 * &dm.c2;
    let beta = dm
        .a_hat
        .iter()
        .map(|a| norm2(&(&v1m1c1 + &v2m2c2 * a)))
        .fold(0.0, f64::max);

    let g1m1t1 = &dm.g1 * &dm.m1 * &dm.t1;
    let previous_v = &psi_phi * &g1m1t1;
    let current_v = (&psi * &dm.g2 * &dm.m2 + l_tilde) * &dm.t2;
    let gamma = -(&previous_v + &current_v);

    let eta_w = dm.model.eta_w;
    let eta_v = dm.model.eta_v;
    let eta_bar = norm2(&psi_phi) * eta_w + (norm2(&previous_v) + norm2(&current_v)) * eta_v;

    let r = (&v2m2c2 * &dm.g1 - &dm.v1) * &dm.m1 * &dm.t1;
    let v2m2t2 = &dm.v2 * &dm.m2 * &dm.t2;
    let input_w_gain = norm2(&v2m2c2);
    let input_v_gain = norm2(&r) + norm2(&v2m2t2);

    Ok(ErrorConstants {
        psi,
        phi,
        a_e,
        theta,
        beta,
        gamma,
        eta_bar,
        r,
        v1m1c1,
        v2m2c2,
        input_w_gain,
        input_v_gain,
        eta_w,
        eta_v,
    })
}

impl ErrorConstants {
    /// `||V1 M1 C1 + V2 M2 C2 A_hat(lambda)||` for a specific weight vector.
    pub fn beta_at(&self, dm: &DecoupledModel, lambda: &WeightVector) -> f64 {
        let a_hat = lambda.combine(&dm.a_hat);
        norm2(&(&self.v1m1c1 + &self.v2m2c2 * a_hat))
    }

    /// Input radius term that does not depend on the state radius.
    pub fn input_noise_term(&self) -> f64 {
        self.input_w_gain * self.eta_w + self.input_v_gain * self.eta_v
    }

    /// Copy with theta replaced; used to check that the containment
    /// detector actually fires.
    pub fn with_theta(&self, theta: f64) -> Self {
        Self {
            theta,
            ..self.clone()
        }
    }

    pub fn converges(&self) -> bool {
        self.theta < 1.0
    }
}
