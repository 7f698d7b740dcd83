//! Closed-form estimation errors.
//!
//! The state error satisfies `e_k = Ae(k-1) e_{k-1} + t_{k-1}` with
//! `Ae(j) = Psi Phi Ahat(lambda_j)` and
//!
//! ```text
//! t_j = Psi Phi wbar_j - Psi Phi G1 M1 T1 vbar_j - (Psi G2 M2 + L) T2 vbar_{j+1}
//! ```
//!
//! so `e_k = B_k e_0 + sum_{i=1..k} C(i, k) t_{k-i}` where `B_k` is the
//! ordered product of all `k` transitions and `C(i, k)` the product of the
//! last `i - 1`. The input error at `k - 1` is an affine function of
//! `e_{k-1}` and the noises at `k - 1` and `k`. Nothing here calls into the
//! observer.

use crate::decouple::DecoupledModel;
use crate::error::{Error, Result};
use crate::harness::simulate::PlantTrace;
use crate::linalg::{norm2, Mat, Vector};

#[derive(Debug, Clone)]
pub struct OracleResult {
    /// `x_k - x_hat_k` for `k = 0..=K`.
    pub x_tilde: Vec<Vector>,
    /// `d_{k-1} - d_hat_{k-1}` for `k = 1..=K` (index `k - 1`).
    pub d_tilde: Vec<Vector>,
    pub intermediates: OracleIntermediates,
}

#[derive(Debug, Clone)]
pub struct OracleIntermediates {
    /// `||B_k||` for `k = 0..=K`.
    pub b_e_norms: Vec<f64>,
    /// `max_i ||C(i, k)|| / theta^(i-1)` per `k`.
    pub c_e_max_ratio: Vec<f64>,
    pub w_bar: Vec<Vector>,
    pub v_bar: Vec<Vector>,
    /// Lumped noise input `t_j` for `j = 0..K-1`.
    pub t_bar: Vec<Vector>,
    /// `||sum_i C(i, k) t_{k-i}||` for `k = 0..=K`.
    pub noise_sum_norms: Vec<f64>,
}

struct Operators {
    psi_phi: Mat,
    prev_v: Mat,
    next_v: Mat,
    feedthrough: Mat,
    input_state: Mat,
    input_state_dyn: Mat,
    input_prev_v: Mat,
    input_next_v: Mat,
}

fn operators(dm: &DecoupledModel, l_tilde: &Mat) -> Operators {
    let n = dm.n();
    let psi = Mat::identity(n, n) - l_tilde * &dm.c2;
    let psi_phi = &psi * &dm.phi;
    let v2m2 = &dm.v2 * &dm.m2;
    Operators {
        prev_v: &psi_phi * &dm.g1 * &dm.m1 * &dm.t1,
        next_v: (&psi * &dm.g2 * &dm.m2 + l_tilde) * &dm.t2,
        psi_phi,
        feedthrough: &dm.g1 * &dm.m1 * &dm.c1,
        input_state: &dm.v1 * &dm.m1 * &dm.c1,
        input_state_dyn: &v2m2 * &dm.c2,
        input_prev_v: (&v2m2 * &dm.c2 * &dm.g1 - &dm.v1) * &dm.m1 * &dm.t1,
        input_next_v: &v2m2 * &dm.t2,
    }
}

pub fn oracle_errors(
    dm: &DecoupledModel,
    l_tilde: &Mat,
    theta: f64,
    plant: &PlantTrace,
) -> Result<OracleResult> {
    let n = dm.n();
    if l_tilde.shape() != (n, dm.q()) {
        return Err(Error::Structural("gain has the wrong shape".into()));
    }
    let ops = operators(dm, l_tilde);
    let horizon = plant.horizon();
    let model = &dm.model;

    let a_hat: Vec<Mat> = plant
        .lambda
        .iter()
        .map(|lam| lam.combine(&model.a) - &ops.feedthrough)
        .collect();
    let a_e: Vec<Mat> = a_hat.iter().map(|a| &ops.psi_phi * a).collect();
    let w_bar: Vec<Vector> = (0..=horizon).map(|k| plant.w_bar(k)).collect();
    let v_bar: Vec<Vector> = (0..=horizon).map(|k| plant.v_bar(k)).collect();
    let t_bar: Vec<Vector> = (0..horizon)
        .map(|j| &ops.psi_phi * &w_bar[j] - &ops.prev_v * &v_bar[j] - &ops.next_v * &v_bar[j + 1])
        .collect();

    let e0 = &plant.x[0] - &model.x0_hat;
    let mut x_tilde = Vec::with_capacity(horizon + 1);
    let mut b_e_norms = Vec::with_capacity(horizon + 1);
    let mut noise_sum_norms = Vec::with_capacity(horizon + 1);
    let mut c_e_max_ratio = Vec::with_capacity(horizon + 1);
    x_tilde.push(e0.clone());
    b_e_norms.push(1.0);
    noise_sum_norms.push(0.0);
    c_e_max_ratio.push(0.0);

    let mut b_e = Mat::identity(n, n);
    for k in 1..=horizon {
        b_e = &a_e[k - 1] * &b_e;
        let mut c_e = Mat::identity(n, n);
        let mut noise = Vector::zeros(n);
        let mut worst = 0.0f64;
        for i in 1..=k {
            if i > 1 {
                c_e = &c_e * &a_e[k - i + 1];
            }
            let bound = theta.powi(i as i32 - 1);
            let ratio = if bound > 0.0 {
                norm2(&c_e) / bound
            } else if norm2(&c_e) == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            worst = worst.max(ratio);
            noise += &c_e * &t_bar[k - i];
        }
        b_e_norms.push(norm2(&b_e));
        noise_sum_norms.push(noise.norm());
        c_e_max_ratio.push(worst);
        x_tilde.push(&b_e * &e0 + noise);
    }

    let d_tilde = (1..=horizon)
        .map(|k| {
            let gain = &ops.input_state + &ops.input_state_dyn * &a_hat[k - 1];
            -(gain * &x_tilde[k - 1]) - &ops.input_state_dyn * &w_bar[k - 1]
                + &ops.input_prev_v * &v_bar[k - 1]
                - &ops.input_next_v * &v_bar[k]
        })
        .collect();

    Ok(OracleResult {
        x_tilde,
        d_tilde,
        intermediates: OracleIntermediates {
            b_e_norms,
            c_e_max_ratio,
            w_bar,
            v_bar,
            t_bar,
            noise_sum_norms,
        },
    })
}

impl OracleIntermediates {
    /// Checks the sample-wise inequalities behind the state radius:
    /// `||B_k|| <= theta^k`, `||C(i, k)|| <= theta^(i-1)`, `||t_j|| <= eta_bar`
    /// and `||sum C t|| <= eta_bar sum theta^(i-1)`, each with relative and
    /// absolute slack `slack`.
    pub fn check_bound_chain(&self, theta: f64, eta_bar: f64, slack: f64) -> std::result::Result<(), String> {
        let within = |value: f64, bound: f64| value <= bound * (1.0 + slack) + slack;
        for (k, &norm) in self.b_e_norms.iter().enumerate() {
            let bound = theta.powi(k as i32);
            if !within(norm, bound) {
                return Err(format!("||B_{k}|| = {norm:e} exceeds theta^{k} = {bound:e}"));
            }
        }
        for (k, &ratio) in self.c_e_max_ratio.iter().enumerate() {
            if !within(ratio, 1.0) {
                return Err(format!("transition product at k = {k} exceeds its bound by ratio {ratio}"));
            }
        }
        for (j, t) in self.t_bar.iter().enumerate() {
            if !within(t.norm(), eta_bar) {
                return Err(format!("||t_{j}|| = {:e} exceeds eta_bar = {eta_bar:e}", t.norm()));
            }
        }
        let mut geometric = 0.0;
        for (k, &norm) in self.noise_sum_norms.iter().enumerate() {
            if k > 0 {
                geometric = geometric * theta + 1.0;
            }
            let bound = eta_bar * geometric;
            if !within(norm, bound) {
                return Err(format!("noise sum at k = {k} is {norm:e}, bound {bound:e}"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decouple::decouple;
    use crate::harness::fixtures::paper_example;
    use crate::harness::scenario::{NoiseMode, Scenario};
    use crate::harness::simulate::simulate_plant;
    use crate::harness::Signal;
    use crate::linalg::DEFAULT_RANK_TOL;

    #[test]
    fn zero_noise_zero_initial_error_gives_zero_errors() {
        let (model, scenario) = paper_example();
        let dm = decouple(&model, DEFAULT_RANK_TOL).unwrap();
        let plant = simulate_plant(
            &model,
            &Scenario {
                noise: NoiseMode::Zero,
                x0_true: Some(vec![0.0, 0.0]),
                unknown_input: vec![Signal::zero(), Signal::zero()],
                ..scenario
            },
        )
        .unwrap();
        let l = Mat::from_row_slice(2, 1, &[-0.25, 0.4]);
        let out = oracle_errors(&dm, &l, 1.3, &plant).unwrap();
        assert!(out.x_tilde.iter().all(|e| e.norm() == 0.0));
        assert!(out.d_tilde.iter().all(|e| e.norm() == 0.0));
        assert_eq!(out.d_tilde.len(), plant.horizon());
    }
}
