use serde::{Deserialize, Serialize};

use crate::decouple::DecoupledModel;
use crate::error::{Error, Result};
use crate::linalg::{Mat, Vector};
use crate::model::WeightVector;
use crate::synthesize::ErrorConstants;

/// Band around one in which the closed-form state radius switches to the
/// linear-growth branch.
pub const UNIT_THETA_BAND: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMode {
    /// Worst case over vertices.
    #[default]
    WorstCase,
    /// Norm evaluated at the previous step's weights.
    TimeVarying,
}

impl std::str::FromStr for RadiusMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst_case" => Ok(Self::WorstCase),
            "time_varying" => Ok(Self::TimeVarying),
            other => Err(Error::InvalidInput(format!(
                "unknown radius mode `{other}` (expected worst_case or time_varying)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetEstimate {
    pub center: Vector,
    pub radius: f64,
}

impl SetEstimate {
    pub fn contains(&self, point: &Vector, abs_tol: f64) -> bool {
        (point - &self.center).norm() <= self.radius + abs_tol
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverState {
    pub k: usize,
    pub x_hat: Vector,
    pub d1_hat: Vector,
    pub delta_x: f64,
}

#[derive(Debug, Clone)]
pub struct StepOutput {
    pub state: ObserverState,
    /// Updated state estimate at time k.
    pub x_set: SetEstimate,
    /// Unknown input estimate for time k - 1.
    pub d_set: SetEstimate,
    pub x_prior: Vector,
    pub x_star: Vector,
    pub d2_hat: Vector,
}

/// Fixed-gain simultaneous input and state set-valued observer.
#[derive(Debug, Clone, Copy)]
pub struct Observer<'a> {
    pub dm: &'a DecoupledModel,
    pub l_tilde: &'a Mat,
    pub constants: &'a ErrorConstants,
    pub mode: RadiusMode,
}

impl<'a> Observer<'a> {
    pub fn new(
        dm: &'a DecoupledModel,
        l_tilde: &'a Mat,
        constants: &'a ErrorConstants,
        mode: RadiusMode,
    ) -> Result<Self> {
        if l_tilde.shape() != (dm.n(), dm.q()) {
            return Err(Error::Structural(format!(
                "gain is {}x{}, expected {}x{}",
                l_tilde.nrows(),
                l_tilde.ncols(),
                dm.n(),
                dm.q()
            )));
        }
        Ok(Self {
            dm,
            l_tilde,
            constants,
            mode,
        })
    }

    fn check_vector(&self, v: &Vector, len: usize, what: &str) -> Result<()> {
        if v.len() != len {
            return Err(Error::Structural(format!(
                "{what} has length {}, expected {len}",
                v.len()
            )));
        }
        if !v.iter().all(|x| x.is_finite()) {
            return Err(Error::InvalidInput(format!("{what} is not finite")));
        }
        Ok(())
    }

    /// `M1 (z1 - C1 x - D1(lambda) u)`
    fn d1_estimate(&self, z1: &Vector, x: &Vector, u: &Vector, lambda: &WeightVector) -> Vector {
        let d1 = lambda.combine(&self.dm.d1);
        &self.dm.m1 * (z1 - &self.dm.c1 * x - d1 * u)
    }

    pub fn init(
        &self,
        x0_hat: &Vector,
        delta0_x: f64,
        y0: &Vector,
        u0: &Vector,
        lambda0: &WeightVector,
    ) -> Result<ObserverState> {
        let dims = &self.dm.model.dims;
        self.check_vector(x0_hat, dims.n, "x0_hat")?;
        self.check_vector(y0, dims.l, "y_0")?;
        self.check_vector(u0, dims.m, "u_0")?;
        self.dm.model.check_weights(lambda0)?;
        if !(delta0_x >= 0.0 && delta0_x.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "initial radius must be finite and nonnegative, got {delta0_x}"
            )));
        }
        let (z1, _) = self.dm.split_output(y0)?;
        Ok(ObserverState {
            k: 0,
            x_hat: x0_hat.clone(),
            d1_hat: self.d1_estimate(&z1, x0_hat, u0, lambda0),
            delta_x: delta0_x,
        })
    }

    pub fn step(
        &self,
        state: &ObserverState,
        u_prev: &Vector,
        u_k: &Vector,
        y_k: &Vector,
        lambda_prev: &WeightVector,
        lambda_k: &WeightVector,
    ) -> Result<StepOutput> {
        let dm = self.dm;
        let dims = &dm.model.dims;
        self.check_vector(u_prev, dims.m, "u_{k-1}")?;
        self.check_vector(u_k, dims.m, "u_k")?;
        self.check_vector(y_k, dims.l, "y_k")?;
        dm.model.check_weights(lambda_prev)?;
        dm.model.check_weights(lambda_k)?;
        let (z1, z2) = dm.split_output(y_k)?;

        let a_prev = lambda_prev.combine(&dm.model.a);
        let b_prev = lambda_prev.combine(&dm.model.b);
        let x_prior = &a_prev * &state.x_hat + &b_prev * u_prev + &dm.g1 * &state.d1_hat;

        let d2_feedthrough = lambda_k.combine(&dm.d2) * u_k;
        let d2_hat = &dm.m2 * (&z2 - &dm.c2 * &x_prior - &d2_feedthrough);
        let d_hat = dm.recombine_unknown_input(&state.d1_hat, &d2_hat)?;
        let delta_d = input_radius(state.delta_x, self.constants, dm, self.mode, lambda_prev);

        let x_star = &x_prior + &dm.g2 * &d2_hat;
        let x_hat = &x_star + self.l_tilde * (&z2 - &dm.c2 * &x_star - &d2_feedthrough);
        let delta_x = self.constants.theta * state.delta_x + self.constants.eta_bar;
        let d1_hat = self.d1_estimate(&z1, &x_hat, u_k, lambda_k);

        Ok(StepOutput {
            state: ObserverState {
                k: state.k + 1,
                x_hat: x_hat.clone(),
                d1_hat,
                delta_x,
            },
            x_set: SetEstimate {
                center: x_hat,
                radius: delta_x,
            },
            d_set: SetEstimate {
                center: d_hat,
                radius: delta_d,
            },
            x_prior,
            x_star,
            d2_hat,
        })
    }
}

/// Closed-form state radius after `k` steps.
pub fn state_radius(k: usize, delta0: f64, theta: f64, eta_bar: f64) -> f64 {
    if k == 0 {
        return delta0;
    }
    if (1.0 - theta).abs() < UNIT_THETA_BAND {
        return delta0 + eta_bar * k as f64;
    }
    let power = theta.powi(k.min(i32::MAX as usize) as i32);
    delta0 * power + eta_bar * (1.0 - power) / (1.0 - theta)
}

/// Radius of the unknown input estimate for time k - 1 given the state
/// radius at k - 1. `lambda_prev` is only used in time-varying mode.
pub fn input_radius(
    delta_x_prev: f64,
    constants: &ErrorConstants,
    dm: &DecoupledModel,
    mode: RadiusMode,
    lambda_prev: &WeightVector,
) -> f64 {
    let gain = match mode {
        RadiusMode::WorstCase => constants.beta,
        RadiusMode::TimeVarying => constants.beta_at(dm, lambda_prev),
    };
    gain * delta_x_prev + constants.input_noise_term()
}

/// Limits of the state and input radii; requires `theta < 1`.
pub fn steady_state_radii(constants: &ErrorConstants) -> Result<(f64, f64)> {
    if !(constants.theta < 1.0) {
        return Err(Error::RadiiDiverge {
            theta: constants.theta,
        });
    }
    let delta_x = constants.eta_bar / (1.0 - constants.theta);
    let delta_d = constants.beta * delta_x + constants.input_noise_term();
    Ok((delta_x, delta_d))
}
