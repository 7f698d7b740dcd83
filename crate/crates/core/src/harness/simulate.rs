use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::decouple::DecoupledModel;
use crate::error::{Error, Result};
use crate::harness::scenario::{sample_ball, sample_simplex, sample_sphere, NoiseMode, Scenario, WeightMode};
use crate::linalg::{Mat, Vector};
use crate::model::{LpvModel, WeightVector};
use crate::observer::{Observer, RadiusMode};
use crate::synthesize::ErrorConstants;

const WEIGHT_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;
const INITIAL_STATE_STREAM: u64 = 3;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Ground truth of one plant run. Every sequence is indexed by `k = 0..=K`;
/// `w[k][i]` and `v[k][i]` are the noises of vertex `i` at time `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantTrace {
    pub x: Vec<Vector>,
    pub y: Vec<Vector>,
    pub u: Vec<Vector>,
    pub d: Vec<Vector>,
    pub lambda: Vec<WeightVector>,
    pub w: Vec<Vec<Vector>>,
    pub v: Vec<Vec<Vector>>,
}

impl PlantTrace {
    pub fn horizon(&self) -> usize {
        self.x.len() - 1
    }

    pub fn w_bar(&self, k: usize) -> Vector {
        self.lambda[k].combine_vectors(&self.w[k])
    }

    pub fn v_bar(&self, k: usize) -> Vector {
        self.lambda[k].combine_vectors(&self.v[k])
    }
}

pub fn simulate_plant(model: &LpvModel, scenario: &Scenario) -> Result<PlantTrace> {
    scenario.validate(model)?;
    let dims = model.dims;
    let horizon = scenario.horizon;
    let mut weight_rng = stream(scenario.seed, WEIGHT_STREAM);
    let mut noise_rng = stream(scenario.seed, NOISE_STREAM);
    let mut x0_rng = stream(scenario.seed, INITIAL_STATE_STREAM);

    let lambda = (0..=horizon)
        .map(|k| match &scenario.weights {
            WeightMode::RandomSimplex => sample_simplex(&mut weight_rng, dims.vertices),
            WeightMode::FixedVertex { vertex } => Ok(WeightVector::vertex(dims.vertices, *vertex)),
            WeightMode::Explicit { sequence } => WeightVector::new(sequence[k].clone()),
        })
        .collect::<Result<Vec<_>>>()?;

    let mut draw = |dim: usize, radius: f64| match scenario.noise {
        NoiseMode::Zero => Vector::zeros(dim),
        NoiseMode::UniformBall => sample_ball(&mut noise_rng, dim, radius),
        NoiseMode::WorstCaseVertex => sample_sphere(&mut noise_rng, dim, radius),
    };
    let mut w = Vec::with_capacity(horizon + 1);
    let mut v = Vec::with_capacity(horizon + 1);
    for _ in 0..=horizon {
        w.push((0..dims.vertices).map(|_| draw(dims.n, model.eta_w)).collect::<Vec<_>>());
        v.push((0..dims.vertices).map(|_| draw(dims.l, model.eta_v)).collect::<Vec<_>>());
    }

    let signal_vector = |signals: &[crate::harness::Signal], k: usize| {
        Vector::from_iterator(signals.len(), signals.iter().map(|s| s.value_at(k, horizon)))
    };
    let u: Vec<Vector> = (0..=horizon)
        .map(|k| signal_vector(&scenario.known_input, k))
        .collect();
    let d: Vec<Vector> = (0..=horizon)
        .map(|k| signal_vector(&scenario.unknown_input, k))
        .collect();

    let x0 = match &scenario.x0_true {
        Some(x0) => Vector::from_column_slice(x0),
        None => &model.x0_hat + sample_ball(&mut x0_rng, dims.n, model.delta0_x),
    };

    let mut x = Vec::with_capacity(horizon + 1);
    let mut y = Vec::with_capacity(horizon + 1);
    x.push(x0);
    for k in 0..=horizon {
        let lam = &lambda[k];
        let (a, b, dmat) = model.evaluate_at(lam)?;
        let xk = &x[k];
        y.push(&model.c * xk + &dmat * &u[k] + lam.combine_vectors(&v[k]) + &model.h * &d[k]);
        if k < horizon {
            let next = &a * xk + &b * &u[k] + lam.combine_vectors(&w[k]) + &model.g * &d[k];
            x.push(next);
        }
    }
    if !x.iter().chain(&y).all(|v| v.iter().all(|e| e.is_finite())) {
        return Err(Error::Numerical("plant trajectory is not finite".into()));
    }
    Ok(PlantTrace {
        x,
        y,
        u,
        d,
        lambda,
        w,
        v,
    })
}

/// One observer step. `d_true`, `d_hat` and `delta_d` refer to time `k - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    pub x_true: Vector,
    pub y: Vector,
    pub u: Vector,
    pub x_hat: Vector,
    pub delta_x: f64,
    pub err_x: f64,
    pub d_true: Vector,
    pub d_hat: Vector,
    pub delta_d: f64,
    pub err_d: f64,
    pub lambda: WeightVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub mode: RadiusMode,
    pub x0_hat: Vector,
    pub delta0_x: f64,
    pub initial_error: f64,
    pub rows: Vec<TraceRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    State,
    Input,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub step: usize,
    pub kind: ViolationKind,
    pub error: f64,
    pub radius: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let what = match self.kind {
            ViolationKind::State => "state error",
            ViolationKind::Input => "input error",
        };
        write!(f, "{what} {:e} exceeds radius {:e}", self.error, self.radius)
    }
}

/// Tolerance on containment checks, absorbing rounding in the error norms.
pub const CONTAINMENT_ABS_TOL: f64 = 1e-9;

impl SimulationTrace {
    pub fn violations(&self, abs_tol: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        for row in &self.rows {
            if !(row.err_x <= row.delta_x + abs_tol) {
                out.push(Violation {
                    step: row.k,
                    kind: ViolationKind::State,
                    error: row.err_x,
                    radius: row.delta_x,
                });
            }
            if !(row.err_d <= row.delta_d + abs_tol) {
                out.push(Violation {
                    step: row.k,
                    kind: ViolationKind::Input,
                    error: row.err_d,
                    radius: row.delta_d,
                });
            }
        }
        out
    }

    pub fn max_error_x(&self) -> f64 {
        self.rows.iter().map(|r| r.err_x).fold(0.0, f64::max)
    }

    /// Writes the trace as CSV with every number at 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        let Some(first) = self.rows.first() else {
            return Ok(());
        };
        let (n, p, vertices) = (first.x_true.len(), first.d_true.len(), first.lambda.len());
        let mut header = vec!["k".to_string()];
        header.extend((1..=n).map(|i| format!("x_true_{i}")));
        header.extend((1..=n).map(|i| format!("x_hat_{i}")));
        header.push("delta_x".into());
        header.push("err_x".into());
        header.extend((1..=p).map(|i| format!("d_true_{i}")));
        header.extend((1..=p).map(|i| format!("d_hat_{i}")));
        header.push("delta_d".into());
        header.push("err_d".into());
        header.extend((1..=vertices).map(|i| format!("lambda_{i}")));
        writeln!(out, "{}", header.join(","))?;

        for row in &self.rows {
            let mut fields = vec![row.k.to_string()];
            let mut push = |v: f64| fields.push(format!("{v:.16e}"));
            row.x_true.iter().for_each(|&v| push(v));
            row.x_hat.iter().for_each(|&v| push(v));
            push(row.delta_x);
            push(row.err_x);
            row.d_true.iter().for_each(|&v| push(v));
            row.d_hat.iter().for_each(|&v| push(v));
            push(row.delta_d);
            push(row.err_d);
            row.lambda.as_slice().iter().for_each(|&v| push(v));
            writeln!(out, "{}", fields.join(","))?;
        }
        Ok(())
    }
}

/// Runs the observer over a plant trace, starting from the model's initial
/// estimate and radius.
pub fn run_observer(
    dm: &DecoupledModel,
    l_tilde: &Mat,
    constants: &ErrorConstants,
    plant: &PlantTrace,
    mode: RadiusMode,
) -> Result<SimulationTrace> {
    let model = &dm.model;
    let observer = Observer::new(dm, l_tilde, constants, mode)?;
    let mut state = observer.init(
        &model.x0_hat,
        model.delta0_x,
        &plant.y[0],
        &plant.u[0],
        &plant.lambda[0],
    )?;
    let mut rows = Vec::with_capacity(plant.horizon());
    for k in 1..=plant.horizon() {
        let out = observer.step(
            &state,
            &plant.u[k - 1],
            &plant.u[k],
            &plant.y[k],
            &plant.lambda[k - 1],
            &plant.lambda[k],
        )?;
        let err_x = (&plant.x[k] - &out.x_set.center).norm();
        let err_d = (&plant.d[k - 1] - &out.d_set.center).norm();
        if !(err_x.is_finite() && err_d.is_finite()) {
            return Err(Error::Numerical(format!("estimate diverged at step {k}")));
        }
        rows.push(TraceRow {
            k,
            x_true: plant.x[k].clone(),
            y: plant.y[k].clone(),
            u: plant.u[k].clone(),
            x_hat: out.x_set.center,
            delta_x: out.x_set.radius,
            err_x,
            d_true: plant.d[k - 1].clone(),
            d_hat: out.d_set.center,
            delta_d: out.d_set.radius,
            err_d,
            lambda: plant.lambda[k].clone(),
        });
        state = out.state;
    }
    Ok(SimulationTrace {
        mode,
        x0_hat: model.x0_hat.clone(),
        delta0_x: model.delta0_x,
        initial_error: (&plant.x[0] - &model.x0_hat).norm(),
        rows,
    })
}
