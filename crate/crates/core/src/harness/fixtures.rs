//! Reference models and scenarios.

use rand::Rng;

use crate::decouple::decouple;
use crate::harness::scenario::{NoiseMode, Scenario, Signal, WeightMode};
use crate::linalg::{condition_number, norm2, Mat, Vector, DEFAULT_RANK_TOL};
use crate::model::LpvModel;
use crate::synthesize::error_constants;

fn paper_dynamics() -> Vec<Mat> {
    vec![
        Mat::from_row_slice(2, 2, &[0.9, 0.5, -0.3, 1.0]),
        Mat::from_row_slice(2, 2, &[0.85, 0.55, -0.35, 1.0]),
    ]
}

fn paper_output() -> Mat {
    Mat::from_row_slice(2, 2, &[1.0, 0.2, 1.1, 1.9])
}

/// Two-vertex, two-state benchmark with two attack channels, one of which
/// also enters the measurements.
pub fn paper_example() -> (LpvModel, Scenario) {
    let model = LpvModel::new(
        paper_dynamics(),
        vec![Mat::identity(2, 2); 2],
        paper_output(),
        vec![Mat::zeros(2, 2); 2],
        Mat::from_row_slice(2, 2, &[-0.02, 0.04, 0.01, -0.05]),
        Mat::from_row_slice(2, 2, &[1.1, 2.0, 2.2, 4.0]),
        0.02,
        1e-4,
        Vector::zeros(2),
        0.5,
    );
    let scenario = Scenario {
        horizon: 200,
        seed: 42,
        weights: WeightMode::RandomSimplex,
        unknown_input: vec![
            Signal::Square {
                amplitude: 1.0,
                period: 20,
            },
            Signal::Ramp { from: 0.0, to: 2.0 },
        ],
        known_input: vec![Signal::zero(), Signal::zero()],
        noise: NoiseMode::UniformBall,
        x0_true: None,
    };
    (model, scenario)
}

/// Same plant with a single attack channel that bypasses the measurements,
/// leaving a full-rank output for the measurement update.
pub fn convergent_example() -> (LpvModel, Scenario) {
    let model = LpvModel::new(
        paper_dynamics(),
        vec![Mat::identity(2, 2); 2],
        paper_output(),
        vec![Mat::zeros(2, 2); 2],
        Mat::from_row_slice(2, 1, &[-0.02, 0.01]),
        Mat::zeros(2, 1),
        0.02,
        1e-4,
        Vector::zeros(2),
        0.5,
    );
    let scenario = Scenario {
        horizon: 200,
        seed: 42,
        weights: WeightMode::RandomSimplex,
        unknown_input: vec![Signal::Square {
            amplitude: 1.0,
            period: 20,
        }],
        known_input: vec![Signal::zero(), Signal::zero()],
        noise: NoiseMode::UniformBall,
        x0_true: None,
    };
    (model, scenario)
}

/// Two vertices sharing `C = [1 0]` and `G = [1; 0]`. After the input is
/// decoupled the first state is reconstructed exactly and the second is
/// invisible. Vertex 1 couples the second state into the first and damps it;
/// vertex 2 leaves it uncoupled with an unstable pole at 1.2.
pub fn undetectable_example() -> LpvModel {
    LpvModel::new(
        vec![
            Mat::from_row_slice(2, 2, &[0.5, 0.2, 0.3, 0.6]),
            Mat::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 1.2]),
        ],
        vec![Mat::zeros(2, 1); 2],
        Mat::from_row_slice(1, 2, &[1.0, 0.0]),
        vec![Mat::zeros(1, 1); 2],
        Mat::from_row_slice(2, 1, &[1.0, 0.0]),
        Mat::zeros(1, 1),
        0.01,
        1e-3,
        Vector::zeros(2),
        0.5,
    )
}

/// Random well-posed instance with `n <= 5`, `N <= 4`, `p <= 2`, `K <= 50`,
/// together with a gain whose error transitions do not expand. Instances
/// whose input decoupling is ill-conditioned (beyond 1e6) are redrawn.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> (LpvModel, Scenario, Mat) {
    loop {
        if let Some(found) = try_random_instance(rng) {
            return found;
        }
    }
}

fn random_mat<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| scale * rng.random_range(-1.0..1.0))
}

fn try_random_instance<R: Rng + ?Sized>(rng: &mut R) -> Option<(LpvModel, Scenario, Mat)> {
    let n = rng.random_range(2..=5);
    let vertices = rng.random_range(1..=4);
    let p = rng.random_range(1..=2usize);
    let l = rng.random_range(p..=n);
    let m = rng.random_range(0..=2);
    let p_h = rng.random_range(0..=p);

    let a: Vec<Mat> = (0..vertices)
        .map(|_| {
            let raw = random_mat(rng, n, n, 1.0);
            let scale = rng.random_range(0.2..0.9) / norm2(&raw).max(1e-12);
            raw * scale
        })
        .collect();
    let b: Vec<Mat> = (0..vertices).map(|_| random_mat(rng, n, m, 1.0)).collect();
    let c = random_mat(rng, l, n, 1.0);
    let d: Vec<Mat> = (0..vertices).map(|_| random_mat(rng, l, m, 0.5)).collect();
    let g = random_mat(rng, n, p, 1.0);
    let h = if p_h == 0 {
        Mat::zeros(l, p)
    } else {
        random_mat(rng, l, p_h, 1.0) * random_mat(rng, p_h, p, 1.0)
    };
    let eta_w = rng.random_range(0.0..0.1);
    let eta_v = rng.random_range(0.0..0.1);
    let x0_hat = Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let delta0_x = rng.random_range(0.0..1.0);
    let model = LpvModel::new(a, b, c, d, g, h, eta_w, eta_v, x0_hat, delta0_x);

    if !model.validate(DEFAULT_RANK_TOL).ok()?.accepted() {
        return None;
    }
    let dm = decouple(&model, DEFAULT_RANK_TOL).ok()?;
    if dm.p_h != p_h {
        return None;
    }
    let sigma_cond = match (dm.sigma.iter().cloned().reduce(f64::max), dm.sigma.iter().cloned().reduce(f64::min)) {
        (Some(hi), Some(lo)) => hi / lo,
        _ => 1.0,
    };
    let c2g2 = &dm.c2 * &dm.g2;
    let c2g2_cond = if c2g2.is_empty() {
        1.0
    } else {
        condition_number(&c2g2)
    };
    if sigma_cond > 1e6 || c2g2_cond > 1e6 || norm2(&dm.phi) > 1e3 {
        return None;
    }

    let q = dm.q();
    let gain = random_mat(rng, n, q, 0.3);
    let constants = error_constants(&dm, &gain).ok()?;
    if constants.theta > 1.0 {
        return None;
    }

    let horizon = rng.random_range(1..=50);
    let unknown_input = (0..p)
        .map(|_| Signal::Sinusoid {
            amplitude: rng.random_range(0.0..5.0),
            period: rng.random_range(3.0..30.0),
            phase: rng.random_range(0.0..std::f64::consts::TAU),
            offset: rng.random_range(-1.0..1.0),
        })
        .collect();
    let known_input = (0..m)
        .map(|_| Signal::Sinusoid {
            amplitude: rng.random_range(0.0..1.0),
            period: rng.random_range(3.0..30.0),
            phase: 0.0,
            offset: 0.0,
        })
        .collect();
    let scenario = Scenario {
        horizon,
        seed: rng.random(),
        weights: WeightMode::RandomSimplex,
        unknown_input,
        known_input,
        noise: NoiseMode::UniformBall,
        x0_true: None,
    };
    Some((model, scenario, gain))
}
