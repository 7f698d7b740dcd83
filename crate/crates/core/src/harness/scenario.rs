use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::model::{LpvModel, WeightVector};

/// Scalar signal over the time index `k = 0..=horizon`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Signal {
    Constant {
        value: f64,
    },
    /// Holds each value from its start step until the next segment; zero
    /// before the first segment.
    Piecewise {
        segments: Vec<Segment>,
    },
    Sinusoid {
        amplitude: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// `+amplitude` on the first half of each period, `-amplitude` on the second.
    Square {
        amplitude: f64,
        period: usize,
    },
    /// Linear from `from` at `k = 0` to `to` at `k = horizon`.
    Ramp {
        from: f64,
        to: f64,
    },
    /// Explicit samples; the last sample is held past the end.
    Samples {
        values: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: usize,
    pub value: f64,
}

impl Signal {
    pub fn zero() -> Self {
        Signal::Constant { value: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            Signal::Constant { value } => value.is_finite(),
            Signal::Piecewise { segments } => {
                segments.iter().all(|s| s.value.is_finite())
                    && segments.windows(2).all(|w| w[0].start < w[1].start)
            }
            Signal::Sinusoid {
                amplitude,
                period,
                phase,
                offset,
            } => {
                amplitude.is_finite()
                    && phase.is_finite()
                    && offset.is_finite()
                    && *period > 0.0
                    && period.is_finite()
            }
            Signal::Square { amplitude, period } => amplitude.is_finite() && *period >= 2,
            Signal::Ramp { from, to } => from.is_finite() && to.is_finite(),
            Signal::Samples { values } => values.iter().all(|v| v.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("invalid signal {self:?}")))
        }
    }

    pub fn value_at(&self, k: usize, horizon: usize) -> f64 {
        match self {
            Signal::Constant { value } => *value,
            Signal::Piecewise { segments } => segments
                .iter()
                .take_while(|s| s.start <= k)
                .last()
                .map_or(0.0, |s| s.value),
            Signal::Sinusoid {
                amplitude,
                period,
                phase,
                offset,
            } => amplitude * (std::f64::consts::TAU * k as f64 / period + phase).sin() + offset,
            Signal::Square { amplitude, period } => {
                if 2 * (k % period) < *period {
                    *amplitude
                } else {
                    -amplitude
                }
            }
            Signal::Ramp { from, to } => {
                if horizon == 0 {
                    *from
                } else {
                    from + (to - from) * k as f64 / horizon as f64
                }
            }
            Signal::Samples { values } => values
                .get(k)
                .or_else(|| values.last())
                .copied()
                .unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightMode {
    /// Independent uniform draws from the probability simplex each step.
    RandomSimplex,
    /// Zero-based vertex index held for the whole run.
    FixedVertex { vertex: usize },
    /// One weight vector per step `k = 0..=horizon`.
    Explicit { sequence: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    /// Uniform over the ball of the admissible radius.
    UniformBall,
    Zero,
    /// Uniform direction on the boundary sphere.
    WorstCaseVertex,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub horizon: usize,
    pub seed: u64,
    pub weights: WeightMode,
    /// One signal per unknown input channel.
    pub unknown_input: Vec<Signal>,
    /// One signal per known input channel.
    pub known_input: Vec<Signal>,
    pub noise: NoiseMode,
    /// Drawn uniformly from the initial uncertainty ball when absent.
    #[serde(default)]
    pub x0_true: Option<Vec<f64>>,
}

impl Scenario {
    pub fn validate(&self, model: &LpvModel) -> Result<()> {
        let dims = &model.dims;
        if self.horizon == 0 {
            return Err(Error::InvalidInput("horizon must be at least 1".into()));
        }
        if self.unknown_input.len() != dims.p {
            return Err(Error::Structural(format!(
                "scenario has {} unknown input signals, model has p = {}",
                self.unknown_input.len(),
                dims.p
            )));
        }
        if self.known_input.len() != dims.m {
            return Err(Error::Structural(format!(
                "scenario has {} known input signals, model has m = {}",
                self.known_input.len(),
                dims.m
            )));
        }
        for s in self.unknown_input.iter().chain(&self.known_input) {
            s.validate()?;
        }
        match &self.weights {
            WeightMode::RandomSimplex => {}
            WeightMode::FixedVertex { vertex } => {
                if *vertex >= dims.vertices {
                    return Err(Error::InvalidInput(format!(
                        "fixed vertex {vertex} out of range (N = {})",
                        dims.vertices
                    )));
                }
            }
            WeightMode::Explicit { sequence } => {
                if sequence.len() < self.horizon + 1 {
                    return Err(Error::InvalidInput(format!(
                        "explicit weights cover {} steps, need {}",
                        sequence.len(),
                        self.horizon + 1
                    )));
                }
                for w in sequence {
                    model.check_weights(&WeightVector::new(w.clone())?)?;
                }
            }
        }
        if let Some(x0) = &self.x0_true {
            if x0.len() != dims.n {
                return Err(Error::Structural(format!(
                    "x0_true has length {}, expected {}",
                    x0.len(),
                    dims.n
                )));
            }
            let gap = (Vector::from_column_slice(x0) - &model.x0_hat).norm();
            if !(gap <= model.delta0_x) {
                return Err(Error::InvalidInput(format!(
                    "x0_true is {gap} from x0_hat, outside the initial radius {}",
                    model.delta0_x
                )));
            }
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Uniform sample from the ball of radius `radius` in `dim` dimensions,
/// never exceeding the radius.
pub fn sample_ball<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vector {
    let direction = sample_direction(rng, dim);
    if dim == 0 {
        return direction;
    }
    let u: f64 = rng.random();
    clamp_norm(direction * (radius * u.powf(1.0 / dim as f64)), radius)
}

/// Uniform direction scaled just inside the sphere of radius `radius`.
pub fn sample_sphere<R: Rng + ?Sized>(rng: &mut R, dim: usize, radius: f64) -> Vector {
    let direction = sample_direction(rng, dim);
    clamp_norm(direction * (radius * (1.0 - 4.0 * f64::EPSILON)), radius)
}

fn sample_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Vector {
    if dim == 0 {
        return Vector::zeros(0);
    }
    loop {
        let g = Vector::from_fn(dim, |_, _| StandardNormal.sample(rng));
        let norm = g.norm();
        if norm > 1e-12 {
            return g / norm;
        }
    }
}

fn clamp_norm(mut v: Vector, radius: f64) -> Vector {
    while v.norm() > radius {
        v *= 1.0 - 4.0 * f64::EPSILON;
    }
    v
}

/// Uniform sample from the probability simplex with `count` vertices.
pub fn sample_simplex<R: Rng + ?Sized>(rng: &mut R, count: usize) -> Result<WeightVector> {
    let draws: Vec<f64> = (0..count).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    WeightVector::new(draws.into_iter().map(|d| d / total).collect())
}
