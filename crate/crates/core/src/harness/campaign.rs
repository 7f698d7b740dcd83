use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decouple::DecoupledModel;
use crate::error::{Error, Result};
use crate::harness::scenario::Scenario;
use crate::harness::simulate::{run_observer, simulate_plant, ViolationKind, CONTAINMENT_ABS_TOL};
use crate::linalg::Mat;
use crate::observer::{steady_state_radii, RadiusMode};
use crate::synthesize::ErrorConstants;

#[derive(Debug, Clone)]
pub struct CampaignConfig {
    pub trials: usize,
    pub master_seed: u64,
    pub mode: RadiusMode,
    pub abs_tol: f64,
}

impl CampaignConfig {
    pub fn new(trials: usize, master_seed: u64) -> Self {
        Self {
            trials,
            master_seed,
            mode: RadiusMode::WorstCase,
            abs_tol: CONTAINMENT_ABS_TOL,
        }
    }
}

/// Seed of trial `trial` derived from the master seed.
pub fn trial_seed(master_seed: u64, trial: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(trial as u64);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolationRecord {
    pub trial: usize,
    pub seed: u64,
    pub step: usize,
    pub kind: String,
    pub error: f64,
    pub radius: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RatioSummary {
    pub max: f64,
    pub mean: f64,
    pub p50: f64,
    pub p95: f64,
    pub p99: f64,
}

impl RatioSummary {
    fn from_samples(mut samples: Vec<f64>) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        samples.sort_by(f64::total_cmp);
        let pick = |q: f64| samples[((samples.len() - 1) as f64 * q).round() as usize];
        Self {
            max: *samples.last().unwrap(),
            mean: samples.iter().sum::<f64>() / samples.len() as f64,
            p50: pick(0.5),
            p95: pick(0.95),
            p99: pick(0.99),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignReport {
    pub trials: usize,
    pub master_seed: u64,
    pub steps_checked: usize,
    pub violation_count: usize,
    /// Violations in trial order, truncated to the first 100.
    pub violations: Vec<ViolationRecord>,
    pub tightness_x: RatioSummary,
    pub tightness_d: RatioSummary,
    pub theta: f64,
    pub eta_bar: f64,
    pub final_delta_x: f64,
    pub delta_x_inf: Option<f64>,
    /// `|delta_x_K - delta_x_inf|` when the radii converge.
    pub steady_state_gap: Option<f64>,
}

impl CampaignReport {
    pub fn passed(&self) -> bool {
        self.violation_count == 0
    }

    /// Converts the first recorded violation into an error.
    pub fn check(&self) -> Result<()> {
        match self.violations.first() {
            None => Ok(()),
            Some(v) => Err(Error::ContainmentViolation {
                trial: v.trial,
                seed: v.seed,
                step: v.step,
                detail: format!(
                    "{} error {:e} exceeds radius {:e} ({} violations in total)",
                    v.kind, v.error, v.radius, self.violation_count
                ),
            }),
        }
    }
}

struct TrialOutcome {
    violations: Vec<ViolationRecord>,
    ratios_x: Vec<f64>,
    ratios_d: Vec<f64>,
    final_delta_x: f64,
}

fn ratio(error: f64, radius: f64) -> f64 {
    if radius > 0.0 {
        error / radius
    } else if error == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Monte-Carlo containment check. Trial `t` runs scenario
/// `scenarios[t % len]` reseeded with [`trial_seed`]; trials run in parallel.
pub fn containment_campaign(
    dm: &DecoupledModel,
    l_tilde: &Mat,
    constants: &ErrorConstants,
    scenarios: &[Scenario],
    config: &CampaignConfig,
) -> Result<CampaignReport> {
    if config.trials == 0 {
        return Err(Error::InvalidInput("trials must be positive".into()));
    }
    if scenarios.is_empty() {
        return Err(Error::InvalidInput("no scenarios given".into()));
    }
    for s in scenarios {
        s.validate(&dm.model)?;
    }

    let outcomes = (0..config.trials)
        .into_par_iter()
        .map(|trial| -> Result<TrialOutcome> {
            let seed = trial_seed(config.master_seed, trial);
            let scenario = scenarios[trial % scenarios.len()].with_seed(seed);
            let plant = simulate_plant(&dm.model, &scenario)?;
            let trace = run_observer(dm, l_tilde, constants, &plant, config.mode)?;
            let violations = trace
                .violations(config.abs_tol)
                .into_iter()
                .map(|v| ViolationRecord {
                    trial,
                    seed,
                    step: v.step,
                    kind: match v.kind {
                        ViolationKind::State => "state".into(),
                        ViolationKind::Input => "input".into(),
                    },
                    error: v.error,
                    radius: v.radius,
                })
                .collect();
            Ok(TrialOutcome {
                violations,
                ratios_x: trace.rows.iter().map(|r| ratio(r.err_x, r.delta_x)).collect(),
                ratios_d: trace.rows.iter().map(|r| ratio(r.err_d, r.delta_d)).collect(),
                final_delta_x: trace.rows.last().map_or(dm.model.delta0_x, |r| r.delta_x),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut violations = Vec::new();
    let mut violation_count = 0;
    let mut ratios_x = Vec::new();
    let mut ratios_d = Vec::new();
    let mut final_delta_x = 0.0f64;
    for outcome in outcomes {
        violation_count += outcome.violations.len();
        for v in outcome.violations {
            if violations.len() < 100 {
                violations.push(v);
            }
        }
        ratios_x.extend(outcome.ratios_x);
        ratios_d.extend(outcome.ratios_d);
        final_delta_x = final_delta_x.max(outcome.final_delta_x);
    }
    let delta_x_inf = steady_state_radii(constants).ok().map(|(dx, _)| dx);
    Ok(CampaignReport {
        trials: config.trials,
        master_seed: config.master_seed,
        steps_checked: ratios_x.len(),
        violation_count,
        violations,
        tightness_x: RatioSummary::from_samples(ratios_x),
        tightness_d: RatioSummary::from_samples(ratios_d),
        theta: constants.theta,
        eta_bar: constants.eta_bar,
        final_delta_x,
        delta_x_inf,
        steady_state_gap: delta_x_inf.map(|inf| (final_delta_x - inf).abs()),
    })
}
