use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use lpv_observer::harness::{
    containment_campaign, run_observer, simulate_plant, CampaignConfig, CampaignReport,
    RatioSummary, SimulationTrace,
    CONTAINMENT_ABS_TOL,
};
use lpv_observer::linalg::{Mat, DEFAULT_RANK_TOL};
use lpv_observer::{
    decouple, decouple_unchecked, error_constants, existence_report, steady_state_radii,
    synthesize_convergent, synthesize_hinf, DecoupledModel, DetectOptions, DetectabilityReport,
    ErrorConstants, RadiusMode, SynthesisOptions, ValidationReport,
};
use serde::Serialize;

use crate::config::{self, GainsFile};
use crate::{CheckArgs, CampaignArgs, CliError, ModeArg, RunArgs, SimulateArgs, SynthesizeArgs};

type Out<'a> = &'a mut dyn Write;

fn say(out: Out, line: impl AsRef<str>) -> Result<(), CliError> {
    writeln!(out, "{}", line.as_ref()).map_err(|e| CliError::Io(format!("stdout: {e}")))
}

fn fmt_mat(m: &Mat) -> String {
    let rows: Vec<String> = m
        .row_iter()
        .map(|r| {
            let cells: Vec<String> = r.iter().map(|v| format!("{v:.6}")).collect();
            format!("[{}]", cells.join(", "))
        })
        .collect();
    format!("[{}]", rows.join(", "))
}

#[derive(Serialize)]
struct CheckReport {
    schema: &'static str,
    accepted: bool,
    summary: String,
    validation: ValidationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    detectability: Option<DetectabilityReport>,
}

pub fn check(args: &CheckArgs, out: Out) -> Result<(), CliError> {
    let model = config::load_model(&args.model)?;
    let validation = model.validate(DEFAULT_RANK_TOL)?;
    for failure in validation.failures() {
        say(out, format!("FAIL {}: {}", failure.name, failure.detail))?;
    }
    let detectability = if validation.accepted() {
        let dm = decouple_unchecked(&model, DEFAULT_RANK_TOL)?;
        Some(existence_report(&dm, DetectOptions::default())?)
    } else {
        None
    };
    let summary = match &detectability {
        Some(r) => r.summary(),
        None => "model rejected by validation".to_string(),
    };
    let accepted = detectability
        .as_ref()
        .is_some_and(|r| r.overall_necessary_ok);
    say(out, &summary)?;
    if let Some(r) = &detectability {
        say(out, format!("rank condition: {}", if r.rank_condition_ok { "ok" } else { "violated" }))?;
    }
    let report = CheckReport {
        schema: "lpv-observer/check/1",
        accepted,
        summary: summary.clone(),
        validation,
        detectability,
    };
    config::write(&args.out.join("check.toml"), &config::to_toml(&report)?)?;
    if accepted {
        Ok(())
    } else {
        Err(CliError::Failed(format!("necessary conditions not met: {summary}")))
    }
}

fn print_constants(out: Out, constants: &ErrorConstants) -> Result<(), CliError> {
    say(out, format!("theta   = {}", constants.theta))?;
    say(out, format!("beta    = {}", constants.beta))?;
    say(out, format!("eta_bar = {}", constants.eta_bar))?;
    match steady_state_radii(constants) {
        Ok((dx, dd)) => {
            say(out, format!("delta_x_inf = {dx}"))?;
            say(out, format!("delta_d_inf = {dd}"))
        }
        Err(_) => say(out, "radii grow without bound (theta >= 1)"),
    }
}

pub fn synthesize(args: &SynthesizeArgs, out: Out) -> Result<(), CliError> {
    let model = config::load_model(&args.model)?;
    let dm = decouple(&model, DEFAULT_RANK_TOL)?;
    let mut opts = SynthesisOptions {
        force: args.force,
        allow_ill_conditioned: args.allow_ill_conditioned,
        ..SynthesisOptions::default()
    };
    if let Some(m) = args.margin {
        opts.margin = m;
    }
    let cert = match args.mode {
        ModeArg::Optimal => synthesize_hinf(&dm, &opts)?,
        ModeArg::Convergent => synthesize_convergent(&dm, &opts)?,
    };
    let constants = error_constants(&dm, &cert.l_tilde)?;
    say(out, format!("status  = {}", cert.solver_status))?;
    say(out, format!("eta     = {}", cert.eta))?;
    say(out, format!("L_tilde = {}", fmt_mat(&cert.l_tilde)))?;
    print_constants(out, &constants)?;
    for w in &cert.warnings {
        say(out, format!("warning: {w}"))?;
    }
    let path = args
        .gains
        .clone()
        .unwrap_or_else(|| args.out.join("gains.toml"));
    config::write(&path, &config::to_toml(&GainsFile::new(&cert, &constants))?)?;
    say(out, format!("wrote {}", path.display()))
}

/// Model, decoupling, verified gain and constants for a run.
struct Design {
    model: lpv_observer::LpvModel,
    dm: DecoupledModel,
    gain: Mat,
    constants: ErrorConstants,
}

fn load_design(args: &RunArgs, out: Out) -> Result<Design, CliError> {
    let model = config::load_model(&args.model)?;
    let dm = decouple(&model, DEFAULT_RANK_TOL)?;
    let gains = config::load_gains(&args.gains)?;
    let cert = gains
        .certificate(&dm, args.margin)
        .map_err(|e| e.context(&args.gains.display().to_string()))?;
    let mut constants = error_constants(&dm, &cert.l_tilde)?;
    gains.check_constants(&constants)?;
    if let Some(factor) = args.corrupt_theta {
        if !(factor.is_finite() && factor >= 0.0) {
            return Err(CliError::Usage(format!("--corrupt-theta must be a nonnegative factor, got {factor}")));
        }
        constants = constants.with_theta(constants.theta * factor);
        say(out, format!("negative control: theta replaced by {}", constants.theta))?;
    }
    Ok(Design {
        model,
        dm,
        gain: cert.l_tilde,
        constants,
    })
}

fn ratio(err: f64, radius: f64) -> f64 {
    if radius > 0.0 {
        err / radius
    } else if err == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

#[derive(Serialize)]
struct SimulationSummary {
    schema: &'static str,
    /// Seeds are written as strings: TOML integers are signed 64-bit.
    seed: String,
    horizon: usize,
    radius_mode: RadiusMode,
    violations: usize,
    max_err_x: f64,
    max_tightness_x: f64,
    max_tightness_d: f64,
    final_delta_x: f64,
    final_delta_d: f64,
    theta: f64,
    eta_bar: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_x_inf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_d_inf: Option<f64>,
}

fn write_trace(path: &Path, trace: &SimulationTrace) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    }
    let io = |e: std::io::Error| CliError::Io(format!("cannot write {}: {e}", path.display()));
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    trace.write_csv(&mut w).map_err(io)?;
    w.flush().map_err(io)
}

pub fn simulate(args: &SimulateArgs, out: Out) -> Result<(), CliError> {
    let design = load_design(&args.run, out)?;
    let mut scenario = config::load_scenario(&args.scenario)?;
    if let Some(seed) = args.run.seed {
        scenario.seed = seed;
    }
    scenario
        .validate(&design.model)
        .map_err(|e| CliError::from(e).context(&args.scenario.display().to_string()))?;
    let mode = RadiusMode::from(args.run.radius_mode);
    let plant = simulate_plant(&design.model, &scenario)?;
    let trace = run_observer(&design.dm, &design.gain, &design.constants, &plant, mode)?;

    let csv = args.run.out.join("trace.csv");
    write_trace(&csv, &trace)?;
    let violations = trace.violations(CONTAINMENT_ABS_TOL);
    let last = trace.rows.last();
    let steady = steady_state_radii(&design.constants).ok();
    let summary = SimulationSummary {
        schema: "lpv-observer/simulation/1",
        seed: scenario.seed.to_string(),
        horizon: scenario.horizon,
        radius_mode: mode,
        violations: violations.len(),
        max_err_x: trace.max_error_x(),
        max_tightness_x: trace
            .rows
            .iter()
            .map(|r| ratio(r.err_x, r.delta_x))
            .fold(0.0, f64::max),
        max_tightness_d: trace
            .rows
            .iter()
            .map(|r| ratio(r.err_d, r.delta_d))
            .fold(0.0, f64::max),
        final_delta_x: last.map_or(design.model.delta0_x, |r| r.delta_x),
        final_delta_d: last.map_or(0.0, |r| r.delta_d),
        theta: design.constants.theta,
        eta_bar: design.constants.eta_bar,
        delta_x_inf: steady.map(|s| s.0),
        delta_d_inf: steady.map(|s| s.1),
    };
    config::write(&args.run.out.join("summary.toml"), &config::to_toml(&summary)?)?;
    say(out, format!("steps         = {}", scenario.horizon))?;
    say(out, format!("violations    = {}", summary.violations))?;
    say(out, format!("max |x~|/dx   = {}", summary.max_tightness_x))?;
    say(out, format!("max |d~|/dd   = {}", summary.max_tightness_d))?;
    say(out, format!("final delta_x = {}", summary.final_delta_x))?;
    say(out, format!("final delta_d = {}", summary.final_delta_d))?;
    if let Some(dx) = summary.delta_x_inf {
        say(out, format!("delta_x_inf   = {dx}"))?;
    }
    say(out, format!("wrote {}", csv.display()))?;
    match violations.first() {
        None => Ok(()),
        Some(v) => Err(CliError::Containment(format!(
            "{} containment violations; first at step {} ({:?}: error {} > radius {})",
            violations.len(),
            v.step,
            v.kind,
            v.error,
            v.radius
        ))),
    }
}

#[derive(Serialize)]
struct ViolationEntry {
    trial: usize,
    seed: String,
    step: usize,
    kind: String,
    error: f64,
    radius: f64,
}

#[derive(Serialize)]
struct CampaignFile {
    schema: &'static str,
    trials: usize,
    master_seed: String,
    radius_mode: RadiusMode,
    steps_checked: usize,
    violation_count: usize,
    theta: f64,
    eta_bar: f64,
    final_delta_x: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    delta_x_inf: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steady_state_gap: Option<f64>,
    tightness_x: RatioSummary,
    tightness_d: RatioSummary,
    violations: Vec<ViolationEntry>,
}

impl CampaignFile {
    fn new(report: &CampaignReport, mode: RadiusMode) -> Self {
        Self {
            schema: "lpv-observer/campaign/1",
            trials: report.trials,
            master_seed: report.master_seed.to_string(),
            radius_mode: mode,
            steps_checked: report.steps_checked,
            violation_count: report.violation_count,
            theta: report.theta,
            eta_bar: report.eta_bar,
            final_delta_x: report.final_delta_x,
            delta_x_inf: report.delta_x_inf,
            steady_state_gap: report.steady_state_gap,
            tightness_x: report.tightness_x.clone(),
            tightness_d: report.tightness_d.clone(),
            violations: report
                .violations
                .iter()
                .map(|v| ViolationEntry {
                    trial: v.trial,
                    seed: v.seed.to_string(),
                    step: v.step,
                    kind: v.kind.clone(),
                    error: v.error,
                    radius: v.radius,
                })
                .collect(),
        }
    }
}

pub fn campaign(args: &CampaignArgs, out: Out) -> Result<(), CliError> {
    let design = load_design(&args.run, out)?;
    let scenarios = args
        .scenario
        .iter()
        .map(|p| {
            let s = config::load_scenario(p)?;
            s.validate(&design.model)
                .map_err(|e| CliError::from(e).context(&p.display().to_string()))?;
            Ok(s)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let master_seed = args.run.seed.unwrap_or(scenarios[0].seed);
    let trials = usize::try_from(args.trials)
        .map_err(|_| CliError::Usage("--trials is too large".into()))?;
    let cfg = CampaignConfig {
        mode: args.run.radius_mode.into(),
        ..CampaignConfig::new(trials, master_seed)
    };
    let report = containment_campaign(&design.dm, &design.gain, &design.constants, &scenarios, &cfg)?;
    let file = CampaignFile::new(&report, cfg.mode);
    config::write(&args.run.out.join("campaign.toml"), &config::to_toml(&file)?)?;
    say(out, format!("trials        = {}", report.trials))?;
    say(out, format!("master seed   = {}", report.master_seed))?;
    say(out, format!("steps checked = {}", report.steps_checked))?;
    say(out, format!("violations    = {}", report.violation_count))?;
    say(
        out,
        format!(
            "tightness x   = max {:.4} mean {:.4} p95 {:.4}",
            report.tightness_x.max, report.tightness_x.mean, report.tightness_x.p95
        ),
    )?;
    say(
        out,
        format!(
            "tightness d   = max {:.4} mean {:.4} p95 {:.4}",
            report.tightness_d.max, report.tightness_d.mean, report.tightness_d.p95
        ),
    )?;
    if let Some(gap) = report.steady_state_gap {
        say(out, format!("steady gap    = {gap:e}"))?;
    }
    report.check().map_err(|e| CliError::Containment(e.to_string()))
}
