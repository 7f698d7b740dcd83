//! Acceptance criteria. Prints one `criterion N: PASS|FAIL` line each and
//! exits nonzero if any criterion fails.

use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use lpv_observer::harness::fixtures::{convergent_example, paper_example, random_instance};
use lpv_observer::harness::{
    oracle_errors, run_observer, simulate_plant, NoiseMode, PlantTrace, Scenario, WeightMode,
};
use lpv_observer::linalg::{pinv, Mat, Vector, DEFAULT_RANK_TOL};
use lpv_observer::synthesize::min_feasible_eta;
use lpv_observer::*;
use lpv_observer_cli::{run, EXIT_OK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const PAPER_GAIN: [f64; 2] = [-0.3946, 0.5656];
const GAIN_TOL: f64 = 0.05;
const CERT_ETA_LIMIT: f64 = 10.0;
const CERT_MARGIN: f64 = -1e-6;
const ORACLE_TOL: f64 = 1e-9;
const STEADY_TOL: f64 = 1e-12;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../cli/fixtures").join(name)
}

fn lpvobs(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(std::iter::once("lpvobs").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&err).into_owned())
}

fn paper_dm() -> DecoupledModel {
    decouple(&paper_example().0, DEFAULT_RANK_TOL).unwrap()
}

fn paper_certificate() -> (Mat, Mat) {
    (
        Mat::from_row_slice(2, 2, &[0.2745, 0.1933, 0.1933, 0.4200]),
        Mat::from_row_slice(2, 1, &[0.0010, 0.1613]),
    )
}

/// The complementary output basis is defined up to sign, which flips the
/// sign convention of `Y` and the gain.
fn with_both_signs(m: &Mat) -> [Mat; 2] {
    [m.clone(), -m]
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let dm = paper_dm();
    let cert = synthesize_hinf(&dm, &SynthesisOptions::default()).unwrap();
    let elapsed = start.elapsed();
    let target = Mat::from_row_slice(2, 1, &PAPER_GAIN);
    let gain_err = with_both_signs(&target)
        .iter()
        .map(|t| (&cert.l_tilde - t).amax())
        .fold(f64::INFINITY, f64::min);
    let gain_ok = gain_err <= GAIN_TOL;

    let (s, y) = paper_certificate();
    let paper_eta = with_both_signs(&y)
        .iter()
        .filter_map(|y| min_feasible_eta(&dm, &s, y, CERT_MARGIN, 1e8, 1e-9).unwrap())
        .fold(None, |acc: Option<f64>, e| Some(acc.map_or(e, |a| a.min(e))));
    let fallback_ok = paper_eta.is_some_and(|e| cert.eta <= e);
    let fast = elapsed < Duration::from_secs(5);
    outcome(
        (gain_ok || fallback_ok) && fast,
        format!(
            "L_tilde = [{:.4}, {:.4}], max deviation from the reference gain {:.4} (tol {GAIN_TOL}); \
             eta* = {:.6}; smallest eta at which the printed certificate passes: {}; {:.2?}",
            cert.l_tilde[(0, 0)],
            cert.l_tilde[(1, 0)],
            gain_err,
            cert.eta,
            paper_eta.map_or("none".to_string(), |e| e.to_string()),
            elapsed
        ),
    )
}

fn criterion_2() -> Outcome {
    let dm = paper_dm();
    let (s, y) = paper_certificate();
    let mut best = f64::NEG_INFINITY;
    let mut best_eta = 0.0;
    let mut pass = false;
    for y in with_both_signs(&y) {
        // The block is monotone in eta, so the largest allowed eta is decisive.
        let (ok, min_eig) = verify_lmi(&dm, &s, &y, CERT_ETA_LIMIT, CERT_MARGIN).unwrap();
        pass |= ok;
        if min_eig > best {
            best = min_eig;
            best_eta = CERT_ETA_LIMIT;
        }
        if let Some(eta) = min_feasible_eta(&dm, &s, &y, CERT_MARGIN, CERT_ETA_LIMIT, 1e-9).unwrap() {
            pass = true;
            best_eta = eta;
        }
    }
    outcome(
        pass,
        format!(
            "best min block eigenvalue at eta = {best_eta}: {best:.6e} (required >= {CERT_MARGIN:e} relative to tr(S))"
        ),
    )
}

fn criterion_3() -> Outcome {
    let dir = TempDir::new().unwrap();
    let p = |x: &Path| x.to_str().unwrap().to_string();
    let gains = dir.path().join("gains.toml");
    let (code, err) = lpvobs(&[
        "synthesize",
        "--model",
        &p(&fixture("paper_model.toml")),
        "--gains",
        &p(&gains),
    ]);
    if code != EXIT_OK {
        return outcome(false, format!("synthesis failed: {err}"));
    }
    // Second scenario: attack two orders of magnitude above the noise bound.
    let attack = dir.path().join("attack.toml");
    let text = std::fs::read_to_string(fixture("paper_scenario.toml"))
        .unwrap()
        .replace(
            "kind = \"square\"\namplitude = 1.0\nperiod = 20",
            "kind = \"sinusoid\"\namplitude = 50.0\nperiod = 13.0\noffset = 10.0",
        );
    std::fs::write(&attack, text).unwrap();
    let start = Instant::now();
    let (code, err) = lpvobs(&[
        "campaign",
        "--model",
        &p(&fixture("paper_model.toml")),
        "--scenario",
        &p(&fixture("paper_scenario.toml")),
        "--scenario",
        &p(&attack),
        "--gains",
        &p(&gains),
        "--out",
        &p(dir.path()),
        "--trials",
        "1000",
    ]);
    let elapsed = start.elapsed();
    let report = std::fs::read_to_string(dir.path().join("campaign.toml")).unwrap_or_default();
    let count = report
        .lines()
        .find(|l| l.starts_with("violation_count"))
        .unwrap_or("violation_count = ?")
        .to_string();
    outcome(
        code == EXIT_OK && elapsed < Duration::from_secs(60),
        format!("1000 trials x 200 steps, {count}, exit {code}, {elapsed:.2?} {}", err.trim()),
    )
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut worst = 0.0f64;
    let mut chain_ok = true;
    for _ in 0..100 {
        let (model, scenario, gain) = random_instance(&mut rng);
        let dm = decouple(&model, DEFAULT_RANK_TOL).unwrap();
        let constants = error_constants(&dm, &gain).unwrap();
        let plant = simulate_plant(&model, &scenario).unwrap();
        let trace = run_observer(&dm, &gain, &constants, &plant, RadiusMode::WorstCase).unwrap();
        let oracle = oracle_errors(&dm, &gain, constants.theta, &plant).unwrap();
        for row in &trace.rows {
            let dx = (&row.x_true - &row.x_hat - &oracle.x_tilde[row.k]).norm();
            let dd = (&row.d_true - &row.d_hat - &oracle.d_tilde[row.k - 1]).norm();
            worst = worst.max(dx).max(dd);
        }
        chain_ok &= oracle
            .intermediates
            .check_bound_chain(constants.theta, constants.eta_bar, 1e-9)
            .is_ok();
    }
    outcome(
        worst <= ORACLE_TOL && chain_ok,
        format!("100 random instances, max deviation {worst:.3e} (tol {ORACLE_TOL:e}), bound chain {}", if chain_ok { "ok" } else { "broken" }),
    )
}

fn steady_state_check(model: &LpvModel, scenario: &Scenario, dm: &DecoupledModel, gain: &Mat) -> (bool, String) {
    let constants = error_constants(dm, gain).unwrap();
    let (dx_inf, _) = match steady_state_radii(&constants) {
        Ok(r) => r,
        Err(e) => return (false, e.to_string()),
    };
    let plant = simulate_plant(model, scenario).unwrap();
    let trace = run_observer(dm, gain, &constants, &plant, RadiusMode::WorstCase).unwrap();
    let k = trace.rows.len();
    let last = trace.rows.last().unwrap().delta_x;
    let gap = (last - dx_inf).abs();
    let bound = constants.theta.powi(k as i32) * (model.delta0_x - dx_inf).abs() + STEADY_TOL;
    let gaps: Vec<f64> = std::iter::once(model.delta0_x)
        .chain(trace.rows.iter().map(|r| r.delta_x))
        .map(|d| (d - dx_inf).abs())
        .collect();
    let monotone = gaps.windows(2).all(|w| w[1] <= w[0] + STEADY_TOL);
    (
        gap <= bound && monotone,
        format!("theta = {:.4e}, |delta_x_K - delta_x_inf| = {gap:.3e} <= {bound:.3e}, monotone approach: {monotone}", constants.theta),
    )
}

fn criterion_5() -> Outcome {
    let (model, scenario) = paper_example();
    let dm = paper_dm();
    let primary = match synthesize_convergent(&dm, &SynthesisOptions::default()) {
        Ok(cert) => steady_state_check(&model, &scenario, &dm, &cert.l_tilde),
        Err(e) => (false, format!("benchmark: {e}")),
    };
    // The single-channel variant of the same plant does admit a contracting
    // gain; reported for context only.
    let (cm, cs) = convergent_example();
    let cdm = decouple(&cm, DEFAULT_RANK_TOL).unwrap();
    let context = match synthesize_convergent(&cdm, &SynthesisOptions::default()) {
        Ok(cert) => steady_state_check(&cm, &cs, &cdm, &cert.l_tilde).1,
        Err(e) => e.to_string(),
    };
    outcome(primary.0, format!("{}; single-channel variant: {context}", primary.1))
}

fn criterion_6() -> Outcome {
    let dir = TempDir::new().unwrap();
    let model_path = fixture("undetectable_model.toml");
    let (code, _) = lpvobs(&["check", "--model", model_path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    let model = lpv_observer_cli::config::load_model(&model_path).unwrap();
    let dm = decouple(&model, DEFAULT_RANK_TOL).unwrap();
    let forced = SynthesisOptions {
        force: true,
        ..SynthesisOptions::default()
    };
    let result = synthesize_hinf(&dm, &forced);
    let infeasible = matches!(result, Err(Error::Infeasible { .. }));
    let status = match &result {
        Ok(c) => format!("unexpectedly solved at eta = {}", c.eta),
        Err(e) => e.to_string(),
    };
    outcome(code != EXIT_OK && infeasible, format!("check exit {code}; synthesis: {status}"))
}

fn max_abs(m: &Mat) -> f64 {
    m.amax()
}

fn random_mat(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Mat {
    Mat::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

fn property_failures() -> Vec<String> {
    let mut failures = Vec::new();
    let mut fail = |name: &str, value: f64, tol: f64| {
        if !(value <= tol) {
            failures.push(format!("{name}: {value:e} > {tol:e}"));
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // Pseudoinverse axioms on random, possibly rank-deficient matrices.
    for _ in 0..50 {
        let (r, c) = (rng.random_range(1..=5), rng.random_range(1..=5));
        let k = rng.random_range(1..=r.min(c));
        let a = random_mat(&mut rng, r, k) * random_mat(&mut rng, k, c);
        let x = pinv(&a, DEFAULT_RANK_TOL).unwrap();
        let scale = a.amax().max(x.amax()).powi(3).max(1.0);
        fail("A X A = A", max_abs(&(&a * &x * &a - &a)) / scale, 1e-10);
        fail("X A X = X", max_abs(&(&x * &a * &x - &x)) / scale, 1e-10);
        fail("(A X)^T = A X", max_abs(&((&a * &x).transpose() - &a * &x)), 1e-10);
        fail("(X A)^T = X A", max_abs(&((&x * &a).transpose() - &x * &a)), 1e-10);
    }

    let mut models: Vec<(LpvModel, Scenario, Option<Mat>)> = vec![
        {
            let (m, s) = paper_example();
            (m, s, None)
        },
        {
            let (m, s) = convergent_example();
            (m, s, None)
        },
    ];
    for _ in 0..20 {
        let (m, s, g) = random_instance(&mut rng);
        models.push((m, s, Some(g)));
    }

    for (model, scenario, gain) in &models {
        let dm = decouple(model, DEFAULT_RANK_TOL).unwrap();
        let (l, p, n) = (model.dims.l, model.dims.p, model.dims.n);
        let u = Mat::from_columns(&dm.u1.column_iter().chain(dm.u2.column_iter()).collect::<Vec<_>>());
        let v = Mat::from_columns(&dm.v1.column_iter().chain(dm.v2.column_iter()).collect::<Vec<_>>());
        fail("U^T U = I", max_abs(&(u.transpose() * &u - Mat::identity(l, l))), 1e-10);
        fail("V^T V = I", max_abs(&(v.transpose() * &v - Mat::identity(p, p))), 1e-10);
        let y = Vector::from_fn(l, |_, _| rng.random_range(-1.0..1.0));
        let (z1, z2) = dm.split_output(&y).unwrap();
        fail("|T y| = |y|", (z1.norm_squared() + z2.norm_squared() - y.norm_squared()).abs(), 1e-12);
        let sigma = Mat::from_diagonal(&dm.sigma);
        let h_back = &dm.u1 * &sigma * dm.v1.transpose();
        fail("H = U1 S V1^T", max_abs(&(h_back - &model.h)) / model.h.amax().max(1.0), 1e-10);
        fail("M1 S = I", max_abs(&(&dm.m1 * &sigma - Mat::identity(dm.p_h, dm.p_h))), 1e-10);
        let q2 = p - dm.p_h;
        fail("M2 C2 G2 = I", max_abs(&(&dm.m2 * &dm.c2 * &dm.g2 - Mat::identity(q2, q2))), 1e-10);

        let gain = match gain {
            Some(g) => g.clone(),
            None => synthesize_hinf(&dm, &SynthesisOptions::default()).unwrap().l_tilde,
        };
        let full = &gain * &dm.t2;
        fail("L U1 = 0", max_abs(&(full * &dm.u1)), 1e-12);
        let constants = error_constants(&dm, &gain).unwrap();

        // Zero-error absorption.
        let quiet = Scenario {
            horizon: scenario.horizon.min(100),
            noise: NoiseMode::Zero,
            x0_true: Some(model.x0_hat.iter().copied().collect()),
            ..scenario.clone()
        };
        let plant = simulate_plant(model, &quiet).unwrap();
        let trace = run_observer(&dm, &gain, &constants, &plant, RadiusMode::WorstCase).unwrap();
        let scale = trace
            .rows
            .iter()
            .map(|r| r.x_true.amax().max(r.d_true.amax()))
            .fold(1.0, f64::max);
        let absorbed = trace.rows.iter().map(|r| r.err_x.max(r.err_d)).fold(0.0, f64::max);
        fail("zero-error absorption", absorbed / scale, 1e-10);

        // Vertex selection against the vertex's own LTI filter.
        for j in 0..model.dims.vertices {
            let pinned = Scenario {
                weights: WeightMode::FixedVertex { vertex: j },
                ..scenario.clone()
            };
            let plant = simulate_plant(model, &pinned).unwrap();
            let lti = LpvModel::new(
                vec![model.a[j].clone()],
                vec![model.b[j].clone()],
                model.c.clone(),
                vec![model.d[j].clone()],
                model.g.clone(),
                model.h.clone(),
                model.eta_w,
                model.eta_v,
                model.x0_hat.clone(),
                model.delta0_x,
            );
            let lti_dm = decouple(&lti, DEFAULT_RANK_TOL).unwrap();
            let lti_constants = error_constants(&lti_dm, &gain).unwrap();
            let lti_plant = PlantTrace {
                lambda: plant.lambda.iter().map(|_| WeightVector::vertex(1, 0)).collect(),
                w: plant.w.iter().map(|w| vec![w[j].clone()]).collect(),
                v: plant.v.iter().map(|v| vec![v[j].clone()]).collect(),
                ..plant.clone()
            };
            let a = run_observer(&dm, &gain, &constants, &plant, RadiusMode::WorstCase).unwrap();
            let b = run_observer(&lti_dm, &gain, &lti_constants, &lti_plant, RadiusMode::WorstCase).unwrap();
            let gap = a
                .rows
                .iter()
                .zip(&b.rows)
                .map(|(ra, rb)| (&ra.x_hat - &rb.x_hat).amax().max((&ra.d_hat - &rb.d_hat).amax()))
                .fold(0.0, f64::max);
            let scale = a.rows.iter().map(|r| r.x_hat.amax().max(r.d_hat.amax())).fold(1.0, f64::max);
            fail("vertex selection", gap / scale, 1e-12);
        }

        // Bound chain on the closed-form errors.
        let plant = simulate_plant(model, scenario).unwrap();
        let oracle = oracle_errors(&dm, &gain, constants.theta, &plant).unwrap();
        let worst = oracle
            .intermediates
            .b_e_norms
            .iter()
            .enumerate()
            .map(|(k, b)| b - constants.theta.powi(k as i32))
            .fold(f64::NEG_INFINITY, f64::max);
        fail("|B_e_k| <= theta^k", worst, 1e-9);
        if let Err(e) = oracle.intermediates.check_bound_chain(constants.theta, constants.eta_bar, 1e-9) {
            fail(&format!("bound chain ({e})"), f64::INFINITY, 0.0);
        }
        let _ = n;
    }
    failures
}

fn criterion_7() -> Outcome {
    let failures = property_failures();
    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            "pseudoinverse axioms, transform identities, absorption, vertex selection, bound chain on 22 models".into()
        } else {
            failures.join("; ")
        },
    )
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 7] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
    ];
    let filter: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut failed = 0;
    for (n, check) in criteria {
        if !filter.is_empty() && !filter.contains(&n) {
            continue;
        }
        let result = panic::catch_unwind(AssertUnwindSafe(check))
            .unwrap_or_else(|_| outcome(false, "panicked"));
        println!(
            "criterion {n}: {} {}",
            if result.pass { "PASS" } else { "FAIL" },
            result.detail
        );
        failed += usize::from(!result.pass);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
