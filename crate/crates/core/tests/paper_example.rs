//! Regression values for the two-vertex benchmark. Expected numbers were
//! computed independently in double precision with numpy (SVD, pseudoinverse,
//! induced norms) and cvxpy (minimum-eta SDP).

use lpv_observer::harness::fixtures::paper_example;
use lpv_observer::linalg::{norm2, Mat, DEFAULT_RANK_TOL};
use lpv_observer::synthesize::min_feasible_eta;
use lpv_observer::*;

fn dm() -> DecoupledModel {
    decouple(&paper_example().0, DEFAULT_RANK_TOL).unwrap()
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * b.abs().max(1e-300)
}

#[test]
fn decoupling_constants() {
    let dm = dm();
    assert_eq!(dm.p_h, 1);
    assert!(close(dm.sigma[0].powi(2), 26.05, 1e-12));
    assert!(close((&dm.c2 * &dm.g2)[(0, 0)].abs(), 0.036854025476981016, 1e-9));
    assert!(close(dm.m2[(0, 0)].abs(), 27.134077948271862, 1e-9));
    // Every output direction is consumed by the unknown input, so C2 Phi = 0.
    assert!((&dm.c2 * &dm.phi).abs().max() < 1e-12);
}

#[test]
fn error_constants_do_not_depend_on_gain() {
    let dm = dm();
    for gain in [[0.0, 0.0], [-0.3946, 0.5656], [3.0, -7.0]] {
        let ec = error_constants(&dm, &Mat::from_row_slice(2, 1, &gain)).unwrap();
        assert!(close(ec.theta, 1.213057269205116, 1e-9), "{}", ec.theta);
        assert!(close(norm2(&ec.a_e[0]), 1.2018319107760347, 1e-9));
        assert!(close(ec.beta, 19.91660206642295, 1e-9));
        assert!(close(norm2(&ec.v2m2c2), 21.227105546799603, 1e-9));
        assert!(close(norm2(&ec.r), 0.275321794284403, 1e-9));
        assert!(close(ec.input_v_gain, 0.275321794284403 + 27.134077948271866, 1e-9));
    }
}

#[test]
fn optimal_eta_matches_independent_solver() {
    let dm = dm();
    let cert = synthesize_hinf(&dm, &SynthesisOptions::default()).unwrap();
    assert!(close(cert.eta, 15.389792, 1e-4), "eta = {}", cert.eta);
    assert!(cert.verify(&dm).unwrap());
}

#[test]
fn printed_certificate_never_satisfies_the_lmi() {
    let dm = dm();
    let s = Mat::from_row_slice(2, 2, &[0.2745, 0.1933, 0.1933, 0.4200]);
    let y = Mat::from_row_slice(2, 1, &[0.0010, 0.1613]);
    // The complementary output basis is fixed only up to sign; the printed
    // gain pairs with C2 = [-0.4025, 0.6708].
    let flipped = dm.c2[(0, 0)] > 0.0;
    let expected = if flipped {
        -0.12714330415707087
    } else {
        -0.12689144846833839
    };
    let (ok, min_eig) = verify_lmi(&dm, &s, &y, 100.0, -1e-6).unwrap();
    assert!(!ok);
    assert!((min_eig - expected).abs() < 1e-9, "{min_eig}");
    let (ok, _) = verify_lmi(&dm, &s, &(-&y), 100.0, -1e-6).unwrap();
    assert!(!ok);
    assert_eq!(min_feasible_eta(&dm, &s, &y, -1e-6, 1e8, 1e-6).unwrap(), None);
}

#[test]
fn detectability_report() {
    let report = existence_report(&dm(), DetectOptions::default()).unwrap();
    assert!(report.overall_necessary_ok);
    assert_eq!(report.summary(), "strongly detectable: vertex 1 ✓, vertex 2 ✓");
}
