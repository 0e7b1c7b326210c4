use nalgebra::DMatrix;
use proptest::prelude::*;
use spectral_dispersal::linalg::affine_family;
use spectral_dispersal::odeint::{integrate, integrate_to_equilibrium, IntegratorConfig, Termination};
use spectral_dispersal::spectral::principal_eigen;

fn linear(m: DMatrix<f64>) -> impl Fn(f64, &[f64], &mut [f64]) {
    move |_, y, out| {
        for i in 0..y.len() {
            out[i] = (0..y.len()).map(|j| m[(i, j)] * y[j]).sum();
        }
    }
}

fn loose(rel: f64) -> IntegratorConfig {
    IntegratorConfig { rel_tol: rel, abs_tol: rel * 1e-2, clamp_nonnegative: false, ..IntegratorConfig::default() }
}

#[test]
fn principal_mode_grows_at_its_eigenvalue() {
    let a = DMatrix::from_row_slice(2, 2, &[-0.5, 1.0, 0.5, -1.0]);
    let m = affine_family(&a, &[1.0, 2.0], 1.0);
    let u = principal_eigen(&m, 1e-14).unwrap().right;
    let tr = integrate(linear(m), u.as_slice(), (0.0, 1.0), &IntegratorConfig::default()).unwrap();
    for (y, u0) in tr.last_state().iter().zip(u.iter()) {
        let exact = 1.5f64.exp() * u0;
        assert!(((y - exact) / exact).abs() < 1e-5);
    }
}

#[test]
fn error_shrinks_with_tolerance() {
    // Harmonic oscillator over two periods.
    let rhs = |_: f64, y: &[f64], out: &mut [f64]| {
        out[0] = y[1];
        out[1] = -y[0];
    };
    let t1 = 4.0 * std::f64::consts::PI;
    let errs: Vec<f64> = [1e-4, 1e-6, 1e-8, 1e-10]
        .iter()
        .map(|&tol| {
            let tr = integrate(rhs, &[1.0, 0.0], (0.0, t1), &loose(tol)).unwrap();
            let y = tr.last_state();
            (y[0] - 1.0).abs().max(y[1].abs())
        })
        .collect();
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
    assert!(errs[3] < 1e-8);
}

#[test]
fn forward_then_backward_returns_home() {
    let rhs = |t: f64, y: &[f64], out: &mut [f64]| {
        out[0] = -0.3 * y[0] + y[1].sin();
        out[1] = t.cos() - 0.1 * y[1] * y[0];
    };
    let y0 = [0.4, -1.2];
    let fwd = integrate(rhs, &y0, (0.0, 5.0), &loose(1e-11)).unwrap();
    let back = integrate(rhs, fwd.last_state(), (5.0, 0.0), &loose(1e-11)).unwrap();
    assert_eq!(back.last_time(), 0.0);
    for (a, b) in back.last_state().iter().zip(&y0) {
        assert!((a - b).abs() < 1e-8);
    }
}

#[test]
fn stiff_decay_reports_failure_when_starved() {
    let cfg = IntegratorConfig { max_steps: 20, ..IntegratorConfig::default() };
    let tr = integrate(|_, y, out: &mut [f64]| out[0] = -1e4 * (y[0] - 1.0), &[0.0], (0.0, 10.0), &cfg).unwrap();
    assert_eq!(tr.termination, Termination::StepFailure);
    assert!(tr.last_time() < 10.0);
}

#[test]
fn equilibrium_search_respects_time_cap() {
    let cfg = IntegratorConfig { time_cap: 50.0, ..IntegratorConfig::default() };
    // Slow drift that never settles within the cap.
    let (y, tr) = integrate_to_equilibrium(|_, _, out: &mut [f64]| out[0] = 1.0, &[0.0], &cfg).unwrap();
    assert!(!matches!(tr.termination, Termination::Converged { .. }));
    assert!((y[0] - tr.last_time()).abs() < 1e-9);
    assert!(tr.last_time() <= 50.0 + 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trajectories_are_well_formed(entries in prop::collection::vec(-1.0f64..1.0, 9), y0 in prop::collection::vec(-2.0f64..2.0, 3), t1 in 0.1f64..10.0) {
        let m = DMatrix::from_row_slice(3, 3, &entries);
        let tr = integrate(linear(m.clone()), &y0, (0.0, t1), &loose(1e-9)).unwrap();
        prop_assert_eq!(tr.termination, Termination::ReachedEnd);
        prop_assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(tr.states.iter().all(|s| s.len() == 3));
        prop_assert_eq!(tr.times.len(), tr.states.len());
        prop_assert_eq!(tr.last_time(), t1);
        // Matrix exponential oracle.
        let exact = (m * t1).exp() * nalgebra::DVector::from_column_slice(&y0);
        let scale = exact.amax().max(1.0);
        for (a, b) in tr.last_state().iter().zip(exact.iter()) {
            prop_assert!((a - b).abs() < 1e-6 * scale);
        }
    }
}
