//! Physical invariants along trajectories.

use num_complex::Complex64;
use proptest::prelude::*;
use qpurify::liouville::{propagate_full, ControlLaw, Modulation, PropagateOptions};
use qpurify::model::{build_initial_state, mu_max, xi_max, DensityState, InitialStateSpec, ModelParams};
use qpurify::ode::{integrate, Options, Output};
use qpurify::reduced::{north_pole_position, radius_rate, x_to_z, z_rhs};

fn state(params: &ModelParams, mu: f64, nu: f64, xi: f64) -> DensityState {
    build_initial_state(&InitialStateSpec::new(mu, nu, Complex64::new(xi, 0.0)), params).unwrap()
}

fn check_density(x0: &DensityState, law: &ControlLaw, p: &ModelParams, t1: f64) {
    let traj = propagate_full(x0, law, p, (0.0, t1), &PropagateOptions::default()).unwrap();
    for s in &traj.states {
        let rho = DensityState::new(std::array::from_fn(|i| s[i]));
        assert!((rho.trace() - 1.0).abs() < 1e-9, "trace {}", rho.trace());
        assert!(rho.min_eigenvalue() >= -1e-8, "eigenvalue {}", rho.min_eigenvalue());
    }
}

#[test]
fn trace_and_positivity_along_resonant_run() {
    let p = ModelParams::default();
    let xi = xi_max(&p.populations());
    let mu = mu_max(Complex64::new(xi, 0.0), &p) / 2.0;
    check_density(&state(&p, mu, 0.0, xi), &ControlLaw::resonant(), &p, 3.0 * p.t0());
}

#[test]
fn trace_and_positivity_in_markovian_regime() {
    let p = ModelParams::default().with_gamma(0.6).unwrap();
    check_density(
        &state(&p, 0.1, -0.05, 0.02),
        &ControlLaw::constant_detuning(0.05),
        &p,
        60.0,
    );
}

#[test]
fn pole_position_is_conserved_without_correlations() {
    for gamma in [0.0, 0.1, 0.2, 0.35] {
        let p = ModelParams::default().with_gamma(gamma).unwrap();
        let x0 = state(&p, 0.1, 0.05, 0.0);
        let traj = propagate_full(
            &x0,
            &ControlLaw::resonant(),
            &p,
            (0.0, 3.0 * p.t0()),
            &Default::default(),
        )
        .unwrap();
        for s in &traj.states {
            let z = x_to_z(&std::array::from_fn(|i| s[i]));
            assert!((north_pole_position(&z) - p.eta).abs() < 1e-9);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn radius_never_grows(
        xi_frac in 0.0..1.0_f64,
        mu_frac in -1.0..1.0_f64,
        angle in 0.0..std::f64::consts::TAU,
        ratio in 0.2..3.5_f64,
    ) {
        let p = ModelParams::default().with_gamma(ratio * ModelParams::DEFAULT_COUPLING).unwrap();
        let xi = xi_frac * xi_max(&p.populations());
        let m = 0.999 * mu_frac * mu_max(Complex64::new(xi, 0.0), &p);
        let x0 = state(&p, m * angle.cos(), m * angle.sin(), xi);
        let modulation = Modulation::resonant(&p);
        let rhs = |_t: f64, z: &[f64; 8]| Ok(z_rhs(z, modulation, &p));
        let mut worst = f64::NEG_INFINITY;
        let mut observe = |_t: f64, z: &[f64; 8], dz: &[f64; 8]| worst = worst.max(radius_rate(z, dz));
        integrate(
            rhs,
            0.0,
            x_to_z(&x0.x),
            3.0 * p.t0(),
            &Output::Steps,
            &[],
            &Options::default(),
            Some(&mut observe),
        )
        .unwrap();
        prop_assert!(worst <= 1e-10, "max dr/dt = {worst:e}");
    }
}
