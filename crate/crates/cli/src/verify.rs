//! Cross-check suite: the full generator against the reduced coordinates,
//! conservation laws and the closed forms.
//!
//! Every check drives the same 16-coordinate right-hand side, which can be
//! swapped out so that a corrupted generator is caught.

use num_complex::Complex64;
use qpurify::control::t_min_uncorrelated;
use qpurify::liouville::{propagate_x_with, rhs_x, ControlLaw, Modulation, PropagateOptions};
use qpurify::model::{build_initial_state, mu_max, xi_max, DensityState, InitialStateSpec, ModelParams};
use qpurify::ode::{integrate, linspace, Options, Output, Stats, Tolerances};
use qpurify::reduced::{
    north_pole_position, propagate_reduced, radius_rate, s2_resonant_solution, x_to_z, ReducedState,
};
use qpurify::trajectory::Trajectory;
use qpurify::EventKind;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;
use crate::output::{Cell, Report};

/// Rotating-frame generator in the 16 real coordinates.
pub type FullRhs = dyn Fn(&[f64; 16], Modulation, &ModelParams) -> [f64; 16] + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub property: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub outcome: Outcome,
    pub stats: Stats,
}

impl Check {
    fn measured(property: &'static str, residual: f64, tolerance: f64, stats: Stats) -> Self {
        // a non-finite residual is a failure
        let outcome = if residual <= tolerance {
            Outcome::Pass
        } else {
            Outcome::Fail
        };
        Self {
            property,
            residual,
            tolerance,
            outcome,
            stats,
        }
    }

    fn skipped(property: &'static str, tolerance: f64) -> Self {
        Self {
            property,
            residual: 0.0,
            tolerance,
            outcome: Outcome::Skipped,
            stats: Stats::default(),
        }
    }
}

fn state(p: &ModelParams, mu: f64, xi: f64) -> Result<DensityState> {
    Ok(build_initial_state(
        &InitialStateSpec::new(mu, 0.0, Complex64::new(xi, 0.0)),
        p,
    )?)
}

fn run_full(rhs: &FullRhs, p: &ModelParams, x0: &DensityState, t1: f64, opts: &PropagateOptions) -> Result<Trajectory> {
    let m = Modulation::resonant(p);
    Ok(propagate_x_with(|_t, x| Ok(rhs(x, m, p)), x0, (0.0, t1), opts, true)?)
}

fn as_x(s: &[f64]) -> [f64; 16] {
    std::array::from_fn(|i| s[i])
}

/// Runs every check with `rhs` standing in for the generator.
pub fn run_checks(p: &ModelParams, tol: Tolerances, rhs: &FullRhs) -> Result<Vec<Check>> {
    let t0 = p.t0();
    let sampled = |t1: f64| PropagateOptions {
        tol,
        output: Output::Samples(linspace(0.0, t1, 200)),
        ..Default::default()
    };
    let mut checks = Vec::new();

    let xm = xi_max(&p.populations());
    let x0 = state(p, mu_max(Complex64::new(xm, 0.0), p) / 2.0, xm)?;
    let full = run_full(rhs, p, &x0, 2.0 * t0, &sampled(2.0 * t0))?;
    let red = propagate_reduced(
        &ReducedState::from_x(&x0.x),
        &ControlLaw::resonant(),
        p,
        (0.0, 2.0 * t0),
        &sampled(2.0 * t0),
    )?;
    let mut gap = 0.0_f64;
    for (xs, zs) in full.states.iter().zip(&red.states) {
        for (a, b) in x_to_z(&as_x(xs)).iter().zip(zs) {
            gap = gap.max((a - b).abs());
        }
    }
    let mut both = full.stats;
    both += red.stats;
    checks.push(Check::measured("oracle-equivalence", gap, 1e-8, both));

    let mut drift = 0.0_f64;
    let mut negativity = 0.0_f64;
    for s in &full.states {
        let rho = DensityState::new(as_x(s));
        drift = drift.max((rho.trace() - 1.0).abs());
        negativity = negativity.max(-rho.min_eigenvalue());
    }
    checks.push(Check::measured("trace-conservation", drift, 1e-9, full.stats));
    checks.push(Check::measured("positivity", negativity.max(0.0), 1e-8, full.stats));

    let mu0 = 0.5 * mu_max(Complex64::new(0.0, 0.0), p);
    let plain = state(p, mu0, 0.0)?;
    let run = run_full(rhs, p, &plain, 3.0 * t0, &sampled(3.0 * t0))?;
    let pole = run
        .states
        .iter()
        .map(|s| (north_pole_position(&x_to_z(&as_x(s))) - p.eta).abs())
        .fold(0.0, f64::max);
    checks.push(Check::measured("pole-position", pole, 1e-9, run.stats));

    let s2 = run
        .times
        .iter()
        .zip(&run.states)
        .map(|(t, s)| (x_to_z(&as_x(s))[4] - s2_resonant_solution(*t, mu0, p.coupling, p.gamma)).abs())
        .fold(0.0, f64::max);
    checks.push(Check::measured("s2-closed-form", s2, 1e-8, run.stats));

    let mut growth = f64::NEG_INFINITY;
    let mut stats = Stats::default();
    let offset = x_to_z(&[0.0; 16]);
    let m = Modulation::resonant(p);
    for k in 0..10 {
        let xi = xm * (k % 5) as f64 / 4.0;
        let sign = if k < 5 { 1.0 } else { -1.0 };
        let mu = sign * 0.9 * mu_max(Complex64::new(xi, 0.0), p) * (k % 3 + 1) as f64 / 3.0;
        let start = state(p, mu, xi)?;
        let mut observe = |_t: f64, x: &[f64; 16], dx: &[f64; 16]| {
            let dz: [f64; 8] = std::array::from_fn(|i| x_to_z(dx)[i] - offset[i]);
            growth = growth.max(radius_rate(&x_to_z(x), &dz));
        };
        let sol = integrate(
            |_t, x: &[f64; 16]| Ok(rhs(x, m, p)),
            0.0,
            start.x,
            3.0 * t0,
            &Output::Samples(vec![]),
            &[],
            &Options::with_tol(tol),
            Some(&mut observe),
        )?;
        stats += sol.stats;
    }
    checks.push(Check::measured("radius-nonincreasing", growth.max(0.0), 1e-10, stats));

    if t_min_uncorrelated(p.coupling, p.gamma)?.is_divergent() {
        checks.push(Check::skipped("tls-purity-ceiling", 1e-5));
    } else {
        let opts = PropagateOptions {
            tol,
            stop_at_north_pole: true,
            ..Default::default()
        };
        let thermal = state(p, 0.0, 0.0)?;
        let run = run_full(rhs, p, &thermal, 10.0 * t0, &opts)?;
        let check = match (run.event_time(EventKind::NorthPoleReached), run.purity.last()) {
            (Some(_), Some(v)) => Check::measured("tls-purity-ceiling", (v - p.tls_purity()).abs(), 1e-5, run.stats),
            _ => Check::measured("tls-purity-ceiling", f64::INFINITY, 1e-5, run.stats),
        };
        checks.push(check);
    }
    Ok(checks)
}

/// Names of the failed checks.
pub fn failures(checks: &[Check]) -> Vec<String> {
    checks
        .iter()
        .filter(|c| c.outcome == Outcome::Fail)
        .map(|c| c.property.to_string())
        .collect()
}

pub fn verify_with(cfg: &RunConfig, rhs: &FullRhs) -> Result<(Report, Vec<String>)> {
    let p = cfg.model.params()?;
    if !(p.coupling > 0.0) {
        return Err(crate::error::CliError::config("verify needs J > 0", Some("J")));
    }
    let checks = run_checks(&p, cfg.tol()?, rhs)?;
    let mut report = Report::new(
        "verify",
        cfg,
        &[
            "property",
            "residual",
            "tolerance",
            "outcome",
            "accepted_steps",
            "rejected_steps",
            "rhs_evals",
        ],
    );
    for c in &checks {
        let outcome = match c.outcome {
            Outcome::Pass => "pass",
            Outcome::Fail => "fail",
            Outcome::Skipped => "skipped",
        };
        report.push(vec![
            Cell::label(c.property),
            Cell::num(c.residual),
            Cell::num(c.tolerance),
            Cell::label(outcome),
            Cell::Int(c.stats.accepted as u64),
            Cell::Int(c.stats.rejected as u64),
            Cell::Int(c.stats.rhs_evals as u64),
        ]);
    }
    let failed = failures(&checks);
    report.meta("params", p);
    report.meta("passed", failed.is_empty());
    report.meta("failed", &failed);
    Ok((report, failed))
}

pub fn verify(cfg: &RunConfig) -> Result<(Report, Vec<String>)> {
    verify_with(cfg, &rhs_x)
}
