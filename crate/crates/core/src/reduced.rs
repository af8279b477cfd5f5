//! Closed 8-coordinate dynamics on the subspaces S1 (`z₁..z₄`) and S2
//! (`z₅..z₈`), the spherical view of S1 and the control-variable
//! conversions.
//!
//! The spherical angles are `r sinθ = z₁ − c`, `r cosθ cosφ = z₂`,
//! `r cosθ sinφ = z₃` with `c = −(z₄ + 1)/2`, so that a real correlation
//! sits at `φ = 0` and the resonant protocol is `u = phase − φ ≡ 0`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::liouville::{ControlLaw, ControlShape, Modulation, PropagateOptions};
use crate::model::{InitialStateSpec, ModelParams};
use crate::ode;
use crate::trajectory::{Coordinates, EventKind, Trajectory, TrajectoryEvent};

/// Angular distance from a pole below which `tanθ` is not evaluated.
pub const POLE_GUARD: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedState {
    pub z: [f64; 8],
}

impl ReducedState {
    pub fn from_x(x: &[f64; 16]) -> Self {
        Self { z: x_to_z(x) }
    }

    pub fn purity(&self) -> f64 {
        purity_z(&self.z)
    }

    pub fn spherical(&self) -> SphericalState {
        z_to_spherical(&[self.z[0], self.z[1], self.z[2], self.z[3]])
    }
}

pub fn x_to_z(x: &[f64; 16]) -> [f64; 8] {
    [
        x[0] + x[1] - 0.5,
        x[11],
        x[10],
        -2.0 * x[0] - x[1] - x[2],
        x[6] + x[12],
        x[5] - x[15],
        x[7] + x[13],
        x[4] - x[14],
    ]
}

/// Qubit purity `1/2 + 2(z₁² + z₅² + z₇²)`.
pub fn purity_z(z: &[f64; 8]) -> f64 {
    0.5 + 2.0 * (z[0] * z[0] + z[4] * z[4] + z[6] * z[6])
}

/// Center `c = −(z₄ + 1)/2` of the S1 sphere on the `z₁` axis.
pub fn center(z: &[f64; 8]) -> f64 {
    -(z[3] + 1.0) / 2.0
}

/// Height `z₁ − c = r sinθ` above the center.
pub fn height(z: &[f64; 8]) -> f64 {
    z[0] - center(z)
}

/// S1 radius.
pub fn radius(z: &[f64; 8]) -> f64 {
    (height(z).powi(2) + z[1] * z[1] + z[2] * z[2]).sqrt()
}

/// Time derivative of the S1 radius given `z` and `ż`.
pub fn radius_rate(z: &[f64; 8], zdot: &[f64; 8]) -> f64 {
    let r = radius(z);
    if r == 0.0 {
        return 0.0;
    }
    let h_dot = zdot[0] + zdot[3] / 2.0;
    (height(z) * h_dot + z[1] * zdot[1] + z[2] * zdot[2]) / r
}

/// Position `Z = r + c` of the S1 north pole on the `z₁` axis.
pub fn north_pole_position(z: &[f64; 8]) -> f64 {
    radius(z) + center(z)
}

/// S1 equations of motion.
pub fn s1_rhs(s: &[f64; 4], m: Modulation, params: &ModelParams) -> [f64; 4] {
    let [z1, z2, z3, z4] = *s;
    let g = params.gamma;
    let lift = z1 + (z4 + 1.0) / 2.0;
    let pull = if g > 0.0 { params.gamma1 / g } else { 0.0 };
    [
        2.0 * m.j1 * z2 + 2.0 * m.j2 * z3,
        -2.0 * m.j1 * lift - 2.0 * m.alpha * z3 - g * z2 / 2.0,
        -2.0 * m.j2 * lift + 2.0 * m.alpha * z2 - g * z3 / 2.0,
        -g * (pull + z1 + z4 + 0.5),
    ]
}

/// S2 equations of motion.
pub fn s2_rhs(s: &[f64; 4], m: Modulation, gamma: f64) -> [f64; 4] {
    let [z5, z6, z7, z8] = *s;
    [
        m.j1 * z6 - m.j2 * z8 + 2.0 * m.alpha * z7,
        -m.j1 * z5 + m.j2 * z7 - gamma * z6 / 2.0,
        -m.j1 * z8 - m.j2 * z6 - 2.0 * m.alpha * z5,
        m.j1 * z7 + m.j2 * z5 - gamma * z8 / 2.0,
    ]
}

pub fn z_rhs(z: &[f64; 8], m: Modulation, params: &ModelParams) -> [f64; 8] {
    let a = s1_rhs(&[z[0], z[1], z[2], z[3]], m, params);
    let b = s2_rhs(&[z[4], z[5], z[6], z[7]], m, params.gamma);
    [a[0], a[1], a[2], a[3], b[0], b[1], b[2], b[3]]
}

/// Spherical view of S1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalState {
    pub r: f64,
    pub c: f64,
    pub theta: f64,
    pub phi: f64,
}

impl SphericalState {
    /// `Z = r + c`.
    pub fn north_pole(&self) -> f64 {
        self.r + self.c
    }

    /// Qubit purity when S2 is empty: `1/2 + 2(r sinθ + c)²`.
    pub fn purity(&self) -> f64 {
        0.5 + 2.0 * (self.r * self.theta.sin() + self.c).powi(2)
    }
}

/// `φ` is set to 0 where it is undefined (`r = 0` or at a pole).
pub fn z_to_spherical(s: &[f64; 4]) -> SphericalState {
    let c = -(s[3] + 1.0) / 2.0;
    let h = s[0] - c;
    let rho = s[1].hypot(s[2]);
    let r = h.hypot(rho);
    if r == 0.0 {
        return SphericalState {
            r,
            c,
            theta: 0.0,
            phi: 0.0,
        };
    }
    let theta = h.atan2(rho);
    let phi = if rho == 0.0 { 0.0 } else { s[2].atan2(s[1]) };
    SphericalState { r, c, theta, phi }
}

pub fn spherical_to_z(s: &SphericalState) -> [f64; 4] {
    let (st, ct) = s.theta.sin_cos();
    let (sp, cp) = s.phi.sin_cos();
    [s.c + s.r * st, s.r * ct * cp, s.r * ct * sp, -2.0 * s.c - 1.0]
}

fn near_pole(theta: f64) -> bool {
    theta.abs() >= std::f64::consts::FRAC_PI_2 - POLE_GUARD
}

/// `(ṙ, ċ, θ̇, φ̇)` for the control angle `u = phase − φ`.
pub fn spherical_rhs(s: &SphericalState, u: f64, alpha: f64, params: &ModelParams) -> Result<[f64; 4]> {
    if !(s.r > 0.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: "spherical rates need r > 0".into(),
        });
    }
    if near_pole(s.theta) {
        return Err(Error::PoleProximity { theta: s.theta });
    }
    let g = params.gamma;
    let j = params.coupling;
    let gap = params.eta - s.c;
    let (st, ct) = s.theta.sin_cos();
    Ok([
        -0.5 * g * (s.r + gap * st),
        0.5 * g * (s.r * st + gap),
        -0.5 * g * gap * ct / s.r + 2.0 * j * u.cos(),
        2.0 * alpha - 2.0 * j * s.theta.tan() * u.sin(),
    ])
}

/// `(ṙ, ċ, θ̇)`; unlike [`spherical_rhs`] this is regular at the poles.
pub fn polar_rhs(s: &SphericalState, u: f64, params: &ModelParams) -> [f64; 3] {
    let g = params.gamma;
    let gap = params.eta - s.c;
    let (st, ct) = s.theta.sin_cos();
    [
        -0.5 * g * (s.r + gap * st),
        0.5 * g * (s.r * st + gap),
        -0.5 * g * gap * ct / s.r + 2.0 * params.coupling * u.cos(),
    ]
}

/// Detuning realising the control angle `u(t)`: `δ = u̇ − 2J tanθ sin u`.
pub fn delta_from_u(u: f64, u_dot: f64, theta: f64, coupling: f64) -> Result<f64> {
    let su = u.sin();
    if su == 0.0 {
        return Ok(u_dot);
    }
    if near_pole(theta) {
        return Err(Error::PoleProximity { theta });
    }
    Ok(u_dot - 2.0 * coupling * theta.tan() * su)
}

/// Physical field for a detuning: `ε = δ + ω_tls − ω_q`.
pub fn epsilon_from_delta(delta: f64, params: &ModelParams) -> f64 {
    delta + params.omega_tls - params.omega_q
}

/// Applies the local qubit phase rotation that makes the correlation real
/// and non-negative. Purity and all populations are unchanged; the qubit
/// coherence is rotated by the same phase.
pub fn align_correlation_phase(spec: &InitialStateSpec) -> InitialStateSpec {
    let n = spec.xi.norm();
    if n == 0.0 {
        return *spec;
    }
    let w = spec.xi.conj() / n;
    let coh = Complex64::new(spec.mu_q, spec.nu_q) * w;
    InitialStateSpec {
        mu_q: coh.re,
        nu_q: coh.im,
        xi: Complex64::new(n, 0.0),
    }
}

/// Closed-form resonant S2 coordinate `z₅(t)` from `z₅(0) = μ_q`,
/// `z₆(0) = 0`: damped (`γ < 4J`), critical and overdamped branches.
pub fn s2_resonant_solution(t: f64, mu_q: f64, coupling: f64, gamma: f64) -> f64 {
    let q = gamma / 4.0;
    let envelope = (-q * t).exp();
    let disc = coupling * coupling - q * q;
    let scale = coupling.max(q).powi(2);
    if disc.abs() <= 1e-14 * scale {
        mu_q * (1.0 + q * t) * envelope
    } else if disc > 0.0 {
        let w = disc.sqrt();
        mu_q * envelope * ((w * t).cos() + q / w * (w * t).sin())
    } else {
        let w = (-disc).sqrt();
        // e^{−qt}(cosh wt + q/w sinh wt) without overflow for large t
        let a = 0.5 * (1.0 + q / w) * ((w - q) * t).exp();
        let b = 0.5 * (1.0 - q / w) * (-(w + q) * t).exp();
        mu_q * (a + b)
    }
}

fn z_head(y: &[f64; 9]) -> [f64; 8] {
    std::array::from_fn(|i| y[i])
}

/// Propagates the 8 reduced coordinates.
///
/// Field controls (`ε`, `δ`) enter through the modulation coefficients of
/// their phase convention. A tabulated `u(t)` is integrated in the
/// accumulated-phase frame with the phase `Φ` carried alongside,
/// `Φ̇ = δ = u̇ − 2J tanθ sin u`, `Φ(0) = u(0) + φ(0)`.
pub fn propagate_reduced(
    z0: &ReducedState,
    control: &ControlLaw,
    params: &ModelParams,
    t_span: (f64, f64),
    opts: &PropagateOptions,
) -> Result<Trajectory> {
    let resonant = control.is_resonant();
    let ode_opts = opts.ode_options();
    let (times, states, stats, terminated, t_final) = match &control.shape {
        ControlShape::TabulatedU { table } => {
            let phi0 = z0.spherical().phi;
            let mut y0 = [0.0; 9];
            y0[..8].copy_from_slice(&z0.z);
            y0[8] = table.value(t_span.0)? + phi0;
            let j = params.coupling;
            let rhs = |t: f64, y: &[f64; 9]| -> Result<[f64; 9]> {
                let z = z_head(y);
                let u = table.value(t)?;
                let rho = z[1].hypot(z[2]);
                let su = u.sin();
                let tan_term = if su == 0.0 {
                    0.0
                } else {
                    let theta = height(&z).atan2(rho);
                    if near_pole(theta) {
                        return Err(Error::PoleProximity { theta });
                    }
                    theta.tan() * su
                };
                let phase_rate = table.derivative(t)? - 2.0 * j * tan_term;
                let m = Modulation {
                    j1: j * y[8].cos(),
                    j2: j * y[8].sin(),
                    alpha: 0.0,
                };
                let d = z_rhs(&z, m, params);
                let mut out = [0.0; 9];
                out[..8].copy_from_slice(&d);
                out[8] = phase_rate;
                Ok(out)
            };
            let events = if opts.stop_at_north_pole {
                vec![crate::liouville::north_pole_event(false, z_head)]
            } else {
                vec![]
            };
            let sol = ode::integrate(rhs, t_span.0, y0, t_span.1, &opts.output, &events, &ode_opts, None)?;
            let states: Vec<Vec<f64>> = sol.states.iter().map(|y| y[..8].to_vec()).collect();
            (sol.times, states, sol.stats, sol.terminated, sol.t_final)
        }
        _ => {
            let rhs =
                |t: f64, z: &[f64; 8]| -> Result<[f64; 8]> { Ok(z_rhs(z, control.modulation(t, params)?, params)) };
            let events = if opts.stop_at_north_pole {
                vec![crate::liouville::north_pole_event(resonant, |z: &[f64; 8]| *z)]
            } else {
                vec![]
            };
            let sol = ode::integrate(rhs, t_span.0, z0.z, t_span.1, &opts.output, &events, &ode_opts, None)?;
            let states: Vec<Vec<f64>> = sol.states.iter().map(|z| z.to_vec()).collect();
            (sol.times, states, sol.stats, sol.terminated, sol.t_final)
        }
    };
    let mut events = Vec::new();
    if terminated {
        events.push(TrajectoryEvent {
            t: t_final,
            kind: EventKind::NorthPoleReached,
        });
    } else if opts.stop_at_north_pole {
        events.push(TrajectoryEvent {
            t: t_final,
            kind: EventKind::HorizonExpired,
        });
    }
    let purity = states
        .iter()
        .map(|s| purity_z(&std::array::from_fn(|i| s[i])))
        .collect();
    Ok(Trajectory {
        coordinates: Coordinates::Z,
        times,
        states,
        purity,
        events,
        stats,
    })
}

/// Spherical view of every sample of a reduced trajectory.
pub fn spherical_series(traj: &Trajectory) -> Vec<SphericalState> {
    traj.states
        .iter()
        .map(|s| z_to_spherical(&[s[0], s[1], s[2], s[3]]))
        .collect()
}
