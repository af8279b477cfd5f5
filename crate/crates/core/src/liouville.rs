//! Full Lindblad dynamics of the joint qubit–TLS density matrix.
//!
//! Two frames are available. In the laboratory frame the Hamiltonian carries
//! the bare frequencies and the counter-rotating coupling. In the rotating
//! frame (after the rotating wave approximation) the generator is written in
//! the 16 real coordinates as `ẋ = f₀ + J₁ f₁ + J₂ f₂ + α f₃`.

use nalgebra::{Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{x_to_matrix, DensityState, ModelParams};
use crate::ode::{self, Direction, Event, Options, Output, Tolerances};
use crate::reduced::{self, POLE_GUARD};
use crate::trajectory::{Coordinates, EventKind, Trajectory, TrajectoryEvent};

/// How the oscillating factors of the rotating frame are built from a
/// time-dependent detuning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhaseConvention {
    /// phase = δ(t)·t and α = (t/2)·dδ/dt.
    #[default]
    Literal,
    /// phase = ∫₀ᵗ δ dt′ and α = 0.
    Accumulated,
}

/// Sampled function with a C¹ piecewise-cubic (Catmull–Rom) interpolant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TableData", into = "TableData")]
pub struct Table {
    times: Vec<f64>,
    values: Vec<f64>,
    slopes: Vec<f64>,
    /// Integral of the interpolant from the first knot to each knot.
    cumulative: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TableData {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl TryFrom<TableData> for Table {
    type Error = Error;
    fn try_from(d: TableData) -> Result<Self> {
        Table::new(d.times, d.values)
    }
}

impl From<Table> for TableData {
    fn from(t: Table) -> Self {
        TableData {
            times: t.times,
            values: t.values,
        }
    }
}

impl Table {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let bad = |reason: String| Error::InvalidParameter {
            name: "control_table",
            reason,
        };
        if times.len() != values.len() || times.len() < 2 {
            return Err(bad("need at least two (t, value) pairs of equal length".into()));
        }
        if times.iter().chain(&values).any(|v| !v.is_finite()) {
            return Err(bad("entries must be finite".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("times must be strictly increasing".into()));
        }
        let n = times.len();
        let slopes: Vec<f64> = (0..n)
            .map(|i| {
                let (a, b) = (i.saturating_sub(1), (i + 1).min(n - 1));
                (values[b] - values[a]) / (times[b] - times[a])
            })
            .collect();
        let mut cumulative = vec![0.0; n];
        for i in 1..n {
            let h = times[i] - times[i - 1];
            cumulative[i] =
                cumulative[i - 1] + h * (0.5 * (values[i - 1] + values[i]) + h * (slopes[i - 1] - slopes[i]) / 12.0);
        }
        Ok(Self {
            times,
            values,
            slopes,
            cumulative,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], self.times[self.times.len() - 1])
    }

    fn segment(&self, t: f64) -> Result<(usize, f64, f64)> {
        let (start, end) = self.span();
        if !(t >= start && t <= end) {
            return Err(Error::ControlOutOfRange { t, start, end });
        }
        let i = self.times.partition_point(|&k| k <= t).clamp(1, self.times.len() - 1) - 1;
        let h = self.times[i + 1] - self.times[i];
        Ok((i, h, (t - self.times[i]) / h))
    }

    pub fn value(&self, t: f64) -> Result<f64> {
        let (i, h, s) = self.segment(t)?;
        let (s2, s3) = (s * s, s * s * s);
        Ok((2.0 * s3 - 3.0 * s2 + 1.0) * self.values[i]
            + (s3 - 2.0 * s2 + s) * h * self.slopes[i]
            + (-2.0 * s3 + 3.0 * s2) * self.values[i + 1]
            + (s3 - s2) * h * self.slopes[i + 1])
    }

    pub fn derivative(&self, t: f64) -> Result<f64> {
        let (i, h, s) = self.segment(t)?;
        let s2 = s * s;
        Ok((6.0 * s2 - 6.0 * s) / h * self.values[i]
            + (3.0 * s2 - 4.0 * s + 1.0) * self.slopes[i]
            + (-6.0 * s2 + 6.0 * s) / h * self.values[i + 1]
            + (3.0 * s2 - 2.0 * s) * self.slopes[i + 1])
    }

    /// Integral of the interpolant from the first knot to `t`.
    pub fn integral(&self, t: f64) -> Result<f64> {
        let (i, h, s) = self.segment(t)?;
        let (s2, s3, s4) = (s * s, s * s * s, s * s * s * s);
        let part = self.values[i] * (0.5 * s4 - s3 + s)
            + h * self.slopes[i] * (0.25 * s4 - 2.0 * s3 / 3.0 + 0.5 * s2)
            + self.values[i + 1] * (-0.5 * s4 + s3)
            + h * self.slopes[i + 1] * (0.25 * s4 - s3 / 3.0);
        Ok(self.cumulative[i] + h * part)
    }
}

/// The control, expressed through one of its equivalent variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ControlShape {
    /// `u ≡ 0`, `δ ≡ 0`, `ε = ω_tls − ω_q`.
    Resonant,
    ConstantDetuning {
        delta: f64,
    },
    /// Physical field `ε(t)`.
    TabulatedEpsilon {
        table: Table,
    },
    /// Geometric control `u(t)`; only the reduced propagator accepts it.
    TabulatedU {
        table: Table,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlLaw {
    pub shape: ControlShape,
    #[serde(default)]
    pub convention: PhaseConvention,
}

/// Rotating-frame coefficients at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Modulation {
    pub j1: f64,
    pub j2: f64,
    pub alpha: f64,
}

impl Modulation {
    pub fn resonant(params: &ModelParams) -> Self {
        Self {
            j1: params.coupling,
            j2: 0.0,
            alpha: 0.0,
        }
    }
}

const U_ONLY_REDUCED: &str = "a tabulated u(t) control is only supported by the reduced propagator";

impl ControlLaw {
    pub fn resonant() -> Self {
        Self {
            shape: ControlShape::Resonant,
            convention: PhaseConvention::default(),
        }
    }

    pub fn constant_detuning(delta: f64) -> Self {
        Self {
            shape: ControlShape::ConstantDetuning { delta },
            convention: PhaseConvention::default(),
        }
    }

    pub fn epsilon(table: Table, convention: PhaseConvention) -> Self {
        Self {
            shape: ControlShape::TabulatedEpsilon { table },
            convention,
        }
    }

    pub fn u(table: Table) -> Self {
        Self {
            shape: ControlShape::TabulatedU { table },
            convention: PhaseConvention::Accumulated,
        }
    }

    pub fn is_resonant(&self) -> bool {
        match &self.shape {
            ControlShape::Resonant => true,
            ControlShape::ConstantDetuning { delta } => *delta == 0.0,
            _ => false,
        }
    }

    /// Physical field `ε(t)`.
    pub fn epsilon_at(&self, t: f64, params: &ModelParams) -> Result<f64> {
        match &self.shape {
            ControlShape::Resonant => Ok(params.resonant_epsilon()),
            ControlShape::ConstantDetuning { delta } => Ok(delta + params.resonant_epsilon()),
            ControlShape::TabulatedEpsilon { table } => table.value(t),
            ControlShape::TabulatedU { .. } => Err(Error::UnsupportedControl(U_ONLY_REDUCED)),
        }
    }

    pub fn epsilon_dot(&self, t: f64) -> Result<f64> {
        match &self.shape {
            ControlShape::Resonant | ControlShape::ConstantDetuning { .. } => Ok(0.0),
            ControlShape::TabulatedEpsilon { table } => table.derivative(t),
            ControlShape::TabulatedU { .. } => Err(Error::UnsupportedControl(U_ONLY_REDUCED)),
        }
    }

    /// Detuning `δ = ω_q + ε − ω_tls`.
    pub fn delta_at(&self, t: f64, params: &ModelParams) -> Result<f64> {
        Ok(params.omega_q + self.epsilon_at(t, params)? - params.omega_tls)
    }

    /// Phase of the coupling in the rotating frame.
    pub fn phase(&self, t: f64, params: &ModelParams) -> Result<f64> {
        match &self.shape {
            ControlShape::Resonant => Ok(0.0),
            ControlShape::ConstantDetuning { delta } => Ok(delta * t),
            ControlShape::TabulatedEpsilon { table } => match self.convention {
                PhaseConvention::Literal => Ok(self.delta_at(t, params)? * t),
                PhaseConvention::Accumulated => {
                    let integral = table.integral(t)? - table.integral(0.0)?;
                    Ok((params.omega_q - params.omega_tls) * t + integral)
                }
            },
            ControlShape::TabulatedU { .. } => Err(Error::UnsupportedControl(U_ONLY_REDUCED)),
        }
    }

    /// `α(t)`, the residual diagonal term of the rotating frame.
    pub fn alpha(&self, t: f64) -> Result<f64> {
        match self.convention {
            PhaseConvention::Literal => Ok(0.5 * t * self.epsilon_dot(t)?),
            PhaseConvention::Accumulated => {
                self.epsilon_dot(t)?;
                Ok(0.0)
            }
        }
    }

    pub fn modulation(&self, t: f64, params: &ModelParams) -> Result<Modulation> {
        if let ControlShape::Resonant = self.shape {
            return Ok(Modulation::resonant(params));
        }
        let phase = self.phase(t, params)?;
        Ok(Modulation {
            j1: params.coupling * phase.cos(),
            j2: params.coupling * phase.sin(),
            alpha: self.alpha(t)?,
        })
    }
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn kron(a: &Matrix2<Complex64>, b: &Matrix2<Complex64>) -> Matrix4<Complex64> {
    Matrix4::from_fn(|r, col| a[(r / 2, col / 2)] * b[(r % 2, col % 2)])
}

fn sigma_z() -> Matrix2<Complex64> {
    Matrix2::new(c(1.0), c(0.0), c(0.0), c(-1.0))
}

fn sigma_x() -> Matrix2<Complex64> {
    Matrix2::new(c(0.0), c(1.0), c(1.0), c(0.0))
}

/// `|0⟩⟨1|`, lowering towards the ground state `|0⟩`.
fn sigma_minus() -> Matrix2<Complex64> {
    Matrix2::new(c(0.0), c(1.0), c(0.0), c(0.0))
}

/// Laboratory-frame Hamiltonian
/// `−(ω_q+ε)/2 σ_z^q − ω_tls/2 σ_z^tls − J σ_x^q σ_x^tls`.
pub fn hamiltonian_lab(t: f64, control: &ControlLaw, params: &ModelParams) -> Result<Matrix4<Complex64>> {
    let eps = control.epsilon_at(t, params)?;
    let id = Matrix2::<Complex64>::identity();
    Ok(kron(&sigma_z(), &id) * c(-(params.omega_q + eps) / 2.0)
        + kron(&id, &sigma_z()) * c(-params.omega_tls / 2.0)
        + kron(&sigma_x(), &sigma_x()) * c(-params.coupling))
}

/// Rotating-frame Hamiltonian for given modulation coefficients.
pub fn hamiltonian_from_modulation(m: Modulation) -> Matrix4<Complex64> {
    let mut h = Matrix4::<Complex64>::zeros();
    h[(0, 0)] = c(m.alpha);
    h[(1, 1)] = c(m.alpha);
    h[(2, 2)] = c(-m.alpha);
    h[(3, 3)] = c(-m.alpha);
    // −J e^{−i·phase} between |01⟩ and |10⟩
    let v = Complex64::new(-m.j1, m.j2);
    h[(1, 2)] = v;
    h[(2, 1)] = v.conj();
    h
}

pub fn hamiltonian_rwa(t: f64, control: &ControlLaw, params: &ModelParams) -> Result<Matrix4<Complex64>> {
    Ok(hamiltonian_from_modulation(control.modulation(t, params)?))
}

/// Jump operators `√γ₁ 1⊗σ⁻` and `√γ₂ 1⊗σ⁺` acting on the TLS.
pub fn jump_operators(params: &ModelParams) -> [Matrix4<Complex64>; 2] {
    let id = Matrix2::<Complex64>::identity();
    let lower = kron(&id, &sigma_minus());
    [
        lower * c(params.gamma1.sqrt()),
        lower.adjoint() * c(params.gamma2.sqrt()),
    ]
}

/// `−i[H, ρ] + Σ_k (L_k ρ L_k† − ½{L_k† L_k, ρ})`.
pub fn lindblad_rhs_matrix(
    rho: &Matrix4<Complex64>,
    h: &Matrix4<Complex64>,
    jumps: &[Matrix4<Complex64>],
) -> Matrix4<Complex64> {
    let mi = Complex64::new(0.0, -1.0);
    let mut out = (h * rho - rho * h) * mi;
    for l in jumps {
        let ld = l.adjoint();
        let ldl = ld * l;
        out += l * rho * ld - (ldl * rho + rho * ldl) * c(0.5);
    }
    out
}

/// Rotating-frame generator in the 16 real coordinates for given
/// modulation coefficients.
pub fn rhs_x(x: &[f64; 16], m: Modulation, params: &ModelParams) -> [f64; 16] {
    let [x1, x2, x3, x4, x5, x6, x7, x8, x9, x10, x11, x12, x13, x14, x15, x16] = *x;
    let (g1, g2) = (params.gamma1, params.gamma2);
    let f0_1 = [
        x2,
        -x2,
        x4,
        -x4,
        -x5 / 2.0,
        -x6 / 2.0,
        x13,
        x14,
        -x9 / 2.0,
        -x10 / 2.0,
        -x11 / 2.0,
        -x12 / 2.0,
        -x13,
        -x14,
        -x15 / 2.0,
        -x16 / 2.0,
    ];
    let f0_2 = [
        -x1,
        x1,
        -x3,
        x3,
        -x5 / 2.0,
        -x6 / 2.0,
        -x7,
        -x8,
        -x9 / 2.0,
        -x10 / 2.0,
        -x11 / 2.0,
        -x12 / 2.0,
        x7,
        x8,
        -x15 / 2.0,
        -x16 / 2.0,
    ];
    let f1 = [
        0.0,
        2.0 * x12,
        -2.0 * x12,
        0.0,
        x8,
        -x7,
        x6,
        -x5,
        0.0,
        0.0,
        0.0,
        x3 - x2,
        -x16,
        x15,
        -x14,
        x13,
    ];
    let f2 = [
        0.0,
        2.0 * x11,
        -2.0 * x11,
        0.0,
        x7,
        x8,
        -x5,
        -x6,
        0.0,
        0.0,
        x3 - x2,
        0.0,
        x15,
        x16,
        -x13,
        -x14,
    ];
    let f3 = [
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        0.0,
        2.0 * x8,
        -2.0 * x7,
        2.0 * x10,
        -2.0 * x9,
        2.0 * x12,
        -2.0 * x11,
        2.0 * x14,
        -2.0 * x13,
        0.0,
        0.0,
    ];
    std::array::from_fn(|i| g1 * f0_1[i] + g2 * f0_2[i] + m.j1 * f1[i] + m.j2 * f2[i] + m.alpha * f3[i])
}

/// Rotating-frame generator at time `t` under `control`.
pub fn lindblad_rhs_x(x: &[f64; 16], t: f64, control: &ControlLaw, params: &ModelParams) -> Result<[f64; 16]> {
    Ok(rhs_x(x, control.modulation(t, params)?, params))
}

/// Qubit reduced state `Tr_tls ρ`.
pub fn partial_trace_qubit(x: &[f64; 16]) -> nalgebra::Matrix2<Complex64> {
    let coh = Complex64::new(x[6] + x[12], x[7] + x[13]);
    Matrix2::new(c(x[0] + x[1]), coh, coh.conj(), c(x[2] + x[3]))
}

/// `Tr ρ_q²` from the joint coordinates.
pub fn qubit_purity_x(x: &[f64; 16]) -> f64 {
    let p = x[0] + x[1] - 0.5;
    let re = x[6] + x[12];
    let im = x[7] + x[13];
    0.5 + 2.0 * (p * p + re * re + im * im)
}

/// Settings shared by the full and reduced propagators.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagateOptions {
    pub tol: Tolerances,
    pub output: Output,
    /// Stop when the S1 north pole is reached.
    pub stop_at_north_pole: bool,
    pub h_max: f64,
}

impl Default for PropagateOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            output: Output::Steps,
            stop_at_north_pole: false,
            h_max: f64::INFINITY,
        }
    }
}

impl PropagateOptions {
    pub(crate) fn ode_options(&self) -> Options {
        Options {
            tol: self.tol,
            h_max: self.h_max,
            ..Options::default()
        }
    }
}

/// North-pole event on a state whose reduced coordinates are given by
/// `to_z`. Under resonant control the S1 motion stays in the `z₃ = 0` plane,
/// where the pole is a clean downward zero of `z₂` on the upper hemisphere;
/// otherwise the event fires within `POLE_GUARD` of the pole.
pub(crate) fn north_pole_event<'a, const N: usize>(
    resonant: bool,
    to_z: impl Fn(&[f64; N]) -> [f64; 8] + Copy + 'a,
) -> Event<'a, N> {
    if resonant {
        Event::new(Direction::Falling, move |_t, y: &[f64; N]| to_z(y)[1])
            .with_guard(move |_t, y: &[f64; N]| reduced::height(&to_z(y)) > 0.0)
            .terminal()
    } else {
        Event::new(Direction::Rising, move |_t, y: &[f64; N]| {
            let z = to_z(y);
            let r = reduced::radius(&z);
            if r > 0.0 {
                reduced::height(&z) / r - POLE_GUARD.cos()
            } else {
                -1.0
            }
        })
        .terminal()
    }
}

pub(crate) fn x_as_z(x: &[f64; 16]) -> [f64; 8] {
    reduced::x_to_z(x)
}

/// Integrates an arbitrary right-hand side in the 16 coordinates and wraps
/// the result as a trajectory. Used for the rotating frame and by the
/// verification suite.
pub fn propagate_x_with<F>(
    rhs: F,
    x0: &DensityState,
    t_span: (f64, f64),
    opts: &PropagateOptions,
    resonant: bool,
) -> Result<Trajectory>
where
    F: Fn(f64, &[f64; 16]) -> Result<[f64; 16]>,
{
    let events = if opts.stop_at_north_pole {
        vec![north_pole_event(resonant, x_as_z)]
    } else {
        vec![]
    };
    let sol = ode::integrate(
        rhs,
        t_span.0,
        x0.x,
        t_span.1,
        &opts.output,
        &events,
        &opts.ode_options(),
        None,
    )?;
    let mut traj_events = Vec::new();
    if sol.terminated {
        traj_events.push(TrajectoryEvent {
            t: sol.t_final,
            kind: EventKind::NorthPoleReached,
        });
    } else if opts.stop_at_north_pole {
        traj_events.push(TrajectoryEvent {
            t: sol.t_final,
            kind: EventKind::HorizonExpired,
        });
    }
    Ok(Trajectory {
        coordinates: Coordinates::X,
        purity: sol.states.iter().map(qubit_purity_x).collect(),
        states: sol.states.iter().map(|s| s.to_vec()).collect(),
        times: sol.times,
        events: traj_events,
        stats: sol.stats,
    })
}

/// Rotating-frame propagation of the full joint state.
pub fn propagate_full(
    x0: &DensityState,
    control: &ControlLaw,
    params: &ModelParams,
    t_span: (f64, f64),
    opts: &PropagateOptions,
) -> Result<Trajectory> {
    if let ControlShape::TabulatedU { .. } = control.shape {
        return Err(Error::UnsupportedControl(U_ONLY_REDUCED));
    }
    let rhs = |t: f64, x: &[f64; 16]| lindblad_rhs_x(x, t, control, params);
    propagate_x_with(rhs, x0, t_span, opts, control.is_resonant())
}

/// Laboratory-frame propagation with the untransformed Hamiltonian and jump
/// operators.
pub fn propagate_lab(
    rho0: &DensityState,
    control: &ControlLaw,
    params: &ModelParams,
    t_span: (f64, f64),
    opts: &PropagateOptions,
) -> Result<Trajectory> {
    if let ControlShape::TabulatedU { .. } = control.shape {
        return Err(Error::UnsupportedControl(U_ONLY_REDUCED));
    }
    if opts.stop_at_north_pole {
        return Err(Error::UnsupportedControl(
            "the north-pole event is defined in the rotating frame only",
        ));
    }
    let jumps = jump_operators(params);
    let rhs = |t: f64, x: &[f64; 16]| -> Result<[f64; 16]> {
        let h = hamiltonian_lab(t, control, params)?;
        let d = lindblad_rhs_matrix(&x_to_matrix(x), &h, &jumps);
        Ok(DensityState::from_matrix(&d).x)
    };
    propagate_x_with(rhs, rho0, t_span, opts, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_initial_state, InitialStateSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn params() -> ModelParams {
        ModelParams::default()
    }

    fn matrix_rhs_x(x: &[f64; 16], m: Modulation, p: &ModelParams) -> [f64; 16] {
        let d = lindblad_rhs_matrix(&x_to_matrix(x), &hamiltonian_from_modulation(m), &jump_operators(p));
        DensityState::from_matrix(&d).x
    }

    #[test]
    fn lab_hamiltonian_uncoupled_and_coupling_block() {
        let p = params().with_coupling(1e-300).unwrap();
        // δ = ω_q − ω_tls makes ε = 0
        let ctrl = ControlLaw::constant_detuning(p.omega_q - p.omega_tls);
        let h = hamiltonian_lab(0.3, &ctrl, &p).unwrap();
        let (wq, wt) = (p.omega_q, p.omega_tls);
        let expect = [-(wq + wt) / 2.0, -(wq - wt) / 2.0, (wq - wt) / 2.0, (wq + wt) / 2.0];
        for k in 0..4 {
            assert_abs_diff_eq!(h[(k, k)].re, expect[k], epsilon = 1e-14);
        }
        let h = hamiltonian_lab(0.0, &ControlLaw::resonant(), &params()).unwrap();
        assert_abs_diff_eq!(h.trace().norm(), 0.0, epsilon = 1e-15);
        for (r, col) in [(0, 3), (1, 2), (2, 1), (3, 0)] {
            assert_eq!(h[(r, col)], c(-0.1));
        }
        assert_eq!(h, h.adjoint());
    }

    #[test]
    fn rwa_hamiltonian_resonant() {
        let h = hamiltonian_rwa(5.0, &ControlLaw::resonant(), &params()).unwrap();
        assert_eq!(h[(1, 2)], c(-0.1));
        assert_eq!(h[(2, 1)], c(-0.1));
        assert_eq!(h[(0, 3)], c(0.0));
        assert_eq!(h[(3, 0)], c(0.0));
        for k in 0..4 {
            assert_eq!(h[(k, k)], c(0.0));
        }
    }

    #[test]
    fn rwa_hamiltonian_is_hermitian_for_chirp() {
        let ts: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let vs: Vec<f64> = ts.iter().map(|t| 2.0 + 0.05 * (0.3 * t).sin()).collect();
        let ctrl = ControlLaw::epsilon(Table::new(ts, vs).unwrap(), PhaseConvention::Literal);
        for t in [0.0, 3.3, 11.7, 19.0] {
            let h = hamiltonian_rwa(t, &ctrl, &params()).unwrap();
            assert_eq!(h, h.adjoint());
            assert_eq!(h[(0, 3)], c(0.0));
        }
    }

    #[test]
    fn coordinate_generator_matches_matrix_generator() {
        let p = ModelParams::new(1.0, 3.0, 0.7, 0.13, 0.41).unwrap();
        for seed in 0..20 {
            let x: [f64; 16] = std::array::from_fn(|i| ((seed * 16 + i) as f64 * 1.618).sin());
            let m = Modulation {
                j1: 0.3 * (seed as f64).cos(),
                j2: 0.2 * (seed as f64).sin(),
                alpha: 0.07 * seed as f64,
            };
            let a = rhs_x(&x, m, &p);
            let b = matrix_rhs_x(&x, m, &p);
            for i in 0..16 {
                assert_abs_diff_eq!(a[i], b[i], epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn trace_preserved_by_generator() {
        let x: [f64; 16] = std::array::from_fn(|i| (i as f64 * 0.77).cos());
        let d = lindblad_rhs_x(&x, 1.0, &ControlLaw::constant_detuning(0.2), &params()).unwrap();
        assert_abs_diff_eq!(d[..4].iter().sum::<f64>(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn detailed_balance_of_thermal_product() {
        let p = params();
        let x = build_initial_state(&InitialStateSpec::default(), &p).unwrap().x;
        let d = rhs_x(&x, Modulation::default(), &p);
        assert_abs_diff_eq!(d[2], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(d[3], 0.0, epsilon = 1e-16);
        assert_abs_diff_eq!(p.gamma1 * x[3], p.gamma2 * x[2], epsilon = 1e-16);
    }

    #[test]
    fn alpha_term_vanishes_without_coherences() {
        let mut x = [0.0; 16];
        x[..4].copy_from_slice(&[0.4, 0.3, 0.2, 0.1]);
        let with = rhs_x(
            &x,
            Modulation {
                alpha: 3.0,
                ..Default::default()
            },
            &params(),
        );
        let without = rhs_x(&x, Modulation::default(), &params());
        assert_eq!(with, without);
    }

    #[test]
    fn no_dynamics_without_coupling_and_bath() {
        let p = ModelParams::new(1.0, 3.0, 1.0, 0.0, 0.0).unwrap();
        let x0 = build_initial_state(&InitialStateSpec::default(), &p).unwrap();
        let opts = PropagateOptions {
            output: Output::Samples(ode::linspace(0.0, 50.0, 5)),
            ..Default::default()
        };
        let tr = propagate_full(&x0, &ControlLaw::resonant(), &p, (0.0, 50.0), &opts).unwrap();
        for s in &tr.states {
            for (a, b) in s.iter().zip(&x0.x) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn tls_relaxes_to_detailed_balance() {
        let p = ModelParams::new(1.0, 3.0, 1.0, 1e-300, 0.5).unwrap();
        // start the TLS fully excited
        let mut x = [0.0; 16];
        x[1] = 0.7;
        x[3] = 0.3;
        let t_end = 20.0 / p.gamma;
        let tr = propagate_full(
            &DensityState::new(x),
            &ControlLaw::resonant(),
            &p,
            (0.0, t_end),
            &Default::default(),
        )
        .unwrap();
        let s = tr.final_state().unwrap();
        let ratio = (s[1] + s[3]) / (s[0] + s[2]);
        assert_abs_diff_eq!(ratio, (-p.beta * p.omega_tls).exp(), epsilon = 1e-8);
        assert_abs_diff_eq!(s[0] + s[1], 0.7, epsilon = 1e-12);
        assert_abs_diff_eq!(s[2] + s[3], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn partial_trace_examples() {
        let p = params();
        let pops = p.populations();
        let x = build_initial_state(&InitialStateSpec::new(0.05, 0.0, c(0.0)), &p)
            .unwrap()
            .x;
        let rq = partial_trace_qubit(&x);
        assert_abs_diff_eq!(rq[(0, 0)].re, pops.a_q, epsilon = 1e-15);
        assert_abs_diff_eq!(rq[(0, 1)].re, 0.05, epsilon = 1e-15);
        let mixed = partial_trace_qubit(&DensityState::maximally_mixed().x);
        assert_eq!(mixed, Matrix2::new(c(0.5), c(0.0), c(0.0), c(0.5)));
    }

    #[test]
    fn purity_examples() {
        assert_eq!(qubit_purity_x(&DensityState::maximally_mixed().x), 0.5);
        let mut x = [0.0; 16];
        x[0] = 1.0;
        assert_eq!(qubit_purity_x(&x), 1.0);
        let x = build_initial_state(&InitialStateSpec::default(), &params()).unwrap().x;
        assert_abs_diff_eq!(qubit_purity_x(&x), 0.606777, epsilon = 1e-6);
        let rq = partial_trace_qubit(&x);
        assert_abs_diff_eq!((rq * rq).trace().re, qubit_purity_x(&x), epsilon = 1e-15);
    }

    #[test]
    fn tls_purity_ceiling_at_north_pole() {
        let p = params();
        let x0 = build_initial_state(&InitialStateSpec::default(), &p).unwrap();
        let opts = PropagateOptions {
            stop_at_north_pole: true,
            ..Default::default()
        };
        let tr = propagate_full(&x0, &ControlLaw::resonant(), &p, (0.0, 100.0), &opts).unwrap();
        let t = tr.event_time(EventKind::NorthPoleReached).unwrap();
        assert_abs_diff_eq!(t, 24.183991523, epsilon = 1e-7);
        assert_abs_diff_eq!(*tr.purity.last().unwrap(), p.tls_purity(), epsilon = 1e-8);
    }

    #[test]
    fn u_controls_are_rejected() {
        let tab = Table::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let x0 = DensityState::maximally_mixed();
        let r = propagate_full(&x0, &ControlLaw::u(tab), &params(), (0.0, 1.0), &Default::default());
        assert!(matches!(r, Err(Error::UnsupportedControl(_))));
    }

    #[test]
    fn table_interpolant_properties() {
        let ts: Vec<f64> = (0..=40).map(|k| 0.25 * k as f64).collect();
        let tab = Table::new(ts.clone(), ts.iter().map(|t| t.sin()).collect()).unwrap();
        for &t in &ts {
            assert_eq!(tab.value(t).unwrap(), t.sin());
        }
        assert_abs_diff_eq!(tab.value(3.1).unwrap(), 3.1f64.sin(), epsilon = 2e-3);
        assert_abs_diff_eq!(tab.derivative(3.1).unwrap(), 3.1f64.cos(), epsilon = 2e-2);
        assert_abs_diff_eq!(tab.integral(10.0).unwrap(), 1.0 - 10f64.cos(), epsilon = 1e-3);
        // integral is consistent with a fine trapezoid of the interpolant
        let n = 20000;
        let trap: f64 = (0..n)
            .map(|k| {
                let (a, b) = (6.3 * k as f64 / n as f64, 6.3 * (k + 1) as f64 / n as f64);
                0.5 * (b - a) * (tab.value(a).unwrap() + tab.value(b).unwrap())
            })
            .sum();
        assert_abs_diff_eq!(tab.integral(6.3).unwrap(), trap, epsilon = 1e-8);
        assert!(matches!(tab.value(10.5), Err(Error::ControlOutOfRange { .. })));
        assert!(Table::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn phase_conventions_agree_for_constant_fields() {
        let p = params();
        let tab = Table::new(vec![0.0, 100.0], vec![2.3, 2.3]).unwrap();
        let lit = ControlLaw::epsilon(tab.clone(), PhaseConvention::Literal);
        let acc = ControlLaw::epsilon(tab, PhaseConvention::Accumulated);
        for t in [0.0, 1.0, 42.0] {
            let (a, b) = (lit.modulation(t, &p).unwrap(), acc.modulation(t, &p).unwrap());
            assert_abs_diff_eq!(a.j1, b.j1, epsilon = 1e-12);
            assert_abs_diff_eq!(a.j2, b.j2, epsilon = 1e-12);
            assert_eq!(a.alpha, 0.0);
        }
    }

    #[test]
    fn control_law_serde_round_trip() {
        let tab = Table::new(vec![0.0, 1.0, 2.0], vec![2.0, 2.1, 2.0]).unwrap();
        let law = ControlLaw::epsilon(tab, PhaseConvention::Accumulated);
        let text = serde_json::to_string(&law).unwrap();
        let back: ControlLaw = serde_json::from_str(&text).unwrap();
        assert_eq!(back, law);
    }

    proptest! {
        #[test]
        fn generator_is_trace_free(x in proptest::array::uniform16(-1.0f64..1.0),
                                   j1 in -1.0f64..1.0, j2 in -1.0f64..1.0, alpha in -1.0f64..1.0) {
            let d = rhs_x(&x, Modulation { j1, j2, alpha }, &params());
            prop_assert!(d[..4].iter().sum::<f64>().abs() < 1e-14);
        }

        #[test]
        fn generator_agrees_with_matrix_form(x in proptest::array::uniform16(-1.0f64..1.0),
                                             j1 in -1.0f64..1.0, j2 in -1.0f64..1.0, alpha in -1.0f64..1.0,
                                             kappa in 0.0f64..2.0, beta in 0.05f64..5.0) {
            let p = ModelParams::new(1.0, 3.0, beta, 0.1, kappa).unwrap();
            let m = Modulation { j1, j2, alpha };
            let a = rhs_x(&x, m, &p);
            let b = matrix_rhs_x(&x, m, &p);
            for i in 0..16 {
                prop_assert!((a[i] - b[i]).abs() < 1e-12 * (1.0 + kappa / (1.0 - (-beta * 3.0f64).exp())));
            }
        }
    }
}
