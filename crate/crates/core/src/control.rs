//! Analysis of the resonant (time-optimal) protocol `u ≡ 0`.
//!
//! Under resonant control the S1 motion is captured by the angle `θ` and the
//! ratio `q = (η − c)/r`:
//!
//! ```text
//! θ̇ = 2J − (γ/2) q cosθ,   q̇ = (γ/2)(q² − 1) sinθ,   d ln r/dt = −(γ/2)(1 + q sinθ)
//! ```
//!
//! `q ∈ [−1, 1]` is invariant and `q ≡ 1` without correlations. This form
//! stays well conditioned as `r → 0`, so it drives the minimum-time and
//! region computations. An angular fixed point ahead of the state exists iff
//! `γ q cosθ ≥ 4J` (with `cosθ` replaced by 1 on the lower hemisphere).

use num_complex::Complex64;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::liouville::{ControlLaw, PropagateOptions};
use crate::model::{build_initial_state, xi_max, InitialStateSpec, ModelParams};
use crate::ode::{self, Direction, Event, Options, Output, Stats, Tolerances};
use crate::reduced::{self, purity_z, x_to_z, z_rhs};

/// Default divergence horizon in units of `T₀ = π/(2J)`.
pub const DEFAULT_HORIZON: f64 = 20.0;

/// Below this distance `|γ − 4J|` the regime is reported as critical.
pub const CRITICAL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    Markovian,
    NonMarkovian,
    Critical,
}

pub fn classify_regime(coupling: f64, gamma: f64) -> Regime {
    let gap = gamma - 4.0 * coupling;
    if gap.abs() < CRITICAL_TOL {
        Regime::Critical
    } else if gap > 0.0 {
        Regime::Markovian
    } else {
        Regime::NonMarkovian
    }
}

/// Why no finite purification time was found.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Divergence {
    /// `γ ≥ 4J` without correlations.
    Markovian,
    /// An angular fixed point lies ahead of the state.
    FixedPoint { t: f64, theta: f64 },
    /// Neither the pole nor a fixed point before the horizon.
    Horizon { horizon: f64, theta: f64, theta_dot: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinTime {
    Finite(f64),
    Divergent(Divergence),
}

impl MinTime {
    pub fn value(&self) -> Option<f64> {
        match self {
            MinTime::Finite(t) => Some(*t),
            MinTime::Divergent(_) => None,
        }
    }

    pub fn is_divergent(&self) -> bool {
        matches!(self, MinTime::Divergent(_))
    }

    pub fn divergence(&self) -> Option<Divergence> {
        match self {
            MinTime::Finite(_) => None,
            MinTime::Divergent(d) => Some(*d),
        }
    }
}

/// A finite time serializes as a number, a divergent one as `"divergent"`.
impl Serialize for MinTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MinTime::Finite(t) => s.serialize_f64(*t),
            MinTime::Divergent(_) => s.serialize_str("divergent"),
        }
    }
}

fn check_rates(coupling: f64, gamma: f64) -> Result<()> {
    if !(coupling > 0.0) || !coupling.is_finite() {
        return Err(Error::InvalidParameter {
            name: "J",
            reason: format!("must be > 0, got {coupling}"),
        });
    }
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter {
            name: "gamma",
            reason: format!("must be >= 0, got {gamma}"),
        });
    }
    Ok(())
}

/// Minimum purification time from the thermal product state.
///
/// `8 arctan(√((4J+γ)/(4J−γ))) / √((4J+γ)(4J−γ))` for `γ < 4J`, divergent
/// otherwise, including within `CRITICAL_TOL` of `γ = 4J`.
pub fn t_min_uncorrelated(coupling: f64, gamma: f64) -> Result<MinTime> {
    check_rates(coupling, gamma)?;
    let (sum, diff) = (4.0 * coupling + gamma, 4.0 * coupling - gamma);
    if classify_regime(coupling, gamma) != Regime::NonMarkovian {
        return Ok(MinTime::Divergent(Divergence::Markovian));
    }
    Ok(MinTime::Finite(8.0 * (sum / diff).sqrt().atan() / (sum * diff).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub tol: Tolerances,
    /// Divergence horizon in units of `T₀`.
    pub horizon: f64,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            horizon: DEFAULT_HORIZON,
        }
    }
}

/// Initial angular data of the correlated thermal state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularStart {
    pub theta: f64,
    pub q: f64,
    pub r: f64,
    pub c: f64,
}

/// Angular data for a real correlation `xi`; the state must be physical.
pub fn angular_start(params: &ModelParams, xi: f64) -> Result<AngularStart> {
    if !xi.is_finite() {
        return Err(Error::InvalidParameter {
            name: "xi",
            reason: "must be finite".into(),
        });
    }
    check_rates(params.coupling, params.gamma)?;
    build_initial_state(&InitialStateSpec::correlated(xi), params)?;
    let pops = params.populations();
    let d = pops.half_gap();
    let xi = xi.abs();
    let r = d.hypot(xi);
    Ok(AngularStart {
        theta: -d.atan2(xi),
        q: d / r,
        r,
        c: 0.5 * (pops.a_q + pops.a_tls - 1.0),
    })
}

fn angular_rhs(params: &ModelParams) -> impl Fn(f64, &[f64; 3]) -> Result<[f64; 3]> + '_ {
    move |_t, y| {
        let (st, ct) = y[0].sin_cos();
        let g = params.gamma;
        Ok([
            2.0 * params.coupling - 0.5 * g * y[1] * ct,
            0.5 * g * (y[1] * y[1] - 1.0) * st,
            -0.5 * g * (1.0 + y[1] * st),
        ])
    }
}

/// `≥ 0` iff an angular fixed point lies at or ahead of `θ`.
fn blocking(params: &ModelParams, theta: f64, q: f64) -> f64 {
    let lean = if theta <= 0.0 { 1.0 } else { theta.cos() };
    params.gamma * q * lean - 4.0 * params.coupling
}

/// Outcome of a resonant run of the angular system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularRun {
    pub t_min: MinTime,
    /// Qubit purity at the north pole.
    pub p_final: Option<f64>,
    pub stats: Stats,
}

fn run_angular(params: &ModelParams, xi: f64, opts: &AnalysisOptions) -> Result<AngularRun> {
    let s = angular_start(params, xi)?;
    if blocking(params, s.theta, s.q) >= 0.0 {
        let d = if xi == 0.0 {
            Divergence::Markovian
        } else {
            Divergence::FixedPoint { t: 0.0, theta: s.theta }
        };
        return Ok(AngularRun {
            t_min: MinTime::Divergent(d),
            p_final: None,
            stats: Stats::default(),
        });
    }
    let horizon = opts.horizon * params.t0();
    let p = *params;
    let events = [
        Event::new(Direction::Rising, |_t, y: &[f64; 3]| y[0] - std::f64::consts::FRAC_PI_2).terminal(),
        Event::new(Direction::Rising, move |_t, y: &[f64; 3]| blocking(&p, y[0], y[1])).terminal(),
    ];
    let y0 = [s.theta, s.q, s.r.ln()];
    let sol = ode::integrate(
        angular_rhs(params),
        0.0,
        y0,
        horizon,
        &Output::Samples(vec![]),
        &events,
        &Options::with_tol(opts.tol),
        None,
    )?;
    let y = sol.y_final;
    let t_min = match sol.events.last() {
        Some(hit) if hit.index == 0 => MinTime::Finite(hit.t),
        Some(hit) => MinTime::Divergent(Divergence::FixedPoint {
            t: hit.t,
            theta: hit.y[0],
        }),
        None => MinTime::Divergent(Divergence::Horizon {
            horizon,
            theta: y[0],
            theta_dot: angular_rhs(params)(horizon, &y)?[0],
        }),
    };
    let p_final = t_min.value().map(|_| {
        let r = y[2].exp();
        let z = r + params.eta - y[1] * r;
        0.5 + 2.0 * z * z
    });
    Ok(AngularRun {
        t_min,
        p_final,
        stats: sol.stats,
    })
}

/// Minimum time to the S1 north pole for a real correlation `xi` under
/// resonant control, with the default tolerances and horizon.
pub fn t_min_numeric(params: &ModelParams, xi: f64) -> Result<MinTime> {
    Ok(run_angular(params, xi, &AnalysisOptions::default())?.t_min)
}

pub fn t_min_numeric_with(params: &ModelParams, xi: f64, opts: &AnalysisOptions) -> Result<AngularRun> {
    run_angular(params, xi, opts)
}

/// Angular fixed point `arccos((4J/γ) r/(η − c))` if the argument lies in
/// `(0, 1]`.
pub fn fixed_point_theta(r: f64, c: f64, params: &ModelParams) -> Option<f64> {
    let gap = params.eta - c;
    if !(params.gamma > 0.0) || gap == 0.0 || !(r > 0.0) {
        return None;
    }
    let arg = 4.0 * params.coupling / params.gamma * r / gap;
    (arg > 0.0 && arg <= 1.0).then(|| arg.acos())
}

/// Correlation at which the initial angular fixed point disappears.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum XiFixed {
    Threshold {
        xi: f64,
    },
    /// A fixed point persists up to `ξ_max`.
    Saturated {
        xi_max: f64,
    },
    /// `γ < 4J`: no fixed point for any correlation.
    Absent,
}

impl XiFixed {
    pub fn value(&self) -> Option<f64> {
        match self {
            XiFixed::Threshold { xi } => Some(*xi),
            _ => None,
        }
    }
}

/// Bisection on `(4J/γ) r(0)/(η − c(0)) = 1` over `ξ ∈ [0, ξ_max]`.
pub fn xi_fixed(params: &ModelParams) -> XiFixed {
    let pops = params.populations();
    let d = pops.half_gap();
    let ratio = 4.0 * params.coupling / params.gamma;
    let residual = |xi: f64| ratio * d.hypot(xi) / d - 1.0;
    if !(params.gamma > 0.0) || residual(0.0) > 0.0 {
        return XiFixed::Absent;
    }
    let top = xi_max(&pops);
    if residual(top) < 0.0 {
        return XiFixed::Saturated { xi_max: top };
    }
    let (mut lo, mut hi) = (0.0, top);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    XiFixed::Threshold { xi: lo }
}

/// Closed form `(a_tls − a_q)/2 · √((γ/4J)² − 1)` of the threshold, where
/// it is real.
pub fn xi_fixed_closed_form(params: &ModelParams) -> Option<f64> {
    let s = (params.gamma / (4.0 * params.coupling)).powi(2) - 1.0;
    (s >= 0.0).then(|| params.populations().half_gap() * s.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    /// A fixed point is present initially.
    A,
    /// A fixed point arises during the evolution.
    B,
    /// No fixed point before the north pole.
    C,
}

impl Region {
    pub fn label(self) -> &'static str {
        match self {
            Region::A => "A",
            Region::B => "B",
            Region::C => "C",
        }
    }
}

/// Region of `(xi, coupling)` for the temperature and rates of `params`.
pub fn classify_region(xi: f64, coupling: f64, params: &ModelParams, opts: &AnalysisOptions) -> Result<Region> {
    let p = params.with_coupling(coupling)?;
    let s = angular_start(&p, xi)?;
    if fixed_point_theta(s.r, s.c, &p).is_some() {
        return Ok(Region::A);
    }
    if 4.0 * p.coupling > p.gamma {
        // θ̇ ≥ 2J − γ/2 > 0 throughout
        return Ok(Region::C);
    }
    match run_angular(&p, xi, opts)?.t_min {
        MinTime::Finite(_) => Ok(Region::C),
        MinTime::Divergent(Divergence::FixedPoint { .. }) => Ok(Region::B),
        MinTime::Divergent(Divergence::Markovian) => Ok(Region::A),
        MinTime::Divergent(Divergence::Horizon { horizon, .. }) => Err(Error::HorizonExpired { horizon }),
    }
}

/// Purity gain from the S2 coherences over the S1 value at the pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PurityGain {
    pub t_min: MinTime,
    /// Purity at the north-pole event.
    pub p_final: Option<f64>,
    /// Largest purity on `(0, T_min]`.
    pub p_max: Option<f64>,
    pub t_max: Option<f64>,
    pub delta_p: Option<f64>,
}

/// `ΔP = P_max/P(T_min) − 1` under resonant control. `P_max` is the
/// largest of `P(T_min)` and the interior maxima of the purity before the
/// pole is reached.
pub fn delta_p(params: &ModelParams, xi: f64, mu_q: f64, opts: &AnalysisOptions) -> Result<PurityGain> {
    let spec = InitialStateSpec::new(mu_q, 0.0, Complex64::new(xi, 0.0));
    let x0 = build_initial_state(&spec, params)?;
    let angular = run_angular(params, xi, opts)?;
    let Some(t_est) = angular.t_min.value() else {
        return Ok(PurityGain {
            t_min: angular.t_min,
            p_final: None,
            p_max: None,
            t_max: None,
            delta_p: None,
        });
    };
    let z0 = x_to_z(&x0.x);
    let p = *params;
    let rhs =
        |_t: f64, z: &[f64; 8]| -> Result<[f64; 8]> { Ok(z_rhs(z, crate::liouville::Modulation::resonant(&p), &p)) };
    let purity_rate = move |_t: f64, z: &[f64; 8]| {
        let d = z_rhs(z, crate::liouville::Modulation::resonant(&p), &p);
        z[0] * d[0] + z[4] * d[4] + z[6] * d[6]
    };
    let events = [
        crate::liouville::north_pole_event(true, |z: &[f64; 8]| *z),
        Event::new(Direction::Falling, purity_rate),
    ];
    let horizon = 1.5 * t_est + params.t0();
    let sol = ode::integrate(
        rhs,
        0.0,
        z0,
        horizon,
        &Output::Samples(vec![]),
        &events,
        &Options::with_tol(opts.tol),
        None,
    )?;
    if !sol.terminated {
        return Err(Error::HorizonExpired { horizon });
    }
    let t_min = sol.t_final;
    let p_final = purity_z(&sol.y_final);
    let (mut p_max, mut t_max) = (p_final, t_min);
    if mu_q != 0.0 {
        for hit in sol.events.iter().filter(|h| h.index == 1 && h.t < t_min - 1e-8) {
            let v = purity_z(&hit.y);
            if v > p_max {
                p_max = v;
                t_max = hit.t;
            }
        }
    }
    Ok(PurityGain {
        t_min: MinTime::Finite(t_min),
        p_final: Some(p_final),
        p_max: Some(p_max),
        t_max: Some(t_max),
        delta_p: Some(p_max / p_final - 1.0),
    })
}

/// Full analysis record for one initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControlAnalysis {
    pub params: ModelParams,
    pub xi: f64,
    pub mu_q: f64,
    pub regime: Regime,
    pub region: Option<Region>,
    pub t_min: MinTime,
    pub divergence: Option<Divergence>,
    pub theta_fixed: Option<f64>,
    pub p_final: Option<f64>,
    pub p_max: Option<f64>,
    pub delta_p: Option<f64>,
}

pub fn analyze(params: &ModelParams, xi: f64, mu_q: f64, opts: &AnalysisOptions) -> Result<ControlAnalysis> {
    let start = angular_start(params, xi)?;
    let region = match classify_region(xi, params.coupling, params, opts) {
        Ok(r) => Some(r),
        Err(Error::HorizonExpired { .. }) => None,
        Err(e) => return Err(e),
    };
    let gain = delta_p(params, xi, mu_q, opts)?;
    Ok(ControlAnalysis {
        params: *params,
        xi,
        mu_q,
        regime: classify_regime(params.coupling, params.gamma),
        region,
        t_min: gain.t_min,
        divergence: gain.t_min.divergence(),
        theta_fixed: fixed_point_theta(start.r, start.c, params),
        p_final: gain.p_final,
        p_max: gain.p_max,
        delta_p: gain.delta_p,
    })
}

/// Resonant reduced trajectory from the state `(mu_q, xi)`, stopped at the
/// north pole (or at `t_end`).
pub fn resonant_trajectory(
    params: &ModelParams,
    xi: f64,
    mu_q: f64,
    t_end: f64,
    opts: &PropagateOptions,
) -> Result<crate::trajectory::Trajectory> {
    let spec = InitialStateSpec::new(mu_q, 0.0, Complex64::new(xi, 0.0));
    let x0 = build_initial_state(&spec, params)?;
    reduced::propagate_reduced(
        &reduced::ReducedState::from_x(&x0.x),
        &ControlLaw::resonant(),
        params,
        (0.0, t_end),
        opts,
    )
}
