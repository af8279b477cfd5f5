//! Adaptive Dormand–Prince 5(4) integrator with exact sample times and
//! bisection-located events.
//!
//! Steps are shortened so that every requested sample time is hit exactly,
//! which keeps sampled values at full step accuracy instead of relying on an
//! interpolant. A sign change of an event function inside an accepted step is
//! refined by re-taking a single step of reduced length from the step start
//! and bisecting on that length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Absolute and relative local error tolerances per step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { abs: 1e-10, rel: 1e-10 }
    }
}

impl Tolerances {
    pub fn new(abs: f64, rel: f64) -> Result<Self> {
        for (name, v) in [("abs_tol", abs), ("rel_tol", rel)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        Ok(Self { abs, rel })
    }
}

/// Which sign changes of an event function count as events.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `g` goes from negative to non-negative.
    Rising,
    /// `g` goes from positive to non-positive.
    Falling,
    Either,
}

impl Direction {
    fn crosses(self, before: f64, after: f64) -> bool {
        let rising = before < 0.0 && after >= 0.0;
        let falling = before > 0.0 && after <= 0.0;
        match self {
            Direction::Rising => rising,
            Direction::Falling => falling,
            Direction::Either => rising || falling,
        }
    }
}

type EventFn<'a, const N: usize> = Box<dyn Fn(f64, &[f64; N]) -> f64 + 'a>;
type GuardFn<'a, const N: usize> = Box<dyn Fn(f64, &[f64; N]) -> bool + 'a>;

/// A zero crossing of `g(t, y)` to be located during integration.
pub struct Event<'a, const N: usize> {
    g: EventFn<'a, N>,
    direction: Direction,
    terminal: bool,
    guard: Option<GuardFn<'a, N>>,
}

impl<'a, const N: usize> Event<'a, N> {
    pub fn new(direction: Direction, g: impl Fn(f64, &[f64; N]) -> f64 + 'a) -> Self {
        Self {
            g: Box::new(g),
            direction,
            terminal: false,
            guard: None,
        }
    }

    /// Stop the integration at this event.
    pub fn terminal(mut self) -> Self {
        self.terminal = true;
        self
    }

    /// Only crossings whose located state satisfies `guard` are reported.
    pub fn with_guard(mut self, guard: impl Fn(f64, &[f64; N]) -> bool + 'a) -> Self {
        self.guard = Some(Box::new(guard));
        self
    }
}

/// A located event: index into the event list, time and state.
#[derive(Debug, Clone, PartialEq)]
pub struct EventHit<const N: usize> {
    pub index: usize,
    pub t: f64,
    pub y: [f64; N],
}

/// Integrator bookkeeping.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

impl std::ops::AddAssign for Stats {
    fn add_assign(&mut self, rhs: Self) {
        self.accepted += rhs.accepted;
        self.rejected += rhs.rejected;
        self.rhs_evals += rhs.rhs_evals;
    }
}

/// What to record along the way.
#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    /// The initial point and the end of every accepted step.
    Steps,
    /// Exactly these times (sorted, inside the integration interval).
    Samples(Vec<f64>),
}

/// `n + 1` evenly spaced sample times covering `[t0, t1]`.
pub fn linspace(t0: f64, t1: f64, n: usize) -> Vec<f64> {
    let n = n.max(1);
    let mut v: Vec<f64> = (0..=n).map(|k| t0 + (t1 - t0) * k as f64 / n as f64).collect();
    v[n] = t1;
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Options {
    pub tol: Tolerances,
    pub h_max: f64,
    /// Width of the final bracket around an event time.
    pub event_time_tol: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            tol: Tolerances::default(),
            h_max: f64::INFINITY,
            event_time_tol: 1e-10,
        }
    }
}

impl Options {
    pub fn with_tol(tol: Tolerances) -> Self {
        Self { tol, ..Self::default() }
    }
}

#[derive(Debug, Clone)]
pub struct Solution<const N: usize> {
    pub times: Vec<f64>,
    pub states: Vec<[f64; N]>,
    pub events: Vec<EventHit<N>>,
    pub stats: Stats,
    pub t_final: f64,
    pub y_final: [f64; N],
    /// Whether a terminal event ended the run before `t1`.
    pub terminated: bool,
}

const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A2: [f64; 1] = [0.2];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] = [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Step<const N: usize> {
    y: [f64; N],
    /// Derivative at the new point (first stage of the next step).
    f: [f64; N],
    err: [f64; N],
}

fn combine<const N: usize>(y: &[f64; N], h: f64, coef: &[f64], ks: &[[f64; N]]) -> [f64; N] {
    let mut out = *y;
    for (c, k) in coef.iter().zip(ks) {
        if *c != 0.0 {
            for i in 0..N {
                out[i] += h * c * k[i];
            }
        }
    }
    out
}

fn all_finite<const N: usize>(v: &[f64; N]) -> bool {
    v.iter().all(|x| x.is_finite())
}

fn dp_step<const N: usize, F>(
    rhs: &F,
    t: f64,
    y: &[f64; N],
    k1: &[f64; N],
    h: f64,
    stats: &mut Stats,
) -> Result<Step<N>>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut ks = [[0.0; N]; 7];
    ks[0] = *k1;
    let tables: [&[f64]; 5] = [&A2, &A3, &A4, &A5, &A6];
    for (s, a) in tables.iter().enumerate() {
        let ys = combine(y, h, a, &ks[..=s]);
        ks[s + 1] = rhs(t + C[s + 1] * h, &ys)?;
    }
    let y_new = combine(y, h, &B, &ks[..6]);
    ks[6] = rhs(t + h, &y_new)?;
    stats.rhs_evals += 6;
    let mut err = [0.0; N];
    for i in 0..N {
        err[i] = h * (0..7).map(|s| E[s] * ks[s][i]).sum::<f64>();
    }
    Ok(Step {
        y: y_new,
        f: ks[6],
        err,
    })
}

fn error_norm<const N: usize>(tol: &Tolerances, y0: &[f64; N], y1: &[f64; N], err: &[f64; N]) -> f64 {
    if N == 0 {
        return 0.0;
    }
    let s: f64 = (0..N)
        .map(|i| {
            let sc = tol.abs + tol.rel * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (s / N as f64).sqrt()
}

fn scaled_norm<const N: usize>(tol: &Tolerances, y: &[f64; N], v: &[f64; N]) -> f64 {
    if N == 0 {
        return 0.0;
    }
    let s: f64 = (0..N).map(|i| (v[i] / (tol.abs + tol.rel * y[i].abs())).powi(2)).sum();
    (s / N as f64).sqrt()
}

fn initial_step<const N: usize, F>(
    rhs: &F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    tol: &Tolerances,
    stats: &mut Stats,
) -> Result<f64>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let d0 = scaled_norm(tol, y0, y0);
    let d1 = scaled_norm(tol, y0, f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let y1 = combine(y0, h0, &[1.0], std::slice::from_ref(f0));
    let f1 = rhs(t0 + h0, &y1)?;
    stats.rhs_evals += 1;
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - f0[i];
    }
    let d2 = scaled_norm(tol, y0, &diff) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1))
}

/// Callback receiving `(t, y, y')`.
pub type Observer<'a, const N: usize> = &'a mut dyn FnMut(f64, &[f64; N], &[f64; N]);

/// Integrates `y' = rhs(t, y)` from `t0` to `t1 >= t0`.
///
/// `observer` is called with `(t, y, y')` at the start and at the end of
/// every accepted step.
#[allow(clippy::too_many_arguments)]
pub fn integrate<const N: usize, F>(
    rhs: F,
    t0: f64,
    y0: [f64; N],
    t1: f64,
    output: &Output,
    events: &[Event<'_, N>],
    opts: &Options,
    mut observer: Option<Observer<'_, N>>,
) -> Result<Solution<N>>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    if !(t1 >= t0) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidParameter {
            name: "t_span",
            reason: format!("need finite t0 <= t1, got [{t0}, {t1}]"),
        });
    }
    let samples: &[f64] = match output {
        Output::Steps => &[],
        Output::Samples(s) => s,
    };
    if samples.windows(2).any(|w| w[1] < w[0]) || samples.iter().any(|&s| s < t0 || s > t1) {
        return Err(Error::InvalidParameter {
            name: "samples",
            reason: format!("sample times must be sorted and inside [{t0}, {t1}]"),
        });
    }
    let record_steps = matches!(output, Output::Steps);
    let tol = opts.tol;
    let mut stats = Stats::default();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut hits = Vec::new();

    let mut t = t0;
    let mut y = y0;
    let mut f = rhs(t, &y)?;
    stats.rhs_evals += 1;
    if !all_finite(&f) {
        return Err(Error::NonFinite { t });
    }
    if let Some(obs) = observer.as_mut() {
        obs(t, &y, &f);
    }
    let mut next_sample = 0;
    while next_sample < samples.len() && samples[next_sample] <= t0 {
        times.push(t0);
        states.push(y0);
        next_sample += 1;
    }
    if record_steps {
        times.push(t0);
        states.push(y0);
    }
    let mut g_prev: Vec<f64> = events.iter().map(|e| (e.g)(t, &y)).collect();

    let finish = |times, states, hits, stats, t, y, terminated| Solution {
        times,
        states,
        events: hits,
        stats,
        t_final: t,
        y_final: y,
        terminated,
    };
    if t1 == t0 {
        return Ok(finish(times, states, hits, stats, t, y, false));
    }

    let mut h = initial_step(&rhs, t, &y, &f, &tol, &mut stats)?
        .min(opts.h_max)
        .min(t1 - t0);
    let mut last_rejected = false;
    loop {
        let target = if next_sample < samples.len() {
            samples[next_sample]
        } else {
            t1
        };
        let mut h_try = h;
        let snap_to_target = t + h_try >= target - 1e-13 * target.abs().max(1.0);
        if snap_to_target {
            h_try = target - t;
        }
        if h_try < 16.0 * f64::EPSILON * t.abs().max(1.0) && !snap_to_target {
            return Err(Error::StepSizeUnderflow { t });
        }
        let step = match dp_step(&rhs, t, &y, &f, h_try, &mut stats) {
            Ok(s) if all_finite(&s.y) && all_finite(&s.f) => s,
            Ok(_) => {
                stats.rejected += 1;
                h = 0.1 * h_try;
                last_rejected = true;
                continue;
            }
            Err(e) => return Err(e),
        };
        let err = error_norm(&tol, &y, &step.y, &step.err);
        if err > 1.0 || !err.is_finite() {
            stats.rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).max(0.2)
            } else {
                0.1
            };
            h = h_try * fac;
            last_rejected = true;
            if h < 16.0 * f64::EPSILON * t.abs().max(1.0) {
                return Err(Error::StepSizeUnderflow { t });
            }
            continue;
        }
        stats.accepted += 1;
        let t_new = if snap_to_target { target } else { t + h_try };

        // events inside (t, t_new]
        let g_new: Vec<f64> = events.iter().map(|e| (e.g)(t_new, &step.y)).collect();
        let mut found: Vec<EventHit<N>> = Vec::new();
        for (k, ev) in events.iter().enumerate() {
            if !ev.direction.crosses(g_prev[k], g_new[k]) {
                continue;
            }
            let (te, ye) = locate(&rhs, ev, t, &y, &f, t_new - t, g_prev[k], opts, &mut stats)?;
            if ev.guard.as_ref().is_none_or(|gd| gd(te, &ye)) {
                found.push(EventHit { index: k, t: te, y: ye });
            }
        }
        found.sort_by(|a, b| a.t.total_cmp(&b.t));
        if let Some(pos) = found.iter().position(|h| events[h.index].terminal) {
            found.truncate(pos + 1);
            let stop = found[pos].clone();
            hits.extend(found);
            if stop.t >= t_new && snap_to_target && next_sample < samples.len() {
                times.push(t_new);
                states.push(step.y);
            }
            if times.last() != Some(&stop.t) {
                times.push(stop.t);
                states.push(stop.y);
            }
            if let Some(obs) = observer.as_mut() {
                let fy = rhs(stop.t, &stop.y)?;
                obs(stop.t, &stop.y, &fy);
            }
            return Ok(finish(times, states, hits, stats, stop.t, stop.y, true));
        }
        hits.extend(found);

        t = t_new;
        y = step.y;
        f = step.f;
        g_prev = g_new;
        if let Some(obs) = observer.as_mut() {
            obs(t, &y, &f);
        }
        if snap_to_target && next_sample < samples.len() {
            while next_sample < samples.len() && samples[next_sample] <= t {
                times.push(t);
                states.push(y);
                next_sample += 1;
            }
        } else if record_steps {
            times.push(t);
            states.push(y);
        }
        if t >= t1 {
            return Ok(finish(times, states, hits, stats, t, y, false));
        }

        let mut fac = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        // a step shortened to hit a sample should not shrink the next one
        let base = if snap_to_target { h.max(h_try) } else { h_try };
        h = (base * fac).min(opts.h_max);
    }
}

#[allow(clippy::too_many_arguments)]
fn locate<const N: usize, F>(
    rhs: &F,
    ev: &Event<'_, N>,
    t: f64,
    y: &[f64; N],
    f: &[f64; N],
    h: f64,
    g0: f64,
    opts: &Options,
    stats: &mut Stats,
) -> Result<(f64, [f64; N])>
where
    F: Fn(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let mut lo = 0.0;
    let mut hi = h;
    let mut y_hi = None;
    while hi - lo > opts.event_time_tol {
        let mid = 0.5 * (lo + hi);
        let s = dp_step(rhs, t, y, f, mid, stats)?;
        let gm = (ev.g)(t + mid, &s.y);
        // the bracket keeps the sign of g at the step start on its left
        if ev.direction.crosses(g0, gm) || gm == 0.0 || gm.signum() != g0.signum() {
            hi = mid;
            y_hi = Some(s.y);
        } else {
            lo = mid;
        }
    }
    let y_e = match y_hi {
        Some(v) => v,
        None => dp_step(rhs, t, y, f, hi, stats)?.y,
    };
    Ok((t + hi, y_e))
}
