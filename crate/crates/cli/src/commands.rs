//! Subcommand implementations. Each builds a [`Report`] from a validated
//! configuration; nothing here touches the filesystem.

use num_complex::Complex64;
use qpurify::control::{
    classify_regime, classify_region, delta_p, resonant_trajectory, t_min_numeric_with, t_min_uncorrelated, xi_fixed,
    Divergence, MinTime, XiFixed,
};
use qpurify::liouville::{propagate_full, propagate_lab, PropagateOptions};
use qpurify::model::{build_initial_state, mu_max, xi_max, ModelParams};
use qpurify::ode::{linspace, Output};
use qpurify::reduced::{propagate_reduced, ReducedState};
use qpurify::trajectory::Coordinates;
use qpurify::{Error, EventKind, ModelConfig};

use crate::config::{Frame, RunConfig};
use crate::error::{CliError, Result};
use crate::output::{Cell, Report};
use crate::sweep::{axis_or, par_map, SweepAxis};

/// Inverse temperature of the region map unless the model sets one.
pub const REGION_MAP_BETA: f64 = 0.1;

fn status(t: &MinTime) -> &'static str {
    match t {
        MinTime::Finite(_) => "finite",
        MinTime::Divergent(Divergence::Markovian) => "markovian",
        MinTime::Divergent(Divergence::FixedPoint { .. }) => "fixed-point",
        MinTime::Divergent(Divergence::Horizon { .. }) => "horizon",
    }
}

fn require_coupling(p: &ModelParams) -> Result<()> {
    if p.coupling > 0.0 {
        Ok(())
    } else {
        Err(CliError::config("this command needs J > 0", Some("J")))
    }
}

/// Rows computed in parallel, the first failure in grid order wins.
fn collect_rows(rows: Vec<Result<Vec<Cell>>>, report: &mut Report) -> Result<()> {
    for row in rows {
        report.push(row?);
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.model.params()?;
    let x0 = build_initial_state(&cfg.model.initial_spec(), &p)?;
    let t_end = match cfg.simulate.t_end {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => {
            return Err(CliError::config(
                format!("t_end must be > 0, got {t}"),
                Some("simulate.t_end"),
            ))
        }
        None if p.coupling > 0.0 => 2.0 * p.t0(),
        None => return Err(CliError::config("t_end is required when J = 0", Some("simulate.t_end"))),
    };
    let coords = match (cfg.frame, cfg.simulate.coordinates) {
        (Frame::Lab, Some(Coordinates::Z)) => {
            return Err(CliError::config(
                "the reduced coordinates are defined in the rotating frame only",
                Some("simulate.coordinates"),
            ))
        }
        (Frame::Lab, _) => Coordinates::X,
        (Frame::Rwa, c) => c.unwrap_or(Coordinates::Z),
    };
    let stop = cfg.simulate.stop_at_north_pole.unwrap_or(cfg.frame == Frame::Rwa);
    let opts = PropagateOptions {
        tol: cfg.tol()?,
        output: Output::Samples(linspace(0.0, t_end, cfg.simulate.samples())),
        stop_at_north_pole: stop,
        ..Default::default()
    };
    let traj = match (cfg.frame, coords) {
        (Frame::Lab, _) => propagate_lab(&x0, &cfg.control, &p, (0.0, t_end), &opts)?,
        (Frame::Rwa, Coordinates::X) => propagate_full(&x0, &cfg.control, &p, (0.0, t_end), &opts)?,
        (Frame::Rwa, Coordinates::Z) => {
            propagate_reduced(&ReducedState::from_x(&x0.x), &cfg.control, &p, (0.0, t_end), &opts)?
        }
    };
    let header = coords.header();
    let columns: Vec<&str> = header.split(',').collect();
    let mut report = Report::new("simulate", cfg, &columns);
    report.meta("params", p);
    report.meta("t_end", t_end);
    report.meta("tls_purity", p.tls_purity());
    report.meta("events", &traj.events);
    report.meta("stats", traj.stats);
    if let Some(v) = traj.purity.last() {
        report.meta("final_purity", v);
    }
    for ((t, s), pur) in traj.times.iter().zip(&traj.states).zip(&traj.purity) {
        let mut row = vec![Cell::num(*t)];
        row.extend(s.iter().map(|v| Cell::num(*v)));
        row.push(Cell::num(*pur));
        report.push(row);
    }
    Ok(report)
}

pub fn scan_gamma(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.model.params()?;
    require_coupling(&p)?;
    let opts = cfg.analysis()?;
    let ratios = axis_or(&cfg.sweeps, SweepAxis::linear("gamma_ratio", 0.0, 4.5, 46)).points();
    let xm = xi_max(&p.populations());
    let rows = par_map(&ratios, cfg.workers(), |&ratio| -> Result<Vec<Cell>> {
        let pg = p.with_gamma(ratio * p.coupling)?;
        let unc = t_min_uncorrelated(pg.coupling, pg.gamma)?;
        let cor = t_min_numeric_with(&pg, xm, &opts)?.t_min;
        Ok(vec![
            Cell::num(ratio),
            Cell::min_time(&unc, pg.t0()),
            Cell::min_time(&cor, pg.t0()),
            Cell::label(status(&unc)),
            Cell::label(status(&cor)),
        ])
    });
    let mut report = Report::new(
        "scan-gamma",
        cfg,
        &[
            "gamma_over_J",
            "t_min_over_t0_uncorrelated",
            "t_min_over_t0_correlated",
            "status_uncorrelated",
            "status_correlated",
        ],
    );
    report.meta("J", p.coupling);
    report.meta("beta", p.beta);
    report.meta("t0", p.t0());
    report.meta("xi_max", xm);
    collect_rows(rows, &mut report)?;
    Ok(report)
}

/// Inverse temperature below which `κ(2N(β)+1) ≥ 4J`.
pub fn markovian_threshold_beta(p: &ModelParams) -> Option<f64> {
    if !(p.kappa > 0.0) {
        return None;
    }
    let n = (4.0 * p.coupling / p.kappa - 1.0) / 2.0;
    (n > 0.0).then(|| (1.0 / n).ln_1p() / p.omega_tls)
}

pub fn scan_beta(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.model.params()?;
    require_coupling(&p)?;
    let opts = cfg.analysis()?;
    let betas = axis_or(&cfg.sweeps, SweepAxis::log("beta", 0.05, 10.0, 40)).points();
    let rows = par_map(&betas, cfg.workers(), |&beta| -> Result<Vec<Cell>> {
        let pb = p.with_beta(beta)?;
        let xm = xi_max(&pb.populations());
        let unc = t_min_uncorrelated(pb.coupling, pb.gamma)?;
        let cor = t_min_numeric_with(&pb, xm, &opts)?.t_min;
        Ok(vec![
            Cell::num(beta),
            Cell::num(pb.gamma / pb.coupling),
            Cell::num(xm),
            Cell::min_time(&unc, pb.t0()),
            Cell::min_time(&cor, pb.t0()),
            Cell::label(status(&unc)),
            Cell::label(status(&cor)),
        ])
    });
    let mut report = Report::new(
        "scan-beta",
        cfg,
        &[
            "beta",
            "gamma_over_J",
            "xi_max",
            "t_min_over_t0_uncorrelated",
            "t_min_over_t0_correlated",
            "status_uncorrelated",
            "status_correlated",
        ],
    );
    report.meta("J", p.coupling);
    report.meta("kappa", p.kappa);
    report.meta("t0", p.t0());
    if let Some(b) = markovian_threshold_beta(&p) {
        report.meta("beta_threshold", b);
    }
    collect_rows(rows, &mut report)?;
    Ok(report)
}

fn xi_fixed_cell(x: XiFixed) -> Cell {
    match x {
        XiFixed::Threshold { xi } => Cell::num(xi),
        XiFixed::Saturated { .. } => Cell::label("saturated"),
        XiFixed::Absent => Cell::label("absent"),
    }
}

pub fn region_map(cfg: &RunConfig) -> Result<Report> {
    let mut cfg = cfg.clone();
    if !cfg.model_keys.contains("beta") {
        cfg.model = ModelConfig {
            beta: REGION_MAP_BETA,
            ..cfg.model
        };
    }
    let p = cfg.model.params()?;
    let opts = cfg.analysis()?;
    let xm = xi_max(&p.populations());
    let xis = axis_or(&cfg.sweeps, SweepAxis::linear("xi", 0.0, xm, 50)).points();
    let js = axis_or(
        &cfg.sweeps,
        SweepAxis::linear("J", 0.1 * p.j_min(), 1.5 * p.j_min(), 50),
    )
    .points();
    let cells: Vec<(f64, f64)> = js.iter().flat_map(|&j| xis.iter().map(move |&xi| (j, xi))).collect();
    let rows = par_map(&cells, cfg.workers(), |&(j, xi)| -> Result<Vec<Cell>> {
        let pj = p.with_coupling(j)?;
        let region = match classify_region(xi, j, &p, &opts) {
            Ok(r) => r.label(),
            Err(Error::HorizonExpired { .. }) => "horizon-expired",
            Err(Error::NotPositive { .. }) => "unphysical",
            Err(e) => return Err(e.into()),
        };
        Ok(vec![
            Cell::num(j),
            Cell::num(xi),
            Cell::label(region),
            xi_fixed_cell(xi_fixed(&pj)),
        ])
    });
    let mut report = Report::new("region-map", &cfg, &["J", "xi", "region", "xi_fixed"]);
    report.meta("beta", p.beta);
    report.meta("gamma", p.gamma);
    report.meta("j_min", p.j_min());
    report.meta("xi_max", xm);
    collect_rows(rows, &mut report)?;
    Ok(report)
}

pub fn coherence_map(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.model.params()?;
    require_coupling(&p)?;
    let opts = cfg.analysis()?;
    let xm = xi_max(&p.populations());
    let xis = axis_or(&cfg.sweeps, SweepAxis::linear("xi", 0.0, xm, 21)).points();
    let mus = axis_or(
        &cfg.sweeps,
        SweepAxis::linear("mu_q", 0.0, mu_max(Complex64::new(0.0, 0.0), &p), 21),
    )
    .points();
    let cells: Vec<(f64, f64)> = xis.iter().flat_map(|&xi| mus.iter().map(move |&mu| (xi, mu))).collect();
    let rows = par_map(&cells, cfg.workers(), |&(xi, mu)| -> Result<Vec<Cell>> {
        let head = |mm: Cell| vec![Cell::num(xi), Cell::num(mu), mm];
        let labelled = |mm: Cell, what: &str| {
            let mut row = head(mm);
            row.extend(std::iter::repeat_n(Cell::label(what), 6));
            row
        };
        if xi.abs() > xm {
            return Ok(labelled(Cell::label("unphysical"), "unphysical"));
        }
        let mm = mu_max(Complex64::new(xi, 0.0), &p);
        if mu.abs() > mm {
            return Ok(labelled(Cell::num(mm), "unphysical"));
        }
        let gain = match delta_p(&p, xi, mu, &opts) {
            Ok(g) => g,
            Err(Error::NotPositive { .. }) => return Ok(labelled(Cell::num(mm), "unphysical")),
            Err(Error::HorizonExpired { .. }) => return Ok(labelled(Cell::num(mm), "horizon-expired")),
            Err(e) => return Err(e.into()),
        };
        let Some(dp) = gain.delta_p else {
            let mut row = head(Cell::num(mm));
            row.push(Cell::label("divergent"));
            row.push(Cell::min_time(&gain.t_min, p.t0()));
            row.extend(std::iter::repeat_n(Cell::label("divergent"), 4));
            return Ok(row);
        };
        let mut row = head(Cell::num(mm));
        row.extend([
            Cell::label("ok"),
            Cell::min_time(&gain.t_min, p.t0()),
            Cell::num(gain.p_final.unwrap_or_default()),
            Cell::num(gain.p_max.unwrap_or_default()),
            Cell::num(dp),
            Cell::num(100.0 * dp),
        ]);
        Ok(row)
    });
    let mut report = Report::new(
        "coherence-map",
        cfg,
        &[
            "xi",
            "mu_q",
            "mu_max",
            "status",
            "t_min_over_t0",
            "p_final",
            "p_max",
            "delta_p",
            "delta_p_percent",
        ],
    );
    report.meta("params", p);
    report.meta("xi_max", xm);
    collect_rows(rows, &mut report)?;
    Ok(report)
}

#[derive(serde::Serialize)]
struct TraceSummary {
    xi: f64,
    mu_q: f64,
    t_min: MinTime,
    t_peak: Option<f64>,
    p_peak: Option<f64>,
}

pub fn purity_trace(cfg: &RunConfig) -> Result<Report> {
    let p = cfg.model.params()?;
    require_coupling(&p)?;
    let opts = cfg.analysis()?;
    let xm = xi_max(&p.populations());
    let fracs = axis_or(&cfg.sweeps, SweepAxis::linear("mu_frac", 0.0, 1.0, 5)).points();
    let cells: Vec<(f64, f64)> = [0.0, 0.5 * xm]
        .iter()
        .flat_map(|&xi| {
            let mm = mu_max(Complex64::new(xi, 0.0), &p);
            fracs.iter().map(move |&f| (xi, f * mm))
        })
        .collect();
    let n = cfg.simulate.samples();
    let tol = cfg.tol()?;
    let traces = par_map(
        &cells,
        cfg.workers(),
        |&(xi, mu)| -> Result<(TraceSummary, Vec<Vec<Cell>>)> {
            let gain = delta_p(&p, xi, mu, &opts)?;
            let t_end = gain.t_min.value().unwrap_or(opts.horizon * p.t0());
            let popts = PropagateOptions {
                tol,
                output: Output::Samples(linspace(0.0, t_end, n)),
                stop_at_north_pole: true,
                ..Default::default()
            };
            // run a little past the estimate so the pole event itself is recorded
            let traj = resonant_trajectory(&p, xi, mu, t_end + 0.01 * p.t0(), &popts)?;
            let rows = traj
                .times
                .iter()
                .zip(&traj.purity)
                .map(|(t, v)| vec![Cell::num(xi), Cell::num(mu), Cell::num(*t), Cell::num(*v)])
                .collect();
            let summary = TraceSummary {
                xi,
                mu_q: mu,
                t_min: gain.t_min,
                t_peak: gain.t_max,
                p_peak: gain.p_max,
            };
            Ok((summary, rows))
        },
    );
    let mut report = Report::new("purity-trace", cfg, &["xi", "mu_q", "t", "purity"]);
    report.meta("tls_purity", p.tls_purity());
    report.meta("xi_max", xm);
    let mut summaries = Vec::new();
    for trace in traces {
        let (summary, rows) = trace?;
        summaries.push(summary);
        for row in rows {
            report.push(row);
        }
    }
    if let Some(top) = summaries.last() {
        report.meta("p_max", top.p_peak);
        report.meta("t_max", top.t_peak);
    }
    report.meta("traces", &summaries);
    report.meta("regime", classify_regime(p.coupling, p.gamma));
    Ok(report)
}

/// Time of the pole event in a simulate report, if reached.
pub fn pole_time(report: &Report) -> Option<f64> {
    let events = report.metadata.get("events")?.as_array()?;
    let kind = serde_json::to_value(EventKind::NorthPoleReached).ok()?;
    events.iter().find(|e| e["kind"] == kind).and_then(|e| e["t"].as_f64())
}
