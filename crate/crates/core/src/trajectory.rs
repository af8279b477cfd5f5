//! Sampled trajectories and their CSV/JSON export.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::ode::Stats;

/// Which coordinate set a trajectory carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coordinates {
    /// The 16 real coordinates of the joint density matrix.
    X,
    /// The 8 reduced coordinates.
    Z,
}

impl Coordinates {
    pub fn dim(self) -> usize {
        match self {
            Coordinates::X => 16,
            Coordinates::Z => 8,
        }
    }

    pub fn header(self) -> String {
        let prefix = match self {
            Coordinates::X => "x",
            Coordinates::Z => "z",
        };
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=self.dim()).map(|i| format!("{prefix}{i}")));
        cols.push("purity".into());
        cols.join(",")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    NorthPoleReached,
    FixedPointOnset,
    HorizonExpired,
    PurityMaximum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEvent {
    pub t: f64,
    pub kind: EventKind,
}

/// Time-stamped states with the qubit purity at each sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub coordinates: Coordinates,
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub purity: Vec<f64>,
    pub events: Vec<TrajectoryEvent>,
    pub stats: Stats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    pub fn final_state(&self) -> Option<&[f64]> {
        self.states.last().map(Vec::as_slice)
    }

    pub fn event_time(&self, kind: EventKind) -> Option<f64> {
        self.events.iter().find(|e| e.kind == kind).map(|e| e.t)
    }

    /// Writes the header line and one row per sample.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.coordinates.header())?;
        for ((t, s), p) in self.times.iter().zip(&self.states).zip(&self.purity) {
            write!(w, "{}", fmt_float(*t))?;
            for v in s {
                write!(w, ",{}", fmt_float(*v))?;
            }
            writeln!(w, ",{}", fmt_float(*p))?;
        }
        Ok(())
    }

    /// JSON document with a `metadata` block followed by the samples.
    pub fn to_json<M: Serialize>(&self, metadata: &M) -> serde_json::Value {
        let samples: Vec<serde_json::Value> = self
            .times
            .iter()
            .zip(&self.states)
            .zip(&self.purity)
            .map(|((t, s), p)| serde_json::json!({ "t": t, "state": s, "purity": p }))
            .collect();
        serde_json::json!({
            "metadata": metadata,
            "coordinates": self.coordinates,
            "events": self.events,
            "stats": self.stats,
            "samples": samples,
        })
    }
}

/// Round-trip float formatting: 17 significant digits, lowercase exponent.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}
