//! Sweep axes and the static-partition worker pool.

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Parameter names a sweep axis may refer to.
pub const AXIS_NAMES: &[&str] = &["gamma_ratio", "beta", "xi", "J", "mu_q", "mu_frac"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    #[serde(default)]
    pub scale: Scale,
}

impl SweepAxis {
    pub fn linear(name: &str, start: f64, stop: f64, count: usize) -> Self {
        Self {
            name: name.into(),
            start,
            stop,
            count,
            scale: Scale::Linear,
        }
    }

    pub fn log(name: &str, start: f64, stop: f64, count: usize) -> Self {
        Self {
            name: name.into(),
            start,
            stop,
            count,
            scale: Scale::Log,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |why: String| {
            Err(CliError::config(
                format!("sweep axis {}: {why}", self.name),
                Some(&self.name),
            ))
        };
        if !AXIS_NAMES.contains(&self.name.as_str()) {
            return bad(format!("unknown parameter, expected one of {}", AXIS_NAMES.join(", ")));
        }
        if self.count < 2 {
            return bad(format!("count must be >= 2, got {}", self.count));
        }
        if !self.start.is_finite() || !self.stop.is_finite() {
            return bad("bounds must be finite".into());
        }
        if self.scale == Scale::Log && !(self.start > 0.0 && self.stop > 0.0) {
            return bad("log scale needs positive bounds".into());
        }
        Ok(())
    }

    /// Grid points with both endpoints reproduced exactly.
    pub fn points(&self) -> Vec<f64> {
        let n = self.count - 1;
        (0..=n)
            .map(|i| {
                if i == n {
                    return self.stop;
                }
                let s = i as f64 / n as f64;
                match self.scale {
                    Scale::Linear => self.start + (self.stop - self.start) * s,
                    Scale::Log => (self.start.ln() + (self.stop.ln() - self.start.ln()) * s).exp(),
                }
            })
            .collect()
    }
}

/// The configured axis called `name`, or `default`.
pub fn axis_or(axes: &[SweepAxis], default: SweepAxis) -> SweepAxis {
    axes.iter().find(|a| a.name == default.name).cloned().unwrap_or(default)
}

/// Maps `f` over `items` with `workers` threads, each taking one contiguous
/// block. Results come back in input order whatever the worker count.
pub fn par_map<T, R, F>(items: &[T], workers: usize, f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync,
{
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(&f).collect();
    }
    let block = items.len().div_ceil(workers);
    std::thread::scope(|scope| {
        let handles: Vec<_> = items
            .chunks(block)
            .map(|chunk| {
                let f = &f;
                scope.spawn(move || chunk.iter().map(f).collect::<Vec<R>>())
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}
