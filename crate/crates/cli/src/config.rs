//! Run configuration: model, control, sweeps, tolerances and output.

use std::collections::BTreeSet;
use std::path::PathBuf;

use qpurify::control::{AnalysisOptions, DEFAULT_HORIZON};
use qpurify::liouville::ControlLaw;
use qpurify::ode::Tolerances;
use qpurify::trajectory::Coordinates;
use qpurify::ModelConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::sweep::SweepAxis;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Frame {
    /// Rotating frame after the rotating wave approximation.
    #[default]
    Rwa,
    /// Laboratory frame with the full coupling.
    Lab,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// End time; defaults to `2 T₀`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_end: Option<f64>,
    /// Number of sample intervals.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// `z` in the rotating frame, `x` in the laboratory frame by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coordinates: Option<Coordinates>,
    /// Defaults to on in the rotating frame.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop_at_north_pole: Option<bool>,
}

impl SimulateConfig {
    pub const DEFAULT_SAMPLES: usize = 200;

    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(Self::DEFAULT_SAMPLES)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToleranceConfig {
    pub abs: f64,
    pub rel: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        let t = Tolerances::default();
        Self { abs: t.abs, rel: t.rel }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Divergence horizon in units of `T₀`.
    pub horizon: f64,
    pub frame: Frame,
    /// Not echoed into outputs so that results do not depend on it.
    #[serde(skip_serializing)]
    pub workers: Option<usize>,
    pub model: ModelConfig,
    pub control: ControlLaw,
    pub simulate: SimulateConfig,
    pub tolerances: ToleranceConfig,
    pub output: OutputConfig,
    #[serde(rename = "sweep", skip_serializing_if = "Vec::is_empty")]
    pub sweeps: Vec<SweepAxis>,
    /// Keys given explicitly in the `[model]` table.
    #[serde(skip)]
    pub model_keys: BTreeSet<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            horizon: DEFAULT_HORIZON,
            frame: Frame::default(),
            workers: None,
            model: ModelConfig::default(),
            control: ControlLaw::resonant(),
            simulate: SimulateConfig::default(),
            tolerances: ToleranceConfig::default(),
            output: OutputConfig::default(),
            sweeps: Vec::new(),
            model_keys: BTreeSet::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let raw: toml::Table = toml::from_str(text).map_err(|e| CliError::config(e.to_string(), None))?;
        let mut cfg: RunConfig = raw
            .clone()
            .try_into()
            .map_err(|e: toml::de::Error| CliError::config(e.message().to_owned(), None))?;
        if let Some(model) = raw.get("model").and_then(toml::Value::as_table) {
            cfg.model_keys = model.keys().cloned().collect();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.into(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0) || !self.horizon.is_finite() {
            return Err(CliError::config(
                format!("horizon must be > 0, got {}", self.horizon),
                Some("horizon"),
            ));
        }
        if self.workers == Some(0) {
            return Err(CliError::config("workers must be >= 1", Some("workers")));
        }
        if self.simulate.samples == Some(0) {
            return Err(CliError::config("samples must be >= 1", Some("simulate.samples")));
        }
        self.tol()?;
        let mut seen = BTreeSet::new();
        for axis in &self.sweeps {
            axis.validate()?;
            if !seen.insert(axis.name.as_str()) {
                return Err(CliError::config(
                    format!("sweep axis {} given twice", axis.name),
                    Some(&axis.name),
                ));
            }
        }
        Ok(())
    }

    pub fn tol(&self) -> Result<Tolerances> {
        Ok(Tolerances::new(self.tolerances.abs, self.tolerances.rel)?)
    }

    pub fn analysis(&self) -> Result<AnalysisOptions> {
        Ok(AnalysisOptions {
            tol: self.tol()?,
            horizon: self.horizon,
        })
    }

    pub fn workers(&self) -> usize {
        self.workers
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }

    /// The configuration as TOML text.
    pub fn echo(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

/// Parses `ABS:REL`.
pub fn parse_tol(s: &str) -> std::result::Result<ToleranceConfig, String> {
    let (a, r) = s.split_once(':').ok_or_else(|| format!("expected ABS:REL, got {s}"))?;
    let abs = a.trim().parse::<f64>().map_err(|e| format!("ABS: {e}"))?;
    let rel = r.trim().parse::<f64>().map_err(|e| format!("REL: {e}"))?;
    Tolerances::new(abs, rel).map_err(|e| e.to_string())?;
    Ok(ToleranceConfig { abs, rel })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = RunConfig::from_toml_str("").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn full_file_parses() {
        let text = r#"
            horizon = 30.0
            workers = 4
            frame = "lab"

            [model]
            beta = 0.5
            gamma = 0.1

            [control]
            shape = { kind = "constant-detuning", delta = 0.01 }

            [simulate]
            t_end = 50.0
            samples = 10

            [tolerances]
            abs = 1e-9
            rel = 1e-8

            [output]
            format = "json"

            [[sweep]]
            name = "gamma_ratio"
            start = 0.0
            stop = 3.0
            count = 4
        "#;
        let cfg = RunConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.horizon, 30.0);
        assert_eq!(cfg.frame, Frame::Lab);
        assert_eq!(cfg.output.format, Format::Json);
        assert_eq!(cfg.sweeps[0].points(), vec![0.0, 1.0, 2.0, 3.0]);
        assert!(cfg.model_keys.contains("beta"));
        assert!(!cfg.model_keys.contains("J"));
        assert_eq!(cfg.tol().unwrap().rel, 1e-8);
    }

    #[test]
    fn echo_round_trips_without_workers() {
        let mut cfg =
            RunConfig::from_toml_str("[[sweep]]\nname = \"beta\"\nstart = 0.1\nstop = 1.0\ncount = 3\nscale = \"log\"")
                .unwrap();
        cfg.workers = Some(8);
        let text = cfg.echo();
        assert!(!text.contains("workers"));
        let back = RunConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.sweeps, cfg.sweeps);
        assert_eq!(back.model, cfg.model);
    }

    #[test]
    fn rejects_bad_fields() {
        assert!(RunConfig::from_toml_str("horizon = -1.0").is_err());
        assert!(RunConfig::from_toml_str("colour = 1").is_err());
        let dup = "[[sweep]]\nname = \"xi\"\nstart = 0.0\nstop = 1.0\ncount = 2\n".repeat(2);
        assert_eq!(
            RunConfig::from_toml_str(&dup).unwrap_err().parameter().as_deref(),
            Some("xi")
        );
        let e = RunConfig::from_toml_str("[tolerances]\nabs = -1.0").unwrap_err();
        assert_eq!(e.code(), "invalid-parameter");
    }

    #[test]
    fn tolerance_flag() {
        assert_eq!(
            parse_tol("1e-8:1e-6").unwrap(),
            ToleranceConfig { abs: 1e-8, rel: 1e-6 }
        );
        assert!(parse_tol("1e-8").is_err());
        assert!(parse_tol("x:1").is_err());
    }
}
