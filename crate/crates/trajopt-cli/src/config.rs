//! Run configuration: JSON file format, defaults, and round-tripping.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use trajopt_core::ScenarioOverrides;

/// Which solver(s) a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Scp,
    Osscp,
    #[default]
    Both,
}

impl Method {
    pub fn parse(s: &str) -> anyhow::Result<Self> {
        match s {
            "scp" => Ok(Method::Scp),
            "osscp" => Ok(Method::Osscp),
            "both" => Ok(Method::Both),
            other => anyhow::bail!("unknown method '{other}' (expected scp, osscp, or both)"),
        }
    }

    pub fn runs_scp(&self) -> bool {
        matches!(self, Method::Scp | Method::Both)
    }

    pub fn runs_osscp(&self) -> bool {
        matches!(self, Method::Osscp | Method::Both)
    }
}

/// One initial guess: either a named generator or explicit waypoints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GuessSpec {
    Named(String),
    Waypoints { waypoints: Vec<[f64; 2]> },
}

impl GuessSpec {
    pub fn label(&self, index: usize) -> String {
        match self {
            GuessSpec::Named(name) => name.clone(),
            GuessSpec::Waypoints { .. } => format!("waypoints-{index}"),
        }
    }
}

/// Top-level run configuration, loaded from a JSON file. Unknown fields are
/// rejected so typos fail loudly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    #[serde(default)]
    pub method: Method,
    /// `None` uses the scenario's default guess set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guesses: Option<Vec<GuessSpec>>,
    #[serde(default)]
    pub overrides: ScenarioOverrides,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Reserved; the algorithms are deterministic.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Also emit obstacle/terrain/guess CSVs for plotting.
    #[serde(default = "default_true")]
    pub plot_data: bool,
}

fn default_true() -> bool {
    true
}

impl RunConfig {
    /// Defaults for a named scenario: both methods, default guesses.
    pub fn defaults_for(scenario: &str) -> Self {
        Self {
            scenario: scenario.to_string(),
            method: Method::Both,
            guesses: None,
            overrides: ScenarioOverrides::default(),
            out_dir: None,
            seed: None,
            plot_data: true,
        }
    }
}

pub fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let cfg: RunConfig = serde_json::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;
    Ok(cfg)
}

pub fn config_to_string(cfg: &RunConfig) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(cfg)?)
}

pub fn write_config(path: &Path, cfg: &RunConfig) -> anyhow::Result<()> {
    fs::write(path, config_to_string(cfg)? + "\n")
        .with_context(|| format!("writing config {}", path.display()))
}
