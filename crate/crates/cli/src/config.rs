//! Experiment configuration: JSON in, validated `ExperimentConfig` out.

use std::fmt;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use nslab_core::lattice::DEFAULT_MAX_SHELLS;
use nslab_core::malliavin::default_epsilons;
use nslab_core::spectral::ModeCoeff;
use nslab_core::{ModeIndex, SimConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Simulate,
    Malliavin,
    Lattice,
    Quadvar,
    Control,
    Bracket,
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Kind::Simulate => "simulate",
            Kind::Malliavin => "malliavin",
            Kind::Lattice => "lattice",
            Kind::Quadvar => "quadvar",
            Kind::Control => "control",
            Kind::Bracket => "bracket",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when present.
    #[serde(default)]
    pub experiment: Option<Kind>,
    #[serde(default)]
    pub sim: SimConfig,
    #[serde(default)]
    pub analysis: Analysis,
    /// Output directory; `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Master seed; `--seed` takes precedence, and it overrides `sim.seed`.
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Analysis {
    pub n_paths: usize,
    /// Subspace for `malliavin`, projection modes for `control`.
    pub subspace: Vec<ModeIndex>,
    pub epsilons: Vec<f64>,
    /// Start time `s` (control) or `t0` (bracket).
    pub t0: f64,
    /// Evaluation time; defaults to `sim.t_final`.
    pub t: Option<f64>,
    pub max_shells: usize,
    /// Target of `Π w(t)` for `control`.
    pub target: Vec<f64>,
    pub max_iterations: usize,
    pub tolerance: f64,
    /// Test function for `bracket`.
    pub phi: Vec<ModeCoeff>,
    /// Block lengths `Δ` for `quadvar`.
    pub deltas: Vec<f64>,
    pub n_channels: usize,
    pub horizon: f64,
    pub cascade_epsilon: Option<f64>,
    pub cascade_levels: u32,
}

impl Default for Analysis {
    fn default() -> Self {
        Self {
            n_paths: 1,
            subspace: Vec::new(),
            epsilons: default_epsilons(),
            t0: 0.0,
            t: None,
            max_shells: DEFAULT_MAX_SHELLS,
            target: Vec::new(),
            max_iterations: 200,
            tolerance: 1e-6,
            phi: Vec::new(),
            deltas: vec![0.1],
            n_channels: 2,
            horizon: 1.0,
            cascade_epsilon: None,
            cascade_levels: 3,
        }
    }
}

/// A config problem, addressed by file line where one can be found.
#[derive(Debug)]
pub struct ConfigError {
    pub file: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.file.display())?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
            if let Some(c) = self.column {
                write!(f, ":{c}")?;
            }
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

/// Parsed config plus the raw JSON it came from.
pub struct Loaded {
    pub config: ExperimentConfig,
    pub raw: serde_json::Value,
}

pub fn parse(path: &Path, text: &str) -> Result<Loaded, ConfigError> {
    let json_err = |e: serde_json::Error| ConfigError {
        file: path.into(),
        line: Some(e.line()),
        column: Some(e.column()),
        message: {
            let m = e.to_string();
            let tail = format!(" at line {} column {}", e.line(), e.column());
            m.strip_suffix(&tail).map(String::from).unwrap_or(m)
        },
    };
    let raw: serde_json::Value = serde_json::from_str(text).map_err(json_err)?;
    let config: ExperimentConfig = serde_json::from_str(text).map_err(json_err)?;
    Ok(Loaded { config, raw })
}

/// Resolve CLI overrides and check everything the chosen experiment needs.
pub fn resolve(
    path: &Path,
    text: &str,
    mut config: ExperimentConfig,
    kind: Kind,
    seed: Option<u64>,
) -> Result<ExperimentConfig, ConfigError> {
    let fail = |key: &str, message: String| ConfigError {
        file: path.into(),
        line: key_line(text, key),
        column: None,
        message,
    };
    if let Some(k) = config.experiment {
        if k != kind {
            return Err(fail("experiment", format!("experiment: config says `{k}` but subcommand is `{kind}`")));
        }
    }
    config.experiment = Some(kind);
    if let Some(s) = seed.or(config.seed) {
        config.sim.seed = s;
    }
    config.seed = Some(config.sim.seed);

    let sim = &config.sim;
    sim.validate().map_err(|e| fail("sim", format!("sim: {e}")))?;
    let a = &config.analysis;
    let t = a.t.unwrap_or(sim.t_final);
    if !(t > 0.0 && t <= sim.t_final) {
        return Err(fail("t", format!("analysis.t: must lie in (0, t_final = {}], got {t}", sim.t_final)));
    }
    if !(a.t0 >= 0.0 && a.t0 < t) {
        return Err(fail("t0", format!("analysis.t0: must lie in [0, t), got {}", a.t0)));
    }
    if a.n_paths == 0 {
        return Err(fail("n_paths", "analysis.n_paths: must be positive".into()));
    }
    match kind {
        Kind::Malliavin => {
            if a.subspace.is_empty() {
                return Err(fail("analysis", "analysis.subspace: required for malliavin".into()));
            }
            if a.epsilons.iter().any(|e| !(*e > 0.0)) {
                return Err(fail("epsilons", "analysis.epsilons: entries must be positive".into()));
            }
        }
        Kind::Control => {
            if a.subspace.is_empty() || a.subspace.len() != a.target.len() {
                return Err(fail(
                    "target",
                    format!(
                        "analysis.target: need one value per subspace mode ({} modes, {} values)",
                        a.subspace.len(),
                        a.target.len()
                    ),
                ));
            }
        }
        Kind::Bracket => {
            if a.phi.is_empty() {
                return Err(fail("analysis", "analysis.phi: required for bracket".into()));
            }
        }
        Kind::Quadvar => {
            if a.deltas.is_empty() || a.deltas.iter().any(|d| !(*d > 0.0 && *d <= a.horizon)) {
                return Err(fail("deltas", format!("analysis.deltas: need 0 < Δ <= horizon = {}", a.horizon)));
            }
            if a.n_channels < 2 {
                return Err(fail("n_channels", "analysis.n_channels: need at least 2".into()));
            }
            if let Some(e) = a.cascade_epsilon {
                if !(e > 0.0 && e < 1.0) {
                    return Err(fail("cascade_epsilon", format!("analysis.cascade_epsilon: need (0, 1), got {e}")));
                }
            }
        }
        Kind::Simulate | Kind::Lattice => {}
    }
    Ok(config)
}

/// First line holding `"key"`, 1-based.
fn key_line(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.lines().position(|l| l.contains(&needle)).map(|i| i + 1)
}
