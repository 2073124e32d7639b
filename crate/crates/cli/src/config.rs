//! Run configuration: flat `[section]` + `key = value` text.

use std::fmt;
use std::path::Path;

use lattice_kinetic::chain::{Scheme, SimConfig};
use lattice_kinetic::experiments::{E0Preset, InitSpec, LocalizedProfile};
use lattice_kinetic::model::ModelParams;
use lattice_kinetic::spectral::ModeGrid;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("{0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub lattice: LatticeSection,
    pub noise: NoiseSection,
    pub init: InitSection,
    pub run: RunSection,
    pub output: OutputSection,
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub omega0: f64,
    /// Full coupling table `α_0, α_1, ...`; overrides `omega0` when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { omega0: 1.0, alpha: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LatticeSection {
    pub n: usize,
}

impl Default for LatticeSection {
    fn default() -> Self {
        Self { n: 256 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseSection {
    pub epsilon: f64,
    pub dt: f64,
    pub scheme: Scheme,
}

impl Default for NoiseSection {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            dt: 0.01,
            scheme: Scheme::Splitting,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitKind {
    Localized,
    Gibbs,
    #[default]
    Homogeneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PresetName {
    Constant,
    #[default]
    OnePlusCos,
    Cosine,
}

/// Keys irrelevant to the chosen `kind` must be left out.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct InitSection {
    pub kind: InitKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<PresetName>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    /// Macroscopic final time.
    pub t_end: f64,
    pub snapshot_dt: f64,
    pub ensemble: usize,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            snapshot_dt: 0.1,
            ensemble: 1000,
            seed: 20261015,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: String,
    pub format: Format,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: "out".into(),
            format: Format::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SweepTest {
    #[default]
    Kinetic,
    /// OU and weak limits from one set of ensembles.
    Localized,
    Gibbs,
    Conservation,
    Covariance,
    Thermalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub test: SweepTest,
    pub epsilons: Vec<f64>,
    /// Modes followed by the localized sweep and the `ou` subcommand.
    pub modes: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            test: SweepTest::Kinetic,
            epsilons: vec![0.2, 0.1, 0.05],
            modes: vec![0.25, 0.4, 0.5],
        }
    }
}

const SECTIONS: &[(&str, &[&str])] = &[
    ("model", &["omega0", "alpha"]),
    ("lattice", &["n"]),
    ("noise", &["epsilon", "dt", "scheme"]),
    (
        "init",
        &["kind", "preset", "temperature", "coefficients", "center", "width", "amplitude"],
    ),
    ("run", &["t_end", "snapshot_dt", "ensemble", "seed"]),
    ("output", &["directory", "format"]),
    ("sweep", &["test", "epsilons", "modes"]),
];

struct Suggestion<'a>(Option<&'a str>);

impl fmt::Display for Suggestion<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(s) => write!(f, "; did you mean `{s}`?"),
            None => Ok(()),
        }
    }
}

fn nearest<'a>(word: &str, candidates: &[&'a str]) -> Option<&'a str> {
    candidates
        .iter()
        .map(|c| (strsim::jaro_winkler(word, c), *c))
        .filter(|(score, _)| *score > 0.7)
        .max_by(|a, b| a.0.total_cmp(&b.0))
        .map(|(_, c)| c)
}

/// Line-level scan for unknown sections and keys, so typos are reported with
/// their line number and the closest valid name.
fn check_keys(text: &str) -> Result<(), ConfigError> {
    let names: Vec<&str> = SECTIONS.iter().map(|(s, _)| *s).collect();
    let mut keys: Option<&[&str]> = None;
    let mut section = "";
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let lineno = i + 1;
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            match SECTIONS.iter().find(|(s, _)| *s == name) {
                Some((s, k)) => {
                    section = s;
                    keys = Some(k);
                }
                None => {
                    return Err(ConfigError::Syntax {
                        line: lineno,
                        message: format!("unknown section `[{name}]`{}", Suggestion(nearest(name, &names))),
                    })
                }
            }
            continue;
        }
        let Some((key, _)) = line.split_once('=') else { continue };
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            continue;
        }
        let Some(valid) = keys else {
            return Err(ConfigError::Syntax {
                line: lineno,
                message: format!("key `{key}` appears before any [section]"),
            });
        };
        if !valid.contains(&key) {
            return Err(ConfigError::Syntax {
                line: lineno,
                message: format!(
                    "unknown key `{key}` in [{section}]{}",
                    Suggestion(nearest(key, valid))
                ),
            });
        }
    }
    Ok(())
}

/// Parses and validates configuration text.
pub fn parse_str(text: &str) -> Result<RunConfig, ConfigError> {
    check_keys(text)?;
    let cfg: RunConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map_or(0, |s| text[..s.start].lines().count().max(1));
        ConfigError::Syntax {
            line,
            message: e.message().to_string(),
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_str(&text)
}

impl RunConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn model(&self) -> Result<ModelParams, ConfigError> {
        match &self.model.alpha {
            Some(alpha) => ModelParams::from_alpha(alpha.clone()).map_err(|e| invalid(format!("model.alpha: {e}"))),
            None => ModelParams::nearest_neighbour(self.model.omega0).map_err(|e| invalid(format!("model.omega0: {e}"))),
        }
    }

    pub fn init_spec(&self) -> Result<InitSpec, ConfigError> {
        let s = &self.init;
        let kind = match s.kind {
            InitKind::Localized => "localized",
            InitKind::Gibbs => "gibbs",
            InitKind::Homogeneous => "homogeneous",
        };
        let misplaced = |name: &str, set: bool| -> Result<(), ConfigError> {
            if set {
                Err(invalid(format!("init.{name} does not apply to kind = {kind}")))
            } else {
                Ok(())
            }
        };
        let spec = match s.kind {
            InitKind::Localized => {
                misplaced("preset", s.preset.is_some())?;
                misplaced("temperature", s.temperature.is_some())?;
                misplaced("coefficients", s.coefficients.is_some())?;
                let d = LocalizedProfile::default();
                InitSpec::Localized {
                    profile: LocalizedProfile {
                        center: s.center.unwrap_or(d.center),
                        width: s.width.unwrap_or(d.width),
                        amplitude: s.amplitude.unwrap_or(d.amplitude),
                    },
                }
            }
            InitKind::Gibbs => {
                misplaced("preset", s.preset.is_some())?;
                misplaced("coefficients", s.coefficients.is_some())?;
                misplaced("center", s.center.is_some())?;
                misplaced("width", s.width.is_some())?;
                misplaced("amplitude", s.amplitude.is_some())?;
                InitSpec::Gibbs {
                    temperature: s.temperature.unwrap_or(1.0),
                }
            }
            InitKind::Homogeneous => {
                misplaced("center", s.center.is_some())?;
                misplaced("width", s.width.is_some())?;
                misplaced("amplitude", s.amplitude.is_some())?;
                let preset = s.preset.unwrap_or_default();
                if preset != PresetName::Constant {
                    misplaced("temperature", s.temperature.is_some())?;
                }
                if preset != PresetName::Cosine {
                    misplaced("coefficients", s.coefficients.is_some())?;
                }
                let e0 = match preset {
                    PresetName::Constant => E0Preset::Constant {
                        temperature: s.temperature.unwrap_or(1.0),
                    },
                    PresetName::OnePlusCos => E0Preset::OnePlusCos,
                    PresetName::Cosine => E0Preset::Cosine {
                        coefficients: s
                            .coefficients
                            .clone()
                            .ok_or_else(|| invalid("init.coefficients is required for preset = cosine"))?,
                    },
                };
                InitSpec::Homogeneous { e0 }
            }
        };
        spec.validate().map_err(|e| invalid(format!("init: {e}")))?;
        Ok(spec)
    }

    /// Macroscopic snapshot times `0, Δ, 2Δ, ..., t_end`.
    pub fn snapshot_times(&self) -> Vec<f64> {
        let count = (self.run.t_end / self.run.snapshot_dt).round() as usize;
        (0..=count).map(|i| i as f64 * self.run.snapshot_dt).collect()
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            epsilon: self.noise.epsilon,
            dt: self.noise.dt,
            scheme: self.noise.scheme,
            seed: self.run.seed,
            trajectory_index: 0,
        }
    }

    /// Checks every field against the preconditions of the modules it feeds.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let params = self.model()?;
        ModeGrid::new(self.lattice.n).map_err(|e| invalid(format!("lattice.n: {e}")))?;
        if self.lattice.n < 8 {
            return Err(invalid(format!("lattice.n must be >= 8, got {}", self.lattice.n)));
        }
        let eps = self.noise.epsilon;
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(invalid("noise.epsilon must be in (0,1]"));
        }
        if !(self.noise.dt > 0.0 && self.noise.dt.is_finite()) {
            return Err(invalid("noise.dt must be positive"));
        }
        self.sim_config()
            .validate(&params)
            .map_err(|e| invalid(format!("noise: {e}")))?;
        self.init_spec()?;
        let r = &self.run;
        if !(r.t_end > 0.0 && r.t_end.is_finite()) {
            return Err(invalid("run.t_end must be positive"));
        }
        if !(r.snapshot_dt > 0.0 && r.snapshot_dt <= r.t_end) {
            return Err(invalid("run.snapshot_dt must be in (0, run.t_end]"));
        }
        let ratio = r.t_end / r.snapshot_dt;
        if (ratio - ratio.round()).abs() > 1e-9 * ratio.max(1.0) {
            return Err(invalid("run.t_end must be a whole multiple of run.snapshot_dt"));
        }
        if r.ensemble == 0 {
            return Err(invalid("run.ensemble must be >= 1"));
        }
        if self.output.directory.is_empty() {
            return Err(invalid("output.directory must not be empty"));
        }
        let e = &self.sweep.epsilons;
        if e.is_empty() || e.iter().any(|x| !(*x > 0.0 && *x <= 1.0)) {
            return Err(invalid("sweep.epsilons must be a nonempty list of values in (0,1]"));
        }
        if e.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("sweep.epsilons must be strictly decreasing"));
        }
        if self.sweep.modes.iter().any(|k| !k.is_finite()) {
            return Err(invalid("sweep.modes must be finite"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_gets_defaults() {
        let cfg = parse_str("[lattice]\nn = 64\n").unwrap();
        assert_eq!(cfg.noise.scheme, Scheme::Splitting);
        assert_eq!(cfg.output.format, Format::Csv);
        assert_eq!(cfg.lattice.n, 64);
        assert_eq!(parse_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn zero_epsilon_is_rejected() {
        let err = parse_str("[noise]\nepsilon = 0.0\n").unwrap_err();
        assert_eq!(err.to_string(), "noise.epsilon must be in (0,1]");
    }

    #[test]
    fn typo_names_nearest_key_and_line() {
        let err = parse_str("[lattice]\nn = 64\n\n[noise]\nepsilonn = 0.1\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.starts_with("line 5:"), "{msg}");
        assert!(msg.contains("`epsilonn`") && msg.contains("did you mean `epsilon`"), "{msg}");
        let err = parse_str("[nois]\n").unwrap_err().to_string();
        assert!(err.contains("did you mean `noise`"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_line() {
        let err = parse_str("[run]\nt_end = 1.0\nseed = \"x\n").unwrap_err();
        assert!(matches!(err, ConfigError::Syntax { line: 3, .. }), "{err}");
    }

    #[test]
    fn round_trips() {
        let text = "[model]\nalpha = [1.5, -0.25]\n[init]\nkind = \"localized\"\nwidth = 0.05\n\
                    [output]\nformat = \"json\"\n[sweep]\ntest = \"localized\"\n";
        let cfg = parse_str(text).unwrap();
        assert_eq!(parse_str(&cfg.to_toml()).unwrap(), cfg);
        assert_eq!(parse_str(&RunConfig::default().to_toml()).unwrap(), RunConfig::default());
    }

    #[test]
    fn misplaced_init_keys() {
        let err = parse_str("[init]\nkind = \"gibbs\"\ncenter = 0.3\n").unwrap_err().to_string();
        assert!(err.contains("init.center"), "{err}");
        let err = parse_str("[init]\npreset = \"cosine\"\n").unwrap_err().to_string();
        assert!(err.contains("coefficients"), "{err}");
    }

    #[test]
    fn sweep_and_run_constraints() {
        assert!(parse_str("[sweep]\nepsilons = [0.1, 0.2]\n").is_err());
        assert!(parse_str("[run]\nt_end = 1.0\nsnapshot_dt = 0.3\n").is_err());
        assert!(parse_str("[noise]\nscheme = \"euler_maruyama\"\ndt = 0.4\n").is_err());
    }
}
