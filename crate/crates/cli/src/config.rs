use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use conjlab_core::inequalities::DichotomyIneqParams;
use conjlab_core::systems::{SystemConfig, BUILTIN_NAMES};
use conjlab_core::SemilinearSystem;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Dichotomy,
    Conjugacy,
    Regularity,
    Inequalities,
    Localization,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Dichotomy,
        Suite::Conjugacy,
        Suite::Regularity,
        Suite::Inequalities,
        Suite::Localization,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Dichotomy => "dichotomy",
            Suite::Conjugacy => "conjugacy",
            Suite::Regularity => "regularity",
            Suite::Inequalities => "inequalities",
            Suite::Localization => "localization",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A built-in name, a path to a JSON system file, or an inline definition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SystemRef {
    Named(String),
    Inline(SystemConfig),
}

impl SystemRef {
    pub fn resolve(&self) -> anyhow::Result<SystemConfig> {
        match self {
            SystemRef::Inline(c) => Ok(c.clone()),
            SystemRef::Named(name) => {
                if let Ok(c) = SystemConfig::builtin(name) {
                    return Ok(c);
                }
                let path = Path::new(name);
                if !path.is_file() {
                    bail!(
                        "unknown system '{name}': not a built-in ({}) and not a readable file",
                        BUILTIN_NAMES.join(", ")
                    );
                }
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {name}"))?;
                serde_json::from_str(&text).with_context(|| format!("parsing system file {name}"))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Green-kernel tail cut off by the conjugacy horizon.
    #[serde(default = "default_quadrature")]
    pub quadrature: f64,
    #[serde(default = "default_picard")]
    pub picard: f64,
    #[serde(default)]
    pub horizon_override: Option<f64>,
}

fn default_quadrature() -> f64 {
    1e-8
}
fn default_picard() -> f64 {
    1e-10
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            quadrature: default_quadrature(),
            picard: default_picard(),
            horizon_override: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemRef,
    /// Every suite that applies to the system when absent.
    #[serde(default)]
    pub suites: Option<Vec<Suite>>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Conjugacy sample count; chosen from the system's stiffness when absent.
    #[serde(default)]
    pub samples: Option<usize>,
    /// Parameter records for the inequalities suite; random draws when absent.
    #[serde(default)]
    pub inequality_params: Option<Vec<DichotomyIneqParams>>,
}

impl ExperimentConfig {
    pub fn new(system: SystemRef) -> Self {
        Self {
            system,
            suites: None,
            tolerances: Tolerances::default(),
            out: None,
            seed: 0,
            samples: None,
            inequality_params: None,
        }
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing experiment config {}", path.display()))
    }

    /// Selected suites in canonical order. Localization only applies to
    /// localized systems, so the default leaves it out elsewhere.
    pub fn selected_suites(&self, system: &SystemConfig) -> Vec<Suite> {
        let mut suites = match &self.suites {
            Some(s) => s.clone(),
            None => Suite::ALL
                .into_iter()
                .filter(|s| *s != Suite::Localization || matches!(system, SystemConfig::Localized(_)))
                .collect(),
        };
        suites.sort();
        suites.dedup();
        suites
    }

    /// Checks tolerances and builds the system once.
    pub fn validate(&self) -> anyhow::Result<(SystemConfig, SemilinearSystem)> {
        let t = &self.tolerances;
        for (name, v) in [("quadrature", t.quadrature), ("picard", t.picard)] {
            if !(v > 0.0 && v < 1.0) {
                bail!("tolerance {name} = {v} must lie in (0, 1)");
            }
        }
        if let Some(h) = t.horizon_override {
            if !(h > 0.0 && h.is_finite()) {
                bail!("horizon override {h} must be positive");
            }
        }
        if self.suites.as_ref().is_some_and(|s| s.is_empty()) {
            bail!("no suites selected");
        }
        if self.samples == Some(0) {
            bail!("samples must be at least 1");
        }
        let cfg = self.system.resolve()?;
        let sys = cfg.build().context("building the system")?;
        Ok((cfg, sys))
    }
}
