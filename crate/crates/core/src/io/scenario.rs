use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ocp::{ScenarioKind, ScenarioParams, SolverSettings};
use crate::vehicle::config::{DEFAULT_CONFIG, ELASTIC_CONFIG};

/// A maneuver definition as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub kind: ScenarioKind,
    /// `hale`, `hale_elastic`, or a config path relative to the scenario file.
    #[serde(default)]
    pub config: Option<String>,
    #[serde(default)]
    pub params: ScenarioParams,
    #[serde(default)]
    pub solver: SolverSettings,
}

pub fn parse_scenario(text: &str) -> Result<ScenarioFile> {
    toml::from_str(text).map_err(|e| Error::Parse(format!("scenario: {e}")))
}

/// Text of a config: one of the shipped variants or a file.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigSource {
    pub label: String,
    pub text: String,
}

impl ConfigSource {
    pub fn shipped() -> Self {
        ConfigSource { label: "hale".into(), text: DEFAULT_CONFIG.into() }
    }

    /// A variant name, or a path resolved against `base`.
    pub fn resolve(name: &str, base: Option<&Path>) -> Result<Self> {
        match name {
            "hale" => Ok(Self::shipped()),
            "hale_elastic" => Ok(ConfigSource { label: name.into(), text: ELASTIC_CONFIG.into() }),
            _ => {
                let path: PathBuf = match base {
                    Some(b) if Path::new(name).is_relative() => b.join(name),
                    _ => PathBuf::from(name),
                };
                let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
                Ok(ConfigSource { label: path.display().to_string(), text })
            }
        }
    }
}
