//! Scenario and operator script files.

use std::fs;
use std::path::Path;

use teleassist_core::world::{builtin, Scenario, ScenarioError};
use thiserror::Error;

use crate::operator::OperatorScript;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {source}")]
    Scenario { path: String, source: ScenarioError },
}

fn read(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|source| FileError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let scn: Scenario = serde_json::from_str(text).map_err(|_| ScenarioError::Invalid("not a scenario document"))?;
    scn.validate()?;
    Ok(scn)
}

pub fn scenario_to_string(scn: &Scenario) -> String {
    serde_json::to_string_pretty(scn).expect("scenarios always serialize")
}

/// A built-in name (`A`, `B`) or a path to a scenario JSON file.
pub fn load_scenario(name_or_path: &str) -> Result<Scenario, FileError> {
    let path = Path::new(name_or_path);
    if !path.exists() {
        return builtin(name_or_path).map_err(|source| FileError::Scenario {
            path: name_or_path.into(),
            source,
        });
    }
    let text = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|source| FileError::Json {
        path: name_or_path.into(),
        source,
    })?;
    // report a version mismatch before any schema error
    if let Some(v) = value.get("version").and_then(serde_json::Value::as_u64) {
        if v != u64::from(teleassist_core::world::SCENARIO_VERSION) {
            return Err(FileError::Scenario {
                path: name_or_path.into(),
                source: ScenarioError::Version(v as u32),
            });
        }
    }
    let scn: Scenario = serde_json::from_value(value).map_err(|source| FileError::Json {
        path: name_or_path.into(),
        source,
    })?;
    scn.validate().map_err(|source| FileError::Scenario {
        path: name_or_path.into(),
        source,
    })?;
    Ok(scn)
}

pub fn load_script(path: &Path) -> Result<OperatorScript, FileError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| FileError::Json {
        path: path.display().to_string(),
        source,
    })
}
