//! Run manifests. Every output-writing subcommand serializes the settings it
//! actually ran with to `manifest.json` beside its outputs; feeding that file
//! back through `--manifest` reproduces the run byte-for-byte.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::NaiveDate;
use gradescale::grades::GradeSystem;
use gradescale::logbook::{GameMode, InputFormat};
use gradescale::model::ModelConfig;
use gradescale::sampler::SamplerConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegressMode {
    PerClimber,
    Community,
}

impl fmt::Display for RegressMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegressMode::PerClimber => f.write_str("per-climber"),
            RegressMode::Community => f.write_str("community"),
        }
    }
}

impl FromStr for RegressMode {
    type Err = CliError;

    fn from_str(s: &str) -> Result<RegressMode, CliError> {
        match s {
            "per-climber" => Ok(RegressMode::PerClimber),
            "community" => Ok(RegressMode::Community),
            other => Err(CliError::input(format!(
                "unknown regression mode {other:?} (expected \"per-climber\" or \"community\")"
            ))),
        }
    }
}

/// Free-text labels echoed into the dataset summary row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub country: String,
    pub style: String,
}

impl Default for RunMetadata {
    fn default() -> Self {
        RunMetadata {
            country: "-".to_string(),
            style: "-".to_string(),
        }
    }
}

/// Everything a run depends on. Fields irrelevant to a given subcommand stay
/// `None` and are omitted from the JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Subcommand this manifest belongs to: prepare|fit|regress|simulate.
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<InputFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<GradeSystem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<GameMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_start: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_end: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_ascents: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_failures: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regress_mode: Option<RegressMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grade_range: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<RunMetadata>,
    pub out_dir: PathBuf,
}

impl RunManifest {
    pub fn base(command: &str, out_dir: PathBuf) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            input: None,
            format: None,
            system: None,
            game: None,
            window_start: None,
            window_end: None,
            min_ascents: None,
            min_failures: None,
            model: None,
            sampler: None,
            regress_mode: None,
            grade_range: None,
            seed: None,
            metadata: None,
            out_dir,
        }
    }

    pub fn load(path: &Path) -> Result<RunManifest, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::input(format!("cannot read manifest {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::input(format!("bad manifest {}: {e}", path.display())))
    }

    /// Write `manifest.json` into `dir` (pretty JSON, trailing newline).
    pub fn save(&self, dir: &Path) -> Result<PathBuf, CliError> {
        let path = dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::input(format!("cannot serialize manifest: {e}")))?;
        text.push('\n');
        fs::write(&path, text)
            .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }

    /// The value of an `Option` field, or an input error naming what the
    /// subcommand was missing.
    pub fn require<T: Clone>(&self, field: Option<&T>, name: &str) -> Result<T, CliError> {
        field.cloned().ok_or_else(|| {
            CliError::input(format!(
                "manifest for {:?} is missing the {name} field",
                self.command
            ))
        })
    }
}
