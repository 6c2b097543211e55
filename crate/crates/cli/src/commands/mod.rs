//! The five subcommands. Each output-writing command exposes a clap `Args`
//! struct convertible into a [`RunManifest`](crate::manifest::RunManifest)
//! and a `run(&RunManifest)` entry point, so a saved manifest can be replayed
//! through the same code path as a fresh invocation.

pub mod fit;
pub mod ladders;
pub mod prepare;
pub mod regress;
pub mod simulate;

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::manifest::RunManifest;
use crate::CliError;

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("cannot parse {}: {e}", path.display())))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| CliError::input(format!("cannot serialize {}: {e}", path.display())))?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn write_text(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::input(format!("cannot write {}: {e}", path.display())))
}

pub(crate) fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::input(format!("cannot create {}: {e}", dir.display())))
}

/// Resolve `--manifest FILE [--out DIR]` into a loaded manifest, checking it
/// was written by the expected subcommand.
pub(crate) fn load_for(
    path: &Path,
    expected_command: &str,
    out_override: Option<PathBuf>,
) -> Result<RunManifest, CliError> {
    let mut manifest = RunManifest::load(path)?;
    if manifest.command != expected_command {
        return Err(CliError::input(format!(
            "{} was written by the {:?} subcommand, not {expected_command:?}",
            path.display(),
            manifest.command
        )));
    }
    if let Some(out) = out_override {
        manifest.out_dir = out;
    }
    Ok(manifest)
}

/// `--out` is required unless a manifest supplies the directory.
pub(crate) fn required_out(out: Option<PathBuf>) -> Result<PathBuf, CliError> {
    out.ok_or_else(|| CliError::input("--out is required without --manifest"))
}
