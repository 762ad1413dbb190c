//! Staged outputs, atomic writes and run manifests.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::sha256_hex;
use crate::error::CliError;

/// A file read by a command, recorded in its manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InputRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
}

/// Everything a command produces, held in memory until the command has
/// fully succeeded.
#[derive(Debug, Default)]
pub struct Staged {
    /// Paths relative to the output directory, with their contents.
    pub files: Vec<(PathBuf, Vec<u8>)>,
    pub inputs: Vec<InputRecord>,
    pub stdout: String,
}

impl Staged {
    pub fn add(&mut self, rel: impl Into<PathBuf>, bytes: impl Into<Vec<u8>>) {
        self.files.push((rel.into(), bytes.into()));
    }

    pub fn input(&mut self, role: impl Into<String>, path: impl Into<String>, bytes: &[u8]) {
        self.inputs.push(InputRecord {
            role: role.into(),
            path: path.into(),
            sha256: sha256_hex(bytes),
        });
    }
}

#[derive(Serialize)]
struct OutputRecord {
    path: String,
    sha256: String,
}

/// Provenance of one command run. Carries content hashes only, so reruns
/// reproduce it byte for byte.
#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    tool_version: &'a str,
    model_format_version: u32,
    config_sha256: &'a str,
    seed: u64,
    inputs: &'a [InputRecord],
    outputs: Vec<OutputRecord>,
}

pub struct ManifestInfo<'a> {
    pub command: &'a str,
    pub config_sha256: &'a str,
    pub seed: u64,
}

fn display_rel(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

/// Writes every staged file under `out_dir`, then the manifest
/// `manifests/<command>.json`.
pub fn commit(out_dir: &Path, staged: &Staged, info: ManifestInfo<'_>) -> Result<PathBuf, CliError> {
    for (rel, bytes) in &staged.files {
        write_atomic(&out_dir.join(rel), bytes)?;
    }
    let manifest = Manifest {
        command: info.command,
        tool_version: env!("CARGO_PKG_VERSION"),
        model_format_version: panelcast::gbtree::MODEL_FORMAT_VERSION,
        config_sha256: info.config_sha256,
        seed: info.seed,
        inputs: &staged.inputs,
        outputs: staged
            .files
            .iter()
            .map(|(rel, bytes)| OutputRecord {
                path: display_rel(rel),
                sha256: sha256_hex(bytes),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = out_dir.join("manifests").join(format!("{}.json", info.command));
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}
