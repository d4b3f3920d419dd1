//! Artifact persistence: stamped, atomically written output files.
//!
//! Every artifact embeds the effective run configuration and the SHA-256 of
//! each input file, so any result can be audited back to exactly what
//! produced it. CSV artifacts carry the stamp as `#`-prefixed comment lines
//! (the loaders skip them); JSON artifacts carry it as ordinary fields.
//! Files are written to a temporary sibling and renamed into place, so a
//! crash never leaves a half-written artifact behind.

use crate::error::CliError;
use serde::Serialize;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Provenance embedded in every artifact: the effective config plus the
/// content hashes of the files the command read.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Stamp {
    /// TOML text of the effective [`RunConfig`](crate::config::RunConfig).
    pub config: String,
    /// Input file name (base name, so artifacts do not leak absolute
    /// paths and reruns from different directories stay byte-identical)
    /// mapped to the hex SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
}

impl Stamp {
    pub fn new(config_echo: &str) -> Self {
        Stamp { config: config_echo.to_owned(), inputs: BTreeMap::new() }
    }

    pub fn add_input(&mut self, path: &Path, sha256_hex: String) {
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        self.inputs.insert(name, sha256_hex);
    }

    /// The stamp as CSV comment lines, terminated by a newline.
    pub fn comment_block(&self) -> String {
        let mut out = String::new();
        out.push_str("# faultcast artifact\n# config:\n");
        for line in self.config.lines() {
            let _ = writeln!(out, "#   {line}");
        }
        for (name, sha) in &self.inputs {
            let _ = writeln!(out, "# input sha256 {name}: {sha}");
        }
        out
    }
}

/// Writes `bytes` to `path` via a temporary file in the same directory,
/// creating parent directories as needed.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let parent = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(parent).map_err(|e| {
        CliError::Internal(format!("cannot create {}: {e}", parent.display()))
    })?;
    let mut tmp = PathBuf::from(path);
    let mut name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "artifact".to_owned());
    name.push_str(".tmp");
    tmp.set_file_name(name);
    let write = || -> std::io::Result<()> {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        CliError::Internal(format!("cannot write {}: {e}", path.display()))
    })
}

/// Writes a stamped CSV artifact: comment block first, then the body.
pub fn write_csv_artifact(path: &Path, stamp: &Stamp, body: &[u8]) -> Result<(), CliError> {
    let mut bytes = stamp.comment_block().into_bytes();
    bytes.extend_from_slice(body);
    atomic_write(path, &bytes)
}

/// Writes a stamped JSON artifact: `payload` fields are wrapped together
/// with the stamp in one envelope object.
pub fn write_json_artifact<T: Serialize>(
    path: &Path,
    stamp: &Stamp,
    kind: &str,
    payload: &T,
) -> Result<(), CliError> {
    #[derive(Serialize)]
    struct Envelope<'a, T> {
        kind: &'a str,
        stamp: &'a Stamp,
        payload: &'a T,
    }
    let envelope = Envelope { kind, stamp, payload };
    let mut bytes = serde_json::to_vec_pretty(&envelope)
        .map_err(|e| CliError::Internal(format!("cannot serialize {kind}: {e}")))?;
    bytes.push(b'\n');
    atomic_write(path, &bytes)
}

/// Makes an identifier safe for use inside a file name. Alphanumerics,
/// `-`, `.`, and `_` pass through; everything else becomes `_`. Distinct
/// ids that collide after cleaning get a numeric suffix via
/// [`FileNamer`].
fn clean_component(id: &str) -> String {
    let cleaned: String = id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "-._".contains(c) { c } else { '_' })
        .collect();
    if cleaned.is_empty() {
        "unnamed".to_owned()
    } else {
        cleaned
    }
}

/// Allocates collision-free file names for artifacts keyed by raw ids.
#[derive(Debug, Default)]
pub struct FileNamer {
    used: BTreeMap<String, usize>,
}

impl FileNamer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns `prefix_<id>[...]suffix`, uniquified across this namer.
    pub fn name(&mut self, prefix: &str, parts: &[&str], suffix: &str) -> String {
        let mut stem = prefix.to_owned();
        for part in parts {
            stem.push('_');
            stem.push_str(&clean_component(part));
        }
        let count = self.used.entry(stem.clone()).or_insert(0);
        *count += 1;
        if *count == 1 {
            format!("{stem}{suffix}")
        } else {
            format!("{stem}-{count}{suffix}")
        }
    }
}

/// Shortest decimal form that parses back to the identical float; the
/// format every artifact uses so that written numbers round-trip exactly.
pub fn float_field(value: f64) -> String {
    format!("{value}")
}
