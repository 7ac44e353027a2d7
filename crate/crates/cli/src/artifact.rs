//! Self-describing artifacts. Every file a command emits names the tool
//! version, the command, the configuration fingerprint, and the seed, so a
//! report found on disk can always be traced to the exact run that produced
//! it. Tables carry that provenance as `#` comment lines (stripped on read);
//! key-value reports carry it as leading keys. Nothing time-dependent ever
//! lands in an artifact — the same configuration and seed must produce the
//! same bytes.

use std::fs;
use std::path::{Path, PathBuf};

use coconet::encode::FeatureCodec;
use coconet::sage::SageModel;

use crate::config::Effective;
use crate::CliError;

const VERSION: &str = env!("CARGO_PKG_VERSION");

/// `#`-comment provenance block for tables (CSV, edge lists, manifests).
pub fn comment_header(command: &str, effective: &Effective) -> String {
    let mut out = String::new();
    out.push_str(&format!("# coconet {VERSION} {command}\n"));
    out.push_str(&format!("# config-hash {}\n", effective.hash()));
    out.push_str(&format!(
        "# seed {}\n",
        effective.get("seed").unwrap_or("none")
    ));
    out
}

/// `key: value` provenance block for structured-text reports.
pub fn report_header(command: &str, effective: &Effective) -> String {
    let mut out = String::new();
    out.push_str(&format!("version: {VERSION}\n"));
    out.push_str(&format!("command: {command}\n"));
    out.push_str(&format!("config-hash: {}\n", effective.hash()));
    out.push_str(&format!(
        "seed: {}\n",
        effective.get("seed").unwrap_or("none")
    ));
    out
}

/// Drop `#` comment lines so provenance headers never reach a parser.
pub fn strip_comments(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.lines() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}

pub fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))
}

/// Write an artifact under the output directory and return its path.
pub fn write_artifact(out_dir: &Path, name: &str, content: &str) -> Result<PathBuf, CliError> {
    let path = out_dir.join(name);
    fs::write(&path, content)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))?;
    Ok(path)
}

pub fn ensure_out_dir(out_dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(out_dir).map_err(|e| {
        CliError::Usage(format!(
            "cannot create output directory {}: {e}",
            out_dir.display()
        ))
    })
}

/// A trained model travels with the feature codec that built its inputs:
/// one bundle file, codec text first, model text second, provenance on top.
pub fn write_bundle(
    out_dir: &Path,
    name: &str,
    command: &str,
    effective: &Effective,
    codec: &FeatureCodec,
    model: &SageModel,
) -> Result<PathBuf, CliError> {
    let mut content = comment_header(command, effective);
    content.push_str(&codec.to_text());
    content.push_str(&model.to_text());
    write_artifact(out_dir, name, &content)
}

/// Parse a bundle back into its codec and model and cross-check that they
/// belong together.
pub fn read_bundle(path: &Path) -> Result<(FeatureCodec, SageModel), CliError> {
    let text = strip_comments(&read_text(path)?);
    let marker = "coconet-model v1";
    let split_at = text
        .lines()
        .scan(0usize, |offset, line| {
            let start = *offset;
            *offset += line.len() + 1;
            Some((start, line))
        })
        .find(|(_, line)| line.trim() == marker)
        .map(|(start, _)| start)
        .ok_or_else(|| {
            CliError::Data(format!(
                "{}: not a model bundle (no '{marker}' section)",
                path.display()
            ))
        })?;
    let codec = FeatureCodec::from_text(&text[..split_at])?;
    let model = SageModel::from_text(&text[split_at..])?;
    if let Some(hash) = model.schema_hash {
        if hash != codec.schema_hash() {
            return Err(CliError::Data(format!(
                "{}: bundled model was trained against schema {:016x} but the bundled codec encodes schema {:016x}",
                path.display(),
                hash,
                codec.schema_hash()
            )));
        }
    }
    Ok((codec, model))
}
