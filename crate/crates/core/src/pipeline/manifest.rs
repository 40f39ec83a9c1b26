use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

use crate::analytics::write_atomic;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub fn sha256_text(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

/// Files under `dir`, recursively, in sorted order. Hidden entries are
/// skipped.
pub fn list_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let mut entries: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("listing {}", dir.display()))?
        .collect::<std::io::Result<_>>()?;
    entries.sort_by_key(|e| e.file_name());
    for e in entries {
        if e.file_name().to_string_lossy().starts_with('.') {
            continue;
        }
        let p = e.path();
        if p.is_dir() {
            out.extend(list_files(&p)?);
        } else {
            out.push(p);
        }
    }
    Ok(out)
}

/// Text key-value record of one stage run: parameters, input hashes and
/// output hashes. Paths are relative to the run directory.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    pub params: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.params {
            s.push_str(&format!("{k}={v}\n"));
        }
        for (k, v) in &self.inputs {
            s.push_str(&format!("input.{k}={v}\n"));
        }
        for (k, v) in &self.outputs {
            s.push_str(&format!("output.{k}={v}\n"));
        }
        s
    }

    pub fn parse(text: &str) -> Result<Manifest> {
        let mut m = Manifest::default();
        for line in text.lines().filter(|l| !l.is_empty()) {
            let (k, v) = line
                .split_once('=')
                .with_context(|| format!("manifest line without '=': {line}"))?;
            if let Some(p) = k.strip_prefix("input.") {
                m.inputs.insert(p.to_string(), v.to_string());
            } else if let Some(p) = k.strip_prefix("output.") {
                m.outputs.insert(p.to_string(), v.to_string());
            } else {
                m.params.insert(k.to_string(), v.to_string());
            }
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Option<Manifest>> {
        if !path.exists() {
            return Ok(None);
        }
        let text = fs::read_to_string(path)?;
        Ok(Some(Manifest::parse(&text)?))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())?;
        Ok(())
    }

    /// First recorded output whose file is missing or has changed.
    pub fn changed_output(&self, run: &Path) -> Result<Option<String>> {
        for (rel, hash) in &self.outputs {
            let p = run.join(rel);
            if !p.exists() || sha256_file(&p)? != *hash {
                return Ok(Some(rel.clone()));
            }
        }
        Ok(None)
    }
}
