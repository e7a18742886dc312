//! Run manifests: the resolved config, content digests of every emitted
//! file, and timing. Re-running an identical config must reproduce
//! identical digests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::CliError;

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    let mut hex = String::with_capacity(64);
    for b in out {
        let _ = write!(hex, "{b:02x}");
    }
    hex
}

/// Collects emitted files under `dir` and writes `manifest.txt` at the
/// end of the run.
pub struct RunManifest {
    dir: PathBuf,
    config_hash: String,
    canonical_config: String,
    started: Instant,
    files: Vec<(String, String)>,
}

impl RunManifest {
    /// Creates `outputs_dir/<experiment>/<config-hash>/` and the manifest
    /// collector for it.
    pub fn create(cfg: &ExperimentConfig) -> Result<RunManifest, CliError> {
        let dir = cfg.outputs_dir().join(cfg.experiment()).join(cfg.short_hash());
        fs::create_dir_all(&dir)
            .map_err(|e| CliError::Config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(RunManifest {
            dir,
            config_hash: cfg.hash(),
            canonical_config: cfg.canonical(),
            started: Instant::now(),
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Write one output file and record its digest.
    pub fn emit(&mut self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, content)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        self.files.push((name.to_string(), sha256_hex(content.as_bytes())));
        Ok(())
    }

    /// Finalize `manifest.txt`; returns its path.
    pub fn finish(mut self) -> Result<PathBuf, CliError> {
        self.files.sort();
        let mut out = String::new();
        let _ = writeln!(out, "config_hash = {}", self.config_hash);
        let _ = writeln!(out, "library_version = {}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "wall_clock_ms = {}", self.started.elapsed().as_millis());
        for (name, digest) in &self.files {
            let _ = writeln!(out, "file {name} sha256 = {digest}");
        }
        out.push_str("# resolved configuration\n");
        for line in self.canonical_config.lines() {
            let _ = writeln!(out, "config {line}");
        }
        let path = self.dir.join("manifest.txt");
        fs::write(&path, out)
            .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
        Ok(path)
    }
}

/// Parse the `file <name> sha256 = <hex>` lines of a manifest, for
/// determinism checks.
pub fn read_digests(manifest: &Path) -> Result<Vec<(String, String)>, CliError> {
    let text = std::fs::read_to_string(manifest)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", manifest.display())))?;
    let mut out = Vec::new();
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("file ") {
            if let Some((name, digest)) = rest.split_once(" sha256 = ") {
                out.push((name.to_string(), digest.to_string()));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
