//! Run manifests and atomic output writing.
//!
//! Every command's table is paired with a manifest recording the command
//! name, the fully resolved parameters, the master seed where one applies,
//! the tool version, the wall-clock duration, and a SHA-256 digest of the
//! rendered output. When the table goes to a file the manifest is written
//! next to it as `<path>.manifest.json`; when the table goes to stdout the
//! manifest goes to stderr, keeping piped output clean.

use crate::CliError;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub struct RunManifest {
    pub command: &'static str,
    pub params: Value,
    pub seed: Option<u64>,
    pub started: Instant,
}

impl RunManifest {
    fn finish(&self, output_sha256: &str) -> Value {
        json!({
            "command": self.command,
            "params": self.params,
            "seed": self.seed,
            "version": env!("CARGO_PKG_VERSION"),
            "duration_seconds": self.started.elapsed().as_secs_f64(),
            "output_sha256": output_sha256,
        })
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for b in digest {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// followed by a rename, so a partial file is never observable.
fn write_atomically(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| CliError::Usage(format!("output path {} has no file name", path.display())))?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp.{}", name.to_string_lossy(), std::process::id()));
    let io = |e: std::io::Error| CliError::Io(format!("writing {}: {e}", path.display()));
    std::fs::write(&tmp, bytes).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

/// Emits the rendered table and its manifest, to `out` or to stdout/stderr.
pub fn emit(manifest: &RunManifest, rendered: &[u8], out: Option<&Path>) -> Result<(), CliError> {
    let digest = sha256_hex(rendered);
    let manifest_doc = manifest.finish(&digest);
    let mut manifest_bytes = serde_json::to_vec_pretty(&manifest_doc).expect("manifest serializes");
    manifest_bytes.push(b'\n');

    match out {
        Some(path) => {
            write_atomically(path, rendered)?;
            let mut manifest_path = path.as_os_str().to_owned();
            manifest_path.push(".manifest.json");
            write_atomically(Path::new(&manifest_path), &manifest_bytes)?;
        }
        None => {
            std::io::stdout()
                .write_all(rendered)
                .map_err(|e| CliError::Io(format!("writing stdout: {e}")))?;
            std::io::stderr()
                .write_all(&manifest_bytes)
                .map_err(|e| CliError::Io(format!("writing stderr: {e}")))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_matches_a_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn atomic_write_replaces_content_completely() {
        let dir = std::env::temp_dir().join(format!("optstop-test-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("table.csv");
        write_atomically(&path, b"first").unwrap();
        write_atomically(&path, b"second").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"second");
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
