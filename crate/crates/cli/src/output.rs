//! Atomic file output: everything is rendered in memory first, then each file is
//! written to a temporary sibling and renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use tempfile::NamedTempFile;

use crate::failure::Failure;

pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Writes all artifacts into `dir`, creating it if needed. Returns the written paths.
pub fn persist_all(dir: &Path, artifacts: Vec<Artifact>) -> Result<Vec<PathBuf>, Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::output(format!("{}: {e}", dir.display())))?;
    let mut staged = Vec::with_capacity(artifacts.len());
    for artifact in artifacts {
        let mut tmp = NamedTempFile::new_in(dir).map_err(Failure::output)?;
        tmp.write_all(&artifact.bytes).map_err(Failure::output)?;
        tmp.as_file().sync_all().map_err(Failure::output)?;
        staged.push((tmp, dir.join(&artifact.name)));
    }
    staged
        .into_iter()
        .map(|(tmp, path)| {
            tmp.persist(&path)
                .map_err(|e| Failure::output(format!("{}: {}", path.display(), e.error)))?;
            Ok(path)
        })
        .collect()
}

/// Writes `bytes` to `path` atomically, or to standard output when `path` is `None`.
pub fn emit(path: Option<&Path>, bytes: Vec<u8>) -> Result<(), Failure> {
    match path {
        None => std::io::stdout().write_all(&bytes).map_err(Failure::output),
        Some(path) => {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let name = path
                .file_name()
                .ok_or_else(|| Failure::output(format!("{} is not a file path", path.display())))?
                .to_string_lossy()
                .into_owned();
            persist_all(dir, vec![Artifact { name, bytes }]).map(|_| ())
        }
    }
}

pub fn json_bytes<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(Failure::output)?;
    bytes.push(b'\n');
    Ok(bytes)
}
