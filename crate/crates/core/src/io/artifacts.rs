use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::schema::{json, ARTIFACT_SCHEMA_VERSION};
use crate::error::{Error, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// Index of a run directory. The manifest does not list itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub run_id: String,
    pub command: String,
    pub tool_version: String,
    pub workers: usize,
    pub wall_clock_s: f64,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes files into one run directory and records their hashes.
#[derive(Debug)]
pub struct RunWriter {
    dir: PathBuf,
    files: Vec<FileEntry>,
}

impl RunWriter {
    pub fn create(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(RunWriter { dir, files: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// `name` is relative to the run directory and may contain subdirectories.
    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        if name == MANIFEST_NAME || Path::new(name).is_absolute() || name.split('/').any(|c| c == "..") {
            return Err(Error::InvalidArgument(format!("artifact name `{name}` is reserved or escapes the run")));
        }
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        std::fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        self.files.retain(|f| f.path != name);
        self.files.push(FileEntry { path: name.to_string(), bytes: bytes.len() as u64, sha256: sha256_hex(bytes) });
        Ok(())
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<()> {
        self.write(name, &json(value)?)
    }

    pub fn files(&self) -> &[FileEntry] {
        &self.files
    }

    pub fn finish(mut self, run_id: &str, command: &str, workers: usize, wall_clock_s: f64) -> Result<Manifest> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        let m = Manifest {
            schema_version: ARTIFACT_SCHEMA_VERSION,
            run_id: run_id.to_string(),
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            workers,
            wall_clock_s,
            files: self.files,
        };
        let path = self.dir.join(MANIFEST_NAME);
        std::fs::write(&path, json(&m)?).map_err(|e| Error::io(&path, e))?;
        Ok(m)
    }
}

pub fn read_manifest(dir: impl AsRef<Path>) -> Result<Manifest> {
    let path = dir.as_ref().join(MANIFEST_NAME);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(e.to_string()))
}

/// Files whose content no longer matches the manifest.
pub fn verify_manifest(dir: impl AsRef<Path>, manifest: &Manifest) -> Vec<String> {
    manifest
        .files
        .iter()
        .filter(|f| std::fs::read(dir.as_ref().join(&f.path)).map_or(true, |b| sha256_hex(&b) != f.sha256))
        .map(|f| f.path.clone())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_lists_every_file_once() {
        let tmp = tempfile::tempdir().unwrap();
        let mut w = RunWriter::create(tmp.path().join("run")).unwrap();
        w.write("a.csv", b"x\n1\n").unwrap();
        w.write("sub/b.json", b"{}").unwrap();
        w.write("a.csv", b"x\n2\n").unwrap();
        let dir = w.dir().to_path_buf();
        let m = w.finish("id", "test", 1, 0.0).unwrap();
        assert_eq!(m.files.len(), 2);
        assert_eq!(m.files[0].sha256, sha256_hex(b"x\n2\n"));
        assert_eq!(read_manifest(&dir).unwrap(), m);
        assert!(verify_manifest(&dir, &m).is_empty());
        std::fs::write(dir.join("a.csv"), b"tampered").unwrap();
        assert_eq!(verify_manifest(&dir, &m), vec!["a.csv".to_string()]);
    }

    #[test]
    fn reserved_and_escaping_names_are_refused() {
        let tmp = tempfile::tempdir().unwrap();
        let mut w = RunWriter::create(tmp.path()).unwrap();
        assert!(w.write(MANIFEST_NAME, b"").is_err());
        assert!(w.write("../x", b"").is_err());
    }

    #[test]
    fn known_digest() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
