//! Run directories: one per invocation, never reused.

use std::collections::BTreeMap;
use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub struct RunDir {
    path: PathBuf,
}

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl RunDir {
    /// Uses `explicit` when given, otherwise creates
    /// `<root>/<UTC timestamp>-<config hash prefix>`, adding a numeric
    /// suffix on collision.
    pub fn create(explicit: Option<&Path>, root: &Path, config_hash: &str) -> Result<Self, CliError> {
        if let Some(path) = explicit {
            match fs::read_dir(path) {
                Ok(mut entries) => {
                    if entries.next().is_some() {
                        return Err(CliError::RunDirExists(path.to_path_buf()));
                    }
                }
                Err(e) if e.kind() == ErrorKind::NotFound => fs::create_dir_all(path).map_err(io(path))?,
                Err(e) => return Err(io(path)(e)),
            }
            return Ok(RunDir {
                path: path.to_path_buf(),
            });
        }
        fs::create_dir_all(root).map_err(io(root))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%SZ");
        let base = format!("{stamp}-{}", &config_hash[..12.min(config_hash.len())]);
        for n in 1.. {
            let name = if n == 1 { base.clone() } else { format!("{base}-{n}") };
            let path = root.join(name);
            match fs::create_dir(&path) {
                Ok(()) => return Ok(RunDir { path }),
                Err(e) if e.kind() == ErrorKind::AlreadyExists => continue,
                Err(e) => return Err(io(&path)(e)),
            }
        }
        unreachable!("run directory suffixes exhausted")
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes `rel` inside the run directory. Existing files are never
    /// replaced.
    pub fn write(&self, rel: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf, CliError> {
        let path = self.path.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io(parent))?;
        }
        let mut file = fs::OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(io(&path))?;
        std::io::Write::write_all(&mut file, contents.as_ref()).map_err(io(&path))?;
        Ok(path)
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("value serializes");
        text.push('\n');
        self.write(rel, text)
    }
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(io(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub file: String,
    pub sha256: String,
}

/// Everything besides the inputs themselves needed to replay a run.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub provider: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub threshold: f64,
    pub fixtures: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, InputRecord>,
}

impl Manifest {
    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<(), CliError> {
        let file = path
            .file_name()
            .map_or_else(|| path.display().to_string(), |f| f.to_string_lossy().into_owned());
        let sha256 = if path.is_dir() {
            hash_tree(path)?
        } else {
            sha256_file(path)?
        };
        self.inputs.insert(role.to_string(), InputRecord { file, sha256 });
        Ok(())
    }
}

/// Digest over the relative paths and contents of every file below `root`.
pub fn hash_tree(root: &Path) -> Result<String, CliError> {
    let mut files = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).map_err(io(&dir))? {
            let p = entry.map_err(io(&dir))?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                files.push(p);
            }
        }
    }
    files.sort();
    let mut h = Sha256::new();
    for f in files {
        let rel = f.strip_prefix(root).unwrap_or(&f).to_string_lossy().replace('\\', "/");
        h.update(rel.as_bytes());
        h.update([0]);
        h.update(sha256_file(&f)?.as_bytes());
        h.update([0]);
    }
    Ok(hex::encode(h.finalize()))
}
