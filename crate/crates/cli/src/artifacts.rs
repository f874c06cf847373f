//! Output files with provenance.
//!
//! Artifacts are first written next to their destination with a `.partial`
//! suffix and only renamed into place once every stage has succeeded, so a
//! failed run never leaves files that look complete.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
}

impl Provenance {
    /// Hashes a canonical serialization of whatever configured the run.
    pub fn of(config: &impl Serialize, seed: u64) -> Self {
        let bytes = serde_json::to_vec(config).expect("config serializes");
        Provenance {
            config_hash: sha256_hex(&bytes),
            seed,
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Pretty JSON of `artifact` with a top-level `provenance` entry added.
pub fn json_with_provenance(artifact: &impl Serialize, provenance: &Provenance) -> String {
    let mut value = serde_json::to_value(artifact).expect("artifact serializes");
    if let Value::Object(map) = &mut value {
        map.insert(
            "provenance".into(),
            serde_json::to_value(provenance).expect("provenance serializes"),
        );
    }
    let mut text = serde_json::to_string_pretty(&value).expect("value serializes");
    text.push('\n');
    text
}

#[derive(Debug, Serialize)]
struct ArtifactEntry {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    provenance: &'a Provenance,
    artifacts: Vec<ArtifactEntry>,
}

fn partial_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().expect("artifact has a file name").to_os_string();
    name.push(".partial");
    path.with_file_name(name)
}

/// A group of output files committed together.
#[derive(Debug)]
pub struct ArtifactSet {
    provenance: Provenance,
    written: Vec<(PathBuf, String)>,
}

impl ArtifactSet {
    pub fn new(provenance: Provenance) -> Self {
        ArtifactSet {
            provenance,
            written: Vec::new(),
        }
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn write(&mut self, path: &Path, contents: &[u8]) -> Result<()> {
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
        }
        let partial = partial_path(path);
        fs::write(&partial, contents).with_context(|| format!("writing {}", partial.display()))?;
        self.written.push((path.to_path_buf(), sha256_hex(contents)));
        Ok(())
    }

    pub fn write_json(&mut self, path: &Path, artifact: &impl Serialize) -> Result<()> {
        let text = json_with_provenance(artifact, &self.provenance);
        self.write(path, text.as_bytes())
    }

    /// Adds a provenance record listing every artifact with its digest.
    /// Paths are stored relative to `root` when possible.
    pub fn write_record(&mut self, path: &Path, root: &Path) -> Result<()> {
        let artifacts = self
            .written
            .iter()
            .map(|(p, digest)| ArtifactEntry {
                path: p.strip_prefix(root).unwrap_or(p).display().to_string(),
                sha256: digest.clone(),
            })
            .collect();
        let record = Manifest {
            provenance: &self.provenance,
            artifacts,
        };
        let mut text = serde_json::to_string_pretty(&record).expect("record serializes");
        text.push('\n');
        self.write(path, text.as_bytes())
    }

    /// Renames every `.partial` file to its final name.
    pub fn commit(self) -> Result<Vec<PathBuf>> {
        let mut done = Vec::with_capacity(self.written.len());
        for (path, _) in self.written {
            fs::rename(partial_path(&path), &path).with_context(|| format!("finalizing {}", path.display()))?;
            done.push(path);
        }
        Ok(done)
    }
}
