use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use tailprofile::LawSpec;

use crate::config::{hex, RunConfig};
use crate::CliError;

#[derive(Debug, Serialize)]
pub struct InputRecord {
    pub name: String,
    pub sha256: String,
}

/// Written next to every run's outputs. Contains nothing that varies
/// between identical reruns.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub command: &'static str,
    pub library_version: &'static str,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub inputs: Vec<InputRecord>,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<LawSpec>,
}

/// Tracks files written by a run so a failed run leaves nothing behind.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
    committed: bool,
}

impl Outputs {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
            committed: false,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Registers `name` and returns its path; the file is removed on drop
    /// unless the run commits.
    pub fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        self.written.push(p.clone());
        p
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let p = self.path(name);
        Ok(tailprofile::io::write_json(&p, value)?)
    }

    pub fn names(&self) -> Vec<String> {
        self.written
            .iter()
            .filter_map(|p| p.file_name())
            .map(|n| n.to_string_lossy().into_owned())
            .collect()
    }

    /// Writes the manifest and keeps all files.
    pub fn commit(mut self, cfg: &RunConfig) -> Result<Vec<PathBuf>, CliError> {
        let mut inputs = Vec::new();
        for p in cfg.input_files() {
            let bytes = std::fs::read(&p).map_err(tailprofile::Error::from)?;
            inputs.push(InputRecord {
                name: p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default(),
                sha256: hex(&Sha256::digest(&bytes)),
            });
        }
        let manifest = Manifest {
            command: cfg.command.map_or("", |c| c.name()),
            library_version: tailprofile::VERSION,
            seed: cfg.seed,
            config_hash: cfg.hash(),
            inputs,
            outputs: self.names(),
            model: cfg.portable().model,
        };
        self.json("manifest.json", &manifest)?;
        self.committed = true;
        Ok(std::mem::take(&mut self.written))
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        if !self.committed {
            for p in &self.written {
                let _ = std::fs::remove_file(p);
            }
        }
    }
}
