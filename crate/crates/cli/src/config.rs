use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tailprofile::constructions::RejectionConfig;
use tailprofile::{LawSpec, LinkDirection, Tolerances};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Simulate,
    Fit,
    Pca,
    Link,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Fit => "fit",
            Command::Pca => "pca",
            Command::Link => "link",
        }
    }
}

/// What `simulate` draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SimKind {
    X,
    Zstar,
    U,
    T,
    S,
    Z,
}

/// What a `link` input file holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkSource {
    /// Two-column `(s, F(s))` table.
    #[default]
    Cdf,
    /// Two-column `(s, f(s))` table.
    Density,
    /// Vectors, one per row; the law of their maxima is tabulated.
    Samples,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<LawSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<SimKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Profile draws used to tilt towards the generator law.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub proposals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rejection: Option<RejectionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantile: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quantiles: Option<Vec<f64>>,
    /// Rank-transform margins before thresholding.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub standardize: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extended: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<LinkDirection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<LinkSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_step: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_mass_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_identity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
}

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub quantile: Option<f64>,
    pub rank: Option<usize>,
    pub grid_step: Option<f64>,
    pub input: Option<PathBuf>,
}

impl RunConfig {
    /// Reads a config file; relative paths inside it resolve against its
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = cfg.input.as_mut() {
            rebase(p);
        }
        if let Some(p) = cfg.out_dir.as_mut() {
            rebase(p);
        }
        if let Some(LawSpec::Empirical { path, .. }) = cfg.model.as_mut() {
            rebase(path);
        }
        Ok(cfg)
    }

    pub fn apply(&mut self, command: Command, o: Overrides) -> Result<(), CliError> {
        match self.command {
            Some(c) if c != command => {
                return Err(CliError::Config(format!(
                    "config is for `{}` but `{}` was requested",
                    c.name(),
                    command.name()
                )))
            }
            _ => self.command = Some(command),
        }
        self.seed = o.seed.or(self.seed);
        self.out_dir = o.out_dir.or(self.out_dir.take());
        self.quantile = o.quantile.or(self.quantile);
        self.rank = o.rank.or(self.rank);
        self.grid_step = o.grid_step.or(self.grid_step);
        self.input = o.input.or(self.input.take());
        Ok(())
    }

    /// Checks that every referenced file exists.
    pub fn validate_files(&self) -> Result<(), CliError> {
        for p in self.input_files() {
            if !p.is_file() {
                return Err(CliError::Config(format!("input file {} does not exist", p.display())));
            }
        }
        Ok(())
    }

    pub fn input_files(&self) -> Vec<PathBuf> {
        let mut files = Vec::new();
        if let Some(p) = &self.input {
            files.push(p.clone());
        }
        if let Some(LawSpec::Empirical { path, .. }) = &self.model {
            files.push(path.clone());
        }
        files
    }

    /// Copy with paths reduced to file names and no output directory, so the
    /// same run from another directory records identically.
    pub fn portable(&self) -> RunConfig {
        let mut c = self.clone();
        c.out_dir = None;
        let strip = |p: &mut PathBuf| {
            if let Some(name) = p.file_name() {
                *p = PathBuf::from(name);
            }
        };
        if let Some(p) = c.input.as_mut() {
            strip(p);
        }
        if let Some(LawSpec::Empirical { path, .. }) = c.model.as_mut() {
            strip(path);
        }
        c
    }

    /// SHA-256 of the portable form of the effective config.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.portable()).expect("config serializes");
        hex(&Sha256::digest(bytes))
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
