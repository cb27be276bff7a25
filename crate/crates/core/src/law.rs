//! Vector laws and seeded sampler handles.

use std::path::PathBuf;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::husler_reiss::GaussianProfileLaw;
use crate::hyperplane::{HyperplaneCovariance, ProfileVector, Variogram, DEFAULT_TOL_CENTER};
use crate::rng::{try_generate_chunked, StreamRng};

/// A distribution on `R^d` that can be drawn from with a seeded stream.
pub trait VectorLaw: Send + Sync {
    fn dim(&self) -> usize;
    fn draw(&self, rng: &mut StreamRng) -> Vec<f64>;
}

/// Which vector a law describes, and therefore which structural invariant each draw obeys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LawRole {
    /// Profile vector `U`: zero component sum.
    Profile,
    /// Generator `T`: zero component sum.
    Generator,
    /// Spectral vector `S`: maximum component exactly zero.
    Spectral,
}

/// Shared handle to a law with a declared role. Every draw is checked
/// against the role's invariant.
#[derive(Clone)]
pub struct SamplerHandle {
    law: Arc<dyn VectorLaw>,
    role: LawRole,
    tol_center: f64,
}

impl std::fmt::Debug for SamplerHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SamplerHandle")
            .field("dim", &self.law.dim())
            .field("role", &self.role)
            .finish()
    }
}

impl SamplerHandle {
    pub fn new(law: impl VectorLaw + 'static, role: LawRole) -> Self {
        Self::from_arc(Arc::new(law), role)
    }

    pub fn from_arc(law: Arc<dyn VectorLaw>, role: LawRole) -> Self {
        Self {
            law,
            role,
            tol_center: DEFAULT_TOL_CENTER,
        }
    }

    pub fn with_tol_center(mut self, tol: f64) -> Self {
        self.tol_center = tol;
        self
    }

    pub fn role(&self) -> LawRole {
        self.role
    }

    pub fn dim(&self) -> usize {
        self.law.dim()
    }

    /// One checked draw.
    pub fn draw(&self, rng: &mut StreamRng) -> Result<Vec<f64>> {
        let v = self.law.draw(rng);
        self.check(&v)?;
        Ok(v)
    }

    /// `n` checked draws from the chunked stream rooted at `seed`.
    pub fn draw_n(&self, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
        try_generate_chunked(n, seed, |rng| self.draw(rng))
    }

    /// `n` draws wrapped as profile vectors; the role must be `Profile` or `Generator`.
    pub fn draw_profiles(&self, n: usize, seed: u64) -> Result<Vec<ProfileVector>> {
        self.expect_hyperplane()?;
        Ok(self
            .draw_n(n, seed)?
            .into_iter()
            .map(ProfileVector::from_centered)
            .collect())
    }

    pub(crate) fn expect_role(&self, role: LawRole) -> Result<()> {
        if self.role != role {
            return Err(Error::InvalidInput(format!(
                "sampler describes a {:?} law, expected {:?}",
                self.role, role
            )));
        }
        Ok(())
    }

    pub(crate) fn expect_hyperplane(&self) -> Result<()> {
        match self.role {
            LawRole::Profile | LawRole::Generator => Ok(()),
            LawRole::Spectral => Err(Error::InvalidInput(
                "sampler describes a spectral law, expected a law on the hyperplane".into(),
            )),
        }
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        let d = self.law.dim();
        if v.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: v.len(),
            });
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("sampler produced a non-finite draw".into()));
        }
        match self.role {
            LawRole::Profile | LawRole::Generator => {
                let sum: f64 = v.iter().sum();
                if sum.abs() > d as f64 * self.tol_center {
                    return Err(Error::Numeric(format!(
                        "draw does not lie on the hyperplane (component sum {sum:e})"
                    )));
                }
            }
            LawRole::Spectral => {
                let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                if max != 0.0 {
                    return Err(Error::Numeric(format!(
                        "spectral draw has maximum {max:e}, expected exactly 0"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Point mass at a fixed vector.
#[derive(Debug, Clone)]
pub struct DegenerateLaw(Vec<f64>);

impl DegenerateLaw {
    pub fn new(value: Vec<f64>) -> Self {
        Self(value)
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }
}

impl VectorLaw for DegenerateLaw {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn draw(&self, _rng: &mut StreamRng) -> Vec<f64> {
        self.0.clone()
    }
}

/// Uniform resampling from a fixed set of rows.
#[derive(Debug, Clone)]
pub struct EmpiricalLaw {
    rows: Arc<Vec<Vec<f64>>>,
    dim: usize,
}

impl EmpiricalLaw {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::InvalidInput("empirical law needs at least one row".into()))?;
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::InvalidInput("empirical law rows differ in length".into()));
        }
        Ok(Self {
            rows: Arc::new(rows),
            dim,
        })
    }

    pub fn from_profiles(profiles: &[ProfileVector]) -> Result<Self> {
        Self::new(profiles.iter().map(|p| p.as_slice().to_vec()).collect())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl VectorLaw for EmpiricalLaw {
    fn dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, rng: &mut StreamRng) -> Vec<f64> {
        self.rows[rng.random_range(0..self.rows.len())].clone()
    }
}

/// Law given by a closure over the stream.
pub struct FnLaw<F> {
    dim: usize,
    f: F,
}

impl<F> FnLaw<F>
where
    F: Fn(&mut StreamRng) -> Vec<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> VectorLaw for FnLaw<F>
where
    F: Fn(&mut StreamRng) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, rng: &mut StreamRng) -> Vec<f64> {
        (self.f)(rng)
    }
}

/// JSON description of a sampler:
/// `{"law": "gaussian_profile" | "empirical" | "degenerate", ..., "seed": 7}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    #[serde(flatten)]
    pub law: LawSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case")]
pub enum LawSpec {
    /// Either a variogram `gamma`, or `sigma` with optional `mu`
    /// (`mu` requires `extended: true`).
    GaussianProfile {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<Variogram>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<HyperplaneCovariance>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<Vec<f64>>,
        #[serde(default)]
        extended: bool,
    },
    /// Rows of a CSV file, resampled uniformly.
    Empirical {
        path: PathBuf,
        #[serde(default = "default_role")]
        role: LawRole,
    },
    Degenerate {
        value: Vec<f64>,
        #[serde(default = "default_role")]
        role: LawRole,
    },
}

fn default_role() -> LawRole {
    LawRole::Profile
}

impl LawSpec {
    /// The Gaussian profile law described here, if it is one.
    pub fn gaussian(&self) -> Result<Option<GaussianProfileLaw>> {
        let LawSpec::GaussianProfile {
            gamma,
            sigma,
            mu,
            extended,
        } = self
        else {
            return Ok(None);
        };
        let law = match (gamma, sigma) {
            (Some(g), None) => {
                if mu.is_some() {
                    return Err(Error::InvalidInput(
                        "a variogram determines mu; give sigma with mu for an extended law".into(),
                    ));
                }
                GaussianProfileLaw::from_variogram(g)
            }
            (None, Some(s)) => match mu {
                Some(m) => GaussianProfileLaw::new(ProfileVector::new(m.clone())?, s.clone(), *extended)?,
                None => GaussianProfileLaw::from_covariance(s.clone()),
            },
            _ => {
                return Err(Error::InvalidInput(
                    "gaussian_profile law needs exactly one of gamma or sigma".into(),
                ))
            }
        };
        Ok(Some(law))
    }

    pub fn role(&self) -> LawRole {
        match self {
            LawSpec::GaussianProfile { .. } => LawRole::Profile,
            LawSpec::Empirical { role, .. } | LawSpec::Degenerate { role, .. } => *role,
        }
    }

    /// Builds a sampler; relative empirical paths resolve against `base`.
    pub fn build(&self, base: Option<&std::path::Path>) -> Result<SamplerHandle> {
        if let Some(law) = self.gaussian()? {
            return Ok(law.sampler()?.into_handle());
        }
        match self {
            LawSpec::Empirical { path, role } => {
                let path = match base {
                    Some(b) if path.is_relative() => b.join(path),
                    _ => path.clone(),
                };
                let rows = crate::io::read_matrix_csv(&path)?;
                Ok(SamplerHandle::new(EmpiricalLaw::new(rows)?, *role))
            }
            LawSpec::Degenerate { value, role } => {
                if value.len() < 2 {
                    return Err(Error::InvalidInput("degenerate law needs d >= 2".into()));
                }
                Ok(SamplerHandle::new(DegenerateLaw::new(value.clone()), *role))
            }
            LawSpec::GaussianProfile { .. } => unreachable!("handled above"),
        }
    }
}
