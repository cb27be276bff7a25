//! Stochastic representations linking the tail vectors.
//!
//! With `E, E'` unit exponentials independent of everything else:
//!
//! * `Z = E·1 + S` for a spectral vector `S` (max component zero),
//! * `T = S - S̄·1` and `S = T - max(T)·1`,
//! * `U = T | {max(T) ≤ E}` (rejection), and conversely `T` is `U` tilted by `e^{max(U)}`,
//! * `Z* = E'·1 + U`, and `X = E·1 + U` has profile vector exactly `U`.
//!
//! Samplers that combine a vector law with exponentials split their seed:
//! the law uses `derive_seed(seed, 0)` and the exponentials `derive_seed(seed, 1)`.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperplane::{center_unchecked, max_of, ProfileVector};
use crate::law::{LawRole, SamplerHandle};
use crate::rng::{derive_seed, exponential, exponentials, generate_chunked, stream, CHUNK_SIZE};

pub const LAW_STREAM: u64 = 0;
pub const EXP_STREAM: u64 = 1;

/// A vector whose maximum component is exactly zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct SpectralVector(Vec<f64>);

impl SpectralVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidInput("spectral vector needs d >= 2".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("spectral vector has non-finite entries".into()));
        }
        let max = max_of(&values);
        if max != 0.0 {
            return Err(Error::InvalidInput(format!(
                "spectral vector has maximum {max:e}, expected exactly 0"
            )));
        }
        Ok(Self(values))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl TryFrom<Vec<f64>> for SpectralVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SpectralVector> for Vec<f64> {
    fn from(s: SpectralVector) -> Self {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TailKind {
    X,
    Z,
    Zstar,
}

impl TailKind {
    pub fn label(self) -> &'static str {
        match self {
            TailKind::X => "X",
            TailKind::Z => "Z",
            TailKind::Zstar => "Zstar",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailSample {
    pub values: Vec<f64>,
    pub kind: TailKind,
}

impl TailSample {
    pub fn new(values: Vec<f64>, kind: TailKind) -> Result<Self> {
        let ok = match kind {
            TailKind::X => true,
            TailKind::Z => max_of(&values) >= 0.0,
            TailKind::Zstar => values.iter().sum::<f64>() >= 0.0,
        };
        if !ok {
            return Err(Error::InvalidInput(format!("vector violates the {} support", kind.label())));
        }
        Ok(Self { values, kind })
    }
}

/// `S = t - max(t)·1`.
pub fn spectral_from_profile(t: &ProfileVector) -> SpectralVector {
    SpectralVector(shift_to_zero_max(t.as_slice()))
}

/// `T = s - s̄·1`.
pub fn profile_from_spectral(s: &SpectralVector) -> ProfileVector {
    ProfileVector::from_centered(center_unchecked(s.as_slice()))
}

fn shift_to_zero_max(v: &[f64]) -> Vec<f64> {
    let m = max_of(v);
    v.iter().map(|x| x - m).collect()
}

/// `Z = E·1 + S` for `S` drawn from a spectral law.
pub fn sample_z(s_sampler: &SamplerHandle, n: usize, seed: u64) -> Result<Vec<TailSample>> {
    s_sampler.expect_role(LawRole::Spectral)?;
    let draws = s_sampler.draw_n(n, derive_seed(seed, LAW_STREAM))?;
    let es = exponentials(n, derive_seed(seed, EXP_STREAM));
    Ok(draws
        .into_iter()
        .zip(es)
        .map(|(s, e)| TailSample {
            values: s.iter().map(|v| v + e).collect(),
            kind: TailKind::Z,
        })
        .collect())
}

/// `X = E·1 + U`; the component mean of every draw equals its exponential.
pub fn sample_x_from_u(u_sampler: &SamplerHandle, n: usize, seed: u64) -> Result<Vec<TailSample>> {
    shift_profiles(u_sampler, n, seed, TailKind::X)
}

/// `Z* = E'·1 + U`.
pub fn sample_zstar_from_u(u_sampler: &SamplerHandle, n: usize, seed: u64) -> Result<Vec<TailSample>> {
    shift_profiles(u_sampler, n, seed, TailKind::Zstar)
}

fn shift_profiles(u_sampler: &SamplerHandle, n: usize, seed: u64, kind: TailKind) -> Result<Vec<TailSample>> {
    u_sampler.expect_hyperplane()?;
    let us = u_sampler.draw_n(n, derive_seed(seed, LAW_STREAM))?;
    let check = check_exp_max_moment(us.iter().map(|u| max_of(u)));
    if !check.stable {
        log::warn!(
            "E[exp(max U)] estimate has not stabilized (half-sample {:.4}, full {:.4}); \
             the profile law may lack a finite exponential moment",
            check.half_sample_estimate,
            check.estimate
        );
    }
    let es = exponentials(n, derive_seed(seed, EXP_STREAM));
    Ok(us
        .into_iter()
        .zip(es)
        .map(|(u, e)| TailSample {
            values: u.iter().map(|v| v + e).collect(),
            kind,
        })
        .collect())
}

/// Running-mean diagnostic for `E[exp(max U)] < ∞`.
///
/// Finite draws can never certify the moment; this flags estimates that
/// move by more than 10% between the first half and the full sample, or
/// where a single draw carries more than 5% of the total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentCheck {
    pub estimate: f64,
    pub half_sample_estimate: f64,
    pub largest_share: f64,
    pub stable: bool,
}

pub fn check_exp_max_moment(max_values: impl IntoIterator<Item = f64>) -> MomentCheck {
    let maxes: Vec<f64> = max_values.into_iter().collect();
    let n = maxes.len();
    if n == 0 {
        return MomentCheck {
            estimate: f64::NAN,
            half_sample_estimate: f64::NAN,
            largest_share: f64::NAN,
            stable: true,
        };
    }
    let shift = max_of(&maxes);
    let w: Vec<f64> = maxes.iter().map(|m| (m - shift).exp()).collect();
    let half = (n / 2).max(1);
    let total: f64 = w.iter().sum();
    let half_total: f64 = w[..half].iter().sum();
    let estimate = shift.exp() * total / n as f64;
    let half_sample_estimate = shift.exp() * half_total / half as f64;
    let largest_share = 1.0 / total;
    let stable = n < 100 || ((half_sample_estimate / estimate - 1.0).abs() <= 0.1 && largest_share <= 0.05);
    MomentCheck {
        estimate,
        half_sample_estimate,
        largest_share,
        stable,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RejectionConfig {
    /// Hard cap on proposals.
    pub max_attempts: u64,
    /// Acceptance rates below this abort the run once `floor_after` proposals were made.
    pub acceptance_floor: f64,
    pub floor_after: u64,
}

impl Default for RejectionConfig {
    fn default() -> Self {
        Self {
            max_attempts: 1_000_000_000,
            acceptance_floor: 1e-6,
            floor_after: 10_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RejectionOutcome {
    pub profiles: Vec<ProfileVector>,
    /// Proposals up to and including the last accepted one.
    pub attempts: u64,
    /// Estimates `E[exp(-max T)]`.
    pub acceptance_rate: f64,
    pub standard_error: f64,
}

/// `U = T | {max(T) ≤ E}` by rejection: accept a proposal `t` iff `max(t) ≤ e`.
pub fn sample_u_from_t(
    t_sampler: &SamplerHandle,
    n: usize,
    seed: u64,
    config: &RejectionConfig,
) -> Result<RejectionOutcome> {
    t_sampler.expect_role(LawRole::Generator)?;
    let mut profiles = Vec::with_capacity(n);
    let mut attempts: u64 = 0;
    let mut next_chunk: u64 = 0;
    let batch = (rayon::current_num_threads() * 4).max(1) as u64;

    while profiles.len() < n {
        if attempts >= config.max_attempts {
            return Err(inefficient(profiles.len(), attempts, config));
        }
        if attempts >= config.floor_after
            && (profiles.len() as f64 / attempts as f64) < config.acceptance_floor
        {
            return Err(inefficient(profiles.len(), attempts, config));
        }
        let results: Vec<Result<Vec<(usize, Vec<f64>)>>> = (next_chunk..next_chunk + batch)
            .into_par_iter()
            .map(|c| {
                let mut rng = stream(derive_seed(seed, c));
                let mut accepted = Vec::new();
                for i in 0..CHUNK_SIZE {
                    let t = t_sampler.draw(&mut rng)?;
                    let e = exponential(&mut rng);
                    if max_of(&t) <= e {
                        accepted.push((i, t));
                    }
                }
                Ok(accepted)
            })
            .collect();
        next_chunk += batch;
        for chunk in results {
            for (i, t) in chunk? {
                if profiles.len() == n {
                    break;
                }
                profiles.push(ProfileVector::from_centered(t));
                if profiles.len() == n {
                    attempts += i as u64 + 1;
                }
            }
            if profiles.len() == n {
                break;
            }
            attempts += CHUNK_SIZE as u64;
        }
    }
    let (acceptance_rate, standard_error) = if n == 0 {
        (f64::NAN, f64::NAN)
    } else {
        let p = n as f64 / attempts as f64;
        (p, (p * (1.0 - p) / attempts as f64).sqrt())
    };
    Ok(RejectionOutcome {
        profiles,
        attempts,
        acceptance_rate,
        standard_error,
    })
}

fn inefficient(accepted: usize, attempts: u64, config: &RejectionConfig) -> Error {
    Error::Inefficient {
        rate: accepted as f64 / attempts.max(1) as f64,
        attempts,
        floor: config.acceptance_floor,
    }
}

#[derive(Debug, Clone)]
pub struct SirOutcome {
    pub profiles: Vec<ProfileVector>,
    /// Mean importance weight, estimating `E[exp(max U)]`.
    pub weight_mean: f64,
    pub weight_mean_se: f64,
    /// Kish effective sample size `(Σw)² / Σw²`.
    pub effective_sample_size: f64,
    /// `Σw / max(w)`.
    pub weight_ratio: f64,
}

/// Approximate draws of `T` by sampling-importance-resampling from draws of
/// `U` with weights `exp(max(u))`.
pub fn sample_t_from_u(u_samples: &[ProfileVector], m: usize, seed: u64) -> Result<SirOutcome> {
    let n = u_samples.len();
    if n == 0 {
        return Err(Error::InvalidInput("tilting needs at least one profile draw".into()));
    }
    let log_w: Vec<f64> = u_samples.iter().map(ProfileVector::max).collect();
    let shift = max_of(&log_w);
    let w: Vec<f64> = log_w.iter().map(|l| (l - shift).exp()).collect();
    let sum: f64 = w.iter().sum();
    let sum_sq: f64 = w.iter().map(|x| x * x).sum();
    let mean_scaled = sum / n as f64;
    let var_scaled = if n > 1 {
        w.iter().map(|x| (x - mean_scaled).powi(2)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    let scale = shift.exp();
    let dist = WeightedIndex::new(&w).map_err(|e| Error::Numeric(format!("importance weights: {e}")))?;
    let picks = generate_chunked(m, seed, |rng| dist.sample(rng));
    Ok(SirOutcome {
        profiles: picks.into_iter().map(|i| u_samples[i].clone()).collect(),
        weight_mean: scale * mean_scaled,
        weight_mean_se: scale * (var_scaled / n as f64).sqrt(),
        effective_sample_size: sum * sum / sum_sq,
        weight_ratio: sum,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GevEstimate {
    /// Exponent measure `V(x) = E[exp(max(S - x))]`.
    pub v: f64,
    /// `G(x) = exp(-V(x))`.
    pub g: f64,
    pub standard_error: f64,
    pub n: usize,
}

/// Monte Carlo estimate of the GEV exponent `V(x) = E[exp(max(S - x))]`.
///
/// Spectral and generator laws are averaged directly (a generator draw is
/// first shifted to zero max). For a profile law, draws are shifted the same
/// way and weighted by `exp(max(u))` with self-normalized weights.
pub fn gev_exponent(sampler: &SamplerHandle, x: &[f64], n: usize, seed: u64) -> Result<GevEstimate> {
    let d = sampler.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: x.len(),
        });
    }
    if n == 0 {
        return Err(Error::InvalidInput("gev_exponent needs n >= 1".into()));
    }
    let draws = sampler.draw_n(n, seed)?;
    let term = |s: &[f64]| s.iter().zip(x).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max).exp();
    let nf = n as f64;
    let (v, se) = match sampler.role() {
        LawRole::Spectral | LawRole::Generator => {
            let terms: Vec<f64> = draws.iter().map(|s| term(&shift_to_zero_max(s))).collect();
            let mean = terms.iter().sum::<f64>() / nf;
            (mean, sample_sd(&terms, mean) / nf.sqrt())
        }
        LawRole::Profile => {
            let log_w: Vec<f64> = draws.iter().map(|u| max_of(u)).collect();
            let shift = max_of(&log_w);
            let w: Vec<f64> = log_w.iter().map(|l| (l - shift).exp()).collect();
            let terms: Vec<f64> = draws.iter().map(|u| term(&shift_to_zero_max(u))).collect();
            let wsum: f64 = w.iter().sum();
            let v = w.iter().zip(&terms).map(|(a, b)| a * b).sum::<f64>() / wsum;
            let w_mean = wsum / nf;
            let resid: Vec<f64> = w.iter().zip(&terms).map(|(a, b)| a * (b - v)).collect();
            let se = sample_sd(&resid, 0.0) / (w_mean * nf.sqrt());
            (v, se)
        }
    };
    Ok(GevEstimate {
        v,
        g: (-v).exp(),
        standard_error: se,
        n,
    })
}

fn sample_sd(xs: &[f64], mean: f64) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}
