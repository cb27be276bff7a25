//! Profile random vectors for multivariate extremes.
//!
//! A profile vector lives on the hyperplane `1⊥` of vectors with zero sum.
//! Multivariate generalized Pareto vectors `X = E·1 + U` and max-stable
//! vectors `Z = E·1 + S` split into an exponential radial part along `1` and
//! a profile. This crate covers:
//!
//! * hyperplane algebra and variogram checks ([`hyperplane`]),
//! * the Husler-Reiss family as Gaussian profile laws ([`husler_reiss`]),
//! * samplers linking the profile, generator and spectral laws
//!   ([`constructions`]),
//! * the transforms between the laws of `max U` and `max T` ([`max_link`]),
//! * diagonal peaks-over-threshold fitting ([`dpot`]),
//! * principal components of profiles ([`pca`]).
//!
//! Random draws are reproducible for a given seed regardless of the number of
//! threads; see [`rng`].

pub mod constructions;
pub mod dpot;
pub mod error;
pub mod husler_reiss;
pub mod hyperplane;
pub mod io;
pub mod law;
pub mod max_link;
pub mod pca;
pub mod rng;

pub use constructions::{
    gev_exponent, profile_from_spectral, sample_t_from_u, sample_u_from_t, sample_x_from_u, sample_z,
    sample_zstar_from_u, spectral_from_profile, GevEstimate, RejectionConfig, RejectionOutcome, SirOutcome,
    SpectralVector, TailKind, TailSample,
};
pub use dpot::{extract_exceedances, fit_hr, standardize_margins, threshold_stability, DataMatrix, ExceedanceSet, HrFit};
pub use error::{Error, ErrorKind, Result};
pub use husler_reiss::{gamma_to_sigma, mu_from_sigma, sigma_to_gamma, GaussianProfileLaw, GaussianProfileSampler};
pub use hyperplane::{
    apply_projector, center, is_valid_variogram, Dimension, HyperplaneCovariance, ProfileVector, Tolerances, Variogram,
    VariogramCheck, VariogramViolation,
};
pub use law::{LawRole, LawSpec, SamplerHandle, SamplerSpec, VectorLaw};
pub use max_link::{
    check_moment_identity, density_transform, max_t_cdf_from_max_u, max_u_cdf_from_max_t, CdfLink, LinkDirection,
    TabulatedCdf, TabulatedDensity,
};
pub use pca::{profile_pca, profile_pca_samples, reconstruction_error, truncate_to_rank, ProfileEigensystem};

/// Library version recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
