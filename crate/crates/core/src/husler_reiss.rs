//! Husler-Reiss tails as Gaussian profile vectors.
//!
//! A Husler-Reiss model with variogram `Γ` has profile vector
//! `U ~ N(μ, Σ)` where `Σ = -½ PΓP` and `μ = -½(diag Σ - mean(diag Σ)·1)`.
//! The extended family drops the link between `μ` and `Σ` and admits any
//! Gaussian law on `1⊥`.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hyperplane::{
    center_unchecked, double_center, hyperplane_eigen, symmetrize, HyperplaneCovariance, ProfileVector,
    Tolerances, Variogram,
};
use crate::law::{LawRole, SamplerHandle, VectorLaw};
use crate::rng::StreamRng;

/// Allowed gap between a user-supplied `μ` and the value implied by `Σ` for a non-extended law.
pub const MU_LINK_TOL: f64 = 1e-10;

/// `Σ = -½ PΓP`.
pub fn gamma_to_sigma(gamma: &Variogram) -> HyperplaneCovariance {
    let sigma = symmetrize(&double_center(gamma.matrix()).scale(-0.5));
    HyperplaneCovariance::from_trusted(sigma)
}

/// `Γ_ij = Σ_ii + Σ_jj - 2Σ_ij`, the variogram of any vector with covariance `Σ`.
pub fn sigma_to_gamma(sigma: &HyperplaneCovariance) -> Variogram {
    let s = sigma.matrix();
    let d = s.nrows();
    let g = DMatrix::from_fn(d, d, |i, j| {
        if i == j {
            0.0
        } else {
            // symmetric by construction; tiny negatives are rounding of a zero variance
            (s[(i, i)] + s[(j, j)] - 2.0 * s[(i, j)]).max(0.0)
        }
    });
    let g = symmetrize(&g);
    Variogram::from_trusted(g)
}

/// `μ = -½{diag(Σ) - mean(diag Σ)·1}`.
pub fn mu_from_sigma(sigma: &HyperplaneCovariance) -> ProfileVector {
    let half_diag: Vec<f64> = sigma.matrix().diagonal().iter().map(|v| -0.5 * v).collect();
    ProfileVector::from_centered(center_unchecked(&half_diag))
}

/// `N(μ, Σ)` on the hyperplane; `extended = false` ties `μ` to `Σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GaussianProfileLawRepr", into = "GaussianProfileLawRepr")]
pub struct GaussianProfileLaw {
    mu: ProfileVector,
    sigma: HyperplaneCovariance,
    extended: bool,
}

#[derive(Serialize, Deserialize)]
struct GaussianProfileLawRepr {
    d: usize,
    mu: ProfileVector,
    sigma: HyperplaneCovariance,
    #[serde(default)]
    extended: bool,
}

impl TryFrom<GaussianProfileLawRepr> for GaussianProfileLaw {
    type Error = Error;
    fn try_from(r: GaussianProfileLawRepr) -> Result<Self> {
        if r.d != r.mu.dim() {
            return Err(Error::DimensionMismatch {
                expected: r.d,
                found: r.mu.dim(),
            });
        }
        Self::new(r.mu, r.sigma, r.extended)
    }
}

impl From<GaussianProfileLaw> for GaussianProfileLawRepr {
    fn from(l: GaussianProfileLaw) -> Self {
        Self {
            d: l.dim(),
            mu: l.mu,
            sigma: l.sigma,
            extended: l.extended,
        }
    }
}

impl GaussianProfileLaw {
    pub fn new(mu: ProfileVector, sigma: HyperplaneCovariance, extended: bool) -> Result<Self> {
        if mu.dim() != sigma.dim() {
            return Err(Error::DimensionMismatch {
                expected: sigma.dim(),
                found: mu.dim(),
            });
        }
        if !extended {
            let linked = mu_from_sigma(&sigma);
            let gap = max_abs_diff(mu.as_slice(), linked.as_slice());
            if gap > MU_LINK_TOL {
                return Err(Error::InvalidParameter(format!(
                    "mu differs from the Husler-Reiss value implied by sigma by {gap:e}; \
                     set extended = true to decouple them"
                )));
            }
        }
        Ok(Self { mu, sigma, extended })
    }

    /// Husler-Reiss law of a variogram.
    pub fn from_variogram(gamma: &Variogram) -> Self {
        Self::from_covariance(gamma_to_sigma(gamma))
    }

    /// Husler-Reiss law with `μ` implied by `Σ`.
    pub fn from_covariance(sigma: HyperplaneCovariance) -> Self {
        let mu = mu_from_sigma(&sigma);
        Self {
            mu,
            sigma,
            extended: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.dim()
    }

    pub fn mu(&self) -> &ProfileVector {
        &self.mu
    }

    pub fn sigma(&self) -> &HyperplaneCovariance {
        &self.sigma
    }

    pub fn extended(&self) -> bool {
        self.extended
    }

    pub fn variogram(&self) -> Variogram {
        sigma_to_gamma(&self.sigma)
    }

    pub fn sampler(&self) -> Result<GaussianProfileSampler> {
        GaussianProfileSampler::new(self, &Tolerances::default())
    }
}

/// Draws `μ + Σ_k √λ_k g_k v_k` over the eigenpairs of `Σ` on `1⊥` with `λ_k > tol_psd`.
#[derive(Debug, Clone)]
pub struct GaussianProfileSampler {
    mu: DVector<f64>,
    factor: DMatrix<f64>,
}

impl GaussianProfileSampler {
    pub fn new(law: &GaussianProfileLaw, tol: &Tolerances) -> Result<Self> {
        let s = law.sigma.matrix();
        let d = s.nrows();
        let cutoff = tol.psd_for(s);
        let (values, vectors) = hyperplane_eigen(s);
        if let Some(neg) = values.iter().copied().find(|l| *l < -cutoff) {
            return Err(Error::InvalidParameter(format!(
                "covariance has eigenvalue {neg:e} below -{cutoff:e}"
            )));
        }
        let kept: Vec<DVector<f64>> = values
            .iter()
            .zip(vectors)
            .filter(|(l, _)| **l > cutoff)
            .map(|(l, v)| v * l.sqrt())
            .collect();
        let factor = if kept.is_empty() {
            DMatrix::zeros(d, 0)
        } else {
            DMatrix::from_columns(&kept)
        };
        Ok(Self {
            mu: DVector::from_column_slice(law.mu.as_slice()),
            factor,
        })
    }

    /// Number of retained eigendirections.
    pub fn rank(&self) -> usize {
        self.factor.ncols()
    }

    pub fn into_handle(self) -> SamplerHandle {
        SamplerHandle::new(self, LawRole::Profile)
    }
}

impl VectorLaw for GaussianProfileSampler {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn draw(&self, rng: &mut StreamRng) -> Vec<f64> {
        let g = DVector::from_fn(self.factor.ncols(), |_, _| StandardNormal.sample(rng));
        let x = &self.mu + &self.factor * g;
        x.iter().copied().collect()
    }
}

/// `n` draws of `U ~ N(μ, Σ)`; `n = 0` gives an empty vector.
pub fn sample_gaussian_profile(law: &GaussianProfileLaw, n: usize, seed: u64) -> Result<Vec<ProfileVector>> {
    law.sampler()?.into_handle().draw_profiles(n, seed)
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |acc, (x, y)| acc.max((x - y).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperplane::{is_valid_variogram, rows_to_matrix};
    use proptest::prelude::*;

    fn mat(rows: &[&[f64]]) -> DMatrix<f64> {
        rows_to_matrix(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn variogram(rows: &[&[f64]]) -> Variogram {
        Variogram::new(mat(rows), &Tolerances::default()).unwrap()
    }

    fn worked_sigma() -> DMatrix<f64> {
        mat(&[&[5.0, 2.0, -7.0], &[2.0, 8.0, -10.0], &[-7.0, -10.0, 17.0]]) / 9.0
    }

    fn assert_close(a: &DMatrix<f64>, b: &DMatrix<f64>, tol: f64) {
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= tol, "{a} vs {b}");
        }
    }

    #[test]
    fn gamma_to_sigma_examples() {
        for gamma in [0.3, 1.0, 7.5] {
            let s = gamma_to_sigma(&variogram(&[&[0.0, gamma], &[gamma, 0.0]]));
            let expected = mat(&[&[1.0, -1.0], &[-1.0, 1.0]]) * (gamma / 4.0);
            assert_close(s.matrix(), &expected, 1e-15);

            let g3 = (DMatrix::from_element(3, 3, 1.0) - DMatrix::identity(3, 3)) * gamma;
            let s3 = gamma_to_sigma(&Variogram::new(g3, &Tolerances::default()).unwrap());
            let p = DMatrix::identity(3, 3) - DMatrix::from_element(3, 3, 1.0 / 3.0);
            assert_close(s3.matrix(), &(p * (gamma / 2.0)), 1e-15);
        }
        let s = gamma_to_sigma(&variogram(&[&[0.0, 1.0, 4.0], &[1.0, 0.0, 5.0], &[4.0, 5.0, 0.0]]));
        assert_close(s.matrix(), &worked_sigma(), 1e-15);
    }

    #[test]
    fn invalid_variogram_is_a_parameter_error() {
        let err = Variogram::new(mat(&[&[0.0, -1.0], &[-1.0, 0.0]]), &Tolerances::default()).unwrap_err();
        assert!(matches!(err, Error::InvalidVariogram(_)));
        assert!(err.to_string().contains("negative"));
    }

    #[test]
    fn sigma_to_gamma_examples() {
        let gamma = 2.5;
        let s = HyperplaneCovariance::from_rows(&[vec![gamma / 4.0, -gamma / 4.0], vec![-gamma / 4.0, gamma / 4.0]])
            .unwrap();
        assert_close(sigma_to_gamma(&s).matrix(), &mat(&[&[0.0, gamma], &[gamma, 0.0]]), 1e-15);

        let zero = HyperplaneCovariance::zeros(4);
        assert_eq!(sigma_to_gamma(&zero).matrix(), &DMatrix::zeros(4, 4));

        let s = HyperplaneCovariance::new(worked_sigma(), &Tolerances::default()).unwrap();
        let g = mat(&[&[0.0, 1.0, 4.0], &[1.0, 0.0, 5.0], &[4.0, 5.0, 0.0]]);
        assert_close(sigma_to_gamma(&s).matrix(), &g, 1e-14);
    }

    #[test]
    fn mu_from_sigma_examples() {
        let s = HyperplaneCovariance::from_rows(&[vec![0.5, -0.5], vec![-0.5, 0.5]]).unwrap();
        assert_eq!(mu_from_sigma(&s).as_slice(), &[0.0, 0.0]);

        let s = HyperplaneCovariance::new(worked_sigma(), &Tolerances::default()).unwrap();
        let mu = mu_from_sigma(&s);
        let expected = [5.0 / 18.0, 1.0 / 9.0, -7.0 / 18.0];
        for (a, b) in mu.as_slice().iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }

        let p = DMatrix::identity(4, 4) - DMatrix::from_element(4, 4, 0.25);
        let s = HyperplaneCovariance::new(p * 3.0, &Tolerances::default()).unwrap();
        assert!(mu_from_sigma(&s).as_slice().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn law_enforces_mu_link_unless_extended() {
        let s = HyperplaneCovariance::new(worked_sigma(), &Tolerances::default()).unwrap();
        let off = ProfileVector::new(vec![0.5, -0.25, -0.25]).unwrap();
        assert!(GaussianProfileLaw::new(off.clone(), s.clone(), false).is_err());
        let law = GaussianProfileLaw::new(off, s.clone(), true).unwrap();
        assert!(law.extended());
        let linked = GaussianProfileLaw::new(mu_from_sigma(&s), s, false).unwrap();
        assert!(!linked.extended());
    }

    #[test]
    fn law_json_shape() {
        let law = GaussianProfileLaw::from_variogram(&variogram(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let json = serde_json::to_value(&law).unwrap();
        assert_eq!(json["d"], 2);
        assert_eq!(json["extended"], false);
        assert_eq!(json["sigma"][0][1], -0.25);
        let back: GaussianProfileLaw = serde_json::from_value(json).unwrap();
        assert_eq!(back, law);

        let bad = serde_json::json!({"d": 3, "mu": [0.0, 0.0], "sigma": [[0.25, -0.25], [-0.25, 0.25]]});
        assert!(serde_json::from_value::<GaussianProfileLaw>(bad).is_err());
    }

    #[test]
    fn degenerate_law_samples_zero() {
        let law = GaussianProfileLaw::from_covariance(HyperplaneCovariance::zeros(3));
        let draws = sample_gaussian_profile(&law, 17, 4).unwrap();
        assert_eq!(draws.len(), 17);
        assert!(draws.iter().all(|u| u.as_slice() == [0.0; 3]));
        assert!(sample_gaussian_profile(&law, 0, 4).unwrap().is_empty());
        assert_eq!(law.sampler().unwrap().rank(), 0);
    }

    #[test]
    fn sampler_is_deterministic() {
        let law = GaussianProfileLaw::from_variogram(&variogram(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let a = sample_gaussian_profile(&law, 10, 99).unwrap();
        let b = sample_gaussian_profile(&law, 10, 99).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn sample_covariance_matches_sigma() {
        let law = GaussianProfileLaw::from_variogram(&variogram(&[&[0.0, 1.0], &[1.0, 0.0]]));
        let n = 100_000;
        let draws = sample_gaussian_profile(&law, n, 2024).unwrap();
        let m = draws.iter().map(|u| u.as_slice()[0]).sum::<f64>() / n as f64;
        let var = draws.iter().map(|u| (u.as_slice()[0] - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        // U_1 ~ N(0, 1/4): var(U_1^2) = 2σ^4
        let se = (2.0 * 0.25f64.powi(2) / n as f64).sqrt();
        assert!((var - 0.25).abs() < 3.0 * se, "var {var}, se {se}");
        for u in &draws {
            assert!(u.as_slice().iter().sum::<f64>().abs() <= 2e-12);
        }
    }

    #[test]
    fn rank_deficient_sampler_stays_in_span() {
        // W = (0, N, 2N): rank-one variogram
        let g = variogram(&[&[0.0, 1.0, 4.0], &[1.0, 0.0, 1.0], &[4.0, 1.0, 0.0]]);
        let law = GaussianProfileLaw::from_variogram(&g);
        let sampler = law.sampler().unwrap();
        assert_eq!(sampler.rank(), 1);
        let draws = sample_gaussian_profile(&law, 500, 1).unwrap();
        // centered W direction is (-1, 0, 1)
        let mu = law.mu().as_slice().to_vec();
        for u in draws {
            let x: Vec<f64> = u.as_slice().iter().zip(&mu).map(|(a, b)| a - b).collect();
            assert!((x[1]).abs() < 1e-12 && (x[0] + x[2]).abs() < 1e-12);
        }
    }

    /// Variogram of `W = A g` for a `d×k` matrix `A`: `Γ_ij = |A_i - A_j|²`.
    fn variogram_of(a: &DMatrix<f64>) -> DMatrix<f64> {
        let d = a.nrows();
        DMatrix::from_fn(d, d, |i, j| (a.row(i) - a.row(j)).norm_squared())
    }

    fn random_factor() -> impl Strategy<Value = DMatrix<f64>> {
        (2usize..8, 1usize..8).prop_flat_map(|(d, k)| {
            proptest::collection::vec(-2.0..2.0f64, d * k).prop_map(move |v| DMatrix::from_vec(d, k, v))
        })
    }

    proptest! {
        #[test]
        fn variogram_round_trip(a in random_factor()) {
            let g = variogram_of(&a);
            prop_assert!(is_valid_variogram(&g, &Tolerances::default()).is_valid());
            let v = Variogram::new(g.clone(), &Tolerances::default()).unwrap();
            let s = gamma_to_sigma(&v);
            let ones = DVector::from_element(g.nrows(), 1.0);
            prop_assert!((s.matrix() * ones).amax() <= 1e-12);
            let back = sigma_to_gamma(&s);
            for (x, y) in back.matrix().iter().zip(g.iter()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
            prop_assert!(mu_from_sigma(&s).as_slice().iter().sum::<f64>().abs() <= 1e-12);
        }
    }
}
