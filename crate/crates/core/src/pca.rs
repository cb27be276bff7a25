//! Principal components of profile vectors.
//!
//! Every profile covariance annihilates `1`, so the last eigenpair is fixed
//! at `(0, 1/√d)` and only the `d-1` eigenpairs on the hyperplane are
//! computed numerically.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::husler_reiss::{mu_from_sigma, sigma_to_gamma};
use crate::hyperplane::{
    check_hyperplane_covariance, double_center, hyperplane_eigen, symmetrize, HyperplaneCovariance, ProfileVector,
    Tolerances, Variogram,
};

/// Relative gap below which neighbouring eigenvalues count as tied.
pub const TIE_REL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenSource {
    Model,
    Sample,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileEigensystem {
    /// Descending; the last is the eigenvalue along `1`.
    pub eigenvalues: Vec<f64>,
    /// One row per eigenvector, in eigenvalue order.
    pub eigenvectors: Vec<Vec<f64>>,
    pub source: EigenSource,
    /// Sample mean removed before the covariance was formed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Index groups of tied eigenvalues among the first `d-1`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate_groups: Vec<Vec<usize>>,
    #[serde(skip)]
    samples: Vec<ProfileVector>,
}

impl PartialEq for ProfileEigensystem {
    fn eq(&self, other: &Self) -> bool {
        self.eigenvalues == other.eigenvalues
            && self.eigenvectors == other.eigenvectors
            && self.source == other.source
            && self.mean == other.mean
            && self.n == other.n
    }
}

impl ProfileEigensystem {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, k: usize) -> DVector<f64> {
        DVector::from_column_slice(&self.eigenvectors[k])
    }

    pub fn samples(&self) -> &[ProfileVector] {
        &self.samples
    }

    fn check_rank(&self, p: usize) -> Result<()> {
        if p >= self.dim() {
            return Err(Error::InvalidParameter(format!(
                "rank must lie in 0..={}, got {p}",
                self.dim() - 1
            )));
        }
        Ok(())
    }
}

/// PCA of a model covariance.
pub fn profile_pca(sigma: &HyperplaneCovariance) -> ProfileEigensystem {
    build(sigma.matrix(), EigenSource::Model, None, Vec::new())
}

/// PCA of profile samples centered by their sample mean.
pub fn profile_pca_samples(samples: &[ProfileVector]) -> Result<ProfileEigensystem> {
    let n = samples.len();
    let d = samples.first().map_or(0, ProfileVector::dim);
    if d < 2 || n < d {
        return Err(Error::InvalidInput(format!("sample PCA needs at least d samples, got {n} for d = {d}")));
    }
    if samples.iter().any(|s| s.dim() != d) {
        return Err(Error::InvalidInput("samples differ in dimension".into()));
    }
    let mut mean = vec![0.0; d];
    for s in samples {
        for (m, v) in mean.iter_mut().zip(s.as_slice()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for s in samples {
        let c = DVector::from_iterator(d, s.as_slice().iter().zip(&mean).map(|(a, b)| a - b));
        cov.syger(1.0, &c, &c, 1.0);
    }
    cov.fill_upper_triangle_with_lower_triangle();
    cov /= (n.max(2) - 1) as f64;
    let cov = symmetrize(&double_center(&cov));
    check_hyperplane_covariance(&cov, &Tolerances::default())?;
    Ok(build(&cov, EigenSource::Sample, Some(mean), samples.to_vec()))
}

fn build(sigma: &DMatrix<f64>, source: EigenSource, mean: Option<Vec<f64>>, samples: Vec<ProfileVector>) -> ProfileEigensystem {
    let d = sigma.nrows();
    let (values, vectors) = hyperplane_eigen(sigma);
    let mut eigenvalues: Vec<f64> = values.iter().map(|l| l.max(0.0)).collect();
    let ones = DVector::from_element(d, 1.0);
    let along_one = (ones.transpose() * sigma * &ones)[(0, 0)] / d as f64;
    let floor = eigenvalues.last().copied().unwrap_or(0.0);
    eigenvalues.push(along_one.clamp(0.0, floor));
    let mut eigenvectors: Vec<Vec<f64>> = vectors.iter().map(|v| v.iter().copied().collect()).collect();
    eigenvectors.push(vec![1.0 / (d as f64).sqrt(); d]);

    let scale = eigenvalues[0].max(f64::MIN_POSITIVE);
    let mut degenerate_groups = Vec::new();
    let mut group = vec![0];
    for k in 1..d - 1 {
        if (eigenvalues[k - 1] - eigenvalues[k]).abs() <= TIE_REL_TOL * scale {
            group.push(k);
        } else {
            if group.len() > 1 {
                degenerate_groups.push(std::mem::take(&mut group));
            }
            group = vec![k];
        }
    }
    if group.len() > 1 {
        degenerate_groups.push(group);
    }
    let n = (source == EigenSource::Sample).then_some(samples.len());
    ProfileEigensystem {
        eigenvalues,
        eigenvectors,
        source,
        mean,
        n,
        degenerate_groups,
        samples,
    }
}

/// `Σ_p = Σ_{k<p} λ_k v_k v_kᵀ`; `p = 0` gives the zero covariance.
pub fn truncate_to_rank(eig: &ProfileEigensystem, p: usize) -> Result<HyperplaneCovariance> {
    eig.check_rank(p)?;
    let d = eig.dim();
    let mut m = DMatrix::zeros(d, d);
    for k in 0..p {
        let v = eig.eigenvector(k);
        m += &v * v.transpose() * eig.eigenvalues[k];
    }
    Ok(HyperplaneCovariance::from_trusted(symmetrize(&double_center(&m))))
}

/// Orthogonal projection of `u` onto the span of the leading `p` eigenvectors.
pub fn project(eig: &ProfileEigensystem, u: &[f64], p: usize) -> Result<ProfileVector> {
    eig.check_rank(p)?;
    if u.len() != eig.dim() {
        return Err(Error::DimensionMismatch {
            expected: eig.dim(),
            found: u.len(),
        });
    }
    let d = eig.dim();
    let mut out = vec![0.0; d];
    for v in &eig.eigenvectors[..p] {
        let c: f64 = v.iter().zip(u).map(|(a, b)| a * b).sum();
        for (o, vi) in out.iter_mut().zip(v) {
            *o += c * vi;
        }
    }
    let shift = out.iter().sum::<f64>() / d as f64;
    out.iter_mut().for_each(|o| *o -= shift);
    Ok(ProfileVector::from_centered(out))
}

/// Projects the stored samples after removing their mean; the mean is not
/// added back.
pub fn project_samples(eig: &ProfileEigensystem, p: usize) -> Result<Vec<ProfileVector>> {
    let mean = eig
        .mean
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("eigensystem carries no samples".into()))?;
    eig.samples
        .iter()
        .map(|s| {
            let c: Vec<f64> = s.as_slice().iter().zip(mean).map(|(a, b)| a - b).collect();
            project(eig, &c, p)
        })
        .collect()
}

/// Sum of discarded eigenvalues for a model; mean squared residual norm of
/// the centered samples for a sample eigensystem.
pub fn reconstruction_error(eig: &ProfileEigensystem, p: usize) -> Result<f64> {
    eig.check_rank(p)?;
    match eig.source {
        EigenSource::Model => Ok(eig.eigenvalues[p..].iter().sum()),
        EigenSource::Sample => {
            let mean = eig.mean.as_deref().unwrap_or_default();
            let mut total = 0.0;
            for s in &eig.samples {
                let c: Vec<f64> = s.as_slice().iter().zip(mean).map(|(a, b)| a - b).collect();
                let proj = project(eig, &c, p)?;
                total += c.iter().zip(proj.as_slice()).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            }
            Ok(total / eig.samples.len() as f64)
        }
    }
}

/// Truncated law with both readings of its location vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedLaw {
    pub p: usize,
    pub sigma: HyperplaneCovariance,
    pub gamma: Variogram,
    /// Location projected onto the kept eigenvectors.
    pub mu_projected: Option<ProfileVector>,
    /// Location implied by the truncated covariance under the Husler-Reiss link.
    pub mu_linked: ProfileVector,
    /// Norm of the part of the location dropped by the projection.
    pub discarded_mean_norm: Option<f64>,
}

pub fn truncate_law(eig: &ProfileEigensystem, p: usize, mu: Option<&ProfileVector>) -> Result<TruncatedLaw> {
    let sigma = truncate_to_rank(eig, p)?;
    let gamma = sigma_to_gamma(&sigma);
    let mu_linked = mu_from_sigma(&sigma);
    let (mu_projected, discarded_mean_norm) = match mu {
        Some(m) => {
            let proj = project(eig, m.as_slice(), p)?;
            let gap = m
                .as_slice()
                .iter()
                .zip(proj.as_slice())
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            (Some(proj), Some(gap))
        }
        None => (None, None),
    };
    Ok(TruncatedLaw {
        p,
        sigma,
        gamma,
        mu_projected,
        mu_linked,
        discarded_mean_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::husler_reiss::{gamma_to_sigma, sample_gaussian_profile, GaussianProfileLaw};
    use crate::hyperplane::is_valid_variogram;
    use crate::hyperplane::{apply_projector, max_abs, Tolerances};
    use proptest::prelude::*;

    fn cov(rows: &[Vec<f64>]) -> HyperplaneCovariance {
        HyperplaneCovariance::from_rows(rows).unwrap()
    }

    fn scaled_projector(d: usize, c: f64) -> HyperplaneCovariance {
        let m = DMatrix::from_fn(d, d, |i, j| c * (f64::from(u8::from(i == j)) - 1.0 / d as f64));
        HyperplaneCovariance::new(m, &Tolerances::default()).unwrap()
    }

    fn worked_gamma() -> Variogram {
        Variogram::from_rows(&[vec![0.0, 1.0, 4.0], vec![1.0, 0.0, 5.0], vec![4.0, 5.0, 0.0]]).unwrap()
    }

    fn check_invariants(eig: &ProfileEigensystem) {
        let d = eig.dim();
        assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
        assert!(eig.eigenvalues.iter().all(|l| *l >= 0.0));
        assert!(eig.eigenvalues[d - 1] <= 1e-10);
        for k in 0..d - 1 {
            assert!(eig.eigenvectors[k].iter().sum::<f64>().abs() < 1e-10);
        }
        let v = DMatrix::from_fn(d, d, |i, k| eig.eigenvectors[k][i]);
        assert!((v.transpose() * &v - DMatrix::identity(d, d)).amax() < 1e-10);
    }

    #[test]
    fn scaled_projector_example() {
        let gamma = 3.0;
        let eig = profile_pca(&scaled_projector(3, gamma / 2.0));
        check_invariants(&eig);
        for (a, b) in eig.eigenvalues.iter().zip([1.5, 1.5, 0.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(eig.eigenvectors[2].iter().all(|v| (v - 1.0 / 3f64.sqrt()).abs() < 1e-12));
        assert_eq!(eig.degenerate_groups, vec![vec![0, 1]]);
        assert!((reconstruction_error(&eig, 1).unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn rank_one_example() {
        let c = 2.5;
        let s = 0.5f64;
        let sigma = cov(&[vec![c * s, 0.0, -c * s], vec![0.0; 3], vec![-c * s, 0.0, c * s]]);
        let eig = profile_pca(&sigma);
        check_invariants(&eig);
        assert!((eig.eigenvalues[0] - c).abs() < 1e-12);
        assert!(eig.eigenvalues[1].abs() < 1e-12);
        let recovered = truncate_to_rank(&eig, 1).unwrap();
        assert!((recovered.matrix() - sigma.matrix()).amax() < 1e-12);
        let v = &eig.eigenvectors[0];
        assert!((v[0] - s.sqrt()).abs() < 1e-12 && v[1].abs() < 1e-12);
    }

    #[test]
    fn zero_covariance() {
        let eig = profile_pca(&HyperplaneCovariance::zeros(4));
        check_invariants(&eig);
        assert!(eig.eigenvalues.iter().all(|l| *l == 0.0));
    }

    #[test]
    fn full_rank_truncation_is_identity_and_trace_matches() {
        let sigma = gamma_to_sigma(&worked_gamma());
        let eig = profile_pca(&sigma);
        check_invariants(&eig);
        let full = truncate_to_rank(&eig, 2).unwrap();
        assert!((full.matrix() - sigma.matrix()).amax() < 1e-12);
        assert!((eig.eigenvalues.iter().sum::<f64>() - sigma.trace()).abs() < 1e-10);
        assert_eq!(reconstruction_error(&eig, 2).unwrap(), 0.0);
        assert!(truncate_to_rank(&eig, 3).is_err());
    }

    #[test]
    fn rank_one_truncation_of_worked_example_gives_valid_variogram() {
        let eig = profile_pca(&gamma_to_sigma(&worked_gamma()));
        let s1 = truncate_to_rank(&eig, 1).unwrap();
        assert!(s1.matrix().column_sum().amax() < 1e-12);
        let g1 = sigma_to_gamma(&s1);
        assert!(is_valid_variogram(g1.matrix(), &Tolerances::default()).is_valid());
        let v = eig.eigenvector(0);
        let expected = &v * v.transpose() * eig.eigenvalues[0];
        assert!((s1.matrix() - expected).amax() < 1e-12);
    }

    #[test]
    fn rank_zero_is_complete_dependence() {
        let eig = profile_pca(&gamma_to_sigma(&worked_gamma()));
        let law = truncate_law(&eig, 0, None).unwrap();
        assert!(law.gamma.matrix().iter().all(|v| *v == 0.0));
        assert!(law.mu_linked.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn truncated_law_reports_both_locations() {
        let gamma = worked_gamma();
        let law = GaussianProfileLaw::from_variogram(&gamma);
        let eig = profile_pca(law.sigma());
        let t = truncate_law(&eig, 1, Some(law.mu())).unwrap();
        let mu_p = t.mu_projected.unwrap();
        assert!(mu_p.as_slice().iter().sum::<f64>().abs() < 1e-12);
        let expected = mu_from_sigma(&t.sigma);
        assert_eq!(t.mu_linked, expected);
        assert!(t.discarded_mean_norm.unwrap() >= 0.0);
    }

    #[test]
    fn sample_error_matches_model_error() {
        let gamma = 2.0;
        let sigma = scaled_projector(3, gamma / 2.0);
        let law = GaussianProfileLaw::from_covariance(sigma);
        let n = 100_000;
        let samples = sample_gaussian_profile(&law, n, 17).unwrap();
        let eig = profile_pca_samples(&samples).unwrap();
        check_invariants(&eig);
        let err = reconstruction_error(&eig, 1).unwrap();
        // residual squared norm is (γ/2)·χ²₁, variance 2(γ/2)²
        let se = (2.0 * (gamma / 2.0).powi(2) / n as f64).sqrt();
        assert!((err - gamma / 2.0).abs() < 3.0 * se, "err {err}");
    }

    #[test]
    fn projection_is_idempotent_and_centered() {
        let law = GaussianProfileLaw::from_variogram(&worked_gamma());
        let samples = sample_gaussian_profile(&law, 500, 3).unwrap();
        let eig = profile_pca_samples(&samples).unwrap();
        for u in project_samples(&eig, 1).unwrap() {
            assert!(u.as_slice().iter().sum::<f64>().abs() < 1e-12);
            let again = project(&eig, u.as_slice(), 1).unwrap();
            for (a, b) in again.as_slice().iter().zip(u.as_slice()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn pca_beats_random_directions() {
        use rand::{Rng, SeedableRng};
        let law = GaussianProfileLaw::from_variogram(&worked_gamma());
        let samples = sample_gaussian_profile(&law, 20_000, 5).unwrap();
        let eig = profile_pca_samples(&samples).unwrap();
        let best = reconstruction_error(&eig, 1).unwrap();
        let mean = eig.mean.clone().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for _ in 0..5 {
            let raw: Vec<f64> = (0..3).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut w = DVector::from_vec(crate::hyperplane::center_unchecked(&raw));
            w /= w.norm();
            let mut mse = 0.0;
            for s in &samples {
                let c = DVector::from_iterator(3, s.as_slice().iter().zip(&mean).map(|(a, b)| a - b));
                let r = &c - &w * w.dot(&c);
                mse += r.norm_squared();
            }
            mse /= samples.len() as f64;
            assert!(best <= mse + 1e-12, "pca {best} vs random {mse}");
        }
    }

    #[test]
    fn json_shape() {
        let eig = profile_pca(&scaled_projector(3, 1.0));
        let v: serde_json::Value = serde_json::to_value(&eig).unwrap();
        assert_eq!(v["source"], "model");
        assert_eq!(v["eigenvalues"].as_array().unwrap().len(), 3);
        assert_eq!(v["eigenvectors"][2].as_array().unwrap().len(), 3);
        let back: ProfileEigensystem = serde_json::from_value(v).unwrap();
        assert_eq!(back, eig);
    }

    #[test]
    fn too_few_samples() {
        let s = vec![ProfileVector::zeros(3); 2];
        assert!(profile_pca_samples(&s).is_err());
    }

    fn random_covariance() -> impl Strategy<Value = HyperplaneCovariance> {
        (2usize..7).prop_flat_map(|d| {
            proptest::collection::vec(-2.0..2.0f64, d * d).prop_map(move |v| {
                let b = DMatrix::from_vec(d, d, v);
                let m = apply_projector(&(&b * b.transpose())).unwrap();
                HyperplaneCovariance::new((&m + m.transpose()) * 0.5, &Tolerances::default()).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn eigensystem_invariants(sigma in random_covariance()) {
            let d = sigma.dim();
            let eig = profile_pca(&sigma);
            let scale = 1.0 + max_abs(sigma.matrix());
            prop_assert!(eig.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(eig.eigenvalues.iter().all(|l| *l >= 0.0));
            prop_assert!((eig.eigenvalues.iter().sum::<f64>() - sigma.matrix().trace()).abs() <= 1e-10 * scale);
            for k in 0..d {
                for l in 0..d {
                    let dot = eig.eigenvector(k).dot(&eig.eigenvector(l));
                    prop_assert!((dot - f64::from(u8::from(k == l))).abs() <= 1e-10);
                }
            }
            let full = truncate_to_rank(&eig, d - 1).unwrap();
            prop_assert!(max_abs(&(full.matrix() - sigma.matrix())) <= 1e-10 * scale);
        }

        #[test]
        fn reconstruction_error_decreases_with_rank(sigma in random_covariance()) {
            let eig = profile_pca(&sigma);
            let errs: Vec<f64> = (0..sigma.dim()).map(|p| reconstruction_error(&eig, p).unwrap()).collect();
            prop_assert!(errs.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            prop_assert!((errs[0] - sigma.matrix().trace()).abs() <= 1e-10 * (1.0 + errs[0]));
            prop_assert!(errs[sigma.dim() - 1].abs() <= 1e-10 * (1.0 + errs[0]));
        }
    }
}
