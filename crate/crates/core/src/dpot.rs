//! Diagonal peaks-over-threshold: threshold on the component mean of
//! exponential-scale observations, then read off profile vectors.
//!
//! For `X = E·1 + U` the component mean equals `E`, so rows kept above any
//! threshold have profiles distributed exactly as `U`. On real data this
//! holds only in the limit of high thresholds; [`threshold_stability`] shows
//! how far a fit moves with the threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::husler_reiss::{mu_from_sigma, sigma_to_gamma};
use crate::hyperplane::{
    center_unchecked, double_center, hyperplane_eigen, symmetrize, HyperplaneCovariance, ProfileVector,
    Tolerances, Variogram,
};

/// Default quantile of the row mean used as threshold.
pub const DEFAULT_QUANTILE: f64 = 0.95;

/// `n × d` observations stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    data: Vec<f64>,
    n: usize,
    d: usize,
    columns: Vec<String>,
}

impl DataMatrix {
    pub fn from_rows(rows: &[Vec<f64>], columns: Option<Vec<String>>) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != d) {
            return Err(Error::InvalidInput("data rows differ in length".into()));
        }
        let data = rows.iter().flatten().copied().collect();
        Self::from_row_major(data, n, d, columns)
    }

    pub fn from_row_major(data: Vec<f64>, n: usize, d: usize, columns: Option<Vec<String>>) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput(format!("data needs at least two columns, got {d}")));
        }
        if n == 0 {
            return Err(Error::InvalidInput("data has no rows".into()));
        }
        if data.len() != n * d {
            return Err(Error::DimensionMismatch {
                expected: n * d,
                found: data.len(),
            });
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite value in row {}, column {}",
                i / d,
                i % d
            )));
        }
        let columns = columns.unwrap_or_else(|| (1..=d).map(|k| format!("x{k}")).collect());
        if columns.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: columns.len(),
            });
        }
        Ok(Self { data, n, d, columns })
    }

    pub fn nrows(&self) -> usize {
        self.n
    }

    pub fn ncols(&self) -> usize {
        self.d
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn column(&self, k: usize) -> Vec<f64> {
        self.rows().map(|r| r[k]).collect()
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }
}

/// Empirical rank transform to unit-exponential margins,
/// `x_ik = -ln(1 - rank_ik / (n + 1))`, with average ranks for ties.
pub fn standardize_margins(data: &DataMatrix) -> Result<DataMatrix> {
    let (n, d) = (data.n, data.d);
    if n < 2 {
        return Err(Error::InvalidInput("standardizing margins needs at least two rows".into()));
    }
    let mut out = vec![0.0; n * d];
    for k in 0..d {
        let col = data.column(k);
        let ranks = average_ranks(&col);
        if ranks.iter().all(|r| *r == ranks[0]) {
            return Err(Error::DegenerateMargin { column: k });
        }
        for (i, r) in ranks.into_iter().enumerate() {
            out[i * d + k] = -(-r / (n as f64 + 1.0)).ln_1p();
        }
    }
    DataMatrix::from_row_major(out, n, d, Some(data.columns.clone()))
}

/// 1-based ranks; tied values share the mean of their positions.
fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && x[idx[end]] == x[idx[start]] {
            end += 1;
        }
        let avg = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Rows whose component mean reaches the threshold, shifted and centered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExceedanceSet {
    /// Threshold on the exponential scale.
    pub r: f64,
    pub quantile: f64,
    /// Kept rows minus `r·1`; each has nonnegative mean.
    pub exceedances: Vec<Vec<f64>>,
    /// Centered kept rows.
    pub profiles: Vec<ProfileVector>,
}

impl ExceedanceSet {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.profiles.first().map_or(0, ProfileVector::dim)
    }
}

/// Thresholds the row means at their empirical `q`-quantile (linear
/// interpolation between order statistics) and keeps rows at or above it.
pub fn extract_exceedances(data_exp: &DataMatrix, q: f64) -> Result<ExceedanceSet> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::InvalidInput(format!("quantile must lie in (0, 1), got {q}")));
    }
    let d = data_exp.d as f64;
    let means: Vec<f64> = data_exp.rows().map(|r| r.iter().sum::<f64>() / d).collect();
    let r = quantile(&means, q);
    let mut exceedances = Vec::new();
    let mut profiles = Vec::new();
    for (row, &m) in data_exp.rows().zip(&means) {
        if m >= r {
            exceedances.push(row.iter().map(|v| v - r).collect());
            profiles.push(ProfileVector::from_centered(center_unchecked(row)));
        }
    }
    if profiles.is_empty() {
        return Err(Error::TooFewExceedances {
            count: 0,
            required: 1,
        });
    }
    Ok(ExceedanceSet {
        r,
        quantile: q,
        exceedances,
        profiles,
    })
}

fn quantile(x: &[f64], q: f64) -> f64 {
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Method-of-moments Husler-Reiss fit on exceedance profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HrFit {
    pub r: f64,
    pub quantile: f64,
    pub k: usize,
    pub gamma_hat: Variogram,
    pub sigma_hat: HyperplaneCovariance,
    pub mu_hat: ProfileVector,
    /// `max |μ̂ - μ(Σ̂)|`; reported for non-extended fits as a model check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eq8_discrepancy: Option<f64>,
    pub extended: bool,
    pub rank: usize,
    /// Negative eigenvalues of the projected sample covariance set to zero.
    pub clamped_eigenvalues: Vec<f64>,
    pub warnings: Vec<String>,
}

pub fn fit_hr(exc: &ExceedanceSet, extended: bool) -> Result<HrFit> {
    fit_hr_with(exc, extended, &Tolerances::default())
}

pub fn fit_hr_with(exc: &ExceedanceSet, extended: bool, tol: &Tolerances) -> Result<HrFit> {
    let k = exc.len();
    let d = exc.dim();
    if k <= d {
        return Err(Error::TooFewExceedances { count: k, required: d + 1 });
    }
    let mut mean = vec![0.0; d];
    for u in &exc.profiles {
        for (m, v) in mean.iter_mut().zip(u.as_slice()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= k as f64);

    let mut cov = nalgebra::DMatrix::<f64>::zeros(d, d);
    for u in &exc.profiles {
        let c = nalgebra::DVector::from_iterator(d, u.as_slice().iter().zip(&mean).map(|(a, b)| a - b));
        cov.syger(1.0, &c, &c, 1.0);
    }
    // syger fills the lower triangle only
    cov.fill_upper_triangle_with_lower_triangle();
    cov /= (k - 1) as f64;
    let mut sigma = symmetrize(&double_center(&cov));

    let mut warnings = Vec::new();
    let cutoff = tol.psd_for(&sigma);
    let (values, vectors) = hyperplane_eigen(&sigma);
    let clamped: Vec<f64> = values.iter().copied().filter(|l| *l < 0.0).collect();
    if let Some(worst) = clamped.iter().copied().reduce(f64::min) {
        if worst < -cutoff {
            let msg = format!("sample covariance had eigenvalue {worst:e} on the hyperplane; clamped to zero");
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let mut rebuilt = nalgebra::DMatrix::zeros(d, d);
        for (l, v) in values.iter().zip(&vectors) {
            if *l > 0.0 {
                rebuilt += v * v.transpose() * *l;
            }
        }
        sigma = symmetrize(&double_center(&rebuilt));
    }
    let rank = values.iter().filter(|l| **l > cutoff).count();
    if rank < d - 1 {
        let msg = format!("fitted covariance has rank {rank} < d - 1 = {}", d - 1);
        log::warn!("{msg}");
        warnings.push(msg);
    }

    let sigma_hat = HyperplaneCovariance::from_trusted(sigma);
    let gamma_hat = sigma_to_gamma(&sigma_hat);
    let mu_hat = ProfileVector::from_centered(center_unchecked(&mean));
    let eq8_discrepancy = (!extended).then(|| {
        let linked = mu_from_sigma(&sigma_hat);
        mu_hat
            .as_slice()
            .iter()
            .zip(linked.as_slice())
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()))
    });
    Ok(HrFit {
        r: exc.r,
        quantile: exc.quantile,
        k,
        gamma_hat,
        sigma_hat,
        mu_hat,
        eq8_discrepancy,
        extended,
        rank,
        clamped_eigenvalues: clamped,
        warnings,
    })
}

/// One row of a threshold stability table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub q: f64,
    pub r: Option<f64>,
    pub k: Option<usize>,
    pub gamma_hat: Option<Variogram>,
    pub error: Option<String>,
}

/// Fits at each quantile; per-quantile failures are recorded in the row.
pub fn threshold_stability(data_exp: &DataMatrix, q_list: &[f64]) -> Vec<StabilityRow> {
    let mut qs = q_list.to_vec();
    qs.sort_by(f64::total_cmp);
    qs.into_iter()
        .map(|q| match extract_exceedances(data_exp, q).and_then(|e| fit_hr(&e, false)) {
            Ok(fit) => StabilityRow {
                q,
                r: Some(fit.r),
                k: Some(fit.k),
                gamma_hat: Some(fit.gamma_hat),
                error: None,
            },
            Err(e) => StabilityRow {
                q,
                r: None,
                k: None,
                gamma_hat: None,
                error: Some(e.to_string()),
            },
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hyperplane::max_abs;
    use proptest::prelude::*;

    fn dm(rows: &[&[f64]]) -> DataMatrix {
        DataMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(), None).unwrap()
    }

    #[test]
    fn rank_transform_example() {
        let data = dm(&[&[5.0, 0.0], &[1.0, 1.0], &[9.0, 2.0]]);
        let x = standardize_margins(&data).unwrap();
        let expected = [-(0.5f64).ln(), -(0.75f64).ln(), -(0.25f64).ln()];
        for (a, b) in x.column(0).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn rank_transform_is_invariant_to_monotone_maps() {
        let data = dm(&[&[5.0, 0.3], &[1.0, 1.0], &[9.0, 2.0], &[2.0, -4.0]]);
        let mapped = dm(&[&[5f64.exp(), 0.3f64.powi(3)], &[1f64.exp(), 1.0], &[9f64.exp(), 8.0], &[2f64.exp(), -64.0]]);
        assert_eq!(standardize_margins(&data).unwrap(), standardize_margins(&mapped).unwrap());
    }

    #[test]
    fn ties_get_average_ranks() {
        assert_eq!(average_ranks(&[2.0, 1.0, 2.0, 3.0]), vec![2.5, 1.0, 2.5, 4.0]);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let data = dm(&[&[1.0, 0.0], &[1.0, 1.0], &[1.0, 2.0]]);
        assert!(matches!(standardize_margins(&data), Err(Error::DegenerateMargin { column: 0 })));
    }

    #[test]
    fn exceedance_example() {
        let exc = extract_exceedances(&dm(&[&[3.0, 3.0], &[1.0, 1.0]]), 0.5).unwrap();
        assert_eq!(exc.r, 2.0);
        assert_eq!(exc.exceedances, vec![vec![1.0, 1.0]]);
        assert_eq!(exc.profiles[0].as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn equal_rows_give_zero_profiles_and_zero_fit() {
        let rows: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 * 0.1; 3]).collect();
        let data = DataMatrix::from_rows(&rows, None).unwrap();
        let exc = extract_exceedances(&data, 0.5).unwrap();
        assert!(exc.profiles.iter().all(|p| p.as_slice() == [0.0; 3]));
        let fit = fit_hr(&exc, false).unwrap();
        assert!(fit.gamma_hat.matrix().iter().all(|v| *v == 0.0));
        assert!(fit.mu_hat.as_slice().iter().all(|v| *v == 0.0));
        assert_eq!(fit.rank, 0);
        assert!(!fit.warnings.is_empty());
    }

    #[test]
    fn exceedances_have_nonnegative_mean() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![(i % 17) as f64, (i % 5) as f64 * 1.3]).collect();
        let data = DataMatrix::from_rows(&rows, None).unwrap();
        let exc = extract_exceedances(&data, 0.8).unwrap();
        for e in &exc.exceedances {
            assert!(e.iter().sum::<f64>() >= 0.0);
        }
    }

    #[test]
    fn too_few_exceedances_for_fit() {
        let data = dm(&[&[0.1, 0.3], &[1.0, 0.5], &[2.0, 2.4]]);
        let exc = extract_exceedances(&data, 0.99).unwrap();
        assert_eq!(exc.len(), 1);
        assert!(matches!(fit_hr(&exc, false), Err(Error::TooFewExceedances { count: 1, required: 3 })));
        assert!(extract_exceedances(&data, 1.0).is_err());
    }

    #[test]
    fn stability_table_edge_cases() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![(i * 7 % 13) as f64, (i * 3 % 11) as f64]).collect();
        let data = DataMatrix::from_rows(&rows, None).unwrap();
        assert!(threshold_stability(&data, &[]).is_empty());
        let one = threshold_stability(&data, &[0.5]);
        assert_eq!(one.len(), 1);
        assert!(one[0].error.is_none());
        let table = threshold_stability(&data, &[0.9, 0.5, 0.999]);
        assert_eq!(table.iter().map(|r| r.q).collect::<Vec<_>>(), vec![0.5, 0.9, 0.999]);
        assert!(table[2].error.is_some());
    }

    fn random_data() -> impl Strategy<Value = DataMatrix> {
        (2usize..5, 12usize..40).prop_flat_map(|(d, n)| {
            proptest::collection::vec(-5.0..5.0f64, n * d)
                .prop_map(move |v| DataMatrix::from_row_major(v, n, d, None).unwrap())
        })
    }

    proptest! {
        #[test]
        fn fit_is_invariant_to_common_shift(data in random_data(), c in -50.0..50.0f64) {
            let shifted = DataMatrix::from_row_major(
                data.to_rows().into_iter().flatten().map(|v| v + c).collect(),
                data.nrows(),
                data.ncols(),
                None,
            )
            .unwrap();
            let a = extract_exceedances(&data, 0.5).unwrap();
            let b = extract_exceedances(&shifted, 0.5).unwrap();
            prop_assume!(a.len() == b.len() && a.len() > data.ncols());
            let fa = fit_hr(&a, false).unwrap();
            let fb = fit_hr(&b, false).unwrap();
            prop_assert!((fa.r + c - fb.r).abs() <= 1e-9);
            prop_assert!(max_abs(&(fa.gamma_hat.matrix() - fb.gamma_hat.matrix())) <= 1e-8);
        }

        #[test]
        fn fitted_matrices_are_well_formed(data in random_data()) {
            let exc = extract_exceedances(&data, 0.3).unwrap();
            prop_assume!(exc.len() > data.ncols());
            let fit = fit_hr(&exc, false).unwrap();
            let g = fit.gamma_hat.matrix();
            let s = fit.sigma_hat.matrix();
            for i in 0..g.nrows() {
                prop_assert_eq!(g[(i, i)], 0.0);
                prop_assert!(s.row(i).sum().abs() <= 1e-10);
                for j in 0..g.ncols() {
                    prop_assert_eq!(g[(i, j)], g[(j, i)]);
                }
            }
            prop_assert!(s.clone().symmetric_eigenvalues().iter().all(|l| *l >= -1e-10));
            prop_assert!(fit.mu_hat.as_slice().iter().sum::<f64>().abs() <= 1e-10);
        }

        #[test]
        fn standardized_margins_are_unit_exponential_scores(data in random_data()) {
            let z = standardize_margins(&data).unwrap();
            let n = data.nrows() as f64;
            for k in 0..data.ncols() {
                let col = z.column(k);
                prop_assert!(col.iter().all(|v| *v > 0.0 && *v <= (n + 1.0).ln() + 1e-12));
            }
        }
    }
}
