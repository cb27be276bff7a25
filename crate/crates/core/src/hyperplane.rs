//! Linear algebra on the hyperplane orthogonal to the diagonal vector `1`.
//!
//! Profile vectors live in `1⊥ = {v : v·1 = 0}`. The centering projector
//! `P = I - 11ᵀ/d` maps any vector onto that hyperplane; the matrix types in
//! this module are the two ways a Gaussian law on `1⊥` gets parameterized
//! (a variogram, or a covariance with zero row sums).

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::{Error, Result};

/// Default tolerance on the component sum of a profile vector (per component).
pub const DEFAULT_TOL_CENTER: f64 = 1e-12;
/// Default relative tolerance for positive semi-definiteness checks. The
/// absolute tolerance is this value times the max-abs entry of the matrix.
pub const DEFAULT_TOL_PSD_REL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub center: f64,
    pub psd_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            center: DEFAULT_TOL_CENTER,
            psd_rel: DEFAULT_TOL_PSD_REL,
        }
    }
}

impl Tolerances {
    /// Absolute PSD tolerance for a given matrix.
    pub fn psd_for(&self, m: &DMatrix<f64>) -> f64 {
        self.psd_rel * max_abs(m)
    }
}

/// Number of components, at least two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "usize", into = "usize")]
pub struct Dimension(usize);

impl Dimension {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::InvalidInput(format!("dimension must be at least 2, got {d}")));
        }
        Ok(Self(d))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl TryFrom<usize> for Dimension {
    type Error = Error;
    fn try_from(d: usize) -> Result<Self> {
        Self::new(d)
    }
}

impl From<Dimension> for usize {
    fn from(d: Dimension) -> usize {
        d.0
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// A finite vector whose components sum to zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ProfileVector(Vec<f64>);

impl ProfileVector {
    /// Checks the zero-sum invariant with the default tolerance.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        Self::with_tolerance(values, DEFAULT_TOL_CENTER)
    }

    pub fn with_tolerance(values: Vec<f64>, tol_center: f64) -> Result<Self> {
        let d = values.len();
        Dimension::new(d)?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("profile vector has non-finite entries".into()));
        }
        let sum: f64 = values.iter().sum();
        if sum.abs() > d as f64 * tol_center {
            return Err(Error::InvalidInput(format!(
                "profile vector components sum to {sum:e}, exceeding {:e}",
                d as f64 * tol_center
            )));
        }
        Ok(Self(values))
    }

    /// Wraps values already known to lie on the hyperplane.
    pub(crate) fn from_centered(values: Vec<f64>) -> Self {
        debug_assert!(values.len() >= 2);
        Self(values)
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn max(&self) -> f64 {
        max_of(&self.0)
    }
}

impl TryFrom<Vec<f64>> for ProfileVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<ProfileVector> for Vec<f64> {
    fn from(p: ProfileVector) -> Vec<f64> {
        p.0
    }
}

impl AsRef<[f64]> for ProfileVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Reason a matrix fails to be a variogram. Checks run in the order listed.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariogramViolation {
    #[error("matrix is {rows}x{cols}, expected square with d >= 2")]
    Shape { rows: usize, cols: usize },
    #[error("entry ({i}, {j}) is not finite")]
    NonFinite { i: usize, j: usize },
    #[error("not symmetric at ({i}, {j})")]
    Asymmetric { i: usize, j: usize },
    #[error("diagonal entry {i} is {value:e}, expected 0")]
    NonzeroDiagonal { i: usize, value: f64 },
    #[error("entry ({i}, {j}) is negative ({value:e})")]
    NegativeEntry { i: usize, j: usize, value: f64 },
    #[error("not conditionally negative definite: min eigenvalue of -PΓP/2 is {min_eigenvalue:e}")]
    NotConditionallyNegativeDefinite { min_eigenvalue: f64 },
}

/// Outcome of [`is_valid_variogram`].
#[derive(Debug, Clone, PartialEq)]
pub struct VariogramCheck {
    pub violation: Option<VariogramViolation>,
    /// Smallest eigenvalue of `-½PΓP`, when the check got that far.
    pub min_eigenvalue: Option<f64>,
}

impl VariogramCheck {
    pub fn is_valid(&self) -> bool {
        self.violation.is_none()
    }

    pub fn into_result(self) -> Result<()> {
        match self.violation {
            None => Ok(()),
            Some(v) => Err(Error::InvalidVariogram(v)),
        }
    }
}

/// Symmetric, zero-diagonal, nonnegative, conditionally negative definite matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct Variogram(DMatrix<f64>);

impl Variogram {
    pub fn new(m: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        is_valid_variogram(&m, tol).into_result()?;
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_matrix(rows)?, &Tolerances::default())
    }

    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }
}

impl TryFrom<Vec<Vec<f64>>> for Variogram {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<Variogram> for Vec<Vec<f64>> {
    fn from(v: Variogram) -> Self {
        v.to_rows()
    }
}

/// Symmetric PSD matrix with zero row sums: the covariance of a law on `1⊥`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct HyperplaneCovariance(DMatrix<f64>);

impl HyperplaneCovariance {
    pub fn new(m: DMatrix<f64>, tol: &Tolerances) -> Result<Self> {
        check_hyperplane_covariance(&m, tol)?;
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(rows_to_matrix(rows)?, &Tolerances::default())
    }

    pub(crate) fn from_trusted(m: DMatrix<f64>) -> Self {
        Self(m)
    }

    pub fn zeros(d: usize) -> Self {
        Self(DMatrix::zeros(d, d))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        matrix_to_rows(&self.0)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }
}

impl TryFrom<Vec<Vec<f64>>> for HyperplaneCovariance {
    type Error = Error;
    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        Self::from_rows(&rows)
    }
}

impl From<HyperplaneCovariance> for Vec<Vec<f64>> {
    fn from(v: HyperplaneCovariance) -> Self {
        v.to_rows()
    }
}

/// Subtracts the component mean: `x - x̄·1`.
pub fn center(x: &[f64]) -> Result<ProfileVector> {
    Dimension::new(x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("cannot center a vector with non-finite entries".into()));
    }
    Ok(ProfileVector::from_centered(center_unchecked(x)))
}

/// Two-pass centering; the second pass removes most of the rounding left by the first.
pub(crate) fn center_unchecked(x: &[f64]) -> Vec<f64> {
    let d = x.len() as f64;
    let mean = x.iter().sum::<f64>() / d;
    let mut out: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let residual = out.iter().sum::<f64>() / d;
    if residual != 0.0 {
        out.iter_mut().for_each(|v| *v -= residual);
    }
    out
}

/// `P·M·P` with `P = I - 11ᵀ/d`, computed as double centering (rows, then columns).
pub fn apply_projector(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::InvalidInput(format!(
            "projector needs a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("matrix has non-finite entries".into()));
    }
    Ok(double_center(m))
}

pub(crate) fn double_center(m: &DMatrix<f64>) -> DMatrix<f64> {
    let d = m.nrows();
    let mut out = m.clone();
    for i in 0..d {
        let mean = out.row(i).sum() / d as f64;
        out.row_mut(i).add_scalar_mut(-mean);
    }
    for j in 0..d {
        let mean = out.column(j).sum() / d as f64;
        out.column_mut(j).add_scalar_mut(-mean);
    }
    out
}

pub fn is_valid_variogram(g: &DMatrix<f64>, tol: &Tolerances) -> VariogramCheck {
    let fail = |violation| VariogramCheck {
        violation: Some(violation),
        min_eigenvalue: None,
    };
    let (rows, cols) = g.shape();
    if rows != cols || rows < 2 {
        return fail(VariogramViolation::Shape { rows, cols });
    }
    let d = rows;
    for j in 0..d {
        for i in 0..d {
            if !g[(i, j)].is_finite() {
                return fail(VariogramViolation::NonFinite { i, j });
            }
        }
    }
    let abs_tol = tol.psd_for(g);
    for i in 0..d {
        for j in (i + 1)..d {
            if (g[(i, j)] - g[(j, i)]).abs() > abs_tol {
                return fail(VariogramViolation::Asymmetric { i, j });
            }
        }
    }
    for i in 0..d {
        if g[(i, i)].abs() > abs_tol {
            return fail(VariogramViolation::NonzeroDiagonal { i, value: g[(i, i)] });
        }
    }
    for i in 0..d {
        for j in 0..d {
            if g[(i, j)] < 0.0 {
                return fail(VariogramViolation::NegativeEntry { i, j, value: g[(i, j)] });
            }
        }
    }
    let sigma = double_center(g).scale(-0.5);
    let min_eigenvalue = min_symmetric_eigenvalue(&sigma);
    let violation = (min_eigenvalue < -abs_tol)
        .then_some(VariogramViolation::NotConditionallyNegativeDefinite { min_eigenvalue });
    VariogramCheck {
        violation,
        min_eigenvalue: Some(min_eigenvalue),
    }
}

/// Symmetric, zero row sums, PSD, all up to scale-relative tolerance.
pub fn check_hyperplane_covariance(m: &DMatrix<f64>, tol: &Tolerances) -> Result<()> {
    let (rows, cols) = m.shape();
    if rows != cols || rows < 2 {
        return Err(Error::InvalidParameter(format!(
            "covariance must be square with d >= 2, got {rows}x{cols}"
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("covariance has non-finite entries".into()));
    }
    let d = rows;
    let abs_tol = tol.psd_for(m);
    for i in 0..d {
        for j in (i + 1)..d {
            if (m[(i, j)] - m[(j, i)]).abs() > abs_tol {
                return Err(Error::InvalidParameter(format!(
                    "covariance is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    for i in 0..d {
        let row_sum = m.row(i).sum();
        if row_sum.abs() > abs_tol.max(d as f64 * f64::EPSILON * max_abs(m)) {
            return Err(Error::InvalidParameter(format!(
                "covariance row {i} sums to {row_sum:e}; a hyperplane covariance needs Σ1 = 0"
            )));
        }
    }
    let min_eig = min_symmetric_eigenvalue(m);
    if min_eig < -abs_tol {
        return Err(Error::InvalidParameter(format!(
            "covariance is not positive semi-definite (min eigenvalue {min_eig:e})"
        )));
    }
    Ok(())
}

fn min_symmetric_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let sym = symmetrize(m);
    SymmetricEigen::new(sym).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

pub(crate) fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()).scale(0.5)
}

/// Orthonormal basis of `1⊥` as the columns of a `d×(d-1)` matrix (Helmert contrasts).
pub fn hyperplane_basis(d: usize) -> DMatrix<f64> {
    let mut q = DMatrix::zeros(d, d - 1);
    for k in 1..d {
        let norm = ((k * (k + 1)) as f64).sqrt();
        for i in 0..k {
            q[(i, k - 1)] = 1.0 / norm;
        }
        q[(k, k - 1)] = -(k as f64) / norm;
    }
    q
}

/// Eigen-decomposition of a hyperplane covariance restricted to `1⊥`.
///
/// Returns the `d-1` eigenpairs with eigenvectors orthogonal to `1` (up to
/// rounding), sorted by decreasing eigenvalue, with the sign convention of
/// [`canonical_sign`] applied.
pub(crate) fn hyperplane_eigen(sigma: &DMatrix<f64>) -> (Vec<f64>, Vec<DVector<f64>>) {
    let d = sigma.nrows();
    let q = hyperplane_basis(d);
    let reduced = symmetrize(&(q.transpose() * sigma * &q));
    let eig = SymmetricEigen::new(reduced);
    let mut order: Vec<usize> = (0..d - 1).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut values = Vec::with_capacity(d - 1);
    let mut vectors = Vec::with_capacity(d - 1);
    for k in order {
        values.push(eig.eigenvalues[k]);
        let mut v = &q * eig.eigenvectors.column(k);
        canonical_sign(&mut v);
        vectors.push(v);
    }
    (values, vectors)
}

/// Flips `v` so that its first non-negligible coordinate is positive.
pub fn canonical_sign(v: &mut DVector<f64>) {
    let scale = v.amax();
    if let Some(first) = v.iter().copied().find(|x| x.abs() > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
        if first < 0.0 {
            v.neg_mut();
        }
    }
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub(crate) fn max_of(xs: &[f64]) -> f64 {
    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn rows_to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != ncols) {
        return Err(Error::InvalidInput(format!(
            "row {i} has {} entries, expected {ncols}",
            r.len()
        )));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
