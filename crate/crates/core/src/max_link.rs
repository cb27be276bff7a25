//! Transforms between the laws of `max(T)` and `max(U)`.
//!
//! ```text
//! F_U(s) = [∫₀ˢ F_T(t) e^{-t} dt + e^{-s} F_T(s)] / E[e^{-max T}]
//! F_T(s) = [e^{s} F_U(s) - ∫₀ˢ F_U(t) e^{t} dt] / E[e^{max U}]
//! f_U(s) = f_T(s) e^{-s} / E[e^{-max T}],   f_T(s) = f_U(s) e^{s} / E[e^{max U}]
//! ```
//!
//! Both CDF transforms are evaluated in survival form (`G = 1 - F`), which
//! keeps relative accuracy in the far tail where `e^{s}` amplifies any
//! absolute error. Integrals are composite trapezoid rules on the input grid
//! plus a tail term past the last grid point that assumes the survival
//! function keeps the exponential decay rate of the last interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_TAIL_MASS_TOL: f64 = 1e-8;
pub const DEFAULT_GRID_STEP: f64 = 1e-3;
pub const DEFAULT_TOL_NORM: f64 = 1e-3;
pub const DEFAULT_TOL_IDENTITY: f64 = 1e-3;
/// Largest isotonic correction tolerated before the grid is declared too coarse.
pub const MAX_CLEANUP: f64 = 1e-6;
/// Smallest admissible `E[e^{-max T}]`.
pub const NORMALIZER_FLOOR: f64 = 1e-12;
/// Share of `E[e^{max U}]` carried by the last grid interval above which a warning is issued.
/// Decay rates within this margin of the divergence boundary count as divergent.
pub const TAIL_RATE_MARGIN: f64 = 1e-3;
pub const LAST_INTERVAL_WARN: f64 = 0.01;

const MONOTONE_TOL: f64 = 1e-12;

/// Distribution function of a nonnegative variable tabulated on `0 = s₀ < … < s_m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedCdf {
    grid: Vec<f64>,
    values: Vec<f64>,
    tail_mass_tol: f64,
}

impl TabulatedCdf {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, tail_mass_tol: f64) -> Result<Self> {
        check_grid(&grid, values.len())?;
        for (j, v) in values.iter().enumerate() {
            if !(v.is_finite() && (-MONOTONE_TOL..=1.0 + MONOTONE_TOL).contains(v)) {
                return Err(Error::InvalidInput(format!("CDF value {v} at index {j} is outside [0, 1]")));
            }
        }
        if let Some(j) = values.windows(2).position(|w| w[1] < w[0] - MONOTONE_TOL) {
            return Err(Error::InvalidInput(format!("CDF decreases between grid points {j} and {}", j + 1)));
        }
        let tail = 1.0 - values[values.len() - 1];
        if tail > tail_mass_tol {
            return Err(Error::InvalidInput(format!(
                "CDF leaves mass {tail:e} beyond the grid (tolerance {tail_mass_tol:e}); extend the grid"
            )));
        }
        let values = values.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self {
            grid,
            values,
            tail_mass_tol,
        })
    }

    /// Tabulates `f` on the uniform grid `0, h, 2h, …` up to `s_max`.
    pub fn from_fn(step: f64, s_max: f64, tail_mass_tol: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = uniform_grid(step, s_max)?;
        let values = grid.iter().map(|&s| f(s)).collect();
        Self::new(grid, values, tail_mass_tol)
    }

    /// Empirical distribution function of nonnegative draws on a uniform grid
    /// reaching one step past the largest draw.
    pub fn empirical(samples: &[f64], step: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidInput("empirical CDF needs at least one draw".into()));
        }
        if samples.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::InvalidInput("empirical CDF draws must be finite and nonnegative".into()));
        }
        let mut sorted = samples.to_vec();
        sorted.sort_by(f64::total_cmp);
        let s_max = (sorted[sorted.len() - 1] / step).ceil() * step + step;
        let grid = uniform_grid(step, s_max)?;
        let n = sorted.len() as f64;
        let mut idx = 0;
        let values = grid
            .iter()
            .map(|&s| {
                while idx < sorted.len() && sorted[idx] <= s {
                    idx += 1;
                }
                idx as f64 / n
            })
            .collect();
        Self::new(grid, values, DEFAULT_TAIL_MASS_TOL)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tail_mass_tol(&self) -> f64 {
        self.tail_mass_tol
    }

    /// Common spacing if the grid is uniform (to 1e-9 relative).
    pub fn grid_step(&self) -> Option<f64> {
        uniform_step(&self.grid)
    }

    /// Linear interpolation; 0 below the grid, the last value above it.
    pub fn eval(&self, s: f64) -> f64 {
        interpolate(&self.grid, &self.values, s)
    }

    fn survival(&self) -> Vec<f64> {
        self.values.iter().map(|v| 1.0 - v).collect()
    }
}

/// Density of a nonnegative variable tabulated on a grid starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabulatedDensity {
    grid: Vec<f64>,
    values: Vec<f64>,
}

impl TabulatedDensity {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, tol_norm: f64) -> Result<Self> {
        check_grid(&grid, values.len())?;
        if let Some(j) = values.iter().position(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "density value {} at index {j} is negative or non-finite",
                values[j]
            )));
        }
        let mass = trapezoid(&grid, &values);
        if (mass - 1.0).abs() > tol_norm {
            return Err(Error::InvalidInput(format!(
                "density integrates to {mass} on the grid (tolerance {tol_norm:e})"
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(step: f64, s_max: f64, tol_norm: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        let grid = uniform_grid(step, s_max)?;
        let values = grid.iter().map(|&s| f(s)).collect();
        Self::new(grid, values, tol_norm)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.values)
    }

    /// Cumulative trapezoid integral, as a CDF on the same grid.
    pub fn to_cdf(&self, tail_mass_tol: f64) -> Result<TabulatedCdf> {
        let mut acc = 0.0;
        let mut values = Vec::with_capacity(self.grid.len());
        values.push(0.0);
        for j in 1..self.grid.len() {
            acc += 0.5 * (self.grid[j] - self.grid[j - 1]) * (self.values[j] + self.values[j - 1]);
            values.push(acc.min(1.0));
        }
        let total = acc.max(f64::MIN_POSITIVE);
        let values = values.into_iter().map(|v| (v / total).min(1.0)).collect();
        TabulatedCdf::new(self.grid.clone(), values, tail_mass_tol)
    }
}

/// Output of a CDF transform with its quadrature diagnostics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CdfLink {
    pub cdf: TabulatedCdf,
    /// `E[e^{-max T}]` for the T→U direction, `E[e^{max U}]` for U→T.
    pub normalizer: f64,
    /// Largest change made by the isotonic/range cleanup of the output.
    pub cleanup: f64,
    /// Estimated contribution of the region past the grid to the normalizer.
    pub tail_remainder: f64,
    pub warnings: Vec<String>,
}

/// `F_T ↦ F_U`.
pub fn max_u_cdf_from_max_t(f_t: &TabulatedCdf) -> Result<CdfLink> {
    let grid = &f_t.grid;
    let g_t = f_t.survival();
    let weighted: Vec<f64> = grid.iter().zip(&g_t).map(|(s, g)| g * (-s).exp()).collect();
    let tail = decay_tail(grid, &g_t, -1.0).unwrap_or(0.0);
    let upper = reverse_cumulative_trapezoid(grid, &weighted, tail);
    let normalizer = 1.0 - upper[0];
    if normalizer.is_nan() || normalizer <= NORMALIZER_FLOOR {
        return Err(Error::DegenerateLaw(format!(
            "E[exp(-max T)] = {normalizer:e} is below the floor {NORMALIZER_FLOOR:e}"
        )));
    }
    let raw: Vec<f64> = weighted
        .iter()
        .zip(&upper)
        .map(|(w, j)| 1.0 - (w - j) / normalizer)
        .collect();
    let (values, cleanup) = cleanup_cdf(raw)?;
    Ok(CdfLink {
        cdf: TabulatedCdf {
            grid: grid.clone(),
            values,
            tail_mass_tol: f_t.tail_mass_tol,
        },
        normalizer,
        cleanup,
        tail_remainder: tail,
        warnings: Vec::new(),
    })
}

/// `F_U ↦ F_T`.
pub fn max_t_cdf_from_max_u(f_u: &TabulatedCdf) -> Result<CdfLink> {
    let grid = &f_u.grid;
    let g_u = f_u.survival();
    let moment = exp_max_moment_from_survival(grid, &g_u);
    if moment.divergent {
        return Err(Error::DegenerateLaw(
            "E[exp(max U)] does not converge: the tail of max(U) decays no faster than e^{-s}".into(),
        ));
    }
    let mut warnings = Vec::new();
    if moment.last_interval_share > LAST_INTERVAL_WARN {
        let msg = format!(
            "last grid interval carries {:.2}% of E[exp(max U)]; extend the grid",
            100.0 * moment.last_interval_share
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let raw: Vec<f64> = grid
        .iter()
        .zip(&g_u)
        .zip(&moment.upper)
        .map(|((s, g), k)| 1.0 - (k + s.exp() * g) / moment.value)
        .collect();
    let (values, cleanup) = cleanup_cdf(raw)?;
    Ok(CdfLink {
        cdf: TabulatedCdf {
            grid: grid.clone(),
            values,
            tail_mass_tol: f_u.tail_mass_tol,
        },
        normalizer: moment.value,
        cleanup,
        tail_remainder: moment.tail_remainder,
        warnings,
    })
}

/// `E[e^{-max T}] = 1 - ∫₀^∞ G_T(t) e^{-t} dt`.
pub fn exp_neg_max_moment(f_t: &TabulatedCdf) -> f64 {
    let g = f_t.survival();
    let weighted: Vec<f64> = f_t.grid.iter().zip(&g).map(|(s, g)| g * (-s).exp()).collect();
    let tail = decay_tail(&f_t.grid, &g, -1.0).unwrap_or(0.0);
    1.0 - reverse_cumulative_trapezoid(&f_t.grid, &weighted, tail)[0]
}

/// `E[e^{max U}] = 1 + ∫₀^∞ G_U(t) e^{t} dt`, with convergence diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpMoment {
    pub value: f64,
    pub last_interval_share: f64,
    pub tail_remainder: f64,
    pub divergent: bool,
}

pub fn exp_max_moment(f_u: &TabulatedCdf) -> ExpMoment {
    let m = exp_max_moment_from_survival(&f_u.grid, &f_u.survival());
    ExpMoment {
        value: m.value,
        last_interval_share: m.last_interval_share,
        tail_remainder: m.tail_remainder,
        divergent: m.divergent,
    }
}

struct MomentTable {
    value: f64,
    upper: Vec<f64>,
    last_interval_share: f64,
    tail_remainder: f64,
    divergent: bool,
}

fn exp_max_moment_from_survival(grid: &[f64], g_u: &[f64]) -> MomentTable {
    let weighted: Vec<f64> = grid.iter().zip(g_u).map(|(s, g)| g * s.exp()).collect();
    let tail = decay_tail(grid, g_u, 1.0);
    let divergent = tail.is_none();
    let tail_remainder = tail.unwrap_or(f64::INFINITY);
    let upper = reverse_cumulative_trapezoid(grid, &weighted, if divergent { 0.0 } else { tail_remainder });
    let m = grid.len() - 1;
    let last = 0.5 * (grid[m] - grid[m - 1]) * (weighted[m] + weighted[m - 1]) + tail.unwrap_or(0.0);
    let value = 1.0 + upper[0];
    let last_interval_share = if upper[0] > 0.0 { last / upper[0] } else { 0.0 };
    MomentTable {
        value: if divergent { f64::INFINITY } else { value },
        upper,
        last_interval_share,
        tail_remainder,
        divergent,
    }
}

/// Report of `E[e^{-max T}] · E[e^{max U}] = 1` for a tabulated pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentIdentityReport {
    pub e_minus_max_t: f64,
    pub e_plus_max_u: f64,
    pub product: f64,
    /// The partial sums for `E[e^{max U}]` do not converge on this grid.
    pub divergent: bool,
    pub pass: bool,
}

pub fn check_moment_identity(f_t: &TabulatedCdf, f_u: &TabulatedCdf, tol: f64) -> MomentIdentityReport {
    let e_minus_max_t = exp_neg_max_moment(f_t);
    let plus = exp_max_moment(f_u);
    // a tail still carrying >1% of the moment at the grid edge counts as unresolved
    let divergent = plus.divergent || plus.last_interval_share > LAST_INTERVAL_WARN;
    let product = e_minus_max_t * plus.value;
    MomentIdentityReport {
        e_minus_max_t,
        e_plus_max_u: plus.value,
        product,
        divergent,
        pass: !divergent && (product - 1.0).abs() <= tol,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkDirection {
    /// Density of `max(T)` to density of `max(U)`.
    TToU,
    /// Density of `max(U)` to density of `max(T)`.
    UToT,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityLink {
    pub density: TabulatedDensity,
    pub normalizer: f64,
}

/// `f_U = f_T e^{-s} / E[e^{-max T}]` or `f_T = f_U e^{s} / E[e^{max U}]`,
/// with the normalizers computed by trapezoid on the input grid.
pub fn density_transform(f_in: &TabulatedDensity, direction: LinkDirection, tol_norm: f64) -> Result<DensityLink> {
    let sign = match direction {
        LinkDirection::TToU => -1.0,
        LinkDirection::UToT => 1.0,
    };
    let tilted: Vec<f64> = f_in
        .grid
        .iter()
        .zip(&f_in.values)
        .map(|(s, f)| f * (sign * s).exp())
        .collect();
    let normalizer = trapezoid(&f_in.grid, &tilted);
    if !(normalizer.is_finite() && normalizer > NORMALIZER_FLOOR) {
        return Err(Error::DegenerateLaw(format!("density normalizer {normalizer:e} is unusable")));
    }
    if direction == LinkDirection::UToT {
        let m = f_in.grid.len() - 1;
        let last = 0.5 * (f_in.grid[m] - f_in.grid[m - 1]) * (tilted[m] + tilted[m - 1]);
        if last / normalizer > LAST_INTERVAL_WARN {
            return Err(Error::DegenerateLaw(format!(
                "last grid interval carries {:.2}% of E[exp(max U)]; the moment is not resolved",
                100.0 * last / normalizer
            )));
        }
    }
    let values = tilted.into_iter().map(|v| v / normalizer).collect();
    let density = TabulatedDensity::new(f_in.grid.clone(), values, tol_norm)?;
    Ok(DensityLink { density, normalizer })
}

/// Pool-adjacent-violators fit of a nondecreasing sequence (unit weights).
pub fn isotonic_nondecreasing(values: &[f64]) -> Vec<f64> {
    // blocks of (sum, count)
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s2, c2) = blocks[blocks.len() - 1];
            let (s1, c1) = blocks[blocks.len() - 2];
            if s1 / c1 as f64 <= s2 / c2 as f64 {
                break;
            }
            blocks.pop();
            let last = blocks.len() - 1;
            blocks[last] = (s1 + s2, c1 + c2);
        }
    }
    blocks
        .into_iter()
        .flat_map(|(s, c)| std::iter::repeat_n(s / c as f64, c))
        .collect()
}

fn cleanup_cdf(raw: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    if raw.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("CDF transform produced non-finite values".into()));
    }
    let fitted: Vec<f64> = isotonic_nondecreasing(&raw).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    let cleanup = raw
        .iter()
        .zip(&fitted)
        .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
    if cleanup > MAX_CLEANUP {
        return Err(Error::GridResolution {
            cleanup,
            limit: MAX_CLEANUP,
        });
    }
    Ok((fitted, cleanup))
}

/// `∫_{s_j}^{∞}` of a tabulated integrand for every grid point, given the
/// integral past the last point.
fn reverse_cumulative_trapezoid(grid: &[f64], y: &[f64], tail: f64) -> Vec<f64> {
    let m = grid.len();
    let mut out = vec![0.0; m];
    out[m - 1] = tail;
    for j in (0..m - 1).rev() {
        out[j] = out[j + 1] + 0.5 * (grid[j + 1] - grid[j]) * (y[j] + y[j + 1]);
    }
    out
}

/// `∫_{s_m}^{∞} G(t) e^{a t} dt` assuming `G` decays past `s_m` at the rate
/// `κ` of the last interval. `None` when that integral diverges, taken as
/// `κ ≤ a + TAIL_RATE_MARGIN` to absorb rounding in the estimated rate.
fn decay_tail(grid: &[f64], survival: &[f64], a: f64) -> Option<f64> {
    let m = grid.len() - 1;
    let (g_prev, g_last) = (survival[m - 1], survival[m]);
    if g_last <= 0.0 {
        return Some(0.0);
    }
    let kappa = if g_prev > g_last {
        (g_prev / g_last).ln() / (grid[m] - grid[m - 1])
    } else {
        0.0
    };
    if kappa - a <= TAIL_RATE_MARGIN {
        return None;
    }
    Some(g_last * (a * grid[m]).exp() / (kappa - a))
}

pub(crate) fn trapezoid(grid: &[f64], y: &[f64]) -> f64 {
    grid.windows(2)
        .zip(y.windows(2))
        .map(|(s, v)| 0.5 * (s[1] - s[0]) * (v[0] + v[1]))
        .sum()
}

fn check_grid(grid: &[f64], n_values: usize) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::InvalidInput("a tabulated law needs at least two grid points".into()));
    }
    if grid.len() != n_values {
        return Err(Error::DimensionMismatch {
            expected: grid.len(),
            found: n_values,
        });
    }
    if grid[0] != 0.0 {
        return Err(Error::InvalidInput(format!("grid must start at 0, starts at {}", grid[0])));
    }
    if grid.iter().any(|s| !s.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("grid must be finite and strictly increasing".into()));
    }
    Ok(())
}

pub fn uniform_grid(step: f64, s_max: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite() && s_max > 0.0 && s_max.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "grid step {step} and upper end {s_max} must be positive and finite"
        )));
    }
    let m = (s_max / step).round() as usize;
    if m < 1 {
        return Err(Error::InvalidInput("grid has fewer than two points".into()));
    }
    Ok((0..=m).map(|j| j as f64 * step).collect())
}

fn uniform_step(grid: &[f64]) -> Option<f64> {
    let h = grid[1] - grid[0];
    grid.windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1.0))
        .then_some(h)
}

fn interpolate(grid: &[f64], values: &[f64], s: f64) -> f64 {
    if s < grid[0] {
        return 0.0;
    }
    let m = grid.len() - 1;
    if s >= grid[m] {
        return values[m];
    }
    let j = grid.partition_point(|g| *g <= s) - 1;
    let w = (s - grid[j]) / (grid[j + 1] - grid[j]);
    values[j] + w * (values[j + 1] - values[j])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_cdf(rate: f64) -> TabulatedCdf {
        TabulatedCdf::from_fn(1e-3, 20.0, DEFAULT_TAIL_MASS_TOL, |s| -(-rate * s).exp_m1()).unwrap()
    }

    fn sup_err(c: &TabulatedCdf, f: impl Fn(f64) -> f64) -> f64 {
        c.grid().iter().zip(c.values()).fold(0.0, |acc, (s, v)| acc.max((v - f(*s)).abs()))
    }

    #[test]
    fn point_mass_at_zero_is_fixed() {
        let one = TabulatedCdf::from_fn(0.01, 5.0, DEFAULT_TAIL_MASS_TOL, |_| 1.0).unwrap();
        let u = max_u_cdf_from_max_t(&one).unwrap();
        assert!((u.normalizer - 1.0).abs() < 1e-15);
        assert!(u.cdf.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
        let t = max_t_cdf_from_max_u(&one).unwrap();
        assert!(t.cdf.values().iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn point_mass_at_m_is_fixed() {
        // step at m = 1.5: max(U) ≡ m as well
        let h = 1e-3;
        let m = 1.5;
        let f_t = TabulatedCdf::from_fn(h, 10.0, DEFAULT_TAIL_MASS_TOL, |s| if s >= m - 1e-12 { 1.0 } else { 0.0 })
            .unwrap();
        let u = max_u_cdf_from_max_t(&f_t).unwrap();
        let err = sup_err(&u.cdf, |s| if s >= m - 1e-12 { 1.0 } else { 0.0 });
        assert!(err < 1e-6, "sup error {err}");
        // normalizer e^{-m} up to the half-interval at the jump
        assert!((u.normalizer - (-m).exp()).abs() < h * (-m).exp());
    }

    #[test]
    fn exp1_maps_to_exp2_and_back() {
        let f_t = exp_cdf(1.0);
        let u = max_u_cdf_from_max_t(&f_t).unwrap();
        assert!(sup_err(&u.cdf, |s| -(-2.0 * s).exp_m1()) < 1e-6);
        assert!((u.normalizer - 0.5).abs() < 1e-6);
        assert!(u.cleanup < MAX_CLEANUP);

        let f_u = exp_cdf(2.0);
        let t = max_t_cdf_from_max_u(&f_u).unwrap();
        assert!(sup_err(&t.cdf, |s| -(-s).exp_m1()) < 1e-6);
        assert!((t.normalizer - 2.0).abs() < 1e-6);

        let back = max_t_cdf_from_max_u(&u.cdf).unwrap();
        assert!(sup_err(&back.cdf, |s| -(-s).exp_m1()) < 1e-4);
    }

    #[test]
    fn outputs_are_monotone() {
        let f = TabulatedCdf::from_fn(1e-3, 40.0, DEFAULT_TAIL_MASS_TOL, |s| -(-0.7 * s).exp_m1()).unwrap();
        let u = max_u_cdf_from_max_t(&f).unwrap();
        assert!(u.cdf.values().windows(2).all(|w| w[1] >= w[0] - 1e-12));
    }

    #[test]
    fn degenerate_normalizer_is_rejected() {
        // all mass far out: E[e^{-max T}] ≈ e^{-40}
        let f_t = TabulatedCdf::from_fn(0.5, 50.0, DEFAULT_TAIL_MASS_TOL, |s| if s >= 40.0 { 1.0 } else { 0.0 })
            .unwrap();
        assert!(matches!(max_u_cdf_from_max_t(&f_t), Err(Error::DegenerateLaw(_))));
    }

    #[test]
    fn moment_identity_examples() {
        let r = check_moment_identity(&exp_cdf(1.0), &exp_cdf(2.0), DEFAULT_TOL_IDENTITY);
        assert!(r.pass, "{r:?}");
        assert!((r.e_minus_max_t - 0.5).abs() < 1e-6 && (r.e_plus_max_u - 2.0).abs() < 1e-6);

        let one = TabulatedCdf::from_fn(0.01, 5.0, DEFAULT_TAIL_MASS_TOL, |_| 1.0).unwrap();
        let r = check_moment_identity(&one, &one, DEFAULT_TOL_IDENTITY);
        assert!(r.pass && (r.product - 1.0).abs() < 1e-15);

        let r = check_moment_identity(&exp_cdf(1.0), &exp_cdf(1.0), DEFAULT_TOL_IDENTITY);
        assert!(r.divergent && !r.pass);
        assert!(max_t_cdf_from_max_u(&exp_cdf(1.0)).is_err());
    }

    #[test]
    fn density_examples() {
        let f_t = TabulatedDensity::from_fn(1e-3, 20.0, DEFAULT_TOL_NORM, |s| (-s).exp()).unwrap();
        let u = density_transform(&f_t, LinkDirection::TToU, DEFAULT_TOL_NORM).unwrap();
        for (s, v) in u.density.grid().iter().zip(u.density.values()) {
            assert!((v - 2.0 * (-2.0 * s).exp()).abs() < 1e-5);
        }
        let f_u = TabulatedDensity::from_fn(1e-3, 20.0, DEFAULT_TOL_NORM, |s| 2.0 * (-2.0 * s).exp()).unwrap();
        let t = density_transform(&f_u, LinkDirection::UToT, DEFAULT_TOL_NORM).unwrap();
        for (s, v) in t.density.grid().iter().zip(t.density.values()) {
            assert!((v - (-s).exp()).abs() < 1e-5);
        }
        assert!((t.normalizer - 2.0).abs() < 1e-5);

        let grid = vec![0.0, 1.0, 2.0];
        assert!(TabulatedDensity::new(grid, vec![0.5, -0.1, 0.6], 1.0).is_err());
    }

    #[test]
    fn density_and_cdf_routes_agree() {
        let f_t = TabulatedDensity::from_fn(1e-3, 20.0, DEFAULT_TOL_NORM, |s| s * (-s).exp()).unwrap();
        let via_density = density_transform(&f_t, LinkDirection::TToU, DEFAULT_TOL_NORM)
            .unwrap()
            .density
            .to_cdf(DEFAULT_TAIL_MASS_TOL)
            .unwrap();
        // Gamma(2,1) CDF, exact
        let cdf_t = TabulatedCdf::from_fn(1e-3, 20.0, 1e-6, |s| 1.0 - (1.0 + s) * (-s).exp()).unwrap();
        let via_cdf = max_u_cdf_from_max_t(&cdf_t).unwrap().cdf;
        let err = via_density
            .values()
            .iter()
            .zip(via_cdf.values())
            .fold(0.0_f64, |a, (x, y)| a.max((x - y).abs()));
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn cdf_validation() {
        assert!(TabulatedCdf::new(vec![0.0, 1.0], vec![0.5, 0.4], 1.0).is_err());
        assert!(TabulatedCdf::new(vec![0.1, 1.0], vec![0.5, 1.0], 1.0).is_err());
        assert!(TabulatedCdf::new(vec![0.0, 1.0], vec![0.5, 0.9], 1e-8).is_err());
        assert!(TabulatedCdf::new(vec![0.0, 0.0], vec![1.0, 1.0], 1e-8).is_err());
        assert!(TabulatedCdf::new(vec![0.0, 1.0], vec![0.5, 1.2], 1e-8).is_err());
    }

    #[test]
    fn empirical_cdf_counts() {
        let c = TabulatedCdf::empirical(&[0.5, 1.5, 1.5, 3.0], 0.5).unwrap();
        assert_eq!(c.eval(0.0), 0.0);
        assert_eq!(c.eval(0.5), 0.25);
        assert_eq!(c.eval(1.5), 0.75);
        assert_eq!(c.eval(3.0), 1.0);
        assert_eq!(c.grid_step(), Some(0.5));
    }

    #[test]
    fn pava_examples() {
        assert_eq!(isotonic_nondecreasing(&[1.0, 3.0, 2.0, 4.0]), vec![1.0, 2.5, 2.5, 4.0]);
        assert_eq!(isotonic_nondecreasing(&[3.0, 2.0, 1.0]), vec![2.0, 2.0, 2.0]);
        assert_eq!(isotonic_nondecreasing(&[0.0, 1.0]), vec![0.0, 1.0]);
    }

    proptest::proptest! {
        #[test]
        fn pava_output_is_monotone_and_mean_preserving(v in proptest::collection::vec(-5.0..5.0f64, 1..40)) {
            let fit = isotonic_nondecreasing(&v);
            proptest::prop_assert!(fit.windows(2).all(|w| w[1] >= w[0] - 1e-12));
            let s1: f64 = v.iter().sum();
            let s2: f64 = fit.iter().sum();
            proptest::prop_assert!((s1 - s2).abs() < 1e-9);
        }
    }
}
