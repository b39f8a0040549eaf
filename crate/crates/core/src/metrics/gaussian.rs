use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::MetricsError;
use crate::types::Condition;

/// Relative ridge applied when the caller does not pick one.
pub const DEFAULT_RIDGE_LAMBDA: f64 = 1e-3;
/// Largest relative ridge tried before giving up on a covariance.
pub const MAX_RIDGE_LAMBDA: f64 = 1e2;

/// Smallest accepted ratio between the smallest and largest Cholesky pivot.
const MIN_PIVOT_RATIO: f64 = 1e-12;

/// Which distribution a Gaussian models.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GaussianLabel {
    Condition(Condition),
    Background,
}

impl fmt::Display for GaussianLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GaussianLabel::Condition(c) => write!(f, "{c}"),
            GaussianLabel::Background => f.write_str("background"),
        }
    }
}

/// Full-covariance Gaussian with a ridge-regularised Cholesky factor.
///
/// `covariance` is the unregularised sample covariance. Distances use
/// `covariance + ridge·I` where `ridge = ridge_lambda · trace(covariance)/d`,
/// through the stored lower-triangular `factor`.
#[derive(Debug, Clone)]
pub struct GaussianModel {
    label: GaussianLabel,
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    ridge_lambda: f64,
    ridge: f64,
    factor: DMatrix<f64>,
    n_samples: usize,
}

/// Fits mean and (n−1)-denominator covariance, then factorises.
///
/// The relative ridge starts at `ridge_lambda` (default
/// [`DEFAULT_RIDGE_LAMBDA`]) and grows tenfold until the factorisation
/// succeeds or [`MAX_RIDGE_LAMBDA`] is exceeded.
pub fn fit_gaussian<R: AsRef<[f64]>>(
    rows: &[R],
    label: GaussianLabel,
    ridge_lambda: Option<f64>,
) -> Result<GaussianModel, MetricsError> {
    let n = rows.len();
    if n < 2 {
        return Err(MetricsError::Fit(format!(
            "{label}: need at least 2 rows, got {n}"
        )));
    }
    let d = rows[0].as_ref().len();
    if d == 0 {
        return Err(MetricsError::Fit(format!("{label}: zero-width rows")));
    }
    let mut centered = DMatrix::<f64>::zeros(n, d);
    let mut mean = DVector::<f64>::zeros(d);
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != d {
            return Err(MetricsError::Dim(format!(
                "{label}: row {i} has width {}, expected {d}",
                row.len()
            )));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(MetricsError::Fit(format!("{label}: row {i} is not finite")));
        }
        for (j, &v) in row.iter().enumerate() {
            centered[(i, j)] = v;
            mean[j] += v;
        }
    }
    mean /= n as f64;
    for mut row in centered.row_iter_mut() {
        row -= mean.transpose();
    }
    let mut covariance = centered.tr_mul(&centered) / (n as f64 - 1.0);
    for j in 0..d {
        for i in j + 1..d {
            covariance[(j, i)] = covariance[(i, j)];
        }
    }
    let mut model = GaussianModel::from_moments(label, mean, covariance, ridge_lambda)?;
    model.n_samples = n;
    Ok(model)
}

impl GaussianModel {
    /// Builds a model from a known mean and covariance.
    pub fn from_moments(
        label: GaussianLabel,
        mean: DVector<f64>,
        covariance: DMatrix<f64>,
        ridge_lambda: Option<f64>,
    ) -> Result<Self, MetricsError> {
        let d = mean.len();
        if covariance.nrows() != d || covariance.ncols() != d {
            return Err(MetricsError::Dim(format!(
                "{label}: covariance is {}x{}, mean has {d} entries",
                covariance.nrows(),
                covariance.ncols()
            )));
        }
        let start = ridge_lambda.unwrap_or(DEFAULT_RIDGE_LAMBDA);
        if !(start >= 0.0 && start.is_finite()) {
            return Err(MetricsError::Config(format!(
                "{label}: ridge lambda must be a nonnegative number"
            )));
        }
        let trace = covariance.trace();
        let scale = if trace > 0.0 && trace.is_finite() {
            trace / d as f64
        } else {
            1.0
        };
        for lambda in ridge_schedule(start) {
            let ridge = lambda * scale;
            let mut regularized = covariance.clone();
            for i in 0..d {
                regularized[(i, i)] += ridge;
            }
            let Some(chol) = regularized.cholesky() else { continue };
            let pivots = chol.l_dirty().diagonal().map(|l| l * l);
            // a factorisation that only exists thanks to rounding (pivot
            // collapsed to ~0) would make distances meaningless
            if pivots.min() > MIN_PIVOT_RATIO * pivots.max() {
                return Ok(GaussianModel {
                    label,
                    mean,
                    covariance,
                    ridge_lambda: lambda,
                    ridge,
                    factor: chol.l(),
                    n_samples: 0,
                });
            }
        }
        Err(MetricsError::Conditioning(format!(
            "{label}: covariance not positive definite even with ridge {MAX_RIDGE_LAMBDA}·trace/d"
        )))
    }

    pub fn label(&self) -> GaussianLabel {
        self.label
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Relative ridge that made the factorisation succeed.
    pub fn ridge_lambda(&self) -> f64 {
        self.ridge_lambda
    }

    /// Absolute amount added to the covariance diagonal.
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// Number of fitting rows; zero for models built from moments.
    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn regularized_covariance(&self) -> DMatrix<f64> {
        let mut m = self.covariance.clone();
        for i in 0..self.dim() {
            m[(i, i)] += self.ridge;
        }
        m
    }
}

/// `start, 10·start, 100·start, ...` up to the cap. A zero start falls back
/// to the default schedule once plain factorisation fails.
fn ridge_schedule(start: f64) -> Vec<f64> {
    let cap = MAX_RIDGE_LAMBDA * (1.0 + 1e-9);
    let mut out = Vec::new();
    let base = if start == 0.0 {
        out.push(0.0);
        DEFAULT_RIDGE_LAMBDA
    } else {
        start
    };
    let mut k = 0;
    loop {
        let lambda = base * 10f64.powi(k);
        if lambda > cap {
            break;
        }
        out.push(lambda);
        k += 1;
    }
    if out.is_empty() {
        out.push(start);
    }
    out
}

/// `sqrt((x−μ)ᵀ Σ_reg⁻¹ (x−μ))` via a forward solve against the factor.
pub fn mahalanobis_distance(x: &[f64], model: &GaussianModel) -> Result<f64, MetricsError> {
    if x.len() != model.dim() {
        return Err(MetricsError::Dim(format!(
            "vector has {} entries, {} model has {}",
            x.len(),
            model.label,
            model.dim()
        )));
    }
    let diff = DVector::from_iterator(
        x.len(),
        x.iter().zip(model.mean.iter()).map(|(a, b)| a - b),
    );
    let z = model
        .factor
        .solve_lower_triangular(&diff)
        .ok_or_else(|| MetricsError::Conditioning(format!("{}: singular factor", model.label)))?;
    Ok(z.norm_squared().sqrt())
}
