//! Linear baselines for average and conditional effects.
//!
//! All four methods are ordinary least squares on a design with an
//! intercept; covariates are categorical and enter as one-hot indicators
//! with the first observed level of each dropped. Normal equations are
//! solved directly; when `XᵀX` is singular or badly conditioned a ridge
//! term of [`RIDGE_LAMBDA`] is added and the fit is flagged.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmark::{ArmPair, BenchmarkDataset, BenchmarkError, OutcomeTarget};

pub const RIDGE_LAMBDA: f64 = 1e-8;
/// Condition numbers of `XᵀX` above this trigger the ridge fallback.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EstimatorError {
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
    #[error("need at least {needed} units, got {got}")]
    TooFewUnits { needed: usize, got: usize },
    #[error("no units in the {0} arm")]
    EmptyArm(&'static str),
    #[error("non-finite value in the design or outcome")]
    NonFinite,
    #[error("unknown method {0:?}; expected t_only_ols, adjusted_ols, linear_s or linear_t")]
    UnknownMethod(String),
    #[error("least-squares solve failed")]
    Solve,
}

/// Observed columns for one arm contrast: binary treatment, scalar outcome
/// and categorical covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimationData {
    pub unit_ids: Vec<u64>,
    pub outcome: Vec<f64>,
    /// Arm membership; `None` for units that received neither contrasted
    /// arm. Those units are skipped when fitting but still get predictions.
    pub treated: Vec<Option<bool>>,
    pub covariate_names: Vec<String>,
    /// Row-major covariate value indices.
    pub covariates: Vec<Vec<usize>>,
}

impl EstimationData {
    /// Every unit of `dataset`, with the outcome read through `target`.
    pub fn from_dataset(
        dataset: &BenchmarkDataset,
        target: &OutcomeTarget,
        arms: ArmPair,
    ) -> Result<Self, EstimatorError> {
        arms.check(dataset.treatment_levels()).map_err(EstimatorError::Benchmark)?;
        let observed = dataset.observed(target)?;
        let mut data = EstimationData {
            unit_ids: Vec::new(),
            outcome: Vec::new(),
            treated: Vec::new(),
            covariate_names: dataset.meta.covariates.iter().map(|c| c.name.clone()).collect(),
            covariates: Vec::new(),
        };
        for (r, &y) in dataset.records.iter().zip(&observed.values) {
            data.unit_ids.push(r.unit_id);
            data.outcome.push(y);
            data.treated.push(if r.treatment == arms.treated {
                Some(true)
            } else if r.treatment == arms.control {
                Some(false)
            } else {
                None
            });
            data.covariates.push(r.covariates.clone());
        }
        Ok(data)
    }

    pub fn len(&self) -> usize {
        self.outcome.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcome.is_empty()
    }

    /// The same data with no covariates.
    pub fn without_covariates(&self) -> Self {
        Self { covariate_names: Vec::new(), covariates: vec![Vec::new(); self.len()], ..self.clone() }
    }
}

/// One-hot columns: (covariate position, level) for each kept level.
#[derive(Debug, Clone, PartialEq)]
struct Encoding {
    columns: Vec<(usize, usize)>,
    labels: Vec<String>,
}

impl Encoding {
    /// Levels observed among `rows`.
    fn new(data: &EstimationData, rows: &[usize]) -> Self {
        let mut columns = Vec::new();
        let mut labels = Vec::new();
        for (j, name) in data.covariate_names.iter().enumerate() {
            let mut levels: Vec<usize> = rows.iter().map(|&i| data.covariates[i][j]).collect();
            levels.sort_unstable();
            levels.dedup();
            for &level in levels.iter().skip(1) {
                columns.push((j, level));
                labels.push(format!("{name}={level}"));
            }
        }
        Self { columns, labels }
    }

    fn row(&self, covariates: &[usize]) -> impl Iterator<Item = f64> + '_ {
        let covariates = covariates.to_vec();
        self.columns.iter().map(move |&(j, level)| if covariates[j] == level { 1.0 } else { 0.0 })
    }
}

/// Row-major design with labelled columns; the first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    pub matrix: DMatrix<f64>,
    pub labels: Vec<String>,
}

impl DesignMatrix {
    fn build(rows: usize, labels: Vec<String>, mut fill: impl FnMut(usize, &mut Vec<f64>)) -> Self {
        let d = labels.len();
        let mut values = Vec::with_capacity(rows * d);
        let mut row = Vec::with_capacity(d);
        for i in 0..rows {
            row.clear();
            fill(i, &mut row);
            debug_assert_eq!(row.len(), d);
            values.extend_from_slice(&row);
        }
        Self { matrix: DMatrix::from_row_slice(rows, d, &values), labels }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub rows: usize,
    pub columns: usize,
    /// Condition number of `XᵀX` (infinite when singular).
    pub condition_number: f64,
    pub ridge: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeastSquares {
    pub coefficients: DVector<f64>,
    /// Standard errors from `σ² (XᵀX)⁻¹`; absent without residual degrees
    /// of freedom.
    pub standard_errors: Option<DVector<f64>>,
    pub diagnostics: FitDiagnostics,
}

/// Solves the normal equations, with the ridge fallback.
pub fn least_squares(design: &DesignMatrix, y: &[f64]) -> Result<LeastSquares, EstimatorError> {
    let x = &design.matrix;
    let (n, d) = x.shape();
    if y.len() != n {
        return Err(EstimatorError::TooFewUnits { needed: n, got: y.len() });
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(EstimatorError::NonFinite);
    }
    let y = DVector::from_column_slice(y);
    let xtx = x.transpose() * x;
    let xty = x.transpose() * &y;

    let eigen = xtx.clone().symmetric_eigen();
    let max = eigen.eigenvalues.iter().copied().fold(0.0, f64::max);
    let min = eigen.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let condition_number = if min > 0.0 { max / min } else { f64::INFINITY };

    let exact = (n >= d && condition_number <= MAX_CONDITION).then(|| xtx.clone().cholesky()).flatten();
    let (chol, ridge) = match exact {
        Some(c) => (c, false),
        None => {
            let penalized = &xtx + DMatrix::identity(d, d) * RIDGE_LAMBDA;
            (penalized.cholesky().ok_or(EstimatorError::Solve)?, true)
        }
    };
    let coefficients = chol.solve(&xty);

    let standard_errors = (n > d).then(|| {
        let residuals = &y - x * &coefficients;
        let sigma2 = residuals.norm_squared() / (n - d) as f64;
        let inverse = chol.inverse();
        DVector::from_iterator(d, (0..d).map(|j| (sigma2 * inverse[(j, j)]).max(0.0).sqrt()))
    });
    Ok(LeastSquares {
        coefficients,
        standard_errors,
        diagnostics: FitDiagnostics { rows: n, columns: d, condition_number, ridge },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Outcome on intercept and treatment.
    TOnlyOls,
    /// Outcome on intercept, treatment and covariates.
    AdjustedOls,
    /// One model with treatment as a feature; effect = f(x, 1) - f(x, 0).
    LinearS,
    /// One model per arm on covariates; effect = f₁(x) - f₀(x).
    LinearT,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::TOnlyOls, Method::AdjustedOls, Method::LinearS, Method::LinearT];

    pub fn name(self) -> &'static str {
        match self {
            Method::TOnlyOls => "t_only_ols",
            Method::AdjustedOls => "adjusted_ols",
            Method::LinearS => "linear_s",
            Method::LinearT => "linear_t",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "t_only_ols" | "t_only" => Ok(Method::TOnlyOls),
            "adjusted_ols" | "linreg" => Ok(Method::AdjustedOls),
            "linear_s" | "linears" => Ok(Method::LinearS),
            "linear_t" | "lineart" => Ok(Method::LinearT),
            _ => Err(EstimatorError::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutput {
    pub method: Method,
    pub ate: f64,
    /// Standard error of the treatment coefficient, for single-model fits.
    pub ate_se: Option<f64>,
    /// Per-unit effect predictions for every input row, including units
    /// outside the contrasted arms.
    pub cate: Vec<f64>,
    pub unit_ids: Vec<u64>,
    pub diagnostics: Vec<FitDiagnostics>,
}

/// Rows in either contrasted arm.
fn fit_rows(data: &EstimationData) -> Result<Vec<usize>, EstimatorError> {
    let rows: Vec<usize> = (0..data.len()).filter(|&i| data.treated[i].is_some()).collect();
    if rows.len() < 2 {
        return Err(EstimatorError::TooFewUnits { needed: 2, got: rows.len() });
    }
    if !rows.iter().any(|&i| data.treated[i] == Some(true)) {
        return Err(EstimatorError::EmptyArm("treated"));
    }
    if !rows.iter().any(|&i| data.treated[i] == Some(false)) {
        return Err(EstimatorError::EmptyArm("control"));
    }
    Ok(rows)
}

/// Intercept, treatment, then one-hot covariates; effect is the treatment
/// coefficient.
fn treatment_coefficient_fit(method: Method, data: &EstimationData) -> Result<EstimatorOutput, EstimatorError> {
    let rows = fit_rows(data)?;
    let encoding = Encoding::new(data, &rows);
    let mut labels = vec!["intercept".to_string(), "t".to_string()];
    labels.extend(encoding.labels.iter().cloned());
    let design = DesignMatrix::build(rows.len(), labels, |r, row| {
        let i = rows[r];
        row.push(1.0);
        row.push(if data.treated[i] == Some(true) { 1.0 } else { 0.0 });
        row.extend(encoding.row(&data.covariates[i]));
    });
    let y: Vec<f64> = rows.iter().map(|&i| data.outcome[i]).collect();
    let fit = least_squares(&design, &y)?;
    let ate = fit.coefficients[1];
    Ok(EstimatorOutput {
        method,
        ate,
        ate_se: fit.standard_errors.as_ref().map(|se| se[1]),
        cate: vec![ate; data.len()],
        unit_ids: data.unit_ids.clone(),
        diagnostics: vec![fit.diagnostics],
    })
}

fn linear_t(data: &EstimationData) -> Result<EstimatorOutput, EstimatorError> {
    let rows = fit_rows(data)?;
    let encoding = Encoding::new(data, &rows);
    let mut labels = vec!["intercept".to_string()];
    labels.extend(encoding.labels.iter().cloned());
    let fit_arm = |arm: bool| {
        let rows: Vec<usize> = rows.iter().copied().filter(|&i| data.treated[i] == Some(arm)).collect();
        let design = DesignMatrix::build(rows.len(), labels.clone(), |r, row| {
            row.push(1.0);
            row.extend(encoding.row(&data.covariates[rows[r]]));
        });
        let y: Vec<f64> = rows.iter().map(|&i| data.outcome[i]).collect();
        least_squares(&design, &y)
    };
    let control = fit_arm(false)?;
    let treated = fit_arm(true)?;
    let cate: Vec<f64> = data
        .covariates
        .iter()
        .map(|cov| {
            let x: Vec<f64> = std::iter::once(1.0).chain(encoding.row(cov)).collect();
            let x = DVector::from_vec(x);
            treated.coefficients.dot(&x) - control.coefficients.dot(&x)
        })
        .collect();
    let ate = cate.iter().sum::<f64>() / cate.len() as f64;
    Ok(EstimatorOutput {
        method: Method::LinearT,
        ate,
        ate_se: None,
        cate,
        unit_ids: data.unit_ids.clone(),
        diagnostics: vec![control.diagnostics, treated.diagnostics],
    })
}

pub fn fit(method: Method, data: &EstimationData) -> Result<EstimatorOutput, EstimatorError> {
    match method {
        Method::TOnlyOls => treatment_coefficient_fit(method, &data.without_covariates()),
        Method::AdjustedOls | Method::LinearS => treatment_coefficient_fit(method, data),
        Method::LinearT => linear_t(data),
    }
}

pub fn fit_t_only_ols(data: &EstimationData) -> Result<EstimatorOutput, EstimatorError> {
    fit(Method::TOnlyOls, data)
}

pub fn fit_adjusted_ols(data: &EstimationData) -> Result<EstimatorOutput, EstimatorError> {
    fit(Method::AdjustedOls, data)
}

pub fn fit_linear_s(data: &EstimationData) -> Result<EstimatorOutput, EstimatorError> {
    fit(Method::LinearS, data)
}

pub fn fit_linear_t(data: &EstimationData) -> Result<EstimatorOutput, EstimatorError> {
    fit(Method::LinearT, data)
}
