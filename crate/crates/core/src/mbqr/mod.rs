//! Model-based quantile regression.
//!
//! The `alpha`-quantile of each count is modelled as `g(eta_i) = exp(eta_i)`
//! with `eta_i = x_i' beta`, and the quantile is mapped to the family
//! parameter through [`FamilyShape::map_quantile_to_param`]. The model is
//! then an ordinary likelihood in `beta`: fitting is maximum likelihood under
//! the true discrete distribution, and uncertainty comes from the observed
//! information (or a parametric bootstrap).

mod crossing;
mod fit;
mod model;
mod risk;

pub use crossing::{detect_crossings, fitted_quantile_curve, CrossingReport, QuantileCurve};
pub use fit::{
    covariance, fit, irls_poisson, CovarianceEstimate, CovarianceMethod, FitDiagnostics, FitResult,
    FitSettings,
};
pub use model::{gradient, linear_predictor, loglik, per_obs_param, LinearPredictor, ETA_MAX};
pub use risk::{exceedance, AreaRisk, RiskReport};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::countdist::{CountDistError, FamilyShape};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MbqrError {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("design matrix has rank {rank} < {columns} columns")]
    RankDeficient { rank: usize, columns: usize },
    #[error("starting point has zero likelihood: {0}")]
    InvalidStart(String),
    #[error("fit did not converge; refusing to {0}")]
    NotConverged(String),
    #[error(transparent)]
    Dist(#[from] CountDistError),
}

pub type Result<T> = std::result::Result<T, MbqrError>;

/// How an exposure (observation window) `E_i` enters the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ExposureMode {
    /// No exposure: `q_i = exp(eta_i)`.
    #[default]
    None,
    /// Exposure scales the quantile: `q_i = E_i exp(eta_i)`.
    QuantileLevel,
    /// Exposure scales the parameter: `theta_i = E_i h(exp(eta_i))`.
    ParameterLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileModelSpec {
    pub alpha: f64,
    pub family_shape: FamilyShape,
    pub exposure_mode: ExposureMode,
    /// Names of the dataset's covariate columns, in order.
    pub covariate_names: Vec<String>,
    pub intercept: bool,
}

impl QuantileModelSpec {
    /// Spec with an intercept and no exposure.
    pub fn new(
        alpha: f64,
        family_shape: FamilyShape,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let spec = Self {
            alpha,
            family_shape,
            exposure_mode: ExposureMode::None,
            covariate_names,
            intercept: true,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_exposure(mut self, mode: ExposureMode) -> Self {
        self.exposure_mode = mode;
        self
    }

    pub fn without_intercept(mut self) -> Self {
        self.intercept = false;
        self
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let mut spec = self.clone();
        spec.alpha = alpha;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MbqrError::InvalidSpec(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        // a throwaway parameter checks the fixed shape values
        let probe = match self.family_shape {
            FamilyShape::Poisson => 1.0,
            _ => 0.5,
        };
        self.family_shape.with_param(probe)?;
        if self.n_coef() == 0 {
            return Err(MbqrError::InvalidSpec("model has no coefficients".into()));
        }
        Ok(())
    }

    pub fn n_coef(&self) -> usize {
        self.covariate_names.len() + usize::from(self.intercept)
    }

    pub fn coef_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.n_coef());
        if self.intercept {
            names.push("(intercept)".to_string());
        }
        names.extend(self.covariate_names.iter().cloned());
        names
    }
}

/// Covariates, counts and optional exposures. `x` holds the covariate
/// columns only; the intercept column is added from the model spec.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DMatrix<f64>,
    pub y: Vec<u64>,
    pub exposure: Option<Vec<f64>>,
    pub area_ids: Option<Vec<String>>,
}

impl Dataset {
    pub fn new(x: DMatrix<f64>, y: Vec<u64>, exposure: Option<Vec<f64>>) -> Result<Self> {
        let data = Self {
            x,
            y,
            exposure,
            area_ids: None,
        };
        data.validate()?;
        Ok(data)
    }

    pub fn with_area_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.y.len() {
            return Err(MbqrError::InvalidData(format!(
                "{} area ids for {} observations",
                ids.len(),
                self.y.len()
            )));
        }
        self.area_ids = Some(ids);
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.y.len();
        if n == 0 {
            return Err(MbqrError::InvalidData("dataset has no observations".into()));
        }
        if self.x.nrows() != n {
            return Err(MbqrError::InvalidData(format!(
                "design has {} rows but there are {n} responses",
                self.x.nrows()
            )));
        }
        if let Some((i, _)) = self.x.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(MbqrError::InvalidData(format!(
                "non-finite covariate at row {}",
                i % n.max(1)
            )));
        }
        if let Some(e) = &self.exposure {
            if e.len() != n {
                return Err(MbqrError::InvalidData(format!(
                    "{} exposures for {n} responses",
                    e.len()
                )));
            }
            if let Some(i) = e.iter().position(|&v| !(v > 0.0) || !v.is_finite()) {
                return Err(MbqrError::InvalidData(format!(
                    "exposure at row {i} must be positive and finite, got {}",
                    e[i]
                )));
            }
        }
        Ok(())
    }

    pub fn n_obs(&self) -> usize {
        self.y.len()
    }

    pub fn exposure_at(&self, i: usize) -> Option<f64> {
        self.exposure.as_ref().map(|e| e[i])
    }
}

/// Design matrix for `spec`: a leading column of ones when the spec has an
/// intercept, followed by the dataset's covariates.
pub fn design_matrix(spec: &QuantileModelSpec, data: &Dataset) -> Result<DMatrix<f64>> {
    if data.x.ncols() != spec.covariate_names.len() {
        return Err(MbqrError::InvalidData(format!(
            "spec names {} covariates but the dataset has {} columns",
            spec.covariate_names.len(),
            data.x.ncols()
        )));
    }
    match (spec.exposure_mode, &data.exposure) {
        (ExposureMode::None, Some(_)) => {
            return Err(MbqrError::InvalidSpec(
                "exposure mode 'none' but the dataset carries exposures".into(),
            ))
        }
        (ExposureMode::QuantileLevel | ExposureMode::ParameterLevel, None) => {
            return Err(MbqrError::InvalidSpec(
                "exposure mode set but the dataset has no exposures".into(),
            ))
        }
        _ => {}
    }
    let n = data.n_obs();
    let offset = usize::from(spec.intercept);
    Ok(DMatrix::from_fn(n, spec.n_coef(), |i, j| {
        if j < offset {
            1.0
        } else {
            data.x[(i, j - offset)]
        }
    }))
}
