use nalgebra::{DMatrix, DVector};

use super::{design_matrix, Dataset, ExposureMode, MbqrError, QuantileModelSpec, Result};
use crate::countdist::{CountFamily, FamilyShape};

/// Linear predictors above this are clamped before exponentiation.
pub const ETA_MAX: f64 = 700.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPredictor {
    pub eta: f64,
    /// Modelled quantile. Under [`ExposureMode::ParameterLevel`] this is
    /// `exp(eta)`; the exposure enters after the mapping.
    pub quantile: f64,
    pub clamped: bool,
}

fn clamp_eta(eta: f64) -> (f64, bool) {
    if eta > ETA_MAX {
        (ETA_MAX, true)
    } else {
        (eta, false)
    }
}

fn check_exposure(spec: &QuantileModelSpec, exposure: Option<f64>) -> Result<f64> {
    match (spec.exposure_mode, exposure) {
        (ExposureMode::None, None) => Ok(1.0),
        (ExposureMode::None, Some(_)) => Err(MbqrError::InvalidSpec(
            "exposure given with exposure mode 'none'".into(),
        )),
        (_, Some(e)) if e > 0.0 && e.is_finite() => Ok(e),
        (_, Some(e)) => Err(MbqrError::InvalidData(format!(
            "exposure must be positive, got {e}"
        ))),
        (_, None) => Err(MbqrError::InvalidSpec(
            "exposure mode set but no exposure given".into(),
        )),
    }
}

/// `eta = row' beta` and the modelled quantile. `row` is a design row, i.e.
/// it starts with 1 when the spec has an intercept.
pub fn linear_predictor(
    spec: &QuantileModelSpec,
    row: &[f64],
    beta: &[f64],
    exposure: Option<f64>,
) -> Result<LinearPredictor> {
    if row.len() != spec.n_coef() || beta.len() != spec.n_coef() {
        return Err(MbqrError::InvalidSpec(format!(
            "expected {} coefficients, got row {} / beta {}",
            spec.n_coef(),
            row.len(),
            beta.len()
        )));
    }
    let e = check_exposure(spec, exposure)?;
    let eta: f64 = row.iter().zip(beta).map(|(x, b)| x * b).sum();
    let (eta_c, clamped) = clamp_eta(eta);
    let g = eta_c.exp();
    let quantile = match spec.exposure_mode {
        ExposureMode::QuantileLevel => e * g,
        _ => g,
    };
    Ok(LinearPredictor {
        eta,
        quantile,
        clamped,
    })
}

/// The family parameter for one observation with linear predictor `eta`.
pub fn per_obs_param(spec: &QuantileModelSpec, eta: f64, exposure: Option<f64>) -> Result<f64> {
    let e = check_exposure(spec, exposure)?;
    let g = clamp_eta(eta).0.exp();
    Ok(match spec.exposure_mode {
        ExposureMode::QuantileLevel => {
            spec.family_shape.map_quantile_to_param(e * g, spec.alpha)?
        }
        ExposureMode::ParameterLevel => {
            e * spec.family_shape.map_quantile_to_param(g, spec.alpha)?
        }
        ExposureMode::None => spec.family_shape.map_quantile_to_param(g, spec.alpha)?,
    })
}

/// Derivative of the log-pmf in the family parameter, and the Fisher
/// information of one observation about that parameter.
fn score_and_info(family: &CountFamily, y: f64) -> (f64, f64) {
    match *family {
        CountFamily::Poisson { lambda } => (y / lambda - 1.0, 1.0 / lambda),
        CountFamily::Binomial { n, p } => {
            let nf = n as f64;
            (y / p - (nf - y) / (1.0 - p), nf / (p * (1.0 - p)))
        }
        CountFamily::NegBinomial { r, p } => {
            (y / p - r / (1.0 - p), r / (p * (1.0 - p) * (1.0 - p)))
        }
    }
}

/// Per-observation quantities at one linear predictor value.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ObsTerms {
    pub theta: f64,
    pub ll: f64,
    /// d ll / d eta
    pub score: f64,
    /// Fisher information about eta
    pub info: f64,
}

pub(crate) fn obs_terms(
    shape: &FamilyShape,
    mode: ExposureMode,
    alpha: f64,
    eta: f64,
    exposure: f64,
    y: u64,
    derivatives: bool,
) -> Option<ObsTerms> {
    let g = clamp_eta(eta).0.exp();
    let q = if mode == ExposureMode::QuantileLevel {
        exposure * g
    } else {
        g
    };
    let h = shape.map_quantile_to_param(q, alpha).ok()?;
    let scale = if mode == ExposureMode::ParameterLevel {
        exposure
    } else {
        1.0
    };
    let family = shape.with_param(scale * h).ok()?;
    let ll = family.ln_pmf(y);
    if !ll.is_finite() {
        return None;
    }
    let mut terms = ObsTerms {
        theta: scale * h,
        ll,
        score: 0.0,
        info: 0.0,
    };
    if derivatives {
        // implicit differentiation of F(q; h(q)) = alpha
        let mapped = if scale == 1.0 {
            family
        } else {
            shape.with_param(h).ok()?
        };
        let (f_q, f_theta) = mapped.cdf_sensitivities(q);
        let dtheta_deta = scale * (-f_q / f_theta) * q;
        let (s, i) = score_and_info(&family, y as f64);
        terms.score = s * dtheta_deta;
        terms.info = i * dtheta_deta * dtheta_deta;
        if !terms.score.is_finite() || !terms.info.is_finite() {
            return None;
        }
    }
    Some(terms)
}

/// A spec and dataset resolved into a design matrix, ready for repeated
/// evaluation.
#[derive(Debug, Clone)]
pub(crate) struct Model<'a> {
    pub spec: &'a QuantileModelSpec,
    pub design: DMatrix<f64>,
    pub y: &'a [u64],
    pub exposure: Option<&'a [f64]>,
}

#[derive(Debug, Clone)]
pub(crate) struct Evaluation {
    pub ll: f64,
    pub grad: DVector<f64>,
    pub fisher: DMatrix<f64>,
    pub clamped: bool,
}

impl<'a> Model<'a> {
    pub fn new(spec: &'a QuantileModelSpec, data: &'a Dataset) -> Result<Self> {
        spec.validate()?;
        data.validate()?;
        let design = design_matrix(spec, data)?;
        if let FamilyShape::Binomial { n } = spec.family_shape {
            if let Some(i) = data.y.iter().position(|&y| y > n) {
                return Err(MbqrError::InvalidData(format!(
                    "count {} at row {i} exceeds the binomial size {n}",
                    data.y[i]
                )));
            }
        }
        Ok(Self {
            spec,
            design,
            y: &data.y,
            exposure: data.exposure.as_deref(),
        })
    }

    pub fn n_coef(&self) -> usize {
        self.design.ncols()
    }

    pub fn eta(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.design * beta
    }

    fn exposure(&self, i: usize) -> f64 {
        self.exposure.map_or(1.0, |e| e[i])
    }

    fn terms(&self, i: usize, eta: f64, derivatives: bool) -> Option<ObsTerms> {
        obs_terms(
            &self.spec.family_shape,
            self.spec.exposure_mode,
            self.spec.alpha,
            eta,
            self.exposure(i),
            self.y[i],
            derivatives,
        )
    }

    /// Parameters at `beta`; `None` if any observation leaves the domain.
    pub fn thetas(&self, beta: &DVector<f64>) -> Option<Vec<f64>> {
        let eta = self.eta(beta);
        (0..self.y.len())
            .map(|i| self.terms(i, eta[i], false).map(|t| t.theta))
            .collect()
    }

    /// Log-likelihood, `-inf` when any parameter is invalid.
    pub fn loglik(&self, beta: &DVector<f64>) -> f64 {
        let eta = self.eta(beta);
        let mut ll = 0.0;
        for i in 0..self.y.len() {
            match self.terms(i, eta[i], false) {
                Some(t) => ll += t.ll,
                None => return f64::NEG_INFINITY,
            }
        }
        ll
    }

    /// Log-likelihood with gradient and expected information; `None` when
    /// any parameter is invalid.
    pub fn evaluate(&self, beta: &DVector<f64>, with_fisher: bool) -> Option<Evaluation> {
        let p = self.n_coef();
        let eta = self.eta(beta);
        let mut ll = 0.0;
        let mut grad = DVector::zeros(p);
        let mut fisher = DMatrix::zeros(
            if with_fisher { p } else { 0 },
            if with_fisher { p } else { 0 },
        );
        let mut clamped = false;
        for i in 0..self.y.len() {
            clamped |= eta[i] > ETA_MAX;
            let t = self.terms(i, eta[i], true)?;
            ll += t.ll;
            for j in 0..p {
                let xij = self.design[(i, j)];
                grad[j] += t.score * xij;
                if with_fisher {
                    for k in 0..=j {
                        fisher[(j, k)] += t.info * xij * self.design[(i, k)];
                    }
                }
            }
        }
        if with_fisher {
            for j in 0..p {
                for k in 0..j {
                    fisher[(k, j)] = fisher[(j, k)];
                }
            }
        }
        Some(Evaluation {
            ll,
            grad,
            fisher,
            clamped,
        })
    }
}

fn beta_vector(spec: &QuantileModelSpec, beta: &[f64]) -> Result<DVector<f64>> {
    if beta.len() != spec.n_coef() {
        return Err(MbqrError::InvalidSpec(format!(
            "expected {} coefficients, got {}",
            spec.n_coef(),
            beta.len()
        )));
    }
    Ok(DVector::from_column_slice(beta))
}

/// Sum of discrete log-pmfs at the parameters implied by `beta`; `-inf` if
/// any parameter falls outside the family's domain.
pub fn loglik(spec: &QuantileModelSpec, data: &Dataset, beta: &[f64]) -> Result<f64> {
    let model = Model::new(spec, data)?;
    Ok(model.loglik(&beta_vector(spec, beta)?))
}

/// Chain-rule gradient of [`loglik`] in `beta`.
pub fn gradient(spec: &QuantileModelSpec, data: &Dataset, beta: &[f64]) -> Result<Vec<f64>> {
    let model = Model::new(spec, data)?;
    let b = beta_vector(spec, beta)?;
    model
        .evaluate(&b, false)
        .map(|e| e.grad.iter().copied().collect())
        .ok_or_else(|| MbqrError::InvalidStart("parameter outside the family domain".into()))
}
