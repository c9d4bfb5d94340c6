use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{per_obs_param, ExposureMode, MbqrError, QuantileModelSpec, Result};

/// Fitted quantiles at level `alpha` over a fixed set of evaluation points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileCurve {
    pub alpha: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrossingReport {
    pub violations: usize,
    pub any_crossing: bool,
}

/// Counts (point, adjacent level pair) combinations where the lower level's
/// quantile exceeds the higher level's by more than 1e-9.
pub fn detect_crossings(curves: &[QuantileCurve]) -> Result<CrossingReport> {
    let Some(first) = curves.first() else {
        return Err(MbqrError::InvalidSpec("no quantile curves given".into()));
    };
    let points = first.values.len();
    if let Some(c) = curves.iter().find(|c| c.values.len() != points) {
        return Err(MbqrError::InvalidSpec(format!(
            "curve at alpha {} has {} points, expected {points}",
            c.alpha,
            c.values.len()
        )));
    }
    if let Some(c) = curves.iter().find(|c| !(c.alpha > 0.0 && c.alpha < 1.0)) {
        return Err(MbqrError::InvalidSpec(format!(
            "alpha {} outside (0, 1)",
            c.alpha
        )));
    }
    let mut order: Vec<&QuantileCurve> = curves.iter().collect();
    order.sort_by(|a, b| a.alpha.total_cmp(&b.alpha));
    let mut violations = 0;
    for pair in order.windows(2) {
        for (lo, hi) in pair[0].values.iter().zip(&pair[1].values) {
            if *lo > *hi + 1e-9 {
                violations += 1;
            }
        }
    }
    Ok(CrossingReport {
        violations,
        any_crossing: violations > 0,
    })
}

/// The modelled `alpha`-quantile at each row of `design` (design rows, i.e.
/// including the intercept column when the spec has one).
pub fn fitted_quantile_curve(
    spec: &QuantileModelSpec,
    beta: &[f64],
    design: &DMatrix<f64>,
    exposure: Option<&[f64]>,
) -> Result<QuantileCurve> {
    if design.ncols() != beta.len() {
        return Err(MbqrError::InvalidSpec(format!(
            "design has {} columns for {} coefficients",
            design.ncols(),
            beta.len()
        )));
    }
    let values = (0..design.nrows())
        .map(|i| {
            let eta: f64 = (0..beta.len()).map(|j| design[(i, j)] * beta[j]).sum();
            let e = exposure.map(|e| e[i]);
            let g = eta.min(super::ETA_MAX).exp();
            match spec.exposure_mode {
                ExposureMode::None => Ok(g),
                ExposureMode::QuantileLevel => Ok(e.unwrap_or(1.0) * g),
                ExposureMode::ParameterLevel => {
                    let theta = per_obs_param(spec, eta, e)?;
                    Ok(spec
                        .family_shape
                        .with_param(theta)?
                        .continuous_quantile(spec.alpha)?)
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileCurve {
        alpha: spec.alpha,
        values,
    })
}
