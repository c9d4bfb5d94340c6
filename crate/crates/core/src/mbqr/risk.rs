use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{design_matrix, Dataset, FitResult, MbqrError, QuantileModelSpec, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaRisk {
    pub area_id: String,
    /// Relative risk `exp(eta_i)` at the fitted coefficients.
    pub theta_alpha: f64,
    /// Probability that the relative risk exceeds 1.
    pub exceedance: f64,
    pub high_risk: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub alpha: f64,
    pub threshold: f64,
    pub n_draws: usize,
    pub areas: Vec<AreaRisk>,
}

impl RiskReport {
    pub fn n_flagged(&self) -> usize {
        self.areas.iter().filter(|a| a.high_risk).count()
    }
}

/// Exceedance probabilities `pr(exp(eta_i) > 1)` under the Gaussian
/// approximation `N(beta_hat, covariance)`, estimated from `n_draws`
/// coefficient draws. An area is high risk when its exceedance is strictly
/// above `threshold`.
pub fn exceedance(
    spec: &QuantileModelSpec,
    fit: &FitResult,
    data: &Dataset,
    n_draws: usize,
    seed: u64,
    threshold: f64,
) -> Result<RiskReport> {
    if !fit.converged {
        return Err(MbqrError::NotConverged(
            "compute exceedance probabilities".into(),
        ));
    }
    if n_draws == 0 {
        return Err(MbqrError::InvalidSpec("n_draws must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(MbqrError::InvalidSpec(format!(
            "threshold must lie in [0, 1], got {threshold}"
        )));
    }
    let design = design_matrix(spec, data)?;
    let p = design.ncols();
    if fit.beta_hat.len() != p {
        return Err(MbqrError::InvalidSpec(format!(
            "fit has {} coefficients, spec expects {p}",
            fit.beta_hat.len()
        )));
    }
    let beta = DVector::from_column_slice(&fit.beta_hat);
    let cov = fit.covariance_matrix();
    // Cholesky factor; semidefinite covariances fall back to an eigen root
    let root = match cov.clone().cholesky() {
        Some(c) => c.l(),
        None => {
            let eig = cov.symmetric_eigen();
            let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
            &eig.eigenvectors * nalgebra::DMatrix::from_diagonal(&sqrt_vals)
        }
    };
    let eta_hat = &design * &beta;
    let n = design.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut above = vec![0usize; n];
    let mut z = DVector::zeros(p);
    for _ in 0..n_draws {
        for v in z.iter_mut() {
            *v = StandardNormal.sample(&mut rng);
        }
        let draw = &beta + &root * &z;
        let eta = &design * &draw;
        for (count, e) in above.iter_mut().zip(eta.iter()) {
            if *e > 0.0 {
                *count += 1;
            }
        }
    }
    let areas = (0..n)
        .map(|i| {
            let ex = above[i] as f64 / n_draws as f64;
            AreaRisk {
                area_id: data
                    .area_ids
                    .as_ref()
                    .map_or_else(|| (i + 1).to_string(), |ids| ids[i].clone()),
                theta_alpha: eta_hat[i].exp(),
                exceedance: ex,
                high_risk: ex > threshold,
            }
        })
        .collect();
    Ok(RiskReport {
        alpha: spec.alpha,
        threshold,
        n_draws,
        areas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::countdist::FamilyShape;
    use crate::mbqr::{CovarianceMethod, FitDiagnostics};
    use nalgebra::DMatrix;

    fn fake_fit(beta: f64, var: f64) -> FitResult {
        FitResult {
            alpha: 0.25,
            coef_names: vec!["(intercept)".into()],
            beta_hat: vec![beta],
            covariance: vec![vec![var]],
            std_errors: vec![var.sqrt()],
            loglik: 0.0,
            converged: true,
            n_iter: 1,
            diagnostics: FitDiagnostics {
                grad_sup_norm: 0.0,
                eta_clamped: false,
                line_search_failed: false,
                covariance_method: CovarianceMethod::ObservedInformation,
            },
        }
    }

    fn setup() -> (QuantileModelSpec, Dataset) {
        let spec = QuantileModelSpec::new(0.25, FamilyShape::Poisson, vec![]).unwrap();
        let data = Dataset::new(DMatrix::zeros(3, 0), vec![1, 2, 3], None).unwrap();
        (spec, data)
    }

    #[test]
    fn zero_eta_gives_half() {
        let (spec, data) = setup();
        let r = exceedance(&spec, &fake_fit(0.0, 0.04), &data, 10_000, 3, 0.95).unwrap();
        for a in &r.areas {
            assert!((a.exceedance - 0.5).abs() <= 2.0 / 100.0);
            assert!(!a.high_risk);
        }
    }

    #[test]
    fn large_eta_is_certain() {
        let (spec, data) = setup();
        let r = exceedance(&spec, &fake_fit(10.0, 1e-6), &data, 1000, 3, 0.95).unwrap();
        assert!(r.areas.iter().all(|a| a.exceedance == 1.0 && a.high_risk));
        assert_eq!(r.n_flagged(), 3);
    }

    #[test]
    fn refuses_unconverged_fit() {
        let (spec, data) = setup();
        let mut f = fake_fit(0.0, 0.01);
        f.converged = false;
        assert!(matches!(
            exceedance(&spec, &f, &data, 10, 0, 0.9),
            Err(MbqrError::NotConverged(_))
        ));
    }

    #[test]
    fn deterministic_per_seed() {
        let (spec, data) = setup();
        let a = exceedance(&spec, &fake_fit(0.05, 0.01), &data, 500, 9, 0.5).unwrap();
        let b = exceedance(&spec, &fake_fit(0.05, 0.01), &data, 500, 9, 0.5).unwrap();
        assert_eq!(a, b);
    }
}
