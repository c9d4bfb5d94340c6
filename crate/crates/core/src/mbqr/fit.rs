use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{Evaluation, Model};
use super::{Dataset, ExposureMode, MbqrError, QuantileModelSpec, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub max_iter: usize,
    /// Converged when the gradient sup-norm is below `grad_tol (1 + |loglik|)`.
    pub grad_tol: f64,
    /// Step halvings allowed per line search.
    pub max_halvings: usize,
    /// Replace the observed-information covariance with a parametric
    /// bootstrap of this many replicates.
    pub bootstrap: Option<usize>,
    /// Base seed for the bootstrap; replicate `b` uses `seed + b`.
    pub seed: u64,
}

impl Default for FitSettings {
    fn default() -> Self {
        Self {
            max_iter: 200,
            grad_tol: 1e-8,
            max_halvings: 40,
            bootstrap: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CovarianceMethod {
    ObservedInformation,
    /// The negative Hessian was not positive definite; its pseudo-inverse
    /// was used.
    PseudoInverse,
    Bootstrap {
        replicates: usize,
        failed: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    pub grad_sup_norm: f64,
    /// Some linear predictor exceeded [`super::ETA_MAX`] and was clamped.
    pub eta_clamped: bool,
    pub line_search_failed: bool,
    pub covariance_method: CovarianceMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub alpha: f64,
    pub coef_names: Vec<String>,
    pub beta_hat: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub std_errors: Vec<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub n_iter: usize,
    pub diagnostics: FitDiagnostics,
}

impl FitResult {
    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        let p = self.beta_hat.len();
        DMatrix::from_fn(p, p, |i, j| self.covariance[i][j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceEstimate {
    pub matrix: DMatrix<f64>,
    pub pseudo_inverse: bool,
}

fn check_rank(design: &DMatrix<f64>) -> Result<()> {
    let cols = design.ncols();
    let sv = design.clone().svd(false, false).singular_values;
    let max = sv.iter().copied().fold(0.0, f64::max);
    let tol = max * design.nrows().max(cols) as f64 * f64::EPSILON * 16.0;
    let rank = sv.iter().filter(|&&s| s > tol).count();
    if rank < cols || max == 0.0 {
        return Err(MbqrError::RankDeficient {
            rank,
            columns: cols,
        });
    }
    Ok(())
}

/// Poisson log-link mean regression by iteratively reweighted least
/// squares, with optional offset. Used to start the quantile fit.
pub fn irls_poisson(
    design: &DMatrix<f64>,
    y: &[u64],
    offset: Option<&[f64]>,
) -> Result<DVector<f64>> {
    let n = y.len();
    let p = design.ncols();
    let off = |i: usize| offset.map_or(0.0, |o| o[i]);
    let mut eta: Vec<f64> = y.iter().map(|&v| (v as f64 + 0.5).ln()).collect();
    let mut beta = DVector::zeros(p);
    for iter in 0..100 {
        let mut xtwx = DMatrix::zeros(p, p);
        let mut xtwz = DVector::zeros(p);
        for i in 0..n {
            let mu = eta[i].min(super::ETA_MAX).exp();
            let z = eta[i] - off(i) + (y[i] as f64 - mu) / mu;
            for j in 0..p {
                let wx = mu * design[(i, j)];
                xtwz[j] += wx * z;
                for k in 0..=j {
                    xtwx[(j, k)] += wx * design[(i, k)];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                xtwx[(k, j)] = xtwx[(j, k)];
            }
        }
        let next = xtwx
            .cholesky()
            .ok_or(MbqrError::RankDeficient {
                rank: 0,
                columns: p,
            })?
            .solve(&xtwz);
        let change = (&next - &beta).amax();
        let scale = 1.0 + next.amax();
        beta = next;
        let lin = design * &beta;
        for i in 0..n {
            eta[i] = lin[i] + off(i);
        }
        if iter > 0 && change <= 1e-10 * scale {
            break;
        }
    }
    Ok(beta)
}

fn offsets(spec: &QuantileModelSpec, data: &Dataset) -> Option<Vec<f64>> {
    match spec.exposure_mode {
        ExposureMode::None => None,
        _ => data
            .exposure
            .as_ref()
            .map(|e| e.iter().map(|v| v.ln()).collect()),
    }
}

fn starting_point(model: &Model, spec: &QuantileModelSpec, data: &Dataset) -> Result<DVector<f64>> {
    let p = model.n_coef();
    let mut candidates = Vec::new();
    if let Ok(b) = irls_poisson(&model.design, &data.y, offsets(spec, data).as_deref()) {
        candidates.push(b);
    }
    candidates.push(DVector::zeros(p));
    if spec.intercept {
        for c in [-1.0, -3.0, -10.0] {
            let mut b = DVector::zeros(p);
            b[0] = c;
            candidates.push(b);
        }
    }
    candidates
        .into_iter()
        .find(|b| b.iter().all(|v| v.is_finite()) && model.evaluate(b, false).is_some())
        .ok_or_else(|| MbqrError::InvalidStart("no candidate start gives finite likelihood".into()))
}

fn inverse_spd(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.inverse())
}

struct Optimum {
    beta: DVector<f64>,
    eval: Evaluation,
    converged: bool,
    n_iter: usize,
    line_search_failed: bool,
    clamped: bool,
}

fn bfgs(model: &Model, start: DVector<f64>, settings: &FitSettings) -> Result<Optimum> {
    let p = model.n_coef();
    let mut beta = start;
    let mut ev = model
        .evaluate(&beta, true)
        .ok_or_else(|| MbqrError::InvalidStart("parameter outside the family domain".into()))?;
    let fisher_inverse = |ev: &Evaluation| {
        inverse_spd(&ev.fisher)
            .unwrap_or_else(|| DMatrix::identity(p, p) / (1.0 + ev.fisher.amax()))
    };
    let mut h = fisher_inverse(&ev);
    let mut clamped = ev.clamped;
    let mut converged = false;
    let mut line_search_failed = false;
    let mut n_iter = 0;
    while n_iter < settings.max_iter {
        if ev.grad.amax() < settings.grad_tol * (1.0 + ev.ll.abs()) {
            converged = true;
            break;
        }
        n_iter += 1;
        let mut dir = &h * &ev.grad;
        let mut slope = ev.grad.dot(&dir);
        if !(slope > 0.0) {
            let fresh = model.evaluate(&beta, true).expect("current point is valid");
            h = fisher_inverse(&fresh);
            dir = &h * &ev.grad;
            slope = ev.grad.dot(&dir);
        }
        // Below this the loglik difference is rounding noise and only the
        // gradient can tell whether a step helps.
        let noise = 1e-12 * (1.0 + ev.ll.abs());
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let cand = &beta + &dir * t;
            if cand == beta {
                break;
            }
            if let Some(e) = model.evaluate(&cand, false) {
                let sufficient = e.ll >= ev.ll + 1e-4 * t * slope;
                let flat =
                    t * slope <= noise && e.ll >= ev.ll - noise && e.grad.amax() < ev.grad.amax();
                if sufficient || flat {
                    accepted = Some((cand, e));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((next, next_ev)) = accepted else {
            line_search_failed = true;
            break;
        };
        clamped |= next_ev.clamped;
        let s = &next - &beta;
        // curvature pair for the minimisation of -loglik
        let yv = &ev.grad - &next_ev.grad;
        let sy = s.dot(&yv);
        if sy > 1e-12 * s.norm() * yv.norm() {
            let rho = 1.0 / sy;
            let hy = &h * &yv;
            let yhy = yv.dot(&hy);
            h += (&s * s.transpose()) * (rho * rho * yhy + rho)
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
        }
        beta = next;
        ev = next_ev;
    }
    if !converged && !line_search_failed && ev.grad.amax() < settings.grad_tol * (1.0 + ev.ll.abs())
    {
        converged = true;
    }
    Ok(Optimum {
        beta,
        eval: ev,
        converged,
        n_iter,
        line_search_failed,
        clamped,
    })
}

fn covariance_at(model: &Model, beta: &DVector<f64>) -> Result<CovarianceEstimate> {
    let p = model.n_coef();
    let mut hess = DMatrix::zeros(p, p);
    for j in 0..p {
        let step = 1e-5 * (1.0 + beta[j].abs());
        let mut up = beta.clone();
        let mut dn = beta.clone();
        up[j] += step;
        dn[j] -= step;
        let gu = model.evaluate(&up, false);
        let gd = model.evaluate(&dn, false);
        let (Some(gu), Some(gd)) = (gu, gd) else {
            return Err(MbqrError::InvalidStart(
                "Hessian stencil leaves the parameter domain".into(),
            ));
        };
        let col = (gu.grad - gd.grad) / (2.0 * step);
        hess.set_column(j, &col);
    }
    let info = -(&hess + hess.transpose()) * 0.5;
    if let Some(inv) = inverse_spd(&info) {
        return Ok(CovarianceEstimate {
            matrix: symmetrize(inv),
            pseudo_inverse: false,
        });
    }
    let pinv = info
        .svd(true, true)
        .pseudo_inverse(1e-12)
        .map_err(|e| MbqrError::InvalidSpec(e.to_string()))?;
    Ok(CovarianceEstimate {
        matrix: symmetrize(pinv),
        pseudo_inverse: true,
    })
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Inverse of the negative numerical Hessian of the log-likelihood at
/// `beta` (central differences of the analytic gradient, step
/// `1e-5 (1 + |beta_j|)`).
pub fn covariance(
    spec: &QuantileModelSpec,
    data: &Dataset,
    beta: &[f64],
) -> Result<CovarianceEstimate> {
    let model = Model::new(spec, data)?;
    if beta.len() != model.n_coef() {
        return Err(MbqrError::InvalidSpec(format!(
            "expected {} coefficients, got {}",
            model.n_coef(),
            beta.len()
        )));
    }
    covariance_at(&model, &DVector::from_column_slice(beta))
}

fn bootstrap_covariance(
    model: &Model,
    spec: &QuantileModelSpec,
    data: &Dataset,
    beta: &DVector<f64>,
    replicates: usize,
    settings: &FitSettings,
) -> Result<(DMatrix<f64>, usize)> {
    let thetas = model
        .thetas(beta)
        .ok_or_else(|| MbqrError::InvalidStart("fitted parameters outside the domain".into()))?;
    let families = thetas
        .iter()
        .map(|&t| spec.family_shape.with_param(t))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let inner = FitSettings {
        bootstrap: None,
        ..settings.clone()
    };
    let init: Vec<f64> = beta.iter().copied().collect();
    let mut draws: Vec<DVector<f64>> = Vec::with_capacity(replicates);
    let mut failed = 0;
    for b in 0..replicates {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed.wrapping_add(b as u64));
        let y = families
            .iter()
            .map(|f| f.draw_discrete(&mut rng))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let resampled = Dataset { y, ..data.clone() };
        match fit(spec, &resampled, Some(&init), &inner) {
            Ok(r) if r.converged => draws.push(DVector::from_vec(r.beta_hat)),
            _ => failed += 1,
        }
    }
    let p = beta.len();
    if draws.len() < 2 {
        return Err(MbqrError::NotConverged(
            "estimate a bootstrap covariance".into(),
        ));
    }
    let mean = draws.iter().fold(DVector::zeros(p), |acc, d| acc + d) / draws.len() as f64;
    let mut cov = DMatrix::zeros(p, p);
    for d in &draws {
        let c = d - &mean;
        cov += &c * c.transpose();
    }
    Ok((cov / (draws.len() - 1) as f64, failed))
}

/// Maximum-likelihood fit of the quantile regression.
///
/// Starts from `init` or from a Poisson mean regression, then runs BFGS
/// with Armijo backtracking, the inverse Fisher information as the initial
/// inverse Hessian. Parameters leaving the family domain count as a failed
/// step. Non-convergence is reported through `converged`, not as an error.
pub fn fit(
    spec: &QuantileModelSpec,
    data: &Dataset,
    init: Option<&[f64]>,
    settings: &FitSettings,
) -> Result<FitResult> {
    let model = Model::new(spec, data)?;
    check_rank(&model.design)?;
    let start = match init {
        Some(b) if b.len() == model.n_coef() => DVector::from_column_slice(b),
        Some(b) => {
            return Err(MbqrError::InvalidSpec(format!(
                "initial value has {} coefficients, expected {}",
                b.len(),
                model.n_coef()
            )))
        }
        None => starting_point(&model, spec, data)?,
    };
    let opt = bfgs(&model, start, settings)?;
    let (cov, method) = match settings.bootstrap {
        Some(replicates) => {
            let (m, failed) =
                bootstrap_covariance(&model, spec, data, &opt.beta, replicates, settings)?;
            (m, CovarianceMethod::Bootstrap { replicates, failed })
        }
        None => {
            let est = covariance_at(&model, &opt.beta)?;
            let method = if est.pseudo_inverse {
                CovarianceMethod::PseudoInverse
            } else {
                CovarianceMethod::ObservedInformation
            };
            (est.matrix, method)
        }
    };
    let p = model.n_coef();
    Ok(FitResult {
        alpha: spec.alpha,
        coef_names: spec.coef_names(),
        beta_hat: opt.beta.iter().copied().collect(),
        covariance: (0..p)
            .map(|i| (0..p).map(|j| cov[(i, j)]).collect())
            .collect(),
        std_errors: (0..p).map(|i| cov[(i, i)].max(0.0).sqrt()).collect(),
        loglik: opt.eval.ll,
        converged: opt.converged,
        n_iter: opt.n_iter,
        diagnostics: FitDiagnostics {
            grad_sup_norm: opt.eval.grad.amax(),
            eta_clamped: opt.clamped,
            line_search_failed: opt.line_search_failed,
            covariance_method: method,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::countdist::{CountFamily, FamilyShape};

    fn intercept_data(y: Vec<u64>) -> Dataset {
        let n = y.len();
        Dataset::new(DMatrix::zeros(n, 0), y, None).unwrap()
    }

    #[test]
    fn irls_matches_closed_form_intercept() {
        let y = vec![1, 4, 2, 0, 3];
        let design = DMatrix::from_element(5, 1, 1.0);
        let b = irls_poisson(&design, &y, None).unwrap();
        assert!((b[0] - 2f64.ln()).abs() < 1e-10);
    }

    #[test]
    fn intercept_only_fit_hits_continuous_median_of_sample_mean() {
        let y = vec![3, 5, 1, 4, 4, 2, 7, 3];
        let mean = y.iter().sum::<u64>() as f64 / y.len() as f64;
        let spec = QuantileModelSpec::new(0.5, FamilyShape::Poisson, vec![]).unwrap();
        let r = fit(&spec, &intercept_data(y), None, &FitSettings::default()).unwrap();
        assert!(r.converged);
        let median = CountFamily::poisson(mean)
            .unwrap()
            .continuous_quantile(0.5)
            .unwrap();
        assert!(
            (r.beta_hat[0].exp() - median).abs() < 1e-7 * median,
            "{} vs {median}",
            r.beta_hat[0].exp()
        );
    }

    #[test]
    fn rank_deficiency_is_an_error() {
        let x = DMatrix::from_column_slice(4, 2, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0]);
        let data = Dataset::new(x, vec![1, 2, 3, 4], None).unwrap();
        let spec = QuantileModelSpec::new(0.5, FamilyShape::Poisson, vec!["a".into(), "b".into()])
            .unwrap();
        assert!(matches!(
            fit(&spec, &data, None, &FitSettings::default()),
            Err(MbqrError::RankDeficient { .. })
        ));
    }

    #[test]
    fn covariance_is_symmetric() {
        let x = DMatrix::from_column_slice(8, 1, &[0.1, 0.5, 0.9, 1.3, 0.2, 0.7, 1.1, 1.5]);
        let data = Dataset::new(x, vec![1, 2, 3, 5, 0, 2, 4, 6], None).unwrap();
        let spec = QuantileModelSpec::new(0.5, FamilyShape::Poisson, vec!["x".into()]).unwrap();
        let r = fit(&spec, &data, None, &FitSettings::default()).unwrap();
        assert!(r.converged);
        assert_eq!(r.covariance[0][1], r.covariance[1][0]);
        assert!(r.std_errors.iter().all(|s| *s > 0.0));
    }

    #[test]
    fn binomial_and_negbin_fits_converge() {
        let y = vec![2, 5, 3, 4, 6, 1, 3, 4];
        for shape in [
            FamilyShape::Binomial { n: 10 },
            FamilyShape::NegBinomial { r: 3.0 },
        ] {
            let spec = QuantileModelSpec::new(0.5, shape, vec![]).unwrap();
            let r = fit(
                &spec,
                &intercept_data(y.clone()),
                None,
                &FitSettings::default(),
            )
            .unwrap();
            assert!(r.converged, "{shape:?}");
        }
    }

    #[test]
    fn bootstrap_is_deterministic() {
        let spec = QuantileModelSpec::new(0.5, FamilyShape::Poisson, vec![]).unwrap();
        let settings = FitSettings {
            bootstrap: Some(20),
            seed: 11,
            ..FitSettings::default()
        };
        let data = intercept_data(vec![3, 5, 1, 4, 4, 2, 7, 3, 2, 6]);
        let a = fit(&spec, &data, None, &settings).unwrap();
        let b = fit(&spec, &data, None, &settings).unwrap();
        assert_eq!(a, b);
        assert!(matches!(
            a.diagnostics.covariance_method,
            CovarianceMethod::Bootstrap { replicates: 20, .. }
        ));
        let asym = fit(&spec, &data, None, &FitSettings::default()).unwrap();
        let ratio = a.std_errors[0] / asym.std_errors[0];
        assert!(ratio > 0.5 && ratio < 2.0, "{ratio}");
    }
}
