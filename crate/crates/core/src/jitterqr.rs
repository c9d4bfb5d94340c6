//! Jittering baseline for count quantile regression.
//!
//! Counts are made continuous by adding Uniform(0, 1) noise, `z = y + u`.
//! The continuous quantile is modelled as `alpha + exp(x' beta)`, which after
//! the log transform `log(max(z - alpha, zeta))` is linear in `beta` and is
//! fitted by minimising the check loss. Estimates are averaged over several
//! independent jitterings; integer quantiles are recovered as
//! `ceil(q - 1)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum JitterError {
    #[error("invalid jitter settings: {0}")]
    InvalidSettings(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("simplex search did not converge (best loss {loss} at {best:?})")]
    NoConvergence { best: Vec<f64>, loss: f64 },
}

pub type Result<T> = std::result::Result<T, JitterError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterSettings {
    pub m_replicates: usize,
    /// Floor applied to `z - alpha` before taking logs.
    pub zeta: f64,
    /// Jittering `r` uses seed `seed + r`.
    pub seed: u64,
}

impl Default for JitterSettings {
    fn default() -> Self {
        Self {
            m_replicates: 50,
            zeta: 1e-5,
            seed: 0,
        }
    }
}

impl JitterSettings {
    pub fn validate(&self) -> Result<()> {
        if self.m_replicates == 0 {
            return Err(JitterError::InvalidSettings(
                "m_replicates must be at least 1".into(),
            ));
        }
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(JitterError::InvalidSettings(format!(
                "zeta must lie in (0, 1), got {}",
                self.zeta
            )));
        }
        Ok(())
    }
}

/// `z_i = y_i + u_i` with `u_i` uniform on (0, 1).
pub fn jitter(y: &[u64], seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    y.iter()
        .map(|&v| {
            let u = loop {
                let u: f64 = rng.random();
                if u > 0.0 {
                    break u;
                }
            };
            v as f64 + u
        })
        .collect()
}

/// `u (alpha - 1{u < 0})`
pub fn check_loss(u: f64, alpha: f64) -> f64 {
    if u < 0.0 {
        u * (alpha - 1.0)
    } else {
        u * alpha
    }
}

/// Integer quantile from a continuous quantile of the jittered variable.
pub fn dejitter_quantile(q_continuous: f64) -> i64 {
    (q_continuous - 1.0).ceil() as i64
}

/// The continuous quantile `alpha + exp(row' beta)` of the jittered model.
pub fn jittered_quantile(row: &[f64], beta: &[f64], alpha: f64) -> f64 {
    let eta: f64 = row.iter().zip(beta).map(|(x, b)| x * b).sum();
    alpha + eta.exp()
}

/// Transformed responses `log(max(z - alpha, zeta))`.
pub fn transform(z: &[f64], alpha: f64, zeta: f64) -> Vec<f64> {
    z.iter().map(|&v| (v - alpha).max(zeta).ln()).collect()
}

/// Empirical check loss of `w - design * beta`.
pub fn empirical_loss(design: &DMatrix<f64>, w: &[f64], beta: &[f64], alpha: f64) -> f64 {
    let p = beta.len();
    (0..w.len())
        .map(|i| {
            let fit: f64 = (0..p).map(|j| design[(i, j)] * beta[j]).sum();
            check_loss(w[i] - fit, alpha)
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
}

const NM_MAX_EVALS: usize = 20_000;

/// Nelder-Mead minimisation from `start` with initial edge lengths `step`,
/// restarted around the incumbent until a restart no longer improves it.
pub fn nelder_mead<F: FnMut(&[f64]) -> f64>(
    mut f: F,
    start: &[f64],
    step: &[f64],
) -> Result<SimplexResult> {
    let n = start.len();
    if n == 0 {
        return Ok(SimplexResult {
            x: Vec::new(),
            value: f(start),
            evaluations: 1,
        });
    }
    let mut best = start.to_vec();
    let mut best_val = f(&best);
    let mut evals = 1;
    let mut scale: Vec<f64> = step.to_vec();
    for _restart in 0..20 {
        let (x, v, used, converged) =
            nelder_mead_once(&mut f, &best, best_val, &scale, NM_MAX_EVALS)?;
        evals += used;
        if !converged {
            return Err(JitterError::NoConvergence { best: x, loss: v });
        }
        let improved = v < best_val - 1e-12 * (1.0 + best_val.abs());
        best = x;
        best_val = v.min(best_val);
        if !improved {
            break;
        }
        scale.iter_mut().for_each(|s| *s *= 0.5);
    }
    Ok(SimplexResult {
        x: best,
        value: best_val,
        evaluations: evals,
    })
}

fn nelder_mead_once<F: FnMut(&[f64]) -> f64>(
    f: &mut F,
    start: &[f64],
    start_val: f64,
    step: &[f64],
    max_evals: usize,
) -> Result<(Vec<f64>, f64, usize, bool)> {
    let n = start.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((start.to_vec(), start_val));
    let mut evals = 0;
    for j in 0..n {
        let mut v = start.to_vec();
        v[j] += step[j];
        let fv = f(&v);
        evals += 1;
        simplex.push((v, fv));
    }
    let point = |c: &[f64], d: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(d).map(|(a, b)| a + t * (b - a)).collect()
    };
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let lo = simplex[0].1;
        let hi = simplex[n].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(v, _)| v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (hi - lo) <= 1e-12 * (1.0 + lo.abs()) && size <= 1e-9 {
            let (x, v) = simplex.swap_remove(0);
            return Ok((x, v, evals, true));
        }
        if evals >= max_evals {
            let (x, v) = simplex.swap_remove(0);
            return Ok((x, v, evals, false));
        }
        let mut centroid = vec![0.0; n];
        for (v, _) in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / n as f64;
            }
        }
        let worst = simplex[n].0.clone();
        let reflected = point(&centroid, &worst, -1.0);
        let fr = f(&reflected);
        evals += 1;
        if fr < lo {
            let expanded = point(&centroid, &worst, -2.0);
            let fe = f(&expanded);
            evals += 1;
            simplex[n] = if fe < fr {
                (expanded, fe)
            } else {
                (reflected, fr)
            };
            continue;
        }
        if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
            continue;
        }
        let (contracted, fc) = if fr < hi {
            let c = point(&centroid, &reflected, 0.5);
            let fc = f(&c);
            (c, fc)
        } else {
            let c = point(&centroid, &worst, 0.5);
            let fc = f(&c);
            (c, fc)
        };
        evals += 1;
        if fc < hi.min(fr) {
            simplex[n] = (contracted, fc);
            continue;
        }
        let best = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let shrunk = point(&best, &entry.0, 0.5);
            let fs = f(&shrunk);
            *entry = (shrunk, fs);
        }
        evals += n;
    }
}

fn least_squares(design: &DMatrix<f64>, w: &[f64]) -> Result<DVector<f64>> {
    let rhs = DVector::from_column_slice(w);
    design
        .clone()
        .svd(true, true)
        .solve(&rhs, 1e-12)
        .map_err(|e| JitterError::InvalidInput(e.to_string()))
}

/// Check-loss fit to one jittered sample, started from least squares on the
/// transformed responses.
pub fn fit_check_loss(
    design: &DMatrix<f64>,
    z: &[f64],
    alpha: f64,
    zeta: f64,
) -> Result<SimplexResult> {
    if design.nrows() != z.len() || z.is_empty() {
        return Err(JitterError::InvalidInput(format!(
            "design has {} rows for {} responses",
            design.nrows(),
            z.len()
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(JitterError::InvalidInput(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let w = transform(z, alpha, zeta);
    let start = least_squares(design, &w)?;
    let step: Vec<f64> = start.iter().map(|b| 0.1 * b.abs().max(1.0)).collect();
    let start: Vec<f64> = start.iter().copied().collect();
    nelder_mead(|b| empirical_loss(design, &w, b, alpha), &start, &step)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JitterFit {
    pub alpha: f64,
    /// Average of the per-jitter estimates.
    pub beta: Vec<f64>,
    pub replicate_betas: Vec<Vec<f64>>,
}

/// Jittered quantile regression: `m_replicates` jitterings of `y`, each
/// fitted by [`fit_check_loss`], with the estimates averaged.
pub fn fit_jittered(
    design: &DMatrix<f64>,
    y: &[u64],
    alpha: f64,
    settings: &JitterSettings,
) -> Result<JitterFit> {
    settings.validate()?;
    let mut replicate_betas = Vec::with_capacity(settings.m_replicates);
    for r in 0..settings.m_replicates {
        let z = jitter(y, settings.seed.wrapping_add(r as u64));
        replicate_betas.push(fit_check_loss(design, &z, alpha, settings.zeta)?.x);
    }
    let p = design.ncols();
    let m = replicate_betas.len() as f64;
    let beta = (0..p)
        .map(|j| replicate_betas.iter().map(|b| b[j]).sum::<f64>() / m)
        .collect();
    Ok(JitterFit {
        alpha,
        beta,
        replicate_betas,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jitter_keeps_the_integer_part() {
        let y = vec![0, 3, 7, 0, 12];
        let z = jitter(&y, 4);
        assert!(z
            .iter()
            .zip(&y)
            .all(|(z, &y)| z.floor() as u64 == y && *z > y as f64));
        assert_eq!(z, jitter(&y, 4));
        assert_ne!(z, jitter(&y, 5));
    }

    #[test]
    fn dejitter_anchors() {
        assert_eq!(dejitter_quantile(2.3), 2);
        assert_eq!(dejitter_quantile(3.0), 2);
        assert_eq!(dejitter_quantile(0.4), 0);
    }

    #[test]
    fn check_loss_is_asymmetric() {
        assert_eq!(check_loss(2.0, 0.25), 0.5);
        assert_eq!(check_loss(-2.0, 0.25), 1.5);
        assert_eq!(check_loss(0.0, 0.7), 0.0);
    }

    #[test]
    fn constant_shift_is_recovered_exactly() {
        // z - alpha = c everywhere, so log c fits with zero loss
        let alpha = 0.3;
        let c: f64 = 2.5;
        let z = vec![alpha + c; 9];
        let design = DMatrix::from_element(9, 1, 1.0);
        let r = fit_check_loss(&design, &z, alpha, 1e-5).unwrap();
        assert!((r.x[0] - c.ln()).abs() < 1e-8);
        assert!(r.value < 1e-8);
    }

    #[test]
    fn nelder_mead_finds_quadratic_minimum() {
        let r = nelder_mead(
            |b| (b[0] - 1.0).powi(2) + 3.0 * (b[1] + 2.0).powi(2),
            &[0.0, 0.0],
            &[0.5, 0.5],
        )
        .unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn settings_are_validated() {
        let mut s = JitterSettings {
            m_replicates: 0,
            ..JitterSettings::default()
        };
        assert!(s.validate().is_err());
        s = JitterSettings {
            zeta: 1.0,
            ..JitterSettings::default()
        };
        assert!(s.validate().is_err());
    }
}
