//! Real-valued special functions: log-gamma, the regularized incomplete
//! gamma and beta functions, and their inverses in the integration limit.
//!
//! Everything here is a pure function of its arguments.

mod beta;
mod gamma;
mod normal;

pub use beta::{
    beta_inc, beta_inc_complement, beta_inc_inv, beta_inc_inv_with, beta_inc_inv_xy, beta_inc_xy,
    ln_beta, ln_beta_density,
};
pub use gamma::{
    gamma_p, gamma_p_inv, gamma_p_inv_with, gamma_q, gamma_q_inv, gamma_q_inv_with,
    ln_gamma_density, log_gamma,
};
pub use normal::normal_quantile;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecialError {
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("no convergence after {iterations} iterations (bracket [{lo}, {hi}])")]
    NoConvergence { iterations: usize, lo: f64, hi: f64 },
}

pub type Result<T> = std::result::Result<T, SpecialError>;

/// Tolerance settings for the iterative inverses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub rel_tol: f64,
    /// Cap on root-finding iterations.
    pub max_iter: usize,
    /// When set, asking for the inverse at probability 1 of an unbounded
    /// distribution is an error instead of returning `+inf`.
    pub strict: bool,
}

impl Default for Accuracy {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: 200,
            strict: false,
        }
    }
}

impl Accuracy {
    pub fn new(rel_tol: f64, max_iter: usize) -> Result<Self> {
        if !(rel_tol > 0.0) || max_iter == 0 {
            return Err(SpecialError::Domain(format!(
                "accuracy requires rel_tol > 0 and max_iter >= 1, got {rel_tol} / {max_iter}"
            )));
        }
        Ok(Self {
            rel_tol,
            max_iter,
            strict: false,
        })
    }

    pub fn strict(mut self) -> Self {
        self.strict = true;
        self
    }
}

/// Term cap for series and continued fractions. These converge in
/// O(sqrt(max parameter)) steps, so the cap only guards against NaN loops.
pub(crate) fn term_cap(scale: f64) -> usize {
    let extra = if scale.is_finite() {
        40.0 * scale.max(1.0).sqrt()
    } else {
        0.0
    };
    (500.0 + extra).min(1e7) as usize
}

/// `ln(1 + t) - t`, accurate for small `t`.
pub(crate) fn log1pmx(t: f64) -> f64 {
    if t.abs() < 0.25 {
        // -t^2/2 + t^3/3 - ...
        let mut term = -t;
        let mut sum = 0.0;
        let mut k = 2.0;
        loop {
            term *= -t;
            let add = term / k;
            sum += add;
            if add.abs() <= sum.abs() * 1e-17 {
                break;
            }
            k += 1.0;
        }
        -sum
    } else {
        t.ln_1p() - t
    }
}
