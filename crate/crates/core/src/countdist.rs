//! Discrete Poisson, Binomial and Negative Binomial distributions and their
//! continuous interpolations.
//!
//! Every family has a CDF of the form `k(floor(x), theta)` with `k`
//! continuous in its first argument. Dropping the floor gives a continuous
//! random variable on `(-1, support_hi]` whose CDF agrees with the discrete
//! one at every integer, so that the discrete variable is the ceiling of the
//! continuous one:
//!
//! | family | continuous CDF |
//! |---|---|
//! | Poisson(lambda) | `Q(x + 1, lambda)` |
//! | Binomial(n, p) | `I_{1-p}(n - x, x + 1)` |
//! | NegBinomial(r, p) | `I_{1-p}(r, x + 1)` |
//!
//! For the negative binomial, `p` is the probability of a *failure*: the
//! variable counts failures before the `r`-th success, each trial succeeding
//! with probability `1 - p`. That is the orientation in which the formula
//! above matches the discrete CDF.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::specfun::{self, SpecialError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CountDistError {
    #[error("invalid distribution parameter: {0}")]
    InvalidParameter(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error(transparent)]
    Special(#[from] SpecialError),
}

pub type Result<T> = std::result::Result<T, CountDistError>;

/// A fully specified count distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CountFamily {
    Poisson {
        lambda: f64,
    },
    Binomial {
        n: u64,
        p: f64,
    },
    /// `p` is the failure probability; see the module docs.
    NegBinomial {
        r: f64,
        p: f64,
    },
}

/// The parameters of a family that are held fixed while the remaining one
/// is driven through the quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FamilyShape {
    Poisson,
    Binomial { n: u64 },
    NegBinomial { r: f64 },
}

fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(CountDistError::InvalidParameter(format!(
            "p must lie in (0, 1), got {p}"
        )))
    }
}

fn check_level(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(CountDistError::Domain(format!(
            "quantile level must lie in (0, 1), got {alpha}"
        )))
    }
}

impl CountFamily {
    pub fn poisson(lambda: f64) -> Result<Self> {
        Self::Poisson { lambda }.validated()
    }

    pub fn binomial(n: u64, p: f64) -> Result<Self> {
        Self::Binomial { n, p }.validated()
    }

    pub fn neg_binomial(r: f64, p: f64) -> Result<Self> {
        Self::NegBinomial { r, p }.validated()
    }

    pub fn validated(self) -> Result<Self> {
        match self {
            Self::Poisson { lambda } => {
                if !(lambda > 0.0) || lambda.is_infinite() {
                    return Err(CountDistError::InvalidParameter(format!(
                        "lambda must be positive and finite, got {lambda}"
                    )));
                }
            }
            Self::Binomial { n, p } => {
                if n == 0 {
                    return Err(CountDistError::InvalidParameter(
                        "n must be at least 1".into(),
                    ));
                }
                check_probability(p)?;
            }
            Self::NegBinomial { r, p } => {
                if !(r > 0.0) || r.is_infinite() {
                    return Err(CountDistError::InvalidParameter(format!(
                        "r must be positive and finite, got {r}"
                    )));
                }
                check_probability(p)?;
            }
        }
        Ok(self)
    }

    pub fn shape(&self) -> FamilyShape {
        match *self {
            Self::Poisson { .. } => FamilyShape::Poisson,
            Self::Binomial { n, .. } => FamilyShape::Binomial { n },
            Self::NegBinomial { r, .. } => FamilyShape::NegBinomial { r },
        }
    }

    /// The parameter that quantile regression drives (lambda or p).
    pub fn param(&self) -> f64 {
        match *self {
            Self::Poisson { lambda } => lambda,
            Self::Binomial { p, .. } | Self::NegBinomial { p, .. } => p,
        }
    }

    /// Upper end of the continuous support (`n` for the binomial).
    pub fn support_hi(&self) -> f64 {
        match *self {
            Self::Binomial { n, .. } => n as f64,
            _ => f64::INFINITY,
        }
    }

    /// Lower end of the continuous support (excluded).
    pub fn support_lo(&self) -> f64 {
        -1.0
    }

    pub fn mean(&self) -> f64 {
        match *self {
            Self::Poisson { lambda } => lambda,
            Self::Binomial { n, p } => n as f64 * p,
            Self::NegBinomial { r, p } => r * p / (1.0 - p),
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Poisson { lambda } => lambda,
            Self::Binomial { n, p } => n as f64 * p * (1.0 - p),
            Self::NegBinomial { r, p } => r * p / ((1.0 - p) * (1.0 - p)),
        }
    }

    pub fn ln_pmf(&self, k: u64) -> f64 {
        let kf = k as f64;
        match *self {
            Self::Poisson { lambda } => {
                kf * lambda.ln() - lambda - specfun::log_gamma(kf + 1.0).unwrap_or(0.0)
            }
            Self::Binomial { n, p } => {
                if k > n {
                    return f64::NEG_INFINITY;
                }
                let nf = n as f64;
                // ln C(n, k) = -ln(n + 1) - ln B(k + 1, n - k + 1)
                let ln_choose = -(nf + 1.0).ln() - specfun::ln_beta(kf + 1.0, nf - kf + 1.0);
                ln_choose + kf * p.ln() + (nf - kf) * (-p).ln_1p()
            }
            Self::NegBinomial { r, p } => {
                // C(k + r - 1, k) = 1 / (k B(k, r)) for k >= 1
                let ln_choose = if k == 0 {
                    0.0
                } else {
                    -kf.ln() - specfun::ln_beta(kf, r)
                };
                ln_choose + r * (-p).ln_1p() + kf * p.ln()
            }
        }
    }

    /// Probability mass at `k`, evaluated in log space.
    pub fn discrete_pmf(&self, k: u64) -> f64 {
        self.ln_pmf(k).exp()
    }

    /// Discrete CDF through the incomplete gamma / beta representation.
    pub fn discrete_cdf(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        self.continuous_cdf_unchecked(k as f64)
    }

    /// CDF of the continuous interpolation at real `x`.
    pub fn continuous_cdf(&self, x: f64) -> Result<f64> {
        if x.is_nan() {
            return Err(CountDistError::Domain(
                "continuous CDF evaluated at NaN".into(),
            ));
        }
        Ok(self.continuous_cdf_unchecked(x))
    }

    pub(crate) fn continuous_cdf_unchecked(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        if x >= self.support_hi() {
            return 1.0;
        }
        match *self {
            Self::Poisson { lambda } => specfun::gamma_q(x + 1.0, lambda).unwrap_or(f64::NAN),
            Self::Binomial { n, p } => beta_lower(n as f64 - x, x + 1.0, p),
            Self::NegBinomial { r, p } => beta_lower(r, x + 1.0, p),
        }
    }

    /// `(dF/dx, dF/dtheta)` of the continuous CDF at `x`, where theta is
    /// [`CountFamily::param`]. The x-derivative is a central difference with
    /// step `1e-6 (1 + |x|)`; the parameter derivative is analytic.
    pub fn cdf_sensitivities(&self, x: f64) -> (f64, f64) {
        let h = 1e-6 * (1.0 + x.abs());
        let hi = self.support_hi();
        let (lo_pt, hi_pt) = if x + h >= hi {
            (x - 2.0 * h, x)
        } else {
            (x - h, x + h)
        };
        let d_x = (self.continuous_cdf_unchecked(hi_pt) - self.continuous_cdf_unchecked(lo_pt))
            / (hi_pt - lo_pt);
        let d_theta = match *self {
            // dQ(a, lambda)/dlambda = -lambda^{a-1} e^{-lambda} / Gamma(a)
            Self::Poisson { lambda } => -specfun::ln_gamma_density(x + 1.0, lambda).exp(),
            // d/dp I_{1-p}(a, b) = -beta density at 1 - p
            Self::Binomial { n, p } => -beta_density(n as f64 - x, x + 1.0, p),
            Self::NegBinomial { r, p } => -beta_density(r, x + 1.0, p),
        };
        (d_x, d_theta)
    }

    /// Inverse of [`CountFamily::continuous_cdf`] in `x`.
    ///
    /// When `alpha` equals the CDF at an integer to within rounding, that
    /// integer is returned exactly.
    pub fn continuous_quantile(&self, alpha: f64) -> Result<f64> {
        check_level(alpha)?;
        let f = |x: f64| self.continuous_cdf_unchecked(x) - alpha;
        let mut lo = -1.0;
        let mut hi = self.support_hi();
        let sd = self.variance().sqrt();
        if hi.is_infinite() {
            hi = self.mean() + 10.0 * sd + 10.0;
            let mut guard = 0;
            while f(hi) < 0.0 {
                lo = hi;
                hi *= 2.0;
                guard += 1;
                if guard > 60 {
                    return Err(CountDistError::Domain(format!(
                        "quantile {alpha} beyond representable range"
                    )));
                }
            }
        }
        let z = specfun::normal_quantile(alpha);
        let mut x =
            (self.mean() + z * sd - 0.5).clamp(lo + 1e-3 * (hi - lo), hi - 1e-3 * (hi - lo));
        let mut converged = false;
        for _ in 0..200 {
            let fx = f(x);
            if fx == 0.0 {
                converged = true;
                break;
            }
            if fx < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let (slope, _) = self.cdf_sensitivities(x);
            let mut next = x - fx / slope;
            let newton_ok = next.is_finite() && next > lo && next < hi && slope > 0.0;
            if !newton_ok {
                next = 0.5 * (lo + hi);
            }
            let step = (next - x).abs();
            x = next;
            if (newton_ok && step <= 1e-14 * (1.0 + x.abs())) || hi - lo <= 1e-15 * (1.0 + hi.abs())
            {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(CountDistError::Special(SpecialError::NoConvergence {
                iterations: 200,
                lo,
                hi,
            }));
        }
        let k = x.round();
        if (x - k).abs() < 1e-8 && k >= 0.0 && k <= self.support_hi() {
            let fk = self.continuous_cdf_unchecked(k);
            if (fk - alpha).abs() <= 4.0 * f64::EPSILON * alpha.max(fk) {
                return Ok(k);
            }
        }
        Ok(x)
    }

    /// The parameter-to-quantile direction of the mapping: the continuous
    /// `alpha`-quantile of this distribution.
    pub fn map_param_to_quantile(&self, alpha: f64) -> Result<f64> {
        self.continuous_quantile(alpha)
    }

    /// One inverse-CDF draw of the continuous variable.
    pub fn draw_continuous<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        loop {
            let u: f64 = rng.random();
            if u > 0.0 {
                return self.continuous_quantile(u);
            }
        }
    }

    /// One draw of the discrete variable, as the ceiling of a continuous draw.
    pub fn draw_discrete<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<u64> {
        Ok(self.draw_continuous(rng)?.ceil().max(0.0) as u64)
    }

    /// Smallest integer `k` with `discrete_cdf(k) >= alpha`, by scanning.
    pub fn discrete_quantile(&self, alpha: f64) -> Result<u64> {
        check_level(alpha)?;
        let mut k = 0i64;
        loop {
            if self.discrete_cdf(k) >= alpha {
                return Ok(k as u64);
            }
            k += 1;
            if k as f64 > self.support_hi() {
                return Ok(self.support_hi() as u64);
            }
        }
    }
}

/// I_{1-p}(a, b) with the complement point p passed exactly.
fn beta_lower(a: f64, b: f64, p: f64) -> f64 {
    specfun::beta_inc_xy(a, b, 1.0 - p, p)
        .map(|(v, _)| v)
        .unwrap_or(f64::NAN)
}

fn beta_density(a: f64, b: f64, p: f64) -> f64 {
    let ln = specfun::ln_beta_density(a, b, 1.0 - p);
    ln.exp()
}

impl FamilyShape {
    pub fn with_param(&self, theta: f64) -> Result<CountFamily> {
        match *self {
            Self::Poisson => CountFamily::poisson(theta),
            Self::Binomial { n } => CountFamily::binomial(n, theta),
            Self::NegBinomial { r } => CountFamily::neg_binomial(r, theta),
        }
    }

    pub fn support_hi(&self) -> f64 {
        match *self {
            Self::Binomial { n } => n as f64,
            _ => f64::INFINITY,
        }
    }

    /// The mapping from a quantile value `q` at level `alpha` to the
    /// parameter whose continuous `alpha`-quantile is `q`:
    /// `continuous_cdf(with_param(theta), q) = alpha`.
    pub fn map_quantile_to_param(&self, q: f64, alpha: f64) -> Result<f64> {
        check_level(alpha)?;
        if !(q > -1.0) || q >= self.support_hi() {
            return Err(CountDistError::Domain(format!(
                "quantile value {q} outside the open support (-1, {})",
                self.support_hi()
            )));
        }
        let theta = match *self {
            // Q(q + 1, lambda) = alpha
            Self::Poisson => specfun::gamma_q_inv(q + 1.0, alpha)?,
            // I_{1-p}(n - q, q + 1) = alpha, p is the complement of the root
            Self::Binomial { n } => specfun::beta_inc_inv_xy(n as f64 - q, q + 1.0, alpha)?.1,
            Self::NegBinomial { r } => specfun::beta_inc_inv_xy(r, q + 1.0, alpha)?.1,
        };
        let valid = match self {
            Self::Poisson => theta > 0.0 && theta.is_finite(),
            _ => theta > 0.0 && theta < 1.0,
        };
        if !valid {
            return Err(CountDistError::Domain(format!(
                "quantile {q} at level {alpha} maps to degenerate parameter {theta}"
            )));
        }
        Ok(theta)
    }
}

/// Draws from a continuous interpolation and the matching discrete draws.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub continuous: Vec<f64>,
    pub discrete: Vec<u64>,
}

/// Inverse-CDF sampling: `continuous_quantile(U)` with U uniform on (0, 1);
/// the discrete draws are the ceilings of the continuous ones.
pub fn sample(family: &CountFamily, seed: u64, count: usize) -> Result<Samples> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let continuous = (0..count)
        .map(|_| family.draw_continuous(&mut rng))
        .collect::<Result<Vec<_>>>()?;
    let discrete = continuous
        .iter()
        .map(|x| x.ceil().max(0.0) as u64)
        .collect();
    Ok(Samples {
        continuous,
        discrete,
    })
}

/// Settings for [`verify_limit_relations`].
#[derive(Debug, Clone, PartialEq)]
pub struct LimitGrid {
    pub lambda: f64,
    /// Binomial `n` (and negative binomial `r`) values, increasing.
    pub sizes: Vec<u64>,
    pub x_grid: Vec<f64>,
    /// `(s, r, p)` points for the negative binomial / binomial identity.
    pub identity_points: Vec<(u64, u64, f64)>,
}

impl LimitGrid {
    /// `x` in {-0.5, 0, 0.5, ..., 15}, sizes 10^2..10^4, (s, r, p) over
    /// {1..5} x {1..5} x {0.2, 0.5, 0.8}.
    pub fn standard(lambda: f64) -> Self {
        let mut identity_points = Vec::new();
        for s in 1..=5 {
            for r in 1..=5 {
                for &p in &[0.2, 0.5, 0.8] {
                    identity_points.push((s, r, p));
                }
            }
        }
        Self {
            lambda,
            sizes: vec![100, 1_000, 10_000],
            x_grid: (0..=31).map(|i| -0.5 + 0.5 * i as f64).collect(),
            identity_points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitReport {
    pub lambda: f64,
    /// `(n, sup_x |F_Binomial(n, lambda/n)(x) - F_Poisson(lambda)(x)|)`.
    pub binomial_gaps: Vec<(u64, f64)>,
    /// `(r, sup_x |F_NegBinomial(r, lambda/r)(x) - F_Poisson(lambda)(x)|)`.
    pub neg_binomial_gaps: Vec<(u64, f64)>,
    /// max over the identity points of `|F_Z(s) - (1 - F_W(r - 1))|`,
    /// W = ContinuousBinomial(s + r, 1 - p).
    pub identity_gap: f64,
    /// Same, against `1 - F_W(r)`; reported for comparison only.
    pub identity_gap_unshifted: f64,
}

impl LimitReport {
    pub fn binomial_decreasing(&self) -> bool {
        self.binomial_gaps.windows(2).all(|w| w[1].1 < w[0].1)
    }

    pub fn neg_binomial_decreasing(&self) -> bool {
        self.neg_binomial_gaps.windows(2).all(|w| w[1].1 < w[0].1)
    }
}

/// Numerically checks the limit and duality relations between the three
/// continuous families.
pub fn verify_limit_relations(grid: &LimitGrid) -> Result<LimitReport> {
    let poisson = CountFamily::poisson(grid.lambda)?;
    let sup_gap = |other: &CountFamily| -> f64 {
        grid.x_grid
            .iter()
            .map(|&x| {
                (other.continuous_cdf_unchecked(x) - poisson.continuous_cdf_unchecked(x)).abs()
            })
            .fold(0.0, f64::max)
    };
    let mut binomial_gaps = Vec::new();
    let mut neg_binomial_gaps = Vec::new();
    for &n in &grid.sizes {
        let nf = n as f64;
        binomial_gaps.push((n, sup_gap(&CountFamily::binomial(n, grid.lambda / nf)?)));
        neg_binomial_gaps.push((
            n,
            sup_gap(&CountFamily::neg_binomial(nf, grid.lambda / nf)?),
        ));
    }
    let mut identity_gap = 0.0f64;
    let mut identity_gap_unshifted = 0.0f64;
    for &(s, r, p) in &grid.identity_points {
        let z = CountFamily::neg_binomial(r as f64, p)?;
        let w = CountFamily::binomial(s + r, 1.0 - p)?;
        let fz = z.continuous_cdf_unchecked(s as f64);
        identity_gap =
            identity_gap.max((fz - (1.0 - w.continuous_cdf_unchecked(r as f64 - 1.0))).abs());
        identity_gap_unshifted =
            identity_gap_unshifted.max((fz - (1.0 - w.continuous_cdf_unchecked(r as f64))).abs());
    }
    Ok(LimitReport {
        lambda: grid.lambda,
        binomial_gaps,
        neg_binomial_gaps,
        identity_gap,
        identity_gap_unshifted,
    })
}
