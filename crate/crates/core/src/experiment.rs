//! Seeded simulation drivers: the quantile-crossing experiment, the
//! monotonicity-in-alpha check and the synthetic disease-mapping fixture.
//!
//! Every replicate draws from its own generator seeded with
//! `base_seed + task_index`, so results do not depend on scheduling.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::countdist::{CountDistError, CountFamily, FamilyShape};
use crate::jitterqr::{self, JitterError, JitterSettings};
use crate::mbqr::{
    self, CrossingReport, Dataset, ExposureMode, FitSettings, MbqrError, QuantileCurve,
    QuantileModelSpec,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] MbqrError),
    #[error(transparent)]
    Jitter(#[from] JitterError),
    #[error(transparent)]
    Dist(#[from] CountDistError),
}

pub type Result<T> = std::result::Result<T, ExperimentError>;

/// `0.05, 0.10, ..., 0.95`
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_replicates: usize,
    pub sample_sizes: Vec<usize>,
    pub alpha_grid: Vec<f64>,
    /// Covariates are `|N(0, covariate_sd)|`.
    pub covariate_sd: f64,
    pub base_seed: u64,
    /// Jitterings averaged per jittered fit.
    pub jitter_replicates: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_replicates: 300,
            sample_sizes: vec![25, 50, 100, 200, 400],
            alpha_grid: default_alpha_grid(),
            covariate_sd: 1.5,
            base_seed: 0,
            jitter_replicates: 50,
        }
    }
}

fn check_grid(alpha_grid: &[f64]) -> Result<()> {
    if alpha_grid.is_empty() {
        return Err(ExperimentError::InvalidConfig("alpha grid is empty".into()));
    }
    if alpha_grid.iter().any(|a| !(*a > 0.0 && *a < 1.0)) {
        return Err(ExperimentError::InvalidConfig(
            "alpha values must lie in (0, 1)".into(),
        ));
    }
    if alpha_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ExperimentError::InvalidConfig(
            "alpha grid must be strictly increasing".into(),
        ));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_replicates == 0 {
            return Err(ExperimentError::InvalidConfig(
                "n_replicates must be at least 1".into(),
            ));
        }
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(ExperimentError::InvalidConfig(
                "sample sizes must be nonempty and positive".into(),
            ));
        }
        if self.sample_sizes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ExperimentError::InvalidConfig(
                "sample sizes must be strictly increasing".into(),
            ));
        }
        check_grid(&self.alpha_grid)?;
        if !(self.covariate_sd > 0.0 && self.covariate_sd.is_finite()) {
            return Err(ExperimentError::InvalidConfig(
                "covariate_sd must be positive".into(),
            ));
        }
        if self.jitter_replicates == 0 {
            return Err(ExperimentError::InvalidConfig(
                "jitter_replicates must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// `n` draws of `x = |N(0, sd)|` and `y ~ Poisson(exp(x))`; single
/// covariate named `x`.
pub fn simulate_poisson_exp(n: usize, covariate_sd: f64, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, covariate_sd)
        .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let xi: f64 = normal.sample(&mut rng).abs();
        let lambda = xi.exp();
        let draw: f64 = Poisson::new(lambda)
            .map_err(|e| ExperimentError::InvalidConfig(e.to_string()))?
            .sample(&mut rng);
        x.push(xi);
        y.push(draw as u64);
    }
    Ok(Dataset::new(DMatrix::from_vec(n, 1, x), y, None)?)
}

/// Counts drawn from the fitted-model family at `beta`: observation `i`
/// has parameter `per_obs_param(spec, x_i' beta, E_i)`. `x` holds the
/// covariate columns (no intercept column).
pub fn simulate_from_model(
    spec: &QuantileModelSpec,
    beta: &[f64],
    x: DMatrix<f64>,
    exposure: Option<Vec<f64>>,
    seed: u64,
) -> Result<Dataset> {
    let n = x.nrows();
    let placeholder = Dataset::new(x, vec![0; n], exposure)?;
    let design = mbqr::design_matrix(spec, &placeholder)?;
    if beta.len() != design.ncols() {
        return Err(ExperimentError::InvalidConfig(format!(
            "beta has {} entries for {} design columns",
            beta.len(),
            design.ncols()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let eta: f64 = (0..beta.len()).map(|j| design[(i, j)] * beta[j]).sum();
        let theta = mbqr::per_obs_param(spec, eta, placeholder.exposure_at(i))?;
        y.push(
            spec.family_shape
                .with_param(theta)?
                .draw_discrete(&mut rng)?,
        );
    }
    Ok(Dataset { y, ..placeholder })
}

/// Model-based fits of `y ~ x` (no intercept) over `alpha_grid`, each
/// started from the previous level's estimate.
pub fn model_based_path(data: &Dataset, alpha_grid: &[f64]) -> Result<Vec<mbqr::FitResult>> {
    let base = QuantileModelSpec::new(alpha_grid[0], FamilyShape::Poisson, vec!["x".into()])?
        .without_intercept();
    let settings = FitSettings::default();
    let mut fits: Vec<mbqr::FitResult> = Vec::with_capacity(alpha_grid.len());
    for &alpha in alpha_grid {
        let spec = base.with_alpha(alpha)?;
        let init = fits
            .last()
            .filter(|f| f.converged)
            .map(|f| f.beta_hat.clone());
        fits.push(mbqr::fit(&spec, data, init.as_deref(), &settings)?);
    }
    Ok(fits)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub sample_size: usize,
    pub replicate: usize,
    pub seed: u64,
    pub model_based: CrossingReport,
    pub jittered: CrossingReport,
    /// Model-based fits that did not reach the gradient tolerance.
    pub unconverged_fits: usize,
}

/// One replicate of the crossing experiment at `config.sample_sizes[size_index]`.
pub fn run_replicate(
    config: &ExperimentConfig,
    size_index: usize,
    replicate: usize,
) -> Result<ReplicateOutcome> {
    let n = config.sample_sizes[size_index];
    let task = (size_index * config.n_replicates + replicate) as u64;
    let seed = config.base_seed.wrapping_add(task);
    let data = simulate_poisson_exp(n, config.covariate_sd, seed)?;
    let xs: Vec<f64> = data.x.column(0).iter().copied().collect();

    let fits = model_based_path(&data, &config.alpha_grid)?;
    let unconverged_fits = fits.iter().filter(|f| !f.converged).count();
    let model_curves: Vec<QuantileCurve> = fits
        .iter()
        .map(|f| QuantileCurve {
            alpha: f.alpha,
            values: xs.iter().map(|x| (x * f.beta_hat[0]).exp()).collect(),
        })
        .collect();

    let jitter_settings = JitterSettings {
        m_replicates: config.jitter_replicates,
        zeta: 1e-5,
        seed,
    };
    let design = data.x.clone();
    let jitter_curves = config
        .alpha_grid
        .iter()
        .map(|&alpha| {
            let f = jitterqr::fit_jittered(&design, &data.y, alpha, &jitter_settings)?;
            Ok(QuantileCurve {
                alpha,
                values: xs
                    .iter()
                    .map(|&x| jitterqr::jittered_quantile(&[x], &f.beta, alpha))
                    .collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ReplicateOutcome {
        sample_size: n,
        replicate,
        seed,
        model_based: mbqr::detect_crossings(&model_curves)?,
        jittered: mbqr::detect_crossings(&jitter_curves)?,
        unconverged_fits,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ModelBased,
    Jittered,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ModelBased => "model_based",
            Self::Jittered => "jittered",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossingFrequency {
    pub sample_size: usize,
    pub method: Method,
    pub crossing_frequency: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub frequencies: Vec<CrossingFrequency>,
    pub replicates: Vec<ReplicateOutcome>,
}

impl ExperimentResult {
    pub fn frequency(&self, sample_size: usize, method: Method) -> Option<f64> {
        self.frequencies
            .iter()
            .find(|f| f.sample_size == sample_size && f.method == method)
            .map(|f| f.crossing_frequency)
    }
}

/// Runs every (sample size, replicate) task on the current rayon pool and
/// aggregates the any-crossing frequency per sample size and method.
pub fn crossing_experiment(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let tasks: Vec<(usize, usize)> = (0..config.sample_sizes.len())
        .flat_map(|s| (0..config.n_replicates).map(move |r| (s, r)))
        .collect();
    let replicates = tasks
        .par_iter()
        .map(|&(s, r)| run_replicate(config, s, r))
        .collect::<Result<Vec<_>>>()?;
    let mut frequencies = Vec::new();
    for &n in &config.sample_sizes {
        let at_n: Vec<&ReplicateOutcome> =
            replicates.iter().filter(|o| o.sample_size == n).collect();
        let total = at_n.len() as f64;
        for method in [Method::ModelBased, Method::Jittered] {
            let hits = at_n
                .iter()
                .filter(|o| match method {
                    Method::ModelBased => o.model_based.any_crossing,
                    Method::Jittered => o.jittered.any_crossing,
                })
                .count();
            frequencies.push(CrossingFrequency {
                sample_size: n,
                method,
                crossing_frequency: hits as f64 / total,
            });
        }
    }
    Ok(ExperimentResult {
        frequencies,
        replicates,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReplicate {
    pub seed: u64,
    pub betas: Vec<f64>,
    /// Largest drop `beta[k] - beta[k + 1]` between adjacent levels (negative
    /// when strictly increasing).
    pub worst_decrease: f64,
    pub all_converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub n_obs: usize,
    pub alpha_grid: Vec<f64>,
    pub tolerance: f64,
    pub replicates: Vec<MonotonicityReplicate>,
}

impl MonotonicityReport {
    pub fn worst_decrease(&self) -> f64 {
        self.replicates
            .iter()
            .map(|r| r.worst_decrease)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn violations(&self) -> usize {
        self.replicates
            .iter()
            .filter(|r| r.worst_decrease > self.tolerance)
            .count()
    }

    pub fn passed(&self) -> bool {
        self.violations() == 0 && self.replicates.iter().all(|r| r.all_converged)
    }
}

/// Fits the single-covariate, no-intercept Poisson model over `alpha_grid`
/// in each of `replicates` simulated datasets and records how far the
/// slope sequence is from nondecreasing.
pub fn monotonicity_check(
    n_obs: usize,
    replicates: usize,
    alpha_grid: &[f64],
    covariate_sd: f64,
    base_seed: u64,
    tolerance: f64,
) -> Result<MonotonicityReport> {
    check_grid(alpha_grid)?;
    let reps = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let seed = base_seed.wrapping_add(r as u64);
            let data = simulate_poisson_exp(n_obs, covariate_sd, seed)?;
            let fits = model_based_path(&data, alpha_grid)?;
            let betas: Vec<f64> = fits.iter().map(|f| f.beta_hat[0]).collect();
            let worst_decrease = betas
                .windows(2)
                .map(|w| w[0] - w[1])
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(MonotonicityReplicate {
                seed,
                betas,
                worst_decrease,
                all_converged: fits.iter().all(|f| f.converged),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MonotonicityReport {
        n_obs,
        alpha_grid: alpha_grid.to_vec(),
        tolerance,
        replicates: reps,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RiskFixtureConfig {
    pub n_areas: usize,
    pub n_hot: usize,
    /// Relative risk of ordinary areas.
    pub baseline_risk: f64,
    /// Relative risk of the planted areas.
    pub hot_risk: f64,
    pub exposure_lo: f64,
    pub exposure_hi: f64,
    pub alpha: f64,
}

impl Default for RiskFixtureConfig {
    fn default() -> Self {
        Self {
            n_areas: 50,
            n_hot: 5,
            baseline_risk: 0.7,
            hot_risk: 2.0,
            exposure_lo: 20.0,
            exposure_hi: 60.0,
            alpha: 0.25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskFixture {
    /// Covariate `hot` (planted-area indicator), counts, exposures and area ids.
    pub data: Dataset,
    pub planted: Vec<bool>,
}

/// Synthetic disease-mapping data. Area `i` has exposure `E_i` uniform on
/// `[exposure_lo, exposure_hi]` and relative risk `theta_i` (baseline or
/// hot), and its count is Poisson with `alpha`-quantile `E_i theta_i`. The
/// planted areas are a seeded random subset.
pub fn risk_fixture(config: &RiskFixtureConfig, seed: u64) -> Result<RiskFixture> {
    if config.n_hot > config.n_areas || config.n_areas == 0 {
        return Err(ExperimentError::InvalidConfig(
            "need 0 < n_areas and n_hot <= n_areas".into(),
        ));
    }
    if !(config.exposure_lo > 0.0 && config.exposure_hi >= config.exposure_lo) {
        return Err(ExperimentError::InvalidConfig(
            "exposure range must be positive and ordered".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..config.n_areas).collect();
    for i in (1..order.len()).rev() {
        let j = rng.random_range(0..=i);
        order.swap(i, j);
    }
    let mut planted = vec![false; config.n_areas];
    for &i in &order[..config.n_hot] {
        planted[i] = true;
    }
    let mut exposure = Vec::with_capacity(config.n_areas);
    let mut y = Vec::with_capacity(config.n_areas);
    for &hot in &planted {
        let e = rng.random_range(config.exposure_lo..=config.exposure_hi);
        let theta = if hot {
            config.hot_risk
        } else {
            config.baseline_risk
        };
        let lambda = FamilyShape::Poisson.map_quantile_to_param(e * theta, config.alpha)?;
        let family = CountFamily::poisson(lambda)?;
        exposure.push(e);
        y.push(family.draw_discrete(&mut rng)?);
    }
    let x = DMatrix::from_iterator(
        config.n_areas,
        1,
        planted.iter().map(|&h| if h { 1.0 } else { 0.0 }),
    );
    let ids = (1..=config.n_areas).map(|i| format!("A{i:03}")).collect();
    let data = Dataset::new(x, y, Some(exposure))?.with_area_ids(ids)?;
    Ok(RiskFixture { data, planted })
}

/// Quantile-level model with an intercept and the fixture's `hot` covariate.
pub fn risk_spec(alpha: f64) -> Result<QuantileModelSpec> {
    Ok(
        QuantileModelSpec::new(alpha, FamilyShape::Poisson, vec!["hot".into()])?
            .with_exposure(ExposureMode::QuantileLevel),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_validation() {
        assert!(ExperimentConfig::default().validate().is_ok());
        let bad = ExperimentConfig {
            alpha_grid: vec![0.5, 0.25],
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            sample_sizes: vec![],
            ..ExperimentConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn default_grid_has_nineteen_levels() {
        let g = default_alpha_grid();
        assert_eq!(g.len(), 19);
        assert!((g[0] - 0.05).abs() < 1e-15 && (g[18] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn simulation_is_seeded() {
        let a = simulate_poisson_exp(30, 1.5, 2).unwrap();
        let b = simulate_poisson_exp(30, 1.5, 2).unwrap();
        assert_eq!(a, b);
        assert!(a.x.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn risk_fixture_plants_requested_areas() {
        let f = risk_fixture(&RiskFixtureConfig::default(), 8).unwrap();
        assert_eq!(f.planted.iter().filter(|p| **p).count(), 5);
        assert_eq!(f.data.n_obs(), 50);
        assert!(f
            .data
            .exposure
            .as_ref()
            .unwrap()
            .iter()
            .all(|e| (20.0..=60.0).contains(e)));
    }
}
