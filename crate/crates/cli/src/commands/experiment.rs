use std::fs;

use mbqr_core::experiment::{crossing_experiment, ExperimentConfig};

use super::{csv_string, emit};
use crate::error::{CliError, Result};
use crate::format::num;
use crate::ExperimentArgs;

/// Defaults, then the config file, then flags.
pub fn resolve_config(args: &ExperimentArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
            toml::from_str::<ExperimentConfig>(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(v) = args.replicates {
        config.n_replicates = v;
    }
    if let Some(v) = &args.sample_sizes {
        config.sample_sizes = v.clone();
    }
    if let Some(v) = &args.alphas {
        config.alpha_grid = v.clone();
    }
    if let Some(v) = args.covariate_sd {
        config.covariate_sd = v;
    }
    if let Some(v) = args.jitter_replicates {
        config.jitter_replicates = v;
    }
    if let Some(v) = args.seed {
        config.base_seed = v;
    }
    config.validate()?;
    Ok(config)
}

pub fn run(args: &ExperimentArgs) -> Result<()> {
    let config = resolve_config(args)?;
    let result = crossing_experiment(&config)?;
    let rows: Vec<Vec<String>> = result
        .frequencies
        .iter()
        .map(|f| {
            vec![
                f.sample_size.to_string(),
                f.method.as_str().to_string(),
                num(f.crossing_frequency),
            ]
        })
        .collect();
    emit(
        args.out.as_deref(),
        &csv_string(&["sample_size", "method", "crossing_frequency"], &rows)?,
    )?;
    if let Some(path) = &args.detail {
        let rows: Vec<Vec<String>> = result
            .replicates
            .iter()
            .map(|o| {
                vec![
                    o.sample_size.to_string(),
                    o.replicate.to_string(),
                    o.seed.to_string(),
                    o.model_based.violations.to_string(),
                    o.jittered.violations.to_string(),
                    o.unconverged_fits.to_string(),
                ]
            })
            .collect();
        let header = [
            "sample_size",
            "replicate",
            "seed",
            "model_based_violations",
            "jittered_violations",
            "unconverged_fits",
        ];
        emit(Some(path), &csv_string(&header, &rows)?)?;
    }
    let unconverged: usize = result.replicates.iter().map(|o| o.unconverged_fits).sum();
    if unconverged > 0 {
        eprintln!(
            "warning: {unconverged} model-based fit(s) stopped before the gradient tolerance"
        );
    }
    Ok(())
}
