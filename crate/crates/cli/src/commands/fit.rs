use mbqr_core::countdist::FamilyShape;
use mbqr_core::mbqr::{self, ExposureMode, FitResult, FitSettings, QuantileModelSpec};
use serde::Serialize;

use super::{emit, shape};
use crate::data::{self, ColumnRoles};
use crate::error::{CliError, Result};
use crate::format::num;
use crate::{ExposureArg, FitArgs};

#[derive(Serialize)]
struct FitOutput<'a> {
    family_shape: FamilyShape,
    exposure_mode: ExposureMode,
    n_obs: usize,
    #[serde(flatten)]
    fit: &'a FitResult,
}

pub fn exposure_mode(arg: ExposureArg) -> ExposureMode {
    match arg {
        ExposureArg::None => ExposureMode::None,
        ExposureArg::QuantileLevel => ExposureMode::QuantileLevel,
        ExposureArg::ParameterLevel => ExposureMode::ParameterLevel,
    }
}

pub fn coefficient_table(fit: &FitResult) -> String {
    let mut out = format!(
        "{:<16} {:>20} {:>20} {:>20}\n",
        "coefficient", "estimate", "std_error", "z"
    );
    for (j, name) in fit.coef_names.iter().enumerate() {
        let (b, se) = (fit.beta_hat[j], fit.std_errors[j]);
        out.push_str(&format!(
            "{name:<16} {:>20} {:>20} {:>20}\n",
            num(b),
            num(se),
            num(b / se)
        ));
    }
    out.push_str(&format!("loglik {}\n", num(fit.loglik)));
    out.push_str(&format!(
        "converged {} after {} iterations\n",
        fit.converged, fit.n_iter
    ));
    out
}

pub fn run(args: &FitArgs) -> Result<()> {
    let family_shape = shape(&args.family)?;
    let mode = exposure_mode(args.exposure_mode);
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Usage(format!(
            "--alpha must lie in (0, 1), got {}",
            args.alpha
        )));
    }
    let roles = ColumnRoles {
        response: &args.response,
        exposure: (mode != ExposureMode::None).then_some(args.exposure_col.as_str()),
        id: Some(&args.id_col),
        covariates: args.covariates.as_deref(),
    };
    let loaded = data::load(&args.csv, &roles)?;
    let mut spec = QuantileModelSpec::new(args.alpha, family_shape, loaded.covariate_names)?
        .with_exposure(mode);
    if args.no_intercept {
        spec = spec.without_intercept();
        spec.validate()?;
    }
    let settings = FitSettings {
        max_iter: args.max_iter,
        bootstrap: args.bootstrap,
        seed: args.seed,
        ..FitSettings::default()
    };
    let fit = mbqr::fit(&spec, &loaded.data, None, &settings)?;
    let output = FitOutput {
        family_shape,
        exposure_mode: mode,
        n_obs: loaded.data.n_obs(),
        fit: &fit,
    };
    let json =
        serde_json::to_string_pretty(&output).map_err(|e| CliError::Other(e.to_string()))? + "\n";
    if let Some(path) = &args.output {
        emit(Some(path), &json)?;
    }
    if args.json {
        emit(None, &json)?;
    } else {
        emit(None, &coefficient_table(&fit))?;
    }
    if !fit.converged {
        return Err(CliError::NonConvergence(format!(
            "gradient sup-norm {} after {} iterations",
            num(fit.diagnostics.grad_sup_norm),
            fit.n_iter
        )));
    }
    Ok(())
}
