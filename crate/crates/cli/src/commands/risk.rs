use mbqr_core::countdist::FamilyShape;
use mbqr_core::mbqr::{self, ExposureMode, FitSettings, QuantileModelSpec};

use super::{csv_string, emit};
use crate::data::{self, ColumnRoles};
use crate::error::{CliError, Result};
use crate::format::num;
use crate::RiskArgs;

pub fn run(args: &RiskArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(CliError::Usage(format!(
            "--threshold must lie in [0, 1], got {}",
            args.threshold
        )));
    }
    if args.draws == 0 {
        return Err(CliError::Usage("--draws must be at least 1".into()));
    }
    let roles = ColumnRoles {
        response: &args.response,
        exposure: Some(&args.exposure_col),
        id: Some(&args.id_col),
        covariates: args.covariates.as_deref(),
    };
    let loaded = data::load(&args.csv, &roles)?;
    let spec = QuantileModelSpec::new(args.alpha, FamilyShape::Poisson, loaded.covariate_names)?
        .with_exposure(ExposureMode::QuantileLevel);
    let fit = mbqr::fit(&spec, &loaded.data, None, &FitSettings::default())?;
    if !fit.converged {
        return Err(CliError::NonConvergence(format!(
            "risk model fit stopped after {} iterations",
            fit.n_iter
        )));
    }
    let report = mbqr::exceedance(
        &spec,
        &fit,
        &loaded.data,
        args.draws,
        args.seed,
        args.threshold,
    )?;
    let rows: Vec<Vec<String>> = report
        .areas
        .iter()
        .map(|a| {
            vec![
                a.area_id.clone(),
                num(a.theta_alpha),
                num(a.exceedance),
                a.high_risk.to_string(),
            ]
        })
        .collect();
    emit(
        args.out.as_deref(),
        &csv_string(
            &["area_id", "theta_alpha", "exceedance", "high_risk"],
            &rows,
        )?,
    )?;
    let summary = format!(
        "flagged {} of {} areas (alpha {}, threshold {}, {} draws)",
        report.n_flagged(),
        report.areas.len(),
        args.alpha,
        args.threshold,
        args.draws
    );
    if args.out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(())
}
