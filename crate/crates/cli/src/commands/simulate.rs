use mbqr_core::countdist::FamilyShape;
use mbqr_core::experiment::{risk_fixture, simulate_from_model, RiskFixtureConfig};
use mbqr_core::mbqr::QuantileModelSpec;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{csv_string, emit};
use crate::error::{CliError, Result};
use crate::SimulateCommand;

pub fn run(cmd: &SimulateCommand) -> Result<()> {
    match cmd {
        SimulateCommand::Model {
            n,
            alpha,
            beta,
            x_max,
            seed,
            out,
        } => {
            if beta.len() != 2 {
                return Err(CliError::Usage(
                    "--beta takes an intercept and a slope".into(),
                ));
            }
            if *n == 0 || !(*x_max > 0.0) {
                return Err(CliError::Usage("--n and --x-max must be positive".into()));
            }
            let spec = QuantileModelSpec::new(*alpha, FamilyShape::Poisson, vec!["x".into()])?;
            // covariates and counts use separate streams
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1 << 32));
            let x = DMatrix::from_fn(*n, 1, |_, _| rng.random_range(0.0..*x_max));
            let data = simulate_from_model(&spec, beta, x, None, *seed)?;
            let rows: Vec<Vec<String>> = (0..*n)
                .map(|i| vec![data.x[(i, 0)].to_string(), data.y[i].to_string()])
                .collect();
            emit(out.as_deref(), &csv_string(&["x", "y"], &rows)?)
        }
        SimulateCommand::RiskFixture {
            areas,
            hot,
            alpha,
            seed,
            out,
        } => {
            let config = RiskFixtureConfig {
                n_areas: *areas,
                n_hot: *hot,
                alpha: *alpha,
                ..RiskFixtureConfig::default()
            };
            let fixture = risk_fixture(&config, *seed)?;
            let d = &fixture.data;
            let ids = d.area_ids.as_ref().expect("fixture carries area ids");
            let e = d.exposure.as_ref().expect("fixture carries exposures");
            let rows: Vec<Vec<String>> = (0..d.n_obs())
                .map(|i| {
                    vec![
                        ids[i].clone(),
                        d.y[i].to_string(),
                        e[i].to_string(),
                        d.x[(i, 0)].to_string(),
                    ]
                })
                .collect();
            emit(
                out.as_deref(),
                &csv_string(&["area_id", "y", "E", "hot"], &rows)?,
            )
        }
    }
}
