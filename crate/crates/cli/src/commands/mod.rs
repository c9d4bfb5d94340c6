pub mod dist;
pub mod experiment;
pub mod fit;
pub mod risk;
pub mod simulate;
pub mod verify;

use std::fs;
use std::io::Write;
use std::path::Path;

use mbqr_core::countdist::{CountFamily, FamilyShape};

use crate::error::{CliError, Result};
use crate::{FamilyArg, FamilyFlags};

fn need<T>(value: Option<T>, flag: &str, family: &str) -> Result<T> {
    value.ok_or_else(|| CliError::Usage(format!("--{flag} is required for the {family} family")))
}

/// The fixed (non-modelled) part of the family.
pub fn shape(flags: &FamilyFlags) -> Result<FamilyShape> {
    Ok(match flags.family {
        FamilyArg::Poisson => FamilyShape::Poisson,
        FamilyArg::Binomial => FamilyShape::Binomial {
            n: need(flags.n, "n", "binomial")?,
        },
        FamilyArg::Negbin => FamilyShape::NegBinomial {
            r: need(flags.r, "r", "negbin")?,
        },
    })
}

pub fn family(flags: &FamilyFlags) -> Result<CountFamily> {
    Ok(match flags.family {
        FamilyArg::Poisson => CountFamily::poisson(need(flags.lambda, "lambda", "poisson")?)?,
        FamilyArg::Binomial => CountFamily::binomial(
            need(flags.n, "n", "binomial")?,
            need(flags.p, "p", "binomial")?,
        )?,
        FamilyArg::Negbin => {
            CountFamily::neg_binomial(need(flags.r, "r", "negbin")?, need(flags.p, "p", "negbin")?)?
        }
    })
}

/// Writes `content` to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, content: &str) -> Result<()> {
    match path {
        Some(p) => {
            fs::write(p, content).map_err(|e| CliError::Other(format!("{}: {e}", p.display())))
        }
        None => std::io::stdout()
            .write_all(content.as_bytes())
            .map_err(|e| CliError::Other(e.to_string())),
    }
}

/// Renders rows of already formatted fields as CSV.
pub fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)
        .map_err(|e| CliError::Other(e.to_string()))?;
    for row in rows {
        w.write_record(row)
            .map_err(|e| CliError::Other(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Other(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Other(e.to_string()))
}
