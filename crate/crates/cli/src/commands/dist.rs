use serde::Serialize;

use super::{family, shape};
use crate::error::{CliError, Result};
use crate::format::num;
use crate::DistArgs;

#[derive(Serialize)]
struct DistOutput<'a> {
    query: &'a str,
    argument: f64,
    alpha: Option<f64>,
    value: f64,
}

pub fn run(args: &DistArgs) -> Result<()> {
    let (query, argument, value) = if let Some(x) = args.cdf {
        ("cdf", x, family(&args.family)?.continuous_cdf(x)?)
    } else if let Some(k) = args.pmf {
        ("pmf", k as f64, family(&args.family)?.discrete_pmf(k))
    } else if let Some(a) = args.quantile {
        ("quantile", a, family(&args.family)?.continuous_quantile(a)?)
    } else if let Some(q) = args.map_q {
        let alpha = args
            .alpha
            .ok_or_else(|| CliError::Usage("--map-q needs --alpha".into()))?;
        (
            "map",
            q,
            shape(&args.family)?.map_quantile_to_param(q, alpha)?,
        )
    } else {
        return Err(CliError::Usage(
            "one of --cdf, --pmf, --quantile or --map-q is required".into(),
        ));
    };
    println!("{}", num(value));
    if args.json {
        let out = DistOutput {
            query,
            argument,
            alpha: args.alpha.filter(|_| query == "map"),
            value,
        };
        println!(
            "{}",
            serde_json::to_string(&out).map_err(|e| CliError::Other(e.to_string()))?
        );
    }
    Ok(())
}
