use mbqr_core::countdist::{verify_limit_relations, CountFamily, LimitGrid};
use mbqr_core::experiment::{default_alpha_grid, monotonicity_check};

use crate::error::{CliError, Result};
use crate::format::sig;
use crate::{Suite, VerifyArgs};

/// One named check: passes when `value < limit`.
struct Check {
    name: String,
    value: f64,
    limit: f64,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
        }
    }

    fn passed(&self) -> bool {
        self.value < self.limit
    }
}

/// Families of the default interpolation grid.
pub fn lemma1_families() -> Vec<(String, Vec<CountFamily>)> {
    let mut out = Vec::new();
    let poisson =
        [0.5, 1.0, 2.0, 5.0, 10.0, 50.0].map(|l| CountFamily::poisson(l).expect("valid rate"));
    out.push(("poisson".to_string(), poisson.to_vec()));
    let mut binomial = Vec::new();
    let mut negbin = Vec::new();
    for &p in &[0.1, 0.5, 0.9] {
        for &n in &[3, 10, 40] {
            binomial.push(CountFamily::binomial(n, p).expect("valid binomial"));
        }
        for &r in &[0.5, 1.0, 3.0, 7.5] {
            negbin.push(CountFamily::neg_binomial(r, p).expect("valid negbin"));
        }
    }
    out.push(("binomial".to_string(), binomial));
    out.push(("negbin".to_string(), negbin));
    out
}

/// Largest `|continuous_cdf(k) - discrete_cdf(k)|` over integers `k` in `0..=60` and the support.
pub fn interpolation_gap(f: &CountFamily) -> Result<f64> {
    let top = f.support_hi().min(60.0) as i64;
    let mut worst = 0.0f64;
    for k in 0..=top {
        worst = worst.max((f.continuous_cdf(k as f64)? - f.discrete_cdf(k)).abs());
    }
    Ok(worst)
}

fn lemma1() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for (name, families) in lemma1_families() {
        let mut worst = 0.0f64;
        for f in &families {
            worst = worst.max(interpolation_gap(f)?);
        }
        checks.push(Check::new(
            format!("{name} interpolation gap at integers"),
            worst,
            1e-10,
        ));
    }
    Ok(checks)
}

fn theorem1() -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for &lambda in &[1.0, 2.0, 5.0] {
        let report = verify_limit_relations(&LimitGrid::standard(lambda))?;
        for (label, gaps, decreasing) in [
            (
                "binomial",
                &report.binomial_gaps,
                report.binomial_decreasing(),
            ),
            (
                "negbin",
                &report.neg_binomial_gaps,
                report.neg_binomial_decreasing(),
            ),
        ] {
            let trail: Vec<String> = gaps
                .iter()
                .map(|(n, g)| format!("{n}:{}", sig(*g, 4)))
                .collect();
            println!("  lambda {lambda} {label} sup-gaps {}", trail.join(" "));
            // margin of the decrease: the largest ratio of consecutive gaps must stay below 1
            let ratio = gaps.windows(2).map(|w| w[1].1 / w[0].1).fold(0.0, f64::max);
            checks.push(Check::new(
                format!("lambda {lambda} {label} gaps decreasing (max ratio)"),
                if decreasing { ratio } else { ratio.max(1.0) },
                1.0,
            ));
            let last = gaps.last().map_or(f64::INFINITY, |g| g.1);
            checks.push(Check::new(
                format!("lambda {lambda} {label} gap at largest size"),
                last,
                5e-3,
            ));
        }
        if lambda == 1.0 {
            checks.push(Check::new(
                "negbin/binomial duality identity",
                report.identity_gap,
                1e-10,
            ));
        }
    }
    Ok(checks)
}

fn lemma2(seed: u64) -> Result<Vec<Check>> {
    let tol = 1e-6;
    let report = monotonicity_check(200, 50, &default_alpha_grid(), 1.5, seed, tol)?;
    let unconverged = report
        .replicates
        .iter()
        .filter(|r| !r.all_converged)
        .count();
    Ok(vec![
        // shifting by the tolerance makes the pass rule `worst decrease <= tol`
        Check::new(
            "slope decrease between adjacent levels (50 replicates)",
            report.worst_decrease(),
            tol + f64::EPSILON,
        ),
        Check::new(
            "replicates with an unconverged fit",
            unconverged as f64,
            0.5,
        ),
    ])
}

pub fn run(args: &VerifyArgs) -> Result<()> {
    let checks = match args.suite {
        Suite::Lemma1 => lemma1()?,
        Suite::Theorem1 => theorem1()?,
        Suite::Lemma2 => lemma2(args.seed)?,
    };
    let mut failed = 0;
    for c in &checks {
        let status = if c.passed() { "PASS" } else { "FAIL" };
        failed += usize::from(!c.passed());
        println!(
            "{status} {}: {} (limit {})",
            c.name,
            sig(c.value, 6),
            sig(c.limit, 6)
        );
    }
    if failed > 0 {
        return Err(CliError::VerifyFailed(failed));
    }
    println!("all {} checks passed", checks.len());
    Ok(())
}
