use mbqr_core::countdist::CountFamily;
use mbqr_core::experiment::simulate_poisson_exp;
use mbqr_core::jitterqr::{
    dejitter_quantile, empirical_loss, fit_check_loss, fit_jittered, jitter, jittered_quantile,
    transform, JitterSettings,
};
use nalgebra::DMatrix;

fn with_intercept(x: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), 2, |i, j| if j == 0 { 1.0 } else { x[(i, 0)] })
}

#[test]
fn fitted_point_is_locally_optimal() {
    let data = simulate_poisson_exp(300, 1.0, 1).unwrap();
    let design = with_intercept(&data.x);
    let z = jitter(&data.y, 2);
    for &alpha in &[0.2, 0.5, 0.8] {
        let r = fit_check_loss(&design, &z, alpha, 1e-5).unwrap();
        let w = transform(&z, alpha, 1e-5);
        let base = empirical_loss(&design, &w, &r.x, alpha);
        for j in 0..2 {
            for d in [-0.1, 0.1] {
                let mut b = r.x.clone();
                b[j] += d;
                assert!(
                    empirical_loss(&design, &w, &b, alpha) >= base - 1e-12,
                    "alpha {alpha} coef {j} {d}"
                );
            }
        }
    }
}

#[test]
fn residual_signs_balance_at_alpha() {
    let data = simulate_poisson_exp(2000, 1.0, 3).unwrap();
    let design = with_intercept(&data.x);
    let z = jitter(&data.y, 4);
    let n = z.len() as f64;
    for &alpha in &[0.25, 0.5, 0.75] {
        let r = fit_check_loss(&design, &z, alpha, 1e-5).unwrap();
        let w = transform(&z, alpha, 1e-5);
        let negative = (0..z.len())
            .filter(|&i| w[i] - (r.x[0] + r.x[1] * design[(i, 1)]) < 0.0)
            .count() as f64
            / n;
        assert!(
            (negative - alpha).abs() <= 5.0 / n.sqrt(),
            "alpha {alpha}: {negative}"
        );
        // the back-transformed curve splits the jittered data the same way
        let below = (0..z.len())
            .filter(|&i| z[i] < jittered_quantile(&[1.0, design[(i, 1)]], &r.x, alpha))
            .count() as f64
            / n;
        assert!((below - alpha).abs() <= 0.02, "alpha {alpha}: {below}");
    }
}

#[test]
fn averaging_over_jitters_reduces_spread() {
    let data = simulate_poisson_exp(100, 1.0, 5).unwrap();
    let design = with_intercept(&data.x);
    let spread = |m: usize| {
        let slopes: Vec<f64> = (0..12)
            .map(|s| {
                let settings = JitterSettings {
                    m_replicates: m,
                    zeta: 1e-5,
                    seed: 1000 * s,
                };
                fit_jittered(&design, &data.y, 0.5, &settings).unwrap().beta[1]
            })
            .collect();
        let mean = slopes.iter().sum::<f64>() / slopes.len() as f64;
        (slopes.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (slopes.len() - 1) as f64).sqrt()
    };
    let (s1, s10, s50) = (spread(1), spread(10), spread(50));
    println!("sd over seeds: m=1 {s1}, m=10 {s10}, m=50 {s50}");
    assert!(s1 > s10 && s10 > s50);
}

/// CDF of `Y + U` with `Y` Poisson and `U` uniform on (0, 1).
fn jittered_cdf(f: &CountFamily, z: f64) -> f64 {
    if z <= 0.0 {
        return 0.0;
    }
    let k = z.floor();
    f.discrete_cdf(k as i64 - 1) + f.discrete_pmf(k as u64) * (z - k)
}

#[test]
fn dejittering_recovers_discrete_quantiles() {
    for &lambda in &[0.3, 1.0, 2.5, 4.0] {
        let f = CountFamily::poisson(lambda).unwrap();
        for k in 1..40 {
            let alpha = k as f64 / 40.0;
            let (mut lo, mut hi) = (0.0, 60.0);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if jittered_cdf(&f, mid) < alpha {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let qz = 0.5 * (lo + hi);
            let want = f.discrete_quantile(alpha).unwrap() as i64;
            let on_mass = (f.discrete_cdf(want) - alpha).abs() < 1e-9;
            if !on_mass {
                assert_eq!(dejitter_quantile(qz), want, "lambda {lambda} alpha {alpha}");
            }
        }
    }
}
