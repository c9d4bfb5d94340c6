use std::f64::consts::PI;

use super::gamma::{ln_gamma_unchecked, stirling_corr};
use super::{log1pmx, term_cap, Accuracy, Result, SpecialError};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// `ln B(a, b)`. Large arguments go through Stirling remainders so that the
/// huge `ln Gamma` terms never cancel against each other.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    let (small, big) = if a < b { (a, b) } else { (b, a) };
    let s = a + b;
    if small >= 10.0 {
        LN_SQRT_2PI - 0.5 * s.ln()
            + (a - 0.5) * (a / s).ln()
            + (b - 0.5) * (b / s).ln()
            + stirling_corr(a)
            + stirling_corr(b)
            - stirling_corr(s)
    } else if big >= 10.0 {
        // ln Gamma(big) - ln Gamma(big + small)
        let ratio =
            -(big - 0.5) * (small / big).ln_1p() - small * s.ln() + small + stirling_corr(big)
                - stirling_corr(s);
        ln_gamma_unchecked(small) + ratio
    } else {
        ln_gamma_unchecked(a) + ln_gamma_unchecked(b) - ln_gamma_unchecked(s)
    }
}

/// `ln(x^a y^b / B(a, b))` with y = 1 - x supplied by the caller.
fn ln_beta_kernel(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x == 0.0 || y == 0.0 {
        return f64::NEG_INFINITY;
    }
    if a >= 10.0 && b >= 10.0 {
        let s = a + b;
        let t1 = (x * s - a) / a;
        let t2 = (y * s - b) / b;
        a * log1pmx(t1) + b * log1pmx(t2) + 0.5 * (a * b / (2.0 * PI * s)).ln()
            - stirling_corr(a)
            - stirling_corr(b)
            + stirling_corr(s)
    } else {
        a * x.ln() + b * y.ln() - ln_beta(a, b)
    }
}

/// Log density of Beta(a, b) at x.
pub fn ln_beta_density(a: f64, b: f64, x: f64) -> f64 {
    ln_beta_density_xy(a, b, x, 1.0 - x)
}

pub(crate) fn ln_beta_density_xy(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 || y <= 0.0 {
        return f64::NEG_INFINITY;
    }
    ln_beta_kernel(a, b, x, y) - x.ln() - y.ln()
}

/// Lentz evaluation of the standard continued fraction for I_x(a, b).
fn continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let cap = term_cap(a.max(b));
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=cap {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// `(I_x(a, b), 1 - I_x(a, b))` with y = 1 - x given explicitly; the smaller
/// of the two is always evaluated directly.
pub(crate) fn beta_inc_pair(a: f64, b: f64, x: f64, y: f64) -> (f64, f64) {
    if x <= 0.0 {
        return (0.0, 1.0);
    }
    if y <= 0.0 {
        return (1.0, 0.0);
    }
    if x < a / (a + b) {
        let v = ((ln_beta_kernel(a, b, x, y)).exp() * continued_fraction(a, b, x) / a).min(1.0);
        (v, 1.0 - v)
    } else {
        let w = ((ln_beta_kernel(a, b, x, y)).exp() * continued_fraction(b, a, y) / b).min(1.0);
        (1.0 - w, w)
    }
}

fn check_args(a: f64, b: f64, x: f64) -> Result<()> {
    if !(a > 0.0) || !(b > 0.0) || a.is_infinite() || b.is_infinite() || !(0.0..=1.0).contains(&x) {
        return Err(SpecialError::Domain(format!(
            "incomplete beta requires a, b > 0 and x in [0, 1], got a={a}, b={b}, x={x}"
        )));
    }
    Ok(())
}

/// Regularized incomplete beta function I_x(a, b).
pub fn beta_inc(a: f64, b: f64, x: f64) -> Result<f64> {
    check_args(a, b, x)?;
    Ok(beta_inc_pair(a, b, x, 1.0 - x).0)
}

/// `(I_x(a, b), 1 - I_x(a, b))` for a point given as the pair `(x, 1 - x)`.
/// Use this when `1 - x` is known more accurately than `x` itself.
pub fn beta_inc_xy(a: f64, b: f64, x: f64, y: f64) -> Result<(f64, f64)> {
    check_args(a, b, x)?;
    if !(0.0..=1.0).contains(&y) || (x + y - 1.0).abs() > 4.0 * f64::EPSILON {
        return Err(SpecialError::Domain(format!(
            "x={x} and y={y} do not sum to one"
        )));
    }
    Ok(beta_inc_pair(a, b, x, y))
}

/// 1 - I_x(a, b), evaluated without subtraction where it is small.
pub fn beta_inc_complement(a: f64, b: f64, x: f64) -> Result<f64> {
    check_args(a, b, x)?;
    Ok(beta_inc_pair(a, b, x, 1.0 - x).1)
}

/// x with I_x(a, b) = u.
pub fn beta_inc_inv(a: f64, b: f64, u: f64) -> Result<f64> {
    beta_inc_inv_with(a, b, u, &Accuracy::default())
}

pub fn beta_inc_inv_with(a: f64, b: f64, u: f64, acc: &Accuracy) -> Result<f64> {
    Ok(beta_inc_inv_pair(a, b, u, acc)?.0)
}

/// Solves I_x(a, b) = u and returns `(x, 1 - x)`. The complement comes from
/// whichever orientation was solved, so it keeps full relative accuracy even
/// when x rounds to 1.
pub fn beta_inc_inv_xy(a: f64, b: f64, u: f64) -> Result<(f64, f64)> {
    beta_inc_inv_pair(a, b, u, &Accuracy::default())
}

pub(crate) fn beta_inc_inv_pair(a: f64, b: f64, u: f64, acc: &Accuracy) -> Result<(f64, f64)> {
    check_args(a, b, u)?;
    if u == 0.0 {
        return Ok((0.0, 1.0));
    }
    if u == 1.0 {
        return Ok((1.0, 0.0));
    }
    if u <= 0.5 {
        let (x, y) = solve_lower(a, b, u, acc)?;
        Ok((x, y))
    } else {
        // I_x(a, b) = u  <=>  I_{1-x}(b, a) = 1 - u
        let (y, x) = solve_lower(b, a, 1.0 - u, acc)?;
        Ok((x, y))
    }
}

fn initial_guess(a: f64, b: f64, u: f64) -> f64 {
    if a >= 1.0 && b >= 1.0 {
        let pp = if u < 0.5 { u } else { 1.0 - u };
        let t = (-2.0 * pp.ln()).sqrt();
        let mut z = (2.307_53 + t * 0.270_61) / (1.0 + t * (0.992_29 + t * 0.044_81)) - t;
        if u < 0.5 {
            z = -z;
        }
        let al = (z * z - 3.0) / 6.0;
        let h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
        let w = z * (al + h).sqrt() / h
            - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
        a / (a + b * (2.0 * w).exp())
    } else {
        let lna = (a / (a + b)).ln();
        let lnb = (b / (a + b)).ln();
        let t = (a * lna).exp() / a;
        let v = (b * lnb).exp() / b;
        let w = t + v;
        if u < t / w {
            (a * w * u).powf(1.0 / a)
        } else {
            1.0 - (b * w * (1.0 - u)).powf(1.0 / b)
        }
    }
}

/// Safeguarded Newton for I_x(a, b) = u with u <= 1/2, bracket [0, 1].
fn solve_lower(a: f64, b: f64, u: f64, acc: &Accuracy) -> Result<(f64, f64)> {
    let mut x = initial_guess(a, b, u);
    if !(x > 0.0 && x < 1.0) {
        x = 0.5;
    }
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..acc.max_iter {
        let y = 1.0 - x;
        let (v, _) = beta_inc_pair(a, b, x, y);
        let g = v - u;
        if g == 0.0 {
            return Ok((x, y));
        }
        if g < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let slope = ln_beta_density_xy(a, b, x, y).exp();
        let mut next = x - g / slope;
        let newton_ok = next.is_finite() && next > lo && next < hi && slope > 0.0;
        if !newton_ok {
            next = 0.5 * (lo + hi);
        }
        let step = (next - x).abs();
        x = next;
        if newton_ok && step <= acc.rel_tol * x {
            return Ok((x, 1.0 - x));
        }
        if hi - lo <= acc.rel_tol * 0.5 * hi {
            let mid = 0.5 * (lo + hi);
            return Ok((mid, 1.0 - mid));
        }
    }
    Err(SpecialError::NoConvergence {
        iterations: acc.max_iter,
        lo,
        hi,
    })
}
