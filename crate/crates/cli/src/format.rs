/// Fixed-point rendering with `digits` significant digits; scientific
/// notation outside `[1e-5, 1e12)`.
pub fn sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "NaN".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v == 0.0 {
        return format!("{:.*}", digits - 1, 0.0);
    }
    let mag = v.abs();
    if !(1e-5..1e12).contains(&mag) {
        return format!("{:.*e}", digits - 1, v);
    }
    let exp = mag.log10().floor() as i32;
    let decimals = (digits as i32 - 1 - exp).max(0) as usize;
    let out = format!("{v:.decimals$}");
    // rounding can carry into a new leading digit (9.99.. -> 10.0..)
    let lead = out.trim_start_matches('-').split('.').next().unwrap_or("");
    if lead != "0" && lead.len() as i32 > exp + 1 && decimals > 0 {
        return format!("{:.*}", decimals - 1, v);
    }
    out
}

/// Twelve significant digits, the precision of all printed values.
pub fn num(v: f64) -> String {
    sig(v, 12)
}
