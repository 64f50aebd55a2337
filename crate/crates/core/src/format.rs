//! Fixed-precision number formatting shared by every text output.

/// Significant digits used for all human- and machine-readable numeric output.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// Formats `x` with exactly nine significant digits in positional notation,
/// falling back to scientific notation for very large or very small magnitudes.
///
/// ```
/// use econformal::format::sig9;
/// assert_eq!(sig9(1.0 - (-4.0f64).exp()), "0.981684361");
/// assert_eq!(sig9(0.0), "0");
/// ```
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    // Round once in scientific form, then reprint the rounded value positionally
    // so that carries (9.9999999996 -> 10.0000000) land on the right exponent.
    let sci = format!("{:.*e}", SIGNIFICANT_DIGITS - 1, x);
    let exponent: i32 = sci
        .rsplit_once('e')
        .and_then(|(_, e)| e.parse().ok())
        .unwrap_or(0);
    if !(-6..=15).contains(&exponent) {
        return sci;
    }
    let rounded: f64 = sci.parse().unwrap_or(x);
    let decimals = (SIGNIFICANT_DIGITS as i32 - 1 - exponent).max(0) as usize;
    format!("{rounded:.decimals$}")
}

/// Like [`sig9`] but with trailing fractional zeros removed (`0.250000000` -> `0.25`).
pub fn sig9_trimmed(x: f64) -> String {
    let s = sig9(x);
    if s.contains('e') || !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}
