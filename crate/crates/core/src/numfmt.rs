/// Formats a float in plain decimal notation with at least 17 significant
/// digits, which is enough for an exact `f64` round trip through `str::parse`.
pub fn format_f64(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x:.17}");
    }
    let exp = x.abs().log10().floor() as i32;
    // one digit of slack covers log10 rounding at powers of ten
    let decimals = (17 - exp).max(1) as usize;
    format!("{x:.decimals$}")
}
