//! Percent formatting shared by audit and metrics reports.

/// `num / den * 100` rounded half-up to one decimal; `"0.0"` when `den` is 0.
pub fn percent_one_decimal(num: u64, den: u64) -> String {
    if den == 0 {
        return "0.0".to_string();
    }
    let (num, den) = (u128::from(num), u128::from(den));
    let tenths = (2 * num * 1000 + den) / (2 * den);
    format!("{}.{}", tenths / 10, tenths % 10)
}

/// Rounds a non-negative percentage half-up to one decimal. The small bias
/// keeps values like 6.25, stored a few ulps low, rounding up.
pub fn round_percent(value: f64) -> f64 {
    (value * 10.0 + 0.5 + 1e-9).floor() / 10.0
}

pub fn format_percent(value: f64) -> String {
    format!("{:.1}", round_percent(value))
}
