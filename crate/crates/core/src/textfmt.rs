//! Small text helpers shared by the plain-text file formats.

use std::collections::BTreeMap;

/// Formats `v` with `digits` significant digits in fixed notation.
pub(crate) fn sig(v: f64, digits: usize) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return format!("{:.*}", digits.saturating_sub(1), 0.0);
    }
    let magnitude = v.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - magnitude).max(0) as usize;
    let s = format!("{v:.decimals$}");
    // Rounding may have carried into a new leading digit (9.99999 -> 10.00000).
    let rounded: f64 = s.parse().unwrap_or(v);
    let new_mag = rounded.abs().log10().floor() as i64;
    if new_mag != magnitude && decimals > 0 {
        format!("{v:.prec$}", prec = decimals - 1)
    } else {
        s
    }
}

/// Formats a float for a CSV cell; NaN becomes an empty cell.
pub(crate) fn cell(v: f64, decimals: usize) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v:.decimals$}")
    }
}

/// Renders an ordered key=value document, one pair per line, LF endings.
pub(crate) fn key_values<'a>(pairs: impl IntoIterator<Item = (&'a str, String)>) -> String {
    let mut out = String::new();
    for (k, v) in pairs {
        out.push_str(k);
        out.push('=');
        out.push_str(&v);
        out.push('\n');
    }
    out
}

/// Parses a key=value document. Blank lines and `#` comments are skipped.
pub(crate) fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>, (usize, String)> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err((i + 1, format!("expected key=value, got {line:?}")));
        };
        let key = k.trim().to_string();
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err((i + 1, format!("duplicate key {key:?}")));
        }
    }
    Ok(map)
}
