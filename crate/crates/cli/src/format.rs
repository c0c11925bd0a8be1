//! Fixed float formatting for exported files.

/// Formats like C's `%.12g`, with a plain `e<exp>` exponent.
pub fn g12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim(format!("{v:.decimals$}"))
    } else {
        format!("{}e{exp}", trim(mantissa.to_string()))
    }
}

/// As [`g12`] but with magnitudes below 1e-12 printed as 0.
pub fn g12_snap(v: f64) -> String {
    if v.abs() < 1e-12 {
        "0".into()
    } else {
        g12(v)
    }
}

fn trim(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn join<I: IntoIterator<Item = f64>>(values: I, f: fn(f64) -> String) -> String {
    values.into_iter().map(f).collect::<Vec<_>>().join(" ")
}
