//! Number formatting shared by every text output.

/// Formats a float with 17 significant digits, enough to round-trip any `f64`.
pub fn f64_17(x: f64) -> String {
    if x.is_finite() {
        format!("{:.16e}", x)
    } else {
        x.to_string()
    }
}

pub fn bool_flag(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 123456789.123456789, f64::MIN_POSITIVE, 0.0] {
            let s = f64_17(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
        assert_eq!(f64_17(f64::INFINITY), "inf");
    }
}
