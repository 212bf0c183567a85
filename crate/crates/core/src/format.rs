//! Number formatting shared by CSV output and the CLI.

/// Formats `x` with `digits` significant digits in the style of C's `%g`:
/// trailing zeros are dropped, and scientific notation is used when the
/// decimal exponent is below −4 or at least `digits`.
pub fn sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::sig;

    #[test]
    fn matches_printf_g() {
        assert_eq!(sig(8.45, 12), "8.45");
        assert_eq!(sig(1.0 / 8.45, 12), "0.118343195266");
        assert_eq!(sig(45.0, 12), "45");
        assert_eq!(sig(1.5e-5, 12), "1.5e-05");
        assert_eq!(sig(-2.5e13, 12), "-2.5e+13");
        assert_eq!(sig(0.0, 12), "0");
        assert_eq!(sig(9.9999999999999, 3), "10");
        assert_eq!(sig(f64::INFINITY, 12), "inf");
        assert_eq!(sig(-0.123456789012345, 12), "-0.123456789012");
    }
}
