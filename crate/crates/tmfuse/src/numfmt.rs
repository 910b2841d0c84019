//! Number formatting shared by every command.

const SIG: i32 = 6;

/// Six significant digits in the style of C's `%g`: fixed notation for
/// decimal exponents in `[-4, 6)`, scientific otherwise, trailing zeros
/// removed.
pub fn g6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("exponent is an integer");
    if (-4..SIG).contains(&exp) {
        let decimals = (SIG - 1 - exp).max(0) as usize;
        trim(format!("{x:.decimals$}"))
    } else {
        let m = trim(mantissa.to_string());
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    }
}

fn trim(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Error rates print with six decimals.
pub fn rate(x: f64) -> String {
    format!("{x:.6}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn g_style() {
        assert_eq!(g6(0.0), "0");
        assert_eq!(g6(1.0), "1");
        assert_eq!(g6(123456.0), "123456");
        assert_eq!(g6(1234567.0), "1.23457e+06");
        assert_eq!(g6(0.1), "0.1");
        assert_eq!(g6(1.0 / 3.0), "0.333333");
        assert_eq!(g6(-2.5e-5), "-2.5e-05");
        assert_eq!(g6(0.0001), "0.0001");
        assert_eq!(g6(99.99999), "100");
        assert_eq!(g6(999999.5), "1e+06");
        assert_eq!(rate(0.0), "0.000000");
    }
}
