//! Log-space helpers. `-inf` is a legal log-probability throughout and
//! exponentiates to exactly zero.

use std::f64::consts::{LN_2, PI};

use statrs::function::erf::erfc;

/// `ln(1 + e^x)`, exact at both infinities.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `ln(1 / (1 + e^{-x}))`.
pub fn log_logistic(x: f64) -> f64 {
    -softplus(-x)
}

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(e^a + e^b)` with `-inf` as the additive identity.
pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if m == f64::INFINITY {
        return f64::INFINITY;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Natural log that maps zero weights to `-inf` rather than panicking or NaN.
pub fn ln0(x: f64) -> f64 {
    if x <= 0.0 {
        f64::NEG_INFINITY
    } else {
        x.ln()
    }
}

/// `ln Φ(x)` for the standard normal CDF, accurate far into the lower tail.
pub fn log_ndtr(x: f64) -> f64 {
    if x > 6.0 {
        // Φ(x) = 1 - Q(x) with Q tiny.
        return (-0.5 * erfc(x / std::f64::consts::SQRT_2)).ln_1p();
    }
    if x > -20.0 {
        return (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln();
    }
    // Asymptotic series of the Mills ratio.
    let x2 = x * x;
    let mut term = 1.0;
    let mut series = 1.0;
    for k in 1..8 {
        term *= -((2 * k - 1) as f64) / x2;
        series += term;
    }
    -0.5 * x2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
}

/// `ln φ(x)`.
pub fn log_npdf(x: f64) -> f64 {
    -0.5 * x * x - 0.5 * (2.0 * PI).ln()
}

pub const LOG_2: f64 = LN_2;

/// Format with `digits` significant digits, `%g` style.
pub fn fmt_sig(x: f64, digits: usize) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let exp = x.abs().log10().floor() as i32;
    if exp < -5 || exp >= digits as i32 {
        let s = format!("{:.*e}", digits.saturating_sub(1), x);
        let (mantissa, e) = s.split_once('e').expect("scientific format");
        format!("{}e{}", trim_zeros(mantissa), e)
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
