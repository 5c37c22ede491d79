use statrs::function::factorial::ln_factorial;

use super::ContingencyTable;

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Slack on the probability ratio when comparing a table against the observed one.
const TIE_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherResult {
    pub p_value: f64,
    pub significant: bool,
}

/// Two-sided Fisher exact test on a 2x2 table: the probability, under fixed
/// margins, of every table no more likely than the observed one.
pub fn fisher_exact(t: &ContingencyTable, alpha: f64) -> FisherResult {
    let n = t.n();
    let row1 = t.a + t.b;
    let col1 = t.a + t.c;
    let row2 = n - row1;
    let lo = col1.saturating_sub(row2);
    let hi = row1.min(col1);

    // Log-probability up to the margin-only constant.
    let ln_weight = |x: u64| {
        -(ln_factorial(x)
            + ln_factorial(row1 - x)
            + ln_factorial(col1 - x)
            + ln_factorial(row2 + x - col1))
    };
    let observed = ln_weight(t.a);
    // Summation rounding of the log-factorials grows with their magnitude.
    let threshold = observed + TIE_SLACK + 8.0 * f64::EPSILON * observed.abs();
    let peak = (lo..=hi).map(ln_weight).fold(f64::NEG_INFINITY, f64::max);

    let (mut total, mut tail) = (0.0, 0.0);
    for x in lo..=hi {
        let lw = ln_weight(x);
        let w = (lw - peak).exp();
        total += w;
        if lw <= threshold {
            tail += w;
        }
    }
    let p_value = (tail / total).min(1.0);
    FisherResult {
        p_value,
        significant: p_value <= alpha,
    }
}
