//! Log-likelihood ratio arithmetic.
//!
//! Convention throughout the crate: `LLR = ln(P(bit = 0) / P(bit = 1))`, so a
//! positive value favours bit 0.

/// Saturation magnitude applied to every message.
pub const LLR_MAX: f64 = 40.0;

/// Clamp to `[-LLR_MAX, LLR_MAX]`. NaN maps to 0.
#[inline]
pub fn saturate(x: f64) -> f64 {
    if x.is_nan() {
        0.0
    } else {
        x.clamp(-LLR_MAX, LLR_MAX)
    }
}

/// Hard decision; ties go to bit 0.
#[inline]
pub fn hard(x: f64) -> u8 {
    u8::from(x < 0.0)
}

/// Check-node combination of two LLRs.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum CheckRule {
    /// `2 atanh(tanh(a/2) tanh(b/2))`.
    Exact,
    /// `scale * sign(a) sign(b) min(|a|, |b|)`.
    MinSum { scale: f64 },
}

impl Default for CheckRule {
    fn default() -> Self {
        CheckRule::Exact
    }
}

impl CheckRule {
    pub const SCALED_MIN_SUM: CheckRule = CheckRule::MinSum { scale: 0.9375 };

    #[inline]
    pub fn combine(self, a: f64, b: f64) -> f64 {
        match self {
            CheckRule::Exact => boxplus(a, b),
            CheckRule::MinSum { scale } => scale * min_sum(a, b),
        }
    }
}

/// Exact box-plus, evaluated as
/// `sign(a) sign(b) min(|a|,|b|) + ln(1+e^{-|a+b|}) - ln(1+e^{-|a-b|})`
/// which avoids the cancellation of the tanh form for large inputs.
#[inline]
pub fn boxplus(a: f64, b: f64) -> f64 {
    let m = min_sum(a, b);
    let (s, d) = ((a + b).abs(), (a - b).abs());
    // beyond this both correction terms vanish in double precision
    const NEGLIGIBLE: f64 = 37.0;
    if s.min(d) > NEGLIGIBLE {
        return m;
    }
    let (es, ed) = ((-s).exp(), (-d).exp());
    // ln(1 + es) - ln(1 + ed) as a single logarithm
    m + ((es - ed) / (1.0 + ed)).ln_1p()
}

#[inline]
pub fn min_sum(a: f64, b: f64) -> f64 {
    let m = a.abs().min(b.abs());
    if (a < 0.0) != (b < 0.0) {
        -m
    } else {
        m
    }
}

/// Two-argument Jacobian logarithm `ln(e^a + e^b)`. Accepts `-inf`.
#[inline]
pub fn maxstar2(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// Max-log approximation of [`maxstar2`].
#[inline]
pub fn maxlog2(a: f64, b: f64) -> f64 {
    a.max(b)
}

/// `ln(sum_j e^{x_j})` over a non-empty slice; `-inf` entries contribute nothing.
///
/// Returns `None` for an empty slice.
pub fn maxstar(values: &[f64]) -> Option<f64> {
    let max = values.iter().copied().fold(None, |acc: Option<f64>, x| {
        Some(acc.map_or(x, |m| m.max(x)))
    })?;
    if max.is_infinite() {
        return Some(max);
    }
    // sum of exp(x - max) over every entry except one occurrence of the maximum
    let arg_max = values.iter().position(|&x| x == max)?;
    let residual: f64 = values
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != arg_max)
        .map(|(_, &x)| (x - max).exp())
        .sum();
    Some(max + residual.ln_1p())
}

/// `ln(1 + e^{-x})`, evaluated without overflow.
#[inline]
pub fn softplus_neg(x: f64) -> f64 {
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}
