//! Small shared numerical helpers: normal distribution functions and
//! stable log-weight manipulation.

/// Standard normal probability density.
pub(crate) fn norm_pdf(x: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal cumulative distribution via the error function.
pub(crate) fn norm_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x * std::f64::consts::FRAC_1_SQRT_2))
}

/// `ln Σ exp(x_i)` with max shift; tolerates `-inf` entries.
pub(crate) fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - m).exp()).sum();
    m + sum.ln()
}

/// Shifts log weights in place so the weights sum to one.
///
/// Returns the log normalizer that was subtracted. `-inf` entries are kept
/// (zero weight); the normalizer must be finite, i.e. at least one weight
/// must be positive and none may be `NaN` or `+inf`.
pub(crate) fn normalize_log_weights(lw: &mut [f64]) -> crate::error::Result<f64> {
    if lw.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
        return Err(crate::error::Error::InvalidInput(
            "log weight is NaN or +inf".into(),
        ));
    }
    let lse = logsumexp(lw);
    if !lse.is_finite() {
        return Err(crate::error::Error::InvalidInput(
            "all log weights are -inf; nothing to normalize".into(),
        ));
    }
    for w in lw.iter_mut() {
        *w -= lse;
    }
    Ok(lse)
}

/// Sample mean and (n−1)-denominator sample standard deviation.
pub(crate) fn mean_and_sample_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------
