//! Small sample statistics shared by the report tables.

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance; `None` below two observations.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs);
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

pub fn standard_error(xs: &[f64]) -> Option<f64> {
    sample_variance(xs).map(|v| (v / xs.len() as f64).sqrt())
}

/// Welch two-sample t-statistic of `mean(a) − mean(b)`.
///
/// Returns `Some(0.0)` when the means coincide, even with zero variances.
pub fn welch_t(a: &[f64], b: &[f64]) -> Option<f64> {
    let va = sample_variance(a)?;
    let vb = sample_variance(b)?;
    let diff = mean(a) - mean(b);
    if diff == 0.0 {
        return Some(0.0);
    }
    let se = (va / a.len() as f64 + vb / b.len() as f64).sqrt();
    if se == 0.0 {
        return None;
    }
    Some(diff / se)
}

/// One-sample t-statistic of `mean(xs) − mu`; `None` when the variance is zero or n < 2.
pub fn one_sample_t(xs: &[f64], mu: f64) -> Option<f64> {
    let se = standard_error(xs)?;
    if se == 0.0 {
        return None;
    }
    Some((mean(xs) - mu) / se)
}
