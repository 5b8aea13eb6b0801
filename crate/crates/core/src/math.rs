use crate::error::{Error, Result};

/// ln Σ exp(x_i), evaluated in the order given. Returns −∞ for an empty input.
pub fn log_sum_exp<I>(values: I) -> f64
where
    I: IntoIterator<Item = f64>,
    I::IntoIter: Clone,
{
    let iter = values.into_iter();
    let max = iter.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    let sum: f64 = iter.map(|v| (v - max).exp()).sum();
    max + sum.ln()
}

/// |ln Z* − ln Z| / ln Z.
pub fn log_relative_error(ln_z_est: f64, ln_z_true: f64) -> Result<f64> {
    if !(ln_z_true.is_finite() && ln_z_true > 0.0) {
        return Err(Error::domain(format!(
            "log relative error needs ln Z > 0, got {ln_z_true}"
        )));
    }
    if !ln_z_est.is_finite() {
        return Err(Error::domain(format!("estimate ln Z* = {ln_z_est} is not finite")));
    }
    Ok((ln_z_est - ln_z_true).abs() / ln_z_true)
}
