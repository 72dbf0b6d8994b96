//! Small shared statistics helpers.

/// Sample mean and standard error of the mean.
///
/// The sum runs in slice order so results are reproducible; callers are
/// expected to assemble `values` in a deterministic order. Requires at
/// least two values.
pub(crate) fn mean_and_std_error(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    debug_assert!(values.len() >= 2);
    let mean = values.iter().sum::<f64>() / n;
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    let std_error = (ss / (n - 1.0) / n).sqrt();
    (mean, std_error)
}
