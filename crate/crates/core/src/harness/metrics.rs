use crate::error::{Error, Result};

/// Average of the per-epoch test accuracies.
pub fn auac(curve: &[f64]) -> Result<f64> {
    if curve.is_empty() {
        return Err(Error::Usage("auac needs at least one epoch".into()));
    }
    Ok(curve.iter().sum::<f64>() / curve.len() as f64)
}

pub fn best(curve: &[f64]) -> Option<f64> {
    curve.iter().copied().reduce(f64::max)
}

/// 1-based epoch of the first maximum.
pub fn best_epoch(curve: &[f64]) -> Option<usize> {
    let b = best(curve)?;
    curve.iter().position(|&v| v == b).map(|i| i + 1)
}

/// Percent of the `E` epochs saved when the method first reaches the
/// reference's best accuracy at epoch `e`: `round(100·(E−e)/E)`. `None`
/// when the method never gets there.
pub fn time_reduction(method: &[f64], reference: &[f64]) -> Result<Option<u32>> {
    if method.len() != reference.len() || method.is_empty() {
        return Err(Error::Usage(format!(
            "time reduction needs equal, non-empty curves ({} vs {})",
            method.len(),
            reference.len()
        )));
    }
    let target = best(reference).expect("non-empty");
    let total = method.len() as f64;
    Ok(method
        .iter()
        .position(|&a| a >= target)
        .map(|i| (100.0 * (total - (i + 1) as f64) / total).round() as u32))
}

/// Mean and maximum absolute deviation from it.
pub fn mean_spread(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let spread = values.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
    Some((mean, spread))
}
