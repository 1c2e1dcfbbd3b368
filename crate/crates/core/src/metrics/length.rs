use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthStats {
    pub mean: f64,
    pub std: f64,
}

/// Mean and population standard deviation of whitespace token counts.
pub fn length_stats<S: AsRef<str>>(texts: &[S]) -> Result<LengthStats, MetricError> {
    if texts.is_empty() {
        return Err(MetricError::Empty);
    }
    let lens: Vec<f64> = texts
        .iter()
        .map(|t| t.as_ref().split_whitespace().count() as f64)
        .collect();
    let n = lens.len() as f64;
    let mean = lens.iter().sum::<f64>() / n;
    let var = lens.iter().map(|l| (l - mean).powi(2)).sum::<f64>() / n;
    Ok(LengthStats { mean, std: var.sqrt() })
}
