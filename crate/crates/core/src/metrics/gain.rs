use serde::{Deserialize, Serialize};

use super::MetricError;

/// Pre- and post-test scores on a 0 to 100 scale.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GainRecord {
    pub pre: f64,
    pub post: f64,
}

fn check(score: f64) -> Result<f64, MetricError> {
    if (0.0..=100.0).contains(&score) {
        Ok(score)
    } else {
        Err(MetricError::OutOfRange(score))
    }
}

/// Normalized learning gain `(post - pre) / 100`.
pub fn learning_gain(record: &GainRecord) -> Result<f64, MetricError> {
    Ok((check(record.post)? - check(record.pre)?) / 100.0)
}

pub fn mean_learning_gain(records: &[GainRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::Empty);
    }
    let sum = records.iter().map(learning_gain).sum::<Result<f64, _>>()?;
    Ok(sum / records.len() as f64)
}
