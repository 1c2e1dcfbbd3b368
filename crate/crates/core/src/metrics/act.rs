use std::collections::BTreeMap;

use super::{MetricError, PredictionRecord};
use crate::taxonomy::ActId;

/// Scenarios per teaching act in the standard evaluation set.
pub const DEFAULT_TARGET: usize = 10;

/// Fraction of records whose predicted act equals the gold act. A missing
/// prediction counts as wrong.
pub fn act_accuracy(records: &[PredictionRecord]) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::Empty);
    }
    let hits = records
        .iter()
        .filter(|r| r.predicted_act.as_ref() == Some(&r.gold_act))
        .count();
    Ok(hits as f64 / records.len() as f64)
}

/// Mean absolute deviation of per-act prediction counts from a target.
///
/// The deviation is taken over every teaching act (target `target`) and every
/// other act that was predicted at least once (target 0), so the score is 0
/// only when each teaching act is predicted exactly `target` times and
/// nothing else is predicted.
pub fn act_invariability(
    records: &[PredictionRecord],
    teaching_acts: &[ActId],
    target: usize,
) -> Result<f64, MetricError> {
    if records.is_empty() {
        return Err(MetricError::Empty);
    }
    let mut counts: BTreeMap<&ActId, (usize, usize)> = teaching_acts.iter().map(|a| (a, (0, target))).collect();
    for a in records.iter().filter_map(|r| r.predicted_act.as_ref()) {
        counts.entry(a).or_insert((0, 0)).0 += 1;
    }
    if counts.is_empty() {
        return Ok(0.0);
    }
    let total: usize = counts.values().map(|&(c, t)| c.abs_diff(t)).sum();
    Ok(total as f64 / counts.len() as f64)
}
