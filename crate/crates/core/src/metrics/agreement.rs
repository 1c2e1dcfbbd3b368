use std::collections::BTreeMap;

use super::MetricError;

/// Items by categories; each cell counts the raters who chose that category.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RatingMatrix {
    rows: Vec<Vec<u32>>,
    raters: u32,
}

impl RatingMatrix {
    pub fn new(rows: Vec<Vec<u32>>) -> Result<Self, MetricError> {
        let first = rows.first().ok_or(MetricError::Empty)?;
        let width = first.len();
        let raters: u32 = first.iter().sum();
        if raters < 2 || rows.iter().any(|r| r.len() != width || r.iter().sum::<u32>() != raters) {
            return Err(MetricError::RaggedMatrix);
        }
        Ok(RatingMatrix { rows, raters })
    }

    pub fn raters(&self) -> u32 {
        self.raters
    }

    pub fn rows(&self) -> &[Vec<u32>] {
        &self.rows
    }
}

/// Fleiss' kappa for a fixed number of raters per item.
pub fn fleiss_kappa(m: &RatingMatrix) -> Result<f64, MetricError> {
    let n = f64::from(m.raters);
    let items = m.rows.len() as f64;
    let width = m.rows[0].len();
    let p_bar = m
        .rows
        .iter()
        .map(|r| r.iter().map(|&c| f64::from(c) * (f64::from(c) - 1.0)).sum::<f64>() / (n * (n - 1.0)))
        .sum::<f64>()
        / items;
    let pe: f64 = (0..width)
        .map(|j| {
            let pj = m.rows.iter().map(|r| f64::from(r[j])).sum::<f64>() / (items * n);
            pj * pj
        })
        .sum();
    if (1.0 - pe).abs() < 1e-15 {
        return Err(MetricError::UndefinedKappa);
    }
    Ok((p_bar - pe) / (1.0 - pe))
}

/// Counts, over all items, unordered label pairs assigned by different raters
/// to the same item. Sorted by count descending, then by pair.
pub fn confusion_pairs<T: Ord + Clone>(annotations: &[Vec<T>]) -> Vec<(T, T, usize)> {
    let mut counts: BTreeMap<(T, T), usize> = BTreeMap::new();
    for labels in annotations {
        for (i, a) in labels.iter().enumerate() {
            for b in &labels[i + 1..] {
                if a != b {
                    let key = if a < b {
                        (a.clone(), b.clone())
                    } else {
                        (b.clone(), a.clone())
                    };
                    *counts.entry(key).or_insert(0) += 1;
                }
            }
        }
    }
    let mut out: Vec<(T, T, usize)> = counts.into_iter().map(|((a, b), c)| (a, b, c)).collect();
    out.sort_by(|x, y| y.2.cmp(&x.2).then_with(|| (&x.0, &x.1).cmp(&(&y.0, &y.1))));
    out
}
