use serde::{Deserialize, Serialize};

use super::{
    act_accuracy, act_invariability, coherence, corpus_bleu, embed_match_f1, length_stats, EmbeddingProvider,
    MatchScore, MetricError, PredictionRecord,
};
use crate::taxonomy::ActId;
use crate::Exec;

/// One results row. Act metrics are absent for runs without an act step;
/// utterance metrics are absent when no record produced an utterance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    /// Records that produced an utterance and were scored.
    pub n_scored: usize,
    pub n_failed: usize,
    pub accuracy: Option<f64>,
    pub invariability: Option<f64>,
    pub corpus_bleu: Option<f64>,
    pub embed_match: Option<MatchScore>,
    pub coherence: Option<f64>,
    pub length_mean: Option<f64>,
    pub length_std: Option<f64>,
}

struct Scored {
    matched: MatchScore,
    coherence: f64,
}

fn score_one<P: EmbeddingProvider + ?Sized>(
    provider: &P,
    generated: &str,
    r: &PredictionRecord,
) -> Result<Scored, MetricError> {
    let matched = embed_match_f1(
        &provider.embed_tokens(generated)?,
        &provider.embed_tokens(&r.gold_utterance)?,
    )?;
    Ok(Scored {
        matched,
        coherence: coherence(provider, generated, &r.prev_utterance)?,
    })
}

/// Assembles every tutor metric for one run. Records without a generated
/// utterance count against accuracy and invariability but are left out of
/// the utterance metrics. Embedding calls run on up to `concurrency` threads.
pub fn build_report<P: EmbeddingProvider + ?Sized>(
    records: &[PredictionRecord],
    provider: &P,
    teaching_acts: &[ActId],
    target: usize,
    exec: Exec,
    concurrency: usize,
) -> Result<EvalReport, MetricError> {
    if records.is_empty() {
        return Err(MetricError::Empty);
    }
    let with_acts = records.iter().any(PredictionRecord::has_act_step);
    let (accuracy, invariability) = if with_acts {
        (
            Some(act_accuracy(records)?),
            Some(act_invariability(records, teaching_acts, target)?),
        )
    } else {
        (None, None)
    };

    let scored: Vec<(&str, &PredictionRecord)> = records
        .iter()
        .filter_map(|r| r.generated.as_deref().map(|g| (g, r)))
        .collect();
    let n_failed = records.len() - scored.len();
    let mut report = EvalReport {
        n: records.len(),
        n_scored: scored.len(),
        n_failed,
        accuracy,
        invariability,
        corpus_bleu: None,
        embed_match: None,
        coherence: None,
        length_mean: None,
        length_std: None,
    };
    if scored.is_empty() {
        return Ok(report);
    }

    let hyps: Vec<&str> = scored.iter().map(|(g, _)| *g).collect();
    let refs: Vec<&str> = scored.iter().map(|(_, r)| r.gold_utterance.as_str()).collect();
    report.corpus_bleu = Some(corpus_bleu(&hyps, &refs)?);
    let lengths = length_stats(&hyps)?;
    report.length_mean = Some(lengths.mean);
    report.length_std = Some(lengths.std);

    let per = exec
        .map_bounded(&scored, concurrency.max(1), |(g, r)| score_one(provider, g, r))
        .into_iter()
        .collect::<Result<Vec<_>, _>>()?;
    let k = per.len() as f64;
    let mean = |f: &dyn Fn(&Scored) -> f64| per.iter().map(f).sum::<f64>() / k;
    report.embed_match = Some(MatchScore {
        precision: mean(&|s| s.matched.precision),
        recall: mean(&|s| s.matched.recall),
        f1: mean(&|s| s.matched.f1),
    });
    report.coherence = Some(mean(&|s| s.coherence));
    Ok(report)
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"))
}

/// Plain-text results table, one row per labelled report.
pub fn format_table(rows: &[(String, EvalReport)]) -> String {
    let header = [
        "Model".to_string(),
        "Accuracy".into(),
        "Invariability".into(),
        "sBLEU".into(),
        "EmbedF1".into(),
        "Coherence".into(),
        "Length".into(),
        "N".into(),
    ];
    let mut table: Vec<Vec<String>> = vec![header.to_vec()];
    for (label, r) in rows {
        table.push(vec![
            label.clone(),
            cell(r.accuracy),
            cell(r.invariability),
            cell(r.corpus_bleu),
            cell(r.embed_match.map(|m| m.f1)),
            cell(r.coherence),
            match (r.length_mean, r.length_std) {
                (Some(m), Some(s)) => format!("{m:.0} ± {s:.0}"),
                _ => "-".into(),
            },
            r.n.to_string(),
        ]);
    }
    let widths: Vec<usize> = (0..table[0].len())
        .map(|c| table.iter().map(|row| row[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for (i, row) in table.iter().enumerate() {
        let line: Vec<String> = row
            .iter()
            .zip(&widths)
            .map(|(v, w)| format!("{v}{}", " ".repeat(w - v.chars().count())))
            .collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            out.push_str(&rule.join("  "));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::HashEmbedder;
    use crate::Taxonomy;

    fn rec(i: usize, act: &ActId, generated: Option<&str>) -> PredictionRecord {
        PredictionRecord {
            scenario_id: format!("s{i:04}"),
            predicted_act: generated.map(|_| act.clone()),
            generated: generated.map(str::to_string),
            gold_act: act.clone(),
            gold_utterance: format!("정답 문장 {i} 입니다."),
            prev_utterance: "이전 발화".into(),
            failure: generated.is_none().then(|| "selection failed".to_string()),
            act_step: true,
        }
    }

    #[test]
    fn missing_prediction_excluded_from_utterance_metrics() {
        let t = Taxonomy::bundled().teaching_acts();
        let mut v: Vec<_> = (0..10)
            .map(|i| rec(i, &t[0], Some(&format!("정답 문장 {i} 입니다."))))
            .collect();
        v[3] = rec(3, &t[0], None);
        let r = build_report(&v, &HashEmbedder::default(), &t, 10, Exec::Sequential, 2).unwrap();
        assert_eq!((r.n, r.n_scored, r.n_failed), (10, 9, 1));
        assert_eq!(r.accuracy, Some(0.9));
        assert_eq!(r.corpus_bleu, Some(100.0));
        assert!((r.embed_match.unwrap().f1 - 1.0).abs() < 1e-12);
        let table = format_table(&[("gold".into(), r)]);
        assert!(table.starts_with("Model  Accuracy  Invariability  sBLEU"));
        assert!(table.contains("0.900"));
    }

    #[test]
    fn baseline_has_no_act_metrics() {
        let t = Taxonomy::bundled().teaching_acts();
        let mut r = rec(0, &t[0], Some("a b"));
        r.predicted_act = None;
        r.act_step = false;
        let rep = build_report(&[r], &HashEmbedder::default(), &t, 10, Exec::Sequential, 1).unwrap();
        assert_eq!((rep.accuracy, rep.invariability), (None, None));
        assert!(format_table(&[("baseline".into(), rep)])
            .lines()
            .nth(2)
            .unwrap()
            .contains("baseline  -"));
    }
}
