use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::MetricError;
use crate::Exec;

const MAX_ORDER: usize = 4;

fn rules() -> &'static [(Regex, &'static str); 4] {
    static RULES: OnceLock<[(Regex, &'static str); 4]> = OnceLock::new();
    RULES.get_or_init(|| {
        let re = |p: &str| Regex::new(p).expect("static pattern");
        [
            // symbols and most ASCII punctuation
            (re(r"([\x7B-\x7E\x5B-\x60\x20-\x26\x28-\x2B\x3A-\x40/])"), " ${1} "),
            // period and comma unless preceded by a digit
            (re(r"([^0-9])([.,])"), "${1} ${2} "),
            // period and comma unless followed by a digit
            (re(r"([.,])([^0-9])"), " ${1} ${2}"),
            // dash after a digit
            (re(r"([0-9])(-)"), "${1} ${2} "),
        ]
    })
}

/// The `13a` tokenizer used by standard corpus BLEU.
pub fn tokenize_13a(text: &str) -> Vec<String> {
    let mut line = text.replace("<skipped>", "").replace("-\n", "").replace('\n', " ");
    if line.contains('&') {
        line = line
            .replace("&quot;", "\"")
            .replace("&amp;", "&")
            .replace("&lt;", "<")
            .replace("&gt;", ">");
    }
    let mut line = format!(" {line} ");
    for (re, rep) in rules() {
        line = re.replace_all(&line, *rep).into_owned();
    }
    line.split_whitespace().map(str::to_string).collect()
}

/// Sufficient statistics and score of one corpus BLEU computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BleuStats {
    pub score: f64,
    pub counts: [usize; MAX_ORDER],
    pub totals: [usize; MAX_ORDER],
    pub sys_len: usize,
    pub ref_len: usize,
    pub brevity_penalty: f64,
}

fn ngrams(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut m = HashMap::new();
    if tokens.len() >= n {
        for w in tokens.windows(n) {
            *m.entry(w).or_insert(0) += 1;
        }
    }
    m
}

struct Sentence {
    counts: [usize; MAX_ORDER],
    totals: [usize; MAX_ORDER],
    sys_len: usize,
    ref_len: usize,
}

fn sentence_stats(hyp: &str, reference: &str) -> Sentence {
    let h = tokenize_13a(hyp);
    let r = tokenize_13a(reference);
    let mut s = Sentence {
        counts: [0; MAX_ORDER],
        totals: [0; MAX_ORDER],
        sys_len: h.len(),
        ref_len: r.len(),
    };
    for n in 1..=MAX_ORDER {
        let hg = ngrams(&h, n);
        let rg = ngrams(&r, n);
        s.totals[n - 1] = h.len().saturating_sub(n - 1);
        s.counts[n - 1] = hg.iter().map(|(g, c)| (*c).min(rg.get(g).copied().unwrap_or(0))).sum();
    }
    s
}

fn log_or_floor(x: f64) -> f64 {
    if x == 0.0 {
        -9_999_999_999.0
    } else {
        x.ln()
    }
}

/// Corpus BLEU over single references: `13a` tokens, orders 1 to 4, clipped
/// counts pooled over the corpus, exponential smoothing of zero counts and a
/// brevity penalty when the system side is shorter.
pub fn corpus_bleu_stats<H, R>(hypotheses: &[H], references: &[R], exec: Exec) -> Result<BleuStats, MetricError>
where
    H: AsRef<str> + Sync,
    R: AsRef<str> + Sync,
{
    if hypotheses.len() != references.len() {
        return Err(MetricError::LengthMismatch {
            hyp: hypotheses.len(),
            refs: references.len(),
        });
    }
    if hypotheses.is_empty() {
        return Err(MetricError::Empty);
    }
    let pairs: Vec<(&str, &str)> = hypotheses
        .iter()
        .zip(references)
        .map(|(h, r)| (h.as_ref(), r.as_ref()))
        .collect();
    let per = exec.map(&pairs, |(h, r)| sentence_stats(h, r));
    let mut counts = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    let (mut sys_len, mut ref_len) = (0, 0);
    for s in &per {
        for n in 0..MAX_ORDER {
            counts[n] += s.counts[n];
            totals[n] += s.totals[n];
        }
        sys_len += s.sys_len;
        ref_len += s.ref_len;
    }

    let bp = if sys_len < ref_len {
        if sys_len > 0 {
            (1.0 - ref_len as f64 / sys_len as f64).exp()
        } else {
            0.0
        }
    } else {
        1.0
    };
    let mut stats = BleuStats {
        score: 0.0,
        counts,
        totals,
        sys_len,
        ref_len,
        brevity_penalty: bp,
    };
    if counts.iter().all(|&c| c == 0) {
        return Ok(stats);
    }
    let mut precisions = [0.0f64; MAX_ORDER];
    let mut smooth = 1.0;
    for n in 0..MAX_ORDER {
        if totals[n] == 0 {
            break;
        }
        precisions[n] = if counts[n] == 0 {
            smooth *= 2.0;
            100.0 / (smooth * totals[n] as f64)
        } else {
            100.0 * counts[n] as f64 / totals[n] as f64
        };
    }
    let mean_log = precisions.iter().map(|&p| log_or_floor(p)).sum::<f64>() / MAX_ORDER as f64;
    stats.score = (bp * mean_log.exp()).clamp(0.0, 100.0);
    Ok(stats)
}

/// Corpus BLEU in `[0, 100]`.
pub fn corpus_bleu<H, R>(hypotheses: &[H], references: &[R]) -> Result<f64, MetricError>
where
    H: AsRef<str> + Sync,
    R: AsRef<str> + Sync,
{
    corpus_bleu_stats(hypotheses, references, Exec::default()).map(|s| s.score)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<String> {
        tokenize_13a(s)
    }

    // expected tokens produced by the reference tokenizer
    #[test]
    fn tokenizer_matches_reference() {
        assert_eq!(toks("Hello, world!"), ["Hello", ",", "world", "!"]);
        assert!(toks("").is_empty());
        assert_eq!(toks("가나다"), ["가나다"]);
        assert_eq!(
            toks("It costs $1,000 or 3.5%."),
            ["It", "costs", "$", "1,000", "or", "3.5", "%", "."]
        );
        assert_eq!(
            toks("a 10-year-old child & her mom <3"),
            ["a", "10", "-", "year-old", "child", "&", "her", "mom", "<", "3"]
        );
        assert_eq!(
            toks("Unit 4.2, page 17-18 [see notes]"),
            ["Unit", "4.2", ",", "page", "17", "-", "18", "[", "see", "notes", "]"]
        );
        assert_eq!(toks("a &amp; b\nc"), ["a", "&", "b", "c"]);
    }

    // scores from the reference implementation on single-sentence corpora
    #[test]
    fn smoothing_and_brevity_match_reference() {
        let cases = [
            (
                "the cat sat on a hat today",
                "the cat lay on the mat yesterday",
                14.535768424205482,
            ),
            ("a b c d", "a x y z w", 12.44023474812678),
            ("합니다 좋아요", "좋아요 합니다", 0.0),
            (
                "alpha beta gamma delta epsilon zeta eta theta",
                "one two three four five six seven eight",
                0.0,
            ),
            ("the cat sat", "the cat sat on the mat", 0.0),
        ];
        for (h, r, want) in cases {
            let got = corpus_bleu(&[h], &[r]).unwrap();
            assert!((got - want).abs() < 1e-9, "{h}: {got} vs {want}");
        }
    }

    #[test]
    fn identity_and_errors() {
        let x = ["좋아요. 그럼 Activity3-9로 넘어가 볼까요?", "Great job!"];
        assert_eq!(corpus_bleu(&x, &x).unwrap(), 100.0);
        assert_eq!(
            corpus_bleu(&["a"], &["a", "b"]).unwrap_err(),
            MetricError::LengthMismatch { hyp: 1, refs: 2 }
        );
        assert_eq!(corpus_bleu::<&str, &str>(&[], &[]).unwrap_err(), MetricError::Empty);
    }
}
