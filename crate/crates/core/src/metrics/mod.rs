//! Evaluation and annotation metrics.
//!
//! Tutor quality: [`act_accuracy`], [`act_invariability`], [`corpus_bleu`],
//! [`embed_match_f1`], [`coherence`] and [`length_stats`], assembled by
//! [`build_report`]. Annotation quality: [`fleiss_kappa`] and
//! [`confusion_pairs`]. Student outcome: [`learning_gain`].

mod act;
mod agreement;
mod bleu;
mod embed;
mod gain;
mod length;
mod report;

use serde::{Deserialize, Serialize};

use crate::taxonomy::ActId;

pub use act::{act_accuracy, act_invariability, DEFAULT_TARGET};
pub use agreement::{confusion_pairs, fleiss_kappa, RatingMatrix};
pub use bleu::{corpus_bleu, corpus_bleu_stats, tokenize_13a, BleuStats};
pub use embed::{
    coherence, cosine, embed_match_f1, EmbedError, EmbeddingProvider, FileEmbedder, HashEmbedder, HttpEmbedder,
    MatchScore,
};
pub use gain::{learning_gain, mean_learning_gain, GainRecord};
pub use length::{length_stats, LengthStats};
pub use report::{build_report, format_table, EvalReport};

/// One evaluated scenario.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub scenario_id: String,
    /// Selected act; absent for the single-call baseline and on selection failure.
    #[serde(default)]
    pub predicted_act: Option<ActId>,
    /// Generated utterance; absent when the engine failed before generating.
    #[serde(default)]
    pub generated: Option<String>,
    pub gold_act: ActId,
    pub gold_utterance: String,
    pub prev_utterance: String,
    /// Why no prediction was produced, when one is missing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
    /// The run selected an act before generating (false for the baseline).
    #[serde(default)]
    pub act_step: bool,
}

impl PredictionRecord {
    pub fn has_act_step(&self) -> bool {
        self.act_step
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("input is empty")]
    Empty,
    #[error("{hyp} hypotheses but {refs} references")]
    LengthMismatch { hyp: usize, refs: usize },
    #[error("vector dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("rating matrix rows must sum to the same number of raters (at least 2)")]
    RaggedMatrix,
    #[error("kappa is undefined when every rating falls in one category")]
    UndefinedKappa,
    #[error("score {0} is outside [0, 100]")]
    OutOfRange(f64),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}
