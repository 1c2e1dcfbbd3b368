//! Toolkit for act-annotated bilingual tutoring dialogues.
//!
//! The crate is organised around the life cycle of a tutoring corpus:
//!
//! - [`taxonomy`] loads the tutor/student dialogue-act vocabulary.
//! - [`corpus`] parses, renders, splits and summarises bracket-annotated transcripts.
//! - [`context`] renders dialogue prefixes the way prompts and training samples see them.
//! - [`instruct`] compiles a corpus into instruction-tuning records.
//! - [`scenario`] builds the evaluation scenario set from held-out sessions.
//! - [`engine`] runs the act-selection then utterance-generation tutor over a chat provider.
//! - [`metrics`] scores tutors and annotations.
//!
//! Batch work (sample building, scenario evaluation, per-record scoring) goes
//! through [`Exec`], which uses rayon when the `parallel` feature is enabled and
//! plain iteration otherwise.

pub mod context;
pub mod corpus;
pub mod engine;
pub mod instruct;
pub mod jsonl;
pub mod metrics;
mod par;
pub mod scenario;
pub mod taxonomy;

pub use context::DialogueContext;
pub use corpus::{ActUtterance, ContentTag, Correctness, Session, Turn};
pub use par::Exec;
pub use taxonomy::{ActDef, ActId, Category, Role, Taxonomy};

/// The synthetic annotated corpus and expert file bundled with the crate.
pub mod fixtures {
    use crate::corpus::{parse_archive, Session};
    use crate::instruct::ExpertRow;
    use crate::Taxonomy;

    pub const CORPUS: &str = include_str!("../data/fixtures/corpus.txt");
    pub const EXPERT: &str = include_str!("../data/fixtures/expert.jsonl");

    pub fn corpus() -> Vec<Session> {
        parse_archive(CORPUS, Taxonomy::bundled()).expect("bundled fixture parses")
    }

    pub fn expert_rows() -> Vec<ExpertRow> {
        crate::jsonl::parse(EXPERT, "expert.jsonl").expect("bundled expert file parses")
    }
}
