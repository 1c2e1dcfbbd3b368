//! Live tutoring sessions over HTTP, plus the `tutorkit` pipeline CLI.
//!
//! Each session is an append-only event log (`created`, `student_message`,
//! `tutor_step`, `error`) stored as one JSON-lines file. The in-memory
//! [`LiveSession`] is always the fold of that log, so a restarted server
//! picks up where it left off.

pub mod cli;
pub mod live;
pub mod server;
pub mod store;

pub use live::{LiveSession, ReplayError};
pub use server::{router, AppState};
pub use store::{EventBody, EventStore, SessionEvent};
