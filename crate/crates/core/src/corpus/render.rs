use super::{Session, Turn};

/// One transcript line for `turn`: speaker marker, content tags, then
/// act-level utterances. A turn with no utterances renders its tags only.
pub fn render_turn(turn: &Turn) -> String {
    let mut line = String::new();
    for tag in &turn.content_tags {
        line.push('[');
        line.push_str(&tag.activity_id);
        line.push(']');
        if let Some(body) = &tag.content_text {
            line.push('[');
            line.push_str(body);
            line.push(']');
        }
    }
    for u in &turn.utterances {
        if !line.is_empty() {
            line.push(' ');
        }
        line.push('[');
        line.push_str(u.act.as_str());
        line.push(']');
        if let Some(c) = u.correctness {
            line.push('[');
            line.push_str(c.as_str());
            line.push(']');
        }
        line.push_str(&u.text);
    }
    format!("{}: {}", turn.speaker, line)
}

pub(crate) fn header(session: &Session) -> String {
    format!(
        "=== session {} tutor={} student={} ===",
        session.id, session.tutor_id, session.student_id
    )
}

/// Renders a session as a standalone transcript document (header included).
pub fn render_transcript(session: &Session) -> String {
    let mut out = header(session);
    out.push('\n');
    for turn in &session.turns {
        out.push_str(&render_turn(turn));
        out.push('\n');
    }
    out
}

/// Concatenated multi-session archive, one blank line between sessions.
pub fn render_archive(sessions: &[Session]) -> String {
    sessions.iter().map(render_transcript).collect::<Vec<_>>().join("\n")
}
