use std::collections::HashSet;
use std::path::Path;

use super::{ActUtterance, ContentTag, Correctness, InvalidSession, Session, Turn};
use crate::taxonomy::{is_act_id, ActId, Category, Role, Taxonomy};

const HEADER_PREFIX: &str = "=== session ";
const DEFAULT_ID: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("expected a line starting with `tutor: ` or `student: `")]
    MissingSpeaker,
    #[error("text before the first act tag")]
    TextBeforeActTag,
    #[error("turn has no act tag")]
    MissingActTag,
    #[error("unknown act `{0}`")]
    UnknownAct(String),
    #[error("act `{act}` cannot be spoken by {speaker}")]
    SpeakerMismatch { act: String, speaker: Role },
    #[error("correctness tag `[{0}]` in an illegal position")]
    IllegalCorrectness(String),
    #[error("unbalanced or nested square bracket")]
    UnbalancedBracket,
    #[error("tag `[{0}]` after the first act tag (brackets inside utterance text are not supported)")]
    TagAfterAct(String),
    #[error("act `{0}` has no utterance text")]
    EmptyUtterance(String),
    #[error("empty tag `[]`")]
    EmptyTag,
    #[error("malformed session header")]
    BadHeader,
    #[error("session has no turns")]
    EmptySession,
    #[error("duplicate session id `{0}`")]
    DuplicateSession(String),
    #[error("{0}")]
    Invalid(InvalidSession),
    #[error("{0}")]
    Io(String),
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

fn speaker_marker(line: &str) -> Option<(Role, &str)> {
    for role in [Role::Tutor, Role::Student] {
        let name = role.as_str();
        if let Some(rest) = line.strip_prefix(name).and_then(|r| r.strip_prefix(':')) {
            if rest.is_empty() {
                return Some((role, rest));
            }
            if let Some(rest) = rest.strip_prefix(' ') {
                return Some((role, rest));
            }
        }
    }
    None
}

/// Lines that start a turn or a session and therefore cannot occur inside
/// utterance text.
pub(crate) fn is_structural_line(line: &str) -> bool {
    speaker_marker(line).is_some() || line.starts_with(HEADER_PREFIX)
}

fn parse_header(line: &str) -> Option<(String, String, String)> {
    let inner = line.strip_prefix(HEADER_PREFIX)?.strip_suffix(" ===")?;
    let mut parts = inner.split(' ');
    let id = parts.next()?.to_string();
    let tutor = parts.next()?.strip_prefix("tutor=")?.to_string();
    let student = parts.next()?.strip_prefix("student=")?.to_string();
    if parts.next().is_some() || id.is_empty() || tutor.is_empty() || student.is_empty() {
        return None;
    }
    Some((id, tutor, student))
}

enum Piece<'a> {
    Tag(&'a str, usize),
    Text(&'a str),
}

fn tokenize(body: &str, first_line: usize) -> Result<Vec<Piece<'_>>, ParseError> {
    let mut out = Vec::new();
    let mut rest = body;
    let mut consumed = 0usize;
    let line_at = |offset: usize| first_line + body[..offset].matches('\n').count();
    while !rest.is_empty() {
        match rest.find(['[', ']']) {
            None => {
                out.push(Piece::Text(rest));
                break;
            }
            Some(pos) => {
                if rest.as_bytes()[pos] == b']' {
                    return Err(err(line_at(consumed + pos), ParseErrorKind::UnbalancedBracket));
                }
                if pos > 0 {
                    out.push(Piece::Text(&rest[..pos]));
                }
                let after = &rest[pos + 1..];
                let close = after
                    .find(['[', ']'])
                    .filter(|&i| after.as_bytes()[i] == b']')
                    .ok_or_else(|| err(line_at(consumed + pos), ParseErrorKind::UnbalancedBracket))?;
                let tag = &after[..close];
                if tag.contains('\n') {
                    return Err(err(line_at(consumed + pos), ParseErrorKind::UnbalancedBracket));
                }
                out.push(Piece::Tag(tag, line_at(consumed + pos)));
                let step = pos + 1 + close + 1;
                consumed += step;
                rest = &rest[step..];
            }
        }
    }
    Ok(out)
}

fn parse_turn(speaker: Role, body: &str, first_line: usize, taxonomy: &Taxonomy) -> Result<Turn, ParseError> {
    let pieces = tokenize(body, first_line)?;
    let mut loose_tags: Vec<&str> = Vec::new();
    let mut utterances: Vec<ActUtterance> = Vec::new();
    let mut buffer = String::new();
    let mut line = first_line;

    let finish = |utts: &mut Vec<ActUtterance>, buf: &mut String, line: usize| {
        if let Some(last) = utts.last_mut() {
            let text = buf.trim();
            if text.is_empty() {
                return Err(err(line, ParseErrorKind::EmptyUtterance(last.act.to_string())));
            }
            last.text = text.to_string();
        }
        buf.clear();
        Ok(())
    };

    for piece in pieces {
        match piece {
            Piece::Text(t) => {
                if utterances.is_empty() {
                    if !t.trim().is_empty() {
                        return Err(err(line, ParseErrorKind::TextBeforeActTag));
                    }
                } else {
                    buffer.push_str(t);
                }
            }
            Piece::Tag(tag, tag_line) => {
                line = tag_line;
                if tag.is_empty() {
                    return Err(err(line, ParseErrorKind::EmptyTag));
                }
                if is_act_id(tag) {
                    let act = ActId::parse(tag).expect("grammar checked");
                    let Some(def) = taxonomy.get(&act) else {
                        return Err(err(line, ParseErrorKind::UnknownAct(tag.to_string())));
                    };
                    if def.role() != speaker {
                        return Err(err(
                            line,
                            ParseErrorKind::SpeakerMismatch {
                                act: tag.to_string(),
                                speaker,
                            },
                        ));
                    }
                    finish(&mut utterances, &mut buffer, line)?;
                    utterances.push(ActUtterance::new(act, String::new()));
                } else if let Ok(level) = tag.parse::<Correctness>() {
                    let legal = match utterances.last() {
                        Some(u) => {
                            buffer.is_empty()
                                && u.correctness.is_none()
                                && taxonomy
                                    .get(&u.act)
                                    .is_some_and(|d| d.role() == Role::Student && d.category == Category::Answer)
                        }
                        None => false,
                    };
                    if !legal {
                        return Err(err(line, ParseErrorKind::IllegalCorrectness(tag.to_string())));
                    }
                    utterances.last_mut().expect("checked").correctness = Some(level);
                } else if utterances.is_empty() {
                    loose_tags.push(tag);
                } else {
                    return Err(err(line, ParseErrorKind::TagAfterAct(tag.to_string())));
                }
            }
        }
    }
    if utterances.is_empty() {
        return Err(err(first_line, ParseErrorKind::MissingActTag));
    }
    finish(&mut utterances, &mut buffer, line)?;

    let content_tags = loose_tags
        .chunks(2)
        .map(|pair| ContentTag::new(pair[0], pair.get(1).map(|s| s.to_string())))
        .collect();
    Ok(Turn {
        speaker,
        content_tags,
        utterances,
    })
}

fn parse_document(
    lines: &[(usize, &str)],
    taxonomy: &Taxonomy,
    ids: Option<(String, String, String)>,
    fallback_id: &str,
) -> Result<Session, ParseError> {
    let mut turns = Vec::new();
    let mut current: Option<(Role, String, usize)> = None;
    for &(no, raw) in lines {
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if let Some((role, rest)) = speaker_marker(line) {
            if let Some((r, body, start)) = current.take() {
                turns.push(parse_turn(r, &body, start, taxonomy)?);
            }
            current = Some((role, rest.to_string(), no));
        } else if let Some((_, body, _)) = current.as_mut() {
            body.push('\n');
            body.push_str(line);
        } else if !line.trim().is_empty() {
            return Err(err(no, ParseErrorKind::MissingSpeaker));
        }
    }
    if let Some((r, body, start)) = current.take() {
        turns.push(parse_turn(r, &body, start, taxonomy)?);
    }
    let first_line = lines.first().map_or(1, |l| l.0);
    if turns.is_empty() {
        return Err(err(first_line, ParseErrorKind::EmptySession));
    }
    let (id, tutor_id, student_id) =
        ids.unwrap_or_else(|| (fallback_id.to_string(), DEFAULT_ID.to_string(), DEFAULT_ID.to_string()));
    let session = Session {
        id,
        tutor_id,
        student_id,
        turns,
    };
    session
        .validate(taxonomy)
        .map_err(|e| err(first_line, ParseErrorKind::Invalid(e)))?;
    Ok(session)
}

/// Parses one transcript document.
///
/// Grammar:
///
/// - An optional first line `=== session <id> tutor=<t> student=<s> ===`.
///   Without it, all three ids default to `unknown`.
/// - A turn starts at a line beginning `tutor: ` or `student: ` and runs to
///   the next such line or the end of the document.
/// - Inside a turn, `[...]` groups are tags. A tag matching the act-id
///   grammar opens a new act-level utterance; `[high]`, `[middle]` or `[low]`
///   immediately after a student answer act is its correctness; any other tag
///   before the first act tag is a content tag (activity id, then body).
/// - Brackets inside utterance text are not supported.
pub fn parse_transcript(text: &str, taxonomy: &Taxonomy) -> Result<Session, ParseError> {
    let mut lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .skip_while(|(_, l)| l.trim().is_empty())
        .collect();
    let mut ids = None;
    if let Some(&(no, first)) = lines.first() {
        if first.starts_with(HEADER_PREFIX) {
            ids = Some(parse_header(first.trim_end()).ok_or_else(|| err(no, ParseErrorKind::BadHeader))?);
            lines.remove(0);
        }
    }
    parse_document(&lines, taxonomy, ids, DEFAULT_ID)
}

/// Parses a concatenation of `=== session ... ===`-headed documents.
///
/// A document without any header is treated as a single session whose id is
/// `fallback_id`.
pub fn parse_archive_named(text: &str, taxonomy: &Taxonomy, fallback_id: &str) -> Result<Vec<Session>, ParseError> {
    let all: Vec<(usize, &str)> = text.lines().enumerate().map(|(i, l)| (i + 1, l)).collect();
    let starts: Vec<usize> = all
        .iter()
        .enumerate()
        .filter(|(_, (_, l))| l.starts_with(HEADER_PREFIX))
        .map(|(i, _)| i)
        .collect();
    if starts.is_empty() {
        if all.iter().all(|(_, l)| l.trim().is_empty()) {
            return Ok(Vec::new());
        }
        return Ok(vec![parse_document(&all, taxonomy, None, fallback_id)?]);
    }
    if let Some((no, _)) = all[..starts[0]].iter().find(|(_, l)| !l.trim().is_empty()) {
        return Err(err(*no, ParseErrorKind::MissingSpeaker));
    }
    let mut sessions = Vec::with_capacity(starts.len());
    let mut seen = HashSet::new();
    for (k, &s) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(all.len());
        let (no, header) = all[s];
        let ids = parse_header(header.trim_end()).ok_or_else(|| err(no, ParseErrorKind::BadHeader))?;
        if !seen.insert(ids.0.clone()) {
            return Err(err(no, ParseErrorKind::DuplicateSession(ids.0)));
        }
        sessions.push(parse_document(&all[s + 1..end], taxonomy, Some(ids), DEFAULT_ID)?);
    }
    Ok(sessions)
}

pub fn parse_archive(text: &str, taxonomy: &Taxonomy) -> Result<Vec<Session>, ParseError> {
    parse_archive_named(text, taxonomy, DEFAULT_ID)
}

/// Loads a corpus from an archive file or from a directory of `*.txt`
/// documents (sorted by file name; header-less files take their stem as id).
pub fn load_corpus(path: impl AsRef<Path>, taxonomy: &Taxonomy) -> Result<Vec<Session>, ParseError> {
    let path = path.as_ref();
    let io = |e: std::io::Error| err(0, ParseErrorKind::Io(format!("{}: {e}", path.display())));
    if path.is_dir() {
        let mut files: Vec<_> = std::fs::read_dir(path)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "txt"))
            .collect();
        files.sort();
        let mut out: Vec<Session> = Vec::new();
        let mut seen = HashSet::new();
        for f in files {
            let text = std::fs::read_to_string(&f).map_err(io)?;
            let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or(DEFAULT_ID);
            for s in parse_archive_named(&text, taxonomy, stem)
                .map_err(|e| err(e.line, ParseErrorKind::Io(format!("{}: {e}", f.display()))))?
            {
                if !seen.insert(s.id.clone()) {
                    return Err(err(0, ParseErrorKind::DuplicateSession(s.id)));
                }
                out.push(s);
            }
        }
        Ok(out)
    } else {
        let text = std::fs::read_to_string(path).map_err(io)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or(DEFAULT_ID);
        parse_archive_named(&text, taxonomy, stem)
    }
}
