//! Dialogue-act vocabulary: act ids, categories, and the taxonomy loader.
//!
//! The canonical taxonomy ships as `data/taxonomy.toml` and is embedded at
//! compile time ([`Taxonomy::bundled`]). Custom files go through the same
//! loader, which enforces the per-category act counts so an edited file cannot
//! silently drift from the 34 tutor / 9 student act layout.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

const BUNDLED: &str = include_str!("../data/taxonomy.toml");

pub const TUTOR_ACT_COUNT: usize = 34;
pub const STUDENT_ACT_COUNT: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Tutor,
    Student,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Tutor => "tutor",
            Role::Student => "student",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tutor" => Ok(Role::Tutor),
            "student" => Ok(Role::Student),
            other => Err(format!("unknown role `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    General,
    Operational,
    Assessment,
    Teaching,
    Engagement,
    Question,
    Answer,
}

impl Category {
    pub const TUTOR: [Category; 5] = [
        Category::General,
        Category::Operational,
        Category::Assessment,
        Category::Teaching,
        Category::Engagement,
    ];
    pub const STUDENT: [Category; 4] = [
        Category::General,
        Category::Operational,
        Category::Question,
        Category::Answer,
    ];

    pub fn for_role(role: Role) -> &'static [Category] {
        match role {
            Role::Tutor => &Self::TUTOR,
            Role::Student => &Self::STUDENT,
        }
    }

    /// Number of acts the taxonomy must register for `(role, self)`.
    pub fn expected_count(self, role: Role) -> Option<usize> {
        use Category::*;
        match (role, self) {
            (Role::Tutor, General) => Some(1),
            (Role::Tutor, Operational) => Some(3),
            (Role::Tutor, Assessment) => Some(4),
            (Role::Tutor, Teaching) => Some(22),
            (Role::Tutor, Engagement) => Some(4),
            (Role::Student, General) => Some(1),
            (Role::Student, Operational) => Some(3),
            (Role::Student, Question) => Some(2),
            (Role::Student, Answer) => Some(3),
            _ => None,
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Category::General => "general",
            Category::Operational => "operational",
            Category::Assessment => "assessment",
            Category::Teaching => "teaching",
            Category::Engagement => "engagement",
            Category::Question => "question",
            Category::Answer => "answer",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed act id `{0}`")]
pub struct MalformedActId(pub String);

/// A dialogue-act identifier such as `t.teach.method.vocab_expression.etymology`.
///
/// Grammar: `^[ts]\.[a-z_]+(\.[a-z_]+)*$`. The leading letter fixes the role.
/// Ordering is lexicographic on the canonical string.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActId(String);

impl ActId {
    pub fn parse(raw: &str) -> Result<ActId, MalformedActId> {
        if is_act_id(raw) {
            Ok(ActId(raw.to_string()))
        } else {
            Err(MalformedActId(raw.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn role(&self) -> Role {
        if self.0.starts_with('t') {
            Role::Tutor
        } else {
            Role::Student
        }
    }

    /// Dotted segments after the role prefix.
    pub fn path(&self) -> impl Iterator<Item = &str> {
        self.0.split('.').skip(1)
    }
}

/// True when `s` matches the act-id grammar exactly.
pub fn is_act_id(s: &str) -> bool {
    let mut parts = s.split('.');
    match parts.next() {
        Some("t") | Some("s") => {}
        _ => return false,
    }
    let mut n = 0;
    for seg in parts {
        if seg.is_empty() || !seg.bytes().all(|b| b.is_ascii_lowercase() || b == b'_') {
            return false;
        }
        n += 1;
    }
    n > 0
}

impl fmt::Display for ActId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for ActId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ActId({})", self.0)
    }
}

impl FromStr for ActId {
    type Err = MalformedActId;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ActId::parse(s)
    }
}

impl Serialize for ActId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for ActId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(d)?;
        ActId::parse(&raw).map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Attested,
    Reconstructed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ActDef {
    pub id: ActId,
    pub category: Category,
    pub description: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub example: Option<String>,
    pub provenance: Provenance,
}

impl ActDef {
    pub fn role(&self) -> Role {
        self.id.role()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TaxonomyError {
    #[error("taxonomy file is not valid TOML: {0}")]
    Syntax(String),
    #[error("unsupported taxonomy format `{0}`")]
    Format(String),
    #[error("entry {index}: malformed act id `{raw}`")]
    MalformedId { index: usize, raw: String },
    #[error("entry {index} ({id}): role `{role}` disagrees with the id prefix")]
    RoleMismatch { index: usize, id: String, role: String },
    #[error("entry {index} ({id}): category `{category}` is not valid for role {role}")]
    CategoryNotAllowed {
        index: usize,
        id: String,
        role: Role,
        category: Category,
    },
    #[error("entry {index}: duplicate act id `{id}`")]
    Duplicate { index: usize, id: String },
    #[error("{role} category {category}: expected {expected} acts, found {found}")]
    CountMismatch {
        role: Role,
        category: Category,
        expected: usize,
        found: usize,
    },
    #[error("teaching act `{0}` has an empty description")]
    EmptyDescription(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("`{raw}` is not a registered act")]
pub struct UnknownAct {
    pub raw: String,
}

#[derive(Deserialize)]
struct RawFile {
    format: Option<String>,
    #[serde(default)]
    act: Vec<RawAct>,
}

#[derive(Deserialize)]
struct RawAct {
    id: String,
    role: String,
    category: Category,
    #[serde(default)]
    description: String,
    example: Option<String>,
    #[serde(default = "default_provenance")]
    provenance: Provenance,
}

fn default_provenance() -> Provenance {
    Provenance::Attested
}

/// The registered act vocabulary. Immutable after load.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Taxonomy {
    defs: BTreeMap<ActId, ActDef>,
}

impl Taxonomy {
    /// The taxonomy embedded in the crate.
    pub fn bundled() -> &'static Taxonomy {
        static CELL: OnceLock<Taxonomy> = OnceLock::new();
        CELL.get_or_init(|| Taxonomy::from_toml_str(BUNDLED).expect("bundled taxonomy is valid"))
    }

    pub fn bundled_source() -> &'static str {
        BUNDLED
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Taxonomy, TaxonomyError> {
        let text = std::fs::read_to_string(path.as_ref())
            .map_err(|e| TaxonomyError::Syntax(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Taxonomy, TaxonomyError> {
        let raw: RawFile = toml::from_str(text).map_err(|e| TaxonomyError::Syntax(e.to_string()))?;
        if let Some(fmt) = raw.format.as_deref() {
            if fmt != "tutor-act-taxonomy" {
                return Err(TaxonomyError::Format(fmt.to_string()));
            }
        }
        let mut defs = BTreeMap::new();
        for (index, a) in raw.act.into_iter().enumerate() {
            let id = ActId::parse(a.id.trim()).map_err(|_| TaxonomyError::MalformedId {
                index,
                raw: a.id.clone(),
            })?;
            let role: Role = a.role.parse().map_err(|_| TaxonomyError::RoleMismatch {
                index,
                id: a.id.clone(),
                role: a.role.clone(),
            })?;
            if role != id.role() {
                return Err(TaxonomyError::RoleMismatch {
                    index,
                    id: a.id,
                    role: a.role,
                });
            }
            if a.category.expected_count(role).is_none() {
                return Err(TaxonomyError::CategoryNotAllowed {
                    index,
                    id: a.id,
                    role,
                    category: a.category,
                });
            }
            if a.category == Category::Teaching && a.description.trim().is_empty() {
                return Err(TaxonomyError::EmptyDescription(a.id));
            }
            let def = ActDef {
                id: id.clone(),
                category: a.category,
                description: a.description.trim().to_string(),
                example: a.example,
                provenance: a.provenance,
            };
            if defs.insert(id, def).is_some() {
                return Err(TaxonomyError::Duplicate { index, id: a.id });
            }
        }
        for role in [Role::Tutor, Role::Student] {
            for &category in Category::for_role(role) {
                let expected = category.expected_count(role).unwrap_or(0);
                let found = defs
                    .values()
                    .filter(|d| d.role() == role && d.category == category)
                    .count();
                if found != expected {
                    return Err(TaxonomyError::CountMismatch {
                        role,
                        category,
                        expected,
                        found,
                    });
                }
            }
        }
        Ok(Taxonomy { defs })
    }

    pub fn len(&self) -> usize {
        self.defs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    pub fn get(&self, id: &ActId) -> Option<&ActDef> {
        self.defs.get(id)
    }

    pub fn contains(&self, id: &ActId) -> bool {
        self.defs.contains_key(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = &ActDef> {
        self.defs.values()
    }

    /// Resolves raw text (surrounding whitespace and brackets ignored) to a
    /// registered act.
    pub fn validate_act(&self, raw: &str) -> Result<ActId, UnknownAct> {
        let trimmed = raw.trim().trim_start_matches('[').trim_end_matches(']').trim();
        ActId::parse(trimmed)
            .ok()
            .filter(|id| self.defs.contains_key(id))
            .ok_or_else(|| UnknownAct { raw: raw.to_string() })
    }

    /// Acts of `role`, optionally restricted to one category, in canonical order.
    pub fn acts_by(&self, role: Role, category: Option<Category>) -> Vec<&ActDef> {
        self.defs
            .values()
            .filter(|d| d.role() == role && category.is_none_or(|c| d.category == c))
            .collect()
    }

    pub fn teaching_acts(&self) -> Vec<ActId> {
        self.acts_by(Role::Tutor, Some(Category::Teaching))
            .into_iter()
            .map(|d| d.id.clone())
            .collect()
    }

    pub fn is_teaching(&self, id: &ActId) -> bool {
        self.get(id).is_some_and(|d| d.category == Category::Teaching)
    }

    /// One `<id>, <description>` line per act of `role`.
    pub fn candidate_list(&self, role: Role) -> String {
        self.acts_by(role, None)
            .iter()
            .map(|d| format!("{}, {}", d.id, d.description))
            .collect::<Vec<_>>()
            .join("\n")
    }
}
