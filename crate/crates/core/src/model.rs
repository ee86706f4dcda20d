//! Documents, templates, fillers and the role schema.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::de::Deserializer;
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Half-open character interval `[start, end)` into a document's text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "span start {start} > end {end}");
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{})", self.start, self.end)
    }
}

/// A string filler with an optional location. A mention without a span
/// that cannot be located in the text has a "null span".
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Mention {
    pub text: String,
    pub span: Option<Span>,
}

impl Mention {
    pub fn new(text: impl Into<String>) -> Self {
        Mention {
            text: text.into(),
            span: None,
        }
    }

    pub fn with_span(text: impl Into<String>, span: Span) -> Self {
        Mention {
            text: text.into(),
            span: Some(span),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct MentionRepr {
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    start: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    end: Option<usize>,
}

impl Serialize for Mention {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MentionRepr {
            text: self.text.clone(),
            start: self.span.map(|s| s.start),
            end: self.span.map(|s| s.end),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Mention {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = MentionRepr::deserialize(deserializer)?;
        let span = match (repr.start, repr.end) {
            (Some(start), Some(end)) if start <= end => Some(Span { start, end }),
            (Some(start), Some(end)) => {
                return Err(serde::de::Error::custom(format!(
                    "mention {:?} has start {start} > end {end}",
                    repr.text
                )))
            }
            _ => None,
        };
        Ok(Mention {
            text: repr.text,
            span,
        })
    }
}

/// A set of coreferent mentions. Predicted fillers are entities with a
/// single mention.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Entity {
    pub mentions: Vec<Mention>,
}

impl Entity {
    pub fn new(mentions: Vec<Mention>) -> Self {
        Entity { mentions }
    }

    pub fn single(mention: Mention) -> Self {
        Entity {
            mentions: vec![mention],
        }
    }

    /// The first mention stands in for the entity when it has to be
    /// rendered as a single string.
    pub fn canonical(&self) -> Option<&Mention> {
        self.mentions.first()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum EntityRepr {
    Text(String),
    Mention(Mention),
    Cluster(Vec<MentionOrText>),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum MentionOrText {
    Text(String),
    Mention(Mention),
}

impl From<MentionOrText> for Mention {
    fn from(m: MentionOrText) -> Self {
        match m {
            MentionOrText::Text(t) => Mention::new(t),
            MentionOrText::Mention(m) => m,
        }
    }
}

impl Serialize for Entity {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self.mentions.as_slice() {
            [single] => single.serialize(serializer),
            many => many.serialize(serializer),
        }
    }
}

impl<'de> Deserialize<'de> for Entity {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        Ok(match EntityRepr::deserialize(deserializer)? {
            EntityRepr::Text(t) => Entity::single(Mention::new(t)),
            EntityRepr::Mention(m) => Entity::single(m),
            EntityRepr::Cluster(ms) => {
                if ms.is_empty() {
                    return Err(serde::de::Error::custom("entity with no mentions"));
                }
                Entity::new(ms.into_iter().map(Mention::from).collect())
            }
        })
    }
}

/// What occupies one role of a template.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RoleFill {
    /// A set-fill value.
    Value(String),
    /// String-fill entities (gold) or single-mention fillers (predicted).
    Entities(Vec<Entity>),
}

impl RoleFill {
    pub fn filler_count(&self) -> usize {
        match self {
            RoleFill::Value(_) => 1,
            RoleFill::Entities(es) => es.len(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Template {
    pub roles: BTreeMap<String, RoleFill>,
}

impl Template {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, role: impl Into<String>, fill: RoleFill) -> Self {
        self.roles.insert(role.into(), fill);
        self
    }

    pub fn get(&self, role: &str) -> Option<&RoleFill> {
        self.roles.get(role)
    }

    pub fn filler_count(&self) -> usize {
        self.roles.values().map(RoleFill::filler_count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub doc_id: String,
    pub text: String,
    pub gold_templates: Vec<Template>,
    pub predicted_templates: Vec<Template>,
}

impl Document {
    pub fn new(doc_id: impl Into<String>, text: impl Into<String>) -> Self {
        Document {
            doc_id: doc_id.into(),
            text: text.into(),
            gold_templates: Vec::new(),
            predicted_templates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleKind {
    SetFill,
    StringFill,
}

impl RoleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RoleKind::SetFill => "set_fill",
            RoleKind::StringFill => "string_fill",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RoleSpec {
    pub name: String,
    pub kind: RoleKind,
    #[serde(default, rename = "values", skip_serializing_if = "Vec::is_empty")]
    pub allowed_values: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub multi: bool,
}

impl RoleSpec {
    pub fn set_fill(name: impl Into<String>, values: &[&str]) -> Self {
        RoleSpec {
            name: name.into(),
            kind: RoleKind::SetFill,
            allowed_values: values.iter().map(|v| v.to_string()).collect(),
            multi: false,
        }
    }

    pub fn string_fill(name: impl Into<String>, multi: bool) -> Self {
        RoleSpec {
            name: name.into(),
            kind: RoleKind::StringFill,
            allowed_values: Vec::new(),
            multi,
        }
    }

    pub fn is_set_fill(&self) -> bool {
        self.kind == RoleKind::SetFill
    }
}

/// Ordered role list. Order drives matching and transformation detection.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Schema {
    pub roles: Vec<RoleSpec>,
}

impl Schema {
    pub fn new(roles: Vec<RoleSpec>) -> Result<Self> {
        let schema = Schema { roles };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for role in &self.roles {
            if !seen.insert(role.name.as_str()) {
                return Err(Error::InvalidSchema(format!(
                    "duplicate role name {:?}",
                    role.name
                )));
            }
            match role.kind {
                RoleKind::SetFill => {
                    if role.allowed_values.is_empty() {
                        return Err(Error::InvalidSchema(format!(
                            "set-fill role {:?} has no allowed values",
                            role.name
                        )));
                    }
                    if role.multi {
                        return Err(Error::InvalidSchema(format!(
                            "set-fill role {:?} cannot be multi-valued",
                            role.name
                        )));
                    }
                }
                RoleKind::StringFill => {
                    if !role.allowed_values.is_empty() {
                        return Err(Error::InvalidSchema(format!(
                            "string-fill role {:?} cannot list allowed values",
                            role.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.roles.iter().position(|r| r.name == name)
    }

    pub fn role(&self, name: &str) -> Option<&RoleSpec> {
        self.roles.iter().find(|r| r.name == name)
    }

    pub fn role_names(&self) -> impl Iterator<Item = &str> {
        self.roles.iter().map(|r| r.name.as_str())
    }

    pub fn string_fill_count(&self) -> usize {
        self.roles.iter().filter(|r| !r.is_set_fill()).count()
    }

    /// Schema guessed from corpus contents: roles holding a bare string
    /// become set-fill (allowed values are the values observed), the rest
    /// string-fill. Roles are ordered by first appearance.
    pub fn infer<'a>(templates: impl IntoIterator<Item = &'a Template>) -> Schema {
        let mut order: Vec<String> = Vec::new();
        let mut values: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        let mut string_roles: BTreeSet<String> = BTreeSet::new();
        for template in templates {
            for (role, fill) in &template.roles {
                if !order.contains(role) {
                    order.push(role.clone());
                }
                match fill {
                    RoleFill::Value(v) => {
                        values.entry(role.clone()).or_default().insert(v.clone());
                    }
                    RoleFill::Entities(_) => {
                        string_roles.insert(role.clone());
                    }
                }
            }
        }
        let roles = order
            .into_iter()
            .map(|name| match values.get(&name) {
                Some(vals) if !string_roles.contains(&name) => RoleSpec {
                    name,
                    kind: RoleKind::SetFill,
                    allowed_values: vals.iter().cloned().collect(),
                    multi: false,
                },
                _ => RoleSpec::string_fill(name, true),
            })
            .collect();
        Schema { roles }
    }
}
