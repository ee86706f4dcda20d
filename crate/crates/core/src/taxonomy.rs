//! Error types and the mapping from transformation groups onto them.
//!
//! Transformations applied to the same predicted filler form one group and
//! map to exactly one error:
//!
//! | group                                   | error                                          |
//! |-----------------------------------------|------------------------------------------------|
//! | AlterSpan                               | SpanError                                      |
//! | RemoveDuplicate                         | DuplicateRoleFiller                            |
//! | AlterSpan, RemoveDuplicate              | DuplicatePartiallyMatchedRoleFiller            |
//! | RemoveSpurious                          | SpuriousRoleFiller                             |
//! | IntroduceRoleFiller                     | MissingRoleFiller                              |
//! | AlterRole                               | IncorrectRole                                  |
//! | AlterSpan, AlterRole                    | IncorrectRolePartiallyMatchedFiller            |
//! | RemoveCrossTemplate                     | WrongTemplateForRoleFiller                     |
//! | AlterSpan, RemoveCrossTemplate          | WrongTemplateForPartiallyMatchedRoleFiller     |
//! | AlterRole, RemoveCrossTemplate          | WrongTemplateWrongRole                         |
//! | AlterSpan, AlterRole, RemoveCrossTemplate | WrongTemplateWrongRolePartiallyMatchedFiller |
//! | RemoveTemplate                          | SpuriousTemplate                               |
//! | IntroduceTemplate                       | MissingTemplate                                |
//!
//! Fillers of removed and introduced templates are not counted as spurious
//! or missing role fillers; they go to two side tallies instead.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{AddAssign, Index, IndexMut};
use std::str::FromStr;

use serde::de::{Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeMap, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::transform::{Transformation, TransformationKind, TransformationLog};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ErrorType {
    SpanError,
    DuplicateRoleFiller,
    DuplicatePartiallyMatchedRoleFiller,
    SpuriousRoleFiller,
    MissingRoleFiller,
    IncorrectRole,
    IncorrectRolePartiallyMatchedFiller,
    WrongTemplateForRoleFiller,
    WrongTemplateForPartiallyMatchedRoleFiller,
    WrongTemplateWrongRole,
    WrongTemplateWrongRolePartiallyMatchedFiller,
    SpuriousTemplate,
    MissingTemplate,
}

impl ErrorType {
    pub const ALL: [ErrorType; 13] = [
        ErrorType::SpanError,
        ErrorType::DuplicateRoleFiller,
        ErrorType::DuplicatePartiallyMatchedRoleFiller,
        ErrorType::SpuriousRoleFiller,
        ErrorType::MissingRoleFiller,
        ErrorType::IncorrectRole,
        ErrorType::IncorrectRolePartiallyMatchedFiller,
        ErrorType::WrongTemplateForRoleFiller,
        ErrorType::WrongTemplateForPartiallyMatchedRoleFiller,
        ErrorType::WrongTemplateWrongRole,
        ErrorType::WrongTemplateWrongRolePartiallyMatchedFiller,
        ErrorType::SpuriousTemplate,
        ErrorType::MissingTemplate,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorType::SpanError => "SpanError",
            ErrorType::DuplicateRoleFiller => "DuplicateRoleFiller",
            ErrorType::DuplicatePartiallyMatchedRoleFiller => "DuplicatePartiallyMatchedRoleFiller",
            ErrorType::SpuriousRoleFiller => "SpuriousRoleFiller",
            ErrorType::MissingRoleFiller => "MissingRoleFiller",
            ErrorType::IncorrectRole => "IncorrectRole",
            ErrorType::IncorrectRolePartiallyMatchedFiller => "IncorrectRolePartiallyMatchedFiller",
            ErrorType::WrongTemplateForRoleFiller => "WrongTemplateForRoleFiller",
            ErrorType::WrongTemplateForPartiallyMatchedRoleFiller => {
                "WrongTemplateForPartiallyMatchedRoleFiller"
            }
            ErrorType::WrongTemplateWrongRole => "WrongTemplateWrongRole",
            ErrorType::WrongTemplateWrongRolePartiallyMatchedFiller => {
                "WrongTemplateWrongRolePartiallyMatchedFiller"
            }
            ErrorType::SpuriousTemplate => "SpuriousTemplate",
            ErrorType::MissingTemplate => "MissingTemplate",
        }
    }

    /// Human-readable label for tables.
    pub fn label(self) -> &'static str {
        match self {
            ErrorType::SpanError => "Span Error",
            ErrorType::DuplicateRoleFiller => "Duplicate Role Filler",
            ErrorType::DuplicatePartiallyMatchedRoleFiller => "Duplicate Partially Matched Role Filler",
            ErrorType::SpuriousRoleFiller => "Spurious Role Filler",
            ErrorType::MissingRoleFiller => "Missing Role Filler",
            ErrorType::IncorrectRole => "Incorrect Role",
            ErrorType::IncorrectRolePartiallyMatchedFiller => "Incorrect Role + Partially Matched Filler",
            ErrorType::WrongTemplateForRoleFiller => "Wrong Template For Role Filler",
            ErrorType::WrongTemplateForPartiallyMatchedRoleFiller => {
                "Wrong Template For Partially Matched Role Filler"
            }
            ErrorType::WrongTemplateWrongRole => "Wrong Template + Wrong Role",
            ErrorType::WrongTemplateWrongRolePartiallyMatchedFiller => {
                "Wrong Template + Wrong Role + Partially Matched Filler"
            }
            ErrorType::SpuriousTemplate => "Spurious Template",
            ErrorType::MissingTemplate => "Missing Template",
        }
    }

    pub fn is_template_level(self) -> bool {
        matches!(self, ErrorType::SpuriousTemplate | ErrorType::MissingTemplate)
    }

    /// Error types charged to a predicted filler (as opposed to a gold one).
    pub fn is_prediction_side(self) -> bool {
        !matches!(
            self,
            ErrorType::MissingRoleFiller | ErrorType::SpuriousTemplate | ErrorType::MissingTemplate
        )
    }

    /// The error for a group of transformations applied to one subject.
    pub fn from_group(kinds: &[TransformationKind]) -> Option<ErrorType> {
        use TransformationKind::*;
        Some(match kinds {
            [AlterSpan] => ErrorType::SpanError,
            [RemoveDuplicateRoleFiller] => ErrorType::DuplicateRoleFiller,
            [AlterSpan, RemoveDuplicateRoleFiller] => ErrorType::DuplicatePartiallyMatchedRoleFiller,
            [RemoveSpuriousRoleFiller] => ErrorType::SpuriousRoleFiller,
            [IntroduceRoleFiller] => ErrorType::MissingRoleFiller,
            [AlterRole] => ErrorType::IncorrectRole,
            [AlterSpan, AlterRole] => ErrorType::IncorrectRolePartiallyMatchedFiller,
            [RemoveCrossTemplateSpuriousRoleFiller] => ErrorType::WrongTemplateForRoleFiller,
            [AlterSpan, RemoveCrossTemplateSpuriousRoleFiller] => {
                ErrorType::WrongTemplateForPartiallyMatchedRoleFiller
            }
            [AlterRole, RemoveCrossTemplateSpuriousRoleFiller] => ErrorType::WrongTemplateWrongRole,
            [AlterSpan, AlterRole, RemoveCrossTemplateSpuriousRoleFiller] => {
                ErrorType::WrongTemplateWrongRolePartiallyMatchedFiller
            }
            [RemoveTemplate] => ErrorType::SpuriousTemplate,
            [IntroduceTemplate] => ErrorType::MissingTemplate,
            _ => return None,
        })
    }
}

impl fmt::Display for ErrorType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ErrorType {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ErrorType::ALL
            .iter()
            .copied()
            .find(|t| t.name() == s)
            .ok_or_else(|| format!("unknown error type {s:?}"))
    }
}

impl Serialize for ErrorType {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for ErrorType {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One count per error type. Serializes as a map with all 13 keys in
/// taxonomy order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct TypeCounts([u64; 13]);

impl TypeCounts {
    pub fn total(&self) -> u64 {
        self.0.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (ErrorType, u64)> + '_ {
        ErrorType::ALL.iter().map(move |&t| (t, self.0[t.index()]))
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl Index<ErrorType> for TypeCounts {
    type Output = u64;

    fn index(&self, t: ErrorType) -> &u64 {
        &self.0[t.index()]
    }
}

impl IndexMut<ErrorType> for TypeCounts {
    fn index_mut(&mut self, t: ErrorType) -> &mut u64 {
        &mut self.0[t.index()]
    }
}

impl AddAssign for TypeCounts {
    fn add_assign(&mut self, rhs: TypeCounts) {
        for (a, b) in self.0.iter_mut().zip(rhs.0) {
            *a += b;
        }
    }
}

impl Serialize for TypeCounts {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = serializer.serialize_map(Some(13))?;
        for (t, c) in self.iter() {
            map.serialize_entry(t.name(), &c)?;
        }
        map.end()
    }
}

impl<'de> Deserialize<'de> for TypeCounts {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        struct CountsVisitor;

        impl<'de> Visitor<'de> for CountsVisitor {
            type Value = TypeCounts;

            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a map from error type name to count")
            }

            fn visit_map<A: MapAccess<'de>>(self, mut access: A) -> std::result::Result<TypeCounts, A::Error> {
                let mut counts = TypeCounts::default();
                while let Some((name, count)) = access.next_entry::<String, u64>()? {
                    let t: ErrorType = name.parse().map_err(serde::de::Error::custom)?;
                    counts[t] = count;
                }
                Ok(counts)
            }
        }

        deserializer.deserialize_map(CountsVisitor)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SideTallies {
    pub spurious_template_role_fillers: u64,
    pub missing_template_role_fillers: u64,
}

impl AddAssign for SideTallies {
    fn add_assign(&mut self, rhs: SideTallies) {
        self.spurious_template_role_fillers += rhs.spurious_template_role_fillers;
        self.missing_template_role_fillers += rhs.missing_template_role_fillers;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocErrors {
    pub per_type: TypeCounts,
    pub side_tallies: SideTallies,
}

impl AddAssign for DocErrors {
    fn add_assign(&mut self, rhs: DocErrors) {
        self.per_type += rhs.per_type;
        self.side_tallies += rhs.side_tallies;
    }
}

/// Error counts overall, per role and per document. Profiles form a monoid
/// under [`ErrorProfile::merge`] with the default profile as identity.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorProfile {
    pub per_type: TypeCounts,
    pub side_tallies: SideTallies,
    pub per_role: BTreeMap<String, TypeCounts>,
    pub per_role_side_tallies: BTreeMap<String, SideTallies>,
    pub per_doc: BTreeMap<String, DocErrors>,
}

impl ErrorProfile {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one error attributed to `role` (template-level errors have
    /// no role) in document `doc_id`.
    pub fn record(&mut self, doc_id: &str, role: Option<&str>, error: ErrorType) {
        self.per_type[error] += 1;
        if let Some(role) = role {
            self.per_role.entry(role.to_string()).or_default()[error] += 1;
        }
        self.per_doc.entry(doc_id.to_string()).or_default().per_type[error] += 1;
    }

    pub fn record_side(&mut self, doc_id: &str, role: &str, tallies: SideTallies) {
        self.side_tallies += tallies;
        *self.per_role_side_tallies.entry(role.to_string()).or_default() += tallies;
        self.per_doc.entry(doc_id.to_string()).or_default().side_tallies += tallies;
    }

    /// Makes sure `doc_id` appears even when it has no errors.
    pub fn touch_doc(&mut self, doc_id: &str) {
        self.per_doc.entry(doc_id.to_string()).or_default();
    }

    /// Zero-fills the given roles.
    pub fn ensure_roles<'a>(&mut self, roles: impl IntoIterator<Item = &'a str>) {
        for role in roles {
            self.per_role.entry(role.to_string()).or_default();
            self.per_role_side_tallies.entry(role.to_string()).or_default();
        }
    }

    pub fn merge(&mut self, other: &ErrorProfile) {
        self.per_type += other.per_type;
        self.side_tallies += other.side_tallies;
        for (role, counts) in &other.per_role {
            *self.per_role.entry(role.clone()).or_default() += *counts;
        }
        for (role, tallies) in &other.per_role_side_tallies {
            *self.per_role_side_tallies.entry(role.clone()).or_default() += *tallies;
        }
        for (doc, errors) in &other.per_doc {
            *self.per_doc.entry(doc.clone()).or_default() += *errors;
        }
    }

    pub fn count(&self, error: ErrorType) -> u64 {
        self.per_type[error]
    }

    pub fn role_count(&self, role: &str, error: ErrorType) -> u64 {
        self.per_role.get(role).map_or(0, |c| c[error])
    }
}

/// Sum of the 13 error counts; the side tallies are not errors in their own
/// right and are excluded.
pub fn total_errors(profile: &ErrorProfile) -> u64 {
    profile.per_type.total()
}

/// Key identifying the subject of a transformation group.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum GroupKey {
    Filler { template: usize, role: String, index: usize },
    Single(usize),
}

fn group_key(position: usize, t: &Transformation) -> GroupKey {
    match (t.kind.has_filler_subject(), t.pred_template_index, &t.role, t.pred_filler_index) {
        (true, Some(template), Some(role), Some(index)) => GroupKey::Filler {
            template,
            role: role.clone(),
            index,
        },
        _ => GroupKey::Single(position),
    }
}

/// Splits a log into groups of transformations sharing a subject, in order
/// of first appearance.
pub fn group_transformations(transformations: &[Transformation]) -> Vec<Vec<&Transformation>> {
    let mut index: BTreeMap<GroupKey, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<&Transformation>> = Vec::new();
    for (pos, t) in transformations.iter().enumerate() {
        let key = group_key(pos, t);
        match index.get(&key) {
            Some(&g) => groups[g].push(t),
            None => {
                index.insert(key, groups.len());
                groups.push(vec![t]);
            }
        }
    }
    groups
}

fn classify(group: &[&Transformation]) -> Result<ErrorType> {
    let kinds: Vec<TransformationKind> = group.iter().map(|t| t.kind).collect();
    ErrorType::from_group(&kinds).ok_or_else(|| {
        let subject = group
            .first()
            .map(|t| format!("{:?} in role {:?}", t.pred_text, t.role))
            .unwrap_or_default();
        Error::UnmappableSequence(format!("{kinds:?} applied to {subject}"))
    })
}

/// Maps a document's transformation log onto error counts.
pub fn map_errors(log: &TransformationLog) -> Result<ErrorProfile> {
    let mut profile = ErrorProfile::new();
    profile.touch_doc(&log.doc_id);
    for group in group_transformations(&log.transformations) {
        let error = classify(&group)?;
        let last = group.last().expect("groups are non-empty");
        match error {
            ErrorType::SpuriousTemplate | ErrorType::MissingTemplate => {
                profile.record(&log.doc_id, None, error);
                for (role, &n) in &last.fillers_by_role {
                    let tallies = if error == ErrorType::SpuriousTemplate {
                        SideTallies {
                            spurious_template_role_fillers: n,
                            ..Default::default()
                        }
                    } else {
                        SideTallies {
                            missing_template_role_fillers: n,
                            ..Default::default()
                        }
                    };
                    profile.record_side(&log.doc_id, role, tallies);
                }
            }
            _ => {
                let role = last.gold_role.as_deref().or(last.role.as_deref());
                profile.record(&log.doc_id, role, error);
            }
        }
    }
    Ok(profile)
}
