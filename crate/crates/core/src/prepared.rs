//! Analysis-ready view of a [`Document`]: fillers indexed by schema role,
//! normalized comparison keys, and spans validated or resolved.

use crate::error::{Error, Result};
use crate::model::{Document, Mention, RoleFill, RoleKind, Schema, Span, Template};
use crate::normalize::{find_normalized, normalize_with, substring, CaseMode};
use crate::span_metric::{best_by_span, ScsMode};
use crate::ExactScore;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedMention {
    pub text: String,
    pub key: String,
    pub span: Option<Span>,
}

impl PreparedMention {
    pub fn to_mention(&self) -> Mention {
        Mention {
            text: self.text.clone(),
            span: self.span,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedEntity {
    pub mentions: Vec<PreparedMention>,
}

impl PreparedEntity {
    pub fn canonical(&self) -> &PreparedMention {
        &self.mentions[0]
    }

    /// Index of the first mention whose key equals `key`.
    pub fn exact_mention(&self, key: &str) -> Option<usize> {
        self.mentions.iter().position(|m| m.key == key)
    }
}

/// One template, with fillers per schema role index. Set-fill values are
/// single-mention entities without spans. On the predicted side every entity
/// has exactly one mention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PreparedTemplate {
    pub roles: Vec<Vec<PreparedEntity>>,
}

impl PreparedTemplate {
    pub fn filler_count(&self) -> usize {
        self.roles.iter().map(Vec::len).sum()
    }

    /// The predicted filler at `(role, index)`.
    pub fn filler(&self, role: usize, index: usize) -> &PreparedMention {
        self.roles[role][index].canonical()
    }
}

#[derive(Debug, Clone)]
pub struct PreparedDocument<'s> {
    pub doc_id: String,
    pub schema: &'s Schema,
    pub case: CaseMode,
    pub gold: Vec<PreparedTemplate>,
    pub pred: Vec<PreparedTemplate>,
}

/// How a predicted filler relates to a gold entity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    /// The filler's text equals one of the entity's mentions.
    Exact { mention: usize },
    /// Spans overlap (SCS < 1) with the mention at `mention`.
    Partial { mention: usize, score: ExactScore },
    Unrelated,
}

impl Relation {
    pub fn is_related(&self) -> bool {
        !matches!(self, Relation::Unrelated)
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Relation::Exact { .. })
    }
}

pub fn relate(pred: &PreparedMention, entity: &PreparedEntity, mode: ScsMode) -> Relation {
    if let Some(mention) = entity.exact_mention(&pred.key) {
        return Relation::Exact { mention };
    }
    match best_by_span::<ExactScore>(pred.span, entity.mentions.iter().map(|m| m.span), mode) {
        Some(best) if best.score < ExactScore::from_integer(1) => Relation::Partial {
            mention: best.index,
            score: best.score,
        },
        _ => Relation::Unrelated,
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Side {
    Gold,
    Pred,
}

impl<'s> PreparedDocument<'s> {
    pub fn new(doc: &Document, schema: &'s Schema, case: CaseMode) -> Result<Self> {
        let chars: Vec<char> = doc.text.chars().collect();
        let prep = Preparer {
            doc,
            schema,
            case,
            text_len: chars.len(),
        };
        let gold = doc
            .gold_templates
            .iter()
            .map(|t| prep.template(t, Side::Gold))
            .collect::<Result<Vec<_>>>()?;
        let pred = doc
            .predicted_templates
            .iter()
            .map(|t| prep.template(t, Side::Pred))
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedDocument {
            doc_id: doc.doc_id.clone(),
            schema,
            case,
            gold,
            pred,
        })
    }

    pub fn role_name(&self, role: usize) -> &str {
        &self.schema.roles[role].name
    }

    pub fn is_set_fill(&self, role: usize) -> bool {
        self.schema.roles[role].is_set_fill()
    }

    pub fn string_roles(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.schema.roles.len()).filter(|&r| !self.is_set_fill(r))
    }

    pub fn normalize(&self, text: &str) -> String {
        normalize_with(text, self.case)
    }

    /// Relation of predicted filler `(pred template, role, index)` to gold
    /// entity `(gold template, gold role, entity)`.
    pub fn relation(
        &self,
        mode: ScsMode,
        pred: (usize, usize, usize),
        gold: (usize, usize, usize),
    ) -> Relation {
        let (pt, pr, pi) = pred;
        let (gt, gr, ge) = gold;
        let filler = self.pred[pt].filler(pr, pi);
        let entity = &self.gold[gt].roles[gr][ge];
        if self.is_set_fill(gr) || self.is_set_fill(pr) {
            return match entity.exact_mention(&filler.key) {
                Some(mention) if pr == gr => Relation::Exact { mention },
                _ => Relation::Unrelated,
            };
        }
        relate(filler, entity, mode)
    }
}

struct Preparer<'a> {
    doc: &'a Document,
    schema: &'a Schema,
    case: CaseMode,
    text_len: usize,
}

impl Preparer<'_> {
    fn template(&self, template: &Template, side: Side) -> Result<PreparedTemplate> {
        let mut roles = vec![Vec::new(); self.schema.roles.len()];
        for (name, fill) in &template.roles {
            let idx = self.schema.index_of(name).ok_or_else(|| Error::SchemaMismatch {
                doc_id: self.doc.doc_id.clone(),
                role: name.clone(),
            })?;
            let spec = &self.schema.roles[idx];
            roles[idx] = match spec.kind {
                RoleKind::SetFill => self.set_fill(name, fill, &spec.allowed_values)?,
                RoleKind::StringFill => self.string_fill(name, fill, side),
            };
        }
        Ok(PreparedTemplate { roles })
    }

    fn set_fill(&self, role: &str, fill: &RoleFill, allowed: &[String]) -> Result<Vec<PreparedEntity>> {
        let value = match fill {
            RoleFill::Value(v) => v.clone(),
            RoleFill::Entities(es) if es.is_empty() => return Ok(Vec::new()),
            RoleFill::Entities(es) if es.len() == 1 && es[0].mentions.len() == 1 => {
                es[0].mentions[0].text.clone()
            }
            RoleFill::Entities(_) => {
                return Err(Error::KindMismatch {
                    doc_id: self.doc.doc_id.clone(),
                    role: role.to_string(),
                    expected: "set_fill",
                    found: "a list of entities",
                })
            }
        };
        let key = normalize_with(&value, self.case);
        if !allowed.iter().any(|a| normalize_with(a, self.case) == key) {
            log::warn!(
                "document {}: value {value:?} is not an allowed value of role {role}",
                self.doc.doc_id
            );
        }
        Ok(vec![PreparedEntity {
            mentions: vec![PreparedMention {
                text: value,
                key,
                span: None,
            }],
        }])
    }

    fn string_fill(&self, role: &str, fill: &RoleFill, side: Side) -> Vec<PreparedEntity> {
        match fill {
            RoleFill::Value(v) => vec![PreparedEntity {
                mentions: vec![self.mention(role, &Mention::new(v.clone()))],
            }],
            RoleFill::Entities(es) => es
                .iter()
                .map(|entity| {
                    let mentions: &[Mention] = match side {
                        Side::Pred if entity.mentions.len() > 1 => {
                            log::debug!(
                                "document {}: predicted filler in role {role} lists {} mentions; using the first",
                                self.doc.doc_id,
                                entity.mentions.len()
                            );
                            &entity.mentions[..1]
                        }
                        _ => &entity.mentions,
                    };
                    PreparedEntity {
                        mentions: mentions.iter().map(|m| self.mention(role, m)).collect(),
                    }
                })
                .collect(),
        }
    }

    fn mention(&self, role: &str, m: &Mention) -> PreparedMention {
        let key = normalize_with(&m.text, self.case);
        let span = match m.span {
            Some(span) if span.end <= self.text_len => {
                let found = substring(&self.doc.text, span).unwrap_or_default();
                if normalize_with(&found, self.case) == key {
                    Some(span)
                } else {
                    log::warn!(
                        "document {}: role {role}: text at {span} is {found:?}, not {:?}; searching instead",
                        self.doc.doc_id,
                        m.text
                    );
                    find_normalized(&self.doc.text, &m.text, self.case)
                }
            }
            Some(span) => {
                log::warn!(
                    "document {}: role {role}: span {span} of {:?} lies outside the text; searching instead",
                    self.doc.doc_id,
                    m.text
                );
                find_normalized(&self.doc.text, &m.text, self.case)
            }
            None => find_normalized(&self.doc.text, &m.text, self.case),
        };
        PreparedMention {
            text: m.text.clone(),
            key,
            span,
        }
    }
}
