//! Transformations that rewrite predicted templates into gold templates.
//!
//! Given a chosen matching, every discrepancy between a predicted template
//! and its gold partner is explained by one of eight edits. Unmatched
//! predicted fillers are explained by the first applicable rule in this
//! order, preferring an exact-text explanation over a partial (overlapping
//! span) one inside each rule:
//!
//! 1. duplicate of a gold entity already matched in the same role;
//! 2. belongs to another role of the same gold template (Alter Role), if
//!    that entity is still unmatched;
//! 3. belongs to the same role of a different gold template;
//! 4. belongs to a different role of a different gold template;
//! 5. spurious.
//!
//! The log puts every lone Alter Span, lone Alter Role and Alter Span +
//! Alter Role group first; everything else follows in detection order
//! (template pair, then schema role, then filler).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{MentionPairing, TemplateMatching};
use crate::model::{Entity, Mention, RoleFill, Span, Template};
use crate::prepared::{PreparedDocument, Relation};
use crate::span_metric::ScsMode;
use crate::ExactScore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformationKind {
    AlterSpan,
    AlterRole,
    RemoveDuplicateRoleFiller,
    RemoveCrossTemplateSpuriousRoleFiller,
    RemoveSpuriousRoleFiller,
    IntroduceRoleFiller,
    RemoveTemplate,
    IntroduceTemplate,
}

impl TransformationKind {
    /// Kinds whose subject is an existing predicted filler.
    pub fn has_filler_subject(self) -> bool {
        matches!(
            self,
            TransformationKind::AlterSpan
                | TransformationKind::AlterRole
                | TransformationKind::RemoveDuplicateRoleFiller
                | TransformationKind::RemoveCrossTemplateSpuriousRoleFiller
                | TransformationKind::RemoveSpuriousRoleFiller
        )
    }

    pub fn is_removal(self) -> bool {
        matches!(
            self,
            TransformationKind::RemoveDuplicateRoleFiller
                | TransformationKind::RemoveCrossTemplateSpuriousRoleFiller
                | TransformationKind::RemoveSpuriousRoleFiller
        )
    }
}

/// One edit. `role`, `pred_*` describe the predicted subject (for
/// introductions, `pred_template_index` is the template being edited);
/// `gold_*` describe the gold target when there is one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transformation {
    pub kind: TransformationKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_template_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_filler_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pred_span: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_span: Option<Span>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_role: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_template_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_entity_index: Option<usize>,
    /// Filler counts of a removed or introduced template.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub fillers_by_role: BTreeMap<String, u64>,
}

impl Transformation {
    pub fn new(kind: TransformationKind) -> Self {
        Transformation {
            kind,
            role: None,
            pred_template_index: None,
            pred_filler_index: None,
            pred_text: None,
            pred_span: None,
            gold_text: None,
            gold_span: None,
            gold_role: None,
            gold_template_index: None,
            gold_entity_index: None,
            fillers_by_role: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformationLog {
    pub doc_id: String,
    pub transformations: Vec<Transformation>,
}

impl TransformationLog {
    pub fn is_empty(&self) -> bool {
        self.transformations.is_empty()
    }

    pub fn len(&self) -> usize {
        self.transformations.len()
    }
}

/// Whether a group belongs in the front section of the log.
fn is_front_group(group: &[Transformation]) -> bool {
    group
        .iter()
        .all(|t| matches!(t.kind, TransformationKind::AlterSpan | TransformationKind::AlterRole))
}

/// Checks the ordering rule: no front-section group member appears after a
/// member of another kind of group.
pub fn is_well_ordered(log: &TransformationLog) -> bool {
    let groups = crate::taxonomy::group_transformations(&log.transformations);
    let mut front_positions = Vec::new();
    let mut rest_positions = Vec::new();
    for group in &groups {
        let owned: Vec<Transformation> = group.iter().map(|t| (*t).clone()).collect();
        let bucket = if is_front_group(&owned) {
            &mut front_positions
        } else {
            &mut rest_positions
        };
        for t in group {
            let pos = log
                .transformations
                .iter()
                .position(|x| std::ptr::eq(x, *t))
                .expect("member of log");
            bucket.push(pos);
        }
    }
    match (front_positions.iter().max(), rest_positions.iter().min()) {
        (Some(f), Some(r)) => f < r,
        _ => true,
    }
}

pub fn derive_transformations(
    doc: &PreparedDocument<'_>,
    matching: &TemplateMatching,
    mode: ScsMode,
) -> TransformationLog {
    let mut groups: Vec<Vec<Transformation>> = Vec::new();
    for pair in &matching.pairs {
        groups.extend(derive_pair(doc, mode, pair.pred, pair.gold, &pair.roles));
    }
    for &p in &matching.spurious_templates {
        let mut t = Transformation::new(TransformationKind::RemoveTemplate);
        t.pred_template_index = Some(p);
        t.fillers_by_role = filler_counts(doc, &doc.pred[p].roles);
        groups.push(vec![t]);
    }
    for &g in &matching.missing_templates {
        let mut t = Transformation::new(TransformationKind::IntroduceTemplate);
        t.gold_template_index = Some(g);
        t.fillers_by_role = filler_counts(doc, &doc.gold[g].roles);
        groups.push(vec![t]);
    }
    let (front, rest): (Vec<_>, Vec<_>) = groups.into_iter().partition(|g| is_front_group(g));
    TransformationLog {
        doc_id: doc.doc_id.clone(),
        transformations: front.into_iter().chain(rest).flatten().collect(),
    }
}

fn filler_counts(doc: &PreparedDocument<'_>, roles: &[Vec<crate::prepared::PreparedEntity>]) -> BTreeMap<String, u64> {
    roles
        .iter()
        .enumerate()
        .filter(|(_, fillers)| !fillers.is_empty())
        .map(|(r, fillers)| (doc.role_name(r).to_string(), fillers.len() as u64))
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct Hit {
    template: usize,
    role: usize,
    entity: usize,
    mention: usize,
    partial: bool,
}

#[derive(Debug, Clone, Copy)]
enum Fate {
    Duplicate(Hit),
    AlterRole(Hit),
    CrossTemplate(Hit),
    CrossTemplateAlterRole(Hit),
    Spurious,
}

/// First exact candidate in order; otherwise the partial candidate with the
/// lowest SCS (ties: earliest mention start, then order).
fn pick(
    doc: &PreparedDocument<'_>,
    mode: ScsMode,
    subject: (usize, usize, usize),
    candidates: impl IntoIterator<Item = (usize, usize, usize)>,
) -> Option<Hit> {
    let mut best: Option<(ExactScore, Option<usize>, Hit)> = None;
    for (template, role, entity) in candidates {
        match doc.relation(mode, subject, (template, role, entity)) {
            Relation::Exact { mention } => {
                return Some(Hit {
                    template,
                    role,
                    entity,
                    mention,
                    partial: false,
                })
            }
            Relation::Partial { mention, score } => {
                let start = doc.gold[template].roles[role][entity].mentions[mention]
                    .span
                    .map(|s| s.start);
                let better = match &best {
                    None => true,
                    Some((b_score, b_start, _)) => {
                        score < *b_score
                            || (score == *b_score
                                && matches!((start, b_start), (Some(a), Some(b)) if a < *b))
                    }
                };
                if better {
                    best = Some((
                        score,
                        start,
                        Hit {
                            template,
                            role,
                            entity,
                            mention,
                            partial: true,
                        },
                    ));
                }
            }
            Relation::Unrelated => {}
        }
    }
    best.map(|(_, _, hit)| hit)
}

/// Transformation groups for one matched template pair, in detection order.
pub(crate) fn derive_pair(
    doc: &PreparedDocument<'_>,
    mode: ScsMode,
    p: usize,
    g: usize,
    roles: &[MentionPairing],
) -> Vec<Vec<Transformation>> {
    let n_roles = doc.schema.roles.len();
    let string_roles: Vec<usize> = doc.string_roles().collect();

    // Pass 1: explain unmatched predicted string fillers; Alter Role claims
    // an unmatched gold entity so it is not introduced again.
    let mut claimed: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut fates: BTreeMap<(usize, usize), Fate> = BTreeMap::new();
    for &r in &string_roles {
        let pairing = &roles[r];
        for &i in &pairing.unmatched_pred {
            let subject = (p, r, i);
            let matched = pairing.pairs.iter().map(|pair| (g, r, pair.gold));
            let fate = if let Some(hit) = pick(doc, mode, subject, matched) {
                Fate::Duplicate(hit)
            } else if let Some(hit) = pick(
                doc,
                mode,
                subject,
                string_roles
                    .iter()
                    .filter(|&&r2| r2 != r)
                    .flat_map(|&r2| roles[r2].unmatched_gold.iter().map(move |&e| (g, r2, e)))
                    .filter(|&(_, r2, e)| !claimed.contains(&(r2, e)))
                    .collect::<Vec<_>>(),
            ) {
                claimed.insert((hit.role, hit.entity));
                Fate::AlterRole(hit)
            } else if let Some(hit) = pick(
                doc,
                mode,
                subject,
                (0..doc.gold.len())
                    .filter(|&g2| g2 != g)
                    .flat_map(|g2| (0..doc.gold[g2].roles[r].len()).map(move |e| (g2, r, e))),
            ) {
                Fate::CrossTemplate(hit)
            } else if let Some(hit) = pick(
                doc,
                mode,
                subject,
                (0..doc.gold.len()).filter(|&g2| g2 != g).flat_map(|g2| {
                    string_roles
                        .iter()
                        .filter(move |&&r2| r2 != r)
                        .flat_map(move |&r2| (0..doc.gold[g2].roles[r2].len()).map(move |e| (g2, r2, e)))
                }),
            ) {
                Fate::CrossTemplateAlterRole(hit)
            } else {
                Fate::Spurious
            };
            fates.insert((r, i), fate);
        }
    }

    // Pass 2: emit in detection order.
    let mut groups = Vec::new();
    for r in 0..n_roles {
        let pairing = &roles[r];
        if doc.is_set_fill(r) {
            if pairing.pairs.is_empty() {
                if !doc.pred[p].roles[r].is_empty() {
                    groups.push(vec![subject_t(doc, TransformationKind::RemoveSpuriousRoleFiller, p, r, 0)]);
                }
                if !doc.gold[g].roles[r].is_empty() {
                    groups.push(vec![introduce_t(doc, p, g, r, 0)]);
                }
            }
            continue;
        }
        for pair in pairing.pairs.iter().filter(|pair| !pair.exact) {
            let mention = match doc.relation(mode, (p, r, pair.pred), (g, r, pair.gold)) {
                Relation::Partial { mention, .. } | Relation::Exact { mention } => mention,
                Relation::Unrelated => 0,
            };
            let hit = Hit {
                template: g,
                role: r,
                entity: pair.gold,
                mention,
                partial: true,
            };
            groups.push(vec![alter_span_t(doc, p, r, pair.pred, hit)]);
        }
        for &i in &pairing.unmatched_pred {
            groups.push(fate_group(doc, p, r, i, fates[&(r, i)]));
        }
        for &e in &pairing.unmatched_gold {
            if !claimed.contains(&(r, e)) {
                groups.push(vec![introduce_t(doc, p, g, r, e)]);
            }
        }
    }
    groups
}

fn subject_t(doc: &PreparedDocument<'_>, kind: TransformationKind, p: usize, r: usize, i: usize) -> Transformation {
    let filler = doc.pred[p].filler(r, i);
    let mut t = Transformation::new(kind);
    t.role = Some(doc.role_name(r).to_string());
    t.pred_template_index = Some(p);
    t.pred_filler_index = Some(i);
    t.pred_text = Some(filler.text.clone());
    t.pred_span = filler.span;
    t
}

fn with_target(doc: &PreparedDocument<'_>, mut t: Transformation, hit: Hit) -> Transformation {
    let mention = &doc.gold[hit.template].roles[hit.role][hit.entity].mentions[hit.mention];
    t.gold_text = Some(mention.text.clone());
    t.gold_span = mention.span;
    t.gold_role = Some(doc.role_name(hit.role).to_string());
    t.gold_template_index = Some(hit.template);
    t.gold_entity_index = Some(hit.entity);
    t
}

fn alter_span_t(doc: &PreparedDocument<'_>, p: usize, r: usize, i: usize, hit: Hit) -> Transformation {
    with_target(doc, subject_t(doc, TransformationKind::AlterSpan, p, r, i), hit)
}

fn introduce_t(doc: &PreparedDocument<'_>, p: usize, g: usize, r: usize, e: usize) -> Transformation {
    let mut t = Transformation::new(TransformationKind::IntroduceRoleFiller);
    t.role = Some(doc.role_name(r).to_string());
    t.pred_template_index = Some(p);
    with_target(
        doc,
        t,
        Hit {
            template: g,
            role: r,
            entity: e,
            mention: 0,
            partial: false,
        },
    )
}

fn fate_group(doc: &PreparedDocument<'_>, p: usize, r: usize, i: usize, fate: Fate) -> Vec<Transformation> {
    use TransformationKind::*;
    let (hit, kinds): (Option<Hit>, &[TransformationKind]) = match fate {
        Fate::Duplicate(h) => (Some(h), &[RemoveDuplicateRoleFiller]),
        Fate::AlterRole(h) => (Some(h), &[AlterRole]),
        Fate::CrossTemplate(h) => (Some(h), &[RemoveCrossTemplateSpuriousRoleFiller]),
        Fate::CrossTemplateAlterRole(h) => (Some(h), &[AlterRole, RemoveCrossTemplateSpuriousRoleFiller]),
        Fate::Spurious => (None, &[RemoveSpuriousRoleFiller]),
    };
    let mut group = Vec::with_capacity(3);
    match hit {
        Some(hit) => {
            if hit.partial {
                group.push(alter_span_t(doc, p, r, i, hit));
            }
            for &kind in kinds {
                group.push(with_target(doc, subject_t(doc, kind, p, r, i), hit));
            }
        }
        None => group.push(subject_t(doc, RemoveSpuriousRoleFiller, p, r, i)),
    }
    group
}

#[derive(Debug, Clone)]
struct WorkFiller {
    origin: Option<(usize, usize)>,
    role: usize,
    mention: Mention,
}

#[derive(Debug, Clone)]
struct WorkTemplate {
    source: Option<usize>,
    fillers: Vec<WorkFiller>,
    removed: bool,
}

/// Replays a log on the document's predicted templates. The result holds
/// surviving predicted templates in their original order followed by
/// introduced templates.
pub fn apply_transformations(doc: &PreparedDocument<'_>, log: &TransformationLog) -> Result<Vec<Template>> {
    let mut work: Vec<WorkTemplate> = doc
        .pred
        .iter()
        .enumerate()
        .map(|(p, t)| WorkTemplate {
            source: Some(p),
            fillers: t
                .roles
                .iter()
                .enumerate()
                .flat_map(|(r, fillers)| {
                    fillers.iter().enumerate().map(move |(i, e)| WorkFiller {
                        origin: Some((r, i)),
                        role: r,
                        mention: e.canonical().to_mention(),
                    })
                })
                .collect(),
            removed: false,
        })
        .collect();

    let role_index = |name: &Option<String>| -> Result<usize> {
        let name = name
            .as_deref()
            .ok_or_else(|| Error::InconsistentLog("transformation without a role".into()))?;
        doc.schema
            .index_of(name)
            .ok_or_else(|| Error::InconsistentLog(format!("unknown role {name:?}")))
    };

    for t in &log.transformations {
        match t.kind {
            TransformationKind::RemoveTemplate => {
                let p = t.pred_template_index.ok_or_else(|| Error::InconsistentLog("RemoveTemplate without template".into()))?;
                let w = work
                    .iter_mut()
                    .find(|w| w.source == Some(p))
                    .ok_or_else(|| Error::InconsistentLog(format!("no predicted template {p}")))?;
                if w.removed {
                    return Err(Error::InconsistentLog(format!("template {p} removed twice")));
                }
                w.removed = true;
            }
            TransformationKind::IntroduceTemplate => {
                let g = t.gold_template_index.ok_or_else(|| Error::InconsistentLog("IntroduceTemplate without template".into()))?;
                let gold = doc
                    .gold
                    .get(g)
                    .ok_or_else(|| Error::InconsistentLog(format!("no gold template {g}")))?;
                work.push(WorkTemplate {
                    source: None,
                    fillers: gold
                        .roles
                        .iter()
                        .enumerate()
                        .flat_map(|(r, es)| {
                            es.iter().map(move |e| WorkFiller {
                                origin: None,
                                role: r,
                                mention: e.canonical().to_mention(),
                            })
                        })
                        .collect(),
                    removed: false,
                });
            }
            TransformationKind::IntroduceRoleFiller => {
                let p = t.pred_template_index.ok_or_else(|| Error::InconsistentLog("IntroduceRoleFiller without template".into()))?;
                let r = role_index(&t.gold_role)?;
                let text = t.gold_text.clone().ok_or_else(|| Error::InconsistentLog("IntroduceRoleFiller without text".into()))?;
                let w = live_template(&mut work, p)?;
                w.fillers.push(WorkFiller {
                    origin: None,
                    role: r,
                    mention: Mention { text, span: t.gold_span },
                });
            }
            kind => {
                let p = t.pred_template_index.ok_or_else(|| Error::InconsistentLog(format!("{kind:?} without template")))?;
                let r = role_index(&t.role)?;
                let i = t.pred_filler_index.ok_or_else(|| Error::InconsistentLog(format!("{kind:?} without filler")))?;
                let w = live_template(&mut work, p)?;
                let pos = w
                    .fillers
                    .iter()
                    .position(|f| f.origin == Some((r, i)))
                    .ok_or_else(|| {
                        Error::InconsistentLog(format!("filler {i} of role {:?} in template {p} already consumed", t.role))
                    })?;
                match kind {
                    TransformationKind::AlterSpan => {
                        let text = t.gold_text.clone().ok_or_else(|| Error::InconsistentLog("AlterSpan without target".into()))?;
                        w.fillers[pos].mention = Mention { text, span: t.gold_span };
                    }
                    TransformationKind::AlterRole => {
                        let target = role_index(&t.gold_role)?;
                        if target == w.fillers[pos].role {
                            return Err(Error::InconsistentLog("AlterRole to the same role".into()));
                        }
                        w.fillers[pos].role = target;
                    }
                    _ => {
                        w.fillers.remove(pos);
                    }
                }
            }
        }
    }

    Ok(work
        .into_iter()
        .filter(|w| !w.removed)
        .map(|w| to_template(doc, w))
        .collect())
}

fn live_template(work: &mut [WorkTemplate], p: usize) -> Result<&mut WorkTemplate> {
    match work.iter_mut().find(|w| w.source == Some(p)) {
        Some(w) if !w.removed => Ok(w),
        Some(_) => Err(Error::InconsistentLog(format!("template {p} already removed"))),
        None => Err(Error::InconsistentLog(format!("no predicted template {p}"))),
    }
}

fn to_template(doc: &PreparedDocument<'_>, w: WorkTemplate) -> Template {
    let mut per_role: BTreeMap<usize, Vec<Mention>> = BTreeMap::new();
    for f in w.fillers {
        per_role.entry(f.role).or_default().push(f.mention);
    }
    let mut template = Template::new();
    for (r, mentions) in per_role {
        let name = doc.role_name(r).to_string();
        let fill = if doc.is_set_fill(r) && mentions.len() == 1 {
            RoleFill::Value(mentions.into_iter().next().expect("one value").text)
        } else {
            RoleFill::Entities(mentions.into_iter().map(Entity::single).collect())
        };
        template.roles.insert(name, fill);
    }
    template
}

/// Whether `templates` equal the document's gold templates up to the choice
/// of mention: same number of templates, and a pairing under which every
/// set-fill value matches and every string filler exactly matches a mention
/// of a distinct gold entity of the same role.
pub fn is_gold_equivalent(templates: &[Template], doc: &PreparedDocument<'_>) -> bool {
    if templates.len() != doc.gold.len() {
        return false;
    }
    let n = templates.len();
    let keyed: Vec<Vec<Vec<String>>> = templates
        .iter()
        .map(|t| {
            doc.schema
                .roles
                .iter()
                .map(|spec| match t.get(&spec.name) {
                    None => Vec::new(),
                    Some(RoleFill::Value(v)) => vec![doc.normalize(v)],
                    Some(RoleFill::Entities(es)) => es
                        .iter()
                        .filter_map(|e| e.canonical())
                        .map(|m| doc.normalize(&m.text))
                        .collect(),
                })
                .collect()
        })
        .collect();
    if templates.iter().any(|t| t.roles.keys().any(|r| doc.schema.index_of(r).is_none())) {
        return false;
    }
    let template_ok = |a: usize, b: usize| -> bool {
        keyed[a].iter().enumerate().all(|(r, keys)| {
            let gold = &doc.gold[b].roles[r];
            keys.len() == gold.len()
                && has_perfect_matching(keys.len(), |i, j| gold[j].exact_mention(&keys[i]).is_some())
        })
    };
    has_perfect_matching(n, template_ok)
}

/// Kuhn's augmenting paths on an `n × n` bipartite graph.
fn has_perfect_matching(n: usize, adj: impl Fn(usize, usize) -> bool) -> bool {
    let edges: Vec<Vec<usize>> = (0..n).map(|i| (0..n).filter(|&j| adj(i, j)).collect()).collect();
    let mut owner: Vec<Option<usize>> = vec![None; n];
    fn augment(i: usize, edges: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &edges[i] {
            if seen[j] {
                continue;
            }
            seen[j] = true;
            if owner[j].is_none_or(|k| augment(k, edges, seen, owner)) {
                owner[j] = Some(i);
                return true;
            }
        }
        false
    }
    (0..n).all(|i| {
        let mut seen = vec![false; n];
        augment(i, &edges, &mut seen, &mut owner)
    })
}
