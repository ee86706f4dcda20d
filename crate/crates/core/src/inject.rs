//! Synthetic corpora and controlled error injection.
//!
//! [`generate_corpus`] builds gold-only documents whose text is assembled
//! from invented words, so every mention sits at a known offset.
//! [`inject_errors`] copies the gold templates (canonical mentions only) into
//! the prediction side and applies, per document, the inverse of the edits
//! the analyzer looks for. The returned ledger is the error profile the
//! analyzer must report.
//!
//! Injections never share a source entity, never touch one anchor entity per
//! template, and use fillers that relate to nothing but their source, so the
//! precedence rules of the transform engine cannot reclassify them. Each
//! document is finally checked so that the identity template matching is the
//! unique best one; placements failing the check are redrawn.
//!
//! [`perturb_predictions`] is the unconstrained counterpart used for fuzzing:
//! it edits predictions at random and keeps no ledger.

use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::pair_score;
use crate::model::{Document, Entity, Mention, RoleFill, RoleSpec, Schema, Span, Template};
use crate::normalize::{find_normalized, normalize_with, substring, CaseMode};
use crate::prepared::PreparedDocument;
use crate::span_metric::ScsMode;
use crate::taxonomy::{ErrorProfile, ErrorType, SideTallies};

const CONSONANTS: &[u8] = b"bdfghklmnprstvz";
const VOWELS: &[u8] = b"aeiou";
const SEPARATORS: &[&str] = &[", ", ". ", "; ", " - "];
const INCIDENT_TYPES: &[&str] = &["attack", "bombing", "kidnapping", "arson", "robbery"];
const MAX_ATTEMPTS: usize = 200;

/// Incident-style schema: one set-fill role and five string-fill roles.
pub fn synthetic_schema() -> Schema {
    Schema::new(vec![
        RoleSpec::set_fill("incident_type", INCIDENT_TYPES),
        RoleSpec::string_fill("perp_ind", true),
        RoleSpec::string_fill("perp_org", true),
        RoleSpec::string_fill("target", true),
        RoleSpec::string_fill("victim", true),
        RoleSpec::string_fill("weapon", true),
    ])
    .expect("synthetic schema is valid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub documents: usize,
    pub templates_per_doc: usize,
    /// Upper bound on entities in a filled role.
    pub entities_per_role: usize,
    /// Upper bound on the size of a coreference cluster.
    pub mentions_per_entity: usize,
    /// Upper bound on words per mention.
    pub words_per_mention: usize,
    pub role_fill_probability: f64,
    /// Chance that a filler reuses an entity of an earlier template.
    pub shared_entity_probability: f64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            documents: 10,
            templates_per_doc: 2,
            entities_per_role: 2,
            mentions_per_entity: 2,
            words_per_mention: 2,
            role_fill_probability: 0.6,
            shared_entity_probability: 0.0,
        }
    }
}

/// Seed for document `index`, so documents can be processed independently.
fn doc_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Issues words made of consonant-vowel syllables (so always of even
/// length), unique within a document.
struct Namer {
    used: HashSet<String>,
}

impl Namer {
    fn new() -> Self {
        Namer { used: HashSet::new() }
    }

    fn word(&mut self, rng: &mut impl Rng) -> String {
        loop {
            let mut w = String::new();
            for _ in 0..rng.gen_range(2..=3) {
                w.push(CONSONANTS[rng.gen_range(0..CONSONANTS.len())] as char);
                w.push(VOWELS[rng.gen_range(0..VOWELS.len())] as char);
            }
            if self.used.insert(w.clone()) {
                let mut chars = w.chars();
                let first = chars.next().expect("non-empty").to_ascii_uppercase();
                return std::iter::once(first).chain(chars).collect();
            }
        }
    }

    fn phrase(&mut self, rng: &mut impl Rng, max_words: usize) -> String {
        let n = rng.gen_range(1..=max_words.max(1));
        (0..n).map(|_| self.word(rng)).collect::<Vec<_>>().join(" ")
    }
}

pub fn generate_corpus(params: &GenerationParams, seed: u64) -> Vec<Document> {
    let schema = synthetic_schema();
    (0..params.documents)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(doc_seed(seed, i));
            generate_document(&schema, params, &format!("doc-{i:04}"), &mut rng)
        })
        .collect()
}

fn generate_document(schema: &Schema, params: &GenerationParams, doc_id: &str, rng: &mut ChaCha8Rng) -> Document {
    let mut namer = Namer::new();
    let mut entities: Vec<Vec<String>> = Vec::new();
    // per template: set-fill value and entity ids per role
    let mut layout: Vec<(Option<&str>, Vec<Vec<usize>>)> = Vec::new();
    let string_roles: Vec<usize> = (0..schema.roles.len()).filter(|&r| !schema.roles[r].is_set_fill()).collect();

    for _ in 0..params.templates_per_doc {
        let value = rng.gen_bool(0.9).then(|| *INCIDENT_TYPES.choose(rng).expect("non-empty"));
        let mut roles = vec![Vec::new(); schema.roles.len()];
        let forced = *string_roles.choose(rng).expect("schema has string roles");
        for &r in &string_roles {
            if r != forced && !rng.gen_bool(params.role_fill_probability) {
                continue;
            }
            for _ in 0..rng.gen_range(1..=params.entities_per_role.max(1)) {
                let earlier: Vec<usize> = layout.iter().flat_map(|(_, rs)| rs.iter().flatten().copied()).collect();
                let id = if !earlier.is_empty() && rng.gen_bool(params.shared_entity_probability) {
                    *earlier.choose(rng).expect("non-empty")
                } else {
                    let n = rng.gen_range(1..=params.mentions_per_entity.max(1));
                    entities.push((0..n).map(|_| namer.phrase(rng, params.words_per_mention)).collect());
                    entities.len() - 1
                };
                if !roles[r].contains(&id) {
                    roles[r].push(id);
                }
            }
        }
        layout.push((value, roles));
    }

    let mut slots: Vec<(usize, usize)> = entities
        .iter()
        .enumerate()
        .flat_map(|(e, ms)| (0..ms.len()).map(move |m| (e, m)))
        .collect();
    slots.shuffle(rng);
    let mut text = String::new();
    let mut spans: BTreeMap<(usize, usize), Span> = BTreeMap::new();
    for (e, m) in slots {
        if !text.is_empty() {
            text.push_str(SEPARATORS.choose(rng).expect("non-empty"));
        }
        let start = text.chars().count();
        text.push_str(&entities[e][m]);
        spans.insert((e, m), Span::new(start, text.chars().count()));
    }
    if !text.is_empty() {
        text.push('.');
    }

    let mut doc = Document::new(doc_id, text);
    for (value, roles) in layout {
        let mut t = Template::new();
        if let Some(v) = value {
            t.roles.insert("incident_type".into(), RoleFill::Value(v.to_string()));
        }
        for (r, ids) in roles.iter().enumerate() {
            if ids.is_empty() {
                continue;
            }
            let fill = ids
                .iter()
                .map(|&e| {
                    Entity::new(
                        entities[e]
                            .iter()
                            .enumerate()
                            .map(|(m, s)| Mention::with_span(s.clone(), spans[&(e, m)]))
                            .collect(),
                    )
                })
                .collect();
            t.roles.insert(schema.roles[r].name.clone(), RoleFill::Entities(fill));
        }
        doc.gold_templates.push(t);
    }
    doc
}

/// Errors to inject per document, keyed by error type name, plus the seed.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InjectionSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(flatten)]
    pub counts: BTreeMap<ErrorType, usize>,
}

impl InjectionSpec {
    pub fn new(seed: u64) -> Self {
        InjectionSpec {
            seed,
            counts: BTreeMap::new(),
        }
    }

    pub fn with(mut self, error: ErrorType, count: usize) -> Self {
        self.counts.insert(error, count);
        self
    }

    pub fn count(&self, error: ErrorType) -> usize {
        self.counts.get(&error).copied().unwrap_or(0)
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Builds predictions for every document with the requested errors. The
/// returned documents carry both the gold and the injected templates.
pub fn inject_errors(gold: &[Document], schema: &Schema, spec: &InjectionSpec) -> Result<(Vec<Document>, ErrorProfile)> {
    let results: Vec<Result<(Document, ErrorProfile)>> = gold
        .par_iter()
        .enumerate()
        .map(|(i, d)| inject_document(d, schema, spec, doc_seed(spec.seed, i)))
        .collect();
    let mut docs = Vec::with_capacity(gold.len());
    let mut ledger = ErrorProfile::new();
    ledger.ensure_roles(schema.role_names());
    for r in results {
        let (d, p) = r?;
        ledger.merge(&p);
        docs.push(d);
    }
    Ok((docs, ledger))
}

/// One predicted template under construction, fillers per schema role.
#[derive(Debug, Clone)]
struct Draft {
    roles: Vec<Vec<Mention>>,
}

impl Draft {
    fn to_template(&self, schema: &Schema) -> Template {
        let mut t = Template::new();
        for (r, fillers) in self.roles.iter().enumerate() {
            if fillers.is_empty() {
                continue;
            }
            let spec = &schema.roles[r];
            let fill = if spec.is_set_fill() {
                RoleFill::Value(fillers[0].text.clone())
            } else {
                RoleFill::Entities(fillers.iter().cloned().map(Entity::single).collect())
            };
            t.roles.insert(spec.name.clone(), fill);
        }
        t
    }
}

/// Canonical-mention copy of the gold templates.
fn canonical_drafts(gold: &PreparedDocument<'_>) -> Vec<Draft> {
    gold.gold
        .iter()
        .map(|t| Draft {
            roles: t
                .roles
                .iter()
                .map(|es| es.iter().map(|e| e.canonical().to_mention()).collect())
                .collect(),
        })
        .collect()
}

struct Ctx<'a, 's> {
    doc: &'a Document,
    gold: &'a PreparedDocument<'s>,
    keys: HashSet<String>,
    string_roles: Vec<usize>,
}

impl Ctx<'_, '_> {
    /// Entities whose mentions share no text and no characters with any
    /// other entity of the document.
    fn is_isolated(&self, t: usize, r: usize, e: usize) -> bool {
        let me = &self.gold.gold[t].roles[r][e];
        self.gold.gold.iter().enumerate().all(|(t2, tpl)| {
            tpl.roles.iter().enumerate().all(|(r2, es)| {
                self.gold.is_set_fill(r2)
                    || es.iter().enumerate().all(|(e2, other)| {
                        (t2, r2, e2) == (t, r, e)
                            || other.mentions.iter().all(|om| {
                                me.mentions.iter().all(|mm| {
                                    om.key != mm.key
                                        && !matches!((om.span, mm.span), (Some(a), Some(b)) if a.start < b.end && b.start < a.end)
                                })
                            })
                    })
            })
        })
    }

    /// The canonical mention with its last character cut off: overlaps the
    /// original, equals no gold mention.
    fn variant(&self, t: usize, r: usize, e: usize) -> Option<Mention> {
        let m = self.gold.gold[t].roles[r][e].canonical();
        let span = m.span?;
        if span.len() < 2 {
            return None;
        }
        let cut = Span::new(span.start, span.end - 1);
        let text = substring(&self.doc.text, cut)?;
        let key = normalize_with(&text, CaseMode::Insensitive);
        (!key.is_empty() && !self.keys.contains(&key)).then(|| Mention::with_span(text, cut))
    }

    fn fresh(&self, namer: &mut Namer, rng: &mut impl Rng) -> Mention {
        loop {
            let text = format!("Xq{}", namer.word(rng).to_lowercase());
            let key = normalize_with(&text, CaseMode::Insensitive);
            if !self.keys.contains(&key) && find_normalized(&self.doc.text, &text, CaseMode::Insensitive).is_none() {
                return Mention::new(text);
            }
        }
    }
}

fn infeasible(error_type: ErrorType, reason: impl Into<String>) -> Error {
    Error::InfeasibleSpec {
        error_type,
        reason: reason.into(),
    }
}

const SOURCE_TYPES: [ErrorType; 10] = [
    ErrorType::SpanError,
    ErrorType::DuplicateRoleFiller,
    ErrorType::DuplicatePartiallyMatchedRoleFiller,
    ErrorType::MissingRoleFiller,
    ErrorType::IncorrectRole,
    ErrorType::IncorrectRolePartiallyMatchedFiller,
    ErrorType::WrongTemplateForRoleFiller,
    ErrorType::WrongTemplateForPartiallyMatchedRoleFiller,
    ErrorType::WrongTemplateWrongRole,
    ErrorType::WrongTemplateWrongRolePartiallyMatchedFiller,
];

fn check_feasible(ctx: &Ctx<'_, '_>, spec: &InjectionSpec, doc_id: &str) -> Result<()> {
    let n_templates = ctx.gold.gold.len();
    let kept = n_templates.saturating_sub(spec.count(ErrorType::MissingTemplate));
    let needs = |t: ErrorType| spec.count(t) > 0;
    if spec.count(ErrorType::MissingTemplate) > n_templates {
        return Err(infeasible(
            ErrorType::MissingTemplate,
            format!("document {doc_id} has only {n_templates} templates"),
        ));
    }
    if ctx.string_roles.is_empty() {
        if let Some(&t) = ErrorType::ALL.iter().find(|&&t| t != ErrorType::MissingTemplate && needs(t)) {
            return Err(infeasible(t, "the schema has no string-fill roles"));
        }
    }
    for t in [
        ErrorType::IncorrectRole,
        ErrorType::IncorrectRolePartiallyMatchedFiller,
        ErrorType::WrongTemplateWrongRole,
        ErrorType::WrongTemplateWrongRolePartiallyMatchedFiller,
    ] {
        if needs(t) && ctx.string_roles.len() < 2 {
            return Err(infeasible(t, "needs at least two string-fill roles"));
        }
    }
    for t in [
        ErrorType::WrongTemplateForRoleFiller,
        ErrorType::WrongTemplateForPartiallyMatchedRoleFiller,
        ErrorType::WrongTemplateWrongRole,
        ErrorType::WrongTemplateWrongRolePartiallyMatchedFiller,
    ] {
        if needs(t) && (n_templates < 2 || kept < 1) {
            return Err(infeasible(t, format!("document {doc_id} needs two templates, one of them kept")));
        }
    }
    if needs(ErrorType::SpuriousRoleFiller) && kept < 1 {
        return Err(infeasible(ErrorType::SpuriousRoleFiller, format!("document {doc_id} keeps no template")));
    }
    let sources = (0..n_templates)
        .map(|t| source_candidates(ctx, t).len())
        .sum::<usize>();
    let wanted: usize = SOURCE_TYPES.iter().map(|&t| spec.count(t)).sum();
    if wanted > sources {
        let t = *SOURCE_TYPES.iter().find(|&&t| needs(t)).expect("wanted > 0");
        return Err(infeasible(
            t,
            format!("document {doc_id} has {sources} usable entities but {wanted} injections need one each"),
        ));
    }
    Ok(())
}

/// Isolated string-fill entities of template `t` other than its anchor (the
/// first string-fill entity in schema order).
fn source_candidates(ctx: &Ctx<'_, '_>, t: usize) -> Vec<(usize, usize, usize)> {
    let tpl = &ctx.gold.gold[t];
    let all: Vec<(usize, usize, usize)> = ctx
        .string_roles
        .iter()
        .flat_map(|&r| (0..tpl.roles[r].len()).map(move |e| (t, r, e)))
        .collect();
    all.into_iter().skip(1).filter(|&(t, r, e)| ctx.is_isolated(t, r, e)).collect()
}

fn inject_document(doc: &Document, schema: &Schema, spec: &InjectionSpec, seed: u64) -> Result<(Document, ErrorProfile)> {
    let gold = PreparedDocument::new(doc, schema, CaseMode::Insensitive)?;
    let ctx = Ctx {
        doc,
        keys: gold
            .gold
            .iter()
            .flat_map(|t| t.roles.iter().flatten())
            .flat_map(|e| e.mentions.iter().map(|m| m.key.clone()))
            .collect(),
        string_roles: gold.string_roles().collect(),
        gold: &gold,
    };
    check_feasible(&ctx, spec, &doc.doc_id)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut failed = None;
    for _ in 0..MAX_ATTEMPTS {
        match attempt(&ctx, schema, spec, &mut rng) {
            Ok(done) => return Ok(done),
            Err(t) => failed = Some(t),
        }
    }
    let error_type = failed.expect("at least one attempt");
    Err(infeasible(
        error_type,
        format!("document {}: no non-confounding placement found in {MAX_ATTEMPTS} attempts", doc.doc_id),
    ))
}

/// One random placement. Fails with the error type that could not be placed
/// (or the first cross-template type when the final check fails).
fn attempt(
    ctx: &Ctx<'_, '_>,
    schema: &Schema,
    spec: &InjectionSpec,
    rng: &mut ChaCha8Rng,
) -> std::result::Result<(Document, ErrorProfile), ErrorType> {
    let doc_id = ctx.doc.doc_id.as_str();
    let n_templates = ctx.gold.gold.len();
    let mut drafts: Vec<Option<Draft>> = canonical_drafts(ctx.gold).into_iter().map(Some).collect();
    let mut extra: Vec<Draft> = Vec::new();
    let mut ledger = ErrorProfile::new();
    ledger.touch_doc(doc_id);
    let mut namer = Namer::new();
    let role_name = |r: usize| ctx.gold.role_name(r).to_string();

    let mut order: Vec<usize> = (0..n_templates).collect();
    order.shuffle(rng);
    for &t in order.iter().take(spec.count(ErrorType::MissingTemplate)) {
        drafts[t] = None;
        ledger.record(doc_id, None, ErrorType::MissingTemplate);
        for (r, es) in ctx.gold.gold[t].roles.iter().enumerate() {
            if !es.is_empty() {
                ledger.record_side(
                    doc_id,
                    &role_name(r),
                    SideTallies {
                        missing_template_role_fillers: es.len() as u64,
                        ..Default::default()
                    },
                );
            }
        }
    }
    let kept: Vec<usize> = (0..n_templates).filter(|&t| drafts[t].is_some()).collect();

    let mut pool: Vec<(usize, usize, usize)> = (0..n_templates).flat_map(|t| source_candidates(ctx, t)).collect();
    pool.shuffle(rng);
    // index of the filler for gold entity (t, r, e) in the draft; entities
    // are copied in order so it starts as `e`
    let mut moved: HashSet<(usize, usize, usize)> = HashSet::new();

    for error in ErrorType::ALL {
        for _ in 0..spec.count(error) {
            use ErrorType::*;
            match error {
                MissingTemplate => {}
                SpuriousRoleFiller => {
                    let t = *kept.choose(rng).ok_or(error)?;
                    let r = *ctx.string_roles.choose(rng).ok_or(error)?;
                    let m = ctx.fresh(&mut namer, rng);
                    drafts[t].as_mut().expect("kept").roles[r].push(m);
                    ledger.record(doc_id, Some(&role_name(r)), error);
                }
                SpuriousTemplate => {
                    let mut d = Draft {
                        roles: vec![Vec::new(); schema.roles.len()],
                    };
                    let mut touched: BTreeMap<usize, u64> = BTreeMap::new();
                    for _ in 0..rng.gen_range(2..=3) {
                        let r = *ctx.string_roles.choose(rng).ok_or(error)?;
                        d.roles[r].push(ctx.fresh(&mut namer, rng));
                        *touched.entry(r).or_default() += 1;
                    }
                    extra.push(d);
                    ledger.record(doc_id, None, error);
                    for (r, n) in touched {
                        ledger.record_side(
                            doc_id,
                            &role_name(r),
                            SideTallies {
                                spurious_template_role_fillers: n,
                                ..Default::default()
                            },
                        );
                    }
                }
                _ => {
                    let partial = matches!(
                        error,
                        SpanError
                            | DuplicatePartiallyMatchedRoleFiller
                            | IncorrectRolePartiallyMatchedFiller
                            | WrongTemplateForPartiallyMatchedRoleFiller
                            | WrongTemplateWrongRolePartiallyMatchedFiller
                    );
                    let cross = matches!(
                        error,
                        WrongTemplateForRoleFiller
                            | WrongTemplateForPartiallyMatchedRoleFiller
                            | WrongTemplateWrongRole
                            | WrongTemplateWrongRolePartiallyMatchedFiller
                    );
                    let pos = pool
                        .iter()
                        .position(|&(t, r, e)| {
                            (cross || drafts[t].is_some())
                                && (!cross || kept.iter().any(|&a| a != t))
                                && (!partial || ctx.variant(t, r, e).is_some())
                        })
                        .ok_or(error)?;
                    let (t, r, e) = pool.remove(pos);
                    let filler = if partial {
                        ctx.variant(t, r, e).expect("checked")
                    } else {
                        ctx.gold.gold[t].roles[r][e].canonical().to_mention()
                    };
                    let other_role = |rng: &mut ChaCha8Rng| {
                        let others: Vec<usize> = ctx.string_roles.iter().copied().filter(|&x| x != r).collect();
                        *others.choose(rng).expect("two string roles")
                    };
                    match error {
                        SpanError => {
                            drafts[t].as_mut().expect("kept").roles[r][e] = filler;
                        }
                        DuplicateRoleFiller => {
                            let mentions = &ctx.gold.gold[t].roles[r][e].mentions;
                            let dup = mentions.choose(rng).expect("entities have mentions").to_mention();
                            drafts[t].as_mut().expect("kept").roles[r].push(dup);
                        }
                        DuplicatePartiallyMatchedRoleFiller => {
                            drafts[t].as_mut().expect("kept").roles[r].push(filler);
                        }
                        MissingRoleFiller => {
                            moved.insert((t, r, e));
                        }
                        IncorrectRole | IncorrectRolePartiallyMatchedFiller => {
                            moved.insert((t, r, e));
                            let r2 = other_role(rng);
                            drafts[t].as_mut().expect("kept").roles[r2].push(filler);
                        }
                        _ => {
                            let targets: Vec<usize> = kept.iter().copied().filter(|&a| a != t).collect();
                            let a = *targets.choose(rng).expect("checked");
                            let r2 = if matches!(error, WrongTemplateWrongRole | WrongTemplateWrongRolePartiallyMatchedFiller) {
                                other_role(rng)
                            } else {
                                r
                            };
                            drafts[a].as_mut().expect("kept").roles[r2].push(filler);
                        }
                    }
                    ledger.record(doc_id, Some(&role_name(r)), error);
                }
            }
        }
    }

    // drop deleted and moved fillers; entity order within a role is kept
    let mut pred_templates = Vec::new();
    let mut origin = Vec::new();
    for (t, draft) in drafts.into_iter().enumerate() {
        let Some(mut draft) = draft else { continue };
        for r in 0..draft.roles.len() {
            let n_gold = ctx.gold.gold[t].roles[r].len();
            let fillers = std::mem::take(&mut draft.roles[r]);
            draft.roles[r] = fillers
                .into_iter()
                .enumerate()
                .filter(|(i, _)| *i >= n_gold || !moved.contains(&(t, r, *i)))
                .map(|(_, m)| m)
                .collect();
        }
        pred_templates.push(draft.to_template(schema));
        origin.push(t);
    }
    pred_templates.extend(extra.iter().map(|d| d.to_template(schema)));

    let mut out = ctx.doc.clone();
    out.predicted_templates = pred_templates;
    if spec.total() > 0 && !identity_is_strictly_best(&out, schema, &origin) {
        let culprit = ErrorType::ALL
            .into_iter()
            .find(|&t| spec.count(t) > 0 && !matches!(t, ErrorType::SpuriousRoleFiller))
            .unwrap_or(ErrorType::SpuriousRoleFiller);
        return Err(culprit);
    }
    Ok((out, ledger))
}

/// Every kept predicted template scores strictly higher against its own gold
/// template than against any other.
fn identity_is_strictly_best(doc: &Document, schema: &Schema, origin: &[usize]) -> bool {
    let Ok(prepared) = PreparedDocument::new(doc, schema, CaseMode::Insensitive) else {
        return false;
    };
    origin.iter().enumerate().all(|(p, &own)| {
        let own_score = pair_score(&prepared, ScsMode::GeometricMean, p, own);
        (0..prepared.gold.len())
            .filter(|&g| g != own)
            .all(|g| pair_score(&prepared, ScsMode::GeometricMean, p, g) < own_score)
    })
}

/// Random, unconstrained edits to predictions (starting from the gold
/// templates). `max_edits` bounds the edits per document.
pub fn perturb_predictions(docs: &[Document], schema: &Schema, seed: u64, max_edits: usize) -> Vec<Document> {
    docs.par_iter()
        .enumerate()
        .map(|(i, d)| {
            let mut rng = ChaCha8Rng::seed_from_u64(doc_seed(seed, i) ^ 0x5151);
            perturb_document(d, schema, &mut rng, max_edits)
        })
        .collect()
}

fn perturb_document(doc: &Document, schema: &Schema, rng: &mut ChaCha8Rng, max_edits: usize) -> Document {
    let n_roles = schema.roles.len();
    let string_roles: Vec<usize> = (0..n_roles).filter(|&r| !schema.roles[r].is_set_fill()).collect();
    let set_roles: Vec<usize> = (0..n_roles).filter(|&r| schema.roles[r].is_set_fill()).collect();
    let chars: Vec<char> = doc.text.chars().collect();
    let mut namer = Namer::new();

    // gold entity mentions by role, for copying
    let mut gold_mentions: Vec<(usize, Vec<Mention>)> = Vec::new();
    let mut drafts: Vec<Draft> = doc
        .gold_templates
        .iter()
        .map(|t| {
            let mut roles = vec![Vec::new(); n_roles];
            for (name, fill) in &t.roles {
                let Some(r) = schema.index_of(name) else { continue };
                match fill {
                    RoleFill::Value(v) => roles[r].push(Mention::new(v.clone())),
                    RoleFill::Entities(es) => {
                        for e in es {
                            if let Some(m) = e.canonical() {
                                roles[r].push(m.clone());
                            }
                            gold_mentions.push((r, e.mentions.clone()));
                        }
                    }
                }
            }
            Draft { roles }
        })
        .collect();

    let random_span = |rng: &mut ChaCha8Rng| -> Option<Mention> {
        if chars.is_empty() {
            return None;
        }
        let start = rng.gen_range(0..chars.len());
        let end = (start + rng.gen_range(1..=12)).min(chars.len());
        let text: String = chars[start..end].iter().collect();
        (!text.trim().is_empty()).then(|| Mention::with_span(text, Span::new(start, end)))
    };

    for _ in 0..rng.gen_range(0..=max_edits) {
        let n = drafts.len();
        let pick_filler = |drafts: &Vec<Draft>, rng: &mut ChaCha8Rng| -> Option<(usize, usize, usize)> {
            let all: Vec<(usize, usize, usize)> = drafts
                .iter()
                .enumerate()
                .flat_map(|(t, d)| string_roles.iter().flat_map(move |&r| (0..d.roles[r].len()).map(move |i| (t, r, i))))
                .collect();
            all.choose(rng).copied()
        };
        match rng.gen_range(0..13) {
            0 => {
                if let Some((t, r, i)) = pick_filler(&drafts, rng) {
                    drafts[t].roles[r].remove(i);
                }
            }
            1 => {
                if let Some((t, r, i)) = pick_filler(&drafts, rng) {
                    let m = drafts[t].roles[r][i].clone();
                    let dup = gold_mentions
                        .iter()
                        .find(|(_, ms)| ms.contains(&m))
                        .and_then(|(_, ms)| ms.choose(rng).cloned())
                        .unwrap_or(m);
                    drafts[t].roles[r].push(dup);
                }
            }
            2 => {
                if let (Some((t, r, i)), Some(&r2)) = (pick_filler(&drafts, rng), string_roles.choose(rng)) {
                    let m = drafts[t].roles[r].remove(i);
                    drafts[t].roles[r2].push(m);
                }
            }
            3 => {
                if let (Some((t, r, i)), Some(&r2)) = (pick_filler(&drafts, rng), string_roles.choose(rng)) {
                    let m = drafts[t].roles[r][i].clone();
                    let a = rng.gen_range(0..n);
                    drafts[a].roles[r2].push(m);
                }
            }
            4 => {
                if let (Some(m), Some(&r), true) = (random_span(rng), string_roles.choose(rng), n > 0) {
                    let a = rng.gen_range(0..n);
                    drafts[a].roles[r].push(m);
                }
            }
            5 => {
                if let Some((t, r, i)) = pick_filler(&drafts, rng) {
                    if let Some(span) = drafts[t].roles[r][i].span {
                        let start = span.start.saturating_sub(rng.gen_range(0..=3)) + rng.gen_range(0..=2);
                        let end = (span.end + rng.gen_range(0..=3)).saturating_sub(rng.gen_range(0..=2)).min(chars.len());
                        if start < end {
                            let text: String = chars[start..end].iter().collect();
                            if !text.trim().is_empty() {
                                drafts[t].roles[r][i] = Mention::with_span(text, Span::new(start, end));
                            }
                        }
                    }
                }
            }
            6 => {
                if let (Some(&r), true) = (string_roles.choose(rng), n > 0) {
                    let a = rng.gen_range(0..n);
                    let text = format!("Xq{}", namer.word(rng).to_lowercase());
                    drafts[a].roles[r].push(Mention::new(text));
                }
            }
            7 => {
                if let (Some(&r), true) = (set_roles.choose(rng), n > 0) {
                    let a = rng.gen_range(0..n);
                    let values = &schema.roles[r].allowed_values;
                    drafts[a].roles[r] = match values.choose(rng) {
                        Some(v) if rng.gen_bool(0.8) => vec![Mention::new(v.clone())],
                        _ => Vec::new(),
                    };
                }
            }
            8 => {
                if n > 0 {
                    drafts.remove(rng.gen_range(0..n));
                }
            }
            9 => {
                let mut d = Draft {
                    roles: vec![Vec::new(); n_roles],
                };
                for _ in 0..rng.gen_range(1..=3) {
                    let Some(&r) = string_roles.choose(rng) else { break };
                    let m = if rng.gen_bool(0.5) {
                        gold_mentions.choose(rng).and_then(|(_, ms)| ms.choose(rng).cloned())
                    } else {
                        random_span(rng)
                    };
                    if let Some(m) = m {
                        d.roles[r].push(m);
                    }
                }
                drafts.push(d);
            }
            10 => {
                if n > 0 {
                    let d = drafts[rng.gen_range(0..n)].clone();
                    drafts.push(d);
                }
            }
            11 => {
                if n > 1 {
                    let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                    drafts.swap(a, b);
                }
            }
            _ => {
                if let Some((t, r, i)) = pick_filler(&drafts, rng) {
                    drafts[t].roles[r][i].span = None;
                }
            }
        }
    }

    let mut out = doc.clone();
    out.predicted_templates = drafts.iter().map(|d| d.to_template(schema)).collect();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_templates_gives_empty_gold() {
        let params = GenerationParams {
            documents: 3,
            templates_per_doc: 0,
            ..Default::default()
        };
        let docs = generate_corpus(&params, 1);
        assert_eq!(docs.len(), 3);
        assert!(docs.iter().all(|d| d.gold_templates.is_empty()));
    }

    #[test]
    fn generation_is_deterministic() {
        let params = GenerationParams::default();
        assert_eq!(generate_corpus(&params, 9), generate_corpus(&params, 9));
        assert_ne!(generate_corpus(&params, 9), generate_corpus(&params, 10));
    }

    #[test]
    fn spans_point_at_their_text() {
        let params = GenerationParams {
            documents: 2,
            templates_per_doc: 2,
            entities_per_role: 2,
            ..Default::default()
        };
        for d in generate_corpus(&params, 3) {
            for t in &d.gold_templates {
                for fill in t.roles.values() {
                    if let RoleFill::Entities(es) = fill {
                        for m in es.iter().flat_map(|e| &e.mentions) {
                            let span = m.span.expect("generated mentions have spans");
                            assert_eq!(substring(&d.text, span).as_deref(), Some(m.text.as_str()));
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn spec_json_uses_type_names() {
        let spec: InjectionSpec = serde_json::from_str(r#"{"SpanError": 2, "SpuriousTemplate": 1, "seed": 42}"#).unwrap();
        assert_eq!(spec.seed, 42);
        assert_eq!(spec.count(ErrorType::SpanError), 2);
        assert_eq!(spec.count(ErrorType::SpuriousTemplate), 1);
        assert!(serde_json::from_str::<InjectionSpec>(r#"{"Typo": 1}"#).is_err());
    }

    #[test]
    fn zero_spec_reproduces_gold() {
        let schema = synthetic_schema();
        let gold = generate_corpus(&GenerationParams::default(), 5);
        let (pred, ledger) = inject_errors(&gold, &schema, &InjectionSpec::new(0)).unwrap();
        assert_eq!(crate::taxonomy::total_errors(&ledger), 0);
        for (g, p) in gold.iter().zip(&pred) {
            assert_eq!(g.gold_templates.len(), p.predicted_templates.len());
        }
    }

    #[test]
    fn incorrect_role_needs_two_roles() {
        let schema = Schema::new(vec![RoleSpec::string_fill("victim", true)]).unwrap();
        let mut d = Document::new("d", "Ana, Bo");
        d.gold_templates.push(Template::new().with(
            "victim",
            RoleFill::Entities(vec![Entity::single(Mention::new("Ana")), Entity::single(Mention::new("Bo"))]),
        ));
        let spec = InjectionSpec::new(0).with(ErrorType::IncorrectRole, 1);
        match inject_errors(&[d], &schema, &spec) {
            Err(Error::InfeasibleSpec { error_type, .. }) => assert_eq!(error_type, ErrorType::IncorrectRole),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_role_filler_drops_one_entity() {
        let schema = synthetic_schema();
        let params = GenerationParams {
            documents: 1,
            templates_per_doc: 1,
            entities_per_role: 3,
            role_fill_probability: 1.0,
            ..Default::default()
        };
        let gold = generate_corpus(&params, 11);
        let spec = InjectionSpec::new(4).with(ErrorType::MissingRoleFiller, 1);
        let (pred, ledger) = inject_errors(&gold, &schema, &spec).unwrap();
        let count = |t: &Template| t.filler_count();
        assert_eq!(count(&pred[0].predicted_templates[0]) + 1, count(&gold[0].gold_templates[0]));
        assert_eq!(ledger.count(ErrorType::MissingRoleFiller), 1);
        assert_eq!(crate::taxonomy::total_errors(&ledger), 1);
    }

    #[test]
    fn perturbation_is_deterministic() {
        let schema = synthetic_schema();
        let gold = generate_corpus(&GenerationParams::default(), 2);
        assert_eq!(perturb_predictions(&gold, &schema, 1, 6), perturb_predictions(&gold, &schema, 1, 6));
    }
}
