//! Per-document and corpus-level analysis driver.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcher::{find_optimal_matching, greedy_matching, MatchConfig, TemplateMatching};
use crate::model::{Document, Schema};
use crate::normalize::CaseMode;
use crate::prepared::PreparedDocument;
use crate::scorer::{sum_role_tallies, RoleTallies};
use crate::taxonomy::{map_errors, ErrorProfile};
use crate::transform::{derive_transformations, TransformationLog};

/// What to do with a document whose search space exceeds a guard.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuardPolicy {
    /// Leave the document out and list it as skipped.
    #[default]
    Skip,
    /// Fall back to the greedy matcher and flag the result as approximate.
    Greedy,
    /// Abort the whole run.
    Fail,
}

impl GuardPolicy {
    pub fn as_str(self) -> &'static str {
        match self {
            GuardPolicy::Skip => "skip",
            GuardPolicy::Greedy => "greedy",
            GuardPolicy::Fail => "fail",
        }
    }
}

impl fmt::Display for GuardPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GuardPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "skip" => Ok(GuardPolicy::Skip),
            "greedy" => Ok(GuardPolicy::Greedy),
            "fail" => Ok(GuardPolicy::Fail),
            other => Err(format!("unknown guard policy {other:?} (expected skip, greedy or fail)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AnalysisConfig {
    pub matching: MatchConfig,
    pub case: CaseMode,
    pub on_guard: GuardPolicy,
    /// Skip transformation derivation and error mapping.
    pub scores_only: bool,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentAnalysis {
    pub doc_id: String,
    pub gold_templates: usize,
    pub predicted_templates: usize,
    pub matching: TemplateMatching,
    pub log: TransformationLog,
    pub errors: ErrorProfile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkippedDocument {
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusAnalysis {
    /// In input order.
    pub documents: Vec<DocumentAnalysis>,
    pub skipped: Vec<SkippedDocument>,
    pub role_tallies: RoleTallies,
    pub errors: ErrorProfile,
}

/// Analyzes one document. A guard failure is returned as an error unless the
/// policy is [`GuardPolicy::Greedy`].
pub fn analyze_document(doc: &Document, schema: &Schema, cfg: &AnalysisConfig) -> Result<DocumentAnalysis> {
    let prepared = PreparedDocument::new(doc, schema, cfg.case)?;
    let matching = match find_optimal_matching(&prepared, &cfg.matching) {
        Ok(m) => m,
        Err(Error::ComplexityGuardExceeded { what, count, cap, .. }) if cfg.on_guard == GuardPolicy::Greedy => {
            log::warn!("document {}: {what} ({count}) exceed {cap}; using the greedy matcher", doc.doc_id);
            greedy_matching(&prepared, &cfg.matching)
        }
        Err(e) => return Err(e),
    };
    let (log, errors) = if cfg.scores_only {
        let mut errors = ErrorProfile::new();
        errors.touch_doc(&doc.doc_id);
        (
            TransformationLog {
                doc_id: doc.doc_id.clone(),
                transformations: Vec::new(),
            },
            errors,
        )
    } else {
        let log = derive_transformations(&prepared, &matching, cfg.matching.scs_mode);
        let errors = map_errors(&log)?;
        (log, errors)
    };
    Ok(DocumentAnalysis {
        doc_id: doc.doc_id.clone(),
        gold_templates: doc.gold_templates.len(),
        predicted_templates: doc.predicted_templates.len(),
        matching,
        log,
        errors,
    })
}

/// Analyzes a corpus. Documents are processed in parallel but results are
/// always assembled in input order, so the output does not depend on the
/// number of threads.
pub fn analyze(docs: &[Document], schema: &Schema, cfg: &AnalysisConfig) -> Result<CorpusAnalysis> {
    let run = || -> Vec<Result<DocumentAnalysis>> {
        docs.par_iter().map(|d| analyze_document(d, schema, cfg)).collect()
    };
    let results = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::InvalidSchema(format!("cannot start worker pool: {e}")))?
            .install(run),
        None => run(),
    };

    let mut documents = Vec::with_capacity(docs.len());
    let mut skipped = Vec::new();
    for (doc, result) in docs.iter().zip(results) {
        match result {
            Ok(a) => documents.push(a),
            Err(e @ Error::ComplexityGuardExceeded { .. }) if cfg.on_guard == GuardPolicy::Skip => {
                log::warn!("skipping document {}: {e}", doc.doc_id);
                skipped.push(SkippedDocument {
                    doc_id: doc.doc_id.clone(),
                    reason: e.to_string(),
                });
            }
            Err(e) => return Err(e),
        }
    }

    let mut role_tallies = sum_role_tallies(documents.iter().map(|d| &d.matching.role_tallies));
    for name in schema.role_names() {
        role_tallies.entry(name.to_string()).or_default();
    }
    let mut errors = ErrorProfile::new();
    errors.ensure_roles(schema.role_names());
    for d in &documents {
        errors.merge(&d.errors);
    }
    Ok(CorpusAnalysis {
        documents,
        skipped,
        role_tallies,
        errors,
    })
}
