//! Serializable analysis reports, cross-system comparison, and text/CSV
//! rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{AnalysisConfig, CorpusAnalysis, GuardPolicy, SkippedDocument};
use crate::error::{Error, Result};
use crate::model::Schema;
use crate::normalize::CaseMode;
use crate::scorer::Tally;
use crate::span_metric::ScsMode;
use crate::taxonomy::{total_errors, ErrorProfile, ErrorType};
use crate::transform::Transformation;

pub const TOOL_NAME: &str = "tfea";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        ToolInfo {
            name: TOOL_NAME.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// The settings a report was produced with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub scs_mode: ScsMode,
    pub case_sensitive: bool,
    pub max_template_matchings: u64,
    pub max_mention_pairings: u64,
    pub on_guard: GuardPolicy,
    pub scores_only: bool,
    pub schema: Schema,
}

impl ConfigEcho {
    pub fn new(cfg: &AnalysisConfig, schema: &Schema) -> Self {
        ConfigEcho {
            scs_mode: cfg.matching.scs_mode,
            case_sensitive: cfg.case == CaseMode::Sensitive,
            max_template_matchings: cfg.matching.max_template_matchings,
            max_mention_pairings: cfg.matching.max_mention_pairings,
            on_guard: cfg.on_guard,
            scores_only: cfg.scores_only,
            schema: schema.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub p: f64,
    pub r: f64,
    pub f1: f64,
    pub num: u64,
    pub p_den: u64,
    pub r_den: u64,
}

impl From<Tally> for ScoreRow {
    fn from(t: Tally) -> Self {
        ScoreRow {
            p: t.precision(),
            r: t.recall(),
            f1: t.f1(),
            num: t.num,
            p_den: t.p_den,
            r_den: t.r_den,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSection {
    pub overall: ScoreRow,
    pub per_role: BTreeMap<String, ScoreRow>,
    pub per_doc: BTreeMap<String, ScoreRow>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentSummary {
    pub doc_id: String,
    pub gold_templates: usize,
    pub predicted_templates: usize,
    /// `(pred, gold)` template index pairs.
    pub matched_pairs: Vec<(usize, usize)>,
    pub errors: u64,
    pub approximate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: ToolInfo,
    pub system: String,
    pub config: ConfigEcho,
    pub scores: ScoreSection,
    pub errors: ErrorProfile,
    pub transformations: BTreeMap<String, Vec<Transformation>>,
    pub documents: Vec<DocumentSummary>,
    pub skipped: Vec<SkippedDocument>,
}

impl Report {
    pub fn from_analysis(system: &str, analysis: &CorpusAnalysis, cfg: &AnalysisConfig, schema: &Schema) -> Self {
        let overall: Tally = analysis.role_tallies.values().copied().sum();
        Report {
            tool: ToolInfo::default(),
            system: system.to_string(),
            config: ConfigEcho::new(cfg, schema),
            scores: ScoreSection {
                overall: overall.into(),
                per_role: analysis.role_tallies.iter().map(|(r, t)| (r.clone(), (*t).into())).collect(),
                per_doc: analysis
                    .documents
                    .iter()
                    .map(|d| (d.doc_id.clone(), d.matching.tally().into()))
                    .collect(),
            },
            errors: analysis.errors.clone(),
            transformations: if cfg.scores_only {
                BTreeMap::new()
            } else {
                analysis
                    .documents
                    .iter()
                    .map(|d| (d.doc_id.clone(), d.log.transformations.clone()))
                    .collect()
            },
            documents: analysis
                .documents
                .iter()
                .map(|d| DocumentSummary {
                    doc_id: d.doc_id.clone(),
                    gold_templates: d.gold_templates,
                    predicted_templates: d.predicted_templates,
                    matched_pairs: d.matching.pairs.iter().map(|p| (p.pred, p.gold)).collect(),
                    errors: d.matching.errors,
                    approximate: d.matching.approximate,
                })
                .collect(),
            skipped: analysis.skipped.clone(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports always serialize");
        s.push('\n');
        s
    }

    pub fn from_json(json: &str, path: &Path) -> Result<Self> {
        serde_json::from_str(json).map_err(|e| Error::parse(path, &e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&json, path)
    }

    pub fn total_errors(&self) -> u64 {
        total_errors(&self.errors)
    }
}

/// Error counts and scores of several systems on the same corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub systems: Vec<String>,
    pub scores: Vec<ScoreRow>,
    pub errors: Vec<ErrorProfile>,
    /// Per-type count differences against the first system.
    pub deltas: Vec<BTreeMap<ErrorType, i64>>,
}

impl Comparison {
    pub fn new(systems: Vec<String>, scores: Vec<ScoreRow>, errors: Vec<ErrorProfile>) -> Self {
        let deltas = errors
            .iter()
            .map(|e| {
                ErrorType::ALL
                    .iter()
                    .map(|&t| (t, e.count(t) as i64 - errors[0].count(t) as i64))
                    .collect()
            })
            .collect();
        Comparison {
            systems,
            scores,
            errors,
            deltas,
        }
    }
}

/// Fails unless all reports cover the same documents with the same schema
/// and matching settings.
pub fn compare(reports: &[Report]) -> Result<Comparison> {
    let Some(first) = reports.first() else {
        return Err(Error::IncompatibleReports("no reports given".into()));
    };
    let docs = |r: &Report| -> Vec<String> {
        let mut ids: Vec<String> = r
            .documents
            .iter()
            .map(|d| d.doc_id.clone())
            .chain(r.skipped.iter().map(|s| s.doc_id.clone()))
            .collect();
        ids.sort();
        ids
    };
    let first_docs = docs(first);
    for r in &reports[1..] {
        if r.config.schema != first.config.schema {
            return Err(Error::IncompatibleReports(format!(
                "{} and {} use different schemas",
                first.system, r.system
            )));
        }
        if r.config.scs_mode != first.config.scs_mode || r.config.case_sensitive != first.config.case_sensitive {
            return Err(Error::IncompatibleReports(format!(
                "{} and {} were produced with different matching settings",
                first.system, r.system
            )));
        }
        if docs(r) != first_docs {
            return Err(Error::IncompatibleReports(format!(
                "{} and {} cover different documents",
                first.system, r.system
            )));
        }
    }
    Ok(Comparison::new(
        reports.iter().map(|r| r.system.clone()).collect(),
        reports.iter().map(|r| r.scores.overall).collect(),
        reports.iter().map(|r| r.errors.clone()).collect(),
    ))
}

fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

/// Fixed-width table: one row per error type, one column per system, with
/// totals and scores at the bottom.
pub fn render_comparison_text(c: &Comparison) -> String {
    let label_w = ErrorType::ALL.iter().map(|t| t.label().len()).max().unwrap_or(0).max(24);
    let col_w = c.systems.iter().map(|s| s.len()).max().unwrap_or(0).max(10);
    let mut out = String::new();
    let _ = write!(out, "{:<label_w$}", "Error type");
    for s in &c.systems {
        let _ = write!(out, "  {s:>col_w$}");
    }
    out.push('\n');
    let _ = writeln!(out, "{}", "-".repeat(label_w + c.systems.len() * (col_w + 2)));
    let row = |out: &mut String, label: &str, cells: Vec<String>| {
        let _ = write!(out, "{label:<label_w$}");
        for cell in cells {
            let _ = write!(out, "  {cell:>col_w$}");
        }
        out.push('\n');
    };
    for t in ErrorType::ALL {
        row(&mut out, t.label(), c.errors.iter().map(|e| e.count(t).to_string()).collect());
    }
    row(&mut out, "Total errors", c.errors.iter().map(|e| total_errors(e).to_string()).collect());
    row(
        &mut out,
        "Spurious template fillers",
        c.errors.iter().map(|e| e.side_tallies.spurious_template_role_fillers.to_string()).collect(),
    );
    row(
        &mut out,
        "Missing template fillers",
        c.errors.iter().map(|e| e.side_tallies.missing_template_role_fillers.to_string()).collect(),
    );
    row(&mut out, "Precision", c.scores.iter().map(|s| pct(s.p)).collect());
    row(&mut out, "Recall", c.scores.iter().map(|s| pct(s.r)).collect());
    row(&mut out, "F1", c.scores.iter().map(|s| pct(s.f1)).collect());
    if c.systems.len() > 1 {
        let _ = writeln!(out, "\nChange against {}", c.systems[0]);
        for t in ErrorType::ALL {
            row(&mut out, t.label(), c.deltas.iter().map(|d| format!("{:+}", d[&t])).collect());
        }
    }
    out
}

pub fn render_comparison_csv(c: &Comparison) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["metric".to_string()];
    header.extend(c.systems.iter().cloned());
    let mut rows: Vec<Vec<String>> = vec![header];
    for t in ErrorType::ALL {
        let mut r = vec![t.name().to_string()];
        r.extend(c.errors.iter().map(|e| e.count(t).to_string()));
        rows.push(r);
    }
    let mut total = vec!["total_errors".to_string()];
    total.extend(c.errors.iter().map(|e| total_errors(e).to_string()));
    rows.push(total);
    for t in ErrorType::ALL {
        let mut r = vec![format!("delta_{}", t.name())];
        r.extend(c.deltas.iter().map(|d| d[&t].to_string()));
        rows.push(r);
    }
    for (name, get) in [
        ("precision", (|s: &ScoreRow| s.p) as fn(&ScoreRow) -> f64),
        ("recall", |s| s.r),
        ("f1", |s| s.f1),
    ] {
        let mut r = vec![name.to_string()];
        r.extend(c.scores.iter().map(|s| get(s).to_string()));
        rows.push(r);
    }
    for r in rows {
        w.write_record(&r).map_err(csv_error)?;
    }
    finish_csv(w)
}

/// Text rendering of a single report: scores per role, then error counts.
pub fn render_report_text(r: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "System: {}", r.system);
    let role_w = r.scores.per_role.keys().map(String::len).max().unwrap_or(0).max(8);
    let _ = writeln!(
        out,
        "{:<role_w$}  {:>8}  {:>8}  {:>8}  {:>6}  {:>6}  {:>6}",
        "Role", "P", "R", "F1", "num", "p_den", "r_den"
    );
    let mut line = |name: &str, s: &ScoreRow| {
        let _ = writeln!(
            out,
            "{name:<role_w$}  {:>8}  {:>8}  {:>8}  {:>6}  {:>6}  {:>6}",
            pct(s.p),
            pct(s.r),
            pct(s.f1),
            s.num,
            s.p_den,
            s.r_den
        );
    };
    for (role, s) in &r.scores.per_role {
        line(role, s);
    }
    line("overall", &r.scores.overall);
    if !r.config.scores_only {
        out.push('\n');
        let c = Comparison::new(vec![r.system.clone()], vec![r.scores.overall], vec![r.errors.clone()]);
        out.push_str(&render_comparison_text(&c));
    }
    if !r.skipped.is_empty() {
        let _ = writeln!(out, "\nSkipped documents:");
        for s in &r.skipped {
            let _ = writeln!(out, "  {}: {}", s.doc_id, s.reason);
        }
    }
    out
}

/// CSV rendering of a single report: one row per role plus an overall row,
/// with scores and per-type error counts.
pub fn render_report_csv(r: &Report) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["role", "p", "r", "f1", "num", "p_den", "r_den"].map(String::from).to_vec();
    header.extend(ErrorType::ALL.iter().map(|t| t.name().to_string()));
    w.write_record(&header).map_err(csv_error)?;
    let mut emit = |name: &str, s: &ScoreRow, counts: Vec<u64>| -> Result<()> {
        let mut rec = vec![
            name.to_string(),
            s.p.to_string(),
            s.r.to_string(),
            s.f1.to_string(),
            s.num.to_string(),
            s.p_den.to_string(),
            s.r_den.to_string(),
        ];
        rec.extend(counts.iter().map(u64::to_string));
        w.write_record(&rec).map_err(csv_error)
    };
    for (role, s) in &r.scores.per_role {
        let counts = ErrorType::ALL.iter().map(|&t| r.errors.role_count(role, t)).collect();
        emit(role, s, counts)?;
    }
    let counts = ErrorType::ALL.iter().map(|&t| r.errors.count(t)).collect();
    emit("overall", &r.scores.overall, counts)?;
    finish_csv(w)
}

fn csv_error(e: csv::Error) -> Error {
    Error::io("<csv>", std::io::Error::other(e))
}

fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::io("<csv>", std::io::Error::other(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
