//! Transformation-based error analysis for document-level template filling.
//!
//! Predicted templates are matched to gold templates, the differences are
//! explained as a sequence of edits, and each group of edits on one filler is
//! mapped to an error type. Exact-match precision, recall and F1 come out of
//! the same matching.
//!
//! Numeric code is generic over [`Scalar`]; [`Score`] and [`ExactScore`] are
//! the two instantiations used throughout.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod inject;
pub mod matcher;
pub mod model;
pub mod normalize;
pub mod prepared;
pub mod report;
pub mod scalar;
pub mod scorer;
pub mod span_metric;
pub mod taxonomy;
pub mod transform;

/// Floating-point scores as reported.
pub type Score = f64;
/// Exact rational scores, used wherever values are compared.
pub type ExactScore = num_rational::Rational64;
pub type ScoreTripleF64 = scorer::ScoreTriple<Score>;
pub type ExactScoreTriple = scorer::ScoreTriple<ExactScore>;

pub use analysis::{analyze, analyze_document, AnalysisConfig, DocumentAnalysis, GuardPolicy};
pub use corpus::{join, load_corpus, load_schema};
pub use error::{Error, Result};
pub use matcher::{count_template_matchings, find_optimal_matching, greedy_matching, MatchConfig, TemplateMatching};
pub use model::{Document, Entity, Mention, RoleFill, RoleKind, RoleSpec, Schema, Span, Template};
pub use normalize::{normalize, CaseMode};
pub use prepared::PreparedDocument;
pub use report::Report;
pub use scalar::Scalar;
pub use scorer::{ScoreTriple, Scores, Tally};
pub use span_metric::ScsMode;
pub use taxonomy::{map_errors, total_errors, ErrorProfile, ErrorType};
pub use transform::{apply_transformations, derive_transformations, Transformation, TransformationKind, TransformationLog};
