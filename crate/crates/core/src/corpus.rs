//! JSON corpus and schema files.
//!
//! One corpus file holds one side (gold or predicted):
//!
//! ```json
//! { "<doc_id>": { "doctext": "...", "templates": [ { "<role>": <filler>, ... } ] } }
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Document, Schema, Template};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocEntry {
    #[serde(default)]
    pub doctext: String,
    #[serde(default)]
    pub templates: Vec<Template>,
}

/// One side of a corpus, keyed by document id.
pub type CorpusFile = BTreeMap<String, DocEntry>;

pub fn parse_corpus(json: &str, path: &Path) -> Result<CorpusFile> {
    serde_json::from_str(json).map_err(|e| Error::parse(path, &e))
}

pub fn load_corpus(path: &Path) -> Result<CorpusFile> {
    let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&json, path)
}

pub fn parse_schema(json: &str, path: &Path) -> Result<Schema> {
    let schema: Schema = serde_json::from_str(json).map_err(|e| Error::parse(path, &e))?;
    schema.validate()?;
    Ok(schema)
}

pub fn load_schema(path: &Path) -> Result<Schema> {
    let json = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_schema(&json, path)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut json = serde_json::to_string_pretty(value).expect("serializable value");
    json.push('\n');
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Joins gold and predicted sides into documents ordered by id. Gold
/// documents without predictions get an empty prediction list; predicted
/// documents unknown to gold are dropped with a warning.
pub fn join(gold: CorpusFile, mut pred: CorpusFile) -> Vec<Document> {
    let mut docs = Vec::with_capacity(gold.len());
    for (doc_id, entry) in gold {
        let predicted_templates = match pred.remove(&doc_id) {
            Some(p) => {
                if !p.doctext.is_empty() && p.doctext != entry.doctext {
                    log::warn!("document {doc_id}: predicted doctext differs from gold; using gold text");
                }
                p.templates
            }
            None => Vec::new(),
        };
        docs.push(Document {
            doc_id,
            text: entry.doctext,
            gold_templates: entry.templates,
            predicted_templates,
        });
    }
    for doc_id in pred.keys() {
        log::warn!("document {doc_id} appears only in predictions; ignored");
    }
    docs
}

/// Inverse of [`join`].
pub fn split(docs: &[Document]) -> (CorpusFile, CorpusFile) {
    let mut gold = CorpusFile::new();
    let mut pred = CorpusFile::new();
    for doc in docs {
        gold.insert(
            doc.doc_id.clone(),
            DocEntry {
                doctext: doc.text.clone(),
                templates: doc.gold_templates.clone(),
            },
        );
        pred.insert(
            doc.doc_id.clone(),
            DocEntry {
                doctext: doc.text.clone(),
                templates: doc.predicted_templates.clone(),
            },
        );
    }
    (gold, pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Entity, Mention, RoleFill, Span};

    const GOLD: &str = r#"{
      "doc1": {"doctext": "Newcastle disease hit a farm in Lima.",
               "templates": [{"Status": "confirmed",
                              "Disease": [[{"text": "Newcastle disease", "start": 0, "end": 17}]],
                              "Country": []}]},
      "doc2": {"doctext": "Nothing happened.", "templates": []}
    }"#;

    const PRED: &str = r#"{
      "doc1": {"doctext": "Newcastle disease hit a farm in Lima.",
               "templates": [{"Disease": [{"text": "Newcastle"}, {"text": "Newcastle"}]}]},
      "doc9": {"doctext": "stray", "templates": []}
    }"#;

    #[test]
    fn join_and_split() {
        let gold = parse_corpus(GOLD, Path::new("gold.json")).unwrap();
        let pred = parse_corpus(PRED, Path::new("pred.json")).unwrap();
        let docs = join(gold.clone(), pred);
        assert_eq!(docs.len(), 2);
        assert_eq!(docs[0].doc_id, "doc1");
        assert_eq!(docs[1].predicted_templates.len(), 0);
        // duplicates are preserved
        match docs[0].predicted_templates[0].get("Disease").unwrap() {
            RoleFill::Entities(es) => assert_eq!(es.len(), 2),
            other => panic!("{other:?}"),
        }
        let (gold_again, _) = split(&docs);
        assert_eq!(gold_again, gold);
    }

    #[test]
    fn round_trip_through_json() {
        let gold = parse_corpus(GOLD, Path::new("gold.json")).unwrap();
        let json = serde_json::to_string(&gold).unwrap();
        let again = parse_corpus(&json, Path::new("again.json")).unwrap();
        assert_eq!(gold, again);
        let disease = &again["doc1"].templates[0].roles["Disease"];
        assert_eq!(
            disease,
            &RoleFill::Entities(vec![Entity::single(Mention::with_span(
                "Newcastle disease",
                Span::new(0, 17)
            ))])
        );
    }

    #[test]
    fn parse_error_carries_location() {
        let err = parse_corpus("{\n  \"d\": {\"doctext\": 3}\n}", Path::new("bad.json")).unwrap_err();
        match err {
            Error::Parse { line, path, .. } => {
                assert_eq!(line, 2);
                assert_eq!(path, Path::new("bad.json"));
            }
            other => panic!("{other:?}"),
        }
    }
}
