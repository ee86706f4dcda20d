#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tfea_core::inject::{generate_corpus, perturb_predictions, synthetic_schema, GenerationParams};
use tfea_core::{Document, Schema};

pub fn tfea(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfea"))
        .args(args)
        .env("TFEA_LOG", "error")
        .output()
        .expect("tfea binary runs")
}

pub fn tfea_ok(args: &[&str]) -> Output {
    let out = tfea(args);
    assert!(
        out.status.success(),
        "tfea {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn write_value(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `{"text", "start", "end"}` for the `nth` occurrence of `needle`.
pub fn mention(text: &str, needle: &str, nth: usize) -> Value {
    let start = text
        .match_indices(needle)
        .nth(nth)
        .unwrap_or_else(|| panic!("{needle:?} occurs fewer than {} times", nth + 1))
        .0;
    json!({"text": needle, "start": start, "end": start + needle.len()})
}

pub struct Fixture {
    pub schema: Value,
    pub gold: Value,
    pub pred: Value,
}

/// Two incidents in one message. The prediction finds only the bombing,
/// over-extends the perpetrator span, lists the embassy twice and files the
/// weapon under victim.
pub fn muc_fixture() -> Fixture {
    let text = "Guerrillas of the FMLN bombed the embassy in San Salvador with dynamite. \
                Police said the embassy was empty. \
                In a separate attack, gunmen killed the mayor with rifles.";
    let m = |needle: &str, nth: usize| mention(text, needle, nth);
    let schema = json!({"roles": [
        {"name": "incident_type", "kind": "set_fill", "values": ["attack", "bombing"]},
        {"name": "perp_ind", "kind": "string_fill", "multi": true},
        {"name": "target", "kind": "string_fill", "multi": true},
        {"name": "victim", "kind": "string_fill", "multi": true},
        {"name": "weapon", "kind": "string_fill", "multi": true}
    ]});
    let gold = json!({"muc-1": {"doctext": text, "templates": [
        {
            "incident_type": "bombing",
            "perp_ind": [[m("Guerrillas", 0)]],
            "target": [[m("embassy", 0), m("embassy", 1)]],
            "weapon": [[m("dynamite", 0)]]
        },
        {
            "incident_type": "attack",
            "perp_ind": [[m("gunmen", 0)]],
            "victim": [[m("mayor", 0)]],
            "weapon": [[m("rifles", 0)]]
        }
    ]}});
    let pred = json!({"muc-1": {"templates": [
        {
            "incident_type": "bombing",
            "perp_ind": [m("Guerrillas of the FMLN", 0)],
            "target": [m("embassy", 0), m("embassy", 1)],
            "victim": [m("dynamite", 0)]
        }
    ]}});
    Fixture { schema, gold, pred }
}

/// An outbreak report whose prediction misses the disease.
pub fn promed_fixture() -> Fixture {
    let text = "Kenya: poultry deaths in Nakuru county have been traced to Newcastle disease, \
                officials confirmed on Monday.";
    let m = |needle: &str| mention(text, needle, 0);
    let schema = json!({"roles": [
        {"name": "Status", "kind": "set_fill", "values": ["confirmed", "suspected"]},
        {"name": "Country", "kind": "string_fill", "multi": false},
        {"name": "Disease", "kind": "string_fill", "multi": false},
        {"name": "Victims", "kind": "string_fill", "multi": true}
    ]});
    let gold = json!({"promed-1": {"doctext": text, "templates": [{
        "Status": "confirmed",
        "Country": [[m("Kenya")]],
        "Disease": [[m("Newcastle")]],
        "Victims": [[m("poultry")]]
    }]}});
    let pred = json!({"promed-1": {"templates": [{
        "Status": "confirmed",
        "Country": [m("Kenya")],
        "Victims": [m("poultry")]
    }]}});
    Fixture { schema, gold, pred }
}

pub fn fixture_documents(f: &Fixture) -> (Schema, Vec<Document>) {
    let schema: Schema = serde_json::from_value(f.schema.clone()).unwrap();
    let gold = serde_json::from_value(f.gold.clone()).unwrap();
    let pred = serde_json::from_value(f.pred.clone()).unwrap();
    (schema, tfea_core::join(gold, pred))
}

/// A random synthetic corpus with randomly perturbed predictions.
pub fn fuzzed_corpus(seed: u64) -> (Schema, Vec<Document>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = GenerationParams {
        documents: rng.gen_range(1..=6),
        templates_per_doc: rng.gen_range(0..=3),
        entities_per_role: rng.gen_range(1..=3),
        mentions_per_entity: rng.gen_range(1..=3),
        words_per_mention: rng.gen_range(1..=3),
        role_fill_probability: rng.gen_range(0.2..0.9),
        shared_entity_probability: rng.gen_range(0.0..0.3),
    };
    let schema = synthetic_schema();
    let gold = generate_corpus(&params, seed);
    let docs = perturb_predictions(&gold, &schema, seed, rng.gen_range(0..=8));
    (schema, docs)
}

/// Corpus shape that leaves room for every injected error type.
pub fn injection_params(seed: u64) -> GenerationParams {
    GenerationParams {
        documents: 1 + (seed % 4) as usize,
        templates_per_doc: 6,
        entities_per_role: 3,
        mentions_per_entity: 2,
        words_per_mention: 2,
        role_fill_probability: 0.8,
        shared_entity_probability: 0.0,
    }
}
