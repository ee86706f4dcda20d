//! Acceptance suite. Each criterion prints one PASS/FAIL line; the run
//! fails if any criterion fails or runs past its time budget.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use common::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tfea_core::analysis::{analyze, analyze_document, AnalysisConfig};
use tfea_core::inject::{generate_corpus, inject_errors, perturb_predictions, synthetic_schema, GenerationParams, InjectionSpec};
use tfea_core::matcher::for_each_template_matching;
use tfea_core::span_metric::{scs_absolute, scs_geometric};
use tfea_core::transform::is_gold_equivalent;
use tfea_core::{
    apply_transformations, count_template_matchings, normalize, CaseMode, Document, ErrorType, ExactScore,
    PreparedDocument, Report, RoleFill, Schema, Span, Tally, Template,
};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn self_analysis() -> Outcome {
    let mut docs_seen = 0;
    for seed in 0..50 {
        let (schema, docs) = fuzzed_corpus(10_000 + seed);
        let docs: Vec<Document> = docs
            .into_iter()
            .map(|mut d| {
                d.predicted_templates = d.gold_templates.clone();
                d
            })
            .collect();
        docs_seen += docs.len();
        let out = analyze(&docs, &schema, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
        let overall: Tally = out.role_tallies.values().copied().sum();
        ensure(overall.f1::<ExactScore>() == ExactScore::from_integer(1), || format!("corpus {seed}: F1 {overall:?}"))?;
        for t in ErrorType::ALL {
            ensure(out.errors.count(t) == 0, || format!("corpus {seed}: {t} = {}", out.errors.count(t)))?;
        }
    }
    Ok(format!("50 corpora, {docs_seen} documents, F1 = 1, no errors"))
}

fn choose(n: u128, k: u128) -> u128 {
    (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
}

fn matching_count_formula() -> Outcome {
    for p in 0..=4usize {
        for g in 0..=4usize {
            let closed: u128 = (0..=p.min(g) as u128)
                .map(|k| choose(p as u128, k) * choose(g as u128, k) * (1..=k).product::<u128>())
                .sum();
            let mut enumerated = 0u128;
            for_each_template_matching(p, g, |_| enumerated += 1);
            let reported = count_template_matchings(p as u64, g as u64);
            ensure(enumerated == closed && reported == Some(closed), || {
                format!("P={p} G={g}: enumerated {enumerated}, closed form {closed}, reported {reported:?}")
            })?;
        }
    }
    Ok("25 cases".into())
}

/// Comparison keys of one role: one key list per filler.
fn role_keys(template: &Template, role: &str, predicted: bool) -> Vec<Vec<String>> {
    match template.roles.get(role) {
        None => Vec::new(),
        Some(RoleFill::Value(v)) => vec![vec![normalize(v)]],
        Some(RoleFill::Entities(es)) => es
            .iter()
            .map(|e| {
                let mentions = if predicted { &e.mentions[..1] } else { &e.mentions[..] };
                mentions.iter().map(|m| normalize(&m.text)).collect()
            })
            .collect(),
    }
}

/// Largest number of predicted fillers that can be injectively paired with
/// gold entities sharing a key, by trying every assignment.
fn brute_force_pairs(pred: &[Vec<String>], gold: &[Vec<String>], used: &mut Vec<bool>) -> u64 {
    let Some((first, rest)) = pred.split_first() else {
        return 0;
    };
    let mut best = brute_force_pairs(rest, gold, used);
    for (j, entity) in gold.iter().enumerate() {
        if !used[j] && entity.contains(&first[0]) {
            used[j] = true;
            best = best.max(1 + brute_force_pairs(rest, gold, used));
            used[j] = false;
        }
    }
    best
}

/// Best numerator over all partial injective maps of predicted templates
/// onto gold templates.
fn oracle_numerator(doc: &Document, schema: &Schema) -> u64 {
    let pair = |p: &Template, g: &Template| -> u64 {
        schema
            .roles
            .iter()
            .map(|r| {
                let gold = role_keys(g, &r.name, false);
                brute_force_pairs(&role_keys(p, &r.name, true), &gold, &mut vec![false; gold.len()])
            })
            .sum()
    };
    fn go(i: usize, used: &mut Vec<bool>, doc: &Document, pair: &dyn Fn(&Template, &Template) -> u64) -> u64 {
        if i == doc.predicted_templates.len() {
            return 0;
        }
        let mut best = go(i + 1, used, doc, pair);
        for j in 0..doc.gold_templates.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(pair(&doc.predicted_templates[i], &doc.gold_templates[j]) + go(i + 1, used, doc, pair));
                used[j] = false;
            }
        }
        best
    }
    go(0, &mut vec![false; doc.gold_templates.len()], doc, &pair)
}

fn fillers(templates: &[Template]) -> u64 {
    templates
        .iter()
        .flat_map(|t| t.roles.values())
        .map(|f| match f {
            RoleFill::Value(_) => 1,
            RoleFill::Entities(es) => es.len() as u64,
        })
        .sum()
}

fn oracle_f1(num: u64, p_den: u64, r_den: u64) -> ExactScore {
    let p = if p_den == 0 { ExactScore::from_integer(1) } else { ExactScore::new(num as i64, p_den as i64) };
    let r = if r_den == 0 { ExactScore::from_integer(1) } else { ExactScore::new(num as i64, r_den as i64) };
    if p + r == ExactScore::from_integer(0) {
        ExactScore::from_integer(0)
    } else {
        ExactScore::from_integer(2) * p * r / (p + r)
    }
}

fn small_enough(doc: &Document) -> bool {
    let small = |ts: &[Template]| {
        ts.len() <= 3
            && ts.iter().all(|t| {
                t.roles.values().all(|f| match f {
                    RoleFill::Value(_) => true,
                    RoleFill::Entities(es) => es.len() <= 3,
                })
            })
    };
    small(&doc.gold_templates) && small(&doc.predicted_templates)
}

fn matching_optimality() -> Outcome {
    let schema = synthetic_schema();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    let mut seed = 20_000u64;
    let mut nontrivial = 0;
    while checked < 200 {
        seed += 1;
        let params = GenerationParams {
            documents: 1,
            templates_per_doc: rng.gen_range(1..=3),
            entities_per_role: rng.gen_range(1..=3),
            mentions_per_entity: rng.gen_range(1..=2),
            words_per_mention: rng.gen_range(1..=2),
            role_fill_probability: rng.gen_range(0.3..0.9),
            shared_entity_probability: rng.gen_range(0.0..0.4),
        };
        let gold = generate_corpus(&params, seed);
        let doc = perturb_predictions(&gold, &schema, seed, rng.gen_range(0..=6)).remove(0);
        if !small_enough(&doc) {
            continue;
        }
        checked += 1;
        let a = analyze_document(&doc, &schema, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
        let t = a.matching.tally();
        let best = oracle_numerator(&doc, &schema);
        let (p_den, r_den) = (fillers(&doc.predicted_templates), fillers(&doc.gold_templates));
        if doc.predicted_templates.len() > 1 && doc.gold_templates.len() > 1 {
            nontrivial += 1;
        }
        ensure(t.f1::<ExactScore>() == oracle_f1(best, p_den, r_den), || {
            format!("seed {seed}: chosen {t:?}, oracle numerator {best} of ({p_den}, {r_den})")
        })?;
    }
    Ok(format!("200 documents ({nontrivial} with several templates on both sides)"))
}

fn scs_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let span = |rng: &mut ChaCha8Rng| {
        let start = rng.gen_range(0..200usize);
        Span::new(start, start + rng.gen_range(0..40usize))
    };
    let zero = ExactScore::from_integer(0);
    let one = ExactScore::from_integer(1);
    let mut disjoint = 0;
    for i in 0..10_000 {
        let (x, y) = (span(&mut rng), span(&mut rng));
        let g: ExactScore = scs_geometric(x, y);
        let a: ExactScore = scs_absolute(x, y);
        ensure(g == scs_geometric::<ExactScore>(y, x) && a == scs_absolute::<ExactScore>(y, x), || {
            format!("pair {i}: asymmetric on {x:?} {y:?}")
        })?;
        ensure((zero..=one).contains(&g) && (zero..=one).contains(&a), || format!("pair {i}: out of range"))?;
        ensure(scs_geometric::<ExactScore>(x, x) == zero || x.is_empty(), || format!("pair {i}: SCS(x, x) != 0"))?;
        ensure(scs_absolute::<ExactScore>(x, x) == zero || x.is_empty(), || format!("pair {i}: SCS(x, x) != 0"))?;
        if x.end <= y.start || y.end <= x.start {
            disjoint += 1;
            ensure(g == one, || format!("pair {i}: disjoint {x:?} {y:?} scores {g}"))?;
        }
    }
    Ok(format!("10000 pairs per mode, {disjoint} disjoint"))
}

fn scs_point_values() -> Outcome {
    let (x, y) = (Span::new(0, 10), Span::new(5, 15));
    let (lx, ly, overlap) = (10.0f64, 10.0f64, 5.0f64);
    let geometric_expected = 1.0 - overlap * overlap / (lx * ly);
    let absolute_expected = ((0.0f64 - 5.0).abs() + (10.0f64 - 15.0).abs()) / (lx + ly);
    let g: f64 = scs_geometric(x, y);
    let a: f64 = scs_absolute(x, y);
    ensure((g - geometric_expected).abs() <= 1e-12 && (g - 0.75).abs() <= 1e-12, || format!("geometric {g}"))?;
    ensure((a - absolute_expected).abs() <= 1e-12 && (a - 0.5).abs() <= 1e-12, || format!("absolute {a}"))?;
    Ok(format!("geometric {g}, absolute {a}"))
}

fn transformation_round_trip() -> Outcome {
    let mut docs_seen = 0;
    for seed in 0..200 {
        let (schema, docs) = fuzzed_corpus(30_000 + seed);
        for doc in &docs {
            docs_seen += 1;
            let a = analyze_document(doc, &schema, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
            let prepared = PreparedDocument::new(doc, &schema, CaseMode::Insensitive).map_err(|e| e.to_string())?;
            let replay = apply_transformations(&prepared, &a.log).map_err(|e| format!("corpus {seed}: {e}"))?;
            ensure(is_gold_equivalent(&replay, &prepared), || format!("corpus {seed} doc {}", doc.doc_id))?;
        }
    }
    Ok(format!("200 corpora, {docs_seen} documents"))
}

fn injection_round_trips() -> Outcome {
    let schema = synthetic_schema();
    let mut runs = 0;
    for t in ErrorType::ALL {
        for k in 1..=5 {
            for corpus in 0..20u64 {
                let seed = 40_000 + corpus * 1000 + k as u64 * 20 + t.index() as u64;
                let gold = generate_corpus(&injection_params(seed), seed);
                let spec = InjectionSpec::new(seed).with(t, k);
                let (docs, ledger) = inject_errors(&gold, &schema, &spec).map_err(|e| format!("{t} k={k}: {e}"))?;
                let out = analyze(&docs, &schema, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
                ensure(out.errors == ledger, || format!("{t} k={k} seed {seed}: profile differs from ledger"))?;
                ensure(ledger.count(t) == (k * gold.len()) as u64, || format!("{t} k={k}: ledger short"))?;
                runs += 1;
            }
        }
    }
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut spec = InjectionSpec::new(50_000 + seed);
        for t in ErrorType::ALL {
            if rng.gen_bool(0.5) {
                let max = if t == ErrorType::MissingTemplate { 1 } else { 2 };
                spec = spec.with(t, rng.gen_range(1..=max));
            }
        }
        let gold = generate_corpus(&injection_params(seed), 50_000 + seed);
        let (docs, ledger) = inject_errors(&gold, &schema, &spec).map_err(|e| format!("{spec:?}: {e}"))?;
        let out = analyze(&docs, &schema, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
        ensure(out.errors == ledger, || format!("mixed {spec:?}: profile differs from ledger"))?;
        runs += 1;
    }
    Ok(format!("{runs} injected corpora, profiles and side tallies equal the ledgers"))
}

fn partition_identities() -> Outcome {
    use ErrorType::*;
    let mut docs_seen = 0;
    for seed in 0..250 {
        let (schema, docs) = fuzzed_corpus(30_000 + seed);
        let out = analyze(&docs, &schema, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
        for d in &out.documents {
            docs_seen += 1;
            let e = &d.errors;
            let t = d.matching.tally();
            let pred_side: u64 = [
                SpanError,
                DuplicateRoleFiller,
                DuplicatePartiallyMatchedRoleFiller,
                IncorrectRole,
                IncorrectRolePartiallyMatchedFiller,
                WrongTemplateForRoleFiller,
                WrongTemplateForPartiallyMatchedRoleFiller,
                WrongTemplateWrongRole,
                WrongTemplateWrongRolePartiallyMatchedFiller,
                SpuriousRoleFiller,
            ]
            .iter()
            .map(|&k| e.count(k))
            .sum();
            let gold_side = e.count(SpanError)
                + e.count(IncorrectRole)
                + e.count(IncorrectRolePartiallyMatchedFiller)
                + e.count(MissingRoleFiller);
            ensure(t.p_den == t.num + pred_side + e.side_tallies.spurious_template_role_fillers, || {
                format!("corpus {seed} doc {}: prediction side", d.doc_id)
            })?;
            ensure(t.r_den == t.num + gold_side + e.side_tallies.missing_template_role_fillers, || {
                format!("corpus {seed} doc {}: gold side", d.doc_id)
            })?;
        }
    }
    Ok(format!("250 corpora, {docs_seen} documents"))
}

fn muc_fixture_counts() -> Outcome {
    let (schema, docs) = fixture_documents(&muc_fixture());
    let out = analyze(&docs, &schema, &AnalysisConfig::default()).map_err(|e| e.to_string())?;
    let expected = [
        (ErrorType::SpanError, 1),
        (ErrorType::DuplicateRoleFiller, 1),
        (ErrorType::IncorrectRole, 1),
        (ErrorType::MissingTemplate, 1),
    ];
    for t in ErrorType::ALL {
        let want = expected.iter().find(|(k, _)| *k == t).map_or(0, |(_, n)| *n);
        ensure(out.errors.count(t) == want, || format!("{t}: {} (expected {want})", out.errors.count(t)))?;
    }
    // 2 exact fillers (bombing, embassy) of 5 predicted and 8 gold.
    let overall: Tally = out.role_tallies.values().copied().sum();
    ensure(overall == Tally::new(2, 5, 8), || format!("{overall:?}"))?;
    let s = overall.score::<ExactScore>();
    ensure(
        s.precision == ExactScore::new(2, 5) && s.recall == ExactScore::new(1, 4) && s.f1 == ExactScore::new(4, 13),
        || format!("P {} R {} F1 {}", s.precision, s.recall, s.f1),
    )?;
    Ok(format!("P = {}, R = {}, F1 = {}", s.precision, s.recall, s.f1))
}

fn determinism() -> Outcome {
    let (schema, docs) = fuzzed_corpus(60_000);
    let mut docs = docs;
    for seed in 1..6 {
        docs.extend(fuzzed_corpus(60_000 + seed).1.into_iter().map(|mut d| {
            d.doc_id = format!("{}-{seed}", d.doc_id);
            d
        }));
    }
    let report = |threads| {
        let cfg = AnalysisConfig {
            threads: Some(threads),
            ..Default::default()
        };
        Report::from_analysis("sys", &analyze(&docs, &schema, &cfg).unwrap(), &cfg, &schema).to_json()
    };
    ensure(report(1) == report(8), || "library reports differ".into())?;

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let (gold, pred) = tfea_core::corpus::split(&docs);
    let gold_path = dir.path().join("gold.json");
    let pred_path = dir.path().join("pred.json");
    let schema_path = dir.path().join("schema.json");
    tfea_core::corpus::write_json(&gold_path, &gold).map_err(|e| e.to_string())?;
    tfea_core::corpus::write_json(&pred_path, &pred).map_err(|e| e.to_string())?;
    tfea_core::corpus::write_json(&schema_path, &schema).map_err(|e| e.to_string())?;
    let run = |n: &str| {
        tfea_ok(&["analyze", "--gold", s(&gold_path), "--pred", s(&pred_path), "--schema", s(&schema_path), "--parallel", n])
            .stdout
    };
    let (one, eight) = (run("1"), run("8"));
    ensure(one == eight, || "binary reports differ".into())?;
    Ok(format!("{} documents, {} report bytes identical", docs.len(), one.len()))
}

fn main() {
    let criteria: [(&str, u64, fn() -> Outcome); 10] = [
        ("self-analysis", 10, self_analysis),
        ("matching-count formula", 1, matching_count_formula),
        ("matching optimality", 60, matching_optimality),
        ("SCS properties", 5, scs_properties),
        ("SCS point values", 1, scs_point_values),
        ("transformation round trip", 60, transformation_round_trip),
        ("error-injection round trips", 120, injection_round_trips),
        ("partition identities", 60, partition_identities),
        ("MUC-style fixture", 1, muc_fixture_counts),
        ("determinism", 60, determinism),
    ];
    let mut failed = Vec::new();
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let over = elapsed > Duration::from_secs(budget);
        let (status, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over the {budget} s budget")),
            (Err(e), _) => ("FAIL", e.clone()),
        };
        println!("{status} {name}: {detail} ({:.2} s of {budget} s)", elapsed.as_secs_f64());
        if status == "FAIL" {
            failed.push(name);
        }
    }
    if !failed.is_empty() {
        eprintln!("failed: {failed:?}");
        std::process::exit(1);
    }
}
