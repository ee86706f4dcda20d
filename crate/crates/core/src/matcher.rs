//! Optimal matching of predicted to gold templates, and of fillers inside a
//! matched template pair.
//!
//! The score of a template matching is the number of exactly matched
//! fillers. Denominators do not depend on the matching, so the matching
//! with the highest numerator also has the highest F1. Among matchings with
//! the best score we take the one needing the fewest errors to explain, then
//! the lexicographically smallest list of `(pred, gold)` pairs.
//!
//! Inside a template pair, fillers are paired per role. A pairing may use an
//! exact pair (same text after normalization) or a partial pair (overlapping
//! spans, SCS < 1); only pairings with the maximal number of exact pairs are
//! candidates, and the errors then decide among them.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prepared::{PreparedDocument, Relation};
use crate::scorer::{RoleTallies, Tally};
use crate::span_metric::ScsMode;
use crate::transform::derive_pair;
use crate::ExactScore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchConfig {
    pub scs_mode: ScsMode,
    pub max_template_matchings: u64,
    pub max_mention_pairings: u64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            scs_mode: ScsMode::default(),
            max_template_matchings: 1_000_000,
            max_mention_pairings: 100_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionPair {
    pub pred: usize,
    pub gold: usize,
    pub exact: bool,
}

/// Pairing of the predicted fillers and gold entities of one role.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MentionPairing {
    pub pairs: Vec<MentionPair>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_gold: Vec<usize>,
}

impl MentionPairing {
    pub fn exact_count(&self) -> usize {
        self.pairs.iter().filter(|p| p.exact).count()
    }

    fn from_pairs(pairs: Vec<MentionPair>, n_pred: usize, n_gold: usize) -> Self {
        let mut pairs = pairs;
        pairs.sort_by_key(|p| p.pred);
        let unmatched_pred = (0..n_pred).filter(|i| !pairs.iter().any(|p| p.pred == *i)).collect();
        let unmatched_gold = (0..n_gold).filter(|j| !pairs.iter().any(|p| p.gold == *j)).collect();
        MentionPairing {
            pairs,
            unmatched_pred,
            unmatched_gold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplatePair {
    pub pred: usize,
    pub gold: usize,
    /// One pairing per schema role, in schema order.
    pub roles: Vec<MentionPairing>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateMatching {
    /// Sorted by predicted template index.
    pub pairs: Vec<TemplatePair>,
    pub spurious_templates: Vec<usize>,
    pub missing_templates: Vec<usize>,
    pub role_tallies: RoleTallies,
    /// Errors needed to explain the matching.
    pub errors: u64,
    /// Set when a greedy fallback produced the matching.
    pub approximate: bool,
}

impl TemplateMatching {
    pub fn tally(&self) -> Tally {
        self.role_tallies.values().copied().sum()
    }

    pub fn numerator(&self) -> u64 {
        self.tally().num
    }
}

/// Number of partial injective matchings between `p` and `g` items:
/// `sum_{i=0}^{min(p,g)} C(p,i) * g!/(g-i)!`. `None` on u128 overflow.
pub fn count_template_matchings(p: u64, g: u64) -> Option<u128> {
    let mut total: u128 = 0;
    for i in 0..=p.min(g) {
        let mut term: u128 = binomial(p, i)?;
        for k in 0..i {
            term = term.checked_mul((g - k) as u128)?;
        }
        total = total.checked_add(term)?;
    }
    Some(total)
}

fn binomial(n: u64, k: u64) -> Option<u128> {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // exact at every step: acc * (n-i) is divisible by (i+1)
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// Calls `f` with every partial injective matching of `0..p` into `0..g`,
/// as pairs sorted by the first index.
pub fn for_each_template_matching(p: usize, g: usize, mut f: impl FnMut(&[(usize, usize)])) {
    fn rec(i: usize, p: usize, used: &mut [bool], cur: &mut Vec<(usize, usize)>, f: &mut dyn FnMut(&[(usize, usize)])) {
        if i == p {
            f(cur);
            return;
        }
        rec(i + 1, p, used, cur, f);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                cur.push((i, j));
                rec(i + 1, p, used, cur, f);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut used = vec![false; g];
    rec(0, p, &mut used, &mut Vec::new(), &mut f);
}

/// Size of a maximum matching in a bipartite graph given by adjacency lists.
pub(crate) fn max_bipartite(adj: &[Vec<usize>], n_right: usize) -> usize {
    fn augment(i: usize, adj: &[Vec<usize>], seen: &mut [bool], owner: &mut [Option<usize>]) -> bool {
        for &j in &adj[i] {
            if !seen[j] {
                seen[j] = true;
                if owner[j].is_none_or(|k| augment(k, adj, seen, owner)) {
                    owner[j] = Some(i);
                    return true;
                }
            }
        }
        false
    }
    let mut owner = vec![None; n_right];
    (0..adj.len())
        .filter(|&i| augment(i, adj, &mut vec![false; n_right], &mut owner))
        .count()
}

/// Eligible edges of one role: `edges[i][j]` is `Some(exact)` when predicted
/// filler `i` and gold entity `j` may be paired.
fn role_edges(doc: &PreparedDocument<'_>, mode: ScsMode, p: usize, g: usize, r: usize) -> Vec<Vec<Option<bool>>> {
    let n = doc.pred[p].roles[r].len();
    let m = doc.gold[g].roles[r].len();
    (0..n)
        .map(|i| {
            (0..m)
                .map(|j| match doc.relation(mode, (p, r, i), (g, r, j)) {
                    Relation::Exact { .. } => Some(true),
                    Relation::Partial { .. } => Some(false),
                    Relation::Unrelated => None,
                })
                .collect()
        })
        .collect()
}

fn exact_adjacency(edges: &[Vec<Option<bool>>]) -> Vec<Vec<usize>> {
    edges
        .iter()
        .map(|row| row.iter().enumerate().filter(|(_, e)| **e == Some(true)).map(|(j, _)| j).collect())
        .collect()
}

/// Most exact pairs achievable in role `r` of pair `(p, g)`.
fn role_score(doc: &PreparedDocument<'_>, mode: ScsMode, p: usize, g: usize, r: usize) -> usize {
    let n_gold = doc.gold[g].roles[r].len();
    let adj: Vec<Vec<usize>> = (0..doc.pred[p].roles[r].len())
        .map(|i| (0..n_gold).filter(|&j| doc.relation(mode, (p, r, i), (g, r, j)).is_exact()).collect())
        .collect();
    max_bipartite(&adj, n_gold)
}

pub fn pair_score(doc: &PreparedDocument<'_>, mode: ScsMode, p: usize, g: usize) -> u64 {
    (0..doc.schema.roles.len()).map(|r| role_score(doc, mode, p, g, r) as u64).sum()
}

/// All pairings of role `r` in pair `(p, g)` with the maximal number of
/// exact pairs, where every pair is exact or partial. Fails when more than
/// `cap` pairings qualify.
pub fn enumerate_mention_matchings(
    doc: &PreparedDocument<'_>,
    mode: ScsMode,
    p: usize,
    g: usize,
    r: usize,
    cap: u64,
) -> Result<Vec<MentionPairing>> {
    let edges = role_edges(doc, mode, p, g, r);
    let m = doc.gold[g].roles[r].len();
    let target = max_bipartite(&exact_adjacency(&edges), m);
    let mut out = Vec::new();
    let mut search = PairingSearch {
        edges: &edges,
        m,
        target,
        cap,
        out: &mut out,
        exceeded: false,
    };
    search.rec(0, &mut vec![false; m], &mut Vec::new(), 0);
    if search.exceeded {
        return Err(Error::ComplexityGuardExceeded {
            doc_id: doc.doc_id.clone(),
            what: "mention pairings",
            count: format!("more than {cap}"),
            cap,
        });
    }
    Ok(out)
}

struct PairingSearch<'a> {
    edges: &'a [Vec<Option<bool>>],
    m: usize,
    target: usize,
    cap: u64,
    out: &'a mut Vec<MentionPairing>,
    exceeded: bool,
}

impl PairingSearch<'_> {
    fn rec(&mut self, i: usize, used: &mut [bool], cur: &mut Vec<MentionPair>, exact: usize) {
        if self.exceeded {
            return;
        }
        let n = self.edges.len();
        let reachable = (i..n).filter(|&k| self.edges[k].contains(&Some(true))).count();
        if exact + reachable < self.target {
            return;
        }
        if i == n {
            if self.out.len() as u64 >= self.cap {
                self.exceeded = true;
                return;
            }
            self.out.push(MentionPairing::from_pairs(cur.clone(), n, self.m));
            return;
        }
        for j in 0..self.m {
            if let Some(is_exact) = self.edges[i][j] {
                if !used[j] {
                    used[j] = true;
                    cur.push(MentionPair {
                        pred: i,
                        gold: j,
                        exact: is_exact,
                    });
                    self.rec(i + 1, used, cur, exact + is_exact as usize);
                    cur.pop();
                    used[j] = false;
                }
            }
        }
        self.rec(i + 1, used, cur, exact);
    }
}

/// Greedy pairing: exact pairs first in filler order, then partial pairs by
/// ascending SCS.
fn greedy_role_pairing(doc: &PreparedDocument<'_>, mode: ScsMode, p: usize, g: usize, r: usize) -> MentionPairing {
    let n = doc.pred[p].roles[r].len();
    let m = doc.gold[g].roles[r].len();
    let mut pred_used = vec![false; n];
    let mut gold_used = vec![false; m];
    let mut pairs = Vec::new();
    let mut partial: Vec<(ExactScore, usize, usize)> = Vec::new();
    for i in 0..n {
        for j in 0..m {
            match doc.relation(mode, (p, r, i), (g, r, j)) {
                Relation::Exact { .. } if !pred_used[i] && !gold_used[j] => {
                    pred_used[i] = true;
                    gold_used[j] = true;
                    pairs.push(MentionPair { pred: i, gold: j, exact: true });
                }
                Relation::Partial { score, .. } => partial.push((score, i, j)),
                _ => {}
            }
        }
    }
    partial.sort();
    for (_, i, j) in partial {
        if !pred_used[i] && !gold_used[j] {
            pred_used[i] = true;
            gold_used[j] = true;
            pairs.push(MentionPair { pred: i, gold: j, exact: false });
        }
    }
    MentionPairing::from_pairs(pairs, n, m)
}

fn pair_errors(doc: &PreparedDocument<'_>, mode: ScsMode, p: usize, g: usize, roles: &[MentionPairing]) -> u64 {
    derive_pair(doc, mode, p, g, roles).len() as u64
}

/// Whether some predicted filler of `p` is related to a gold entity of `g`
/// in a different string role. Without such a filler the roles of the pair
/// can be optimized one at a time.
fn roles_interact(doc: &PreparedDocument<'_>, mode: ScsMode, p: usize, g: usize) -> bool {
    let roles: Vec<usize> = doc.string_roles().collect();
    roles.iter().any(|&r| {
        (0..doc.pred[p].roles[r].len()).any(|i| {
            roles.iter().filter(|&&r2| r2 != r).any(|&r2| {
                (0..doc.gold[g].roles[r2].len()).any(|e| doc.relation(mode, (p, r, i), (g, r2, e)).is_related())
            })
        })
    })
}

#[derive(Debug, Clone)]
struct PairEval {
    roles: Vec<MentionPairing>,
    errors: u64,
    approximate: bool,
}

fn guard_error(doc: &PreparedDocument<'_>, what: &'static str, count: String, cap: u64) -> Error {
    Error::ComplexityGuardExceeded {
        doc_id: doc.doc_id.clone(),
        what,
        count,
        cap,
    }
}

/// Best role pairings for one template pair. With `greedy_fallback`, a pair
/// too large to search exhaustively is paired greedily instead of failing.
fn evaluate_pair(
    doc: &PreparedDocument<'_>,
    cfg: &MatchConfig,
    p: usize,
    g: usize,
    greedy_fallback: bool,
) -> Result<PairEval> {
    let mode = cfg.scs_mode;
    let n_roles = doc.schema.roles.len();
    let greedy = || {
        let roles: Vec<MentionPairing> = (0..n_roles).map(|r| greedy_role_pairing(doc, mode, p, g, r)).collect();
        let errors = pair_errors(doc, mode, p, g, &roles);
        PairEval {
            roles,
            errors,
            approximate: true,
        }
    };

    let mut candidates = Vec::with_capacity(n_roles);
    for r in 0..n_roles {
        match enumerate_mention_matchings(doc, mode, p, g, r, cfg.max_mention_pairings) {
            Ok(c) => candidates.push(c),
            Err(_) if greedy_fallback => return Ok(greedy()),
            Err(e) => return Err(e),
        }
    }

    let mut chosen: Vec<MentionPairing> = candidates.iter().map(|c| c[0].clone()).collect();
    if !roles_interact(doc, mode, p, g) {
        for r in 0..n_roles {
            if candidates[r].len() < 2 {
                continue;
            }
            let mut best = (u64::MAX, 0);
            for (k, c) in candidates[r].iter().enumerate() {
                chosen[r] = c.clone();
                let e = pair_errors(doc, mode, p, g, &chosen);
                if e < best.0 {
                    best = (e, k);
                }
            }
            chosen[r] = candidates[r][best.1].clone();
        }
        let errors = pair_errors(doc, mode, p, g, &chosen);
        return Ok(PairEval {
            roles: chosen,
            errors,
            approximate: false,
        });
    }

    let product = candidates
        .iter()
        .try_fold(1u64, |acc, c| acc.checked_mul(c.len() as u64))
        .filter(|&n| n <= cfg.max_mention_pairings);
    if product.is_none() {
        if greedy_fallback {
            return Ok(greedy());
        }
        let shown = candidates
            .iter()
            .try_fold(1u128, |acc, c| acc.checked_mul(c.len() as u128))
            .map_or_else(|| "overflow".to_string(), |n| n.to_string());
        return Err(guard_error(doc, "role pairing combinations", shown, cfg.max_mention_pairings));
    }
    let mut idx = vec![0usize; n_roles];
    let mut best: Option<(u64, Vec<usize>)> = None;
    loop {
        for r in 0..n_roles {
            chosen[r] = candidates[r][idx[r]].clone();
        }
        let e = pair_errors(doc, mode, p, g, &chosen);
        if best.as_ref().is_none_or(|(b, _)| e < *b) {
            best = Some((e, idx.clone()));
        }
        // mixed-radix increment, last role fastest
        let mut r = n_roles;
        loop {
            if r == 0 {
                let (errors, idx) = best.expect("at least one combination");
                let roles = (0..n_roles).map(|r| candidates[r][idx[r]].clone()).collect();
                return Ok(PairEval {
                    roles,
                    errors,
                    approximate: false,
                });
            }
            r -= 1;
            idx[r] += 1;
            if idx[r] < candidates[r].len() {
                break;
            }
            idx[r] = 0;
        }
    }
}

struct PairCache<'d, 's> {
    doc: &'d PreparedDocument<'s>,
    cfg: MatchConfig,
    greedy_fallback: bool,
    evals: HashMap<(usize, usize), PairEval>,
}

impl PairCache<'_, '_> {
    fn get(&mut self, p: usize, g: usize) -> Result<&PairEval> {
        if !self.evals.contains_key(&(p, g)) {
            let eval = evaluate_pair(self.doc, &self.cfg, p, g, self.greedy_fallback)?;
            self.evals.insert((p, g), eval);
        }
        Ok(&self.evals[&(p, g)])
    }

    #[cfg(test)]
    fn cost(&mut self, pairs: &[(usize, usize)]) -> Result<u64> {
        let mut cost = (self.doc.pred.len() - pairs.len() + self.doc.gold.len() - pairs.len()) as u64;
        for &(p, g) in pairs {
            cost += self.get(p, g)?.errors;
        }
        Ok(cost)
    }

    fn build(&mut self, pairs: &[(usize, usize)]) -> Result<TemplateMatching> {
        let mut out = Vec::with_capacity(pairs.len());
        let mut errors = 0;
        let mut approximate = false;
        for &(p, g) in pairs {
            let eval = self.get(p, g)?;
            errors += eval.errors;
            approximate |= eval.approximate;
            out.push(TemplatePair {
                pred: p,
                gold: g,
                roles: eval.roles.clone(),
            });
        }
        let spurious: Vec<usize> = (0..self.doc.pred.len()).filter(|p| !pairs.iter().any(|x| x.0 == *p)).collect();
        let missing: Vec<usize> = (0..self.doc.gold.len()).filter(|g| !pairs.iter().any(|x| x.1 == *g)).collect();
        errors += (spurious.len() + missing.len()) as u64;
        Ok(TemplateMatching {
            role_tallies: role_tallies(self.doc, &out),
            pairs: out,
            spurious_templates: spurious,
            missing_templates: missing,
            errors,
            approximate,
        })
    }
}

fn role_tallies(doc: &PreparedDocument<'_>, pairs: &[TemplatePair]) -> RoleTallies {
    (0..doc.schema.roles.len())
        .map(|r| {
            let tally = Tally {
                num: pairs.iter().map(|tp| tp.roles[r].exact_count() as u64).sum(),
                p_den: doc.pred.iter().map(|t| t.roles[r].len() as u64).sum(),
                r_den: doc.gold.iter().map(|t| t.roles[r].len() as u64).sum(),
            };
            (doc.role_name(r).to_string(), tally)
        })
        .collect()
}

/// Cost and pairs of the best maximal-score matching found so far.
type Incumbent = (u64, Vec<(usize, usize)>);

/// Depth-first search over template matchings, one predicted template at a
/// time. The first pass finds the maximal score from pair scores alone; the
/// second visits only branches that can still reach it, so pair errors are
/// evaluated just for candidates of a maximal matching. Branches are cut only
/// when strictly worse, so ties still reach the final comparison.
struct Search<'a, 'd, 's> {
    scores: &'a [Vec<u64>],
    cache: &'a mut PairCache<'d, 's>,
    used: Vec<bool>,
    pairs: Vec<(usize, usize)>,
    target: u64,
    best: Option<Incumbent>,
}

impl Search<'_, '_, '_> {
    /// Upper bound on the score predicted templates `i..` can still add.
    fn reachable(&self, i: usize) -> u64 {
        (i..self.scores.len())
            .map(|p| {
                (0..self.used.len())
                    .filter(|&g| !self.used[g])
                    .map(|g| self.scores[p][g])
                    .max()
                    .unwrap_or(0)
            })
            .sum()
    }

    fn max_score(&mut self, i: usize, score: u64) {
        if i == self.scores.len() {
            self.target = self.target.max(score);
            return;
        }
        if score + self.reachable(i) <= self.target {
            return;
        }
        for g in 0..self.used.len() {
            if !self.used[g] && self.scores[i][g] > 0 {
                self.used[g] = true;
                self.max_score(i + 1, score + self.scores[i][g]);
                self.used[g] = false;
            }
        }
        self.max_score(i + 1, score);
    }

    /// `delta` is the running sum of `errors - 2` over chosen pairs, so a
    /// full matching costs `P + G + delta`.
    fn run(&mut self, i: usize, score: u64, delta: i64) -> Result<()> {
        let (np, ng) = (self.scores.len(), self.used.len());
        let base = (np + ng) as i64;
        if score + self.reachable(i) < self.target {
            return Ok(());
        }
        if i == np {
            let cost = (base + delta) as u64;
            let better = match &self.best {
                None => true,
                Some((c, b)) => cost < *c || (cost == *c && self.pairs < *b),
            };
            if better {
                self.best = Some((cost, self.pairs.clone()));
            }
            return Ok(());
        }
        if let Some((best_cost, _)) = &self.best {
            let free = self.used.iter().filter(|u| !**u).count();
            if base + delta - 2 * (np - i).min(free) as i64 > *best_cost as i64 {
                return Ok(());
            }
        }
        for g in 0..ng {
            if self.used[g] {
                continue;
            }
            self.used[g] = true;
            let viable = score + self.scores[i][g] + self.reachable(i + 1) >= self.target;
            if viable {
                let errors = self.cache.get(i, g)?.errors as i64;
                self.pairs.push((i, g));
                self.run(i + 1, score + self.scores[i][g], delta + errors - 2)?;
                self.pairs.pop();
            }
            self.used[g] = false;
        }
        self.run(i + 1, score, delta)
    }
}

/// The optimal matching: highest score, then fewest errors, then smallest
/// pair list. Fails when either complexity guard is exceeded.
pub fn find_optimal_matching(doc: &PreparedDocument<'_>, cfg: &MatchConfig) -> Result<TemplateMatching> {
    let (np, ng) = (doc.pred.len(), doc.gold.len());
    match count_template_matchings(np as u64, ng as u64) {
        Some(n) if n <= cfg.max_template_matchings as u128 => {}
        other => {
            return Err(guard_error(
                doc,
                "template matchings",
                other.map_or_else(|| "overflow".to_string(), |n| n.to_string()),
                cfg.max_template_matchings,
            ))
        }
    }
    let scores: Vec<Vec<u64>> = (0..np)
        .map(|p| (0..ng).map(|g| pair_score(doc, cfg.scs_mode, p, g)).collect())
        .collect();
    let mut cache = PairCache {
        doc,
        cfg: *cfg,
        greedy_fallback: false,
        evals: HashMap::new(),
    };
    let mut search = Search {
        scores: &scores,
        cache: &mut cache,
        used: vec![false; ng],
        pairs: Vec::with_capacity(np.min(ng)),
        target: 0,
        best: None,
    };
    search.max_score(0, 0);
    search.run(0, 0, 0)?;
    let (_, pairs) = search.best.expect("a maximal matching always exists");
    cache.build(&pairs)
}

/// Greedy approximation used when the exhaustive search is too large.
/// Template pairs are taken by descending score, then ascending errors, then
/// index, while both sides are free and the pair is worth keeping.
pub fn greedy_matching(doc: &PreparedDocument<'_>, cfg: &MatchConfig) -> TemplateMatching {
    let (np, ng) = (doc.pred.len(), doc.gold.len());
    let mut cache = PairCache {
        doc,
        cfg: *cfg,
        greedy_fallback: true,
        evals: HashMap::new(),
    };
    let mut candidates: Vec<(u64, u64, usize, usize)> = Vec::with_capacity(np * ng);
    for p in 0..np {
        for g in 0..ng {
            let score = pair_score(doc, cfg.scs_mode, p, g);
            let errors = cache.get(p, g).expect("greedy evaluation cannot fail").errors;
            candidates.push((score, errors, p, g));
        }
    }
    candidates.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)).then((a.2, a.3).cmp(&(b.2, b.3))));
    let mut pred_used = vec![false; np];
    let mut gold_used = vec![false; ng];
    let mut pairs = Vec::new();
    for (score, errors, p, g) in candidates {
        // an unpaired template pair costs two errors
        if !pred_used[p] && !gold_used[g] && (score > 0 || errors < 2) {
            pred_used[p] = true;
            gold_used[g] = true;
            pairs.push((p, g));
        }
    }
    pairs.sort();
    let mut matching = cache.build(&pairs).expect("greedy evaluation cannot fail");
    matching.approximate = true;
    matching
}
