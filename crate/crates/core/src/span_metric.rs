//! Span comparison scores (SCS).
//!
//! An SCS is a distance in `[0, 1]` between two character spans: 0 for
//! identical spans, 1 for spans that do not overlap. Two modes exist:
//!
//! * absolute: `(|x.start - y.start| + |x.end - y.end|) / (len(x) + len(y))`,
//!   capped at 1 with `min(1, ·)`;
//! * geometric mean (default): `1 - si² / (len(x) · len(y))` where `si` is the
//!   length of the intersection, and 1 whenever either span is empty.
//!
//! Null spans (mentions that could not be located) score 1 against anything.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{Mention, Span};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ScsMode {
    #[serde(rename = "absolute")]
    Absolute,
    #[default]
    #[serde(rename = "geometric")]
    GeometricMean,
}

impl ScsMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ScsMode::Absolute => "absolute",
            ScsMode::GeometricMean => "geometric",
        }
    }

    pub fn score<S: Scalar>(self, x: Span, y: Span) -> S {
        match self {
            ScsMode::Absolute => scs_absolute(x, y),
            ScsMode::GeometricMean => scs_geometric(x, y),
        }
    }

    /// Score between possibly-null spans.
    pub fn score_opt<S: Scalar>(self, x: Option<Span>, y: Option<Span>) -> S {
        match (x, y) {
            (Some(x), Some(y)) => self.score(x, y),
            _ => S::one(),
        }
    }
}

impl fmt::Display for ScsMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absolute" => Ok(ScsMode::Absolute),
            "geometric" | "geometric_mean" => Ok(ScsMode::GeometricMean),
            other => Err(format!("unknown SCS mode {other:?} (expected geometric or absolute)")),
        }
    }
}

pub fn scs_absolute<S: Scalar>(x: Span, y: Span) -> S {
    let total = (x.len() + y.len()) as u64;
    if total == 0 {
        return S::one();
    }
    let offset = (x.start.abs_diff(y.start) + x.end.abs_diff(y.end)) as u64;
    if offset >= total {
        return S::one();
    }
    S::ratio(offset, total)
}

pub fn scs_geometric<S: Scalar>(x: Span, y: Span) -> S {
    let (lx, ly) = (x.len() as u64, y.len() as u64);
    if lx == 0 || ly == 0 {
        return S::one();
    }
    let lo = x.start.max(y.start);
    let hi = x.end.min(y.end);
    let si = hi.saturating_sub(lo) as u64;
    if si == 0 {
        return S::one();
    }
    S::one() - S::ratio(si * si, lx * ly)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestTarget<S> {
    pub index: usize,
    pub score: S,
}

/// The candidate with the lowest SCS against `mention`. Ties go to the
/// candidate starting earliest in the document (null spans last), then to
/// list order.
pub fn best_gold_target<S: Scalar>(
    mention: &Mention,
    candidates: &[Mention],
    mode: ScsMode,
) -> Option<BestTarget<S>> {
    best_by_span(mention.span, candidates.iter().map(|c| c.span), mode)
}

pub(crate) fn best_by_span<S: Scalar>(
    span: Option<Span>,
    candidates: impl IntoIterator<Item = Option<Span>>,
    mode: ScsMode,
) -> Option<BestTarget<S>> {
    let mut best: Option<(BestTarget<S>, Option<usize>)> = None;
    for (index, cand) in candidates.into_iter().enumerate() {
        let score: S = mode.score_opt(span, cand);
        let start = cand.map(|s| s.start);
        let better = match &best {
            None => true,
            Some((b, b_start)) => {
                score < b.score || (score == b.score && earlier(start, *b_start))
            }
        };
        if better {
            best = Some((BestTarget { index, score }, start));
        }
    }
    best.map(|(b, _)| b)
}

fn earlier(a: Option<usize>, b: Option<usize>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => a < b,
        (Some(_), None) => true,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use proptest::prelude::*;

    fn s(a: usize, b: usize) -> Span {
        Span::new(a, b)
    }

    #[test]
    fn absolute_examples() {
        assert_eq!(scs_absolute::<f64>(s(10, 20), s(10, 20)), 0.0);
        assert_eq!(scs_absolute::<f64>(s(0, 10), s(5, 15)), 0.5);
        assert_eq!(scs_absolute::<f64>(s(0, 4), s(100, 104)), 1.0);
        assert_eq!(scs_absolute::<Rational64>(s(0, 10), s(5, 15)), Rational64::new(1, 2));
    }

    #[test]
    fn geometric_examples() {
        assert_eq!(scs_geometric::<f64>(s(10, 20), s(10, 20)), 0.0);
        assert_eq!(scs_geometric::<f64>(s(0, 5), s(5, 10)), 1.0);
        assert_eq!(scs_geometric::<f64>(s(0, 10), s(5, 15)), 0.75);
        assert_eq!(scs_geometric::<f64>(s(3, 3), s(0, 10)), 1.0);
        assert_eq!(scs_geometric::<Rational64>(s(0, 10), s(8, 20)), Rational64::new(29, 30));
    }

    #[test]
    fn zero_length_pairs_score_one() {
        assert_eq!(scs_geometric::<f64>(s(4, 4), s(4, 4)), 1.0);
        assert_eq!(scs_absolute::<f64>(s(4, 4), s(4, 4)), 1.0);
    }

    #[test]
    fn f32_agrees() {
        assert_eq!(scs_geometric::<f32>(s(0, 10), s(5, 15)), 0.75f32);
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("geometric".parse::<ScsMode>().unwrap(), ScsMode::GeometricMean);
        assert_eq!("absolute".parse::<ScsMode>().unwrap(), ScsMode::Absolute);
        assert!("cosine".parse::<ScsMode>().is_err());
        assert_eq!(ScsMode::default(), ScsMode::GeometricMean);
    }

    #[test]
    fn best_target_exact_span() {
        let m = Mention::with_span("x", s(5, 15));
        let cands = vec![
            Mention::with_span("a", s(0, 10)),
            Mention::with_span("b", s(5, 15)),
            Mention::with_span("c", s(20, 30)),
        ];
        let best = best_gold_target::<f64>(&m, &cands, ScsMode::GeometricMean).unwrap();
        assert_eq!((best.index, best.score), (1, 0.0));
    }

    #[test]
    fn best_target_lowest_score() {
        let m = Mention::with_span("x", s(0, 10));
        let cands = vec![Mention::with_span("a", s(5, 15)), Mention::with_span("b", s(8, 20))];
        let best = best_gold_target::<Rational64>(&m, &cands, ScsMode::GeometricMean).unwrap();
        assert_eq!(best.index, 0);
        assert_eq!(best.score, Rational64::new(3, 4));
    }

    #[test]
    fn best_target_null_span_and_empty() {
        let m = Mention::new("x");
        let cands = vec![Mention::with_span("a", s(50, 60)), Mention::with_span("b", s(0, 10))];
        // all score 1; earliest start wins
        let best = best_gold_target::<f64>(&m, &cands, ScsMode::GeometricMean).unwrap();
        assert_eq!((best.index, best.score), (1, 1.0));
        let same_start = vec![Mention::with_span("a", s(0, 10)), Mention::with_span("b", s(0, 10))];
        let best = best_gold_target::<f64>(&m, &same_start, ScsMode::Absolute).unwrap();
        assert_eq!(best.index, 0);
        assert!(best_gold_target::<f64>(&m, &[], ScsMode::GeometricMean).is_none());
    }

    fn span_strategy() -> impl Strategy<Value = Span> {
        (0usize..60, 0usize..30).prop_map(|(a, l)| Span::new(a, a + l))
    }

    proptest! {
        #[test]
        fn symmetric_and_bounded(x in span_strategy(), y in span_strategy()) {
            for mode in [ScsMode::Absolute, ScsMode::GeometricMean] {
                let a: Rational64 = mode.score(x, y);
                let b: Rational64 = mode.score(y, x);
                prop_assert_eq!(a, b);
                prop_assert!(a >= Rational64::from_integer(0) && a <= Rational64::from_integer(1));
            }
        }

        #[test]
        fn geometric_monotone_in_overlap(start in 0usize..20, lx in 1usize..20) {
            // spans sharing a start: a longer intersection never scores higher
            let x = Span::new(start, start + lx);
            let mut last = Rational64::from_integer(2);
            for overlap in 1..=lx {
                let y = Span::new(start, start + overlap);
                let v: Rational64 = scs_geometric(x, y);
                prop_assert!(v <= last);
                last = v;
            }
        }
    }
}
