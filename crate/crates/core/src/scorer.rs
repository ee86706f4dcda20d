//! Exact-match precision, recall and F1, micro-averaged over documents.

use std::collections::BTreeMap;
use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};

use crate::matcher::TemplateMatching;
use crate::scalar::Scalar;

/// Raw counts behind a score. Every predicted filler adds one to
/// `p_den`, every gold entity adds one to `r_den`, and every exact pair adds
/// one to `num`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tally {
    pub num: u64,
    pub p_den: u64,
    pub r_den: u64,
}

impl Tally {
    pub fn new(num: u64, p_den: u64, r_den: u64) -> Self {
        Tally { num, p_den, r_den }
    }

    /// `num / p_den`, or 1 when nothing was predicted.
    pub fn precision<S: Scalar>(&self) -> S {
        if self.p_den == 0 {
            S::one()
        } else {
            S::ratio(self.num, self.p_den)
        }
    }

    /// `num / r_den`, or 1 when there is nothing to find.
    pub fn recall<S: Scalar>(&self) -> S {
        if self.r_den == 0 {
            S::one()
        } else {
            S::ratio(self.num, self.r_den)
        }
    }

    pub fn f1<S: Scalar>(&self) -> S {
        let p: S = self.precision();
        let r: S = self.recall();
        let sum = p + r;
        if sum == S::zero() {
            S::zero()
        } else {
            (S::one() + S::one()) * p * r / sum
        }
    }

    pub fn score<S: Scalar>(&self) -> ScoreTriple<S> {
        ScoreTriple {
            numerator: self.num,
            precision_denominator: self.p_den,
            recall_denominator: self.r_den,
            precision: self.precision(),
            recall: self.recall(),
            f1: self.f1(),
        }
    }
}

impl Add for Tally {
    type Output = Tally;

    fn add(self, rhs: Tally) -> Tally {
        Tally {
            num: self.num + rhs.num,
            p_den: self.p_den + rhs.p_den,
            r_den: self.r_den + rhs.r_den,
        }
    }
}

impl AddAssign for Tally {
    fn add_assign(&mut self, rhs: Tally) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for Tally {
    fn sum<I: Iterator<Item = Tally>>(iter: I) -> Tally {
        iter.fold(Tally::default(), Add::add)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreTriple<S> {
    pub numerator: u64,
    pub precision_denominator: u64,
    pub recall_denominator: u64,
    pub precision: S,
    pub recall: S,
    pub f1: S,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scores<S> {
    pub overall: ScoreTriple<S>,
    pub per_role: BTreeMap<String, ScoreTriple<S>>,
}

/// Role tallies keyed by role name.
pub type RoleTallies = BTreeMap<String, Tally>;

pub fn score_tallies<S: Scalar>(tallies: &RoleTallies) -> Scores<S> {
    let overall: Tally = tallies.values().copied().sum();
    Scores {
        overall: overall.score(),
        per_role: tallies.iter().map(|(r, t)| (r.clone(), t.score())).collect(),
    }
}

pub fn score_document<S: Scalar>(matching: &TemplateMatching) -> Scores<S> {
    score_tallies(&matching.role_tallies)
}

/// Micro-average: sums numerators and denominators across documents before
/// dividing.
pub fn score_corpus<'a, S: Scalar>(per_doc: impl IntoIterator<Item = &'a RoleTallies>) -> Scores<S> {
    score_tallies(&sum_role_tallies(per_doc))
}

pub fn sum_role_tallies<'a>(per_doc: impl IntoIterator<Item = &'a RoleTallies>) -> RoleTallies {
    let mut total = RoleTallies::new();
    for doc in per_doc {
        for (role, tally) in doc {
            *total.entry(role.clone()).or_default() += *tally;
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    #[test]
    fn half_precision_half_recall() {
        let t = Tally::new(1, 2, 2);
        let s: ScoreTriple<f64> = t.score();
        assert_eq!((s.precision, s.recall, s.f1), (0.5, 0.5, 0.5));
    }

    #[test]
    fn zero_denominator_conventions() {
        let empty: ScoreTriple<f64> = Tally::new(0, 0, 0).score();
        assert_eq!((empty.precision, empty.recall, empty.f1), (1.0, 1.0, 1.0));
        let nothing_predicted: ScoreTriple<f64> = Tally::new(0, 0, 3).score();
        assert_eq!((nothing_predicted.precision, nothing_predicted.recall, nothing_predicted.f1), (1.0, 0.0, 0.0));
        let nothing_gold: ScoreTriple<f64> = Tally::new(0, 2, 0).score();
        assert_eq!((nothing_gold.precision, nothing_gold.recall, nothing_gold.f1), (0.0, 1.0, 0.0));
        let all_wrong: ScoreTriple<f64> = Tally::new(0, 2, 2).score();
        assert_eq!(all_wrong.f1, 0.0);
    }

    #[test]
    fn exact_f1() {
        let s: ScoreTriple<Rational64> = Tally::new(2, 3, 5).score();
        // P = 2/3, R = 2/5, F1 = 2n / (p_den + r_den) = 4/8
        assert_eq!(s.f1, Rational64::new(1, 2));
    }

    #[test]
    fn micro_average_sums_first() {
        let mut a = RoleTallies::new();
        a.insert("victim".into(), Tally::new(1, 2, 2));
        let b = a.clone();
        let s: Scores<f64> = score_corpus([&a, &b]);
        assert_eq!(s.overall.numerator, 2);
        assert_eq!((s.overall.precision, s.overall.recall, s.overall.f1), (0.5, 0.5, 0.5));

        let mut c = RoleTallies::new();
        c.insert("victim".into(), Tally::new(1, 1, 1));
        let mut d = RoleTallies::new();
        d.insert("victim".into(), Tally::new(0, 0, 3));
        // micro: 1/1 precision, 1/4 recall
        let s: Scores<Rational64> = score_corpus([&c, &d]);
        assert_eq!(s.overall.precision, Rational64::from_integer(1));
        assert_eq!(s.overall.recall, Rational64::new(1, 4));
        assert_eq!(s.overall.f1, Rational64::new(2, 5));
    }

    #[test]
    fn overall_is_sum_of_roles() {
        let mut t = RoleTallies::new();
        t.insert("a".into(), Tally::new(1, 2, 3));
        t.insert("b".into(), Tally::new(2, 2, 2));
        let s: Scores<f64> = score_tallies(&t);
        assert_eq!(s.overall.numerator, 3);
        assert_eq!(s.overall.precision_denominator, 4);
        assert_eq!(s.overall.recall_denominator, 5);
        assert_eq!(s.per_role.len(), 2);
    }
}
