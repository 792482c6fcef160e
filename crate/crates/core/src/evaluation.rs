//! Ranking evaluation: average precision per topic and MAP across topics.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Claim;
use crate::schedule::{AllocationSizes, Scheme};
use crate::trainer::TrainerConfig;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{claims} claims but {scores} scores")]
    LengthMismatch { claims: usize, scores: usize },
    #[error("score {0} is not a probability")]
    ScoreOutOfRange(String),
    #[error("ranked list contains no relevant claims")]
    NoRelevantClaims,
    #[error("no topic results to average")]
    EmptyResults,
    #[error("reports cover different topics: {0}")]
    TopicSetMismatch(String),
}

/// Denominator of average precision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ApDenominator {
    /// Number of relevant items in the list (standard AP).
    #[default]
    Relevant,
    /// Total number of items in the list.
    Total,
}

impl core::str::FromStr for ApDenominator {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "relevant" => Ok(ApDenominator::Relevant),
            "total" => Ok(ApDenominator::Total),
            other => Err(alloc::format!(
                "unknown AP denominator `{other}` (expected relevant or total)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedEntry {
    pub claim_id: String,
    pub score: f64,
    pub relevant: bool,
}

/// Entries sorted by descending score, ties by ascending claim id.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RankedList {
    pub entries: Vec<RankedEntry>,
}

impl RankedList {
    /// Builds a ranked list from arbitrary `(id, score, relevant)` triples.
    pub fn from_entries(mut entries: Vec<RankedEntry>) -> Result<Self, EvalError> {
        if let Some(bad) = entries
            .iter()
            .find(|e| !(e.score.is_finite() && (0.0..=1.0).contains(&e.score)))
        {
            return Err(EvalError::ScoreOutOfRange(alloc::format!("{}", bad.score)));
        }
        entries.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.claim_id.cmp(&b.claim_id))
        });
        Ok(RankedList { entries })
    }

    pub fn relevance(&self) -> impl Iterator<Item = bool> + '_ {
        self.entries.iter().map(|e| e.relevant)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Ranks test claims by score; a claim is relevant when it is check-worthy.
pub fn rank(test_claims: &[&Claim], scores: &[f64]) -> Result<RankedList, EvalError> {
    if test_claims.len() != scores.len() {
        return Err(EvalError::LengthMismatch {
            claims: test_claims.len(),
            scores: scores.len(),
        });
    }
    RankedList::from_entries(
        test_claims
            .iter()
            .zip(scores)
            .map(|(c, &score)| RankedEntry {
                claim_id: c.id.clone(),
                score,
                relevant: c.label.is_check_worthy(),
            })
            .collect(),
    )
}

/// Sum over relevant ranks `k` of precision@k, divided per `denominator`.
pub fn average_precision(
    ranked: &RankedList,
    denominator: ApDenominator,
) -> Result<f64, EvalError> {
    relevance_ap(ranked.relevance(), denominator)
}

/// Average precision of a relevance sequence already in rank order.
pub fn relevance_ap(
    relevance: impl IntoIterator<Item = bool>,
    denominator: ApDenominator,
) -> Result<f64, EvalError> {
    let mut hits = 0usize;
    let mut n = 0usize;
    let mut sum = 0.0;
    for rel in relevance {
        n += 1;
        if rel {
            hits += 1;
            sum += hits as f64 / n as f64;
        }
    }
    if hits == 0 {
        return Err(EvalError::NoRelevantClaims);
    }
    let denom = match denominator {
        ApDenominator::Relevant => hits,
        ApDenominator::Total => n,
    };
    Ok(sum / denom as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicResult {
    pub topic_id: String,
    pub avep: f64,
    pub n_test: usize,
    pub n_relevant: usize,
}

impl TopicResult {
    pub fn from_ranking(
        topic_id: &str,
        ranked: &RankedList,
        denominator: ApDenominator,
    ) -> Result<Self, EvalError> {
        Ok(TopicResult {
            topic_id: topic_id.into(),
            avep: average_precision(ranked, denominator)?,
            n_test: ranked.len(),
            n_relevant: ranked.relevance().filter(|&r| r).count(),
        })
    }
}

/// Arithmetic mean of per-topic average precision.
pub fn mean_average_precision(results: &[TopicResult]) -> Result<f64, EvalError> {
    if results.is_empty() {
        return Err(EvalError::EmptyResults);
    }
    Ok(results.iter().map(|r| r.avep).sum::<f64>() / results.len() as f64)
}

/// Settings that produced a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub seed: u64,
    pub budget: usize,
    pub min_test: usize,
    pub ap_denominator: ApDenominator,
    pub trainer: TrainerConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicAllocation {
    pub topic_id: String,
    #[serde(flatten)]
    pub sizes: AllocationSizes,
}

/// Per-topic results of one (scheme, stage count, seed) run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: Scheme,
    pub stages: usize,
    pub per_topic: Vec<TopicResult>,
    pub map: f64,
    pub fingerprint: Fingerprint,
    #[serde(default)]
    pub allocations: Vec<TopicAllocation>,
}

/// One row of a baseline/candidate comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub topic_id: String,
    pub baseline: f64,
    pub candidate: f64,
    pub delta: f64,
    /// Improvement in whole percentage points, computed from the values
    /// rounded to four decimals, halves away from zero.
    pub points: i64,
}

impl Delta {
    fn new(topic_id: &str, baseline: f64, candidate: f64) -> Self {
        let bp = |x: f64| libm::round(x * 1e4) as i64;
        let diff = bp(candidate) - bp(baseline);
        let points = if diff >= 0 {
            (diff + 50) / 100
        } else {
            (diff - 50) / 100
        };
        Delta {
            topic_id: topic_id.into(),
            baseline,
            candidate,
            delta: candidate - baseline,
            points,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub rows: Vec<Delta>,
    pub average: Delta,
}

/// Per-topic AveP differences of `candidate` over `baseline`.
pub fn compare(
    baseline: &[TopicResult],
    candidate: &[TopicResult],
) -> Result<Comparison, EvalError> {
    let mut b: Vec<&TopicResult> = baseline.iter().collect();
    let mut c: Vec<&TopicResult> = candidate.iter().collect();
    b.sort_by(|x, y| x.topic_id.cmp(&y.topic_id));
    c.sort_by(|x, y| x.topic_id.cmp(&y.topic_id));
    let same = b.len() == c.len() && b.iter().zip(&c).all(|(x, y)| x.topic_id == y.topic_id);
    if !same {
        let names = |v: &[&TopicResult]| {
            v.iter()
                .map(|r| r.topic_id.as_str())
                .collect::<Vec<_>>()
                .join(",")
        };
        return Err(EvalError::TopicSetMismatch(alloc::format!(
            "[{}] vs [{}]",
            names(&b),
            names(&c)
        )));
    }
    // Keep the baseline's row order.
    let rows = baseline
        .iter()
        .map(|r| {
            let cand = candidate
                .iter()
                .find(|x| x.topic_id == r.topic_id)
                .map_or(0.0, |x| x.avep);
            Delta::new(&r.topic_id, r.avep, cand)
        })
        .collect();
    let average = Delta::new(
        "Average",
        mean_average_precision(baseline)?,
        mean_average_precision(candidate)?,
    );
    Ok(Comparison { rows, average })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Label;
    use crate::normalize::NormalizationConfig;
    use alloc::vec;
    use proptest::prelude::*;

    fn ap(bits: &[u8]) -> Result<f64, EvalError> {
        relevance_ap(bits.iter().map(|&b| b == 1), ApDenominator::Relevant)
    }

    #[test]
    fn ap_examples() {
        assert_eq!(ap(&[1, 1, 1]), Ok(1.0));
        assert!((ap(&[1, 0, 1, 1]).unwrap() - (1.0 + 2.0 / 3.0 + 0.75) / 3.0).abs() < 1e-12);
        assert!((ap(&[1, 0, 1, 1]).unwrap() - 0.80556).abs() < 1e-5);
        assert_eq!(ap(&[0, 0, 0]), Err(EvalError::NoRelevantClaims));
        let total = relevance_ap([true, false, true, true], ApDenominator::Total).unwrap();
        assert!((total - (1.0 + 2.0 / 3.0 + 0.75) / 4.0).abs() < 1e-12);
    }

    fn claim(id: &str, cw: bool) -> Claim {
        let label = if cw {
            Label::CheckWorthy
        } else {
            Label::NotCheckWorthy
        };
        Claim::new(id, "T", "x", label, &NormalizationConfig::default())
    }

    #[test]
    fn rank_orders_and_breaks_ties_by_id() {
        let cs = [claim("c", true), claim("a", false), claim("b", true)];
        let refs: Vec<&Claim> = cs.iter().collect();
        let r = rank(&refs, &[0.2, 0.9, 0.9]).unwrap();
        let ids: Vec<&str> = r.entries.iter().map(|e| e.claim_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
        assert!(rank(&[], &[]).unwrap().is_empty());
        assert_eq!(
            rank(&refs, &[0.1]),
            Err(EvalError::LengthMismatch {
                claims: 3,
                scores: 1
            })
        );
        assert!(matches!(
            rank(&refs, &[0.1, f64::NAN, 0.2]),
            Err(EvalError::ScoreOutOfRange(_))
        ));
    }

    fn result(topic: &str, avep: f64) -> TopicResult {
        TopicResult {
            topic_id: topic.into(),
            avep,
            n_test: 10,
            n_relevant: 3,
        }
    }

    #[test]
    fn map_examples() {
        assert_eq!(mean_average_precision(&[result("a", 0.73)]), Ok(0.73));
        assert_eq!(
            mean_average_precision(&[result("a", 1.0), result("b", 0.0)]),
            Ok(0.5)
        );
        assert_eq!(mean_average_precision(&[]), Err(EvalError::EmptyResults));
    }

    #[test]
    fn compare_identity_and_mismatch() {
        let a = vec![result("x", 0.4), result("y", 0.6)];
        let c = compare(&a, &a).unwrap();
        assert!(c.rows.iter().all(|d| d.delta == 0.0 && d.points == 0));
        let b = vec![result("z", 0.4), result("y", 0.6)];
        assert!(matches!(
            compare(&a, &b),
            Err(EvalError::TopicSetMismatch(_))
        ));
        let d = compare(&[result("x", 0.6470)], &[result("x", 0.7339)]).unwrap();
        assert_eq!(d.average.points, 9);
        let neg = compare(&[result("x", 0.3723)], &[result("x", 0.3073)]).unwrap();
        assert_eq!(neg.rows[0].points, -7);
    }

    proptest! {
        #[test]
        fn monotone_transform_keeps_order(scores in prop::collection::vec(0.0f64..1.0, 1..30)) {
            let cs: Vec<Claim> = (0..scores.len()).map(|i| claim(&alloc::format!("c{i:03}"), i % 3 == 0)).collect();
            let refs: Vec<&Claim> = cs.iter().collect();
            let r1 = rank(&refs, &scores).unwrap();
            let squashed: Vec<f64> = scores.iter().map(|s| s * 0.5).collect();
            let r2 = rank(&refs, &squashed).unwrap();
            let ids = |r: &RankedList| r.entries.iter().map(|e| e.claim_id.clone()).collect::<Vec<_>>();
            prop_assert_eq!(ids(&r1), ids(&r2));
            prop_assert_eq!(
                average_precision(&r1, ApDenominator::Relevant),
                average_precision(&r2, ApDenominator::Relevant)
            );
        }

        #[test]
        fn map_is_bounded_by_topic_extremes(values in prop::collection::vec(0.0f64..=1.0, 1..15)) {
            let rs: Vec<TopicResult> = values.iter().enumerate().map(|(i, v)| result(&alloc::format!("t{i}"), *v)).collect();
            let m = mean_average_precision(&rs).unwrap();
            let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(lo - 1e-12 <= m && m <= hi + 1e-12);
        }
    }
}
