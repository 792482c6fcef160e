//! Word-count topic vectors and similarity ordering of source topics.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Claim, Corpus};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SimilarityError {
    #[error("topic `{0}` has no claims")]
    EmptyTopic(String),
    #[error("vector has no non-zero counts")]
    ZeroVector,
    #[error("claims span several topics (`{0}` and `{1}`)")]
    MixedTopics(String, String),
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
}

/// Term counts of one topic over whitespace-tokenized normalized text.
/// Only terms with a count of at least one are stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicVector {
    pub topic_id: String,
    pub counts: BTreeMap<String, u64>,
}

impl TopicVector {
    pub fn count_vector<'a>(
        claims: impl IntoIterator<Item = &'a Claim>,
    ) -> Result<Self, SimilarityError> {
        let mut claims = claims.into_iter().peekable();
        let topic_id = match claims.peek() {
            Some(c) => c.topic_id.clone(),
            None => return Err(SimilarityError::EmptyTopic(String::new())),
        };
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for c in claims {
            if c.topic_id != topic_id {
                return Err(SimilarityError::MixedTopics(topic_id, c.topic_id.clone()));
            }
            for term in c.text.split_whitespace() {
                *counts.entry(term.into()).or_insert(0) += 1;
            }
        }
        Ok(TopicVector { topic_id, counts })
    }

    fn squared_norm(&self) -> u128 {
        self.counts
            .values()
            .map(|&c| u128::from(c) * u128::from(c))
            .sum()
    }
}

/// Cosine similarity of two count vectors over their union vocabulary.
///
/// Dot product and norms are accumulated exactly in integers, so the result
/// is symmetric bit-for-bit.
pub fn cosine(a: &TopicVector, b: &TopicVector) -> Result<f64, SimilarityError> {
    Ok(Terms::of(a, b)?.cosine())
}

/// Exact integer ingredients of a cosine.
#[derive(Debug, Clone, Copy)]
struct Terms {
    dot: u128,
    norm_a: u128,
    norm_b: u128,
}

impl Terms {
    fn of(a: &TopicVector, b: &TopicVector) -> Result<Self, SimilarityError> {
        let norm_a = a.squared_norm();
        let norm_b = b.squared_norm();
        if norm_a == 0 || norm_b == 0 {
            return Err(SimilarityError::ZeroVector);
        }
        let (small, large) = if a.counts.len() <= b.counts.len() {
            (a, b)
        } else {
            (b, a)
        };
        let dot = small
            .counts
            .iter()
            .filter_map(|(t, &x)| large.counts.get(t).map(|&y| u128::from(x) * u128::from(y)))
            .sum();
        Ok(Terms {
            dot,
            norm_a,
            norm_b,
        })
    }

    fn cosine(&self) -> f64 {
        let cos =
            self.dot as f64 / (libm::sqrt(self.norm_a as f64) * libm::sqrt(self.norm_b as f64));
        cos.clamp(0.0, 1.0)
    }

    /// Compares two cosines against the same `b` side without rounding:
    /// `dot_x / sqrt(na_x) < dot_y / sqrt(na_y)` iff `dot_x^2 * na_y < dot_y^2 * na_x`.
    fn cmp_same_target(&self, other: &Terms) -> core::cmp::Ordering {
        let lhs = self
            .dot
            .checked_mul(self.dot)
            .and_then(|d| d.checked_mul(other.norm_a));
        let rhs = other
            .dot
            .checked_mul(other.dot)
            .and_then(|d| d.checked_mul(self.norm_a));
        match (lhs, rhs) {
            (Some(l), Some(r)) => l.cmp(&r),
            _ => self.cosine().total_cmp(&other.cosine()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSimilarity {
    pub topic_id: String,
    pub similarity: f64,
}

/// Source topics sorted from least to most similar to the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicOrdering {
    pub target_id: String,
    pub ordered_sources: Vec<SourceSimilarity>,
}

impl TopicOrdering {
    pub fn topic_ids(&self) -> impl Iterator<Item = &str> {
        self.ordered_sources.iter().map(|s| s.topic_id.as_str())
    }
}

/// Orders every non-target topic by ascending cosine similarity between its
/// full claim set and `target_reference` (the target's training sample).
/// Equal similarities fall back to topic id order.
pub fn order_sources(
    corpus: &Corpus,
    target_id: &str,
    target_reference: &[&Claim],
) -> Result<TopicOrdering, SimilarityError> {
    if !corpus.has_topic(target_id) {
        return Err(SimilarityError::UnknownTopic(target_id.into()));
    }
    if target_reference.is_empty() {
        return Err(SimilarityError::EmptyTopic(target_id.into()));
    }
    let target = TopicVector::count_vector(target_reference.iter().copied())?;
    let mut scored = Vec::new();
    for topic in corpus.topic_ids().filter(|t| *t != target_id) {
        let claims = corpus.topic_claims(topic);
        let v = TopicVector::count_vector(claims.iter().copied())
            .map_err(|_| SimilarityError::EmptyTopic(topic.into()))?;
        scored.push((topic, Terms::of(&v, &target)?));
    }
    scored.sort_by(|(ta, a), (tb, b)| a.cmp_same_target(b).then_with(|| ta.cmp(tb)));
    Ok(TopicOrdering {
        target_id: target_id.into(),
        ordered_sources: scored
            .into_iter()
            .map(|(topic, terms)| SourceSimilarity {
                topic_id: topic.into(),
                similarity: terms.cosine(),
            })
            .collect(),
    })
}
