//! Topic-labeled claim corpora.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::normalize::{normalize_text, NormalizationConfig};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("duplicate claim id `{0}`")]
    DuplicateId(String),
    #[error("unknown label `{0}` (expected 0 or 1)")]
    UnknownLabel(String),
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("topic `{0}` appears in more than one merge group")]
    OverlappingGroups(String),
    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),
}

/// Check-worthiness label. Serialized as `1` (check-worthy) / `0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    NotCheckWorthy,
    CheckWorthy,
}

impl Label {
    pub fn as_u8(self) -> u8 {
        match self {
            Label::NotCheckWorthy => 0,
            Label::CheckWorthy => 1,
        }
    }

    pub fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Label::NotCheckWorthy),
            1 => Some(Label::CheckWorthy),
            _ => None,
        }
    }

    /// Parses the textual forms `0` and `1` (surrounding whitespace ignored).
    pub fn parse(s: &str) -> Result<Self, CorpusError> {
        match s.trim() {
            "0" => Ok(Label::NotCheckWorthy),
            "1" => Ok(Label::CheckWorthy),
            other => Err(CorpusError::UnknownLabel(other.into())),
        }
    }

    pub fn is_check_worthy(self) -> bool {
        self == Label::CheckWorthy
    }

    /// 1.0 for check-worthy, 0.0 otherwise.
    pub fn target(self) -> f64 {
        f64::from(self.as_u8())
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.as_u8())
    }
}

impl Serialize for Label {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.as_u8())
    }
}

impl<'de> Deserialize<'de> for Label {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = u8::deserialize(d)?;
        Label::from_u8(v).ok_or_else(|| serde::de::Error::custom("label must be 0 or 1"))
    }
}

/// One labeled claim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Claim {
    pub id: String,
    pub topic_id: String,
    /// Normalized form of `raw_text`.
    pub text: String,
    pub raw_text: String,
    pub label: Label,
}

impl Claim {
    pub fn new(
        id: impl Into<String>,
        topic_id: impl Into<String>,
        raw_text: impl Into<String>,
        label: Label,
        cfg: &NormalizationConfig,
    ) -> Self {
        let raw_text = raw_text.into();
        Claim {
            id: id.into(),
            topic_id: topic_id.into(),
            text: normalize_text(&raw_text, cfg),
            raw_text,
            label,
        }
    }
}

/// An immutable set of claims partitioned into topics.
///
/// Topic membership lists preserve the input order of claims.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    claims: Vec<Claim>,
    topics: BTreeMap<String, Vec<usize>>,
    by_id: BTreeMap<String, usize>,
}

impl Corpus {
    pub fn from_claims(claims: Vec<Claim>) -> Result<Self, CorpusError> {
        let mut by_id = BTreeMap::new();
        let mut topics: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, c) in claims.iter().enumerate() {
            if by_id.insert(c.id.clone(), i).is_some() {
                return Err(CorpusError::DuplicateId(c.id.clone()));
            }
            topics.entry(c.topic_id.clone()).or_default().push(i);
        }
        Ok(Corpus {
            claims,
            topics,
            by_id,
        })
    }

    pub fn len(&self) -> usize {
        self.claims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.claims.is_empty()
    }

    pub fn claims(&self) -> &[Claim] {
        &self.claims
    }

    pub fn into_claims(self) -> Vec<Claim> {
        self.claims
    }

    pub fn get(&self, id: &str) -> Option<&Claim> {
        self.by_id.get(id).map(|&i| &self.claims[i])
    }

    /// Topic ids in lexicographic order.
    pub fn topic_ids(&self) -> impl Iterator<Item = &str> {
        self.topics.keys().map(String::as_str)
    }

    pub fn num_topics(&self) -> usize {
        self.topics.len()
    }

    pub fn has_topic(&self, topic: &str) -> bool {
        self.topics.contains_key(topic)
    }

    /// Claims of one topic in input order; empty for unknown topics.
    pub fn topic_claims(&self, topic: &str) -> Vec<&Claim> {
        self.topics
            .get(topic)
            .map(|ix| ix.iter().map(|&i| &self.claims[i]).collect())
            .unwrap_or_default()
    }

    pub fn topic_size(&self, topic: &str) -> usize {
        self.topics.get(topic).map_or(0, Vec::len)
    }

    /// `(topic_id, size)` pairs in topic order.
    pub fn topic_sizes(&self) -> Vec<(&str, usize)> {
        self.topics
            .iter()
            .map(|(t, ix)| (t.as_str(), ix.len()))
            .collect()
    }

    /// All claims outside `target`, in input order.
    pub fn source_claims(&self, target: &str) -> Vec<&Claim> {
        self.claims
            .iter()
            .filter(|c| c.topic_id != target)
            .collect()
    }

    /// Reassigns the claims of each group's topics to the group's new id.
    ///
    /// Groups must reference existing topics and be pairwise disjoint.
    pub fn merge_topics(
        &self,
        groups: &BTreeMap<String, BTreeSet<String>>,
    ) -> Result<Corpus, CorpusError> {
        let mut rename: BTreeMap<&str, &str> = BTreeMap::new();
        for (new_id, members) in groups {
            for m in members {
                if !self.has_topic(m) {
                    return Err(CorpusError::UnknownTopic(m.clone()));
                }
                if rename.insert(m.as_str(), new_id.as_str()).is_some() {
                    return Err(CorpusError::OverlappingGroups(m.clone()));
                }
            }
        }
        let claims = self
            .claims
            .iter()
            .map(|c| {
                let mut c = c.clone();
                if let Some(&to) = rename.get(c.topic_id.as_str()) {
                    c.topic_id = to.into();
                }
                c
            })
            .collect();
        Corpus::from_claims(claims)
    }
}
