//! Seeded synthetic multi-topic claim corpora.
//!
//! Each topic draws its words from a vocabulary of `vocab_size` terms. A topic
//! can borrow a fraction of another ("anchor") topic's vocabulary, which
//! plants a known vocabulary overlap between the two; borrowers of the same
//! anchor take consecutive (wrapping) slices of it. Check-worthy claims carry
//! a marker term with probability `p_signal`.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Claim, Corpus, CorpusError, Label};
use crate::normalize::{normalize_text, NormalizationConfig};
use crate::seed::{stream, Tag};

/// Share of check-worthy claims in the combined CT20/CT21 Arabic data.
pub const DEFAULT_PREVALENCE: f64 = 0.284;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTopic {
    pub id: String,
    pub size: usize,
}

/// `topic` takes `fraction * vocab_size` of `anchor`'s words.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OverlapSpec {
    pub topic: String,
    pub anchor: String,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub topics: Vec<SyntheticTopic>,
    pub vocab_size: usize,
    pub overlaps: Vec<OverlapSpec>,
    pub prevalence: f64,
    pub p_signal: f64,
    pub markers_per_topic: usize,
    /// Marker terms added to every topic's marker set.
    pub shared_markers: Vec<String>,
    pub min_words: usize,
    pub max_words: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            topics: Vec::new(),
            vocab_size: 200,
            overlaps: Vec::new(),
            prevalence: DEFAULT_PREVALENCE,
            p_signal: 1.0,
            markers_per_topic: 3,
            shared_markers: Vec::new(),
            min_words: 8,
            max_words: 16,
        }
    }
}

impl SyntheticSpec {
    /// `n` topics named `T1..Tn`, each of `size` claims.
    pub fn uniform(n: usize, size: usize) -> Self {
        SyntheticSpec {
            topics: (1..=n)
                .map(|i| SyntheticTopic {
                    id: format!("T{i}"),
                    size,
                })
                .collect(),
            ..SyntheticSpec::default()
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: String| Err(CorpusError::InvalidSpec(m));
        if self.topics.is_empty() {
            return bad("no topics".into());
        }
        let mut ids = BTreeSet::new();
        for t in &self.topics {
            if !ids.insert(t.id.as_str()) {
                return bad(format!("duplicate topic `{}`", t.id));
            }
            if t.id.trim().is_empty() {
                return bad("empty topic id".into());
            }
        }
        if self.vocab_size == 0 {
            return bad("vocab_size must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.prevalence) {
            return bad(format!("prevalence {} outside [0, 1]", self.prevalence));
        }
        if !(0.0..=1.0).contains(&self.p_signal) {
            return bad(format!("p_signal {} outside [0, 1]", self.p_signal));
        }
        if self.min_words == 0 || self.min_words > self.max_words {
            return bad("need 0 < min_words <= max_words".into());
        }
        if self.p_signal > 0.0 && self.markers_per_topic == 0 && self.shared_markers.is_empty() {
            return bad("p_signal > 0 needs at least one marker".into());
        }
        let cfg = NormalizationConfig::default();
        for m in &self.shared_markers {
            if m.is_empty() || normalize_text(m, &cfg) != *m || m.contains(' ') {
                return bad(format!(
                    "shared marker `{m}` is not a single normalized word"
                ));
            }
        }
        let mut borrowers = BTreeSet::new();
        for o in &self.overlaps {
            for t in [&o.topic, &o.anchor] {
                if !ids.contains(t.as_str()) {
                    return bad(format!("overlap references unknown topic `{t}`"));
                }
            }
            if o.topic == o.anchor {
                return bad(format!("topic `{}` overlaps with itself", o.topic));
            }
            if !(0.0..=1.0).contains(&o.fraction) {
                return bad(format!("overlap fraction {} outside [0, 1]", o.fraction));
            }
            if !borrowers.insert(o.topic.as_str()) {
                return bad(format!(
                    "topic `{}` borrows from more than one anchor",
                    o.topic
                ));
            }
        }
        if let Some(o) = self
            .overlaps
            .iter()
            .find(|o| borrowers.contains(o.anchor.as_str()))
        {
            return bad(format!("anchor `{}` is itself a borrower", o.anchor));
        }
        Ok(())
    }

    /// Designed vocabulary of every topic, keyed by topic id.
    pub fn vocabularies(&self) -> Result<BTreeMap<String, Vec<String>>, CorpusError> {
        self.validate()?;
        let mut next = 0usize;
        let mut fresh = |n: usize| -> Vec<String> {
            let words = (next..next + n).map(word).collect();
            next += n;
            words
        };
        let borrowed: BTreeMap<&str, &OverlapSpec> = self
            .overlaps
            .iter()
            .map(|o| (o.topic.as_str(), o))
            .collect();
        let mut vocab: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for t in &self.topics {
            if !borrowed.contains_key(t.id.as_str()) {
                vocab.insert(t.id.clone(), fresh(self.vocab_size));
            }
        }
        let mut offsets: BTreeMap<&str, usize> = BTreeMap::new();
        for o in &self.overlaps {
            let take = shared_words(o.fraction, self.vocab_size);
            let anchor = &vocab[&o.anchor];
            let off = offsets.entry(o.anchor.as_str()).or_insert(0);
            let mut words: Vec<String> = (0..take)
                .map(|k| anchor[(*off + k) % self.vocab_size].clone())
                .collect();
            *off = (*off + take) % self.vocab_size;
            words.extend(fresh(self.vocab_size - take));
            vocab.insert(o.topic.clone(), words);
        }
        Ok(vocab)
    }

    /// Marker terms of one topic (by spec position).
    pub fn markers(&self, topic_index: usize) -> Vec<String> {
        (0..self.markers_per_topic)
            .map(|k| format!("zz{}x{}", letters(topic_index), letters(k)))
            .chain(self.shared_markers.iter().cloned())
            .collect()
    }
}

fn shared_words(fraction: f64, vocab_size: usize) -> usize {
    (libm::round(fraction * vocab_size as f64) as usize).min(vocab_size)
}

/// Base-26 lowercase spelling of `n` (a, b, ..., z, ba, bb, ...).
fn letters(mut n: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (n % 26) as u8);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    out.reverse();
    String::from_utf8(out).unwrap_or_default()
}

fn word(n: usize) -> String {
    format!("w{}", letters(n))
}

/// Generates a corpus for `spec`. Identical `(spec, seed)` pairs give identical corpora.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Corpus, CorpusError> {
    let vocab = spec.vocabularies()?;
    let cfg = NormalizationConfig::default();
    let mut claims = Vec::with_capacity(spec.topics.iter().map(|t| t.size).sum());
    for (ti, topic) in spec.topics.iter().enumerate() {
        let words = &vocab[&topic.id];
        let markers = spec.markers(ti);
        let mut rng = stream(seed, &[Tag::Str("synthetic"), Tag::Str(&topic.id)]);
        for i in 0..topic.size {
            let cw = rng.gen_bool(spec.prevalence);
            let len = rng.gen_range(spec.min_words..=spec.max_words);
            let mut text: Vec<&str> = (0..len)
                .map(|_| words[rng.gen_range(0..words.len())].as_str())
                .collect();
            if cw && rng.gen_bool(spec.p_signal) {
                let m = markers[rng.gen_range(0..markers.len())].as_str();
                let at = rng.gen_range(0..=text.len());
                text.insert(at, m);
            }
            let label = if cw {
                Label::CheckWorthy
            } else {
                Label::NotCheckWorthy
            };
            claims.push(Claim::new(
                format!("{}-{:05}", topic.id, i),
                topic.id.clone(),
                text.join(" "),
                label,
                &cfg,
            ));
        }
    }
    Corpus::from_claims(claims)
}

/// Overlap of the words actually used by two topics:
/// `|A ∩ B| / min(|A|, |B|)`, markers excluded.
pub fn realized_overlap(corpus: &Corpus, a: &str, b: &str) -> f64 {
    let used = |t: &str| -> BTreeSet<String> {
        corpus
            .topic_claims(t)
            .iter()
            .flat_map(|c| c.text.split_whitespace())
            .filter(|w| w.starts_with('w'))
            .map(String::from)
            .collect()
    };
    let (ua, ub) = (used(a), used(b));
    let denom = ua.len().min(ub.len());
    if denom == 0 {
        return 0.0;
    }
    ua.intersection(&ub).count() as f64 / denom as f64
}
