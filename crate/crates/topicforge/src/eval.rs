//! Evaluation of externally produced scores (`topicforge eval`).

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;

use thiserror::Error;
use topicforge_core::evaluation::{mean_average_precision, rank};
use topicforge_core::{ApDenominator, Claim, EvalError, Label, NormalizationConfig, TopicResult};

use crate::io::{load_corpus, ColumnMap, CorpusFormat, IoError};

/// Topic assigned to labels given without a topic column.
pub const DEFAULT_TOPIC: &str = "all";

#[derive(Debug, Error)]
pub enum EvalFileError {
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("no score for claim `{0}`")]
    MissingScore(String),
    #[error("score given for unlabeled claim `{0}`")]
    UnknownClaim(String),
    #[error("topic `{topic}`: {source}")]
    Eval {
        topic: String,
        #[source]
        source: EvalError,
    },
}

/// Reads a CSV with `id` and `score` columns.
pub fn read_scores<R: Read>(reader: R) -> Result<BTreeMap<String, f64>, EvalFileError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let malformed = |line: usize, reason: String| EvalFileError::Malformed { line, reason };
    let headers = rdr
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| IoError::MissingColumn(name.into()))
    };
    let (id, score) = (col("id")?, col("score")?);
    let mut out = BTreeMap::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| malformed(line, e.to_string()))?;
        let claim = row.get(id).unwrap_or("").trim().to_string();
        let raw = row.get(score).unwrap_or("").trim();
        let value: f64 = raw
            .parse()
            .map_err(|_| malformed(line, format!("bad score `{raw}`")))?;
        if out.insert(claim.clone(), value).is_some() {
            return Err(malformed(line, format!("duplicate id `{claim}`")));
        }
    }
    Ok(out)
}

/// Reads labels from a corpus file (NDJSON, or CSV/TSV with `id`, `topic`,
/// `text`, `label` columns) or from a CSV with `id`, `label` and an optional
/// `topic` column.
pub fn read_labels(path: &Path) -> Result<Vec<Claim>, EvalFileError> {
    let norm = NormalizationConfig::default();
    let format = CorpusFormat::from_path(path);
    if format == CorpusFormat::Ndjson {
        return Ok(load_corpus(path, Some(format), &ColumnMap::default(), &norm)?.into_claims());
    }
    let file = std::fs::File::open(path).map_err(|e| IoError::file(path, e))?;
    let delimiter = if format == CorpusFormat::Tsv {
        b'\t'
    } else {
        b','
    };
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .from_reader(file);
    let malformed = |line: usize, reason: String| EvalFileError::Malformed { line, reason };
    let headers = rdr
        .headers()
        .map_err(|e| malformed(1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id = col("id").ok_or_else(|| IoError::MissingColumn("id".into()))?;
    let label = col("label").ok_or_else(|| IoError::MissingColumn("label".into()))?;
    let topic = col("topic");
    let mut claims = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let line = i + 2;
        let row = row.map_err(|e| malformed(line, e.to_string()))?;
        let get = |k: usize| row.get(k).unwrap_or("").trim();
        let lab = Label::parse(get(label)).map_err(|e| malformed(line, e.to_string()))?;
        let topic = topic.map_or(DEFAULT_TOPIC, get);
        claims.push(Claim::new(get(id), topic, "", lab, &norm));
    }
    Ok(claims)
}

/// Ranks each topic's claims by score and computes per-topic AveP and MAP.
/// Every labeled claim needs a score and every score a labeled claim.
pub fn evaluate(
    labels: &[Claim],
    scores: &BTreeMap<String, f64>,
    denominator: ApDenominator,
) -> Result<(Vec<TopicResult>, f64), EvalFileError> {
    let mut topics: BTreeMap<&str, Vec<&Claim>> = BTreeMap::new();
    for c in labels {
        topics.entry(&c.topic_id).or_default().push(c);
    }
    let labelled: BTreeSet<&str> = labels.iter().map(|c| c.id.as_str()).collect();
    if let Some(extra) = scores.keys().find(|k| !labelled.contains(k.as_str())) {
        return Err(EvalFileError::UnknownClaim(extra.clone()));
    }
    let mut results = Vec::new();
    for (topic, claims) in topics {
        let topic_scores = claims
            .iter()
            .map(|c| {
                scores
                    .get(&c.id)
                    .copied()
                    .ok_or_else(|| EvalFileError::MissingScore(c.id.clone()))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let annotate = |source| EvalFileError::Eval {
            topic: topic.into(),
            source,
        };
        let ranked = rank(&claims, &topic_scores).map_err(annotate)?;
        results.push(TopicResult::from_ranking(topic, &ranked, denominator).map_err(annotate)?);
    }
    let map = mean_average_precision(&results).map_err(|source| EvalFileError::Eval {
        topic: String::new(),
        source,
    })?;
    Ok((results, map))
}
