//! Experiment configuration file (a single JSON document, unknown keys rejected).

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use topicforge_core::runner::{RunSettings, DEFAULT_STAGE_COUNTS};
use topicforge_core::schedule::{SplitOptions, DEFAULT_BUDGET, DEFAULT_MIN_TEST};
use topicforge_core::synthetic::{generate_synthetic, SyntheticSpec};
use topicforge_core::{
    ApDenominator, Corpus, CorpusError, NormalizationConfig, Scheme, SweepConfig, TrainerConfig,
};

use crate::io::{load_corpus, ColumnMap, CorpusFormat, IoError};

pub const DEFAULT_REPEATS: usize = 5;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// A corpus file on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSource {
    pub path: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<CorpusFormat>,
    #[serde(default)]
    pub columns: ColumnMap,
}

/// A generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSource {
    pub spec: SyntheticSpec,
    #[serde(default)]
    pub seed: u64,
}

fn default_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn default_stage_counts() -> Vec<usize> {
    DEFAULT_STAGE_COUNTS.to_vec()
}

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

fn default_min_test() -> usize {
    DEFAULT_MIN_TEST
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corpus: Option<CorpusSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSource>,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    #[serde(default = "default_stage_counts")]
    pub stage_counts: Vec<usize>,
    #[serde(default = "default_budget")]
    pub budget: usize,
    #[serde(default = "default_min_test")]
    pub min_test: usize,
    /// Number of seeds. When `seeds` is also given the two must agree.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repeats: Option<usize>,
    /// Explicit seeds. Defaults to `1..=repeats`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default)]
    pub trainer: TrainerConfig,
    /// New topic id → the topics merged into it.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub merge_topics: BTreeMap<String, BTreeSet<String>>,
    #[serde(default)]
    pub normalization: NormalizationConfig,
    #[serde(default)]
    pub ap_denominator: ApDenominator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    /// Parses `text`; relative paths are resolved against `base`.
    pub fn from_json(text: &str, base: &Path) -> Result<Self, serde_json::Error> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text)?;
        if let Some(c) = cfg.corpus.as_mut() {
            c.path = base.join(&c.path);
        }
        if let Some(d) = cfg.output_dir.as_mut() {
            *d = base.join(&*d);
        }
        Ok(cfg)
    }

    /// Reads, parses and validates a config file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::from_json(&text, base).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn seeds(&self) -> Result<Vec<u64>, ConfigError> {
        match (&self.seeds, self.repeats) {
            (Some(seeds), Some(r)) if seeds.len() != r => Err(ConfigError::Invalid(format!(
                "repeats = {r} but {} seeds given",
                seeds.len()
            ))),
            (Some(seeds), _) => Ok(seeds.clone()),
            (None, r) => Ok((1..=r.unwrap_or(DEFAULT_REPEATS) as u64).collect()),
        }
    }

    pub fn sweep_config(&self) -> Result<SweepConfig, ConfigError> {
        Ok(SweepConfig {
            schemes: self.schemes.clone(),
            stage_counts: self.stage_counts.clone(),
            seeds: self.seeds()?,
            settings: RunSettings {
                split: SplitOptions {
                    budget: self.budget,
                    min_test: self.min_test,
                },
                ap_denominator: self.ap_denominator,
            },
            trainer: self.trainer.clone(),
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        match (&self.corpus, &self.synthetic) {
            (Some(_), Some(_)) => {
                return invalid("give either `corpus` or `synthetic`, not both".into())
            }
            (None, None) => return invalid("one of `corpus` or `synthetic` is required".into()),
            (None, Some(s)) => s
                .spec
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
            (Some(_), None) => {}
        }
        if let Some(dup) = first_duplicate(&self.schemes) {
            return invalid(format!("scheme {dup} listed twice"));
        }
        if let Some(dup) = first_duplicate(&self.stage_counts) {
            return invalid(format!("stage count {dup} listed twice"));
        }
        let seeds = self.seeds()?;
        if let Some(dup) = first_duplicate(&seeds) {
            return invalid(format!("seed {dup} listed twice"));
        }
        self.normalization
            .validate()
            .map_err(ConfigError::Invalid)?;
        self.sweep_config()?
            .validate()
            .map_err(ConfigError::Invalid)
    }

    /// Loads or generates the corpus, then applies topic merging.
    ///
    /// Synthetic corpora always use the default normalization; their text
    /// contains nothing the replacement passes would touch.
    pub fn load_corpus(&self) -> Result<Corpus, IoError> {
        let corpus = match (&self.corpus, &self.synthetic) {
            (Some(c), _) => load_corpus(&c.path, c.format, &c.columns, &self.normalization)?,
            (None, Some(s)) => generate_synthetic(&s.spec, s.seed)?,
            (None, None) => {
                return Err(CorpusError::InvalidSpec("no corpus configured".into()).into())
            }
        };
        if self.merge_topics.is_empty() {
            Ok(corpus)
        } else {
            Ok(corpus.merge_topics(&self.merge_topics)?)
        }
    }
}

fn first_duplicate<T: Ord + Copy + std::fmt::Display>(items: &[T]) -> Option<T> {
    let mut seen = BTreeSet::new();
    items.iter().copied().find(|x| !seen.insert(*x))
}
