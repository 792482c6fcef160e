//! Stage allocation and curriculum plans.
//!
//! Target-topic samples grow across stages: stage `i < S` receives
//! `floor(a * i / Y)` claims with divisor `Y = S(S+1)/2 + 2`, and the last
//! stage takes the remainder. Source claims are provisioned either
//! decrementally (the incremental sizes over `S - 1` stages, reversed) or in
//! equal shares (remainder to the earliest stages). The last stage never
//! holds source claims.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Claim, Corpus, Label};
use crate::seed::{stream, Tag};
use crate::similarity::TopicOrdering;

pub const DEFAULT_BUDGET: usize = 200;
pub const DEFAULT_MIN_TEST: usize = 50;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("invalid stage count {stages} for {context}")]
    InvalidStages {
        stages: usize,
        context: &'static str,
    },
    #[error("budget {budget} cannot fill {stages} stages")]
    InvalidBudget { budget: usize, stages: usize },
    #[error(
        "target topic has {size} claims; budget {budget} leaves fewer than {min_test} for testing"
    )]
    TargetTooSmall {
        size: usize,
        budget: usize,
        min_test: usize,
    },
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("similarity-ordered scheme requires a topic ordering")]
    MissingOrdering,
    #[error("topic ordering given for a scheme that does not use one")]
    UnexpectedOrdering,
    #[error("topic ordering does not match the corpus: {0}")]
    OrderingMismatch(String),
    #[error("unknown scheme `{0}`")]
    UnknownScheme(String),
}

/// How source claims are spread over the stages before the last.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provisioning {
    Decremental,
    Equivalent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "gtl-dec-inc")]
    GtlDecInc,
    #[serde(rename = "gtl-equ-inc")]
    GtlEquInc,
    #[serde(rename = "sgtl-dec-inc")]
    SgtlDecInc,
    #[serde(rename = "sgtl-equ-inc")]
    SgtlEquInc,
    #[serde(rename = "baseline")]
    Baseline,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::GtlDecInc,
        Scheme::GtlEquInc,
        Scheme::SgtlDecInc,
        Scheme::SgtlEquInc,
        Scheme::Baseline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::GtlDecInc => "gtl-dec-inc",
            Scheme::GtlEquInc => "gtl-equ-inc",
            Scheme::SgtlDecInc => "sgtl-dec-inc",
            Scheme::SgtlEquInc => "sgtl-equ-inc",
            Scheme::Baseline => "baseline",
        }
    }

    pub fn uses_ordering(self) -> bool {
        matches!(self, Scheme::SgtlDecInc | Scheme::SgtlEquInc)
    }

    /// `None` for the single-stage baseline.
    pub fn provisioning(self) -> Option<Provisioning> {
        match self {
            Scheme::GtlDecInc | Scheme::SgtlDecInc => Some(Provisioning::Decremental),
            Scheme::GtlEquInc | Scheme::SgtlEquInc => Some(Provisioning::Equivalent),
            Scheme::Baseline => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Scheme::ALL
            .into_iter()
            .find(|sc| {
                sc.as_str() == key || (key == "baseline-single-stage" && *sc == Scheme::Baseline)
            })
            .ok_or_else(|| ScheduleError::UnknownScheme(s.into()))
    }
}

/// Divisor for incremental allocation over `stages` stages.
pub fn divisor(stages: usize) -> Result<usize, ScheduleError> {
    if stages < 1 {
        return Err(ScheduleError::InvalidStages {
            stages,
            context: "divisor",
        });
    }
    Ok(stages * (stages + 1) / 2 + 2)
}

/// Increasing per-stage sizes for `budget` claims; the last stage takes the remainder.
pub fn incremental_sizes(budget: usize, stages: usize) -> Result<Vec<usize>, ScheduleError> {
    let y = divisor(stages)?;
    if budget < stages {
        return Err(ScheduleError::InvalidBudget { budget, stages });
    }
    let mut sizes: Vec<usize> = (1..stages).map(|i| budget * i / y).collect();
    let used: usize = sizes.iter().sum();
    sizes.push(budget - used);
    Ok(sizes)
}

fn check_source(n_src: usize, stages: usize) -> Result<(), ScheduleError> {
    if stages < 2 {
        return Err(ScheduleError::InvalidStages {
            stages,
            context: "source provisioning",
        });
    }
    if n_src < stages - 1 {
        return Err(ScheduleError::InvalidBudget {
            budget: n_src,
            stages: stages - 1,
        });
    }
    Ok(())
}

/// Non-increasing source sizes over stages `1..S`, zero in the last stage.
pub fn decremental_source_sizes(n_src: usize, stages: usize) -> Result<Vec<usize>, ScheduleError> {
    check_source(n_src, stages)?;
    let mut sizes = incremental_sizes(n_src, stages - 1)?;
    sizes.reverse();
    sizes.push(0);
    Ok(sizes)
}

/// Equal source shares over stages `1..S`, remainder one each to the
/// earliest stages, zero in the last stage.
pub fn equivalent_source_sizes(n_src: usize, stages: usize) -> Result<Vec<usize>, ScheduleError> {
    check_source(n_src, stages)?;
    let k = stages - 1;
    let (base, rem) = (n_src / k, n_src % k);
    let mut sizes: Vec<usize> = (0..k).map(|i| base + usize::from(i < rem)).collect();
    sizes.push(0);
    Ok(sizes)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationSizes {
    pub target_sizes: Vec<usize>,
    pub source_sizes: Vec<usize>,
}

impl AllocationSizes {
    pub fn stages(&self) -> usize {
        self.target_sizes.len()
    }

    pub fn for_scheme(
        scheme: Scheme,
        stages: usize,
        budget: usize,
        n_src: usize,
    ) -> Result<Self, ScheduleError> {
        match scheme.provisioning() {
            None => {
                if stages != 1 {
                    return Err(ScheduleError::InvalidStages {
                        stages,
                        context: "the single-stage baseline",
                    });
                }
                Ok(AllocationSizes {
                    target_sizes: alloc::vec![budget],
                    source_sizes: alloc::vec![n_src],
                })
            }
            Some(p) => {
                if stages < 2 {
                    return Err(ScheduleError::InvalidStages {
                        stages,
                        context: "a gradual scheme",
                    });
                }
                let source_sizes = match p {
                    Provisioning::Decremental => decremental_source_sizes(n_src, stages)?,
                    Provisioning::Equivalent => equivalent_source_sizes(n_src, stages)?,
                };
                Ok(AllocationSizes {
                    target_sizes: incremental_sizes(budget, stages)?,
                    source_sizes,
                })
            }
        }
    }
}

/// Sizes of the target-topic few-shot sample and its held-out remainder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitOptions {
    pub budget: usize,
    pub min_test: usize,
}

impl Default for SplitOptions {
    fn default() -> Self {
        SplitOptions {
            budget: DEFAULT_BUDGET,
            min_test: DEFAULT_MIN_TEST,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSplit {
    /// Few-shot training sample, in seeded-shuffled order.
    pub train_ids: Vec<String>,
    /// Held-out claims, in corpus order.
    pub test_ids: Vec<String>,
}

/// Draws a label-stratified few-shot sample of `opts.budget` claims from the
/// target topic; everything else is held out.
pub fn split_target(
    corpus: &Corpus,
    target_id: &str,
    opts: SplitOptions,
    seed: u64,
) -> Result<TargetSplit, ScheduleError> {
    if !corpus.has_topic(target_id) {
        return Err(ScheduleError::UnknownTopic(target_id.into()));
    }
    let claims = corpus.topic_claims(target_id);
    let n = claims.len();
    if n < opts.budget + opts.min_test || n <= opts.budget {
        return Err(ScheduleError::TargetTooSmall {
            size: n,
            budget: opts.budget,
            min_test: opts.min_test,
        });
    }
    let mut cw: Vec<&Claim> = claims
        .iter()
        .copied()
        .filter(|c| c.label == Label::CheckWorthy)
        .collect();
    let mut ncw: Vec<&Claim> = claims
        .iter()
        .copied()
        .filter(|c| c.label != Label::CheckWorthy)
        .collect();
    let mut rng = stream(seed, &[Tag::Str("split"), Tag::Str(target_id)]);
    cw.shuffle(&mut rng);
    ncw.shuffle(&mut rng);

    // Nearest integer to budget * |cw| / n, clamped so both classes can supply their share.
    let want_cw = (2 * opts.budget * cw.len() + n) / (2 * n);
    let take_cw = want_cw
        .min(cw.len())
        .max(opts.budget.saturating_sub(ncw.len()));
    let take_ncw = opts.budget - take_cw;

    let mut train: Vec<&Claim> = cw[..take_cw]
        .iter()
        .chain(&ncw[..take_ncw])
        .copied()
        .collect();
    train.shuffle(&mut rng);
    let chosen: BTreeSet<&str> = train.iter().map(|c| c.id.as_str()).collect();
    Ok(TargetSplit {
        train_ids: train.iter().map(|c| c.id.clone()).collect(),
        test_ids: claims
            .iter()
            .filter(|c| !chosen.contains(c.id.as_str()))
            .map(|c| c.id.clone())
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageAlloc {
    /// 1-based.
    pub index: usize,
    pub source_ids: Vec<String>,
    pub target_ids: Vec<String>,
}

/// Executable curriculum for one target topic.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StagePlan {
    pub scheme: Scheme,
    pub target: String,
    pub seed: u64,
    pub stages: Vec<StageAlloc>,
    pub test_ids: Vec<String>,
}

impl StagePlan {
    pub fn sizes(&self) -> AllocationSizes {
        AllocationSizes {
            target_sizes: self.stages.iter().map(|s| s.target_ids.len()).collect(),
            source_sizes: self.stages.iter().map(|s| s.source_ids.len()).collect(),
        }
    }

    /// Whether two plans bind the same claims to the same stages.
    pub fn same_allocation(&self, other: &StagePlan) -> bool {
        self.target == other.target
            && self.seed == other.seed
            && self.stages == other.stages
            && self.test_ids == other.test_ids
    }
}

/// Builds the stage plan for `scheme` with `stages` stages.
///
/// `ordering` must be given exactly for the similarity-ordered schemes and
/// must list every source topic once.
pub fn build_plan(
    corpus: &Corpus,
    target_id: &str,
    scheme: Scheme,
    stages: usize,
    opts: SplitOptions,
    seed: u64,
    ordering: Option<&TopicOrdering>,
) -> Result<StagePlan, ScheduleError> {
    match (scheme.uses_ordering(), ordering) {
        (true, None) => return Err(ScheduleError::MissingOrdering),
        (false, Some(_)) => return Err(ScheduleError::UnexpectedOrdering),
        _ => {}
    }
    let split = split_target(corpus, target_id, opts, seed)?;
    let pool = source_pool(corpus, target_id, seed, ordering)?;
    let sizes = AllocationSizes::for_scheme(scheme, stages, opts.budget, pool.len())?;

    let mut src = pool.into_iter();
    let mut tgt = split.train_ids.into_iter();
    let stages = sizes
        .target_sizes
        .iter()
        .zip(&sizes.source_sizes)
        .enumerate()
        .map(|(i, (&nt, &ns))| StageAlloc {
            index: i + 1,
            source_ids: src.by_ref().take(ns).collect(),
            target_ids: tgt.by_ref().take(nt).collect(),
        })
        .collect();
    Ok(StagePlan {
        scheme,
        target: target_id.into(),
        seed,
        stages,
        test_ids: split.test_ids,
    })
}

/// All source claim ids in the order they are sliced into stages.
fn source_pool(
    corpus: &Corpus,
    target_id: &str,
    seed: u64,
    ordering: Option<&TopicOrdering>,
) -> Result<Vec<String>, ScheduleError> {
    match ordering {
        None => {
            let mut ids: Vec<String> = corpus
                .source_claims(target_id)
                .into_iter()
                .map(|c| c.id.clone())
                .collect();
            ids.shuffle(&mut stream(
                seed,
                &[Tag::Str("source-pool"), Tag::Str(target_id)],
            ));
            Ok(ids)
        }
        Some(ord) => {
            if ord.target_id != target_id {
                return Err(ScheduleError::OrderingMismatch(alloc::format!(
                    "ordering is for `{}`, plan is for `{target_id}`",
                    ord.target_id
                )));
            }
            let listed: Vec<&str> = ord.topic_ids().collect();
            let unique: BTreeSet<&str> = listed.iter().copied().collect();
            let expected: BTreeSet<&str> = corpus.topic_ids().filter(|t| *t != target_id).collect();
            if unique.len() != listed.len() || unique != expected {
                return Err(ScheduleError::OrderingMismatch(
                    "ordering must list every source topic exactly once".into(),
                ));
            }
            let mut ids = Vec::new();
            for topic in listed {
                let mut topic_ids: Vec<String> = corpus
                    .topic_claims(topic)
                    .into_iter()
                    .map(|c| c.id.clone())
                    .collect();
                topic_ids.shuffle(&mut stream(
                    seed,
                    &[
                        Tag::Str("source-topic"),
                        Tag::Str(target_id),
                        Tag::Str(topic),
                    ],
                ));
                ids.extend(topic_ids);
            }
            Ok(ids)
        }
    }
}
