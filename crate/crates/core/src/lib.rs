//! Core of topicforge: gradual topic learning curricula for cross-topic
//! check-worthiness ranking.
//!
//! The crate is `no_std` (it only needs `alloc`). Everything here is pure
//! computation over in-memory corpora:
//!
//! - [`corpus`] and [`normalize`]: claim types, text normalization, topic merging.
//! - [`synthetic`]: seeded multi-topic corpora with planted vocabulary overlap.
//! - [`similarity`]: word-count topic vectors and cosine ordering of source topics.
//! - [`schedule`]: stage allocation arithmetic and executable stage plans.
//! - [`trainer`]: the incremental trainer contract and a hashed logistic-regression trainer.
//! - [`evaluation`]: ranking, average precision, MAP.
//! - [`runner`]: leave-one-topic-out execution of plans and sweep aggregation.
//!
//! File formats, the external trainer process client and the CLI live in the
//! `topicforge` crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod corpus;
pub mod evaluation;
pub mod normalize;
pub mod runner;
pub mod schedule;
pub mod seed;
pub mod similarity;
pub mod synthetic;
pub mod trainer;

pub use corpus::{Claim, Corpus, CorpusError, Label};
pub use evaluation::{ApDenominator, EvalError, RankedList, RunReport, TopicResult};
pub use normalize::{normalize_text, NormalizationConfig};
pub use runner::{RunError, SweepConfig, SweepResult};
pub use schedule::{Scheme, StagePlan};
pub use similarity::{TopicOrdering, TopicVector};
pub use trainer::{LinearTrainer, TrainExample, Trainer, TrainerConfig, TrainerError};
