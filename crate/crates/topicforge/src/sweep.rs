//! Parallel sweep execution and trainer selection.
//!
//! Tasks are independent `(cell, seed, target)` units, each with its own
//! trainer. Outcomes are collected in task order and reduced exactly as the
//! sequential runner does, so the result does not depend on the job count.

use rayon::prelude::*;
use topicforge_core::runner::{
    aggregate, run_all, run_task, sweep_tasks, FailMode, NoProbe, RunErrorKind, TaskOutcome,
};
use topicforge_core::schedule::Scheme;
use topicforge_core::trainer::{LinearTrainerFactory, TrainerFactory, TrainerKind};
use topicforge_core::{
    Corpus, LinearTrainer, RunError, SweepConfig, SweepResult, TrainExample, Trainer,
    TrainerConfig, TrainerError,
};

use crate::external::{ExternalTrainer, ExternalTrainerFactory};

/// Either trainer, chosen by [`TrainerConfig::kind`].
#[derive(Debug)]
pub enum AnyTrainer {
    Builtin(LinearTrainer),
    External(ExternalTrainer),
}

impl Trainer for AnyTrainer {
    fn train_stage(&mut self, examples: &[TrainExample]) -> Result<(), TrainerError> {
        match self {
            AnyTrainer::Builtin(t) => t.train_stage(examples),
            AnyTrainer::External(t) => t.train_stage(examples),
        }
    }

    fn score(&mut self, texts: &[&str]) -> Result<Vec<f64>, TrainerError> {
        match self {
            AnyTrainer::Builtin(t) => t.score(texts),
            AnyTrainer::External(t) => t.score(texts),
        }
    }

    fn reset(&mut self) -> Result<(), TrainerError> {
        match self {
            AnyTrainer::Builtin(t) => t.reset(),
            AnyTrainer::External(t) => t.reset(),
        }
    }

    fn stages_trained(&self) -> usize {
        match self {
            AnyTrainer::Builtin(t) => t.stages_trained(),
            AnyTrainer::External(t) => t.stages_trained(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnyTrainerFactory {
    pub config: TrainerConfig,
}

impl TrainerFactory for AnyTrainerFactory {
    type Trainer = AnyTrainer;

    fn create(&self, seed: u64) -> Result<AnyTrainer, TrainerError> {
        let config = self.config.clone();
        Ok(match config.kind {
            TrainerKind::Builtin => {
                AnyTrainer::Builtin(LinearTrainerFactory { config }.create(seed)?)
            }
            TrainerKind::External => {
                AnyTrainer::External(ExternalTrainerFactory { config }.create(seed)?)
            }
        })
    }
}

/// Runs the sweep on `jobs` worker threads (`jobs <= 1` runs sequentially).
///
/// Failure handling matches [`run_all`]: the first trainer failure in task
/// order aborts, and under [`FailMode::Strict`] so does the first failure of
/// any kind.
pub fn run_parallel<F>(
    cfg: &SweepConfig,
    corpus: &Corpus,
    factory: &F,
    mode: FailMode,
    jobs: usize,
) -> Result<SweepResult, RunError>
where
    F: TrainerFactory + Sync,
{
    if jobs <= 1 {
        return run_all(cfg, corpus, factory, mode, &mut NoProbe);
    }
    let fail = |kind: RunErrorKind| RunError {
        target: String::new(),
        scheme: cfg.schemes.first().copied().unwrap_or(Scheme::Baseline),
        stages: 0,
        kind,
    };
    cfg.validate().map_err(|m| fail(RunErrorKind::Config(m)))?;
    if corpus.num_topics() < 2 {
        return Err(fail(RunErrorKind::TooFewTopics(corpus.num_topics())));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| fail(RunErrorKind::Config(e.to_string())))?;
    let tasks = sweep_tasks(cfg, corpus);
    let outcomes: Vec<TaskOutcome> = pool.install(|| {
        tasks
            .par_iter()
            .map(|task| run_task(corpus, task, cfg, factory, &mut NoProbe))
            .collect()
    });
    if let Some(e) = outcomes
        .iter()
        .filter_map(|o| o.as_ref().err())
        .find(|e| e.is_trainer_failure() || mode == FailMode::Strict)
    {
        return Err(e.clone());
    }
    Ok(aggregate(cfg, corpus, &tasks, &outcomes))
}
