//! Leave-one-topic-out execution of stage plans and sweep aggregation.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Claim, Corpus};
use crate::evaluation::{
    self, ApDenominator, EvalError, Fingerprint, RunReport, TopicAllocation, TopicResult,
};
use crate::schedule::{self, AllocationSizes, ScheduleError, Scheme, SplitOptions, StagePlan};
use crate::seed::{derive_seed, stream, Tag};
use crate::similarity::{self, SimilarityError};
use crate::trainer::{TrainExample, Trainer, TrainerConfig, TrainerError, TrainerFactory};

pub const DEFAULT_STAGE_COUNTS: [usize; 5] = [2, 3, 6, 8, 10];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RunErrorKind {
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Trainer(#[from] TrainerError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("stage {0} has no trainable examples")]
    EmptyStage(usize),
    #[error("corpus needs at least two topics, found {0}")]
    TooFewTopics(usize),
    #[error("invalid sweep config: {0}")]
    Config(String),
}

/// A failure annotated with the cell it happened in.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("target `{target}`, {scheme}, {stages} stages: {kind}")]
pub struct RunError {
    pub target: String,
    pub scheme: Scheme,
    pub stages: usize,
    pub kind: RunErrorKind,
}

impl RunError {
    pub fn is_trainer_failure(&self) -> bool {
        matches!(self.kind, RunErrorKind::Trainer(_))
    }
}

/// Settings shared by every topic run of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSettings {
    pub split: SplitOptions,
    pub ap_denominator: ApDenominator,
}

impl Default for RunSettings {
    fn default() -> Self {
        RunSettings {
            split: SplitOptions::default(),
            ap_denominator: ApDenominator::Relevant,
        }
    }
}

/// Observes which claims reach the trainer. Used to check for leakage.
pub trait Probe {
    fn trained(&mut self, _target: &str, _stage: usize, _ids: &[&str]) {}
    fn scored(&mut self, _target: &str, _ids: &[&str]) {}
}

/// A probe that ignores everything.
pub struct NoProbe;

impl Probe for NoProbe {}

/// Outcome of one target topic.
#[derive(Debug, Clone, PartialEq)]
pub struct TopicRun {
    pub result: TopicResult,
    pub sizes: AllocationSizes,
    /// Examples dropped because their normalized text was empty.
    pub dropped_empty: usize,
}

/// Builds the plan for one target, computing the similarity ordering from
/// the target's few-shot sample when the scheme needs one.
pub fn plan_topic(
    corpus: &Corpus,
    target_id: &str,
    scheme: Scheme,
    stages: usize,
    split: SplitOptions,
    seed: u64,
) -> Result<StagePlan, RunErrorKind> {
    let ordering = if scheme.uses_ordering() {
        let sample = schedule::split_target(corpus, target_id, split, seed)?;
        let reference: Vec<&Claim> = sample
            .train_ids
            .iter()
            .filter_map(|id| corpus.get(id))
            .collect();
        Some(similarity::order_sources(corpus, target_id, &reference)?)
    } else {
        None
    };
    Ok(schedule::build_plan(
        corpus,
        target_id,
        scheme,
        stages,
        split,
        seed,
        ordering.as_ref(),
    )?)
}

/// Trains a fresh model through every stage of the plan for `target_id`,
/// then scores the held-out claims and computes their average precision.
#[allow(clippy::too_many_arguments)]
pub fn run_topic<F: TrainerFactory>(
    corpus: &Corpus,
    target_id: &str,
    scheme: Scheme,
    stages: usize,
    seed: u64,
    settings: &RunSettings,
    factory: &F,
    probe: &mut dyn Probe,
) -> Result<TopicRun, RunError> {
    let annotate = |kind: RunErrorKind| RunError {
        target: target_id.into(),
        scheme,
        stages,
        kind,
    };
    let plan =
        plan_topic(corpus, target_id, scheme, stages, settings.split, seed).map_err(annotate)?;
    let trainer_seed = derive_seed(seed, &[Tag::Str("trainer"), Tag::Str(target_id)]);
    let mut trainer = factory
        .create(trainer_seed)
        .map_err(|e| annotate(e.into()))?;
    execute_plan(corpus, &plan, settings.ap_denominator, &mut trainer, probe).map_err(annotate)
}

/// Runs an existing plan on `trainer`, which should be untrained.
pub fn execute_plan<T: Trainer>(
    corpus: &Corpus,
    plan: &StagePlan,
    ap_denominator: ApDenominator,
    trainer: &mut T,
    probe: &mut dyn Probe,
) -> Result<TopicRun, RunErrorKind> {
    let lookup = |id: &str| {
        corpus.get(id).ok_or_else(|| {
            RunErrorKind::Config(alloc::format!("plan references unknown claim `{id}`"))
        })
    };
    let mut dropped_empty = 0;
    for stage in &plan.stages {
        let mut batch: Vec<&Claim> = stage
            .source_ids
            .iter()
            .chain(&stage.target_ids)
            .map(|id| lookup(id))
            .collect::<Result<_, _>>()?;
        let before = batch.len();
        batch.retain(|c| !c.text.is_empty());
        dropped_empty += before - batch.len();
        if batch.is_empty() {
            return Err(RunErrorKind::EmptyStage(stage.index));
        }
        batch.shuffle(&mut stream(
            plan.seed,
            &[
                Tag::Str("stage"),
                Tag::Str(&plan.target),
                Tag::Num(stage.index as u64),
            ],
        ));
        let ids: Vec<&str> = batch.iter().map(|c| c.id.as_str()).collect();
        probe.trained(&plan.target, stage.index, &ids);
        let examples: Vec<TrainExample> = batch
            .iter()
            .map(|c| TrainExample {
                text: c.text.clone(),
                label: c.label,
            })
            .collect();
        trainer.train_stage(&examples)?;
    }

    let test: Vec<&Claim> = plan
        .test_ids
        .iter()
        .map(|id| lookup(id))
        .collect::<Result<_, _>>()?;
    let ids: Vec<&str> = test.iter().map(|c| c.id.as_str()).collect();
    probe.scored(&plan.target, &ids);
    let texts: Vec<&str> = test.iter().map(|c| c.text.as_str()).collect();
    let scores = trainer.score(&texts)?;
    let ranked = evaluation::rank(&test, &scores)?;
    Ok(TopicRun {
        result: TopicResult::from_ranking(&plan.target, &ranked, ap_denominator)?,
        sizes: plan.sizes(),
        dropped_empty,
    })
}

/// Grid and repeat settings of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub schemes: Vec<Scheme>,
    pub stage_counts: Vec<usize>,
    pub seeds: Vec<u64>,
    pub settings: RunSettings,
    pub trainer: TrainerConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            schemes: Scheme::ALL.to_vec(),
            stage_counts: DEFAULT_STAGE_COUNTS.to_vec(),
            seeds: (1..=5).collect(),
            settings: RunSettings::default(),
            trainer: TrainerConfig::default(),
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.schemes.is_empty() {
            return Err("no schemes".into());
        }
        if self.seeds.is_empty() {
            return Err("no seeds".into());
        }
        let budget = self.settings.split.budget;
        if self.schemes.iter().any(|s| *s != Scheme::Baseline) && self.stage_counts.is_empty() {
            return Err("no stage counts".into());
        }
        if let Some(s) = self.stage_counts.iter().find(|&&s| s < 1 || s > budget) {
            return Err(alloc::format!("stage count {s} outside [1, {budget}]"));
        }
        self.trainer.validate().map_err(|e| e.to_string())
    }

    /// `(scheme, stages)` cells in configuration order. The baseline is always
    /// a single stage regardless of `stage_counts`.
    pub fn cells(&self) -> Vec<(Scheme, usize)> {
        let mut cells = Vec::new();
        for &scheme in &self.schemes {
            if scheme == Scheme::Baseline {
                cells.push((scheme, 1));
            } else {
                cells.extend(self.stage_counts.iter().map(|&s| (scheme, s)));
            }
        }
        cells.dedup();
        cells
    }
}

/// One unit of sweep work: a target topic under one cell and seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Task {
    pub scheme: Scheme,
    pub stages: usize,
    pub seed: u64,
    pub target: String,
}

/// Every task of the sweep in deterministic order (cell, seed, topic).
pub fn sweep_tasks(cfg: &SweepConfig, corpus: &Corpus) -> Vec<Task> {
    let mut tasks = Vec::new();
    for (scheme, stages) in cfg.cells() {
        for &seed in &cfg.seeds {
            for target in corpus.topic_ids() {
                tasks.push(Task {
                    scheme,
                    stages,
                    seed,
                    target: target.into(),
                });
            }
        }
    }
    tasks
}

pub type TaskOutcome = Result<TopicRun, RunError>;

pub fn run_task<F: TrainerFactory>(
    corpus: &Corpus,
    task: &Task,
    cfg: &SweepConfig,
    factory: &F,
    probe: &mut dyn Probe,
) -> TaskOutcome {
    run_topic(
        corpus,
        &task.target,
        task.scheme,
        task.stages,
        task.seed,
        &cfg.settings,
        factory,
        probe,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicFailure {
    pub seed: u64,
    pub topic_id: String,
    pub error: String,
}

/// Aggregate of one `(scheme, stages)` cell across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub scheme: Scheme,
    pub stages: usize,
    /// Mean over seeds of the per-seed MAP; `None` when no seed produced one.
    pub mean_map: Option<f64>,
    /// Sample standard deviation of the per-seed MAP (0 for a single seed).
    pub std_map: Option<f64>,
    /// Per-topic AveP averaged over the seeds where the topic succeeded.
    pub per_topic: Vec<TopicResult>,
    pub runs: Vec<RunReport>,
    pub failures: Vec<TopicFailure>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub topics: Vec<String>,
    pub cells: Vec<CellResult>,
}

impl SweepResult {
    pub fn cell(&self, scheme: Scheme, stages: usize) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.scheme == scheme && c.stages == stages)
    }

    pub fn failure_count(&self) -> usize {
        self.cells.iter().map(|c| c.failures.len()).sum()
    }
}

fn mean_std(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        libm::sqrt(values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0))
    };
    (Some(mean), Some(std))
}

/// Reduces task outcomes (in [`sweep_tasks`] order) into per-cell results.
pub fn aggregate(
    cfg: &SweepConfig,
    corpus: &Corpus,
    tasks: &[Task],
    outcomes: &[TaskOutcome],
) -> SweepResult {
    let mut cells = Vec::new();
    for (scheme, stages) in cfg.cells() {
        let mut runs = Vec::new();
        let mut failures = Vec::new();
        let mut by_topic: BTreeMap<&str, Vec<&TopicResult>> = BTreeMap::new();
        for &seed in &cfg.seeds {
            let mut per_topic = Vec::new();
            let mut allocations = Vec::new();
            for (task, outcome) in tasks.iter().zip(outcomes) {
                if task.scheme != scheme || task.stages != stages || task.seed != seed {
                    continue;
                }
                match outcome {
                    Ok(run) => {
                        per_topic.push(run.result.clone());
                        allocations.push(TopicAllocation {
                            topic_id: task.target.clone(),
                            sizes: run.sizes.clone(),
                        });
                        by_topic.entry(&task.target).or_default().push(&run.result);
                    }
                    Err(e) => failures.push(TopicFailure {
                        seed,
                        topic_id: task.target.clone(),
                        error: e.kind.to_string(),
                    }),
                }
            }
            if let Ok(map) = evaluation::mean_average_precision(&per_topic) {
                runs.push(RunReport {
                    scheme,
                    stages,
                    per_topic,
                    map,
                    fingerprint: Fingerprint {
                        seed,
                        budget: cfg.settings.split.budget,
                        min_test: cfg.settings.split.min_test,
                        ap_denominator: cfg.settings.ap_denominator,
                        trainer: cfg.trainer.clone(),
                    },
                    allocations,
                });
            }
        }
        let maps: Vec<f64> = runs.iter().map(|r| r.map).collect();
        let (mean_map, std_map) = mean_std(&maps);
        let per_topic = by_topic
            .into_iter()
            .map(|(topic, results)| TopicResult {
                topic_id: topic.into(),
                avep: results.iter().map(|r| r.avep).sum::<f64>() / results.len() as f64,
                n_test: results[0].n_test,
                n_relevant: results[0].n_relevant,
            })
            .collect();
        cells.push(CellResult {
            scheme,
            stages,
            mean_map,
            std_map,
            per_topic,
            runs,
            failures,
        });
    }
    SweepResult {
        topics: corpus.topic_ids().map(String::from).collect(),
        cells,
    }
}

/// Whether topic failures stop the sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FailMode {
    /// Record failures and continue.
    #[default]
    Soft,
    /// Stop at the first failure.
    Strict,
}

/// Runs the full sweep sequentially.
///
/// Trainer failures always abort. Other topic failures are recorded in the
/// result under [`FailMode::Soft`] and abort under [`FailMode::Strict`].
pub fn run_all<F: TrainerFactory>(
    cfg: &SweepConfig,
    corpus: &Corpus,
    factory: &F,
    mode: FailMode,
    probe: &mut dyn Probe,
) -> Result<SweepResult, RunError> {
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
    let tasks = sweep_tasks(cfg, corpus);
    let mut outcomes = Vec::with_capacity(tasks.len());
    for task in &tasks {
        let outcome = run_task(corpus, task, cfg, factory, probe);
        if let Err(e) = &outcome {
            if e.is_trainer_failure() || mode == FailMode::Strict {
                return Err(e.clone());
            }
        }
        outcomes.push(outcome);
    }
    Ok(aggregate(cfg, corpus, &tasks, &outcomes))
}
