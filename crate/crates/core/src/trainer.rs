//! Incremental trainer contract and the built-in hashed logistic-regression
//! trainer.
//!
//! Features are signed hashed unigram counts: FNV-1a 64 of each
//! whitespace-separated token, bucket = low bits, sign = top bit. The model
//! minimizes per-example logistic loss plus `l2 / 2 * ||w||^2` (bias not
//! regularized) with plain SGD. State survives across `train_stage` calls so
//! every stage warm-starts from the previous one.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Label;
use crate::seed::{fnv1a64, stream, Tag};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrainerError {
    #[error("stage has no examples")]
    EmptyStage,
    #[error("invalid trainer config: {0}")]
    InvalidConfig(String),
    #[error("failed to spawn external trainer: {0}")]
    SpawnFailure(String),
    #[error("external trainer handshake failed: {0}")]
    HandshakeFailure(String),
    #[error("external trainer protocol error: {0}")]
    Protocol(String),
}

/// One training pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainExample {
    pub text: String,
    pub label: Label,
}

/// A stateful, warm-starting model.
pub trait Trainer {
    /// Trains one stage on `examples`, continuing from the current state.
    fn train_stage(&mut self, examples: &[TrainExample]) -> Result<(), TrainerError>;

    /// Check-worthiness probabilities, one per text, in input order.
    /// Does not change model state.
    fn score(&mut self, texts: &[&str]) -> Result<Vec<f64>, TrainerError>;

    /// Returns to the untrained state.
    fn reset(&mut self) -> Result<(), TrainerError>;

    fn stages_trained(&self) -> usize;
}

impl<T: Trainer + ?Sized> Trainer for &mut T {
    fn train_stage(&mut self, examples: &[TrainExample]) -> Result<(), TrainerError> {
        (**self).train_stage(examples)
    }
    fn score(&mut self, texts: &[&str]) -> Result<Vec<f64>, TrainerError> {
        (**self).score(texts)
    }
    fn reset(&mut self) -> Result<(), TrainerError> {
        (**self).reset()
    }
    fn stages_trained(&self) -> usize {
        (**self).stages_trained()
    }
}

/// Creates a fresh trainer for each target topic.
pub trait TrainerFactory {
    type Trainer: Trainer;

    /// `seed` is the per-run stream seed; implementations mix it with their own.
    fn create(&self, seed: u64) -> Result<Self::Trainer, TrainerError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TrainerKind {
    #[default]
    Builtin,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerConfig {
    pub kind: TrainerKind,
    pub hash_dim: usize,
    pub learning_rate: f64,
    pub l2: f64,
    pub epochs_per_stage: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub external_cmd: Option<String>,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        TrainerConfig {
            kind: TrainerKind::Builtin,
            hash_dim: 1 << 18,
            learning_rate: 0.1,
            l2: 1e-4,
            epochs_per_stage: 3,
            seed: 0,
            external_cmd: None,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<(), TrainerError> {
        let bad = |m: &str| Err(TrainerError::InvalidConfig(m.into()));
        if !self.hash_dim.is_power_of_two() || self.hash_dim < 1 << 8 {
            return bad("hash_dim must be a power of two >= 256");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return bad("l2 must be non-negative");
        }
        if self.learning_rate * self.l2 >= 1.0 {
            return bad("learning_rate * l2 must be below 1");
        }
        if self.epochs_per_stage == 0 {
            return bad("epochs_per_stage must be positive");
        }
        match (self.kind, &self.external_cmd) {
            (TrainerKind::External, None) => bad("external trainer needs external_cmd"),
            (TrainerKind::Builtin, Some(_)) => {
                bad("external_cmd is only valid for kind = external")
            }
            _ => Ok(()),
        }
    }
}

/// Sparse feature vector, sorted by index with merged duplicates.
pub type Features = Vec<(usize, f64)>;

/// Signed hashed unigram counts of `text`.
pub fn hashed_features(text: &str, dim: usize) -> Features {
    debug_assert!(dim.is_power_of_two());
    let mut raw: Vec<(usize, f64)> = text
        .split_whitespace()
        .map(|tok| {
            let h = fnv1a64(tok.as_bytes());
            let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
            ((h as usize) & (dim - 1), sign)
        })
        .collect();
    raw.sort_by_key(|&(i, _)| i);
    let mut out: Features = Vec::with_capacity(raw.len());
    for (i, v) in raw {
        match out.last_mut() {
            Some((j, acc)) if *j == i => *acc += v,
            _ => out.push((i, v)),
        }
    }
    out
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + libm::exp(-z))
    } else {
        let e = libm::exp(z);
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + libm::log1p(libm::exp(-z))
    } else {
        libm::log1p(libm::exp(z))
    }
}

fn margin(weights: &[f64], bias: f64, x: &[(usize, f64)]) -> f64 {
    bias + x.iter().map(|&(j, v)| weights[j] * v).sum::<f64>()
}

/// Regularized logistic loss of one example.
pub fn logistic_loss(weights: &[f64], bias: f64, x: &[(usize, f64)], label: Label, l2: f64) -> f64 {
    let z = margin(weights, bias, x);
    let reg = 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>();
    softplus(z) - label.target() * z + reg
}

/// Dense gradient of [`logistic_loss`] with respect to `(weights, bias)`.
pub fn logistic_gradient(
    weights: &[f64],
    bias: f64,
    x: &[(usize, f64)],
    label: Label,
    l2: f64,
) -> (Vec<f64>, f64) {
    let g = sigmoid(margin(weights, bias, x)) - label.target();
    let mut grad: Vec<f64> = weights.iter().map(|w| l2 * w).collect();
    for &(j, v) in x {
        grad[j] += g * v;
    }
    (grad, g)
}

/// Snapshot of a [`LinearTrainer`]'s learned state.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearState {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub stages_trained: usize,
}

/// Hashed bag-of-words logistic regression trained with SGD.
///
/// Weights are stored as `scale * v` so the L2 shrink of every coordinate
/// costs O(1) per step instead of O(hash_dim).
#[derive(Debug, Clone)]
pub struct LinearTrainer {
    cfg: TrainerConfig,
    v: Vec<f64>,
    scale: f64,
    bias: f64,
    stages: usize,
}

const MIN_SCALE: f64 = 1e-9;

impl LinearTrainer {
    pub fn new(cfg: TrainerConfig) -> Result<Self, TrainerError> {
        if cfg.kind != TrainerKind::Builtin {
            return Err(TrainerError::InvalidConfig(
                "not a builtin trainer config".into(),
            ));
        }
        cfg.validate()?;
        Ok(LinearTrainer {
            v: vec![0.0; cfg.hash_dim],
            cfg,
            scale: 1.0,
            bias: 0.0,
            stages: 0,
        })
    }

    pub fn config(&self) -> &TrainerConfig {
        &self.cfg
    }

    pub fn state(&self) -> LinearState {
        LinearState {
            weights: self.v.iter().map(|x| x * self.scale).collect(),
            bias: self.bias,
            stages_trained: self.stages,
        }
    }

    /// Restores a snapshot taken from a trainer with the same `hash_dim`.
    pub fn set_state(&mut self, state: LinearState) -> Result<(), TrainerError> {
        if state.weights.len() != self.cfg.hash_dim {
            return Err(TrainerError::InvalidConfig(
                "snapshot has a different hash_dim".into(),
            ));
        }
        self.v = state.weights;
        self.scale = 1.0;
        self.bias = state.bias;
        self.stages = state.stages_trained;
        Ok(())
    }

    /// Probability for one text under the current weights.
    pub fn predict(&self, text: &str) -> f64 {
        let x = hashed_features(text, self.cfg.hash_dim);
        let z = self.bias + self.scale * x.iter().map(|&(j, v)| self.v[j] * v).sum::<f64>();
        sigmoid(z)
    }

    /// Folds the lazy scale into the stored weights, so the state between
    /// stages is exactly what [`LinearTrainer::state`] reports.
    fn fold_scale(&mut self) {
        if self.scale != 1.0 {
            let s = self.scale;
            self.v.iter_mut().for_each(|w| *w *= s);
            self.scale = 1.0;
        }
    }

    /// One SGD step: `w -= lr * grad` for the loss of `(x, label)`.
    pub fn sgd_step(&mut self, x: &[(usize, f64)], label: Label) {
        let lr = self.cfg.learning_rate;
        let z = self.bias + self.scale * x.iter().map(|&(j, v)| self.v[j] * v).sum::<f64>();
        let g = sigmoid(z) - label.target();
        self.scale *= 1.0 - lr * self.cfg.l2;
        if self.scale < MIN_SCALE {
            let s = self.scale;
            self.v.iter_mut().for_each(|w| *w *= s);
            self.scale = 1.0;
        }
        let step = lr * g / self.scale;
        for &(j, v) in x {
            self.v[j] -= step * v;
        }
        self.bias -= lr * g;
    }
}

impl Trainer for LinearTrainer {
    fn train_stage(&mut self, examples: &[TrainExample]) -> Result<(), TrainerError> {
        if examples.is_empty() {
            return Err(TrainerError::EmptyStage);
        }
        let mut batch: Vec<(Features, Label)> = examples
            .iter()
            .map(|e| (hashed_features(&e.text, self.cfg.hash_dim), e.label))
            .collect();
        batch.shuffle(&mut stream(
            self.cfg.seed,
            &[Tag::Str("train-stage"), Tag::Num(self.stages as u64)],
        ));
        for _ in 0..self.cfg.epochs_per_stage {
            for (x, y) in &batch {
                self.sgd_step(x, *y);
            }
        }
        self.fold_scale();
        self.stages += 1;
        Ok(())
    }

    fn score(&mut self, texts: &[&str]) -> Result<Vec<f64>, TrainerError> {
        Ok(texts.iter().map(|t| self.predict(t)).collect())
    }

    fn reset(&mut self) -> Result<(), TrainerError> {
        self.v.iter_mut().for_each(|w| *w = 0.0);
        self.scale = 1.0;
        self.bias = 0.0;
        self.stages = 0;
        Ok(())
    }

    fn stages_trained(&self) -> usize {
        self.stages
    }
}

/// Builds [`LinearTrainer`]s whose seed mixes the config seed with the run seed.
#[derive(Debug, Clone)]
pub struct LinearTrainerFactory {
    pub config: TrainerConfig,
}

impl TrainerFactory for LinearTrainerFactory {
    type Trainer = LinearTrainer;

    fn create(&self, seed: u64) -> Result<LinearTrainer, TrainerError> {
        let mut cfg = self.config.clone();
        cfg.seed = crate::seed::derive_seed(cfg.seed, &[Tag::Num(seed)]);
        LinearTrainer::new(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_cfg() -> TrainerConfig {
        TrainerConfig {
            hash_dim: 1 << 10,
            ..TrainerConfig::default()
        }
    }

    fn ex(text: &str, cw: bool) -> TrainExample {
        TrainExample {
            text: text.into(),
            label: if cw {
                Label::CheckWorthy
            } else {
                Label::NotCheckWorthy
            },
        }
    }

    #[test]
    fn untrained_scores_half() {
        let mut t = LinearTrainer::new(TrainerConfig::default()).unwrap();
        assert_eq!(t.score(&["anything at all", ""]).unwrap(), [0.5, 0.5]);
    }

    #[test]
    fn empty_stage_rejected() {
        let mut t = LinearTrainer::new(small_cfg()).unwrap();
        assert_eq!(t.train_stage(&[]), Err(TrainerError::EmptyStage));
    }

    #[test]
    fn config_validation() {
        let mut c = small_cfg();
        c.hash_dim = 100;
        assert!(c.validate().is_err());
        let mut c = small_cfg();
        c.hash_dim = 128;
        assert!(c.validate().is_err());
        let mut c = small_cfg();
        c.kind = TrainerKind::External;
        assert!(c.validate().is_err());
        c.external_cmd = Some("python3 adapter.py".into());
        assert!(c.validate().is_ok());
        assert!(LinearTrainer::new(c).is_err());
        let mut c = small_cfg();
        c.epochs_per_stage = 0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn features_are_signed_counts() {
        let f = hashed_features("a b a", 1 << 12);
        let total: f64 = f.iter().map(|(_, v)| v.abs()).sum();
        assert_eq!(total, 3.0);
        assert!(f.windows(2).all(|w| w[0].0 < w[1].0));
        assert!(hashed_features("", 256).is_empty());
    }

    fn separable(n: usize, seed: u64) -> Vec<TrainExample> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|i| {
                let cw = i % 3 == 0;
                let mut words: Vec<String> = (0..8)
                    .map(|_| format!("w{}", rng.gen_range(0..50)))
                    .collect();
                if cw {
                    words.insert(rng.gen_range(0..8), "zzclaim".into());
                }
                ex(&words.join(" "), cw)
            })
            .collect()
    }

    #[test]
    fn separable_stage_is_learned() {
        let data = separable(200, 1);
        let mut t = LinearTrainer::new(small_cfg()).unwrap();
        t.train_stage(&data).unwrap();
        let texts: Vec<&str> = data.iter().map(|e| e.text.as_str()).collect();
        let scores = t.score(&texts).unwrap();
        let correct = scores
            .iter()
            .zip(&data)
            .filter(|(p, e)| (**p >= 0.5) == e.label.is_check_worthy())
            .count();
        assert!(correct as f64 / 200.0 >= 0.95, "accuracy {correct}/200");
        let s = t.score(&["zzclaim zzclaim", "filler filler"]).unwrap();
        assert!(s[0] > s[1]);
    }

    #[test]
    fn deterministic_and_pure() {
        let data = separable(60, 2);
        let mut a = LinearTrainer::new(small_cfg()).unwrap();
        let mut b = LinearTrainer::new(small_cfg()).unwrap();
        for chunk in data.chunks(20) {
            a.train_stage(chunk).unwrap();
            b.train_stage(chunk).unwrap();
        }
        let texts: Vec<&str> = data.iter().map(|e| e.text.as_str()).collect();
        let sa = a.score(&texts).unwrap();
        assert_eq!(sa, b.score(&texts).unwrap());
        assert_eq!(sa, a.score(&texts).unwrap());
        assert_eq!(a.stages_trained(), 3);
        assert!(sa.iter().all(|p| p.is_finite() && (0.0..=1.0).contains(p)));
    }

    #[test]
    fn warm_start_continues_from_snapshot() {
        let data = separable(80, 3);
        let mut a = LinearTrainer::new(small_cfg()).unwrap();
        a.train_stage(&data[..40]).unwrap();
        let after_first = a.state();

        let mut b = LinearTrainer::new(small_cfg()).unwrap();
        b.set_state(after_first.clone()).unwrap();
        assert_eq!(b.state(), after_first);

        a.train_stage(&data[40..]).unwrap();
        b.train_stage(&data[40..]).unwrap();
        assert_eq!(a.state(), b.state());
        assert_eq!(a.state().stages_trained, 2);
    }

    #[test]
    fn reset_returns_to_untrained() {
        let mut t = LinearTrainer::new(small_cfg()).unwrap();
        t.train_stage(&separable(30, 4)).unwrap();
        t.reset().unwrap();
        assert_eq!(t.score(&["zzclaim"]).unwrap(), [0.5]);
        assert_eq!(t.stages_trained(), 0);
    }

    #[test]
    fn sgd_step_matches_dense_gradient_step() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut cfg = small_cfg();
        cfg.hash_dim = 256;
        cfg.l2 = 0.01;
        cfg.learning_rate = 0.3;
        let mut t = LinearTrainer::new(cfg).unwrap();
        let w0: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        t.set_state(LinearState {
            weights: w0.clone(),
            bias: 0.2,
            stages_trained: 0,
        })
        .unwrap();
        let x: Features = vec![(3, 1.0), (17, -2.0), (200, 1.0)];
        let (g, gb) = logistic_gradient(&w0, 0.2, &x, Label::CheckWorthy, 0.01);
        t.sgd_step(&x, Label::CheckWorthy);
        let s = t.state();
        for j in 0..256 {
            assert!((s.weights[j] - (w0[j] - 0.3 * g[j])).abs() < 1e-12);
        }
        assert!((s.bias - (0.2 - 0.3 * gb)).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn scores_are_probabilities(texts in prop::collection::vec("[a-d ]{0,12}", 1..20), lr in 0.01f64..5.0) {
            let mut cfg = small_cfg();
            cfg.learning_rate = lr;
            let mut t = LinearTrainer::new(cfg).unwrap();
            let data: Vec<TrainExample> = texts.iter().enumerate().map(|(i, s)| ex(s, i % 2 == 0)).collect();
            t.train_stage(&data).unwrap();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            for p in t.score(&refs).unwrap() {
                prop_assert!(p.is_finite() && (0.0..=1.0).contains(&p));
            }
        }
    }
}
