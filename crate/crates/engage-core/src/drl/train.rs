//! Double DQN training on logged transitions, plus the reward rule the
//! transitions carry.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::net::{batch_loss_grad, Adam, GradBuf, QNetwork};
use crate::scoring::ProblemKind;
use crate::seeded_rng;

/// Fixed action order; index into the network's output layer.
pub const ACTIONS: [ProblemKind; 3] = ProblemKind::ALL;

pub fn action_index(kind: ProblemKind) -> usize {
    match kind {
        ProblemKind::Ps => 0,
        ProblemKind::Guided => 1,
        ProblemKind::Buggy => 2,
    }
}

/// One logged decision: state observed, action served, reward credited, and
/// the state at the next decision point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: ProblemKind,
    pub reward: f64,
    pub next_state: Vec<f64>,
    pub terminal: bool,
    pub student_id: u32,
    pub decision_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct DdqnConfig {
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_discount")]
    pub discount: f64,
    #[serde(default = "default_batch_size")]
    pub batch_size: usize,
    /// Gradient steps between target-network copies.
    #[serde(default = "default_target_sync_interval")]
    pub target_sync_interval: usize,
    #[serde(default = "default_epochs")]
    pub epochs: usize,
    #[serde(default = "default_train_seed")]
    pub seed: u64,
    #[serde(default = "default_held_out_fraction")]
    pub held_out_fraction: f64,
}

fn default_learning_rate() -> f64 {
    1e-3
}
fn default_discount() -> f64 {
    0.99
}
fn default_batch_size() -> usize {
    100
}
fn default_target_sync_interval() -> usize {
    50
}
fn default_epochs() -> usize {
    60
}
fn default_train_seed() -> u64 {
    0
}
fn default_held_out_fraction() -> f64 {
    0.2
}

impl Default for DdqnConfig {
    fn default() -> Self {
        DdqnConfig {
            learning_rate: default_learning_rate(),
            discount: default_discount(),
            batch_size: default_batch_size(),
            target_sync_interval: default_target_sync_interval(),
            epochs: default_epochs(),
            seed: default_train_seed(),
            held_out_fraction: default_held_out_fraction(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_mse: f64,
    pub held_out_mse: f64,
}

/// Training output: the checkpoint with the lowest held-out error plus the
/// full loss history.
#[derive(Debug, Clone)]
pub struct TrainedQ {
    pub network: QNetwork,
    pub loss_curve: Vec<EpochLoss>,
    pub best_epoch: usize,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("dataset has {got} transitions, need at least {need}")]
    DatasetTooSmall { got: usize, need: usize },
    #[error("transition {index}: state width {got}, network expects {want}")]
    ShapeMismatch {
        index: usize,
        got: usize,
        want: usize,
    },
    #[error("discount must be in (0, 1], got {0}")]
    BadDiscount(f64),
    #[error("held-out fraction must be in [0, 1), got {0}")]
    BadHeldOutFraction(f64),
    #[error("batch size must be positive")]
    ZeroBatch,
    #[error("target sync interval must be positive")]
    ZeroSyncInterval,
    #[error("non-finite weights after epoch {epoch}")]
    NonFiniteWeights { epoch: usize },
    #[error("transition {index} is not finite")]
    NonFiniteTransition { index: usize },
}

#[derive(Debug, Error)]
pub enum RewardError {
    #[error("test score {0} outside [0, 100]")]
    ScoreOutOfRange(f64),
    #[error("normalized problem time {0} outside [0, 1]")]
    TimeOutOfRange(f64),
}

/// Reward for one decision: the credited test score shrunk by the share of
/// available time the problem consumed.
pub fn compute_reward(test_score: f64, problem_time: f64) -> Result<f64, RewardError> {
    if !(0.0..=100.0).contains(&test_score) || !test_score.is_finite() {
        return Err(RewardError::ScoreOutOfRange(test_score));
    }
    if !(0.0..=1.0).contains(&problem_time) || !problem_time.is_finite() {
        return Err(RewardError::TimeOutOfRange(problem_time));
    }
    Ok(test_score * (1.0 - problem_time))
}

/// Duration bounds for one curriculum level, fitted on the training corpus
/// and frozen with the model so the reward's time share is computed the same
/// way wherever the model travels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LevelTimeNorm {
    pub level: u8,
    pub min: f64,
    pub max: f64,
}

/// Fits per-level min-max duration bounds from `(level, seconds)` pairs.
pub fn fit_level_time_norms<I>(durations: I) -> Vec<LevelTimeNorm>
where
    I: IntoIterator<Item = (u8, f64)>,
{
    let mut by_level: std::collections::BTreeMap<u8, (f64, f64)> =
        std::collections::BTreeMap::new();
    for (level, seconds) in durations {
        let entry = by_level
            .entry(level)
            .or_insert((f64::INFINITY, f64::NEG_INFINITY));
        entry.0 = entry.0.min(seconds);
        entry.1 = entry.1.max(seconds);
    }
    by_level
        .into_iter()
        .map(|(level, (min, max))| LevelTimeNorm { level, min, max })
        .collect()
}

/// Maps a duration into the unit interval using its level's bounds, clamped.
/// A level the corpus never saw, or one with a degenerate span, contributes
/// no time pressure at all.
pub fn normalize_problem_time(norms: &[LevelTimeNorm], level: u8, seconds: f64) -> f64 {
    let Some(norm) = norms.iter().find(|n| n.level == level) else {
        return 0.0;
    };
    let span = norm.max - norm.min;
    if span <= 0.0 {
        return 0.0;
    }
    ((seconds - norm.min) / span).clamp(0.0, 1.0)
}

/// Per-transition regression targets. Terminal rows take the bare reward;
/// the rest bootstrap by letting the online network pick the next action and
/// the target network price it.
pub fn ddqn_targets(
    batch: &[&Transition],
    online: &QNetwork,
    target: &QNetwork,
    discount: f64,
) -> Result<Vec<f64>, TrainError> {
    if online.dims() != target.dims() {
        return Err(TrainError::ShapeMismatch {
            index: 0,
            got: target.input_dim(),
            want: online.input_dim(),
        });
    }
    let mut out = Vec::with_capacity(batch.len());
    for (index, t) in batch.iter().enumerate() {
        if t.terminal {
            out.push(t.reward);
            continue;
        }
        if t.next_state.len() != online.input_dim() {
            return Err(TrainError::ShapeMismatch {
                index,
                got: t.next_state.len(),
                want: online.input_dim(),
            });
        }
        let q_online = online.forward(&t.next_state);
        let best = argmax(&q_online);
        let q_target = target.forward(&t.next_state);
        out.push(t.reward + discount * q_target[best]);
    }
    Ok(out)
}

/// Lowest index wins ties, matching the fixed action order.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Offline Double DQN fit. Deterministic for a given config: the seed drives
/// initialization, the held-out split, and every epoch's batch order.
pub fn train_ddqn(
    dataset: &[Transition],
    dims: &[usize],
    config: &DdqnConfig,
) -> Result<TrainedQ, TrainError> {
    if !(0.0..=1.0).contains(&config.discount) || config.discount == 0.0 {
        return Err(TrainError::BadDiscount(config.discount));
    }
    if !(0.0..1.0).contains(&config.held_out_fraction) {
        return Err(TrainError::BadHeldOutFraction(config.held_out_fraction));
    }
    if config.batch_size == 0 {
        return Err(TrainError::ZeroBatch);
    }
    if config.target_sync_interval == 0 {
        return Err(TrainError::ZeroSyncInterval);
    }
    let state_dim = dims[0];
    for (index, t) in dataset.iter().enumerate() {
        if t.state.len() != state_dim || (!t.terminal && t.next_state.len() != state_dim) {
            return Err(TrainError::ShapeMismatch {
                index,
                got: t.state.len(),
                want: state_dim,
            });
        }
        let finite = t
            .state
            .iter()
            .chain(t.next_state.iter())
            .all(|v| v.is_finite());
        if !finite || !t.reward.is_finite() {
            return Err(TrainError::NonFiniteTransition { index });
        }
    }

    let mut rng = seeded_rng(config.seed);
    let mut indices: Vec<usize> = (0..dataset.len()).collect();
    indices.shuffle(&mut rng);
    let held_out_len = (config.held_out_fraction * dataset.len() as f64).ceil() as usize;
    let (held_out_idx, train_idx) = indices.split_at(held_out_len);
    if train_idx.len() < config.batch_size {
        return Err(TrainError::DatasetTooSmall {
            got: train_idx.len(),
            need: config.batch_size,
        });
    }
    let held_out: Vec<&Transition> = held_out_idx.iter().map(|&i| &dataset[i]).collect();
    let mut train: Vec<usize> = train_idx.to_vec();

    let mut online = QNetwork::he_init(dims, &mut rng);
    let mut target = online.clone();
    let mut opt = Adam::new(&online, config.learning_rate);
    let mut grad = GradBuf::zeros_like(&online);
    let mut grad_steps = 0usize;

    let mut loss_curve = Vec::with_capacity(config.epochs);
    let mut best: Option<(usize, QNetwork, f64)> = None;

    for epoch in 0..config.epochs {
        train.shuffle(&mut rng);
        let mut train_acc = 0.0;
        let mut train_rows = 0usize;
        for chunk in train.chunks(config.batch_size) {
            let batch: Vec<&Transition> = chunk.iter().map(|&i| &dataset[i]).collect();
            let targets = ddqn_targets(&batch, &online, &target, config.discount)?;
            let rows: Vec<(Vec<f64>, usize, f64)> = batch
                .iter()
                .zip(&targets)
                .map(|(t, &y)| (t.state.clone(), action_index(t.action), y))
                .collect();
            train_acc += batch_loss_grad(&online, &rows, &mut grad) * rows.len() as f64;
            train_rows += rows.len();
            opt.step(&mut online, &grad);
            grad_steps += 1;
            if grad_steps % config.target_sync_interval == 0 {
                target = online.clone();
            }
        }
        if !online.is_finite() {
            return Err(TrainError::NonFiniteWeights { epoch });
        }
        let held_out_mse = if held_out.is_empty() {
            train_acc / train_rows as f64
        } else {
            let targets = ddqn_targets(&held_out, &online, &target, config.discount)?;
            let rows: Vec<(Vec<f64>, usize, f64)> = held_out
                .iter()
                .zip(&targets)
                .map(|(t, &y)| (t.state.clone(), action_index(t.action), y))
                .collect();
            super::net::batch_loss(&online, &rows)
        };
        loss_curve.push(EpochLoss {
            epoch,
            train_mse: train_acc / train_rows as f64,
            held_out_mse,
        });
        let improved = best.as_ref().map_or(true, |(_, _, b)| held_out_mse < *b);
        if improved {
            best = Some((epoch, online.clone(), held_out_mse));
        }
    }

    let (best_epoch, network, _) = best.expect("at least one epoch");
    Ok(TrainedQ {
        network,
        loss_curve,
        best_epoch,
    })
}
