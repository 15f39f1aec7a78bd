//! Offline Double DQN: feature extraction from session histories, reward
//! computation, network training on logged transitions, and greedy action
//! selection for the adaptive condition.

mod features;
mod net;
mod policy;
mod train;

pub use features::{
    extract_raw_features, extract_state, AttemptSummary, FeatureError, FeatureRegistry, NormKind,
    NormalizationConstants, StateVector, StudentHistory, STATE_DIM,
};
pub use net::{batch_loss, batch_loss_grad, Adam, GradBuf, QNetwork};
pub use policy::{select_action, ModelError, TrainedPolicy, MODEL_SCHEMA};
pub use train::{
    compute_reward, ddqn_targets, fit_level_time_norms, normalize_problem_time, train_ddqn,
    DdqnConfig, EpochLoss, LevelTimeNorm, RewardError, TrainError, TrainedQ, Transition, ACTIONS,
};
