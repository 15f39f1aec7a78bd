//! A trained policy bundled with everything needed to reproduce its inputs:
//! the network, the feature layout, and the frozen normalization bounds.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::features::{
    extract_state, FeatureError, FeatureRegistry, NormalizationConstants, StateVector,
    StudentHistory, STATE_DIM,
};
use super::net::QNetwork;
use super::train::{argmax, DdqnConfig, EpochLoss, LevelTimeNorm, ACTIONS};
use crate::scoring::ProblemKind;

pub const MODEL_SCHEMA: &str = "engage.model.v1";

/// Immutable trained artifact; safe to share across sessions.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPolicy {
    pub network: QNetwork,
    pub registry: FeatureRegistry,
    pub normalization: NormalizationConstants,
    /// Reward-side duration bounds, fitted on the same corpus the network
    /// was trained on.
    pub time_norms: Vec<LevelTimeNorm>,
    pub config: DdqnConfig,
    pub loss_curve: Vec<EpochLoss>,
    pub best_epoch: usize,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a valid model document: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported model schema {found:?}, expected {MODEL_SCHEMA:?}")]
    Schema { found: String },
    #[error("malformed network: {0}")]
    Shape(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

/// Greedy action for a state: argmax over the three outputs, ties resolved
/// toward the lower index so PS beats Guided beats Buggy.
pub fn select_action(network: &QNetwork, state: &StateVector) -> ProblemKind {
    let q = network.forward(state);
    assert_eq!(q.len(), ACTIONS.len(), "policy network must have 3 outputs");
    ACTIONS[argmax(&q)]
}

impl TrainedPolicy {
    /// Extracts features for the decision point and picks the greedy action.
    /// Returns the action values alongside for decision logging.
    pub fn decide(
        &self,
        history: &StudentHistory,
    ) -> Result<(ProblemKind, [f64; 3]), FeatureError> {
        let state = extract_state(history, &self.registry, &self.normalization)?;
        let q = self.network.forward(&state);
        Ok((ACTIONS[argmax(&q)], [q[0], q[1], q[2]]))
    }

    /// Serializes the model as a one-line document whose leading fields
    /// carry the provenance every artifact records.
    pub fn to_json(&self, config_hash: &str, master_seed: u64) -> String {
        let doc = ModelDoc {
            schema: MODEL_SCHEMA.to_string(),
            config_hash: config_hash.to_string(),
            master_seed,
            layer_dims: self.network.dims().to_vec(),
            weights: self.network.weights().to_vec(),
            biases: self.network.biases().to_vec(),
            feature_names: self.registry.names().map(String::from).collect(),
            normalization: self.normalization.clone(),
            time_norms: self.time_norms.clone(),
            config: self.config.clone(),
            seed: self.config.seed,
            loss_curve: self.loss_curve.clone(),
            best_epoch: self.best_epoch,
        };
        serde_json::to_string(&doc).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<TrainedPolicy, ModelError> {
        let doc: ModelDoc = serde_json::from_str(text)?;
        if doc.schema != MODEL_SCHEMA {
            return Err(ModelError::Schema { found: doc.schema });
        }
        let network = QNetwork::from_parts(doc.layer_dims, doc.weights, doc.biases)
            .map_err(ModelError::Shape)?;
        let registry = FeatureRegistry::from_names(&doc.feature_names)?;
        doc.normalization.validate(&registry)?;
        if network.input_dim() != STATE_DIM {
            return Err(ModelError::Shape(format!(
                "network takes {} inputs, feature registry provides {STATE_DIM}",
                network.input_dim()
            )));
        }
        if network.output_dim() != ACTIONS.len() {
            return Err(ModelError::Shape(format!(
                "network has {} outputs, need {}",
                network.output_dim(),
                ACTIONS.len()
            )));
        }
        Ok(TrainedPolicy {
            network,
            registry,
            normalization: doc.normalization,
            time_norms: doc.time_norms,
            config: doc.config,
            loss_curve: doc.loss_curve,
            best_epoch: doc.best_epoch,
        })
    }

    pub fn save(&self, path: &Path, config_hash: &str, master_seed: u64) -> Result<(), ModelError> {
        fs::write(path, self.to_json(config_hash, master_seed) + "\n").map_err(|source| {
            ModelError::Io {
                path: path.display().to_string(),
                source,
            }
        })
    }

    pub fn load(path: &Path) -> Result<TrainedPolicy, ModelError> {
        let text = fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        TrainedPolicy::from_json(&text)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ModelDoc {
    schema: String,
    #[serde(default)]
    config_hash: String,
    #[serde(default)]
    master_seed: u64,
    layer_dims: Vec<usize>,
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    feature_names: Vec<String>,
    normalization: NormalizationConstants,
    time_norms: Vec<LevelTimeNorm>,
    config: DdqnConfig,
    /// Training seed, duplicated from the config for quick inspection.
    seed: u64,
    loss_curve: Vec<EpochLoss>,
    best_epoch: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn constant_policy_net(outputs: [f64; 3]) -> QNetwork {
        QNetwork::from_parts(
            vec![STATE_DIM, 3],
            vec![vec![0.0; STATE_DIM * 3]],
            vec![outputs.to_vec()],
        )
        .unwrap()
    }

    fn mid_state() -> StateVector {
        StateVector::new(vec![0.5; STATE_DIM]).unwrap()
    }

    #[test]
    fn unique_argmax_wins() {
        let net = constant_policy_net([0.0, 1.0, 0.0]);
        assert_eq!(select_action(&net, &mid_state()), ProblemKind::Guided);
        let net = constant_policy_net([0.0, 1.0, 3.0]);
        assert_eq!(select_action(&net, &mid_state()), ProblemKind::Buggy);
    }

    #[test]
    fn ties_resolve_in_fixed_action_order() {
        let net = constant_policy_net([0.5, 0.5, 0.1]);
        assert_eq!(select_action(&net, &mid_state()), ProblemKind::Ps);
        let net = constant_policy_net([0.1, 0.5, 0.5]);
        assert_eq!(select_action(&net, &mid_state()), ProblemKind::Guided);
    }

    fn sample_policy() -> TrainedPolicy {
        let registry = FeatureRegistry::standard();
        TrainedPolicy {
            network: QNetwork::he_init(&[STATE_DIM, 8, 3], &mut seeded_rng(4)),
            normalization: NormalizationConstants::identity(&registry),
            registry,
            time_norms: vec![LevelTimeNorm {
                level: 2,
                min: 30.0,
                max: 400.0,
            }],
            config: DdqnConfig::default(),
            loss_curve: vec![EpochLoss {
                epoch: 0,
                train_mse: 1.5,
                held_out_mse: 2.0,
            }],
            best_epoch: 0,
        }
    }

    #[test]
    fn model_file_round_trips() {
        let policy = sample_policy();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        policy.save(&path, "abc123", 42).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1, "artifact is a one-line document");
        assert!(text.contains(r#""configHash":"abc123""#));
        let back = TrainedPolicy::load(&path).unwrap();
        assert_eq!(back, policy);
        let state = mid_state();
        assert_eq!(back.network.forward(&state), policy.network.forward(&state));
    }

    #[test]
    fn rejects_unknown_schema() {
        let text = sample_policy()
            .to_json("", 0)
            .replace(MODEL_SCHEMA, "engage.model.v9");
        assert!(matches!(
            TrainedPolicy::from_json(&text),
            Err(ModelError::Schema { .. })
        ));
    }

    #[test]
    fn rejects_corrupt_network_shape() {
        let policy = sample_policy();
        let mut doc: serde_json::Value = serde_json::from_str(&policy.to_json("", 0)).unwrap();
        doc["biases"][0] = serde_json::json!([1.0, 2.0]);
        let text = serde_json::to_string(&doc).unwrap();
        assert!(matches!(
            TrainedPolicy::from_json(&text),
            Err(ModelError::Shape(_))
        ));
    }

    #[test]
    fn decide_reports_action_values() {
        let mut policy = sample_policy();
        policy.network = constant_policy_net([2.0, 7.0, 3.0]);
        let history = StudentHistory {
            pretest_composite: 50.0,
            pretest_accuracy: 0.5,
            current_level: 2,
            mastery: Default::default(),
            attempts: Vec::new(),
            decisions_made: 0,
            test_scores: vec![50.0],
        };
        let (action, q) = policy.decide(&history).unwrap();
        assert_eq!(action, ProblemKind::Guided);
        assert_eq!(q, [2.0, 7.0, 3.0]);
    }
}
