//! Experiment configuration: one TOML file drives every pipeline phase.
//!
//! Every field has a default, so the minimal useful config is a single
//! `masterSeed` line. Unknown keys are rejected rather than ignored; a typo
//! in a tuning knob should fail the run, not silently fall back.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::drl::DdqnConfig;
use crate::scoring::TimeBounds;

/// How many simulated students each phase enrolls.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct PopulationConfig {
    /// Historical corpus behind the mastery thresholds.
    pub history: u32,
    /// Corpus the policy network is trained on.
    pub drl_corpus: u32,
    /// Three-condition trial population.
    pub trial: u32,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        PopulationConfig {
            history: 721,
            drl_corpus: 103,
            trial: 113,
        }
    }
}

/// Distribution parameters the simulated student population is drawn from,
/// plus the attempt-mechanics constants shared by all students.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct StudentConfig {
    /// Beta shape parameters for each rule's initial latent mastery.
    pub mastery_alpha: f64,
    pub mastery_beta: f64,
    /// Latent mastery gained per exercised rule, scaled by room to grow.
    pub gain_ps: f64,
    pub gain_guided: f64,
    /// Additionally scaled by current mastery: finding planted errors only
    /// teaches students who already half-know the rule.
    pub gain_buggy: f64,
    /// Gain from watching an intro worked example.
    pub intro_gain: f64,
    /// P(wrong | knows the rule).
    pub slip: f64,
    /// P(correct | does not know the rule).
    pub guess: f64,
    /// Log-sd of the per-student pace multiplier (median 1.0).
    pub speed_sigma: f64,
    /// Base chance a struggling student asks for a hint at a step.
    pub hint_propensity: f64,
    /// Seconds a fully unmastered proof step takes before pace scaling.
    pub base_step_seconds: f64,
    /// Log-sd of per-attempt duration noise.
    pub time_sigma: f64,
    /// Fraction of justifications stripped from Guided variants.
    pub guided_fraction: f64,
}

impl Default for StudentConfig {
    fn default() -> Self {
        StudentConfig {
            mastery_alpha: 1.6,
            mastery_beta: 2.4,
            gain_ps: 0.10,
            gain_guided: 0.16,
            gain_buggy: 0.30,
            intro_gain: 0.02,
            slip: 0.10,
            guess: 0.20,
            speed_sigma: 0.25,
            hint_propensity: 0.35,
            base_step_seconds: 28.0,
            time_sigma: 0.30,
            guided_fraction: 0.5,
        }
    }
}

fn default_bank() -> PathBuf {
    PathBuf::from("banks/default")
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_master_seed() -> u64 {
    42
}

fn default_time_bounds() -> TimeBounds {
    TimeBounds {
        t_fast: 60.0,
        t_slow: 600.0,
    }
}

/// The whole experiment in one document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    /// Directory of per-level problem files.
    #[serde(default = "default_bank")]
    pub bank: PathBuf,
    /// Root for every artifact the pipeline writes.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub population: PopulationConfig,
    #[serde(default)]
    pub student: StudentConfig,
    /// Duration bounds for the time-efficiency score component.
    #[serde(default = "default_time_bounds")]
    pub time_bounds: TimeBounds,
    #[serde(default)]
    pub ddqn: DdqnConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            master_seed: default_master_seed(),
            bank: default_bank(),
            output_dir: default_output_dir(),
            population: PopulationConfig::default(),
            student: StudentConfig::default(),
            time_bounds: default_time_bounds(),
            ddqn: DdqnConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("config does not parse: {0}")]
    Parse(#[source] Box<toml::de::Error>),
    #[error("config field {field}: {message}")]
    Invalid {
        field: &'static str,
        message: String,
    },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

fn check_unit(field: &'static str, value: f64, lo: f64, hi: f64) -> Result<(), ConfigError> {
    if !value.is_finite() || value < lo || value > hi {
        return Err(invalid(
            field,
            format!("must be in [{lo}, {hi}], got {value}"),
        ));
    }
    Ok(())
}

fn check_positive(field: &'static str, value: f64) -> Result<(), ConfigError> {
    if !value.is_finite() || value <= 0.0 {
        return Err(invalid(field, format!("must be positive, got {value}")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(Box::new(e)))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.population.history == 0 {
            return Err(invalid("population.history", "needs at least 1 student"));
        }
        if self.population.drl_corpus == 0 {
            return Err(invalid("population.drlCorpus", "needs at least 1 student"));
        }
        if self.population.trial < 3 {
            return Err(invalid(
                "population.trial",
                format!(
                    "stratified triads need at least 3 students, got {}",
                    self.population.trial
                ),
            ));
        }

        let s = &self.student;
        check_positive("student.masteryAlpha", s.mastery_alpha)?;
        check_positive("student.masteryBeta", s.mastery_beta)?;
        check_unit("student.gainPs", s.gain_ps, 0.0, 0.3)?;
        check_unit("student.gainGuided", s.gain_guided, 0.0, 0.3)?;
        check_unit("student.gainBuggy", s.gain_buggy, 0.0, 0.3)?;
        check_unit("student.introGain", s.intro_gain, 0.0, 0.3)?;
        check_unit("student.slip", s.slip, 0.0, 0.5)?;
        if s.slip >= 0.5 {
            return Err(invalid("student.slip", "must stay below 0.5"));
        }
        check_unit("student.guess", s.guess, 0.0, 0.5)?;
        if s.guess >= 0.5 {
            return Err(invalid("student.guess", "must stay below 0.5"));
        }
        check_unit("student.speedSigma", s.speed_sigma, 0.0, 2.0)?;
        check_unit("student.hintPropensity", s.hint_propensity, 0.0, 1.0)?;
        check_positive("student.baseStepSeconds", s.base_step_seconds)?;
        check_unit("student.timeSigma", s.time_sigma, 0.0, 2.0)?;
        if !(s.guided_fraction > 0.0 && s.guided_fraction <= 1.0) {
            return Err(invalid(
                "student.guidedFraction",
                format!("must be in (0, 1], got {}", s.guided_fraction),
            ));
        }

        let t = &self.time_bounds;
        check_positive("timeBounds.tFast", t.t_fast)?;
        check_positive("timeBounds.tSlow", t.t_slow)?;
        if t.t_fast >= t.t_slow {
            return Err(invalid(
                "timeBounds.tFast",
                format!("must be below tSlow, got {} >= {}", t.t_fast, t.t_slow),
            ));
        }

        let d = &self.ddqn;
        check_positive("ddqn.learningRate", d.learning_rate)?;
        if !d.discount.is_finite() || !(0.0..1.0).contains(&d.discount) {
            return Err(invalid(
                "ddqn.discount",
                format!("must be in [0, 1), got {}", d.discount),
            ));
        }
        if d.batch_size == 0 {
            return Err(invalid("ddqn.batchSize", "must be at least 1"));
        }
        if d.target_sync_interval == 0 {
            return Err(invalid("ddqn.targetSyncInterval", "must be at least 1"));
        }
        if d.epochs == 0 {
            return Err(invalid("ddqn.epochs", "must be at least 1"));
        }
        if !d.held_out_fraction.is_finite() || !(0.0..1.0).contains(&d.held_out_fraction) {
            return Err(invalid(
                "ddqn.heldOutFraction",
                format!("must be in [0, 1), got {}", d.held_out_fraction),
            ));
        }
        Ok(())
    }

    /// The fully resolved config as TOML, written beside outputs so a run
    /// can be reproduced without guessing any default.
    pub fn resolved_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Content hash identifying this configuration, stamped into every
    /// artifact header. Two configs agree on the hash exactly when every
    /// resolved field agrees.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(64);
        for byte in digest {
            use std::fmt::Write;
            write!(hex, "{byte:02x}").expect("hex formats");
        }
        hex
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_every_default() {
        let config = ExperimentConfig::parse("masterSeed = 7\n").unwrap();
        assert_eq!(config.master_seed, 7);
        assert_eq!(config.population, PopulationConfig::default());
        assert_eq!(config.student, StudentConfig::default());
        assert_eq!(config.ddqn, DdqnConfig::default());
        assert_eq!(config.bank, PathBuf::from("banks/default"));
        assert_eq!(config.time_bounds, default_time_bounds());
    }

    #[test]
    fn empty_config_is_the_default_config() {
        let config = ExperimentConfig::parse("").unwrap();
        assert_eq!(config, ExperimentConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::parse("masterSeed = 7\nmasterSpeed = 9\n").unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains("masterSpeed"),
            "error should name the bad key: {msg}"
        );

        let nested = ExperimentConfig::parse("[student]\nslop = 0.1\n").unwrap_err();
        assert!(nested.to_string().contains("slop"));
    }

    #[test]
    fn zero_trial_population_names_the_field() {
        let err = ExperimentConfig::parse("[population]\ntrial = 0\n").unwrap_err();
        match err {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "population.trial"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn out_of_range_student_params_name_their_field() {
        let err = ExperimentConfig::parse("[student]\nslip = 0.5\n").unwrap_err();
        match err {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "student.slip"),
            other => panic!("unexpected error {other:?}"),
        }
        let err = ExperimentConfig::parse("[student]\ngainBuggy = 0.31\n").unwrap_err();
        match err {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "student.gainBuggy"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn inverted_time_bounds_are_rejected() {
        let err =
            ExperimentConfig::parse("[timeBounds]\ntFast = 600.0\ntSlow = 60.0\n").unwrap_err();
        match err {
            ConfigError::Invalid { field, .. } => assert_eq!(field, "timeBounds.tFast"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn resolved_echo_reloads_identically() {
        let mut config = ExperimentConfig::default();
        config.master_seed = 99;
        config.student.gain_buggy = 0.25;
        config.ddqn.epochs = 3;
        let echoed = config.resolved_toml();
        let reloaded = ExperimentConfig::parse(&echoed).unwrap();
        assert_eq!(reloaded, config);
        assert_eq!(reloaded.hash(), config.hash());
    }

    #[test]
    fn hash_tracks_every_field() {
        let base = ExperimentConfig::default();
        let mut tweaked = base.clone();
        tweaked.ddqn.seed = 1;
        assert_ne!(base.hash(), tweaked.hash());
        assert_eq!(base.hash(), ExperimentConfig::default().hash());
        assert_eq!(base.hash().len(), 64);
    }
}
