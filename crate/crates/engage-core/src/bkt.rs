//! Bayesian Knowledge Tracing: per-rule mastery, historical thresholds, and
//! the score-sign heuristic that picks Buggy vs Guided worked examples.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::Rule;
use crate::scoring::ProblemKind;

pub const THRESHOLDS_SCHEMA: &str = "engage.thresholds.v1";

/// The four fixed BKT probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BktParams {
    /// Initial probability of already knowing a rule.
    #[serde(rename = "pL0", default = "default_p_l0")]
    pub p_l0: f64,
    /// Probability of learning the rule at each opportunity.
    #[serde(rename = "pT", default = "default_p_t")]
    pub p_t: f64,
    /// Probability of guessing correctly without knowing the rule.
    #[serde(rename = "pG", default = "default_p_g")]
    pub p_g: f64,
    /// Probability of slipping despite knowing the rule.
    #[serde(rename = "pS", default = "default_p_s")]
    pub p_s: f64,
}

fn default_p_l0() -> f64 {
    0.01
}
fn default_p_t() -> f64 {
    0.01
}
fn default_p_g() -> f64 {
    0.3
}
fn default_p_s() -> f64 {
    0.1
}

impl Default for BktParams {
    fn default() -> Self {
        BktParams {
            p_l0: default_p_l0(),
            p_t: default_p_t(),
            p_g: default_p_g(),
            p_s: default_p_s(),
        }
    }
}

impl BktParams {
    pub fn validate(&self) -> Result<(), BktError> {
        for (name, v) in [
            ("pL0", self.p_l0),
            ("pT", self.p_t),
            ("pG", self.p_g),
            ("pS", self.p_s),
        ] {
            if !(v > 0.0 && v < 1.0) {
                return Err(BktError::BadParam { name, value: v });
            }
        }
        if self.p_g + self.p_s >= 1.0 {
            return Err(BktError::UnidentifiableParams {
                p_g: self.p_g,
                p_s: self.p_s,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum BktError {
    #[error("BKT parameter {name} must be in (0,1), got {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error("BKT parameters need pG + pS < 1, got pG={p_g} pS={p_s}")]
    UnidentifiableParams { p_g: f64, p_s: f64 },
    #[error("cannot compute thresholds from an empty history")]
    EmptyHistory,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: not a thresholds document: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("unsupported thresholds schema `{0}`, expected `{THRESHOLDS_SCHEMA}`")]
    BadSchema(String),
    #[error("bad threshold key `{0}`, expected level.problem.rule")]
    BadKey(String),
    #[error("threshold {key} = {value} is outside (0,1)")]
    OutOfRange { key: String, value: f64 },
    #[error("fallback threshold missing for rule {0}")]
    MissingFallback(Rule),
}

/// One BKT posterior-plus-learning update.
///
/// The observation shifts the mastery posterior, then the learning drift
/// `pT` moves it toward 1 regardless of the outcome.
pub fn bkt_update(p: f64, observed_correct: bool, params: &BktParams) -> f64 {
    let posterior = if observed_correct {
        let knew = p * (1.0 - params.p_s);
        knew / (knew + (1.0 - p) * params.p_g)
    } else {
        let slipped = p * params.p_s;
        slipped / (slipped + (1.0 - p) * (1.0 - params.p_g))
    };
    posterior + (1.0 - posterior) * params.p_t
}

/// Per-student mastery estimates across the rule inventory.
#[derive(Debug, Clone, PartialEq)]
pub struct BktState {
    params: BktParams,
    mastery: BTreeMap<Rule, f64>,
}

impl BktState {
    pub fn new(params: BktParams) -> Self {
        BktState {
            params,
            mastery: BTreeMap::new(),
        }
    }

    /// Current estimate for one rule; unobserved rules sit at `pL0`.
    pub fn mastery(&self, rule: Rule) -> f64 {
        self.mastery.get(&rule).copied().unwrap_or(self.params.p_l0)
    }

    /// Folds one checked rule action into the estimate.
    pub fn observe(&mut self, rule: Rule, correct: bool) {
        let updated = bkt_update(self.mastery(rule), correct, &self.params);
        self.mastery.insert(rule, updated);
    }

    /// Mastery for every rule in the inventory, defaults materialized.
    pub fn snapshot(&self) -> BTreeMap<Rule, f64> {
        Rule::ALL.iter().map(|&r| (r, self.mastery(r))).collect()
    }
}

/// Historical mastery thresholds, keyed by problem position with a per-rule
/// fallback for positions the history never produced.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    positions: BTreeMap<(u8, u8, Rule), f64>,
    fallback: BTreeMap<Rule, f64>,
    p_l0: f64,
}

/// A mastery snapshot taken as one student arrived at one problem position,
/// the same moment a live decision reads its mastery; the raw material
/// thresholds are averaged from.
#[derive(Debug, Clone)]
pub struct MasteryObservation {
    pub level: u8,
    pub problem_index: u8,
    pub mastery: BTreeMap<Rule, f64>,
}

fn round6(v: f64) -> f64 {
    (v * 1e6).round() / 1e6
}

impl ThresholdTable {
    /// Averages historical decision-time mastery into thresholds, rounded to
    /// the 6 decimal places the file format carries so in-memory decisions
    /// match a reloaded table exactly.
    pub fn compute<I>(history: I, params: &BktParams) -> Result<Self, BktError>
    where
        I: IntoIterator<Item = MasteryObservation>,
    {
        let mut position_sums: BTreeMap<(u8, u8, Rule), (f64, u64)> = BTreeMap::new();
        let mut global_sums: BTreeMap<Rule, (f64, u64)> = BTreeMap::new();
        let mut any = false;
        for obs in history {
            any = true;
            for (&rule, &score) in &obs.mastery {
                let slot = position_sums
                    .entry((obs.level, obs.problem_index, rule))
                    .or_insert((0.0, 0));
                slot.0 += score;
                slot.1 += 1;
                let global = global_sums.entry(rule).or_insert((0.0, 0));
                global.0 += score;
                global.1 += 1;
            }
        }
        if !any {
            return Err(BktError::EmptyHistory);
        }
        let positions = position_sums
            .into_iter()
            .map(|(key, (sum, n))| (key, round6(sum / n as f64)))
            .collect();
        let fallback = global_sums
            .into_iter()
            .map(|(rule, (sum, n))| (rule, round6(sum / n as f64)))
            .collect();
        Ok(ThresholdTable {
            positions,
            fallback,
            p_l0: params.p_l0,
        })
    }

    /// Threshold for a rule at a problem position, falling back to the
    /// rule's global mean, then to `pL0`.
    pub fn lookup(&self, level: u8, problem_index: u8, rule: Rule) -> f64 {
        self.positions
            .get(&(level, problem_index, rule))
            .or_else(|| self.fallback.get(&rule))
            .copied()
            .unwrap_or(self.p_l0)
    }

    /// Writes the table as a one-line document whose leading fields carry
    /// the provenance every artifact records.
    pub fn save(
        &self,
        path: impl AsRef<Path>,
        config_hash: &str,
        master_seed: u64,
    ) -> Result<(), BktError> {
        let path = path.as_ref();
        let doc = ThresholdDoc {
            schema: THRESHOLDS_SCHEMA.to_string(),
            config_hash: config_hash.to_string(),
            master_seed,
            positions: self
                .positions
                .iter()
                .map(|(&(l, p, r), &v)| (format!("{l}.{p}.{r}"), v))
                .collect(),
            fallback: self
                .fallback
                .iter()
                .map(|(&r, &v)| (r.id().to_string(), v))
                .collect(),
        };
        let text = serde_json::to_string(&doc).expect("thresholds serialize");
        fs::write(path, text + "\n").map_err(|source| BktError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, BktError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| BktError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            BktError::Json { source, .. } => BktError::Json {
                path: path.to_path_buf(),
                source,
            },
            other => other,
        })
    }

    /// Parses a thresholds document from JSON text.
    pub fn parse(text: &str) -> Result<Self, BktError> {
        let doc: ThresholdDoc = serde_json::from_str(text).map_err(|source| BktError::Json {
            path: PathBuf::new(),
            source,
        })?;
        if doc.schema != THRESHOLDS_SCHEMA {
            return Err(BktError::BadSchema(doc.schema));
        }
        let mut positions = BTreeMap::new();
        for (key, value) in doc.positions {
            let parts: Vec<&str> = key.splitn(3, '.').collect();
            let parsed = match parts.as_slice() {
                [l, p, r] => match (l.parse::<u8>(), p.parse::<u8>(), r.parse::<Rule>()) {
                    (Ok(l), Ok(p), Ok(r)) => Some((l, p, r)),
                    _ => None,
                },
                _ => None,
            };
            let Some((l, p, r)) = parsed else {
                return Err(BktError::BadKey(key));
            };
            if !(value > 0.0 && value < 1.0) {
                return Err(BktError::OutOfRange { key, value });
            }
            positions.insert((l, p, r), value);
        }
        let mut fallback = BTreeMap::new();
        for (key, value) in doc.fallback {
            let Ok(rule) = key.parse::<Rule>() else {
                return Err(BktError::BadKey(key));
            };
            if !(value > 0.0 && value < 1.0) {
                return Err(BktError::OutOfRange { key, value });
            }
            fallback.insert(rule, value);
        }
        for rule in Rule::ALL {
            if !fallback.contains_key(&rule) {
                return Err(BktError::MissingFallback(rule));
            }
        }
        Ok(ThresholdTable {
            positions,
            fallback,
            p_l0: default_p_l0(),
        })
    }
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct ThresholdDoc {
    schema: String,
    #[serde(default)]
    config_hash: String,
    #[serde(default)]
    master_seed: u64,
    positions: BTreeMap<String, f64>,
    fallback: BTreeMap<String, f64>,
}

/// The weighted vote behind [`score_sign_decision`]: each rule contributes
/// +1 if its mastery clears its threshold and -1 otherwise, required rules
/// at full weight, the rest at half.
pub fn score_sign_sum(
    state: &BktState,
    thresholds: &ThresholdTable,
    level: u8,
    problem_index: u8,
    required: &std::collections::BTreeSet<Rule>,
) -> f64 {
    let mut sum = 0.0;
    for rule in Rule::ALL {
        let above = state.mastery(rule) > thresholds.lookup(level, problem_index, rule);
        let sign = if above { 1.0 } else { -1.0 };
        let weight = if required.contains(&rule) { 1.0 } else { 0.5 };
        sum += weight * sign;
    }
    sum
}

/// The Buggy-vs-Guided heuristic: a positive vote sum picks the
/// deep-engagement Buggy variant; zero or negative picks Guided.
pub fn score_sign_decision(
    state: &BktState,
    thresholds: &ThresholdTable,
    level: u8,
    problem_index: u8,
    required: &std::collections::BTreeSet<Rule>,
) -> ProblemKind {
    if score_sign_sum(state, thresholds, level, problem_index, required) > 0.0 {
        ProblemKind::Buggy
    } else {
        ProblemKind::Guided
    }
}

/// One resolved BKT-condition decision with the evidence behind it, kept for
/// session logs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BktChoice {
    /// True when the fair coin landed on problem solving and the score sign
    /// was never consulted.
    pub coin_ps: bool,
    /// The weighted vote sum, evaluated for the log even on PS draws.
    pub score: f64,
    pub kind: ProblemKind,
}

/// Full BKT condition policy with its working shown: a fair coin picks
/// problem solving, otherwise the score-sign heuristic picks the
/// worked-example type.
pub fn bkt_condition_choice(
    state: &BktState,
    thresholds: &ThresholdTable,
    level: u8,
    problem_index: u8,
    required: &std::collections::BTreeSet<Rule>,
    rng: &mut impl Rng,
) -> BktChoice {
    let coin_ps = rng.random_bool(0.5);
    let score = score_sign_sum(state, thresholds, level, problem_index, required);
    let kind = if coin_ps {
        ProblemKind::Ps
    } else if score > 0.0 {
        ProblemKind::Buggy
    } else {
        ProblemKind::Guided
    };
    BktChoice {
        coin_ps,
        score,
        kind,
    }
}

/// [`bkt_condition_choice`] without the paper trail.
pub fn bkt_condition_select(
    state: &BktState,
    thresholds: &ThresholdTable,
    level: u8,
    problem_index: u8,
    required: &std::collections::BTreeSet<Rule>,
    rng: &mut impl Rng,
) -> ProblemKind {
    bkt_condition_choice(state, thresholds, level, problem_index, required, rng).kind
}
