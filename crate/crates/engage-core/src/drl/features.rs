//! Turns a student's session history into the fixed 74-slot feature vector
//! the policy network consumes. Slot layout and per-slot defaults are
//! documented in `docs/features.md`; the normalization bounds are fit on the
//! training corpus and frozen with the model.

use std::collections::{BTreeMap, BTreeSet};
use std::ops::Deref;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::Rule;
use crate::scoring::ProblemKind;

pub const STATE_DIM: usize = 74;

/// How a raw feature maps into [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum NormKind {
    /// Already a ratio; clamped only.
    Identity,
    /// Min-max scaled with corpus-fit bounds, then clamped.
    MinMax,
}

/// Named feature slots in network input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureRegistry {
    entries: Vec<(String, NormKind)>,
}

impl FeatureRegistry {
    /// The production layout: 36 mastery, 14 temporal, 12 help-seeking and
    /// 12 history slots.
    pub fn standard() -> FeatureRegistry {
        let mut entries = Vec::with_capacity(STATE_DIM);
        let mut mastery_slots: Vec<String> = Rule::ALL.iter().map(|r| r.id().to_string()).collect();
        mastery_slots.extend((1..=7).map(|l| format!("level{l}")));
        mastery_slots.push("overall".into());
        mastery_slots.push("pretest".into());
        mastery_slots.push("currentLevel".into());
        for slot in &mastery_slots {
            entries.push((format!("mastery.{slot}.estimate"), NormKind::Identity));
            entries.push((format!("mastery.{slot}.accuracy"), NormKind::Identity));
        }
        for l in 1..=7 {
            entries.push((format!("time.level{l}.mean"), NormKind::MinMax));
        }
        entries.push(("time.mean".into(), NormKind::MinMax));
        entries.push(("time.last".into(), NormKind::MinMax));
        for kind in ProblemKind::ALL {
            entries.push((
                format!("time.{}.mean", kind.label().to_lowercase()),
                NormKind::MinMax,
            ));
        }
        entries.push(("time.session".into(), NormKind::MinMax));
        entries.push(("time.sinceHint".into(), NormKind::MinMax));
        entries.push(("help.hints.total".into(), NormKind::MinMax));
        entries.push(("help.hints.level".into(), NormKind::MinMax));
        entries.push(("help.hints.last".into(), NormKind::MinMax));
        entries.push(("help.hints.perProblem".into(), NormKind::MinMax));
        entries.push(("help.hints.perGuided".into(), NormKind::MinMax));
        entries.push(("help.hints.drought".into(), NormKind::MinMax));
        entries.push(("help.errors.total".into(), NormKind::MinMax));
        entries.push(("help.errors.level".into(), NormKind::MinMax));
        entries.push(("help.errors.last".into(), NormKind::MinMax));
        entries.push(("help.errors.perProblem".into(), NormKind::MinMax));
        entries.push(("help.errors.perApplication".into(), NormKind::Identity));
        entries.push(("help.errors.drought".into(), NormKind::MinMax));
        for kind in ProblemKind::ALL {
            entries.push((
                format!("hist.{}.count", kind.label().to_lowercase()),
                NormKind::MinMax,
            ));
        }
        for kind in ProblemKind::ALL {
            entries.push((
                format!("hist.{}.frac", kind.label().to_lowercase()),
                NormKind::Identity,
            ));
        }
        entries.push(("hist.problems".into(), NormKind::MinMax));
        entries.push(("hist.levelProgress".into(), NormKind::Identity));
        entries.push(("hist.levelAttempts".into(), NormKind::MinMax));
        entries.push(("hist.decisions".into(), NormKind::MinMax));
        entries.push(("hist.lastTest".into(), NormKind::Identity));
        entries.push(("hist.testMean".into(), NormKind::Identity));
        debug_assert_eq!(entries.len(), STATE_DIM);
        FeatureRegistry { entries }
    }

    /// Rebuilds a registry from serialized names, inferring each slot's
    /// normalization kind from the standard layout.
    pub fn from_names(names: &[String]) -> Result<FeatureRegistry, FeatureError> {
        let standard = FeatureRegistry::standard();
        if names.len() != standard.len() {
            return Err(FeatureError::RegistryMismatch {
                expected: standard.len(),
                got: names.len(),
            });
        }
        for (got, (want, _)) in names.iter().zip(&standard.entries) {
            if got != want {
                return Err(FeatureError::UnknownFeature { name: got.clone() });
            }
        }
        Ok(standard)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn name(&self, i: usize) -> &str {
        &self.entries[i].0
    }

    pub fn kind(&self, i: usize) -> NormKind {
        self.entries[i].1
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|(n, _)| n == name)
    }
}

/// Per-feature scaling bounds, frozen with a trained model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NormalizationConstants {
    kinds: Vec<NormKind>,
    mins: Vec<f64>,
    maxs: Vec<f64>,
}

impl NormalizationConstants {
    /// Fits min-max bounds over a corpus of raw feature rows. Identity slots
    /// keep the unit interval regardless of the data.
    pub fn fit<'a, I>(registry: &FeatureRegistry, raws: I) -> NormalizationConstants
    where
        I: IntoIterator<Item = &'a Vec<f64>>,
    {
        let n = registry.len();
        let mut mins = vec![f64::INFINITY; n];
        let mut maxs = vec![f64::NEG_INFINITY; n];
        let mut seen = false;
        for row in raws {
            assert_eq!(row.len(), n, "raw feature row width mismatch");
            seen = true;
            for (i, &v) in row.iter().enumerate() {
                mins[i] = mins[i].min(v);
                maxs[i] = maxs[i].max(v);
            }
        }
        let kinds: Vec<NormKind> = (0..n).map(|i| registry.kind(i)).collect();
        for i in 0..n {
            if kinds[i] == NormKind::Identity || !seen {
                mins[i] = 0.0;
                maxs[i] = 1.0;
            }
        }
        NormalizationConstants { kinds, mins, maxs }
    }

    pub fn identity(registry: &FeatureRegistry) -> NormalizationConstants {
        NormalizationConstants::fit(registry, std::iter::empty())
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn normalize(&self, raw: &[f64]) -> Vec<f64> {
        assert_eq!(raw.len(), self.kinds.len(), "raw width mismatch");
        raw.iter()
            .enumerate()
            .map(|(i, &v)| match self.kinds[i] {
                NormKind::Identity => v.clamp(0.0, 1.0),
                NormKind::MinMax => {
                    let span = self.maxs[i] - self.mins[i];
                    if span > 0.0 {
                        ((v - self.mins[i]) / span).clamp(0.0, 1.0)
                    } else {
                        // Constant in the corpus: no information to scale by.
                        0.0
                    }
                }
            })
            .collect()
    }

    pub fn validate(&self, registry: &FeatureRegistry) -> Result<(), FeatureError> {
        if self.len() != registry.len()
            || self.mins.len() != self.len()
            || self.maxs.len() != self.len()
        {
            return Err(FeatureError::RegistryMismatch {
                expected: registry.len(),
                got: self.len(),
            });
        }
        for i in 0..self.len() {
            if !self.mins[i].is_finite() || !self.maxs[i].is_finite() {
                return Err(FeatureError::BadBounds { index: i });
            }
        }
        Ok(())
    }
}

/// A normalized, validated network input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StateVector(Vec<f64>);

impl StateVector {
    pub fn new(values: Vec<f64>) -> Result<StateVector, FeatureError> {
        if values.len() != STATE_DIM {
            return Err(FeatureError::RegistryMismatch {
                expected: STATE_DIM,
                got: values.len(),
            });
        }
        for (index, v) in values.iter().enumerate() {
            if !v.is_finite() || !(0.0..=1.0).contains(v) {
                return Err(FeatureError::ValueOutOfRange { index, value: *v });
            }
        }
        Ok(StateVector(values))
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for StateVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// One finished problem as the feature extractor sees it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AttemptSummary {
    pub level: u8,
    pub kind: ProblemKind,
    /// Intro worked examples: watched, not answered. They count toward
    /// problems and time but carry no applications.
    pub passive: bool,
    pub rule_results: Vec<(Rule, bool)>,
    /// Seconds.
    pub duration: f64,
    pub hints: u32,
}

/// Everything known about a student at a decision point.
#[derive(Debug, Clone, PartialEq)]
pub struct StudentHistory {
    /// Composite pretest score, 0-100.
    pub pretest_composite: f64,
    /// Fraction of pretest rule applications answered correctly.
    pub pretest_accuracy: f64,
    pub current_level: u8,
    /// Skill-estimate snapshot at the decision point.
    pub mastery: BTreeMap<Rule, f64>,
    pub attempts: Vec<AttemptSummary>,
    pub decisions_made: u32,
    /// Composite scores of tests taken so far, pretest first.
    pub test_scores: Vec<f64>,
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("feature registry has {got} slots, expected {expected}")]
    RegistryMismatch { expected: usize, got: usize },
    #[error("unknown feature name {name:?}")]
    UnknownFeature { name: String },
    #[error("feature {index} is {value}, outside [0, 1]")]
    ValueOutOfRange { index: usize, value: f64 },
    #[error("normalization bounds at slot {index} are not finite")]
    BadBounds { index: usize },
}

struct Tally {
    correct: u32,
    total: u32,
}

impl Tally {
    fn new() -> Tally {
        Tally {
            correct: 0,
            total: 0,
        }
    }

    fn push(&mut self, ok: bool) {
        self.total += 1;
        if ok {
            self.correct += 1;
        }
    }

    /// Running accuracy; 0.5 before any observation.
    fn ratio(&self) -> f64 {
        if self.total == 0 {
            0.5
        } else {
            self.correct as f64 / self.total as f64
        }
    }
}

fn mean(sum: f64, n: u32) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Raw (pre-normalization) features in registry order.
pub fn extract_raw_features(history: &StudentHistory) -> Vec<f64> {
    let mut rule_acc: BTreeMap<Rule, Tally> = BTreeMap::new();
    let mut level_acc: BTreeMap<u8, Tally> = BTreeMap::new();
    let mut level_rules: BTreeMap<u8, BTreeSet<Rule>> = BTreeMap::new();
    let mut overall_acc = Tally::new();
    let mut level_time = [(0.0, 0u32); 8];
    let mut kind_time: BTreeMap<ProblemKind, (f64, u32)> = BTreeMap::new();
    let mut kind_count: BTreeMap<ProblemKind, u32> = BTreeMap::new();
    let mut session = 0.0;
    let mut time_since_hint = 0.0;
    let mut any_hint = false;
    let mut hints_total = 0u32;
    let mut hints_level = 0u32;
    let mut hints_guided = (0u32, 0u32);
    let mut hint_drought = 0u32;
    let mut errors_total = 0u32;
    let mut errors_level = 0u32;
    let mut error_drought = 0u32;
    let mut active_count = 0u32;
    let mut level_attempts = 0u32;

    for attempt in &history.attempts {
        session += attempt.duration;
        if attempt.hints > 0 {
            any_hint = true;
            time_since_hint = 0.0;
            hint_drought = 0;
        } else {
            time_since_hint += attempt.duration;
            hint_drought += 1;
        }
        let errors_here = attempt.rule_results.iter().filter(|(_, ok)| !ok).count() as u32;
        if errors_here > 0 {
            error_drought = 0;
        } else {
            error_drought += 1;
        }
        errors_total += errors_here;
        hints_total += attempt.hints;
        if attempt.level == history.current_level {
            hints_level += attempt.hints;
            errors_level += errors_here;
            level_attempts += 1;
        }
        let slot = &mut level_time[attempt.level.min(7) as usize];
        slot.0 += attempt.duration;
        slot.1 += 1;
        for (rule, ok) in &attempt.rule_results {
            rule_acc.entry(*rule).or_insert_with(Tally::new).push(*ok);
            level_acc
                .entry(attempt.level)
                .or_insert_with(Tally::new)
                .push(*ok);
            level_rules.entry(attempt.level).or_default().insert(*rule);
            overall_acc.push(*ok);
        }
        if !attempt.passive {
            active_count += 1;
            let t = kind_time.entry(attempt.kind).or_insert((0.0, 0));
            t.0 += attempt.duration;
            t.1 += 1;
            *kind_count.entry(attempt.kind).or_insert(0) += 1;
            if attempt.kind == ProblemKind::Guided {
                hints_guided.0 += attempt.hints;
                hints_guided.1 += 1;
            }
        }
    }

    let posterior = |rule: Rule| *history.mastery.get(&rule).unwrap_or(&0.5);
    let level_estimate = |level: u8| {
        let rules = level_rules.get(&level);
        match rules {
            Some(set) if !set.is_empty() => {
                set.iter().map(|r| posterior(*r)).sum::<f64>() / set.len() as f64
            }
            _ => 0.5,
        }
    };
    let level_accuracy = |level: u8| level_acc.get(&level).map_or(0.5, Tally::ratio);
    let overall_estimate = if history.mastery.is_empty() {
        0.5
    } else {
        history.mastery.values().sum::<f64>() / history.mastery.len() as f64
    };
    let pretest_unit = (history.pretest_composite / 100.0).clamp(0.0, 1.0);

    let mut out = Vec::with_capacity(STATE_DIM);
    for rule in Rule::ALL {
        out.push(posterior(rule));
        out.push(rule_acc.get(&rule).map_or(0.5, Tally::ratio));
    }
    for level in 1..=7u8 {
        out.push(level_estimate(level));
        out.push(level_accuracy(level));
    }
    out.push(overall_estimate);
    out.push(overall_acc.ratio());
    out.push(pretest_unit);
    out.push(history.pretest_accuracy.clamp(0.0, 1.0));
    out.push(level_estimate(history.current_level));
    out.push(level_accuracy(history.current_level));

    for level in 1..=7usize {
        let (sum, n) = level_time[level];
        out.push(mean(sum, n));
    }
    let total_attempts = history.attempts.len() as u32;
    out.push(mean(session, total_attempts));
    out.push(history.attempts.last().map_or(0.0, |a| a.duration));
    for kind in ProblemKind::ALL {
        let (sum, n) = kind_time.get(&kind).copied().unwrap_or((0.0, 0));
        out.push(mean(sum, n));
    }
    out.push(session);
    out.push(if any_hint { time_since_hint } else { session });

    out.push(hints_total as f64);
    out.push(hints_level as f64);
    out.push(history.attempts.last().map_or(0.0, |a| a.hints as f64));
    out.push(mean(hints_total as f64, active_count));
    out.push(mean(hints_guided.0 as f64, hints_guided.1));
    out.push(hint_drought as f64);
    out.push(errors_total as f64);
    out.push(errors_level as f64);
    out.push(history.attempts.last().map_or(0.0, |a| {
        a.rule_results.iter().filter(|(_, ok)| !ok).count() as f64
    }));
    out.push(mean(errors_total as f64, active_count));
    out.push(if overall_acc.total == 0 {
        0.5
    } else {
        1.0 - overall_acc.correct as f64 / overall_acc.total as f64
    });
    out.push(error_drought as f64);

    for kind in ProblemKind::ALL {
        out.push(*kind_count.get(&kind).unwrap_or(&0) as f64);
    }
    for kind in ProblemKind::ALL {
        let count = *kind_count.get(&kind).unwrap_or(&0);
        out.push(if active_count == 0 {
            0.5
        } else {
            count as f64 / active_count as f64
        });
    }
    out.push(history.attempts.len() as f64);
    out.push(history.current_level as f64 / 7.0);
    out.push(level_attempts as f64);
    out.push(history.decisions_made as f64);
    let last_test = history
        .test_scores
        .last()
        .copied()
        .unwrap_or(history.pretest_composite);
    out.push((last_test / 100.0).clamp(0.0, 1.0));
    let test_mean = if history.test_scores.is_empty() {
        history.pretest_composite
    } else {
        history.test_scores.iter().sum::<f64>() / history.test_scores.len() as f64
    };
    out.push((test_mean / 100.0).clamp(0.0, 1.0));

    debug_assert_eq!(out.len(), STATE_DIM);
    out
}

/// Raw extraction plus frozen normalization.
pub fn extract_state(
    history: &StudentHistory,
    registry: &FeatureRegistry,
    constants: &NormalizationConstants,
) -> Result<StateVector, FeatureError> {
    if registry.len() != STATE_DIM {
        return Err(FeatureError::RegistryMismatch {
            expected: STATE_DIM,
            got: registry.len(),
        });
    }
    constants.validate(registry)?;
    let raw = extract_raw_features(history);
    StateVector::new(constants.normalize(&raw))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;
    use rand::Rng;

    fn base_history() -> StudentHistory {
        StudentHistory {
            pretest_composite: 40.0,
            pretest_accuracy: 0.4,
            current_level: 2,
            mastery: Rule::ALL.iter().map(|r| (*r, 0.01)).collect(),
            attempts: Vec::new(),
            decisions_made: 0,
            test_scores: vec![40.0],
        }
    }

    #[test]
    fn standard_registry_shape() {
        let reg = FeatureRegistry::standard();
        assert_eq!(reg.len(), STATE_DIM);
        let unique: BTreeSet<&str> = reg.names().collect();
        assert_eq!(unique.len(), STATE_DIM, "duplicate feature names");
        let names: Vec<String> = reg.names().map(String::from).collect();
        let rebuilt = FeatureRegistry::from_names(&names).unwrap();
        assert_eq!(rebuilt, reg);
    }

    #[test]
    fn registry_rejects_drifted_names() {
        let reg = FeatureRegistry::standard();
        let mut names: Vec<String> = reg.names().map(String::from).collect();
        names[3] = "mastery.XX.accuracy".into();
        assert!(matches!(
            FeatureRegistry::from_names(&names),
            Err(FeatureError::UnknownFeature { .. })
        ));
        names.pop();
        assert!(matches!(
            FeatureRegistry::from_names(&names[..10].to_vec()),
            Err(FeatureError::RegistryMismatch { .. })
        ));
    }

    #[test]
    fn cold_start_takes_documented_defaults() {
        let reg = FeatureRegistry::standard();
        let constants = NormalizationConstants::identity(&reg);
        let state = extract_state(&base_history(), &reg, &constants).unwrap();
        let at = |name: &str| state[reg.index_of(name).unwrap()];
        assert_eq!(at("hist.ps.count"), 0.0);
        assert_eq!(at("hist.ps.frac"), 0.5);
        assert_eq!(at("help.hints.total"), 0.0);
        assert_eq!(at("help.errors.perApplication"), 0.5);
        assert_eq!(at("mastery.MP.accuracy"), 0.5);
        assert_eq!(at("mastery.MP.estimate"), 0.01);
        assert_eq!(at("mastery.pretest.estimate"), 0.4);
        assert_eq!(at("mastery.pretest.accuracy"), 0.4);
        assert_eq!(at("time.session"), 0.0);
        assert_eq!(at("hist.levelProgress"), 2.0 / 7.0);
        assert_eq!(at("hist.lastTest"), 0.4);
    }

    fn attempt(level: u8, kind: ProblemKind, results: &[(Rule, bool)]) -> AttemptSummary {
        AttemptSummary {
            level,
            kind,
            passive: false,
            rule_results: results.to_vec(),
            duration: 60.0,
            hints: 0,
        }
    }

    #[test]
    fn mastery_features_dominate_after_success() {
        use crate::bkt::{BktParams, BktState};
        let mut good = base_history();
        let mut bad = base_history();
        for history in [&mut good, &mut bad] {
            history.attempts = vec![
                attempt(2, ProblemKind::Ps, &[]),
                attempt(2, ProblemKind::Guided, &[]),
            ];
        }
        let results = |ok: bool| {
            vec![
                (Rule::ModusPonens, ok),
                (Rule::Simplification, ok),
                (Rule::Conjunction, ok),
            ]
        };
        good.attempts[0].rule_results = results(true);
        good.attempts[1].rule_results = results(true);
        bad.attempts[0].rule_results = results(false);
        bad.attempts[1].rule_results = results(false);
        for (history, ok) in [(&mut good, true), (&mut bad, false)] {
            let mut state = BktState::new(BktParams::default());
            for attempt in &history.attempts {
                for (rule, _) in attempt.rule_results.clone() {
                    state.observe(rule, ok);
                }
            }
            history.mastery = state.snapshot();
        }

        let reg = FeatureRegistry::standard();
        let constants = NormalizationConstants::identity(&reg);
        let good_state = extract_state(&good, &reg, &constants).unwrap();
        let bad_state = extract_state(&bad, &reg, &constants).unwrap();
        for i in 0..36 {
            assert!(
                good_state[i] >= bad_state[i],
                "{}: {} < {}",
                reg.name(i),
                good_state[i],
                bad_state[i]
            );
        }
    }

    fn random_history(rng: &mut impl Rng) -> StudentHistory {
        let mut history = base_history();
        history.pretest_composite = rng.random_range(0.0..100.0);
        history.pretest_accuracy = rng.random_range(0.0..1.0);
        history.current_level = rng.random_range(1..=7);
        history.mastery = Rule::ALL
            .iter()
            .map(|r| (*r, rng.random_range(0.001..0.999)))
            .collect();
        history.decisions_made = rng.random_range(0..16);
        history.test_scores = (0..rng.random_range(1..7))
            .map(|_| rng.random_range(0.0..100.0))
            .collect();
        let attempts = rng.random_range(0..30);
        history.attempts = (0..attempts)
            .map(|_| {
                let kinds = ProblemKind::ALL;
                let n_results = rng.random_range(0..8);
                AttemptSummary {
                    level: rng.random_range(1..=7),
                    kind: kinds[rng.random_range(0..3)],
                    passive: rng.random_bool(0.1),
                    rule_results: (0..n_results)
                        .map(|_| (Rule::ALL[rng.random_range(0..8)], rng.random_bool(0.6)))
                        .collect(),
                    duration: rng.random_range(5.0..900.0),
                    hints: rng.random_range(0..6),
                }
            })
            .collect();
        history
    }

    #[test]
    fn normalized_features_stay_in_unit_interval() {
        let reg = FeatureRegistry::standard();
        let mut rng = seeded_rng(99);
        let histories: Vec<StudentHistory> = (0..1_000).map(|_| random_history(&mut rng)).collect();
        let raws: Vec<Vec<f64>> = histories
            .iter()
            .take(200)
            .map(extract_raw_features)
            .collect();
        let constants = NormalizationConstants::fit(&reg, &raws);
        for history in &histories {
            let state = extract_state(history, &reg, &constants).unwrap();
            assert!(state
                .iter()
                .all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn degenerate_minmax_slot_maps_to_zero() {
        let reg = FeatureRegistry::standard();
        let history = base_history();
        let raw = extract_raw_features(&history);
        // Single-row corpus: every min-max slot is constant.
        let constants = NormalizationConstants::fit(&reg, std::iter::once(&raw));
        let state = constants.normalize(&raw);
        let idx = reg.index_of("help.hints.total").unwrap();
        assert_eq!(state[idx], 0.0);
    }

    #[test]
    fn constants_serialize_round_trip() {
        let reg = FeatureRegistry::standard();
        let history = base_history();
        let raw = extract_raw_features(&history);
        let constants = NormalizationConstants::fit(&reg, std::iter::once(&raw));
        let json = serde_json::to_string(&constants).unwrap();
        let back: NormalizationConstants = serde_json::from_str(&json).unwrap();
        assert_eq!(back, constants);
    }

    #[test]
    fn state_vector_validates() {
        assert!(StateVector::new(vec![0.5; STATE_DIM]).is_ok());
        assert!(StateVector::new(vec![0.5; 10]).is_err());
        let mut bad = vec![0.5; STATE_DIM];
        bad[7] = 1.5;
        assert!(matches!(
            StateVector::new(bad),
            Err(FeatureError::ValueOutOfRange { index: 7, .. })
        ));
    }
}
