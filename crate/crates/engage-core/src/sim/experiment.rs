//! The three study phases, each a population of seeded sessions.
//!
//! Phase one replays a historical cohort under the uniform random policy and
//! averages its decision-time mastery into the threshold table. Phase two
//! replays a second cohort the same way to harvest training transitions and
//! fit the feature normalization, then trains the network. Phase three runs
//! the randomized trial: pretest, stratified assignment, and a full session
//! per student under the assigned condition.
//!
//! Every student draws from a stream derived from the master seed, the phase
//! name, and their id, so changing one student's condition or population
//! size never perturbs anyone else's session.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::bkt::{BktParams, MasteryObservation, ThresholdTable};
use crate::config::ExperimentConfig;
use crate::drl::{
    compute_reward, fit_level_time_norms, normalize_problem_time, train_ddqn, FeatureRegistry,
    LevelTimeNorm, NormalizationConstants, TrainedPolicy, Transition, STATE_DIM,
};
use crate::{derive_seed, seeded_rng};

use super::session::{
    pretest_probe, run_session, AttemptRow, Condition, ConditionPolicy, Curriculum, SessionLog,
    SimError,
};

pub const HISTORY_PHASE: &str = "history";
pub const CORPUS_PHASE: &str = "drlCorpus";
pub const TRIAL_PHASE: &str = "trial";

fn student_seed(master: u64, phase: &str, student_id: u32) -> u64 {
    derive_seed(master, &[phase, "student", &student_id.to_string()])
}

/// Historical cohort and the threshold table distilled from it.
#[derive(Debug, Clone)]
pub struct HistoryPhase {
    pub logs: Vec<SessionLog>,
    pub thresholds: ThresholdTable,
}

pub fn run_history_phase(
    curriculum: &Curriculum,
    config: &ExperimentConfig,
) -> Result<HistoryPhase, SimError> {
    let mut logs = Vec::with_capacity(config.population.history as usize);
    for id in 1..=config.population.history {
        let seed = student_seed(config.master_seed, HISTORY_PHASE, id);
        logs.push(run_session(
            curriculum,
            &ConditionPolicy::Control,
            id,
            seed,
            config,
        )?);
    }
    let observations = logs.iter().flat_map(|log| {
        log.decisions.iter().map(|d| MasteryObservation {
            level: d.level,
            problem_index: d.slot,
            mastery: d.mastery.clone(),
        })
    });
    let thresholds = ThresholdTable::compute(observations, &BktParams::default())?;
    Ok(HistoryPhase { logs, thresholds })
}

/// The same observations `run_history_phase` feeds the threshold table,
/// rebuilt from persisted rows. Each adaptive row pairs with the mastery
/// snapshot the row before it left behind, which is exactly what the policy
/// saw when it chose. Rows must arrive in session order per student.
pub fn decision_observations(rows: &[AttemptRow]) -> Result<Vec<MasteryObservation>, SimError> {
    let mut out = Vec::new();
    let mut prev: Option<&AttemptRow> = None;
    for row in rows {
        if prev.is_some_and(|p| p.student_id != row.student_id) {
            prev = None;
        }
        if row.decision.is_some() {
            let before = prev.ok_or_else(|| SimError::MalformedLog {
                reason: format!("student {}: adaptive row opens the session", row.student_id),
            })?;
            out.push(MasteryObservation {
                level: row.level,
                problem_index: row.slot,
                mastery: before.mastery.clone(),
            });
        }
        prev = Some(row);
    }
    Ok(out)
}

/// Training cohort plus everything frozen from it: feature bounds, reward
/// time bounds, and the transitions themselves.
#[derive(Debug, Clone)]
pub struct CorpusPhase {
    pub logs: Vec<SessionLog>,
    pub normalization: NormalizationConstants,
    pub time_norms: Vec<LevelTimeNorm>,
    pub transitions: Vec<Transition>,
}

pub fn run_corpus_phase(
    curriculum: &Curriculum,
    config: &ExperimentConfig,
) -> Result<CorpusPhase, SimError> {
    let mut logs = Vec::with_capacity(config.population.drl_corpus as usize);
    for id in 1..=config.population.drl_corpus {
        let seed = student_seed(config.master_seed, CORPUS_PHASE, id);
        logs.push(run_session(
            curriculum,
            &ConditionPolicy::Control,
            id,
            seed,
            config,
        )?);
    }

    let registry = FeatureRegistry::standard();
    let normalization = NormalizationConstants::fit(
        &registry,
        logs.iter()
            .flat_map(|log| log.decisions.iter().map(|d| &d.raw_features)),
    );
    let time_norms = fit_level_time_norms(
        logs.iter()
            .flat_map(|log| log.decisions.iter().map(|d| (d.level, d.duration))),
    );

    let mut transitions = Vec::with_capacity(logs.len() * 15);
    for log in &logs {
        transitions.extend(assemble_transitions(log, &normalization, &time_norms));
    }
    Ok(CorpusPhase {
        logs,
        normalization,
        time_norms,
        transitions,
    })
}

/// Turns one session's decision traces into training transitions.
///
/// Rewards follow the credit assignment the study design fixes: a decision
/// is paid with its level's end-of-level test score, except decisions in the
/// final training level, which are paid with the mean of that score and the
/// posttest average. Both are discounted by the share of available time the
/// served problem consumed.
pub fn assemble_transitions(
    log: &SessionLog,
    normalization: &NormalizationConstants,
    time_norms: &[LevelTimeNorm],
) -> Vec<Transition> {
    let states: Vec<Vec<f64>> = log
        .decisions
        .iter()
        .map(|d| normalization.normalize(&d.raw_features))
        .collect();
    let final_level = log.decisions.iter().map(|d| d.level).max().unwrap_or(0);
    let n = log.decisions.len();

    let mut out = Vec::with_capacity(n);
    for (i, d) in log.decisions.iter().enumerate() {
        let level_score = *log
            .level_tests
            .get(&d.level)
            .expect("every training level closes with a scored test");
        let credit = if d.level == final_level {
            (level_score + log.posttest) / 2.0
        } else {
            level_score
        };
        let time_share = normalize_problem_time(time_norms, d.level, d.duration);
        let reward = compute_reward(credit, time_share)
            .expect("composites and time shares are already in range");
        let terminal = i + 1 == n;
        out.push(Transition {
            state: states[i].clone(),
            action: d.served,
            reward,
            next_state: if terminal {
                Vec::new()
            } else {
                states[i + 1].clone()
            },
            terminal,
            student_id: log.student_id,
            decision_index: d.index as u32,
        });
    }
    out
}

/// Trains the policy network on corpus transitions and bundles it with the
/// corpus's frozen constants, so serving always normalizes the way training
/// did.
pub fn train_policy(
    transitions: &[Transition],
    normalization: &NormalizationConstants,
    time_norms: &[LevelTimeNorm],
    config: &ExperimentConfig,
) -> Result<TrainedPolicy, SimError> {
    let dims = [STATE_DIM, 64, 128, 64, 3];
    let trained = train_ddqn(transitions, &dims, &config.ddqn)?;
    Ok(TrainedPolicy {
        network: trained.network,
        registry: FeatureRegistry::standard(),
        normalization: normalization.clone(),
        time_norms: time_norms.to_vec(),
        config: config.ddqn.clone(),
        loss_curve: trained.loss_curve,
        best_epoch: trained.best_epoch,
    })
}

/// Sorts students by pretest score and deals each consecutive triad across
/// the three conditions in random order, so every condition draws from the
/// same ability strata.
pub fn stratified_assign(
    pretests: &[(u32, f64)],
    rng: &mut ChaCha8Rng,
) -> Result<BTreeMap<u32, Condition>, SimError> {
    if pretests.len() < 3 {
        return Err(SimError::TooFewStudents {
            got: pretests.len() as u32,
        });
    }
    let mut sorted = pretests.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));

    let mut out = BTreeMap::new();
    for triad in sorted.chunks(3) {
        let mut conditions = Condition::ALL;
        conditions.shuffle(rng);
        for (&(id, _), &condition) in triad.iter().zip(conditions.iter()) {
            out.insert(id, condition);
        }
    }
    Ok(out)
}

/// The randomized trial: assignment map, one session per student, and the
/// decision transitions replayed through the model's frozen constants.
#[derive(Debug, Clone)]
pub struct TrialPhase {
    pub assignments: BTreeMap<u32, Condition>,
    pub logs: Vec<SessionLog>,
    pub transitions: Vec<Transition>,
}

pub fn run_trial_phase(
    curriculum: &Curriculum,
    config: &ExperimentConfig,
    thresholds: &ThresholdTable,
    policy: &TrainedPolicy,
) -> Result<TrialPhase, SimError> {
    let n = config.population.trial;
    if n < 3 {
        return Err(SimError::TooFewStudents { got: n });
    }

    // The pretest happens before any condition-dependent draw, so it can be
    // probed up front and replays identically inside the full session.
    let mut pretests = Vec::with_capacity(n as usize);
    for id in 1..=n {
        let seed = student_seed(config.master_seed, TRIAL_PHASE, id);
        pretests.push((id, pretest_probe(curriculum, id, seed, config)?));
    }
    let mut assign_rng = seeded_rng(derive_seed(
        config.master_seed,
        &[TRIAL_PHASE, "assignment"],
    ));
    let assignments = stratified_assign(&pretests, &mut assign_rng)?;

    let mut logs = Vec::with_capacity(n as usize);
    for id in 1..=n {
        let seed = student_seed(config.master_seed, TRIAL_PHASE, id);
        let condition_policy = match assignments[&id] {
            Condition::Control => ConditionPolicy::Control,
            Condition::Bkt => ConditionPolicy::Bkt(thresholds),
            Condition::Drl => ConditionPolicy::Drl(policy),
        };
        logs.push(run_session(
            curriculum,
            &condition_policy,
            id,
            seed,
            config,
        )?);
    }

    let mut transitions = Vec::with_capacity(logs.len() * 15);
    for log in &logs {
        transitions.extend(assemble_transitions(
            log,
            &policy.normalization,
            &policy.time_norms,
        ));
    }
    Ok(TrialPhase {
        assignments,
        logs,
        transitions,
    })
}
