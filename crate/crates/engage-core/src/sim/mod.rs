//! Simulated students and the experiment they sit.
//!
//! Real study data is not reproducible from a seed, so the pipeline runs on
//! synthetic students: latent per-rule mastery drives answer correctness and
//! pace, and each problem type teaches differently. The session loop walks
//! the fixed curriculum, asks the active condition's policy for a problem
//! type at every adaptive slot, and logs enough to rebuild every decision.
//!
//! [`student`] holds the generative model of one learner, [`session`] the
//! curriculum walk for one student, and [`experiment`] the three phases:
//! historical corpus, policy-training corpus, and the randomized trial.

mod experiment;
mod session;
mod student;

pub use experiment::{
    assemble_transitions, decision_observations, run_corpus_phase, run_history_phase,
    run_trial_phase, stratified_assign, train_policy, CorpusPhase, HistoryPhase, TrialPhase,
    CORPUS_PHASE, HISTORY_PHASE, TRIAL_PHASE,
};
pub use session::{
    pretest_probe, run_session, sessions_from_rows, AttemptRow, Condition, ConditionPolicy,
    Curriculum, DecisionInfo, DecisionTrace, Rationale, SessionLog, SimError, SlotRole,
    SESSIONS_SCHEMA, TRANSITIONS_SCHEMA,
};
pub use student::{bug_count, AttemptOutcome, SimStudent};
