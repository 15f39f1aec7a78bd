//! Per-problem scoring: the three-component composite and normalized
//! learning gain.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{Problem, Rule};

/// The three problem representations a policy can assign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ProblemKind {
    /// Conventional problem solving: the student derives everything.
    #[serde(rename = "PS")]
    Ps,
    /// Worked example with statements given and some justifications removed.
    Guided,
    /// Worked example with planted errors to find and fix.
    Buggy,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 3] = [ProblemKind::Ps, ProblemKind::Guided, ProblemKind::Buggy];

    pub fn label(self) -> &'static str {
        match self {
            ProblemKind::Ps => "PS",
            ProblemKind::Guided => "Guided",
            ProblemKind::Buggy => "Buggy",
        }
    }
}

/// One rule-checked action inside an attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleApplication {
    pub rule: Rule,
    pub correct: bool,
}

/// Everything the tutor records about one completed problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProblemAttempt {
    pub student_id: u32,
    pub problem_id: String,
    pub assigned: ProblemKind,
    pub rule_applications: Vec<RuleApplication>,
    pub steps_in_final_solution: usize,
    pub duration_seconds: f64,
    pub hints_requested: usize,
}

/// Normalized duration bounds for one level: at or under `t_fast` scores
/// full time credit, at or over `t_slow` scores none.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TimeBounds {
    pub t_fast: f64,
    pub t_slow: f64,
}

/// A scored attempt: three components in [0,1] and their 0-100 composite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProblemScore {
    pub accuracy: f64,
    pub optimality: f64,
    pub time_efficiency: f64,
    pub composite: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScoreError {
    #[error("time bounds must satisfy tFast < tSlow, got {t_fast} >= {t_slow}")]
    InvalidTimeBounds { t_fast: f64, t_slow: f64 },
    #[error("normalized learning gain is undefined at a perfect pretest")]
    CeilingPretest,
    #[error("cannot average an empty score list")]
    EmptyList,
}

fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

/// Scores a completed attempt with equal weight on accuracy, solution
/// optimality, and time efficiency.
pub fn composite_score(
    attempt: &ProblemAttempt,
    problem: &Problem,
    bounds: TimeBounds,
) -> Result<ProblemScore, ScoreError> {
    if bounds.t_fast >= bounds.t_slow || !bounds.t_fast.is_finite() || !bounds.t_slow.is_finite() {
        return Err(ScoreError::InvalidTimeBounds {
            t_fast: bounds.t_fast,
            t_slow: bounds.t_slow,
        });
    }
    assert!(
        attempt.steps_in_final_solution >= 1,
        "completed attempts take at least one step"
    );
    assert!(
        attempt.duration_seconds > 0.0,
        "completed attempts take positive time"
    );

    let total = attempt.rule_applications.len();
    let accuracy = if total == 0 {
        1.0
    } else {
        let correct = attempt
            .rule_applications
            .iter()
            .filter(|a| a.correct)
            .count();
        correct as f64 / total as f64
    };
    let optimality =
        clamp01(problem.reference_steps() as f64 / attempt.steps_in_final_solution as f64);
    let time_efficiency =
        clamp01((bounds.t_slow - attempt.duration_seconds) / (bounds.t_slow - bounds.t_fast));
    Ok(ProblemScore {
        accuracy,
        optimality,
        time_efficiency,
        composite: 100.0 * (accuracy + optimality + time_efficiency) / 3.0,
    })
}

/// Normalized learning gain, `(post - pre) / sqrt(100 - pre)`.
///
/// Undefined at a pretest of 100; those students are excluded from gain
/// aggregation rather than clamped.
pub fn nlg(pretest: f64, posttest: f64) -> Result<f64, ScoreError> {
    assert!((0.0..=100.0).contains(&pretest) && (0.0..=100.0).contains(&posttest));
    if pretest >= 100.0 {
        return Err(ScoreError::CeilingPretest);
    }
    Ok((posttest - pretest) / (100.0 - pretest).sqrt())
}

/// Mean of composite scores, the per-student TestScore.
pub fn test_score_average(scores: &[f64]) -> Result<f64, ScoreError> {
    if scores.is_empty() {
        return Err(ScoreError::EmptyList);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}
