//! The generative model of one simulated learner.
//!
//! A student is a bundle of latent traits: per-rule mastery in [0, 1], slip
//! and guess rates, a pace multiplier, and a hint habit. Mastery drives both
//! correctness and speed; attempting a problem raises mastery of the rules it
//! exercised, scaled by how much room is left to grow.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, LogNormal};

use crate::config::StudentConfig;
use crate::logic::{make_buggy, make_guided, Justification, Problem, Rule};
use crate::scoring::{ProblemKind, RuleApplication};

use super::session::SlotRole;

/// Planted errors per Buggy variant, ramping with curriculum level.
pub fn bug_count(level: u8) -> usize {
    ((level / 2) as usize).clamp(1, 3)
}

/// What one problem attempt produced, before any scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct AttemptOutcome {
    /// First-try correctness per exercised rule, in proof order.
    pub applications: Vec<RuleApplication>,
    /// Steps in the submitted solution, detours included.
    pub steps: usize,
    /// Seconds.
    pub duration: f64,
    pub hints: u32,
}

/// One simulated learner. Traits are fixed at sampling time; `mastery` is
/// the only state that evolves.
#[derive(Debug, Clone, PartialEq)]
pub struct SimStudent {
    pub mastery: BTreeMap<Rule, f64>,
    pub gain_ps: f64,
    pub gain_guided: f64,
    pub gain_buggy: f64,
    pub intro_gain: f64,
    pub slip: f64,
    pub guess: f64,
    /// Pace multiplier, median 1.0. Larger is slower.
    pub speed: f64,
    pub hint_propensity: f64,
}

impl SimStudent {
    /// Draws one student from the population the config describes.
    pub fn sample(cfg: &StudentConfig, rng: &mut ChaCha8Rng) -> SimStudent {
        let beta = Beta::new(cfg.mastery_alpha, cfg.mastery_beta)
            .expect("config validation keeps beta shapes positive");
        let mastery = Rule::ALL
            .into_iter()
            .map(|rule| (rule, beta.sample(rng)))
            .collect();
        let speed = LogNormal::new(0.0, cfg.speed_sigma)
            .expect("config validation keeps sigma finite")
            .sample(rng);
        let hint_propensity = (cfg.hint_propensity * rng.random_range(0.5..1.5)).clamp(0.0, 1.0);
        SimStudent {
            mastery,
            gain_ps: cfg.gain_ps,
            gain_guided: cfg.gain_guided,
            gain_buggy: cfg.gain_buggy,
            intro_gain: cfg.intro_gain,
            slip: cfg.slip,
            guess: cfg.guess,
            speed,
            hint_propensity,
        }
    }

    fn mastery_of(&self, rule: Rule) -> f64 {
        self.mastery.get(&rule).copied().unwrap_or(0.0)
    }

    /// The rules this attempt makes the student work through, in proof
    /// order. Problem solving exercises every derivation; Guided only the
    /// stripped justifications; Buggy the corrupted steps.
    fn exercised_rules(
        &self,
        problem: &Problem,
        kind: ProblemKind,
        cfg: &StudentConfig,
        rng: &mut ChaCha8Rng,
    ) -> Vec<Rule> {
        let reference = &problem.reference_solution;
        let rule_of = |id: &crate::logic::NodeId| -> Rule {
            match &reference
                .node(id)
                .expect("variant ids come from the reference")
                .justification
            {
                Justification::Derived { rule, .. } => *rule,
                Justification::Given => unreachable!("variants never target givens"),
            }
        };
        match kind {
            ProblemKind::Ps => reference
                .nodes()
                .iter()
                .filter_map(|n| match &n.justification {
                    Justification::Derived { rule, .. } => Some(*rule),
                    Justification::Given => None,
                })
                .collect(),
            ProblemKind::Guided => {
                let variant = make_guided(problem, cfg.guided_fraction, rng.random())
                    .expect("curriculum problems support guided variants");
                reference
                    .nodes()
                    .iter()
                    .filter(|n| variant.missing_justifications.contains(&n.id))
                    .map(|n| rule_of(&n.id))
                    .collect()
            }
            ProblemKind::Buggy => {
                let variant = make_buggy(problem, bug_count(problem.difficulty), rng.random())
                    .expect("curriculum problems support buggy variants");
                variant
                    .bugs
                    .iter()
                    .map(|bug| rule_of(bug.node_id()))
                    .collect()
            }
        }
    }

    /// Simulates one attempt and applies its learning effect.
    ///
    /// Intro slots are passive: the student watches a narrated solution, so
    /// there are no applications or hints, just time spent and a small gain
    /// on every rule the example uses.
    pub fn attempt(
        &mut self,
        problem: &Problem,
        kind: ProblemKind,
        role: SlotRole,
        cfg: &StudentConfig,
        rng: &mut ChaCha8Rng,
    ) -> AttemptOutcome {
        let ref_steps = problem.reference_steps();
        if role == SlotRole::Intro {
            let m_bar = mean_mastery(problem.required_rules.iter().map(|&r| self.mastery_of(r)));
            let duration = self.draw_duration(cfg, 0.4 * ref_steps as f64, m_bar, rng);
            for &rule in &problem.required_rules {
                let m = self.mastery_of(rule);
                self.mastery
                    .insert(rule, one_capped(m + self.intro_gain * (1.0 - m)));
            }
            return AttemptOutcome {
                applications: Vec::new(),
                steps: ref_steps,
                duration,
                hints: 0,
            };
        }

        let exercised = self.exercised_rules(problem, kind, cfg, rng);
        let m_bar = mean_mastery(exercised.iter().map(|&r| self.mastery_of(r)));

        let mut applications = Vec::with_capacity(exercised.len());
        let mut errors = 0usize;
        let mut hints = 0u32;
        for &rule in &exercised {
            let m = self.mastery_of(rule);
            let p = m * (1.0 - self.slip) + (1.0 - m) * self.guess;
            let correct = rng.random_bool(p);
            applications.push(RuleApplication { rule, correct });
            if !correct {
                errors += 1;
                // Tests withhold help; in training, struggling students ask.
                if role == SlotRole::Training && rng.random_bool(self.hint_propensity * (1.0 - m)) {
                    hints += 1;
                }
            }
        }

        // Worked-example types fix the solution structure, so detours only
        // lengthen a from-scratch proof.
        let steps = match kind {
            ProblemKind::Ps => ref_steps + errors,
            ProblemKind::Guided | ProblemKind::Buggy => ref_steps,
        };
        // Reading prefilled steps is cheaper than producing them.
        let effort = match kind {
            ProblemKind::Ps => (ref_steps + errors) as f64,
            ProblemKind::Guided => {
                0.4 * ref_steps as f64 + (exercised.len() + errors) as f64 * 0.65
            }
            ProblemKind::Buggy => 0.6 * ref_steps as f64 + (exercised.len() + errors) as f64 * 0.8,
        };
        let duration = self.draw_duration(cfg, effort, m_bar, rng);

        for rule in exercised.iter().copied().collect::<BTreeSet<Rule>>() {
            let m = self.mastery_of(rule);
            let gain = match kind {
                ProblemKind::Ps => self.gain_ps,
                ProblemKind::Guided => self.gain_guided,
                // Spotting a planted error requires already half-knowing the
                // rule, so the Buggy gain scales with current mastery and
                // vanishes for novices.
                ProblemKind::Buggy => self.gain_buggy * m,
            };
            self.mastery.insert(rule, one_capped(m + gain * (1.0 - m)));
        }

        AttemptOutcome {
            applications,
            steps,
            duration,
            hints,
        }
    }

    /// Lognormal duration with mean `base * pace * difficulty`, floored at
    /// one second.
    fn draw_duration(
        &self,
        cfg: &StudentConfig,
        effort_steps: f64,
        m_bar: f64,
        rng: &mut ChaCha8Rng,
    ) -> f64 {
        let expected =
            cfg.base_step_seconds * self.speed * (0.5 + (1.0 - m_bar)) * effort_steps.max(0.5);
        let sigma = cfg.time_sigma;
        let draw = LogNormal::new(expected.ln() - sigma * sigma / 2.0, sigma)
            .expect("expected duration is positive and finite")
            .sample(rng);
        draw.max(1.0)
    }
}

fn mean_mastery(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut n = 0usize;
    for v in values {
        sum += v;
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn one_capped(m: f64) -> f64 {
    m.min(1.0)
}
