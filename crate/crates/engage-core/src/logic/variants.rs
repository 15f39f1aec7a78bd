//! Guided and Buggy worked-example variants derived from reference solutions.
//!
//! A Guided variant keeps every statement but strips the justification off a
//! seeded selection of derived nodes; the student reconnects them. A Buggy
//! variant mutates a seeded selection of derived statements or rule labels so
//! the proof no longer validates; the student finds and fixes every bug.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use super::{Formula, Justification, NodeId, Problem, ProofGraph, ProofNode, Rule};
use crate::seeded_rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VariantError {
    #[error("problem {0} has fewer than 2 derived nodes")]
    NoDerivedNodes(String),
    #[error("removal fraction must be in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("requested {requested} bug(s) but only {available} node(s) are eligible")]
    BugBudgetExceeded { requested: usize, available: usize },
    #[error("no justification supplied for node {0}")]
    MissingAnswer(NodeId),
}

/// One statement of a Guided variant; `justification` is `None` for the
/// steps the student must reconnect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuidedNode {
    pub id: NodeId,
    pub formula: Formula,
    pub justification: Option<Justification>,
}

/// A worked example with all statements present and some justifications
/// removed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuidedVariant {
    pub base_problem_id: String,
    pub nodes: Vec<GuidedNode>,
    pub conclusion_id: NodeId,
    pub missing_justifications: BTreeSet<NodeId>,
    /// Step-specific hint for every missing justification.
    pub hints: BTreeMap<NodeId, String>,
}

impl GuidedVariant {
    /// Fills the missing justifications back in and returns the resulting
    /// proof. `answers` maps node id to the chosen rule and parent ids.
    pub fn complete(
        &self,
        answers: &BTreeMap<NodeId, (Rule, Vec<NodeId>)>,
    ) -> Result<ProofGraph, VariantError> {
        let mut nodes = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let justification = match &node.justification {
                Some(j) => j.clone(),
                None => {
                    let (rule, parents) = answers
                        .get(&node.id)
                        .ok_or_else(|| VariantError::MissingAnswer(node.id.clone()))?;
                    Justification::Derived {
                        rule: *rule,
                        parents: parents.clone(),
                    }
                }
            };
            nodes.push(ProofNode {
                id: node.id.clone(),
                formula: node.formula.clone(),
                justification,
            });
        }
        Ok(ProofGraph::new(nodes, self.conclusion_id.clone())
            .expect("variant nodes keep the reference ids"))
    }
}

/// The reference answers for a Guided variant, read off the base problem's
/// solution. The simulated student submits these once it works out the step.
pub fn reference_completion(
    problem: &Problem,
    variant: &GuidedVariant,
) -> BTreeMap<NodeId, (Rule, Vec<NodeId>)> {
    let mut answers = BTreeMap::new();
    for id in &variant.missing_justifications {
        let node = problem
            .reference_solution
            .node(id)
            .expect("missing ids come from the reference solution");
        if let Justification::Derived { rule, parents } = &node.justification {
            answers.insert(id.clone(), (*rule, parents.clone()));
        }
    }
    answers
}

fn hint_class(rule: Rule) -> &'static str {
    match rule {
        Rule::ModusPonens | Rule::ModusTollens => "a conditional rule",
        Rule::DisjunctiveSyllogism | Rule::Resolution => "a disjunction rule",
        Rule::HypotheticalSyllogism => "a chaining rule",
        Rule::Simplification => "a breakdown rule",
        Rule::Conjunction => "a combining rule",
        Rule::Addition => "a weakening rule",
    }
}

/// Builds a Guided variant by stripping `ceil(removal_fraction * derived)`
/// justifications, selected with the given seed.
pub fn make_guided(
    problem: &Problem,
    removal_fraction: f64,
    seed: u64,
) -> Result<GuidedVariant, VariantError> {
    if !(removal_fraction > 0.0 && removal_fraction <= 1.0) {
        return Err(VariantError::InvalidFraction(removal_fraction));
    }
    let derived = problem.reference_solution.derived_ids();
    if derived.len() < 2 {
        return Err(VariantError::NoDerivedNodes(problem.id.clone()));
    }
    let count = (removal_fraction * derived.len() as f64).ceil() as usize;
    let count = count.min(derived.len());

    let mut rng = seeded_rng(seed);
    let mut pool = derived.clone();
    pool.shuffle(&mut rng);
    let chosen: BTreeSet<NodeId> = pool.into_iter().take(count).collect();

    let mut nodes = Vec::new();
    let mut hints = BTreeMap::new();
    for node in problem.reference_solution.nodes() {
        let strip = chosen.contains(&node.id);
        if strip {
            let Justification::Derived { rule, parents } = &node.justification else {
                unreachable!("only derived nodes are selected");
            };
            let subgoals: Vec<String> = parents
                .iter()
                .map(|p| {
                    problem
                        .reference_solution
                        .node(p)
                        .expect("reference parents resolve")
                        .formula
                        .to_string()
                })
                .collect();
            hints.insert(
                node.id.clone(),
                format!("Apply {} to {}.", hint_class(*rule), subgoals.join(" and ")),
            );
        }
        nodes.push(GuidedNode {
            id: node.id.clone(),
            formula: node.formula.clone(),
            justification: if strip {
                None
            } else {
                Some(node.justification.clone())
            },
        });
    }

    Ok(GuidedVariant {
        base_problem_id: problem.id.clone(),
        nodes,
        conclusion_id: problem.reference_solution.conclusion_id().clone(),
        missing_justifications: chosen,
        hints,
    })
}

/// What a single bug corrupted: a statement's formula or a step's rule label.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BugKind {
    Statement,
    Rule,
}

/// One planted error, with enough information to fix it and to tell whether
/// a partially repaired graph still contains it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bug {
    Statement {
        node_id: NodeId,
        corrupted: Formula,
        correct: Formula,
    },
    Rule {
        node_id: NodeId,
        corrupted: Rule,
        correct: Rule,
    },
}

impl Bug {
    pub fn node_id(&self) -> &NodeId {
        match self {
            Bug::Statement { node_id, .. } | Bug::Rule { node_id, .. } => node_id,
        }
    }

    pub fn kind(&self) -> BugKind {
        match self {
            Bug::Statement { .. } => BugKind::Statement,
            Bug::Rule { .. } => BugKind::Rule,
        }
    }
}

/// A worked example with planted errors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BuggyVariant {
    pub base_problem_id: String,
    /// Reference solution with every bug's corruption applied.
    pub nodes: Vec<ProofNode>,
    pub conclusion_id: NodeId,
    pub bugs: Vec<Bug>,
}

impl BuggyVariant {
    /// The corrupted proof as presented to the student. Always fails
    /// validation.
    pub fn graph(&self) -> ProofGraph {
        ProofGraph::new(self.nodes.clone(), self.conclusion_id.clone())
            .expect("mutations never touch node ids")
    }

    /// Restores every bug's correct value.
    pub fn fix_all(&self) -> ProofGraph {
        let mut graph = self.graph();
        for bug in &self.bugs {
            graph = apply_fix(&graph, bug);
        }
        graph
    }

    /// How many bugs are still present in `current`. A node counts as fixed
    /// only once it carries the correct value again.
    pub fn remaining_bugs(&self, current: &ProofGraph) -> usize {
        self.bugs
            .iter()
            .filter(|bug| {
                let node = current
                    .node(bug.node_id())
                    .expect("repairs never delete nodes");
                match bug {
                    Bug::Statement { correct, .. } => node.formula != *correct,
                    Bug::Rule { correct, .. } => !matches!(&node.justification,
                            Justification::Derived { rule, .. } if rule == correct),
                }
            })
            .count()
    }
}

/// Returns `graph` with one bug's correct value restored.
pub fn apply_fix(graph: &ProofGraph, bug: &Bug) -> ProofGraph {
    let nodes = graph
        .nodes()
        .iter()
        .map(|node| {
            if node.id != *bug.node_id() {
                return node.clone();
            }
            let mut fixed = node.clone();
            match bug {
                Bug::Statement { correct, .. } => fixed.formula = correct.clone(),
                Bug::Rule { correct, .. } => {
                    if let Justification::Derived { rule, .. } = &mut fixed.justification {
                        *rule = *correct;
                    }
                }
            }
            fixed
        })
        .collect();
    ProofGraph::new(nodes, graph.conclusion_id().clone()).expect("fixes never touch node ids")
}

/// Candidate corruptions for one node, in a fixed order the RNG picks from.
enum Mutation {
    Statement(Formula),
    Rule(Rule),
}

/// Builds a Buggy variant with exactly `bug_count` planted errors.
///
/// Bugs target derived non-conclusion nodes only. Each candidate corruption
/// is verified to break validation on its own before it can be chosen, so a
/// plausible-looking mutation that happens to leave the proof correct (say,
/// the other conjunct where either conjunct validates downstream) is never
/// planted.
pub fn make_buggy(
    problem: &Problem,
    bug_count: usize,
    seed: u64,
) -> Result<BuggyVariant, VariantError> {
    let reference = &problem.reference_solution;
    let eligible: Vec<NodeId> = reference
        .derived_ids()
        .into_iter()
        .filter(|id| id != reference.conclusion_id())
        .collect();
    if bug_count == 0 || bug_count > eligible.len() {
        return Err(VariantError::BugBudgetExceeded {
            requested: bug_count,
            available: eligible.len(),
        });
    }

    let mut rng = seeded_rng(seed);
    let mut pool = eligible;
    pool.shuffle(&mut rng);
    let mut targets: Vec<NodeId> = pool.into_iter().take(bug_count).collect();
    let order: BTreeMap<&NodeId, usize> = reference
        .nodes()
        .iter()
        .enumerate()
        .map(|(i, n)| (&n.id, i))
        .collect();
    targets.sort_by_key(|id| order[id]);

    let mut nodes: Vec<ProofNode> = reference.nodes().to_vec();
    let mut bugs = Vec::new();
    for target in targets {
        let node = reference
            .node(&target)
            .expect("targets come from the reference");
        let Justification::Derived { rule, parents } = &node.justification else {
            unreachable!("only derived nodes are targeted");
        };

        let mut candidates = Vec::new();
        for formula in statement_mutations(reference, node, *rule, parents) {
            candidates.push(Mutation::Statement(formula));
        }
        for swapped in Rule::ALL {
            if swapped != *rule {
                candidates.push(Mutation::Rule(swapped));
            }
        }
        candidates.retain(|m| breaks_alone(reference, &target, m));
        // At least the arity-mismatched rule swaps always survive the filter.
        assert!(
            !candidates.is_empty(),
            "no effective corruption for {target}"
        );

        let chosen = &candidates[rng.random_range(0..candidates.len())];
        let slot = nodes
            .iter_mut()
            .find(|n| n.id == target)
            .expect("target exists");
        match chosen {
            Mutation::Statement(corrupted) => {
                bugs.push(Bug::Statement {
                    node_id: target.clone(),
                    corrupted: corrupted.clone(),
                    correct: slot.formula.clone(),
                });
                slot.formula = corrupted.clone();
            }
            Mutation::Rule(corrupted) => {
                bugs.push(Bug::Rule {
                    node_id: target.clone(),
                    corrupted: *corrupted,
                    correct: *rule,
                });
                if let Justification::Derived { rule, .. } = &mut slot.justification {
                    *rule = *corrupted;
                }
            }
        }
    }

    let variant = BuggyVariant {
        base_problem_id: problem.id.clone(),
        nodes,
        conclusion_id: reference.conclusion_id().clone(),
        bugs,
    };
    debug_assert!(
        !variant
            .graph()
            .validate()
            .expect("mutations keep the graph well formed")
            .valid,
        "assembled buggy variant must fail validation"
    );
    Ok(variant)
}

/// Statement-level corruptions that are plausible slips: keeping the wrong
/// conjunct of a Simplification, dropping one negation, swapping the operands
/// of the top-level connective.
fn statement_mutations(
    reference: &ProofGraph,
    node: &ProofNode,
    rule: Rule,
    parents: &[NodeId],
) -> Vec<Formula> {
    let mut out = Vec::new();
    if rule == Rule::Simplification {
        if let Some(parent) = parents.first().and_then(|p| reference.node(p)) {
            if let Formula::And(l, r) = &parent.formula {
                let other = if **l == node.formula {
                    (**r).clone()
                } else {
                    (**l).clone()
                };
                if other != node.formula {
                    out.push(other);
                }
            }
        }
    }
    for dropped in drop_one_negation(&node.formula) {
        if dropped != node.formula {
            out.push(dropped);
        }
    }
    if let Some(swapped) = swap_operands(&node.formula) {
        if swapped != node.formula {
            out.push(swapped);
        }
    }
    out
}

/// Every formula obtained by deleting exactly one negation node.
fn drop_one_negation(f: &Formula) -> Vec<Formula> {
    match f {
        Formula::Var(_) => Vec::new(),
        Formula::Not(inner) => {
            let mut out = vec![(**inner).clone()];
            out.extend(drop_one_negation(inner).into_iter().map(Formula::not));
            out
        }
        Formula::And(l, r) | Formula::Or(l, r) | Formula::Imp(l, r) | Formula::Iff(l, r) => {
            let rebuild = |a: Formula, b: Formula| match f {
                Formula::And(..) => Formula::and(a, b),
                Formula::Or(..) => Formula::or(a, b),
                Formula::Imp(..) => Formula::imp(a, b),
                Formula::Iff(..) => Formula::iff(a, b),
                _ => unreachable!(),
            };
            let mut out = Vec::new();
            for v in drop_one_negation(l) {
                out.push(rebuild(v, (**r).clone()));
            }
            for v in drop_one_negation(r) {
                out.push(rebuild((**l).clone(), v));
            }
            out
        }
    }
}

fn swap_operands(f: &Formula) -> Option<Formula> {
    match f {
        Formula::And(l, r) => Some(Formula::and((**r).clone(), (**l).clone())),
        Formula::Or(l, r) => Some(Formula::or((**r).clone(), (**l).clone())),
        Formula::Imp(l, r) => Some(Formula::imp((**r).clone(), (**l).clone())),
        Formula::Iff(l, r) => Some(Formula::iff((**r).clone(), (**l).clone())),
        _ => None,
    }
}

/// True when applying just this mutation to the pristine reference makes
/// validation fail somewhere.
fn breaks_alone(reference: &ProofGraph, target: &NodeId, mutation: &Mutation) -> bool {
    let nodes: Vec<ProofNode> = reference
        .nodes()
        .iter()
        .map(|n| {
            if n.id != *target {
                return n.clone();
            }
            let mut mutated = n.clone();
            match mutation {
                Mutation::Statement(formula) => mutated.formula = formula.clone(),
                Mutation::Rule(rule) => {
                    if let Justification::Derived { rule: r, .. } = &mut mutated.justification {
                        *r = *rule;
                    }
                }
            }
            mutated
        })
        .collect();
    let graph = ProofGraph::new(nodes, reference.conclusion_id().clone())
        .expect("mutation keeps ids intact");
    match graph.validate() {
        Ok(result) => !result.valid,
        Err(_) => true,
    }
}
