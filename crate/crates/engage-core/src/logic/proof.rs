//! Proof graphs and whole-proof validation.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{check_rule_application, Formula, Rule};

/// Identifier of one statement in a proof, e.g. `"g1"` or `"d3"`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_string())
    }
}

/// Why a statement is allowed to appear in the proof.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Justification {
    /// A premise of the problem; has no parents.
    Given,
    /// Derived from earlier statements by one rule application.
    Derived { rule: Rule, parents: Vec<NodeId> },
}

impl Justification {
    pub fn derived(rule: Rule, parents: &[&str]) -> Self {
        Justification::Derived {
            rule,
            parents: parents.iter().map(|p| NodeId::from(*p)).collect(),
        }
    }
}

/// One statement in a proof graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofNode {
    pub id: NodeId,
    pub formula: Formula,
    pub justification: Justification,
}

/// A complete proof: nodes in presentation order plus the node that states
/// the conclusion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProofGraph {
    nodes: Vec<ProofNode>,
    conclusion_id: NodeId,
}

/// Structural problems that make a graph unprocessable, as opposed to merely
/// not a correct proof.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProofError {
    #[error("duplicate node id `{0}`")]
    DuplicateNodeId(NodeId),
    #[error("node `{node}` references missing parent `{parent}`")]
    DanglingParent { node: NodeId, parent: NodeId },
    #[error("cycle through node `{0}`")]
    CycleDetected(NodeId),
    #[error("conclusion node `{0}` is not in the graph")]
    MissingConclusion(NodeId),
}

/// Outcome of validating a structurally sound graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidationResult {
    /// True when every derived node is a correct rule application.
    pub valid: bool,
    /// First node (in presentation order) whose justification fails.
    pub first_error: Option<NodeId>,
}

impl ProofGraph {
    /// Builds a graph, rejecting duplicate ids and a missing conclusion node
    /// up front so later passes can index freely.
    pub fn new(nodes: Vec<ProofNode>, conclusion_id: NodeId) -> Result<Self, ProofError> {
        let mut seen = BTreeMap::new();
        for (idx, node) in nodes.iter().enumerate() {
            if seen.insert(node.id.clone(), idx).is_some() {
                return Err(ProofError::DuplicateNodeId(node.id.clone()));
            }
        }
        if !seen.contains_key(&conclusion_id) {
            return Err(ProofError::MissingConclusion(conclusion_id));
        }
        Ok(ProofGraph {
            nodes,
            conclusion_id,
        })
    }

    pub fn nodes(&self) -> &[ProofNode] {
        &self.nodes
    }

    pub fn conclusion_id(&self) -> &NodeId {
        &self.conclusion_id
    }

    pub fn node(&self, id: &NodeId) -> Option<&ProofNode> {
        self.nodes.iter().find(|n| n.id == *id)
    }

    /// The conclusion statement itself.
    pub fn conclusion(&self) -> &ProofNode {
        self.node(&self.conclusion_id)
            .expect("constructor checked the conclusion exists")
    }

    /// Formulas of the `Given` nodes, in presentation order.
    pub fn given_formulas(&self) -> Vec<&Formula> {
        self.nodes
            .iter()
            .filter(|n| n.justification == Justification::Given)
            .map(|n| &n.formula)
            .collect()
    }

    /// Ids of derived (non-given) nodes, in presentation order.
    pub fn derived_ids(&self) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| matches!(n.justification, Justification::Derived { .. }))
            .map(|n| n.id.clone())
            .collect()
    }

    /// Checks the whole proof.
    ///
    /// Structural defects (dangling parents, cycles) are errors: the graph
    /// cannot be judged at all. A graph that is well formed but contains a
    /// wrong rule application comes back `Ok` with `valid == false` and the
    /// first offending node, which is what the tutor shows the student.
    pub fn validate(&self) -> Result<ValidationResult, ProofError> {
        let index: BTreeMap<&NodeId, usize> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (&n.id, i))
            .collect();

        // Resolve all parent references before judging anything.
        for node in &self.nodes {
            if let Justification::Derived { parents, .. } = &node.justification {
                for parent in parents {
                    if !index.contains_key(parent) {
                        return Err(ProofError::DanglingParent {
                            node: node.id.clone(),
                            parent: parent.clone(),
                        });
                    }
                }
            }
        }
        self.check_acyclic(&index)?;

        // Judge nodes in presentation order so first_error is deterministic.
        for node in &self.nodes {
            let Justification::Derived { rule, parents } = &node.justification else {
                continue;
            };
            if parents.len() != rule.arity() {
                return Ok(ValidationResult {
                    valid: false,
                    first_error: Some(node.id.clone()),
                });
            }
            let premises: Vec<&Formula> = parents
                .iter()
                .map(|p| &self.nodes[index[p]].formula)
                .collect();
            let ok = check_rule_application(*rule, &premises, &node.formula)
                .expect("arity checked above");
            if !ok {
                return Ok(ValidationResult {
                    valid: false,
                    first_error: Some(node.id.clone()),
                });
            }
        }
        Ok(ValidationResult {
            valid: true,
            first_error: None,
        })
    }

    fn check_acyclic(&self, index: &BTreeMap<&NodeId, usize>) -> Result<(), ProofError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            White,
            Grey,
            Black,
        }
        let mut marks = vec![Mark::White; self.nodes.len()];
        // Iterative DFS along parent edges; a grey revisit is a cycle.
        for start in 0..self.nodes.len() {
            if marks[start] != Mark::White {
                continue;
            }
            let mut stack = vec![(start, 0usize)];
            marks[start] = Mark::Grey;
            while let Some(&mut (node, ref mut child)) = stack.last_mut() {
                let parents: &[NodeId] = match &self.nodes[node].justification {
                    Justification::Derived { parents, .. } => parents,
                    Justification::Given => &[],
                };
                if *child < parents.len() {
                    let next = index[&parents[*child]];
                    *child += 1;
                    match marks[next] {
                        Mark::Grey => {
                            return Err(ProofError::CycleDetected(self.nodes[next].id.clone()))
                        }
                        Mark::White => {
                            marks[next] = Mark::Grey;
                            stack.push((next, 0));
                        }
                        Mark::Black => {}
                    }
                } else {
                    marks[node] = Mark::Black;
                    stack.pop();
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::parse_formula;

    fn f(s: &str) -> Formula {
        parse_formula(s).unwrap()
    }

    fn node(id: &str, formula: &str, justification: Justification) -> ProofNode {
        ProofNode {
            id: NodeId::from(id),
            formula: f(formula),
            justification,
        }
    }

    fn valid_graph() -> ProofGraph {
        // P -> Q, P & R  ⊢  Q & R
        ProofGraph::new(
            vec![
                node("g1", "P -> Q", Justification::Given),
                node("g2", "P & R", Justification::Given),
                node(
                    "d1",
                    "P",
                    Justification::derived(Rule::Simplification, &["g2"]),
                ),
                node(
                    "d2",
                    "R",
                    Justification::derived(Rule::Simplification, &["g2"]),
                ),
                node(
                    "d3",
                    "Q",
                    Justification::derived(Rule::ModusPonens, &["g1", "d1"]),
                ),
                node(
                    "d4",
                    "Q & R",
                    Justification::derived(Rule::Conjunction, &["d3", "d2"]),
                ),
            ],
            NodeId::from("d4"),
        )
        .unwrap()
    }

    #[test]
    fn valid_proof_passes() {
        let result = valid_graph().validate().unwrap();
        assert!(result.valid);
        assert_eq!(result.first_error, None);
    }

    #[test]
    fn wrong_application_reports_first_offending_node() {
        let graph = ProofGraph::new(
            vec![
                node("g1", "P -> Q", Justification::Given),
                node("g2", "P & R", Justification::Given),
                // Wrong: S is not a conjunct of g2.
                node(
                    "d1",
                    "S",
                    Justification::derived(Rule::Simplification, &["g2"]),
                ),
                // Also wrong, but d1 comes first.
                node(
                    "d2",
                    "Q",
                    Justification::derived(Rule::ModusPonens, &["g1", "d1"]),
                ),
            ],
            NodeId::from("d2"),
        )
        .unwrap();
        let result = graph.validate().unwrap();
        assert!(!result.valid);
        assert_eq!(result.first_error, Some(NodeId::from("d1")));
    }

    #[test]
    fn arity_mismatch_marks_the_node_invalid() {
        // A Conjunction justified by a single parent is a wrong application,
        // not a structural error: the graph is still judgeable.
        let graph = ProofGraph::new(
            vec![
                node("g1", "P & Q", Justification::Given),
                node(
                    "d1",
                    "P & Q",
                    Justification::derived(Rule::Conjunction, &["g1"]),
                ),
            ],
            NodeId::from("d1"),
        )
        .unwrap();
        let result = graph.validate().unwrap();
        assert!(!result.valid);
        assert_eq!(result.first_error, Some(NodeId::from("d1")));
    }

    #[test]
    fn duplicate_id_rejected_at_construction() {
        let err = ProofGraph::new(
            vec![
                node("g1", "P", Justification::Given),
                node("g1", "Q", Justification::Given),
            ],
            NodeId::from("g1"),
        )
        .unwrap_err();
        assert_eq!(err, ProofError::DuplicateNodeId(NodeId::from("g1")));
    }

    #[test]
    fn missing_conclusion_rejected_at_construction() {
        let err = ProofGraph::new(
            vec![node("g1", "P", Justification::Given)],
            NodeId::from("d9"),
        )
        .unwrap_err();
        assert_eq!(err, ProofError::MissingConclusion(NodeId::from("d9")));
    }

    #[test]
    fn dangling_parent_detected() {
        let graph = ProofGraph::new(
            vec![
                node("g1", "P & Q", Justification::Given),
                node(
                    "d1",
                    "P",
                    Justification::derived(Rule::Simplification, &["g9"]),
                ),
            ],
            NodeId::from("d1"),
        )
        .unwrap();
        let err = graph.validate().unwrap_err();
        assert_eq!(
            err,
            ProofError::DanglingParent {
                node: NodeId::from("d1"),
                parent: NodeId::from("g9"),
            }
        );
    }

    #[test]
    fn cycle_detected() {
        let graph = ProofGraph::new(
            vec![
                node(
                    "d1",
                    "P",
                    Justification::derived(Rule::Simplification, &["d2"]),
                ),
                node(
                    "d2",
                    "P & Q",
                    Justification::derived(Rule::Conjunction, &["d1", "d1"]),
                ),
            ],
            NodeId::from("d2"),
        )
        .unwrap();
        assert!(matches!(
            graph.validate(),
            Err(ProofError::CycleDetected(_))
        ));
    }

    #[test]
    fn self_loop_is_a_cycle() {
        let graph = ProofGraph::new(
            vec![node(
                "d1",
                "P | P",
                Justification::derived(Rule::Addition, &["d1"]),
            )],
            NodeId::from("d1"),
        )
        .unwrap();
        assert_eq!(
            graph.validate().unwrap_err(),
            ProofError::CycleDetected(NodeId::from("d1"))
        );
    }

    #[test]
    fn accessors_expose_shape() {
        let graph = valid_graph();
        assert_eq!(graph.given_formulas().len(), 2);
        assert_eq!(graph.derived_ids().len(), 4);
        assert_eq!(graph.conclusion().formula, f("Q & R"));
    }
}
