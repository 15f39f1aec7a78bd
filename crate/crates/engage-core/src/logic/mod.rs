//! Propositional proof kernel.
//!
//! Formulas use single uppercase letters as variables and the connectives
//! `~`, `&`, `|`, `->`, `<->`. Proofs are DAGs of statements justified either
//! as givens or by one of eight natural-deduction rules; [`ProofGraph::validate`]
//! checks a whole graph and [`entails`] gives the semantic ground truth the
//! rule schemas are tested against.

mod bank;
mod formula;
mod parser;
mod proof;
mod rules;
mod variants;

pub use bank::{BankError, LevelBank, Problem, ProblemBank};
pub use formula::Formula;
pub use parser::{parse_formula, ParseError};
pub use proof::{Justification, NodeId, ProofError, ProofGraph, ProofNode, ValidationResult};
pub use rules::{check_rule_application, entails, EntailError, Rule, RuleError};
pub use variants::{
    make_buggy, make_guided, reference_completion, Bug, BugKind, BuggyVariant, GuidedNode,
    GuidedVariant, VariantError,
};
