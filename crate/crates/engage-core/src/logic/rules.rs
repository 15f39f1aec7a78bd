//! The eight inference rules and the semantic entailment check.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Formula;

/// Inference rules available to proofs, in curriculum order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "MP")]
    ModusPonens,
    #[serde(rename = "MT")]
    ModusTollens,
    #[serde(rename = "DS")]
    DisjunctiveSyllogism,
    #[serde(rename = "HS")]
    HypotheticalSyllogism,
    #[serde(rename = "Simp")]
    Simplification,
    #[serde(rename = "Conj")]
    Conjunction,
    #[serde(rename = "Add")]
    Addition,
    #[serde(rename = "Res")]
    Resolution,
}

impl Rule {
    pub const ALL: [Rule; 8] = [
        Rule::ModusPonens,
        Rule::ModusTollens,
        Rule::DisjunctiveSyllogism,
        Rule::HypotheticalSyllogism,
        Rule::Simplification,
        Rule::Conjunction,
        Rule::Addition,
        Rule::Resolution,
    ];

    /// Short identifier used in files and logs.
    pub fn id(self) -> &'static str {
        match self {
            Rule::ModusPonens => "MP",
            Rule::ModusTollens => "MT",
            Rule::DisjunctiveSyllogism => "DS",
            Rule::HypotheticalSyllogism => "HS",
            Rule::Simplification => "Simp",
            Rule::Conjunction => "Conj",
            Rule::Addition => "Add",
            Rule::Resolution => "Res",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Rule::ModusPonens => "Modus Ponens",
            Rule::ModusTollens => "Modus Tollens",
            Rule::DisjunctiveSyllogism => "Disjunctive Syllogism",
            Rule::HypotheticalSyllogism => "Hypothetical Syllogism",
            Rule::Simplification => "Simplification",
            Rule::Conjunction => "Conjunction",
            Rule::Addition => "Addition",
            Rule::Resolution => "Resolution",
        }
    }

    /// Number of premises the rule consumes.
    pub fn arity(self) -> usize {
        match self {
            Rule::Simplification | Rule::Addition => 1,
            _ => 2,
        }
    }

    /// Stable position of the rule in feature vectors and mastery tables.
    pub fn index(self) -> usize {
        Rule::ALL
            .iter()
            .position(|r| *r == self)
            .expect("rule is in ALL")
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown rule `{0}`")]
pub struct UnknownRule(String);

impl FromStr for Rule {
    type Err = UnknownRule;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rule::ALL
            .iter()
            .copied()
            .find(|r| r.id() == s)
            .ok_or_else(|| UnknownRule(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RuleError {
    #[error("{rule} takes {expected} premise(s), got {got}")]
    ArityMismatch {
        rule: Rule,
        expected: usize,
        got: usize,
    },
}

/// True when `a` and `b` are syntactic complements (`X` / `~X`).
fn complementary(a: &Formula, b: &Formula) -> bool {
    matches!(a, Formula::Not(inner) if **inner == *b)
        || matches!(b, Formula::Not(inner) if **inner == *a)
}

/// Checks whether `derived` follows from `premises` by one application of
/// `rule`. Premise order does not matter; matching is purely structural, so
/// e.g. Modus Tollens needs the literal negation `~B`, not an equivalent.
pub fn check_rule_application(
    rule: Rule,
    premises: &[&Formula],
    derived: &Formula,
) -> Result<bool, RuleError> {
    if premises.len() != rule.arity() {
        return Err(RuleError::ArityMismatch {
            rule,
            expected: rule.arity(),
            got: premises.len(),
        });
    }
    let ok = match rule.arity() {
        1 => check_unary(rule, premises[0], derived),
        2 => {
            check_ordered(rule, premises[0], premises[1], derived)
                || check_ordered(rule, premises[1], premises[0], derived)
        }
        _ => unreachable!("all rules have arity 1 or 2"),
    };
    Ok(ok)
}

fn check_unary(rule: Rule, premise: &Formula, derived: &Formula) -> bool {
    match rule {
        // From A & B, derive A (or B).
        Rule::Simplification => {
            matches!(premise, Formula::And(l, r) if **l == *derived || **r == *derived)
        }
        // From A, derive A | B (or B | A).
        Rule::Addition => {
            matches!(derived, Formula::Or(l, r) if **l == *premise || **r == *premise)
        }
        _ => unreachable!("only Simp and Add are unary"),
    }
}

fn check_ordered(rule: Rule, first: &Formula, second: &Formula, derived: &Formula) -> bool {
    match rule {
        // From A -> B and A, derive B.
        Rule::ModusPonens => {
            matches!(first, Formula::Imp(a, b) if **a == *second && **b == *derived)
        }
        // From A -> B and ~B, derive ~A.
        Rule::ModusTollens => match first {
            Formula::Imp(a, b) => {
                matches!(second, Formula::Not(n) if **n == **b)
                    && matches!(derived, Formula::Not(n) if **n == **a)
            }
            _ => false,
        },
        // From A | B and ~A, derive B (or from A | B and ~B, derive A).
        Rule::DisjunctiveSyllogism => match first {
            Formula::Or(a, b) => {
                (matches!(second, Formula::Not(n) if **n == **a) && **b == *derived)
                    || (matches!(second, Formula::Not(n) if **n == **b) && **a == *derived)
            }
            _ => false,
        },
        // From A -> B and B -> C, derive A -> C.
        Rule::HypotheticalSyllogism => match (first, second) {
            (Formula::Imp(a, b1), Formula::Imp(b2, c)) if **b1 == **b2 => {
                matches!(derived, Formula::Imp(da, dc) if **da == **a && **dc == **c)
            }
            _ => false,
        },
        // From A and B, derive A & B (either order).
        Rule::Conjunction => match derived {
            Formula::And(l, r) => {
                (**l == *first && **r == *second) || (**l == *second && **r == *first)
            }
            _ => false,
        },
        // From A | B and ~A | C, derive B | C (any complementary pair, either
        // output order).
        Rule::Resolution => match (first, second) {
            (Formula::Or(a, b), Formula::Or(c, d)) => {
                let pairs: [(&Formula, &Formula, &Formula, &Formula); 4] =
                    [(a, c, b, d), (a, d, b, c), (b, c, a, d), (b, d, a, c)];
                pairs.iter().any(|(x, y, rest1, rest2)| {
                    complementary(x, y)
                        && matches!(derived, Formula::Or(l, r)
                            if (**l == **rest1 && **r == **rest2)
                                || (**l == **rest2 && **r == **rest1))
                })
            }
            _ => false,
        },
        _ => unreachable!("only binary rules reach check_ordered"),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EntailError {
    #[error("entailment check supports at most {limit} distinct variables, got {got}")]
    TooManyVariables { limit: usize, got: usize },
}

const MAX_ENTAIL_VARS: usize = 20;

/// Semantic entailment by exhaustive truth-table enumeration.
///
/// Returns true when every assignment satisfying all `premises` also
/// satisfies `conclusion`. Capped at 20 distinct variables (about a million
/// rows); the curriculum never gets near that.
pub fn entails(premises: &[&Formula], conclusion: &Formula) -> Result<bool, EntailError> {
    let mut vars = conclusion.variables();
    for p in premises {
        vars.extend(p.variables());
    }
    let vars: Vec<char> = vars.into_iter().collect();
    if vars.len() > MAX_ENTAIL_VARS {
        return Err(EntailError::TooManyVariables {
            limit: MAX_ENTAIL_VARS,
            got: vars.len(),
        });
    }
    for mask in 0u32..(1u32 << vars.len()) {
        let lookup = |v: char| {
            let idx = vars
                .iter()
                .position(|&x| x == v)
                .expect("var collected above");
            mask & (1 << idx) != 0
        };
        if premises.iter().all(|p| p.eval(&lookup)) && !conclusion.eval(&lookup) {
            return Ok(false);
        }
    }
    Ok(true)
}
