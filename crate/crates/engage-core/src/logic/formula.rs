//! Formula AST and its canonical text rendering.

use std::collections::BTreeSet;
use std::fmt;

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A propositional formula over single-letter variables `A`..`Z`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Formula {
    Var(char),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    /// Material implication, `->`.
    Imp(Box<Formula>, Box<Formula>),
    /// Biconditional, `<->`.
    Iff(Box<Formula>, Box<Formula>),
}

impl Formula {
    pub fn var(name: char) -> Self {
        Formula::Var(name)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Formula) -> Self {
        Formula::Not(Box::new(inner))
    }

    pub fn and(left: Formula, right: Formula) -> Self {
        Formula::And(Box::new(left), Box::new(right))
    }

    pub fn or(left: Formula, right: Formula) -> Self {
        Formula::Or(Box::new(left), Box::new(right))
    }

    pub fn imp(left: Formula, right: Formula) -> Self {
        Formula::Imp(Box::new(left), Box::new(right))
    }

    pub fn iff(left: Formula, right: Formula) -> Self {
        Formula::Iff(Box::new(left), Box::new(right))
    }

    /// All variables appearing in the formula, in alphabetical order.
    pub fn variables(&self) -> BTreeSet<char> {
        let mut out = BTreeSet::new();
        self.collect_variables(&mut out);
        out
    }

    fn collect_variables(&self, out: &mut BTreeSet<char>) {
        match self {
            Formula::Var(v) => {
                out.insert(*v);
            }
            Formula::Not(inner) => inner.collect_variables(out),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Imp(l, r) | Formula::Iff(l, r) => {
                l.collect_variables(out);
                r.collect_variables(out);
            }
        }
    }

    /// Evaluates the formula under an assignment given as `lookup`.
    ///
    /// `lookup` must cover every variable in the formula.
    pub fn eval(&self, lookup: &impl Fn(char) -> bool) -> bool {
        match self {
            Formula::Var(v) => lookup(*v),
            Formula::Not(inner) => !inner.eval(lookup),
            Formula::And(l, r) => l.eval(lookup) && r.eval(lookup),
            Formula::Or(l, r) => l.eval(lookup) || r.eval(lookup),
            Formula::Imp(l, r) => !l.eval(lookup) || r.eval(lookup),
            Formula::Iff(l, r) => l.eval(lookup) == r.eval(lookup),
        }
    }

    /// Binding strength used to decide where parentheses are needed.
    fn precedence(&self) -> u8 {
        match self {
            Formula::Iff(..) => 1,
            Formula::Imp(..) => 2,
            Formula::Or(..) => 3,
            Formula::And(..) => 4,
            Formula::Not(..) => 5,
            Formula::Var(..) => 6,
        }
    }

    fn write(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Var(v) => write!(f, "{v}"),
            Formula::Not(inner) => {
                write!(f, "~")?;
                self.write_child(f, inner, self.precedence())
            }
            Formula::And(l, r) | Formula::Or(l, r) => {
                // Left-associative: repeated same-level ops on the left stay bare.
                let op = if matches!(self, Formula::And(..)) {
                    "&"
                } else {
                    "|"
                };
                self.write_child(f, l, self.precedence())?;
                write!(f, " {op} ")?;
                self.write_child(f, r, self.precedence() + 1)
            }
            Formula::Imp(l, r) | Formula::Iff(l, r) => {
                // Right-associative: the left side needs parens at equal level.
                let op = if matches!(self, Formula::Imp(..)) {
                    "->"
                } else {
                    "<->"
                };
                self.write_child(f, l, self.precedence() + 1)?;
                write!(f, " {op} ")?;
                self.write_child(f, r, self.precedence())
            }
        }
    }

    fn write_child(
        &self,
        f: &mut fmt::Formatter<'_>,
        child: &Formula,
        min_prec: u8,
    ) -> fmt::Result {
        if child.precedence() < min_prec {
            write!(f, "(")?;
            child.write(f)?;
            write!(f, ")")
        } else {
            child.write(f)
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.write(f)
    }
}

// Formulas serialize as their text form so bank and log files stay readable.
impl Serialize for Formula {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Formula {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let text = String::deserialize(deserializer)?;
        crate::logic::parse_formula(&text).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn display_inserts_minimal_parens() {
        let f = Formula::and(
            Formula::or(Formula::var('A'), Formula::var('B')),
            Formula::not(Formula::var('C')),
        );
        assert_eq!(f.to_string(), "(A | B) & ~C");

        let chain = Formula::imp(
            Formula::var('A'),
            Formula::imp(Formula::var('B'), Formula::var('C')),
        );
        assert_eq!(chain.to_string(), "A -> B -> C");

        let left = Formula::imp(
            Formula::imp(Formula::var('A'), Formula::var('B')),
            Formula::var('C'),
        );
        assert_eq!(left.to_string(), "(A -> B) -> C");

        let nested_and = Formula::and(
            Formula::var('A'),
            Formula::and(Formula::var('B'), Formula::var('C')),
        );
        assert_eq!(nested_and.to_string(), "A & (B & C)");
    }

    #[test]
    fn eval_matches_truth_table_for_connectives() {
        let p = Formula::var('P');
        let q = Formula::var('Q');
        let cases = [(false, false), (false, true), (true, false), (true, true)];
        for (pv, qv) in cases {
            let lookup = |v: char| if v == 'P' { pv } else { qv };
            assert_eq!(Formula::and(p.clone(), q.clone()).eval(&lookup), pv && qv);
            assert_eq!(Formula::or(p.clone(), q.clone()).eval(&lookup), pv || qv);
            assert_eq!(Formula::imp(p.clone(), q.clone()).eval(&lookup), !pv || qv);
            assert_eq!(Formula::iff(p.clone(), q.clone()).eval(&lookup), pv == qv);
        }
        assert!(Formula::not(Formula::var('P')).eval(&|_| false));
    }

    #[test]
    fn variables_are_sorted_and_deduplicated() {
        let f = Formula::and(
            Formula::var('Q'),
            Formula::or(Formula::var('A'), Formula::var('Q')),
        );
        assert_eq!(
            f.variables().into_iter().collect::<Vec<_>>(),
            vec!['A', 'Q']
        );
    }
}
