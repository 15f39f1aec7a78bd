//! Problem bank: problems, per-level files, and the validating loader.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::{
    Formula, Justification, NodeId, ProofError, ProofGraph, ProofNode, Rule, ValidationResult,
};

/// A proof exercise: premises, target conclusion, and one reference solution.
#[derive(Debug, Clone)]
pub struct Problem {
    /// `level.index`, e.g. `"5.2"`.
    pub id: String,
    pub givens: Vec<Formula>,
    pub conclusion: Formula,
    pub reference_solution: ProofGraph,
    /// Exactly the rules used by the reference solution.
    pub required_rules: BTreeSet<Rule>,
    /// Curriculum level, 1-7.
    pub difficulty: u8,
}

impl Problem {
    /// Number of derived steps in the reference solution.
    pub fn reference_steps(&self) -> usize {
        self.reference_solution.derived_ids().len()
    }

    /// Judges a candidate solution against this problem.
    ///
    /// On top of [`ProofGraph::validate`], the candidate must state the
    /// problem's givens (no extras under `Given`), and its conclusion node
    /// must carry the problem's conclusion formula.
    pub fn validate_solution(&self, graph: &ProofGraph) -> Result<ValidationResult, ProofError> {
        let result = graph.validate()?;
        if !result.valid {
            return Ok(result);
        }
        let mut wanted: Vec<&Formula> = self.givens.iter().collect();
        for node in graph.nodes() {
            if node.justification == Justification::Given {
                match wanted.iter().position(|f| **f == node.formula) {
                    Some(pos) => {
                        wanted.remove(pos);
                    }
                    None => {
                        return Ok(ValidationResult {
                            valid: false,
                            first_error: Some(node.id.clone()),
                        })
                    }
                }
            }
        }
        if graph.conclusion().formula != self.conclusion {
            return Ok(ValidationResult {
                valid: false,
                first_error: Some(graph.conclusion_id().clone()),
            });
        }
        Ok(ValidationResult {
            valid: true,
            first_error: None,
        })
    }
}

/// All problems of one curriculum level, in file order.
#[derive(Debug, Clone)]
pub struct LevelBank {
    pub level: u8,
    pub problems: Vec<Problem>,
}

/// The full problem bank, levels sorted ascending.
#[derive(Debug, Clone)]
pub struct ProblemBank {
    levels: Vec<LevelBank>,
}

#[derive(Debug, Error)]
pub enum BankError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{name}: not valid bank JSON: {source}")]
    Json {
        name: String,
        source: serde_json::Error,
    },
    #[error("no level files (level-*.json) found in {0}")]
    EmptyBank(PathBuf),
    #[error("{name}: level must be 1-7, got {level}")]
    BadLevel { name: String, level: u64 },
    #[error("level {level} appears more than once")]
    DuplicateLevel { level: u8 },
    #[error("problem {problem}: id does not start with level {level}")]
    IdLevelMismatch { problem: String, level: u8 },
    #[error("problem id {0} appears more than once")]
    DuplicateProblem(String),
    #[error("problem {problem}: node {node}: {reason}")]
    BadNode {
        problem: String,
        node: String,
        reason: &'static str,
    },
    #[error("problem {problem}: solution is not well formed: {source}")]
    Proof { problem: String, source: ProofError },
    #[error("problem {problem}: reference solution fails validation at node {node}")]
    InvalidSolution { problem: String, node: String },
    #[error("problem {problem}: solution givens do not match the problem givens")]
    GivensMismatch { problem: String },
    #[error("problem {problem}: solution concludes {found}, problem states {expected}")]
    ConclusionMismatch {
        problem: String,
        expected: String,
        found: String,
    },
    #[error("problem {problem}: requiredRules lists [{listed}] but the solution uses [{used}]")]
    RequiredRulesMismatch {
        problem: String,
        listed: String,
        used: String,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct LevelDoc {
    level: u64,
    problems: Vec<ProblemDoc>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct ProblemDoc {
    id: String,
    givens: Vec<Formula>,
    conclusion: Formula,
    required_rules: Vec<Rule>,
    solution: SolutionDoc,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct SolutionDoc {
    nodes: Vec<NodeDoc>,
    conclusion_id: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct NodeDoc {
    id: String,
    formula: Formula,
    #[serde(default)]
    rule: Option<Rule>,
    #[serde(default)]
    parents: Option<Vec<String>>,
}

impl ProblemBank {
    /// Loads every `level-*.json` file under `dir` and validates all of it.
    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self, BankError> {
        let dir = dir.as_ref();
        let entries = fs::read_dir(dir).map_err(|source| BankError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("level-") && n.ends_with(".json"))
            })
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(BankError::EmptyBank(dir.to_path_buf()));
        }

        let mut levels = Vec::new();
        let mut seen_levels = BTreeSet::new();
        let mut seen_problems = BTreeSet::new();
        for path in paths {
            let name = path
                .file_name()
                .and_then(|n| n.to_str())
                .unwrap_or("level-?.json")
                .to_string();
            let text = fs::read_to_string(&path).map_err(|source| BankError::Io {
                path: path.clone(),
                source,
            })?;
            let level = Self::parse_level(&name, &text)?;
            if !seen_levels.insert(level.level) {
                return Err(BankError::DuplicateLevel { level: level.level });
            }
            for p in &level.problems {
                if !seen_problems.insert(p.id.clone()) {
                    return Err(BankError::DuplicateProblem(p.id.clone()));
                }
            }
            levels.push(level);
        }
        levels.sort_by_key(|l| l.level);
        Ok(ProblemBank { levels })
    }

    /// Parses and validates one level document. `name` only labels errors.
    pub fn parse_level(name: &str, json: &str) -> Result<LevelBank, BankError> {
        let doc: LevelDoc = serde_json::from_str(json).map_err(|source| BankError::Json {
            name: name.to_string(),
            source,
        })?;
        if !(1..=7).contains(&doc.level) {
            return Err(BankError::BadLevel {
                name: name.to_string(),
                level: doc.level,
            });
        }
        let level = doc.level as u8;
        let mut problems = Vec::new();
        for p in doc.problems {
            problems.push(build_problem(p, level)?);
        }
        Ok(LevelBank { level, problems })
    }

    pub fn levels(&self) -> &[LevelBank] {
        &self.levels
    }

    pub fn level(&self, level: u8) -> Option<&LevelBank> {
        self.levels.iter().find(|l| l.level == level)
    }

    pub fn problems(&self) -> impl Iterator<Item = &Problem> {
        self.levels.iter().flat_map(|l| l.problems.iter())
    }

    pub fn problem(&self, id: &str) -> Option<&Problem> {
        self.problems().find(|p| p.id == id)
    }
}

fn build_problem(doc: ProblemDoc, level: u8) -> Result<Problem, BankError> {
    let problem_id = doc.id.clone();
    if doc.id.split('.').next() != Some(level.to_string().as_str()) {
        return Err(BankError::IdLevelMismatch {
            problem: problem_id,
            level,
        });
    }

    let mut nodes = Vec::new();
    for n in doc.solution.nodes {
        let justification = match (n.rule, n.parents) {
            (None, None) => Justification::Given,
            (Some(rule), Some(parents)) => Justification::Derived {
                rule,
                parents: parents.into_iter().map(NodeId).collect(),
            },
            (Some(_), None) => {
                return Err(BankError::BadNode {
                    problem: problem_id,
                    node: n.id,
                    reason: "has a rule but no parents",
                })
            }
            (None, Some(_)) => {
                return Err(BankError::BadNode {
                    problem: problem_id,
                    node: n.id,
                    reason: "has parents but no rule",
                })
            }
        };
        nodes.push(ProofNode {
            id: NodeId(n.id),
            formula: n.formula,
            justification,
        });
    }

    let graph = ProofGraph::new(nodes, NodeId(doc.solution.conclusion_id)).map_err(|source| {
        BankError::Proof {
            problem: problem_id.clone(),
            source,
        }
    })?;

    let mut used_rules = BTreeSet::new();
    for node in graph.nodes() {
        if let Justification::Derived { rule, .. } = &node.justification {
            used_rules.insert(*rule);
        }
    }

    let problem = Problem {
        id: problem_id.clone(),
        givens: doc.givens,
        conclusion: doc.conclusion,
        reference_solution: graph,
        required_rules: doc.required_rules.iter().copied().collect(),
        difficulty: level,
    };

    let result = problem
        .validate_solution(&problem.reference_solution)
        .map_err(|source| BankError::Proof {
            problem: problem_id.clone(),
            source,
        })?;
    if !result.valid {
        // Split the generic failure into the two mismatches a bank author is
        // most likely to hit, so the message points at the right field.
        let conclusion = problem.reference_solution.conclusion();
        if conclusion.formula != problem.conclusion {
            return Err(BankError::ConclusionMismatch {
                problem: problem_id,
                expected: problem.conclusion.to_string(),
                found: conclusion.formula.to_string(),
            });
        }
        let node = result.first_error.expect("invalid result names a node");
        let is_given = problem
            .reference_solution
            .node(&node)
            .is_some_and(|n| n.justification == Justification::Given);
        if is_given {
            return Err(BankError::GivensMismatch {
                problem: problem_id,
            });
        }
        return Err(BankError::InvalidSolution {
            problem: problem_id,
            node: node.0,
        });
    }

    // A solution can validate while the re-stated given list still drifts
    // (missing formulas rather than foreign ones).
    let mut solution_givens: Vec<&Formula> = problem.reference_solution.given_formulas();
    solution_givens.sort();
    let mut stated: Vec<&Formula> = problem.givens.iter().collect();
    stated.sort();
    if solution_givens != stated {
        return Err(BankError::GivensMismatch {
            problem: problem_id,
        });
    }

    if used_rules != problem.required_rules {
        let fmt =
            |rules: &BTreeSet<Rule>| rules.iter().map(|r| r.id()).collect::<Vec<_>>().join(", ");
        return Err(BankError::RequiredRulesMismatch {
            problem: problem_id,
            listed: fmt(&problem.required_rules),
            used: fmt(&used_rules),
        });
    }

    Ok(problem)
}
