//! Sequence variables, causal graphs and the sequence-driven SCM.
//!
//! An [`SdScm`] bundles a [`CausalGraph`], one [`SequenceVariable`] per
//! node, the scorer that supplies every mechanism, a fixed topological
//! order and the provenance of the instance (phrasing variation and master
//! seed). All of it is immutable after construction.

mod graph;
mod variable;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scorer::ScorerRef;

pub use graph::CausalGraph;
pub use variable::{placeholder_count, SequenceVariable, VariableKind, PLACEHOLDER};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScmError {
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("node {0:?} declared twice")]
    DuplicateNode(String),
    #[error("self-loop on {0:?}")]
    SelfLoop(String),
    #[error("duplicate edge {0:?} -> {1:?}")]
    DuplicateEdge(String, String),
    #[error("graph has a cycle through {}", format_components(.0))]
    Cycle(Vec<Vec<String>>),
    #[error("variable {name:?}: {reason}")]
    InvalidVariable { name: String, reason: String },
    #[error("invalid model: {0}")]
    Invalid(ValidationReport),
}

fn format_components(components: &[Vec<String>]) -> String {
    components.iter().map(|c| format!("{{{}}}", c.join(", "))).collect::<Vec<_>>().join(" and ")
}

/// Per-variable phrasing choice, aligned to declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VariationId(pub Vec<usize>);

impl VariationId {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0; len])
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }
}

impl fmt::Display for VariationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        f.write_str(&parts.join("-"))
    }
}

impl std::str::FromStr for VariationId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(['-', ','])
            .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad variation index {p:?}: {e}")))
            .collect::<Result<Vec<_>, _>>()
            .map(VariationId)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Violation {
    Cycle { components: Vec<Vec<String>> },
    MissingVariable { node: String },
    UndeclaredVariable { variable: String },
    DuplicateVariable { variable: String },
    EndogenousIntoExogenous { parent: String, child: String },
    OrderNotPermutation,
    OrderViolatesEdge { parent: String, child: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Cycle { components } => write!(f, "cycle through {}", format_components(components)),
            Violation::MissingVariable { node } => write!(f, "node {node:?} has no variable definition"),
            Violation::UndeclaredVariable { variable } => write!(f, "variable {variable:?} is not a graph node"),
            Violation::DuplicateVariable { variable } => write!(f, "variable {variable:?} defined twice"),
            Violation::EndogenousIntoExogenous { parent, child } => {
                write!(f, "endogenous {parent:?} cannot be a parent of exogenous {child:?}")
            }
            Violation::OrderNotPermutation => write!(f, "order is not a permutation of the nodes"),
            Violation::OrderViolatesEdge { parent, child } => {
                write!(f, "order places {child:?} before its parent {parent:?}")
            }
        }
    }
}

/// All invariant violations found; empty means valid.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(Violation::to_string).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Checks graph/variable consistency, acyclicity, the exogenous rule and,
/// when given, that `order` is a valid topological order.
pub fn validate(graph: &CausalGraph, variables: &[SequenceVariable], order: Option<&[usize]>) -> ValidationReport {
    let mut violations = Vec::new();

    let mut by_name: HashMap<&str, &SequenceVariable> = HashMap::new();
    for v in variables {
        if by_name.insert(v.name(), v).is_some() {
            violations.push(Violation::DuplicateVariable { variable: v.name().to_string() });
        }
        if graph.index_of(v.name()).is_err() {
            violations.push(Violation::UndeclaredVariable { variable: v.name().to_string() });
        }
    }
    for node in graph.nodes() {
        if !by_name.contains_key(node.as_str()) {
            violations.push(Violation::MissingVariable { node: node.clone() });
        }
    }

    if let Err(ScmError::Cycle(components)) = graph.topological_order() {
        violations.push(Violation::Cycle { components });
    }

    for (parent, child) in graph.edges() {
        let (Some(p), Some(c)) = (by_name.get(parent), by_name.get(child)) else { continue };
        if p.kind() == VariableKind::Endogenous && c.kind() == VariableKind::Exogenous {
            violations
                .push(Violation::EndogenousIntoExogenous { parent: parent.to_string(), child: child.to_string() });
        }
    }

    if let Some(order) = order {
        let n = graph.len();
        let distinct: BTreeSet<usize> = order.iter().copied().collect();
        if order.len() != n || distinct.len() != n || order.iter().any(|&i| i >= n) {
            violations.push(Violation::OrderNotPermutation);
        } else {
            let mut position = vec![0; n];
            for (pos, &node) in order.iter().enumerate() {
                position[node] = pos;
            }
            for &(p, c) in graph.edge_indices() {
                if position[p] >= position[c] {
                    violations.push(Violation::OrderViolatesEdge {
                        parent: graph.name(p).to_string(),
                        child: graph.name(c).to_string(),
                    });
                }
            }
        }
    }

    ValidationReport { violations }
}

/// The sequence-driven SCM: variables, graph, scorer, order and provenance.
#[derive(Debug, Clone)]
pub struct SdScm {
    graph: CausalGraph,
    // aligned with graph node order
    variables: Vec<SequenceVariable>,
    scorer: ScorerRef,
    order: Vec<usize>,
    variation: VariationId,
    master_seed: u64,
}

impl SdScm {
    /// Builds and validates a model. `variables` may be in any order; they
    /// are stored aligned with the graph's declaration order.
    pub fn new(
        graph: CausalGraph,
        variables: Vec<SequenceVariable>,
        scorer: ScorerRef,
        variation: VariationId,
        master_seed: u64,
    ) -> Result<Self, ScmError> {
        let report = validate(&graph, &variables, None);
        if !report.is_valid() {
            return Err(ScmError::Invalid(report));
        }
        let order = graph.topological_order()?;
        let mut slots: Vec<Option<SequenceVariable>> = vec![None; graph.len()];
        for v in variables {
            let i = graph.index_of(v.name())?;
            slots[i] = Some(v);
        }
        let variables = slots.into_iter().map(|v| v.expect("validated")).collect();
        Ok(Self { graph, variables, scorer, order, variation, master_seed })
    }

    pub fn graph(&self) -> &CausalGraph {
        &self.graph
    }

    /// Variables in declaration order.
    pub fn variables(&self) -> &[SequenceVariable] {
        &self.variables
    }

    pub fn variable(&self, index: usize) -> &SequenceVariable {
        &self.variables[index]
    }

    pub fn variable_by_name(&self, name: &str) -> Result<&SequenceVariable, ScmError> {
        Ok(&self.variables[self.graph.index_of(name)?])
    }

    pub fn index_of(&self, name: &str) -> Result<usize, ScmError> {
        self.graph.index_of(name)
    }

    pub fn scorer(&self) -> &ScorerRef {
        &self.scorer
    }

    /// The topological order used for sampling, as node indices.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn order_names(&self) -> Vec<&str> {
        self.order.iter().map(|&i| self.graph.name(i)).collect()
    }

    pub fn variation(&self) -> &VariationId {
        &self.variation
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    /// Parents of `node` sorted by their position in the sampling order.
    pub fn ordered_parents(&self, node: usize) -> Vec<usize> {
        let mut position = vec![0; self.graph.len()];
        for (pos, &n) in self.order.iter().enumerate() {
            position[n] = pos;
        }
        let mut parents = self.graph.parents(node).to_vec();
        parents.sort_by_key(|&p| position[p]);
        parents
    }

    /// Same model, different scorer.
    pub fn with_scorer(&self, scorer: ScorerRef) -> Self {
        Self { scorer, ..self.clone() }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.graph, &self.variables, Some(&self.order))
    }
}
