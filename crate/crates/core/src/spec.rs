//! The `.scm.json` model specification format.
//!
//! A spec lists variables (each with fill values and one or more phrasing
//! templates), edges, and the designated treatment and outcome. A concrete
//! [`SdScm`] is obtained by picking one phrasing per variable
//! ([`instantiate_variation`]); fill values, edges and the sampling order
//! never change between variations.
//!
//! ```json
//! {
//!   "name": "toy",
//!   "variables": [
//!     {"name": "w", "kind": "endogenous", "values": ["sunny", "rainy"],
//!      "phrasings": ["The weather outside is {x}."]}
//!   ],
//!   "edges": [["w", "g"]],
//!   "treatment": "g",
//!   "outcome": "m"
//! }
//! ```

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::seeded_rng;
use crate::scm::{
    placeholder_count, validate, CausalGraph, ScmError, SdScm, SequenceVariable, VariableKind, VariationId, PLACEHOLDER,
};
use crate::scorer::ScorerRef;

pub const MAX_PHRASINGS: usize = 1000;
pub const MAX_VALUES: usize = 1000;

/// Column names the dataset format reserves.
const RESERVED_NAMES: [&str; 3] = ["unit_id", "t", "y"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("schema violation at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("invalid spec: {}", .0.join("; "))]
    Semantic(Vec<String>),
    #[error("variation has {got} indices but the model declares {expected} variables")]
    VariationLength { expected: usize, got: usize },
    #[error("variation index {index} out of range for {variable:?} ({count} phrasings)")]
    VariationOutOfRange { variable: String, index: usize, count: usize },
    #[error("requested {requested} distinct variations but only {available} exist")]
    InsufficientVariations { requested: usize, available: u128 },
    #[error(transparent)]
    Model(#[from] ScmError),
    #[error("{0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableEntry {
    pub name: String,
    pub kind: VariableKind,
    pub values: Vec<String>,
    pub phrasings: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

/// A directed edge, serialized as `[parent, child]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Edge(pub String, pub String);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScmSpecDocument {
    pub name: String,
    pub variables: Vec<VariableEntry>,
    pub edges: Vec<Edge>,
    pub treatment: String,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
}

fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn ends_like_sentence(phrase: &str) -> bool {
    let trimmed = phrase.trim_end_matches(['"', '\'', ')', '\u{201d}']);
    trimmed.ends_with(['.', '?', '!'])
}

impl ScmSpecDocument {
    pub fn variable(&self, name: &str) -> Option<&VariableEntry> {
        self.variables.iter().find(|v| v.name == name)
    }

    pub fn variable_names(&self) -> Vec<&str> {
        self.variables.iter().map(|v| v.name.as_str()).collect()
    }

    pub fn graph(&self) -> Result<CausalGraph, ScmError> {
        let nodes = self.variable_names();
        let edges: Vec<(&str, &str)> = self.edges.iter().map(|e| (e.0.as_str(), e.1.as_str())).collect();
        CausalGraph::new(&nodes, &edges)
    }

    /// Number of distinct phrasing variations (saturating).
    pub fn variation_count(&self) -> u128 {
        self.variables.iter().fold(1u128, |acc, v| acc.saturating_mul(v.phrasings.len() as u128))
    }

    /// Non-fatal shape remarks, e.g. an outcome with children.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.edges.iter().any(|e| e.0 == self.outcome) {
            out.push(format!("outcome {:?} is not a sink; benchmark graphs end at the outcome", self.outcome));
        }
        if !self.edges.iter().any(|e| e.0 == self.treatment && e.1 == self.outcome) {
            out.push(format!("no direct edge {:?} -> {:?}", self.treatment, self.outcome));
        }
        out
    }

    /// Semantic checks; returns every problem found.
    pub fn check(&self) -> Result<(), SpecError> {
        let mut problems = Vec::new();
        if self.name.trim().is_empty() {
            problems.push("name: must be nonempty".to_string());
        }
        if self.variables.is_empty() {
            problems.push("variables: at least one variable is required".to_string());
        }
        let mut names = HashSet::new();
        for (i, var) in self.variables.iter().enumerate() {
            let at = format!("variables[{i}]");
            if !is_identifier(&var.name) {
                problems.push(format!("{at}.name: {:?} is not an identifier", var.name));
            }
            if RESERVED_NAMES.contains(&var.name.as_str())
                || var.name.starts_with("y_arm_")
                || var.name.starts_with("p_arm_")
            {
                problems.push(format!("{at}.name: {:?} is reserved for dataset columns", var.name));
            }
            if !names.insert(var.name.as_str()) {
                problems.push(format!("{at}.name: duplicate variable {:?}", var.name));
            }
            if var.values.is_empty() || var.values.len() > MAX_VALUES {
                problems.push(format!("{at}.values: need 1..={MAX_VALUES} fill values, got {}", var.values.len()));
            }
            let mut seen = HashSet::new();
            for v in &var.values {
                if !seen.insert(v) {
                    problems.push(format!("{at}.values: duplicate fill value {v:?}"));
                }
            }
            if var.phrasings.is_empty() || var.phrasings.len() > MAX_PHRASINGS {
                problems
                    .push(format!("{at}.phrasings: need 1..={MAX_PHRASINGS} phrasings, got {}", var.phrasings.len()));
            }
            for (j, phrasing) in var.phrasings.iter().enumerate() {
                let count = placeholder_count(phrasing);
                if count != 1 {
                    problems
                        .push(format!("{at}.phrasings[{j}]: must contain {PLACEHOLDER} exactly once, found {count}"));
                }
                if !ends_like_sentence(phrasing) {
                    problems.push(format!("{at}.phrasings[{j}]: must end with sentence punctuation"));
                }
                if phrasing.contains('\n') || phrasing.trim() != phrasing {
                    problems.push(format!("{at}.phrasings[{j}]: no surrounding whitespace or newlines"));
                }
            }
        }

        for (i, edge) in self.edges.iter().enumerate() {
            for end in [&edge.0, &edge.1] {
                if !names.contains(end.as_str()) {
                    problems.push(format!("edges[{i}]: unknown variable {end:?}"));
                }
            }
        }

        for (role, name) in [("treatment", &self.treatment), ("outcome", &self.outcome)] {
            match self.variable(name) {
                None => problems.push(format!("{role}: unknown variable {name:?}")),
                Some(v) if v.kind != VariableKind::Endogenous => {
                    problems.push(format!("{role}: {name:?} must be endogenous"))
                }
                Some(v) if v.values.len() < 2 => problems.push(format!("{role}: {name:?} needs at least 2 values")),
                Some(_) => {}
            }
        }
        if self.treatment == self.outcome {
            problems.push("treatment and outcome must differ".to_string());
        }

        if problems.is_empty() {
            match self.graph() {
                Err(e) => problems.push(format!("edges: {e}")),
                Ok(graph) => match self.variables_for(&VariationId::zeros(self.variables.len())) {
                    Err(e) => problems.push(e.to_string()),
                    Ok(vars) => {
                        problems.extend(validate(&graph, &vars, None).violations.iter().map(|v| format!("graph: {v}")));
                    }
                },
            }
        }

        if problems.is_empty() {
            Ok(())
        } else {
            Err(SpecError::Semantic(problems))
        }
    }

    fn check_variation(&self, variation: &VariationId) -> Result<(), SpecError> {
        if variation.0.len() != self.variables.len() {
            return Err(SpecError::VariationLength { expected: self.variables.len(), got: variation.0.len() });
        }
        for (var, &index) in self.variables.iter().zip(&variation.0) {
            if index >= var.phrasings.len() {
                return Err(SpecError::VariationOutOfRange {
                    variable: var.name.clone(),
                    index,
                    count: var.phrasings.len(),
                });
            }
        }
        Ok(())
    }

    fn variables_for(&self, variation: &VariationId) -> Result<Vec<SequenceVariable>, SpecError> {
        self.check_variation(variation)?;
        self.variables
            .iter()
            .zip(&variation.0)
            .map(|(v, &j)| {
                SequenceVariable::new(&v.name, v.kind, &v.phrasings[j], v.values.clone()).map_err(Into::into)
            })
            .collect()
    }
}

/// Parses and fully validates a spec document.
pub fn parse_spec(text: &str) -> Result<ScmSpecDocument, SpecError> {
    let mut de = serde_json::Deserializer::from_str(text);
    let doc: ScmSpecDocument = serde_path_to_error::deserialize(&mut de).map_err(|err| {
        let path = err.path().to_string();
        let inner = err.into_inner();
        match inner.classify() {
            serde_json::error::Category::Data => schema_error(path, &inner),
            _ => syntax_error(&inner),
        }
    })?;
    de.end().map_err(|e| syntax_error(&e))?;
    doc.check()?;
    Ok(doc)
}

// serde_json appends the position to its messages; it is reported separately.
fn strip_position(e: &serde_json::Error) -> String {
    let message = e.to_string();
    message.split(" at line ").next().unwrap_or(&message).to_string()
}

fn syntax_error(e: &serde_json::Error) -> SpecError {
    SpecError::Syntax { line: e.line(), column: e.column(), message: strip_position(e) }
}

fn schema_error(path: String, e: &serde_json::Error) -> SpecError {
    let path = if path.is_empty() || path == "." { "<root>".to_string() } else { path };
    SpecError::Schema { path, message: strip_position(e) }
}

pub fn load_spec(path: &Path) -> Result<ScmSpecDocument, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|e| SpecError::Io(format!("{}: {e}", path.display())))?;
    parse_spec(&text)
}

/// Canonical form: schema field order, 2-space indentation, trailing newline.
pub fn serialize_spec(spec: &ScmSpecDocument) -> String {
    let mut text = serde_json::to_string_pretty(spec).expect("spec serializes");
    text.push('\n');
    text
}

/// Builds the concrete model for one phrasing choice per variable.
pub fn instantiate_variation(
    spec: &ScmSpecDocument,
    variation: &VariationId,
    scorer: ScorerRef,
    master_seed: u64,
) -> Result<SdScm, SpecError> {
    let variables = spec.variables_for(variation)?;
    let graph = spec.graph()?;
    Ok(SdScm::new(graph, variables, scorer, variation.clone(), master_seed)?)
}

/// Draws `count` distinct variations uniformly, reproducibly from `seed`.
pub fn sample_variations(spec: &ScmSpecDocument, count: usize, seed: u64) -> Result<Vec<VariationId>, SpecError> {
    let available = spec.variation_count();
    if count == 0 || count as u128 > available {
        return Err(SpecError::InsufficientVariations { requested: count, available });
    }
    let mut rng = seeded_rng(seed, &[0x7661_7269]);
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let id = VariationId(spec.variables.iter().map(|v| rng.random_range(0..v.phrasings.len())).collect());
        if seen.insert(id.clone()) {
            out.push(id);
        }
    }
    Ok(out)
}

/// Specs shipped with the crate.
pub mod bundled {
    use super::{parse_spec, ScmSpecDocument};

    pub const MARATHON_G1: &str = include_str!("../specs/marathon_g1.scm.json");
    pub const MARATHON_G2: &str = include_str!("../specs/marathon_g2.scm.json");
    pub const BREAST_CANCER: &str = include_str!("../specs/breast_cancer.scm.json");
    pub const SIGN_FLIP: &str = include_str!("../fixtures/sign_flip.scm.json");
    pub const SIGN_FLIP_TABLE: &str = include_str!("../fixtures/sign_flip.table.json");

    /// Confounder toy model (weather causes both choice and outcome).
    pub fn marathon_g1() -> ScmSpecDocument {
        parse_spec(MARATHON_G1).expect("bundled spec is valid")
    }

    /// Collider toy model (weather is caused by both choice and outcome).
    pub fn marathon_g2() -> ScmSpecDocument {
        parse_spec(MARATHON_G2).expect("bundled spec is valid")
    }

    pub fn breast_cancer() -> ScmSpecDocument {
        parse_spec(BREAST_CANCER).expect("bundled spec is valid")
    }

    pub fn sign_flip() -> ScmSpecDocument {
        parse_spec(SIGN_FLIP).expect("bundled spec is valid")
    }

    /// All bundled specs by file stem.
    pub fn all() -> Vec<(&'static str, &'static str)> {
        vec![
            ("marathon_g1", MARATHON_G1),
            ("marathon_g2", MARATHON_G2),
            ("breast_cancer", BREAST_CANCER),
            ("sign_flip", SIGN_FLIP),
        ]
    }
}

/// Variable positions keyed by name.
pub fn name_index(spec: &ScmSpecDocument) -> HashMap<&str, usize> {
    spec.variables.iter().enumerate().map(|(i, v)| (v.name.as_str(), i)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::UniformTokenScorer;

    fn uniform() -> ScorerRef {
        ScorerRef::custom("uniform", UniformTokenScorer::new(50)).unwrap()
    }

    fn tiny(phrasings: usize) -> ScmSpecDocument {
        let ph = |stem: &str| (0..phrasings).map(|i| format!("{stem} {i} is {{x}}.")).collect::<Vec<_>>();
        ScmSpecDocument {
            name: "tiny".into(),
            variables: vec![
                VariableEntry {
                    name: "tr".into(),
                    kind: VariableKind::Endogenous,
                    values: vec!["a".into(), "b".into()],
                    phrasings: ph("Treatment"),
                    description: None,
                },
                VariableEntry {
                    name: "out".into(),
                    kind: VariableKind::Endogenous,
                    values: vec!["c".into(), "d".into()],
                    phrasings: ph("Outcome"),
                    description: None,
                },
            ],
            edges: vec![Edge("tr".into(), "out".into())],
            treatment: "tr".into(),
            outcome: "out".into(),
            notes: None,
        }
    }

    #[test]
    fn g1_shape() {
        let spec = bundled::marathon_g1();
        assert_eq!(spec.variables.len(), 5);
        assert_eq!(spec.edges.len(), 4);
        assert_eq!(spec.treatment, "g");
        assert_eq!(spec.outcome, "m");
    }

    #[test]
    fn breast_cancer_cardinalities() {
        let spec = bundled::breast_cancer();
        let sizes: Vec<usize> = spec.variables.iter().map(|v| v.values.len()).collect();
        assert_eq!(sizes, [7, 4, 4, 2, 4, 3, 4, 4, 3, 2, 2, 2, 2, 4]);
        assert!(spec.variables.iter().all(|v| v.phrasings.len() == 10));
        assert_eq!(spec.variation_count(), 10u128.pow(14));
    }

    #[test]
    fn empty_document_is_syntax_error() {
        assert!(matches!(parse_spec(""), Err(SpecError::Syntax { .. })));
        assert!(matches!(parse_spec("{\"name\": "), Err(SpecError::Syntax { .. })));
        assert!(matches!(parse_spec("{} {}"), Err(SpecError::Syntax { .. }) | Err(SpecError::Schema { .. })));
    }

    #[test]
    fn schema_violation_names_field_path() {
        let text = serialize_spec(&tiny(1)).replace("\"endogenous\"", "\"sideways\"");
        match parse_spec(&text) {
            Err(SpecError::Schema { path, .. }) => assert_eq!(path, "variables[0].kind"),
            other => panic!("expected schema error, got {other:?}"),
        }
    }

    #[test]
    fn placeholder_count_is_semantic_error() {
        let mut spec = tiny(1);
        spec.variables[0].phrasings[0] = "No marker here.".into();
        let err = parse_spec(&serialize_spec(&spec)).unwrap_err();
        assert!(matches!(err, SpecError::Semantic(ref p) if p[0].contains("phrasings[0]")), "{err}");
    }

    #[test]
    fn exogenous_treatment_rejected() {
        let mut spec = tiny(1);
        spec.variables[0].kind = VariableKind::Exogenous;
        assert!(matches!(spec.check(), Err(SpecError::Semantic(_))));
    }

    #[test]
    fn cyclic_spec_rejected() {
        let mut spec = tiny(1);
        spec.edges.push(Edge("out".into(), "tr".into()));
        assert!(matches!(spec.check(), Err(SpecError::Semantic(_))));
    }

    #[test]
    fn round_trip_and_canonical_bytes() {
        for (_, text) in bundled::all() {
            let spec = parse_spec(text).unwrap();
            let once = serialize_spec(&spec);
            assert_eq!(parse_spec(&once).unwrap(), spec);
            assert_eq!(serialize_spec(&parse_spec(&once).unwrap()), once);
            assert_eq!(once, text, "bundled files are stored in canonical form");
        }
    }

    #[test]
    fn single_phrasing_instantiation() {
        let spec = tiny(1);
        let scm = instantiate_variation(&spec, &VariationId::zeros(2), uniform(), 1).unwrap();
        assert_eq!(scm.variable(0).template(), "Treatment 0 is {x}.");
        assert!(matches!(
            instantiate_variation(&spec, &VariationId(vec![1, 0]), uniform(), 1),
            Err(SpecError::VariationOutOfRange { .. })
        ));
    }

    #[test]
    fn variations_differ_only_in_templates() {
        let spec = bundled::breast_cancer();
        let ids = sample_variations(&spec, 2, 5).unwrap();
        let a = instantiate_variation(&spec, &ids[0], uniform(), 1).unwrap();
        let b = instantiate_variation(&spec, &ids[1], uniform(), 1).unwrap();
        assert_eq!(a.order(), b.order());
        assert_eq!(a.graph(), b.graph());
        for (va, vb) in a.variables().iter().zip(b.variables()) {
            assert_eq!(va.values(), vb.values());
        }
        assert!(a.variables().iter().zip(b.variables()).any(|(x, y)| x.template() != y.template()));
    }

    #[test]
    fn fifty_distinct_variations_are_reproducible() {
        let spec = bundled::breast_cancer();
        let a = sample_variations(&spec, 50, 7).unwrap();
        let b = sample_variations(&spec, 50, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.iter().collect::<HashSet<_>>().len(), 50);
        assert_ne!(a, sample_variations(&spec, 50, 8).unwrap());
    }

    #[test]
    fn single_phrasing_variation_limits() {
        let spec = tiny(1);
        assert_eq!(sample_variations(&spec, 1, 0).unwrap(), vec![VariationId::zeros(2)]);
        assert!(matches!(sample_variations(&spec, 2, 0), Err(SpecError::InsufficientVariations { .. })));
        assert_eq!(sample_variations(&tiny(2), 4, 3).unwrap().len(), 4);
    }

    #[test]
    fn breast_cancer_unit_reads_as_one_paragraph() {
        let spec = bundled::breast_cancer();
        for id in sample_variations(&spec, 20, 1).unwrap() {
            let scm = instantiate_variation(&spec, &id, uniform(), 0).unwrap();
            let text = crate::scorer::join_phrases(scm.order().iter().map(|&i| scm.variable(i).phrase(0)));
            assert!(!text.contains('\n'));
            let sentences = text.split_inclusive(['.', '?', '!']).filter(|s| !s.trim().is_empty()).count();
            assert_eq!(sentences, 14, "{text}");
        }
    }
}
