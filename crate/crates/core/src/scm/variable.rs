use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::ScmError;

/// Marker replaced by a fill value when rendering a template.
pub const PLACEHOLDER: &str = "{x}";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariableKind {
    Exogenous,
    Endogenous,
}

impl VariableKind {
    pub fn is_exogenous(self) -> bool {
        self == VariableKind::Exogenous
    }
}

/// A random variable whose sample space is a finite, ordered set of phrases.
///
/// Value index `k` always refers to `values[k]`; the rendered phrase for `k`
/// is the template with `values[k]` substituted for [`PLACEHOLDER`].
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceVariable {
    name: String,
    kind: VariableKind,
    template: String,
    values: Vec<String>,
    space: Arc<[String]>,
}

/// Counts non-overlapping occurrences of [`PLACEHOLDER`].
pub fn placeholder_count(template: &str) -> usize {
    template.matches(PLACEHOLDER).count()
}

impl SequenceVariable {
    pub fn new(
        name: impl Into<String>,
        kind: VariableKind,
        template: impl Into<String>,
        values: Vec<String>,
    ) -> Result<Self, ScmError> {
        let name = name.into();
        let template = template.into();
        if name.is_empty() {
            return Err(ScmError::InvalidVariable { name, reason: "empty name".into() });
        }
        let count = placeholder_count(&template);
        if count != 1 {
            return Err(ScmError::InvalidVariable {
                name,
                reason: format!("template must contain {PLACEHOLDER} exactly once, found {count}"),
            });
        }
        if values.is_empty() {
            return Err(ScmError::InvalidVariable { name, reason: "no fill values".into() });
        }
        let mut seen = HashSet::new();
        for v in &values {
            if !seen.insert(v.as_str()) {
                return Err(ScmError::InvalidVariable { name, reason: format!("duplicate fill value {v:?}") });
            }
        }
        let space: Vec<String> = values.iter().map(|v| template.replacen(PLACEHOLDER, v, 1)).collect();
        let mut seen = HashSet::new();
        for phrase in &space {
            if !seen.insert(phrase.as_str()) {
                return Err(ScmError::InvalidVariable {
                    name,
                    reason: format!("rendered phrase {phrase:?} is not unique"),
                });
            }
        }
        Ok(Self { name, kind, template, values, space: space.into() })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> VariableKind {
        self.kind
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    pub fn values(&self) -> &[String] {
        &self.values
    }

    /// Rendered phrases in value order.
    pub fn space(&self) -> &Arc<[String]> {
        &self.space
    }

    pub fn cardinality(&self) -> usize {
        self.values.len()
    }

    pub fn phrase(&self, index: usize) -> &str {
        &self.space[index]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names() -> Vec<String> {
        ["John", "Jane", "Alice", "Bob", "Charlie"].iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn renders_space_in_value_order() {
        let v = SequenceVariable::new("u1", VariableKind::Exogenous, "My name is {x}.", names()).unwrap();
        assert_eq!(v.phrase(4), "My name is Charlie.");
        assert_eq!(v.cardinality(), 5);
    }

    #[test]
    fn placeholder_must_appear_once() {
        assert!(SequenceVariable::new("a", VariableKind::Endogenous, "no marker.", names()).is_err());
        assert!(SequenceVariable::new("a", VariableKind::Endogenous, "{x} and {x}.", names()).is_err());
    }

    #[test]
    fn fill_values_distinct_and_nonempty() {
        assert!(SequenceVariable::new("a", VariableKind::Endogenous, "{x}.", vec![]).is_err());
        let dup = vec!["a".to_string(), "a".to_string()];
        assert!(SequenceVariable::new("a", VariableKind::Endogenous, "{x}.", dup).is_err());
    }
}
