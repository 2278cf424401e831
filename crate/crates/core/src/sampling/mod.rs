//! Observational, interventional and counterfactual sampling.
//!
//! Variables are drawn one at a time in the model's topological order.
//! Each draw uses the scorer restricted to the variable's phrase space,
//! conditioned on the space-joined phrases of its parents only (in sampling
//! order). Every sampled unit keeps the distribution it was drawn from so
//! that probability-valued outcomes can be read off later without another
//! scorer call.

mod exact;

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{seeded_rng, StreamRng};
use crate::scm::{ScmError, SdScm, VariableKind, VariationId};
use crate::scorer::{join_phrases, restricted_distribution, RestrictedDistribution, ScorerError};

pub use exact::{exact_interventional, exact_joint, exact_joint_capped, ProbabilityTable, DEFAULT_STATE_CAP};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplingError {
    #[error("scorer failed while sampling {variable:?}: {source}")]
    Scorer { variable: String, source: ScorerError },
    #[error("cannot build context for {variable:?}: parent {parent:?} is unassigned")]
    MissingParent { variable: String, parent: String },
    #[error(transparent)]
    Model(#[from] ScmError),
    #[error("cannot intervene on exogenous variable {0:?}")]
    ExogenousIntervention(String),
    #[error("value index {index} out of range for {variable:?} ({cardinality} values)")]
    ValueOutOfRange { variable: String, index: usize, cardinality: usize },
    #[error("unit was sampled from variation {found} but the model is variation {expected}")]
    VariationMismatch { expected: VariationId, found: VariationId },
    #[error("joint state space has {cells} cells, above the cap of {cap}")]
    StateSpaceTooLarge { cells: u128, cap: u128 },
    #[error("malformed unit: {0}")]
    InvalidUnit(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplingMode {
    Observational,
    Interventional,
    Counterfactual,
}

impl SamplingMode {
    fn tag(self) -> u64 {
        match self {
            SamplingMode::Observational => 0,
            SamplingMode::Interventional => 1,
            SamplingMode::Counterfactual => 2,
        }
    }
}

impl fmt::Display for SamplingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplingMode::Observational => "observational",
            SamplingMode::Interventional => "interventional",
            SamplingMode::Counterfactual => "counterfactual",
        })
    }
}

/// `do(variable = values[value])`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Intervention {
    pub variable: String,
    pub value: usize,
}

impl Intervention {
    pub fn new(variable: impl Into<String>, value: usize) -> Self {
        Self { variable: variable.into(), value }
    }

    /// Checks the intervention against `scm`; returns the node index.
    pub fn resolve(&self, scm: &SdScm) -> Result<usize, SamplingError> {
        let node = scm.index_of(&self.variable)?;
        let var = scm.variable(node);
        if var.kind() == VariableKind::Exogenous {
            return Err(SamplingError::ExogenousIntervention(self.variable.clone()));
        }
        if self.value >= var.cardinality() {
            return Err(SamplingError::ValueOutOfRange {
                variable: self.variable.clone(),
                index: self.value,
                cardinality: var.cardinality(),
            });
        }
        Ok(node)
    }
}

impl fmt::Display for Intervention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "do({}={})", self.variable, self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub variation: VariationId,
    pub master_seed: u64,
    pub unit_index: u64,
    pub mode: SamplingMode,
    pub intervention: Option<Intervention>,
}

/// One joint draw of every variable in a model.
///
/// Values, phrases and distributions are indexed by node (declaration order).
/// A distribution is absent for variables that were fixed by an intervention
/// or copied from a factual unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Unit {
    values: Vec<usize>,
    phrases: Vec<String>,
    distributions: Vec<Option<RestrictedDistribution>>,
    provenance: Provenance,
}

impl Unit {
    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn value(&self, node: usize) -> usize {
        self.values[node]
    }

    pub fn phrase(&self, node: usize) -> &str {
        &self.phrases[node]
    }

    pub fn phrases(&self) -> &[String] {
        &self.phrases
    }

    pub fn distribution(&self, node: usize) -> Option<&RestrictedDistribution> {
        self.distributions[node].as_ref()
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn with_unit_index(mut self, unit_index: u64) -> Self {
        self.provenance.unit_index = unit_index;
        self
    }

    /// Values listed in the model's sampling order.
    pub fn values_in_order(&self, scm: &SdScm) -> Vec<usize> {
        scm.order().iter().map(|&n| self.values[n]).collect()
    }

    /// The whole unit as one passage, phrases joined in sampling order.
    pub fn text(&self, scm: &SdScm) -> String {
        join_phrases(scm.order().iter().map(|&n| self.phrases[n].as_str()))
    }

    pub fn value_by_name(&self, scm: &SdScm, name: &str) -> Result<usize, SamplingError> {
        Ok(self.values[scm.index_of(name)?])
    }

    /// Rebuilds a unit from stored values, checking them against `scm`.
    pub fn from_values(
        scm: &SdScm,
        values: Vec<usize>,
        distributions: Vec<Option<Vec<f64>>>,
        provenance: Provenance,
    ) -> Result<Self, SamplingError> {
        let n = scm.variables().len();
        if values.len() != n || distributions.len() != n {
            return Err(SamplingError::InvalidUnit(format!("expected {n} variables, got {}", values.len())));
        }
        if provenance.variation != *scm.variation() {
            return Err(SamplingError::VariationMismatch {
                expected: scm.variation().clone(),
                found: provenance.variation,
            });
        }
        let assignment: Vec<Option<usize>> = values.iter().copied().map(Some).collect();
        let mut phrases = Vec::with_capacity(n);
        let mut rebuilt = Vec::with_capacity(n);
        for (node, (&k, probs)) in values.iter().zip(distributions).enumerate() {
            let var = scm.variable(node);
            if k >= var.cardinality() {
                return Err(SamplingError::ValueOutOfRange {
                    variable: var.name().to_string(),
                    index: k,
                    cardinality: var.cardinality(),
                });
            }
            phrases.push(var.phrase(k).to_string());
            rebuilt.push(match probs {
                None => None,
                Some(p) if p.len() == var.cardinality() => Some(RestrictedDistribution::from_parts(
                    parent_context(scm, &assignment, node)?,
                    var.space().clone(),
                    p,
                )),
                Some(p) => {
                    return Err(SamplingError::InvalidUnit(format!(
                        "distribution for {:?} has {} entries, expected {}",
                        var.name(),
                        p.len(),
                        var.cardinality()
                    )))
                }
            });
        }
        Ok(Self { values, phrases, distributions: rebuilt, provenance })
    }
}

/// Space-joined phrases of `node`'s parents, in sampling order.
///
/// `assignment` is indexed by node; every parent must be assigned. Roots
/// get the empty context.
pub fn parent_context(scm: &SdScm, assignment: &[Option<usize>], node: usize) -> Result<String, SamplingError> {
    let mut phrases = Vec::new();
    for parent in scm.ordered_parents(node) {
        let k = assignment[parent].ok_or_else(|| SamplingError::MissingParent {
            variable: scm.variable(node).name().to_string(),
            parent: scm.variable(parent).name().to_string(),
        })?;
        phrases.push(scm.variable(parent).phrase(k));
    }
    Ok(join_phrases(phrases))
}

/// Distribution of `node` given the (already assigned) parents.
pub fn conditional(
    scm: &SdScm,
    assignment: &[Option<usize>],
    node: usize,
) -> Result<RestrictedDistribution, SamplingError> {
    let context = parent_context(scm, assignment, node)?;
    let var = scm.variable(node);
    restricted_distribution(scm.scorer(), &context, var.space())
        .map_err(|source| SamplingError::Scorer { variable: var.name().to_string(), source })
}

/// Ancestral pass over the sampling order. `fixed[node]` pins a value
/// without consulting the scorer.
fn ancestral<R: Rng + ?Sized>(
    scm: &SdScm,
    fixed: &[Option<usize>],
    rng: &mut R,
) -> Result<(Vec<usize>, Vec<Option<RestrictedDistribution>>), SamplingError> {
    let n = scm.variables().len();
    let mut assignment: Vec<Option<usize>> = vec![None; n];
    let mut distributions = vec![None; n];
    for &node in scm.order() {
        if let Some(k) = fixed[node] {
            assignment[node] = Some(k);
            continue;
        }
        let dist = conditional(scm, &assignment, node)?;
        assignment[node] = Some(dist.draw(rng));
        distributions[node] = Some(dist);
    }
    Ok((assignment.into_iter().map(|k| k.expect("all assigned")).collect(), distributions))
}

fn build_unit(
    scm: &SdScm,
    values: Vec<usize>,
    distributions: Vec<Option<RestrictedDistribution>>,
    mode: SamplingMode,
    intervention: Option<Intervention>,
    unit_index: u64,
) -> Unit {
    let phrases = values.iter().enumerate().map(|(node, &k)| scm.variable(node).phrase(k).to_string()).collect();
    Unit {
        values,
        phrases,
        distributions,
        provenance: Provenance {
            variation: scm.variation().clone(),
            master_seed: scm.master_seed(),
            unit_index,
            mode,
            intervention,
        },
    }
}

pub fn sample_observational<R: Rng + ?Sized>(scm: &SdScm, rng: &mut R) -> Result<Unit, SamplingError> {
    let fixed = vec![None; scm.variables().len()];
    let (values, distributions) = ancestral(scm, &fixed, rng)?;
    Ok(build_unit(scm, values, distributions, SamplingMode::Observational, None, 0))
}

pub fn sample_interventional<R: Rng + ?Sized>(
    scm: &SdScm,
    intervention: &Intervention,
    rng: &mut R,
) -> Result<Unit, SamplingError> {
    let node = intervention.resolve(scm)?;
    let mut fixed = vec![None; scm.variables().len()];
    fixed[node] = Some(intervention.value);
    let (values, distributions) = ancestral(scm, &fixed, rng)?;
    Ok(build_unit(scm, values, distributions, SamplingMode::Interventional, Some(intervention.clone()), 0))
}

/// Counterfactual of a complete factual unit under `intervention`.
///
/// Exogenous variables and every non-descendant of the intervened variable
/// keep their factual values; the intervened variable takes the new value;
/// descendants are redrawn from their mechanisms given the new parents.
pub fn sample_counterfactual<R: Rng + ?Sized>(
    scm: &SdScm,
    factual: &Unit,
    intervention: &Intervention,
    rng: &mut R,
) -> Result<Unit, SamplingError> {
    if factual.provenance.variation != *scm.variation() {
        return Err(SamplingError::VariationMismatch {
            expected: scm.variation().clone(),
            found: factual.provenance.variation.clone(),
        });
    }
    if factual.values.len() != scm.variables().len() {
        return Err(SamplingError::InvalidUnit("factual unit does not match the model".into()));
    }
    let node = intervention.resolve(scm)?;
    let keep = scm.graph().non_descendant_mask(node);
    let fixed: Vec<Option<usize>> = (0..scm.variables().len())
        .map(|v| {
            if v == node {
                Some(intervention.value)
            } else if keep[v] || scm.variable(v).kind() == VariableKind::Exogenous {
                Some(factual.values[v])
            } else {
                None
            }
        })
        .collect();
    let (values, distributions) = ancestral(scm, &fixed, rng)?;
    Ok(build_unit(
        scm,
        values,
        distributions,
        SamplingMode::Counterfactual,
        Some(intervention.clone()),
        factual.provenance.unit_index,
    ))
}

/// Random stream for one unit. `stream` separates independent batches
/// drawn from the same model (e.g. datasets).
pub fn unit_rng(
    master_seed: u64,
    stream: u64,
    unit_index: u64,
    mode: SamplingMode,
    intervention: Option<(usize, usize)>,
) -> StreamRng {
    let (node, value) = intervention.map_or((u64::MAX, u64::MAX), |(n, v)| (n as u64, v as u64));
    seeded_rng(master_seed, &[stream, unit_index, mode.tag(), node, value])
}

/// Observational unit `unit_index` of batch `stream`, seeded from the model.
pub fn observational_unit(scm: &SdScm, stream: u64, unit_index: u64) -> Result<Unit, SamplingError> {
    let mut rng = unit_rng(scm.master_seed(), stream, unit_index, SamplingMode::Observational, None);
    Ok(sample_observational(scm, &mut rng)?.with_unit_index(unit_index))
}

pub fn interventional_unit(
    scm: &SdScm,
    intervention: &Intervention,
    stream: u64,
    unit_index: u64,
) -> Result<Unit, SamplingError> {
    let node = intervention.resolve(scm)?;
    let mut rng =
        unit_rng(scm.master_seed(), stream, unit_index, SamplingMode::Interventional, Some((node, intervention.value)));
    Ok(sample_interventional(scm, intervention, &mut rng)?.with_unit_index(unit_index))
}

pub fn counterfactual_unit(
    scm: &SdScm,
    factual: &Unit,
    intervention: &Intervention,
    stream: u64,
) -> Result<Unit, SamplingError> {
    let node = intervention.resolve(scm)?;
    let mut rng = unit_rng(
        scm.master_seed(),
        stream,
        factual.provenance.unit_index,
        SamplingMode::Counterfactual,
        Some((node, intervention.value)),
    );
    sample_counterfactual(scm, factual, intervention, &mut rng)
}
