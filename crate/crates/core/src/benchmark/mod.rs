//! Effect-estimation benchmarks with exact per-unit ground truth.
//!
//! Each record is one observational unit plus, for every other treatment
//! value, its counterfactual under `do(treatment = value)`. The factual arm
//! reuses the observed unit, so a unit's observed outcome is always its own
//! potential outcome under the treatment it received. Every arm keeps the
//! full outcome distribution it was drawn from, which gives probability and
//! log-probability outcomes alongside the categorical draw.

mod audit;
mod io;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::stream_key;
use crate::sampling::{counterfactual_unit, observational_unit, Intervention, SamplingError};
use crate::scm::{ScmError, SdScm, VariableKind, VariationId};
use crate::scorer::ScorerRef;
use crate::spec::{instantiate_variation, ScmSpecDocument, SpecError};

pub use audit::{audit_sate, AuditCell, AuditComparison, AuditConfig, AuditReport, AuditSummary};
pub use io::{
    metadata_json, metadata_path, read_dataset, read_dataset_csv, write_atomic, write_dataset, write_dataset_csv,
    ColumnInfo, DATASET_EXTENSION,
};

/// Log-probability targets clamp probabilities to at least this value.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchmarkError {
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("{0}")]
    Design(String),
    #[error("invalid outcome target: {0}")]
    InvalidTarget(String),
    #[error("invalid treatment arms: {0}")]
    InvalidArms(String),
    #[error("unit {unit_id}: log of zero probability under arm {arm}")]
    LogOfZero { unit_id: u64, arm: usize },
    #[error("dataset has no records")]
    EmptyDataset,
    #[error("no units received treatment value {0}")]
    EmptyArm(usize),
    #[error("malformed dataset: {0}")]
    Format(String),
    #[error("{0}")]
    Io(String),
    #[error("invalid audit configuration: {0}")]
    Config(String),
}

impl From<ScmError> for BenchmarkError {
    fn from(e: ScmError) -> Self {
        BenchmarkError::Sampling(SamplingError::Model(e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TargetKind {
    /// `1[y = k]`
    Categorical,
    /// `P(y = k)`
    Probability,
    /// `ln P(y = k)`
    LogProbability,
}

/// Which scalar is read off an outcome. Serialized in its `prob:1` form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct OutcomeTarget {
    pub kind: TargetKind,
    pub value: usize,
}

impl OutcomeTarget {
    pub fn new(kind: TargetKind, value: usize) -> Self {
        Self { kind, value }
    }

    pub fn probability(value: usize) -> Self {
        Self::new(TargetKind::Probability, value)
    }

    pub fn check(&self, outcome_levels: usize) -> Result<(), BenchmarkError> {
        if self.value >= outcome_levels {
            return Err(BenchmarkError::InvalidTarget(format!("{self}: outcome has only {outcome_levels} values")));
        }
        Ok(())
    }

    /// Target value of one arm; errors on the log of a zero probability.
    pub fn of_arm(&self, arm: &ArmOutcome) -> Option<f64> {
        match self.kind {
            TargetKind::Categorical => Some(if arm.outcome == self.value { 1.0 } else { 0.0 }),
            TargetKind::Probability => Some(arm.distribution[self.value]),
            TargetKind::LogProbability => {
                let p = arm.distribution[self.value];
                (p > 0.0).then(|| p.ln())
            }
        }
    }

    /// Like [`Self::of_arm`] but floors probabilities at [`LOG_FLOOR`];
    /// the flag reports whether flooring happened.
    pub fn of_arm_floored(&self, arm: &ArmOutcome) -> (f64, bool) {
        match self.kind {
            TargetKind::LogProbability => {
                let p = arm.distribution[self.value];
                if p < LOG_FLOOR {
                    (LOG_FLOOR.ln(), true)
                } else {
                    (p.ln(), false)
                }
            }
            _ => (self.of_arm(arm).expect("non-log targets always defined"), false),
        }
    }
}

impl fmt::Display for OutcomeTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            TargetKind::Categorical => "cat",
            TargetKind::Probability => "prob",
            TargetKind::LogProbability => "logp",
        };
        write!(f, "{kind}:{}", self.value)
    }
}

impl FromStr for OutcomeTarget {
    type Err = BenchmarkError;

    /// `cat:k`, `prob:k` or `logp:k` (long names also accepted).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BenchmarkError::InvalidTarget(format!("{s:?}; expected cat:K, prob:K or logp:K"));
        let (kind, value) = s.split_once(':').ok_or_else(bad)?;
        let kind = match kind.trim() {
            "cat" | "categorical" => TargetKind::Categorical,
            "prob" | "probability" => TargetKind::Probability,
            "logp" | "log-probability" => TargetKind::LogProbability,
            _ => return Err(bad()),
        };
        let value = value.trim().parse().map_err(|_| bad())?;
        Ok(Self { kind, value })
    }
}

impl From<OutcomeTarget> for String {
    fn from(t: OutcomeTarget) -> String {
        t.to_string()
    }
}

impl TryFrom<String> for OutcomeTarget {
    type Error = BenchmarkError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

/// The two treatment values being contrasted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArmPair {
    pub control: usize,
    pub treated: usize,
}

impl ArmPair {
    pub fn new(control: usize, treated: usize) -> Self {
        Self { control, treated }
    }

    pub fn check(&self, treatment_levels: usize) -> Result<(), BenchmarkError> {
        if self.control == self.treated || self.control >= treatment_levels || self.treated >= treatment_levels {
            return Err(BenchmarkError::InvalidArms(format!(
                "({}, {}) with {treatment_levels} treatment values",
                self.control, self.treated
            )));
        }
        Ok(())
    }
}

impl Default for ArmPair {
    fn default() -> Self {
        Self { control: 0, treated: 1 }
    }
}

/// The outcome under one treatment arm.
#[derive(Debug, Clone, PartialEq)]
pub struct ArmOutcome {
    pub outcome: usize,
    pub distribution: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialOutcomeRecord {
    pub unit_id: u64,
    /// Covariate value indices, aligned with the dataset's covariate list.
    pub covariates: Vec<usize>,
    pub treatment: usize,
    pub outcome: usize,
    /// One entry per treatment value.
    pub arms: Vec<ArmOutcome>,
}

impl PotentialOutcomeRecord {
    /// Outcome distribution of the observed unit.
    pub fn factual_distribution(&self) -> &[f64] {
        &self.arms[self.treatment].distribution
    }

    pub fn factual(&self) -> &ArmOutcome {
        &self.arms[self.treatment]
    }
}

/// Unit-level effect `target(arm treated) - target(arm control)`.
pub fn ite(record: &PotentialOutcomeRecord, target: &OutcomeTarget, arms: ArmPair) -> Result<f64, BenchmarkError> {
    let value =
        |arm: usize| target.of_arm(&record.arms[arm]).ok_or(BenchmarkError::LogOfZero { unit_id: record.unit_id, arm });
    Ok(value(arms.treated)? - value(arms.control)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateInfo {
    pub name: String,
    pub exogenous: bool,
    pub values: Vec<String>,
}

/// Everything about a dataset except its rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub spec_name: String,
    pub variation: VariationId,
    pub scorer: String,
    pub seed: u64,
    pub dataset_index: u64,
    pub treatment: String,
    pub treatment_values: Vec<String>,
    pub outcome: String,
    pub outcome_values: Vec<String>,
    pub covariates: Vec<CovariateInfo>,
    #[serde(default)]
    pub hidden: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub command: Vec<String>,
}

impl DatasetMetadata {
    pub fn covariate_names(&self) -> Vec<&str> {
        self.covariates.iter().map(|c| c.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkDataset {
    pub meta: DatasetMetadata,
    pub records: Vec<PotentialOutcomeRecord>,
}

/// Per-unit values of a target, plus how many were floored.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetColumn {
    pub values: Vec<f64>,
    pub floored: usize,
}

impl BenchmarkDataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn treatment_levels(&self) -> usize {
        self.meta.treatment_values.len()
    }

    pub fn outcome_levels(&self) -> usize {
        self.meta.outcome_values.len()
    }

    /// Observed outcome of every unit under `target`.
    pub fn observed(&self, target: &OutcomeTarget) -> Result<TargetColumn, BenchmarkError> {
        target.check(self.outcome_levels())?;
        let mut floored = 0;
        let values = self
            .records
            .iter()
            .map(|r| {
                let (v, f) = target.of_arm_floored(r.factual());
                floored += usize::from(f);
                v
            })
            .collect();
        Ok(TargetColumn { values, floored })
    }

    /// True unit-level effects, flooring log targets at [`LOG_FLOOR`].
    pub fn true_ites(&self, target: &OutcomeTarget, arms: ArmPair) -> Result<TargetColumn, BenchmarkError> {
        target.check(self.outcome_levels())?;
        arms.check(self.treatment_levels())?;
        let mut floored = 0;
        let values = self
            .records
            .iter()
            .map(|r| {
                let (a, fa) = target.of_arm_floored(&r.arms[arms.treated]);
                let (b, fb) = target.of_arm_floored(&r.arms[arms.control]);
                floored += usize::from(fa || fb);
                a - b
            })
            .collect();
        Ok(TargetColumn { values, floored })
    }

    /// Mean observed outcome among treated minus among controls.
    pub fn observed_contrast(&self, target: &OutcomeTarget, arms: ArmPair) -> Result<f64, BenchmarkError> {
        let observed = self.observed(target)?;
        arms.check(self.treatment_levels())?;
        let mean_of = |arm: usize| {
            let vals: Vec<f64> = self
                .records
                .iter()
                .zip(&observed.values)
                .filter(|(r, _)| r.treatment == arm)
                .map(|(_, &v)| v)
                .collect();
            if vals.is_empty() {
                Err(BenchmarkError::EmptyArm(arm))
            } else {
                Ok(vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        Ok(mean_of(arms.treated)? - mean_of(arms.control)?)
    }

    /// Drops exogenous covariates from the estimator-visible columns.
    /// Ground-truth arms are untouched.
    pub fn hidden_projection(&self) -> BenchmarkDataset {
        let keep: Vec<bool> = self.meta.covariates.iter().map(|c| !c.exogenous).collect();
        let mut meta = self.meta.clone();
        meta.hidden.extend(self.meta.covariates.iter().filter(|c| c.exogenous).map(|c| c.name.clone()));
        meta.covariates.retain(|c| !c.exogenous);
        let records = self
            .records
            .iter()
            .map(|r| PotentialOutcomeRecord {
                covariates: r.covariates.iter().zip(&keep).filter(|(_, &k)| k).map(|(&v, _)| v).collect(),
                ..r.clone()
            })
            .collect();
        BenchmarkDataset { meta, records }
    }
}

/// Sample average treatment effect: mean unit-level effect.
///
/// Log targets use floored probabilities; a warning is logged when any
/// unit needed flooring.
pub fn sate(dataset: &BenchmarkDataset, target: &OutcomeTarget, arms: ArmPair) -> Result<f64, BenchmarkError> {
    if dataset.is_empty() {
        return Err(BenchmarkError::EmptyDataset);
    }
    let ites = dataset.true_ites(target, arms)?;
    if ites.floored > 0 {
        log::warn!(
            "{} of {} units had a zero probability under {target}; floored at {LOG_FLOOR:e}",
            ites.floored,
            dataset.len()
        );
    }
    Ok(ites.values.iter().sum::<f64>() / ites.values.len() as f64)
}

/// Resolved roles of variables in a benchmark model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkDesign {
    pub treatment: usize,
    pub outcome: usize,
    /// All other variables, in sampling order.
    pub covariates: Vec<usize>,
}

impl BenchmarkDesign {
    pub fn new(scm: &SdScm, treatment: &str, outcome: &str) -> Result<Self, BenchmarkError> {
        let t = scm.index_of(treatment)?;
        let y = scm.index_of(outcome)?;
        if t == y {
            return Err(BenchmarkError::Design("treatment and outcome must differ".into()));
        }
        for (role, node) in [("treatment", t), ("outcome", y)] {
            if scm.variable(node).kind() != VariableKind::Endogenous {
                return Err(BenchmarkError::Design(format!(
                    "{role} {:?} must be endogenous",
                    scm.variable(node).name()
                )));
            }
        }
        if scm.variable(t).cardinality() < 2 {
            return Err(BenchmarkError::Design(format!("treatment {treatment:?} needs at least 2 values")));
        }
        let covariates = scm.order().iter().copied().filter(|&n| n != t && n != y).collect();
        Ok(Self { treatment: t, outcome: y, covariates })
    }

    pub fn from_spec(scm: &SdScm, spec: &ScmSpecDocument) -> Result<Self, BenchmarkError> {
        Self::new(scm, &spec.treatment, &spec.outcome)
    }

    pub fn metadata(&self, scm: &SdScm, spec_name: &str, dataset_index: u64) -> DatasetMetadata {
        let values = |n: usize| scm.variable(n).values().to_vec();
        DatasetMetadata {
            spec_name: spec_name.to_string(),
            variation: scm.variation().clone(),
            scorer: scm.scorer().label().to_string(),
            seed: scm.master_seed(),
            dataset_index,
            treatment: scm.variable(self.treatment).name().to_string(),
            treatment_values: values(self.treatment),
            outcome: scm.variable(self.outcome).name().to_string(),
            outcome_values: values(self.outcome),
            covariates: self
                .covariates
                .iter()
                .map(|&n| CovariateInfo {
                    name: scm.variable(n).name().to_string(),
                    exogenous: scm.variable(n).kind() == VariableKind::Exogenous,
                    values: values(n),
                })
                .collect(),
            hidden: Vec::new(),
            command: Vec::new(),
        }
    }
}

/// Observational unit `unit_index` of batch `stream` with all its
/// potential outcomes.
pub fn generate_record(
    scm: &SdScm,
    design: &BenchmarkDesign,
    stream: u64,
    unit_index: u64,
) -> Result<PotentialOutcomeRecord, BenchmarkError> {
    let factual = observational_unit(scm, stream, unit_index)?;
    let t = factual.value(design.treatment);
    let fact_dist =
        factual.distribution(design.outcome).expect("endogenous outcome is always drawn").probabilities().to_vec();
    let treatment_name = scm.variable(design.treatment).name();
    let mut arms = Vec::with_capacity(scm.variable(design.treatment).cardinality());
    for a in 0..scm.variable(design.treatment).cardinality() {
        if a == t {
            arms.push(ArmOutcome { outcome: factual.value(design.outcome), distribution: fact_dist.clone() });
            continue;
        }
        let cf = counterfactual_unit(scm, &factual, &Intervention::new(treatment_name, a), stream)?;
        let distribution = match cf.distribution(design.outcome) {
            Some(d) => d.probabilities().to_vec(),
            // outcome is not downstream of the treatment
            None => fact_dist.clone(),
        };
        arms.push(ArmOutcome { outcome: cf.value(design.outcome), distribution });
    }
    Ok(PotentialOutcomeRecord {
        unit_id: unit_index,
        covariates: design.covariates.iter().map(|&n| factual.value(n)).collect(),
        treatment: t,
        outcome: factual.value(design.outcome),
        arms,
    })
}

/// `n` records with unit ids `0..n`, drawn in parallel on the current
/// rayon pool. Output does not depend on the number of threads.
pub fn generate_dataset(
    scm: &SdScm,
    design: &BenchmarkDesign,
    spec_name: &str,
    n: usize,
    dataset_index: u64,
) -> Result<BenchmarkDataset, BenchmarkError> {
    if n == 0 {
        return Err(BenchmarkError::EmptyDataset);
    }
    let records = (0..n as u64)
        .into_par_iter()
        .map(|i| generate_record(scm, design, dataset_index, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BenchmarkDataset { meta: design.metadata(scm, spec_name, dataset_index), records })
}

/// Master seed for the `ordinal`-th variation of a benchmark run.
pub fn variation_seed(seed: u64, ordinal: u64) -> u64 {
    let key = stream_key(seed, &[0x7661_7273, ordinal]);
    u64::from_le_bytes(key[..8].try_into().expect("8 bytes"))
}

/// Builds the model for one variation of a benchmark run.
pub fn benchmark_model(
    spec: &ScmSpecDocument,
    variation: &VariationId,
    ordinal: u64,
    scorer: ScorerRef,
    seed: u64,
) -> Result<(SdScm, BenchmarkDesign), BenchmarkError> {
    let scm = instantiate_variation(spec, variation, scorer, variation_seed(seed, ordinal))?;
    let design = BenchmarkDesign::from_spec(&scm, spec)?;
    Ok((scm, design))
}
