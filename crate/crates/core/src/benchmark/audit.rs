//! What effect does a scorer encode? SATEs across phrasing variations,
//! compared between scorer backends on the same variations.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{benchmark_model, generate_dataset, sate, ArmPair, BenchmarkError, OutcomeTarget};
use crate::metrics::{mean, population_sd, Summary};
use crate::scm::VariationId;
use crate::scorer::ScorerRef;
use crate::spec::{sample_variations, ScmSpecDocument};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditConfig {
    pub variations: usize,
    pub datasets: usize,
    pub size: usize,
    pub seed: u64,
    pub targets: Vec<OutcomeTarget>,
    pub arms: ArmPair,
}

impl AuditConfig {
    fn check(&self) -> Result<(), BenchmarkError> {
        for (name, v) in [("variations", self.variations), ("datasets", self.datasets), ("size", self.size)] {
            if v == 0 {
                return Err(BenchmarkError::Config(format!("{name} must be at least 1")));
            }
        }
        if self.targets.is_empty() {
            return Err(BenchmarkError::Config("no outcome targets".into()));
        }
        Ok(())
    }
}

/// Result for one (scorer, variation, target). On failure the numbers are
/// absent and `error` says why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditCell {
    pub scorer: String,
    pub variation_ordinal: usize,
    pub variation: VariationId,
    pub target: OutcomeTarget,
    /// SATE over all datasets of the variation pooled together.
    pub sate: Option<f64>,
    /// SATE divided by the SD of the observed outcome.
    pub sate_sd_units: Option<f64>,
    /// Per-dataset SATEs.
    pub dataset_sates: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditSummary {
    pub scorer: String,
    pub target: OutcomeTarget,
    pub failed: usize,
    pub sate: Option<Summary>,
    pub sate_sd_units: Option<Summary>,
}

/// Paired comparison of two scorers on the variations where both succeeded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditComparison {
    pub first: String,
    pub second: String,
    pub target: OutcomeTarget,
    pub pairs: usize,
    /// Mean of `first - second` over paired variations.
    pub mean_difference: Option<f64>,
    /// Variations where the two SATEs have opposite signs.
    pub opposite_sign: usize,
    /// Whether the [min, max] ranges of the two SATE distributions overlap.
    pub ranges_overlap: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub spec_name: String,
    pub config: AuditConfig,
    pub scorers: Vec<String>,
    pub variations: Vec<VariationId>,
    pub cells: Vec<AuditCell>,
    pub summaries: Vec<AuditSummary>,
    pub comparisons: Vec<AuditComparison>,
}

impl AuditReport {
    pub fn cells_for<'a>(&'a self, scorer: &'a str, target: &'a OutcomeTarget) -> impl Iterator<Item = &'a AuditCell> {
        self.cells.iter().filter(move |c| c.scorer == scorer && c.target == *target)
    }

    pub fn summary(&self, scorer: &str, target: &OutcomeTarget) -> Option<&AuditSummary> {
        self.summaries.iter().find(|s| s.scorer == scorer && s.target == *target)
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| c.error.is_some()).count()
    }

    /// One row per cell: scorer, variation, target, sate, sate_sd_units, error.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), BenchmarkError> {
        let io = |e: csv::Error| BenchmarkError::Io(e.to_string());
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["scorer", "variation", "target", "sate", "sate_sd_units", "error"]).map_err(io)?;
        let num = |v: Option<f64>| v.map(|x| format!("{x:?}")).unwrap_or_default();
        for c in &self.cells {
            w.write_record([
                c.scorer.clone(),
                c.variation.to_string(),
                c.target.to_string(),
                num(c.sate),
                num(c.sate_sd_units),
                c.error.clone().unwrap_or_default(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| BenchmarkError::Io(e.to_string()))
    }

    pub fn csv_string(&self) -> Result<String, BenchmarkError> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| BenchmarkError::Io(e.to_string()))
    }

    /// Summaries, comparisons and every cell with its per-dataset SATEs.
    pub fn summary_json(&self) -> String {
        let value = serde_json::json!({
            "spec_name": self.spec_name,
            "config": self.config,
            "scorers": self.scorers,
            "variations": self.variations.len(),
            "failed_cells": self.failures(),
            "summaries": self.summaries,
            "cells": self.cells,
            "comparisons": self.comparisons,
        });
        let mut text = serde_json::to_string_pretty(&value).expect("report serializes");
        text.push('\n');
        text
    }
}

fn run_cell(
    spec: &ScmSpecDocument,
    variation: &VariationId,
    ordinal: usize,
    scorer: &ScorerRef,
    config: &AuditConfig,
) -> Result<Vec<(f64, f64, Vec<f64>)>, BenchmarkError> {
    let (scm, design) = benchmark_model(spec, variation, ordinal as u64, scorer.clone(), config.seed)?;
    let mut datasets = Vec::with_capacity(config.datasets);
    for d in 0..config.datasets {
        datasets.push(generate_dataset(&scm, &design, &spec.name, config.size, d as u64)?);
    }
    config
        .targets
        .iter()
        .map(|target| {
            let mut per_dataset = Vec::with_capacity(datasets.len());
            let mut observed = Vec::with_capacity(config.datasets * config.size);
            for ds in &datasets {
                per_dataset.push(sate(ds, target, config.arms)?);
                observed.extend(ds.observed(target)?.values);
            }
            // equal dataset sizes, so the mean of means is the pooled mean
            let pooled = mean(&per_dataset);
            let sd = population_sd(&observed);
            let scaled = if sd > 0.0 { pooled / sd } else { f64::NAN };
            Ok((pooled, scaled, per_dataset))
        })
        .collect()
}

/// Runs every (scorer, variation) cell in parallel. Variations are drawn
/// once from `config.seed` and shared by all scorers; a failing cell is
/// recorded in the report instead of aborting the run.
pub fn audit_sate(
    spec: &ScmSpecDocument,
    scorers: &[ScorerRef],
    config: &AuditConfig,
) -> Result<AuditReport, BenchmarkError> {
    config.check()?;
    if scorers.is_empty() {
        return Err(BenchmarkError::Config("at least one scorer is required".into()));
    }
    let mut labels: Vec<String> = scorers.iter().map(|s| s.label().to_string()).collect();
    {
        let mut sorted = labels.clone();
        sorted.sort();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(BenchmarkError::Config(format!("duplicate scorer label {:?}", w[0])));
        }
    }
    spec.check()?;
    let treatment_levels = spec.variable(&spec.treatment).map_or(0, |v| v.values.len());
    let outcome_levels = spec.variable(&spec.outcome).map_or(0, |v| v.values.len());
    config.arms.check(treatment_levels)?;
    for target in &config.targets {
        target.check(outcome_levels)?;
    }
    let variations = sample_variations(spec, config.variations, config.seed)?;

    let jobs: Vec<(usize, usize)> =
        (0..scorers.len()).flat_map(|s| (0..variations.len()).map(move |v| (s, v))).collect();
    let results: Vec<_> =
        jobs.par_iter().map(|&(s, v)| run_cell(spec, &variations[v], v, &scorers[s], config)).collect();

    let mut cells = Vec::with_capacity(jobs.len() * config.targets.len());
    for (&(s, v), result) in jobs.iter().zip(results) {
        for (t, target) in config.targets.iter().enumerate() {
            let mut cell = AuditCell {
                scorer: labels[s].clone(),
                variation_ordinal: v,
                variation: variations[v].clone(),
                target: *target,
                sate: None,
                sate_sd_units: None,
                dataset_sates: Vec::new(),
                error: None,
            };
            match &result {
                Ok(values) => {
                    let (pooled, scaled, per_dataset) = &values[t];
                    cell.sate = Some(*pooled);
                    cell.sate_sd_units = scaled.is_finite().then_some(*scaled);
                    cell.dataset_sates = per_dataset.clone();
                }
                Err(e) => {
                    log::warn!("audit cell {} / variation {}: {e}", labels[s], variations[v]);
                    cell.error = Some(e.to_string());
                }
            }
            cells.push(cell);
        }
    }

    let mut summaries = Vec::new();
    for label in &labels {
        for target in &config.targets {
            let mine: Vec<&AuditCell> = cells.iter().filter(|c| &c.scorer == label && c.target == *target).collect();
            let sates: Vec<f64> = mine.iter().filter_map(|c| c.sate).collect();
            let scaled: Vec<f64> = mine.iter().filter_map(|c| c.sate_sd_units).collect();
            summaries.push(AuditSummary {
                scorer: label.clone(),
                target: *target,
                failed: mine.iter().filter(|c| c.error.is_some()).count(),
                sate: Summary::of(&sates),
                sate_sd_units: Summary::of(&scaled),
            });
        }
    }

    let mut comparisons = Vec::new();
    for a in 0..labels.len() {
        for b in a + 1..labels.len() {
            for target in &config.targets {
                comparisons.push(compare(&cells, &labels[a], &labels[b], target));
            }
        }
    }

    Ok(AuditReport {
        spec_name: spec.name.clone(),
        config: config.clone(),
        scorers: std::mem::take(&mut labels),
        variations,
        cells,
        summaries,
        comparisons,
    })
}

fn compare(cells: &[AuditCell], first: &str, second: &str, target: &OutcomeTarget) -> AuditComparison {
    let by_variation = |label: &str| -> BTreeMap<usize, f64> {
        cells
            .iter()
            .filter(|c| c.scorer == label && c.target == *target)
            .filter_map(|c| c.sate.map(|s| (c.variation_ordinal, s)))
            .collect()
    };
    let a = by_variation(first);
    let b = by_variation(second);
    let pairs: Vec<(f64, f64)> = a.iter().filter_map(|(v, &x)| b.get(v).map(|&y| (x, y))).collect();
    let diffs: Vec<f64> = pairs.iter().map(|(x, y)| x - y).collect();
    let range = |m: &BTreeMap<usize, f64>| {
        let lo = m.values().copied().fold(f64::INFINITY, f64::min);
        let hi = m.values().copied().fold(f64::NEG_INFINITY, f64::max);
        (!m.is_empty()).then_some((lo, hi))
    };
    let ranges_overlap = match (range(&a), range(&b)) {
        (Some((alo, ahi)), Some((blo, bhi))) => Some(alo <= bhi && blo <= ahi),
        _ => None,
    };
    AuditComparison {
        first: first.to_string(),
        second: second.to_string(),
        target: *target,
        pairs: pairs.len(),
        mean_difference: (!diffs.is_empty()).then(|| mean(&diffs)),
        opposite_sign: pairs.iter().filter(|(x, y)| x * y < 0.0).count(),
        ranges_overlap,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mocks;
    use crate::spec::bundled;

    fn config(targets: Vec<OutcomeTarget>) -> AuditConfig {
        AuditConfig { variations: 3, datasets: 2, size: 50, seed: 9, targets, arms: ArmPair::default() }
    }

    #[test]
    fn degenerate_scorer_has_zero_sates() {
        let spec = bundled::marathon_g1();
        let scorer = ScorerRef::tabular("flat", mocks::degenerate_table(&spec).unwrap()).unwrap();
        let mut cfg = config(vec![OutcomeTarget::probability(1)]);
        // the toy specs have a single phrasing per variable
        cfg.variations = 1;
        let report = audit_sate(&spec, &[scorer], &cfg).unwrap();
        assert_eq!(report.cells.len(), 1);
        assert!(report.cells.iter().all(|c| c.sate == Some(0.0)));
        assert!(report.comparisons.is_empty());
        let csv = report.csv_string().unwrap();
        assert!(csv.starts_with("scorer,variation,target,sate,sate_sd_units,error\n"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn duplicate_labels_are_rejected() {
        let spec = bundled::marathon_g1();
        let s = ScorerRef::tabular("a", mocks::degenerate_table(&spec).unwrap()).unwrap();
        let err = audit_sate(&spec, &[s.clone(), s], &config(vec![OutcomeTarget::probability(1)])).unwrap_err();
        assert!(matches!(err, BenchmarkError::Config(_)));
    }

    #[test]
    fn opposite_tables_disagree() {
        let (spec, up) = mocks::effect_table(0.1).unwrap();
        let (_, down) = mocks::effect_table(-0.1).unwrap();
        let scorers = [ScorerRef::tabular("up", up).unwrap(), ScorerRef::tabular("down", down).unwrap()];
        let mut cfg = config(vec![OutcomeTarget::probability(1)]);
        cfg.size = 400;
        let report = audit_sate(&spec, &scorers, &cfg).unwrap();
        assert_eq!(report.comparisons.len(), 1);
        let cmp = &report.comparisons[0];
        assert_eq!(cmp.pairs, 3);
        assert_eq!(cmp.ranges_overlap, Some(false));
        assert_eq!(cmp.opposite_sign, 3);
        // both scorers saw the same variations
        let up_vars: Vec<_> = report.cells_for("up", &cfg.targets[0]).map(|c| &c.variation).collect();
        let down_vars: Vec<_> = report.cells_for("down", &cfg.targets[0]).map(|c| &c.variation).collect();
        assert_eq!(up_vars, down_vars);
    }
}
