//! Ground-truth evaluation of effect estimates.
//!
//! Standard deviations are population standard deviations (divide by `n`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmark::{ArmPair, BenchmarkDataset, BenchmarkError, OutcomeTarget};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("length mismatch: {0} predictions vs {1} truths")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },
    #[error("{0} is zero")]
    ZeroDenominator(&'static str),
    #[error("interval {index} has lower bound above upper bound")]
    InvalidInterval { index: usize },
    #[error(transparent)]
    Benchmark(#[from] BenchmarkError),
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn is_constant(values: &[f64]) -> bool {
    values.iter().all(|&v| v == values[0])
}

/// Population standard deviation; exactly zero for constant input.
pub fn population_sd(values: &[f64]) -> f64 {
    if is_constant(values) {
        return 0.0;
    }
    let m = mean(values);
    (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64).sqrt()
}

fn check_lengths(predictions: &[f64], truths: &[f64], min: usize) -> Result<(), MetricsError> {
    if predictions.len() != truths.len() {
        return Err(MetricsError::LengthMismatch(predictions.len(), truths.len()));
    }
    if truths.len() < min {
        return Err(MetricsError::TooFew { needed: min, got: truths.len() });
    }
    Ok(())
}

/// Root mean squared difference between predicted and true effects.
pub fn pehe(predictions: &[f64], truths: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(predictions, truths, 1)?;
    let sse: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t).powi(2)).sum();
    Ok((sse / truths.len() as f64).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PeheScale {
    /// SD of the observed outcomes.
    OutcomeSd,
    /// SD of the true unit-level effects.
    IteSd,
}

/// PEHE divided by the SD of `outcomes` or of `truths`.
pub fn standardized_pehe(
    predictions: &[f64],
    truths: &[f64],
    scale: PeheScale,
    outcomes: &[f64],
) -> Result<f64, MetricsError> {
    let value = pehe(predictions, truths)?;
    let sd = match scale {
        PeheScale::OutcomeSd => {
            if outcomes.is_empty() {
                return Err(MetricsError::TooFew { needed: 1, got: 0 });
            }
            population_sd(outcomes)
        }
        PeheScale::IteSd => population_sd(truths),
    };
    if sd == 0.0 {
        return Err(MetricsError::ZeroDenominator(match scale {
            PeheScale::OutcomeSd => "outcome standard deviation",
            PeheScale::IteSd => "effect standard deviation",
        }));
    }
    Ok(value / sd)
}

/// `1 - SSE/SST`, with SST taken about the mean of `truths`.
pub fn r2(predictions: &[f64], truths: &[f64]) -> Result<f64, MetricsError> {
    check_lengths(predictions, truths, 2)?;
    let m = mean(truths);
    let sst: f64 = truths.iter().map(|t| (t - m).powi(2)).sum();
    if sst == 0.0 || is_constant(truths) {
        return Err(MetricsError::ZeroDenominator("variance of the true effects"));
    }
    let sse: f64 = predictions.iter().zip(truths).map(|(p, t)| (p - t).powi(2)).sum();
    Ok(1.0 - sse / sst)
}

pub fn r2_clipped(predictions: &[f64], truths: &[f64]) -> Result<f64, MetricsError> {
    Ok(r2(predictions, truths)?.max(0.0))
}

/// Per-unit interval estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalSet {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl IntervalSet {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, MetricsError> {
        if lower.len() != upper.len() {
            return Err(MetricsError::LengthMismatch(lower.len(), upper.len()));
        }
        if let Some(index) = lower.iter().zip(&upper).position(|(l, u)| l > u || l.is_nan() || u.is_nan()) {
            return Err(MetricsError::InvalidInterval { index });
        }
        Ok(Self { lower, upper })
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Coverage {
    pub fraction: f64,
    /// Mean interval width, in outcome SD units when an SD was supplied.
    pub mean_width: f64,
}

/// Share of units whose true effect lies inside its interval (bounds
/// inclusive), and the mean width.
pub fn coverage(intervals: &IntervalSet, truths: &[f64], outcome_sd: Option<f64>) -> Result<Coverage, MetricsError> {
    check_lengths(&intervals.lower, truths, 1)?;
    let covered =
        truths.iter().enumerate().filter(|&(i, t)| intervals.lower[i] <= *t && *t <= intervals.upper[i]).count();
    let width = intervals.upper.iter().zip(&intervals.lower).map(|(u, l)| u - l).sum::<f64>() / truths.len() as f64;
    let mean_width = match outcome_sd {
        Some(0.0) => return Err(MetricsError::ZeroDenominator("outcome standard deviation")),
        Some(sd) => width / sd,
        None => width,
    };
    Ok(Coverage { fraction: covered as f64 / truths.len() as f64, mean_width })
}

/// `(estimate - truth) / outcome_sd`.
pub fn sate_error_sd_units(estimate: f64, truth: f64, outcome_sd: f64) -> Result<f64, MetricsError> {
    if outcome_sd == 0.0 {
        return Err(MetricsError::ZeroDenominator("outcome standard deviation"));
    }
    Ok((estimate - truth) / outcome_sd)
}

/// Pearson correlation; `None` when either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 || is_constant(a) || is_constant(b) {
        return None;
    }
    let (ma, mb) = (mean(a), mean(b));
    let mut sab = 0.0;
    let mut saa = 0.0;
    let mut sbb = 0.0;
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratumCorrelation {
    pub stratum: usize,
    pub n: usize,
    /// Absent for strata with fewer than 3 units or no variance.
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StratifiedCorrelation {
    pub pooled: f64,
    pub strata: Vec<StratumCorrelation>,
}

impl StratifiedCorrelation {
    /// Mean absolute within-stratum correlation over usable strata.
    pub fn mean_abs_within(&self) -> Option<f64> {
        let used: Vec<f64> = self.strata.iter().filter_map(|s| s.rho).map(f64::abs).collect();
        (!used.is_empty()).then(|| mean(&used))
    }

    pub fn skipped(&self) -> usize {
        self.strata.iter().filter(|s| s.rho.is_none()).count()
    }
}

/// Pearson correlation of `a` and `b`, pooled and within each value of
/// `strata`. Strata are reported in ascending order.
pub fn stratified_correlation(a: &[f64], b: &[f64], strata: &[usize]) -> Result<StratifiedCorrelation, MetricsError> {
    check_lengths(a, b, 3)?;
    if strata.len() != a.len() {
        return Err(MetricsError::LengthMismatch(strata.len(), a.len()));
    }
    let pooled = pearson(a, b).ok_or(MetricsError::ZeroDenominator("pooled variance"))?;
    let mut levels: Vec<usize> = strata.to_vec();
    levels.sort_unstable();
    levels.dedup();
    let strata = levels
        .into_iter()
        .map(|s| {
            let (xa, xb): (Vec<f64>, Vec<f64>) =
                strata.iter().zip(a.iter().zip(b)).filter(|(&w, _)| w == s).map(|(_, (&x, &y))| (x, y)).unzip();
            let rho = if xa.len() < 3 { None } else { pearson(&xa, &xb) };
            StratumCorrelation { stratum: s, n: xa.len(), rho }
        })
        .collect();
    Ok(StratifiedCorrelation { pooled, strata })
}

/// Five-number summary plus mean and SD; quartiles by linear interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Summary {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        Some(Self {
            n: values.len(),
            mean: mean(values),
            sd: population_sd(values),
            min: sorted[0],
            q1: quantile(&sorted, 0.25),
            median: quantile(&sorted, 0.5),
            q3: quantile(&sorted, 0.75),
            max: sorted[sorted.len() - 1],
        })
    }
}

/// Every metric for one method on one dataset and target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub dataset: String,
    pub target: String,
    pub sate: f64,
    pub ate_estimate: f64,
    pub sate_error_sd_units: Option<f64>,
    /// `|ate_estimate - sate|` in outcome units.
    pub rmse: f64,
    pub r2: Option<f64>,
    pub r2_clipped: Option<f64>,
    pub pehe: f64,
    pub pehe_std_outcome: Option<f64>,
    pub pehe_std_ite: Option<f64>,
    pub coverage: Option<f64>,
    pub mean_width_sd_units: Option<f64>,
    pub outcome_sd: f64,
    pub floored_units: usize,
}

/// What a method produced for one dataset.
#[derive(Debug, Clone, Copy)]
pub struct Estimate<'a> {
    pub method: &'a str,
    pub ate: f64,
    /// One prediction per dataset record.
    pub cate: &'a [f64],
    pub intervals: Option<&'a IntervalSet>,
}

/// Scores an estimate against the dataset's ground truth.
pub fn evaluate(
    dataset: &BenchmarkDataset,
    dataset_id: &str,
    estimate: &Estimate<'_>,
    target: &OutcomeTarget,
    arms: ArmPair,
) -> Result<MetricReport, MetricsError> {
    let Estimate { method, ate: ate_estimate, cate: predictions, intervals } = *estimate;
    let truths = dataset.true_ites(target, arms)?;
    let observed = dataset.observed(target)?;
    let truths_v = &truths.values;
    check_lengths(predictions, truths_v, 1)?;
    let sate = mean(truths_v);
    let outcome_sd = population_sd(&observed.values);
    let r2 = r2(predictions, truths_v).ok();
    let pehe = pehe(predictions, truths_v)?;
    let cov = match intervals {
        Some(iv) => Some(coverage(iv, truths_v, (outcome_sd > 0.0).then_some(outcome_sd))?),
        None => None,
    };
    Ok(MetricReport {
        method: method.to_string(),
        dataset: dataset_id.to_string(),
        target: target.to_string(),
        sate,
        ate_estimate,
        sate_error_sd_units: sate_error_sd_units(ate_estimate, sate, outcome_sd).ok(),
        rmse: (ate_estimate - sate).abs(),
        r2,
        r2_clipped: r2.map(|v| v.max(0.0)),
        pehe,
        pehe_std_outcome: standardized_pehe(predictions, truths_v, PeheScale::OutcomeSd, &observed.values).ok(),
        pehe_std_ite: standardized_pehe(predictions, truths_v, PeheScale::IteSd, &observed.values).ok(),
        coverage: cov.map(|c| c.fraction),
        mean_width_sd_units: cov.filter(|_| outcome_sd > 0.0).map(|c| c.mean_width),
        outcome_sd,
        floored_units: truths.floored.max(observed.floored),
    })
}

type Column = fn(&MetricReport) -> Option<f64>;

/// Aggregates of every metric for one method and target across datasets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub target: String,
    pub datasets: usize,
    /// Metric name to summary over the datasets where it was defined.
    pub metrics: BTreeMap<String, Summary>,
}

/// Groups reports by (method, target), in first-seen order.
pub fn summarize_reports(reports: &[MetricReport]) -> Vec<MethodSummary> {
    let mut groups: Vec<((&str, &str), Vec<&MetricReport>)> = Vec::new();
    for r in reports {
        let key = (r.method.as_str(), r.target.as_str());
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => g.1.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|((method, target), rows)| {
            let columns: [(&str, Column); 10] = [
                ("sate_error_sd_units", |r| r.sate_error_sd_units),
                ("rmse", |r| Some(r.rmse)),
                ("r2", |r| r.r2),
                ("r2_clipped", |r| r.r2_clipped),
                ("pehe", |r| Some(r.pehe)),
                ("pehe_std_outcome", |r| r.pehe_std_outcome),
                ("pehe_std_ite", |r| r.pehe_std_ite),
                ("coverage", |r| r.coverage),
                ("mean_width_sd_units", |r| r.mean_width_sd_units),
                ("sate", |r| Some(r.sate)),
            ];
            let metrics = columns
                .iter()
                .filter_map(|(name, get)| {
                    let values: Vec<f64> = rows.iter().filter_map(|r| get(r)).collect();
                    Summary::of(&values).map(|s| (name.to_string(), s))
                })
                .collect();
            MethodSummary { method: method.to_string(), target: target.to_string(), datasets: rows.len(), metrics }
        })
        .collect()
}
