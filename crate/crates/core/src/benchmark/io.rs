//! Dataset files: one CSV of records plus a JSON metadata sidecar.
//!
//! CSV columns are `unit_id`, one column per visible covariate (value
//! index), `t`, `y`, then for each treatment value `a`: `y_arm_a` followed by
//! `p_arm_a_0 .. p_arm_a_{K-1}`. Probabilities are written in shortest
//! round-trip form so a file reads back to identical values.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ArmOutcome, BenchmarkDataset, BenchmarkError, CovariateInfo, DatasetMetadata, PotentialOutcomeRecord};
use crate::scm::VariationId;

pub const DATASET_EXTENSION: &str = "csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnInfo {
    pub name: String,
    pub description: String,
}

#[derive(Serialize, Deserialize)]
struct MetadataFile {
    #[serde(flatten)]
    meta: DatasetMetadata,
    #[serde(default)]
    columns: Vec<ColumnInfo>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> BenchmarkError {
    BenchmarkError::Io(format!("{}: {e}", path.display()))
}

fn fmt_prob(p: f64) -> String {
    format!("{p:?}")
}

/// `dir/name.csv` -> `dir/name.meta.json`
pub fn metadata_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

fn header(meta: &DatasetMetadata) -> Vec<String> {
    let mut cols = vec!["unit_id".to_string()];
    cols.extend(meta.covariates.iter().map(|c| c.name.clone()));
    cols.push("t".into());
    cols.push("y".into());
    for a in 0..meta.treatment_values.len() {
        cols.push(format!("y_arm_{a}"));
        cols.extend((0..meta.outcome_values.len()).map(|k| format!("p_arm_{a}_{k}")));
    }
    cols
}

fn column_dictionary(meta: &DatasetMetadata) -> Vec<ColumnInfo> {
    let col = |name: String, description: String| ColumnInfo { name, description };
    let labels =
        |values: &[String]| values.iter().enumerate().map(|(i, v)| format!("{i}={v}")).collect::<Vec<_>>().join(", ");
    let mut out = vec![col("unit_id".into(), "unit index within the dataset".into())];
    for c in &meta.covariates {
        let kind = if c.exogenous { "exogenous" } else { "endogenous" };
        out.push(col(c.name.clone(), format!("{kind} covariate value index ({})", labels(&c.values))));
    }
    out.push(col("t".into(), format!("observed {} ({})", meta.treatment, labels(&meta.treatment_values))));
    out.push(col("y".into(), format!("observed {} ({})", meta.outcome, labels(&meta.outcome_values))));
    for (a, value) in meta.treatment_values.iter().enumerate() {
        out.push(col(format!("y_arm_{a}"), format!("{} under do({}={value})", meta.outcome, meta.treatment)));
        for (k, outcome) in meta.outcome_values.iter().enumerate() {
            out.push(col(
                format!("p_arm_{a}_{k}"),
                format!("P({}={outcome}) under do({}={value})", meta.outcome, meta.treatment),
            ));
        }
    }
    out
}

pub fn write_dataset_csv<W: Write>(dataset: &BenchmarkDataset, writer: W) -> Result<(), BenchmarkError> {
    let mut w = csv::Writer::from_writer(writer);
    let fail = |e: csv::Error| BenchmarkError::Io(e.to_string());
    w.write_record(header(&dataset.meta)).map_err(fail)?;
    let mut row: Vec<String> = Vec::new();
    for r in &dataset.records {
        row.clear();
        row.push(r.unit_id.to_string());
        row.extend(r.covariates.iter().map(usize::to_string));
        row.push(r.treatment.to_string());
        row.push(r.outcome.to_string());
        for arm in &r.arms {
            row.push(arm.outcome.to_string());
            row.extend(arm.distribution.iter().map(|&p| fmt_prob(p)));
        }
        w.write_record(&row).map_err(fail)?;
    }
    w.flush().map_err(|e| BenchmarkError::Io(e.to_string()))?;
    Ok(())
}

/// Sidecar JSON with the column dictionary; canonical, trailing newline.
pub fn metadata_json(meta: &DatasetMetadata) -> String {
    let file = MetadataFile { meta: meta.clone(), columns: column_dictionary(meta) };
    let mut text = serde_json::to_string_pretty(&file).expect("metadata serializes");
    text.push('\n');
    text
}

/// Writes `bytes` to `path` via a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), BenchmarkError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

/// Writes the CSV and its metadata sidecar, each atomically.
pub fn write_dataset(path: &Path, dataset: &BenchmarkDataset) -> Result<(), BenchmarkError> {
    let mut csv_bytes = Vec::new();
    write_dataset_csv(dataset, &mut csv_bytes)?;
    write_atomic(path, &csv_bytes)?;
    write_atomic(&metadata_path(path), metadata_json(&dataset.meta).as_bytes())
}

struct Layout {
    covariates: Vec<String>,
    arms: usize,
    levels: usize,
}

fn parse_layout(headers: &csv::StringRecord) -> Result<Layout, BenchmarkError> {
    let cols: Vec<&str> = headers.iter().collect();
    let bad = |msg: String| BenchmarkError::Format(msg);
    if cols.first() != Some(&"unit_id") {
        return Err(bad("first column must be unit_id".into()));
    }
    let t = cols.iter().position(|&c| c == "t").ok_or_else(|| bad("missing column t".into()))?;
    if cols.get(t + 1) != Some(&"y") {
        return Err(bad("column y must follow t".into()));
    }
    let covariates = cols[1..t].iter().map(|s| s.to_string()).collect();
    let rest = &cols[t + 2..];
    let levels = rest.iter().skip(1).take_while(|c| c.starts_with("p_arm_0_")).count();
    if levels == 0 {
        return Err(bad("no outcome probability columns".into()));
    }
    if !rest.len().is_multiple_of(levels + 1) {
        return Err(bad("arm columns are incomplete".into()));
    }
    let arms = rest.len() / (levels + 1);
    for a in 0..arms {
        let block = &rest[a * (levels + 1)..(a + 1) * (levels + 1)];
        if block[0] != format!("y_arm_{a}") {
            return Err(bad(format!("expected y_arm_{a}, found {}", block[0])));
        }
        for k in 0..levels {
            if block[k + 1] != format!("p_arm_{a}_{k}") {
                return Err(bad(format!("expected p_arm_{a}_{k}, found {}", block[k + 1])));
            }
        }
    }
    Ok(Layout { covariates, arms, levels })
}

fn parse_field<T: std::str::FromStr>(row: &csv::StringRecord, i: usize, line: u64) -> Result<T, BenchmarkError> {
    let raw = row.get(i).unwrap_or("");
    raw.parse().map_err(|_| BenchmarkError::Format(format!("line {line}, column {}: cannot parse {raw:?}", i + 1)))
}

/// Reads records from CSV. `meta` (typically the sidecar) supplies names
/// and labels; without it they are inferred from the header.
pub fn read_dataset_csv<R: Read>(reader: R, meta: Option<DatasetMetadata>) -> Result<BenchmarkDataset, BenchmarkError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers().map_err(|e| BenchmarkError::Format(e.to_string()))?.clone();
    let layout = parse_layout(&headers)?;
    let meta = match meta {
        Some(meta) => {
            if meta.covariate_names() != layout.covariates
                || meta.treatment_values.len() != layout.arms
                || meta.outcome_values.len() != layout.levels
            {
                return Err(BenchmarkError::Format("metadata does not match the CSV header".into()));
            }
            meta
        }
        None => {
            let indices = |n: usize| (0..n).map(|i| i.to_string()).collect::<Vec<_>>();
            DatasetMetadata {
                spec_name: String::new(),
                variation: VariationId(Vec::new()),
                scorer: String::new(),
                seed: 0,
                dataset_index: 0,
                treatment: "t".into(),
                treatment_values: indices(layout.arms),
                outcome: "y".into(),
                outcome_values: indices(layout.levels),
                covariates: layout
                    .covariates
                    .iter()
                    .map(|name| CovariateInfo { name: name.clone(), exogenous: false, values: Vec::new() })
                    .collect(),
                hidden: Vec::new(),
                command: Vec::new(),
            }
        }
    };

    let n_cov = layout.covariates.len();
    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row.map_err(|e| BenchmarkError::Format(e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let unit_id: u64 = parse_field(&row, 0, line)?;
        let covariates = (1..=n_cov).map(|i| parse_field(&row, i, line)).collect::<Result<Vec<usize>, _>>()?;
        let treatment: usize = parse_field(&row, n_cov + 1, line)?;
        let outcome: usize = parse_field(&row, n_cov + 2, line)?;
        let mut arms = Vec::with_capacity(layout.arms);
        let mut col = n_cov + 3;
        for _ in 0..layout.arms {
            let y: usize = parse_field(&row, col, line)?;
            let distribution =
                (0..layout.levels).map(|k| parse_field(&row, col + 1 + k, line)).collect::<Result<Vec<f64>, _>>()?;
            col += layout.levels + 1;
            arms.push(ArmOutcome { outcome: y, distribution });
        }
        if treatment >= layout.arms || outcome >= layout.levels {
            return Err(BenchmarkError::Format(format!("line {line}: t or y out of range")));
        }
        if arms[treatment].outcome != outcome {
            return Err(BenchmarkError::Format(format!("line {line}: y disagrees with its factual arm")));
        }
        records.push(PotentialOutcomeRecord { unit_id, covariates, treatment, outcome, arms });
    }
    Ok(BenchmarkDataset { meta, records })
}

/// Reads a dataset CSV and its sidecar, if present.
pub fn read_dataset(path: &Path) -> Result<BenchmarkDataset, BenchmarkError> {
    let sidecar = metadata_path(path);
    let meta = if sidecar.exists() {
        let text = fs::read_to_string(&sidecar).map_err(|e| io_err(&sidecar, e))?;
        let file: MetadataFile = serde_json::from_str(&text).map_err(|e| io_err(&sidecar, e))?;
        Some(file.meta)
    } else {
        None
    };
    let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
    read_dataset_csv(std::io::BufReader::new(file), meta)
}
