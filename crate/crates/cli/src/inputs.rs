//! Resolving spec and scorer arguments.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use seqscm::mocks;
use seqscm::scorer::remote::{RemoteConfig, RemoteScorer};
use seqscm::scorer::{BackendKind, ScorerRef, TabularScoreTable, UniformTokenScorer};
use seqscm::spec::{bundled, load_spec, parse_spec, ScmSpecDocument};

use crate::Usage;

/// A spec file path, or `bundled:NAME` for one of the shipped specs.
pub fn load_spec_arg(arg: &str) -> Result<ScmSpecDocument> {
    if let Some(name) = arg.strip_prefix("bundled:") {
        let text = bundled::all().into_iter().find(|(n, _)| *n == name).map(|(_, t)| t).ok_or_else(|| {
            let known: Vec<&str> = bundled::all().into_iter().map(|(n, _)| n).collect();
            Usage(format!("no bundled spec {name:?}; available: {}", known.join(", ")))
        })?;
        return Ok(parse_spec(text)?);
    }
    load_spec(Path::new(arg)).with_context(|| format!("loading spec {arg}"))
}

/// Builds a scorer from its command-line form:
///
/// - `tabular:PATH` or `PATH.json`: a score table
/// - `remote` or `remote:URL`: a completions endpoint (environment overrides apply)
/// - `uniform`: every candidate equally likely
/// - `mock:peaked`, `mock:degenerate`: tables generated from `spec`
pub fn parse_scorer(arg: &str, label: Option<&str>, spec: &ScmSpecDocument) -> Result<ScorerRef> {
    let (kind, rest) = match arg.split_once(':') {
        Some((k, r)) if matches!(k, "tabular" | "remote" | "mock") => (k, Some(r)),
        _ if arg.ends_with(".json") => ("tabular", Some(arg)),
        _ => (arg, None),
    };
    match (kind, rest) {
        ("tabular", Some(path)) => {
            let path = Path::new(path);
            let table =
                TabularScoreTable::load(path).with_context(|| format!("loading score table {}", path.display()))?;
            let default_label = path.file_stem().map_or("tabular".into(), |s| s.to_string_lossy().into_owned());
            let default_label = default_label.trim_end_matches(".table").to_string();
            Ok(ScorerRef::tabular(label.unwrap_or(&default_label), table)?)
        }
        ("remote", url) => {
            let config = RemoteConfig::new(url.unwrap_or_default()).with_env_overrides();
            if config.url.is_empty() {
                return Err(Usage(format!(
                    "remote scorer needs a URL (remote:URL or ${})",
                    seqscm::scorer::remote::URL_ENV
                ))
                .into());
            }
            let scorer = RemoteScorer::new(config)?;
            Ok(ScorerRef::new(label.unwrap_or("remote"), BackendKind::Remote, Arc::new(scorer))?.cached())
        }
        ("uniform", None) => Ok(ScorerRef::custom(label.unwrap_or("uniform"), UniformTokenScorer::new(1))?),
        ("mock", Some(which)) => {
            let table = match which {
                "peaked" => mocks::peaked_table(spec)?,
                "degenerate" => mocks::degenerate_table(spec)?,
                _ => bail!(Usage(format!("unknown mock {which:?}; expected peaked or degenerate"))),
            };
            Ok(ScorerRef::tabular(label.unwrap_or(&format!("mock-{which}")), table)?)
        }
        _ => Err(Usage(format!(
            "cannot parse scorer {arg:?}; expected tabular:PATH, PATH.json, remote[:URL], uniform or mock:NAME"
        ))
        .into()),
    }
}

/// `label=config,label=config,...`
pub fn parse_scorer_list(arg: &str, spec: &ScmSpecDocument) -> Result<Vec<ScorerRef>> {
    arg.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|item| {
            let (label, config) = item
                .split_once('=')
                .ok_or_else(|| Usage(format!("scorer entry {item:?} must look like label=config")))?;
            parse_scorer(config.trim(), Some(label.trim()), spec)
        })
        .collect()
}

/// `var=index`
pub fn parse_assignment(arg: &str) -> Result<(String, usize)> {
    let (name, value) = arg.split_once('=').ok_or_else(|| Usage(format!("expected var=index, got {arg:?}")))?;
    let value = value.trim().parse().map_err(|_| Usage(format!("value index in {arg:?} is not a number")))?;
    Ok((name.trim().to_string(), value))
}
