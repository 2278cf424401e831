//! Sampled units as CSV: `unit_id, variation, mode, intervention`, one
//! value-index column per variable (declaration order), then `text`.

use std::io::{Read, Write};

use anyhow::{anyhow, bail, Context, Result};
use seqscm::sampling::{Intervention, Provenance, SamplingMode, Unit};
use seqscm::scm::SdScm;

use crate::inputs::parse_assignment;

const FIXED: [&str; 4] = ["unit_id", "variation", "mode", "intervention"];

pub fn write_units<W: Write>(scm: &SdScm, units: &[Unit], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = FIXED.to_vec();
    header.extend(scm.variables().iter().map(|v| v.name()));
    header.push("text");
    w.write_record(&header)?;
    for u in units {
        let p = u.provenance();
        let mut row = vec![
            p.unit_index.to_string(),
            p.variation.to_string(),
            p.mode.to_string(),
            p.intervention.as_ref().map(|i| format!("{}={}", i.variable, i.value)).unwrap_or_default(),
        ];
        row.extend(u.values().iter().map(usize::to_string));
        row.push(u.text(scm));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_mode(s: &str) -> Result<SamplingMode> {
    Ok(match s {
        "observational" => SamplingMode::Observational,
        "interventional" => SamplingMode::Interventional,
        "counterfactual" => SamplingMode::Counterfactual,
        _ => bail!("unknown sampling mode {s:?}"),
    })
}

/// Reads units written by [`write_units`] back against `scm`.
pub fn read_units<R: Read>(scm: &SdScm, reader: R) -> Result<Vec<Unit>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let column =
        |name: &str| header.iter().position(|h| h == name).ok_or_else(|| anyhow!("units file has no {name:?} column"));
    let fixed: Vec<usize> = FIXED.iter().map(|n| column(n)).collect::<Result<_>>()?;
    let vars: Vec<usize> = scm.variables().iter().map(|v| column(v.name())).collect::<Result<_>>()?;
    let mut units = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record?;
        let at = |i: usize| record.get(i).unwrap_or_default();
        let ctx = || format!("units file row {}", line + 2);
        let intervention = match at(fixed[3]) {
            "" => None,
            s => {
                let (variable, value) = parse_assignment(s).with_context(ctx)?;
                Some(Intervention { variable, value })
            }
        };
        let provenance = Provenance {
            variation: at(fixed[1]).parse().map_err(|e: String| anyhow!(e)).with_context(ctx)?,
            master_seed: scm.master_seed(),
            unit_index: at(fixed[0]).parse().with_context(ctx)?,
            mode: parse_mode(at(fixed[2])).with_context(ctx)?,
            intervention,
        };
        let values = vars.iter().map(|&i| at(i).parse::<usize>()).collect::<Result<Vec<_>, _>>().with_context(ctx)?;
        let n = values.len();
        units.push(Unit::from_values(scm, values, vec![None; n], provenance).with_context(ctx)?);
    }
    Ok(units)
}
