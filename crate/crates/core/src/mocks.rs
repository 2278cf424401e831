//! Tabular mechanisms with known structure, for tests and demonstrations.
//!
//! [`mechanism_table`] turns a weight function over (variable, parent
//! values, candidate value) into a [`TabularScoreTable`] by rendering every
//! context a spec can produce, across all phrasings. The remaining
//! functions build the specific mechanisms used throughout the test suites.

use thiserror::Error;

use crate::scm::{VariableKind, PLACEHOLDER};
use crate::scorer::{join_phrases, ScorerError, TabularScoreTable};
use crate::spec::{bundled, ScmSpecDocument, SpecError};

/// Refuse to render more table rows than this.
pub const MAX_TABLE_ROWS: u128 = 5_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MockError {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Scorer(#[from] ScorerError),
    #[error("mechanism table would need {0} rows")]
    TooLarge(u128),
}

/// One cell of a mechanism: the weight of `value` for `node` given parents.
#[derive(Debug, Clone, Copy)]
pub struct MechanismCell<'a> {
    pub node: &'a str,
    pub kind: VariableKind,
    /// Parent names and value indices, in sampling order.
    pub parents: &'a [(&'a str, usize)],
    pub value: usize,
    pub cardinality: usize,
    /// Which phrasing of `node` is being scored.
    pub phrasing: usize,
}

impl MechanismCell<'_> {
    pub fn parent(&self, name: &str) -> Option<usize> {
        self.parents.iter().find(|(n, _)| *n == name).map(|&(_, k)| k)
    }

    pub fn parent_sum(&self) -> usize {
        self.parents.iter().map(|&(_, k)| k).sum()
    }
}

fn render(template: &str, value: &str) -> String {
    template.replacen(PLACEHOLDER, value, 1)
}

/// Renders a full table for `spec` from a weight function.
pub fn mechanism_table<F>(spec: &ScmSpecDocument, default: f64, weight: F) -> Result<TabularScoreTable, MockError>
where
    F: Fn(&MechanismCell<'_>) -> f64,
{
    spec.check()?;
    let graph = spec.graph().map_err(SpecError::from)?;
    let order = graph.topological_order().map_err(SpecError::from)?;
    let mut position = vec![0; order.len()];
    for (pos, &n) in order.iter().enumerate() {
        position[n] = pos;
    }

    let mut rows: u128 = 0;
    for node in 0..spec.variables.len() {
        let var = &spec.variables[node];
        let own = (var.phrasings.len() * var.values.len()) as u128;
        let ctx = graph.parents(node).iter().fold(1u128, |acc, &p| {
            let pv = &spec.variables[p];
            acc.saturating_mul((pv.phrasings.len() * pv.values.len()) as u128)
        });
        rows = rows.saturating_add(own.saturating_mul(ctx));
    }
    if rows > MAX_TABLE_ROWS {
        return Err(MockError::TooLarge(rows));
    }

    let mut table = TabularScoreTable::new(default)?;
    for node in 0..spec.variables.len() {
        let var = &spec.variables[node];
        let mut parents = graph.parents(node).to_vec();
        parents.sort_by_key(|&p| position[p]);
        // Odometer over (phrasing, value) of every parent.
        let radices: Vec<(usize, usize)> =
            parents.iter().map(|&p| (spec.variables[p].phrasings.len(), spec.variables[p].values.len())).collect();
        let mut digits = vec![(0usize, 0usize); parents.len()];
        loop {
            let assigned: Vec<(&str, usize)> =
                parents.iter().zip(&digits).map(|(&p, &(_, k))| (spec.variables[p].name.as_str(), k)).collect();
            let rendered: Vec<String> = parents
                .iter()
                .zip(&digits)
                .map(|(&p, &(j, k))| render(&spec.variables[p].phrasings[j], &spec.variables[p].values[k]))
                .collect();
            let context = join_phrases(rendered.iter().map(String::as_str));
            for (j, phrasing) in var.phrasings.iter().enumerate() {
                for (k, value) in var.values.iter().enumerate() {
                    let cell = MechanismCell {
                        node: &var.name,
                        kind: var.kind,
                        parents: &assigned,
                        value: k,
                        cardinality: var.values.len(),
                        phrasing: j,
                    };
                    table.insert(context.clone(), render(phrasing, value), weight(&cell))?;
                }
            }
            if !advance(&mut digits, &radices) {
                break;
            }
        }
    }
    Ok(table)
}

fn advance(digits: &mut [(usize, usize)], radices: &[(usize, usize)]) -> bool {
    for (d, &(pj, pk)) in digits.iter_mut().zip(radices).rev() {
        d.1 += 1;
        if d.1 < pk {
            return true;
        }
        d.1 = 0;
        d.0 += 1;
        if d.0 < pj {
            return true;
        }
        d.0 = 0;
    }
    false
}

fn peaked(cardinality: usize, preferred: usize, peak: f64) -> impl Fn(usize) -> f64 {
    let rest = (1.0 - peak) / (cardinality as f64 - 1.0);
    move |k| if k == preferred { peak } else { rest }
}

/// Low-entropy mechanism: each variable puts most mass on
/// `(sum of parent values) mod |values|`.
pub fn peaked_table(spec: &ScmSpecDocument) -> Result<TabularScoreTable, MockError> {
    mechanism_table(spec, 1.0, |c| {
        if c.cardinality == 1 {
            return 1.0;
        }
        let peak = if c.cardinality == 2 { 0.95 } else { 0.92 };
        peaked(c.cardinality, c.parent_sum() % c.cardinality, peak)(c.value)
    })
}

/// Every variable deterministically takes its first value.
pub fn degenerate_table(spec: &ScmSpecDocument) -> Result<TabularScoreTable, MockError> {
    mechanism_table(spec, 1e-300, |c| if c.value == 0 { 1.0 } else { 1e-300 })
}

// Weather order in the toy specs: sunny, rainy, snowy, cold, hot.
const RUN_GIVEN_WEATHER: [f64; 5] = [0.85, 0.15, 0.1, 0.2, 0.75];
const WORSEN_GIVEN_WEATHER: [f64; 5] = [0.2, 0.7, 0.75, 0.65, 0.3];
const WEATHER: [f64; 5] = [0.35, 0.3, 0.15, 0.1, 0.1];

fn parity_shift(k: Option<usize>, size: f64) -> f64 {
    match k {
        Some(k) if k % 2 == 1 => size,
        Some(_) => -size,
        None => 0.0,
    }
}

fn binary(p_one: f64, value: usize) -> f64 {
    if value == 1 {
        p_one
    } else {
        1.0 - p_one
    }
}

/// Weather drives both the exercise choice and the marathon outcome;
/// the choice has no effect on the outcome. Names only nudge each by ±0.05.
pub fn confounder_table() -> Result<(ScmSpecDocument, TabularScoreTable), MockError> {
    let spec = bundled::marathon_g1();
    let table = mechanism_table(&spec, 1.0, |c| match c.node {
        "u1" | "u2" => 0.2,
        "w" => WEATHER[c.value],
        "g" => {
            let w = c.parent("w").expect("g has parent w");
            binary(RUN_GIVEN_WEATHER[w] + parity_shift(c.parent("u1"), 0.05), c.value)
        }
        "m" => {
            let w = c.parent("w").expect("m has parent w");
            binary(WORSEN_GIVEN_WEATHER[w] + parity_shift(c.parent("u2"), 0.05), c.value)
        }
        _ => 1.0,
    })?;
    Ok((spec, table))
}

/// Choice and outcome are independent; the weather depends on whether
/// they agree, so conditioning on it couples them.
pub fn collider_table() -> Result<(ScmSpecDocument, TabularScoreTable), MockError> {
    let spec = bundled::marathon_g2();
    let table = mechanism_table(&spec, 1.0, |c| match c.node {
        "u1" | "u2" => 0.2,
        "g" => binary(0.5 + parity_shift(c.parent("u1"), 0.1), c.value),
        "m" => binary(0.5 + parity_shift(c.parent("u2"), 0.4), c.value),
        "w" => {
            let agree = c.parent("g") == c.parent("m");
            let favored = if agree { 0 } else { 1 };
            if c.value == favored {
                0.6
            } else {
                0.1
            }
        }
        _ => 1.0,
    })?;
    Ok((spec, table))
}

/// Mechanisms for the three-variable fixture with a known average effect
/// `delta` of the treatment on `P(outcome = 1)`. The outcome's own phrasing
/// shifts its baseline, so different variations give different SATEs around
/// the same sign.
pub fn effect_table(delta: f64) -> Result<(ScmSpecDocument, TabularScoreTable), MockError> {
    let spec = bundled::sign_flip();
    let table = mechanism_table(&spec, 1.0, |c| match c.node {
        "severity" => 0.5,
        "surgery" => binary(0.3 + 0.4 * c.parent("severity").unwrap_or(0) as f64, c.value),
        "recovery" => {
            let u = c.parent("severity").unwrap_or(0) as f64;
            let t = c.parent("surgery").unwrap_or(0) as f64;
            binary(0.4 + 0.1 * u + 0.05 * c.phrasing as f64 + delta * t, c.value)
        }
        _ => 1.0,
    })?;
    Ok((spec, table))
}

/// Severe cases get operated on more and recover less, so the observed
/// contrast is negative while the effect of operating is `+0.1`.
pub fn sign_flip_table() -> Result<(ScmSpecDocument, TabularScoreTable), MockError> {
    let spec = bundled::sign_flip();
    let table = mechanism_table(&spec, 1.0, |c| match c.node {
        "severity" => 0.5,
        "surgery" => binary([0.1, 0.9][c.parent("severity").unwrap_or(0)], c.value),
        "recovery" => {
            let u = c.parent("severity").unwrap_or(0) as f64;
            let t = c.parent("surgery").unwrap_or(0) as f64;
            binary(0.7 - 0.6 * u + t * (0.05 + 0.1 * u), c.value)
        }
        _ => 1.0,
    })?;
    Ok((spec, table))
}

/// The shipped sign-flip fixture table.
pub fn shipped_sign_flip_table() -> Result<TabularScoreTable, MockError> {
    Ok(TabularScoreTable::from_json(bundled::SIGN_FLIP_TABLE)?)
}
