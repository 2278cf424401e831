//! Exact joint distributions by enumeration, for small models.

use super::{conditional, Intervention, SamplingError, Unit};
use crate::scm::SdScm;

pub const DEFAULT_STATE_CAP: u128 = 1_000_000;

/// A dense probability table over a subset of a model's variables.
///
/// Cells are stored in row-major order over `vars` (the last variable varies
/// fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityTable {
    vars: Vec<usize>,
    cards: Vec<usize>,
    probs: Vec<f64>,
}

impl ProbabilityTable {
    pub fn zeros(vars: Vec<usize>, cards: Vec<usize>) -> Self {
        let size = cards.iter().product();
        Self { vars, cards, probs: vec![0.0; size] }
    }

    /// Relative frequencies of units over all of their variables.
    pub fn empirical(units: &[Unit], cards: &[usize]) -> Self {
        let mut table = Self::zeros((0..cards.len()).collect(), cards.to_vec());
        if units.is_empty() {
            return table;
        }
        let w = 1.0 / units.len() as f64;
        for unit in units {
            let cell = table.cell(unit.values());
            table.probs[cell] += w;
        }
        table
    }

    /// Node indices this table ranges over.
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn cardinalities(&self) -> &[usize] {
        &self.cards
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    fn cell(&self, assignment: &[usize]) -> usize {
        assignment.iter().zip(&self.cards).fold(0, |acc, (&k, &c)| acc * c + k)
    }

    fn assignment(&self, mut cell: usize) -> Vec<usize> {
        let mut out = vec![0; self.cards.len()];
        for (slot, &c) in out.iter_mut().zip(&self.cards).rev() {
            *slot = cell % c;
            cell /= c;
        }
        out
    }

    /// Probability of one assignment, listed in the order of [`Self::vars`].
    pub fn probability(&self, assignment: &[usize]) -> f64 {
        self.probs[self.cell(assignment)]
    }

    /// `(assignment, probability)` for every cell.
    pub fn iter(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.probs.iter().enumerate().map(|(cell, &p)| (self.assignment(cell), p))
    }

    /// Sums out everything except `keep` (node indices, in the given order).
    pub fn marginal(&self, keep: &[usize]) -> ProbabilityTable {
        let positions: Vec<usize> =
            keep.iter().map(|v| self.vars.iter().position(|x| x == v).expect("variable in table")).collect();
        let cards = positions.iter().map(|&p| self.cards[p]).collect();
        let mut out = ProbabilityTable::zeros(keep.to_vec(), cards);
        for (cell, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let full = self.assignment(cell);
            let sub: Vec<usize> = positions.iter().map(|&i| full[i]).collect();
            let target = out.cell(&sub);
            out.probs[target] += p;
        }
        out
    }

    /// Half the L1 distance between two tables over the same variables.
    pub fn total_variation(&self, other: &ProbabilityTable) -> f64 {
        assert_eq!(self.vars, other.vars, "tables range over different variables");
        0.5 * self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum::<f64>()
    }

    pub fn max_abs_difference(&self, other: &ProbabilityTable) -> f64 {
        assert_eq!(self.vars, other.vars, "tables range over different variables");
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Largest violation of `node ⊥ others | given`, measured as
    /// `|P(x, o, g) P(g) - P(x, g) P(o, g)|` over all cells.
    pub fn independence_gap(&self, node: usize, others: &[usize], given: &[usize]) -> f64 {
        if others.is_empty() {
            return 0.0;
        }
        let mut all = vec![node];
        all.extend_from_slice(others);
        all.extend_from_slice(given);
        let joint = self.marginal(&all);
        let mut xg = vec![node];
        xg.extend_from_slice(given);
        let p_xg = self.marginal(&xg);
        let og: Vec<usize> = others.iter().chain(given).copied().collect();
        let p_og = self.marginal(&og);
        let p_g = self.marginal(given);

        let n_other = others.len();
        joint
            .iter()
            .map(|(a, p)| {
                let x = a[0];
                let o = &a[1..=n_other];
                let g = &a[1 + n_other..];
                let mut xg_a = vec![x];
                xg_a.extend_from_slice(g);
                let og_a: Vec<usize> = o.iter().chain(g).copied().collect();
                let pg = if g.is_empty() { 1.0 } else { p_g.probability(g) };
                (p * pg - p_xg.probability(&xg_a) * p_og.probability(&og_a)).abs()
            })
            .fold(0.0, f64::max)
    }

    /// `E[f(value of node)]` for a single-variable marginal.
    pub fn expectation(&self, node: usize, f: impl Fn(usize) -> f64) -> f64 {
        let m = self.marginal(&[node]);
        m.probs.iter().enumerate().map(|(k, &p)| p * f(k)).sum()
    }
}

fn state_space(scm: &SdScm) -> u128 {
    scm.variables().iter().fold(1u128, |acc, v| acc.saturating_mul(v.cardinality() as u128))
}

fn enumerate(scm: &SdScm, fixed: Option<(usize, usize)>, cap: u128) -> Result<ProbabilityTable, SamplingError> {
    let cells = state_space(scm);
    if cells > cap {
        return Err(SamplingError::StateSpaceTooLarge { cells, cap });
    }
    let n = scm.variables().len();
    let cards: Vec<usize> = scm.variables().iter().map(|v| v.cardinality()).collect();
    let mut table = ProbabilityTable::zeros((0..n).collect(), cards);
    let mut assignment = vec![None; n];
    descend(scm, fixed, 0, 1.0, &mut assignment, &mut table)?;
    Ok(table)
}

fn descend(
    scm: &SdScm,
    fixed: Option<(usize, usize)>,
    depth: usize,
    mass: f64,
    assignment: &mut Vec<Option<usize>>,
    table: &mut ProbabilityTable,
) -> Result<(), SamplingError> {
    if depth == scm.order().len() {
        let values: Vec<usize> = assignment.iter().map(|k| k.expect("complete")).collect();
        let cell = table.cell(&values);
        table.probs[cell] += mass;
        return Ok(());
    }
    let node = scm.order()[depth];
    if let Some((target, value)) = fixed {
        if target == node {
            assignment[node] = Some(value);
            descend(scm, fixed, depth + 1, mass, assignment, table)?;
            assignment[node] = None;
            return Ok(());
        }
    }
    let dist = conditional(scm, assignment, node)?;
    for (k, &p) in dist.probabilities().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        assignment[node] = Some(k);
        descend(scm, fixed, depth + 1, mass * p, assignment, table)?;
    }
    assignment[node] = None;
    Ok(())
}

/// The observational joint over all variables (node order).
pub fn exact_joint(scm: &SdScm) -> Result<ProbabilityTable, SamplingError> {
    enumerate(scm, None, DEFAULT_STATE_CAP)
}

pub fn exact_joint_capped(scm: &SdScm, cap: u128) -> Result<ProbabilityTable, SamplingError> {
    enumerate(scm, None, cap)
}

/// The joint under `do(intervention)`.
pub fn exact_interventional(scm: &SdScm, intervention: &Intervention) -> Result<ProbabilityTable, SamplingError> {
    let node = intervention.resolve(scm)?;
    enumerate(scm, Some((node, intervention.value)), DEFAULT_STATE_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scm::{CausalGraph, SequenceVariable, VariableKind, VariationId};
    use crate::scorer::{ScorerRef, TabularScoreTable};

    fn binary(name: &str) -> SequenceVariable {
        SequenceVariable::new(
            name,
            VariableKind::Endogenous,
            format!("{name} is {{x}}."),
            vec!["no".into(), "yes".into()],
        )
        .unwrap()
    }

    fn model(names: &[&str], table: TabularScoreTable) -> SdScm {
        let graph = CausalGraph::new::<&str>(names, &[]).unwrap();
        let vars = names.iter().map(|n| binary(n)).collect();
        SdScm::new(graph, vars, ScorerRef::tabular("t", table).unwrap(), VariationId::zeros(names.len()), 0).unwrap()
    }

    #[test]
    fn single_binary_variable() {
        let mut table = TabularScoreTable::new(1.0).unwrap();
        table.insert("", "a is no.", 0.3).unwrap();
        table.insert("", "a is yes.", 0.7).unwrap();
        let joint = exact_joint(&model(&["a"], table)).unwrap();
        assert!((joint.probability(&[0]) - 0.3).abs() < 1e-15);
        assert!((joint.probability(&[1]) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn independent_fair_coins() {
        let joint = exact_joint(&model(&["a", "b"], TabularScoreTable::new(1.0).unwrap())).unwrap();
        assert_eq!(joint.len(), 4);
        for (_, p) in joint.iter() {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let scm = model(&["a", "b", "c"], TabularScoreTable::new(1.0).unwrap());
        assert!(matches!(exact_joint_capped(&scm, 7), Err(SamplingError::StateSpaceTooLarge { cells: 8, cap: 7 })));
    }

    #[test]
    fn marginal_and_assignment_layout() {
        let mut t = ProbabilityTable::zeros(vec![0, 1], vec![2, 3]);
        t.probs = vec![0.1, 0.2, 0.0, 0.3, 0.1, 0.3];
        assert_eq!(t.probability(&[1, 0]), 0.3);
        let m = t.marginal(&[1]);
        let expect = [0.4, 0.3, 0.3];
        for (got, want) in m.probabilities().iter().zip(expect) {
            assert!((got - want).abs() < 1e-15);
        }
        let swapped = t.marginal(&[1, 0]);
        assert_eq!(swapped.probability(&[0, 1]), 0.3);
    }
}
