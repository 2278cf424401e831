//! Directed graphs over named nodes with deterministic ordering.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::ScmError;

/// A directed graph over named nodes, kept in declaration order.
///
/// Construction rejects unknown endpoints, self-loops and duplicate edges.
/// Acyclicity is checked by [`CausalGraph::topological_order`] so that a
/// cyclic graph can still be reported on by validation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CausalGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    edges: Vec<(usize, usize)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
}

impl CausalGraph {
    pub fn new<S: AsRef<str>>(nodes: &[S], edges: &[(S, S)]) -> Result<Self, ScmError> {
        let nodes: Vec<String> = nodes.iter().map(|n| n.as_ref().to_string()).collect();
        let mut index = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(ScmError::DuplicateNode(n.clone()));
            }
        }
        let mut parents = vec![Vec::new(); nodes.len()];
        let mut children = vec![Vec::new(); nodes.len()];
        let mut seen = HashSet::new();
        let mut edge_list = Vec::with_capacity(edges.len());
        for (from, to) in edges {
            let (from, to) = (from.as_ref(), to.as_ref());
            let &p = index.get(from).ok_or_else(|| ScmError::UnknownNode(from.to_string()))?;
            let &c = index.get(to).ok_or_else(|| ScmError::UnknownNode(to.to_string()))?;
            if p == c {
                return Err(ScmError::SelfLoop(from.to_string()));
            }
            if !seen.insert((p, c)) {
                return Err(ScmError::DuplicateEdge(from.to_string(), to.to_string()));
            }
            edge_list.push((p, c));
            parents[c].push(p);
            children[p].push(c);
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_unstable();
        }
        Ok(Self { nodes, index, edges: edge_list, parents, children })
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&str, &str)> + '_ {
        self.edges.iter().map(|&(p, c)| (self.nodes[p].as_str(), self.nodes[c].as_str()))
    }

    pub fn edge_indices(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn index_of(&self, name: &str) -> Result<usize, ScmError> {
        self.index.get(name).copied().ok_or_else(|| ScmError::UnknownNode(name.to_string()))
    }

    pub fn name(&self, index: usize) -> &str {
        &self.nodes[index]
    }

    /// Parent indices in declaration order.
    pub fn parents(&self, node: usize) -> &[usize] {
        &self.parents[node]
    }

    pub fn children(&self, node: usize) -> &[usize] {
        &self.children[node]
    }

    /// Kahn's algorithm; among ready nodes the earliest-declared goes first.
    pub fn topological_order(&self) -> Result<Vec<usize>, ScmError> {
        let n = self.nodes.len();
        let mut indegree: Vec<usize> = self.parents.iter().map(Vec::len).collect();
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indegree[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(next) = ready.pop_first() {
            order.push(next);
            for &child in &self.children[next] {
                indegree[child] -= 1;
                if indegree[child] == 0 {
                    ready.insert(child);
                }
            }
        }
        if order.len() == n {
            return Ok(order);
        }
        Err(ScmError::Cycle(self.cyclic_components()))
    }

    /// Same as [`Self::topological_order`] but returns names.
    pub fn topological_names(&self) -> Result<Vec<String>, ScmError> {
        Ok(self.topological_order()?.into_iter().map(|i| self.nodes[i].clone()).collect())
    }

    /// Node indices reachable from `node` by a directed path of length ≥ 1.
    pub fn descendants(&self, node: usize) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<usize> = self.children[node].clone();
        while let Some(v) = stack.pop() {
            if !seen[v] {
                seen[v] = true;
                stack.extend_from_slice(&self.children[v]);
            }
        }
        seen
    }

    /// Nodes with no directed path from `node`, excluding `node` itself.
    pub fn non_descendant_mask(&self, node: usize) -> Vec<bool> {
        let desc = self.descendants(node);
        (0..self.nodes.len()).map(|v| v != node && !desc[v]).collect()
    }

    pub fn non_descendants(&self, name: &str) -> Result<BTreeSet<String>, ScmError> {
        let node = self.index_of(name)?;
        Ok(self
            .non_descendant_mask(node)
            .into_iter()
            .enumerate()
            .filter(|&(_, keep)| keep)
            .map(|(v, _)| self.nodes[v].clone())
            .collect())
    }

    /// Strongly connected components with more than one node, as name lists.
    fn cyclic_components(&self) -> Vec<Vec<String>> {
        let n = self.nodes.len();
        let reach: Vec<Vec<bool>> = (0..n).map(|v| self.descendants(v)).collect();
        let mut assigned = vec![false; n];
        let mut components = Vec::new();
        for v in 0..n {
            if assigned[v] || !reach[v][v] {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|&w| w == v || (reach[v][w] && reach[w][v])).collect();
            for &w in &members {
                assigned[w] = true;
            }
            components.push(members.into_iter().map(|w| self.nodes[w].clone()).collect());
        }
        components
    }
}
