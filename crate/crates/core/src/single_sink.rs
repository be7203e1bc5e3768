//! Online single-sink and single-source subroutines that serve the pairs
//! rounded to a root.
//!
//! [`GreedySingleSink`] connects each terminal along a shortest path under
//! `c·[unbought] + ℓ`. [`TreeGroupGreedy`] is the same rule on a rooted tree
//! whose terminals are groups of leaves.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::directed::GstInstance;
use crate::error::{Error, Result};
use crate::graph::{shortest_path, solution_cost, CostBreakdown, EdgeId, SolutionLedger, TwoMetricGraph, VertexId};

/// Whether terminals send to the root or receive from it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    Sink,
    Source,
}

/// Algorithms that irrevocably connect arriving terminals to a fixed root.
pub trait SingleSinkAlg {
    fn root(&self) -> VertexId;

    fn orientation(&self) -> Orientation;

    /// The path `on_terminal` would commit for `v` and its marginal cost.
    fn quote(&self, v: VertexId) -> Result<(Vec<EdgeId>, f64)>;

    /// Connects terminal `v`, recording the path under `key`.
    fn on_terminal(&mut self, key: usize, v: VertexId) -> Result<Vec<EdgeId>>;

    fn ledger(&self) -> &SolutionLedger;

    fn cost(&self) -> Result<CostBreakdown>;
}

#[derive(Clone, Debug)]
pub struct GreedySingleSink {
    graph: Arc<TwoMetricGraph>,
    root: VertexId,
    orientation: Orientation,
    ledger: SolutionLedger,
}

impl GreedySingleSink {
    pub fn new(graph: Arc<TwoMetricGraph>, root: VertexId, orientation: Orientation) -> Result<Self> {
        if root >= graph.vertex_count() {
            return Err(Error::invalid(format!("root {root} out of range")));
        }
        Ok(Self { graph, root, orientation, ledger: SolutionLedger::new() })
    }

    pub fn graph(&self) -> &TwoMetricGraph {
        &self.graph
    }
}

/// Shortest path between `v` and the root of `alg` under residual weights.
pub fn greedy_augment(alg: &GreedySingleSink, v: VertexId) -> Result<Vec<EdgeId>> {
    let ledger = &alg.ledger;
    let weight = |e: &crate::graph::Edge| if ledger.is_bought(e.id) { e.length } else { e.cost + e.length };
    let (from, to) = match alg.orientation {
        Orientation::Sink => (v, alg.root),
        Orientation::Source => (alg.root, v),
    };
    Ok(shortest_path(&alg.graph, weight, from, to)?.edges)
}

impl SingleSinkAlg for GreedySingleSink {
    fn root(&self) -> VertexId {
        self.root
    }

    fn orientation(&self) -> Orientation {
        self.orientation
    }

    fn quote(&self, v: VertexId) -> Result<(Vec<EdgeId>, f64)> {
        let path = greedy_augment(self, v)?;
        let cost = self.ledger.marginal_cost(&self.graph, &path);
        Ok((path, cost))
    }

    fn on_terminal(&mut self, key: usize, v: VertexId) -> Result<Vec<EdgeId>> {
        let path = greedy_augment(self, v)?;
        self.ledger.commit_path(&self.graph, key, path.clone())?;
        Ok(path)
    }

    fn ledger(&self) -> &SolutionLedger {
        &self.ledger
    }

    fn cost(&self) -> Result<CostBreakdown> {
        solution_cost(&self.graph, &self.ledger)
    }
}

/// Online group Steiner tree on a rooted tree: each group is connected
/// through its member with the cheapest residual root path.
#[derive(Clone, Debug)]
pub struct TreeGroupGreedy {
    /// `bought[v]`: the arc from `v` to its parent is bought.
    bought: Vec<bool>,
    chosen: Vec<(usize, usize)>,
}

impl TreeGroupGreedy {
    pub fn new(tree: &GstInstance) -> Self {
        Self { bought: vec![false; tree.node_count()], chosen: Vec::new() }
    }

    pub fn is_bought(&self, v: usize) -> bool {
        self.bought[v]
    }

    /// (group, member) choices so far.
    pub fn chosen(&self) -> &[(usize, usize)] {
        &self.chosen
    }

    /// Weight of the unbought arcs on the path from `v` to the root.
    pub fn residual(&self, tree: &GstInstance, v: usize) -> f64 {
        tree.path_to_root(v).into_iter().filter(|&u| !self.bought[u]).map(|u| tree.arc_weight(u)).sum()
    }

    /// Total weight of bought arcs.
    pub fn weight(&self, tree: &GstInstance) -> f64 {
        (0..self.bought.len()).filter(|&v| self.bought[v]).map(|v| tree.arc_weight(v)).sum()
    }
}

/// Connects group `group`; returns the chosen member and the nodes whose
/// parent arcs form its root path.
pub fn tree_group_greedy(tree: &GstInstance, state: &mut TreeGroupGreedy, group: usize) -> Result<(usize, Vec<usize>)> {
    let members = tree.group(group).ok_or_else(|| Error::invalid(format!("group {group} does not exist")))?;
    if members.is_empty() {
        return Err(Error::invalid(format!("group {group} is empty")));
    }
    let mut best: Option<(usize, f64)> = None;
    for &m in members {
        let w = state.residual(tree, m);
        if best.is_none_or(|(b, bw)| w < bw || (w == bw && m < b)) {
            best = Some((m, w));
        }
    }
    let (member, _) = best.expect("nonempty group");
    let path = tree.path_to_root(member);
    for &u in &path {
        state.bought[u] = true;
    }
    state.chosen.push((group, member));
    Ok((member, path))
}
