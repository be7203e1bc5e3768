//! Height-reduced layered expansions of a two-metric graph.
//!
//! Level `i` holds a copy of every vertex. In the upward graph an edge goes
//! from `(u, i)` to `(v, i - 1)` and stands for a shortest `u -> v` path of
//! `G` under `c + k^(1 - i/h) * l`; the downward graph mirrors this with
//! edges from `(u, i - 1)` to `(v, i)`. Terminals sit on level `h`, roots on
//! level `0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EdgeId, PathTree, SolutionLedger, TwoMetricGraph, VertexId};

/// Multipliers beyond this are clamped.
pub const WEIGHT_CAP: f64 = 1e18;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Up,
    Down,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerEdge {
    pub from: (VertexId, usize),
    pub to: (VertexId, usize),
    pub cost: f64,
    pub length: f64,
    pub back_path: Vec<EdgeId>,
}

#[derive(Clone, Debug)]
pub struct LayeredGraph {
    direction: Direction,
    h: usize,
    n: usize,
    k: usize,
    edges: Vec<LayerEdge>,
    flat: TwoMetricGraph,
}

/// `ceil(log2 n)`, at least 1.
pub fn default_height(n: usize) -> usize {
    if n <= 2 {
        return 1;
    }
    (usize::BITS - (n - 1).leading_zeros()) as usize
}

/// Length multiplier used on level `i`.
pub fn level_multiplier(k: usize, h: usize, level: usize) -> f64 {
    let m = (k as f64).powf(1.0 - level as f64 / h as f64);
    if m > WEIGHT_CAP {
        log::warn!("level multiplier {m:e} clamped to {WEIGHT_CAP:e}");
        WEIGHT_CAP
    } else {
        m
    }
}

impl LayeredGraph {
    pub fn build(g: &TwoMetricGraph, k: usize, h: usize, direction: Direction) -> Result<Self> {
        if h == 0 {
            return Err(Error::invalid("layered graph needs h >= 1"));
        }
        if k == 0 {
            return Err(Error::invalid("layered graph needs k >= 1"));
        }
        match direction {
            Direction::Up => Ok(Self::build_up(g, k, h)),
            Direction::Down => {
                let mirrored = Self::build_up(&g.reversed(), k, h);
                let edges = mirrored
                    .edges
                    .into_iter()
                    .map(|e| LayerEdge {
                        from: e.to,
                        to: e.from,
                        cost: e.cost,
                        length: e.length,
                        back_path: e.back_path.into_iter().rev().collect(),
                    })
                    .collect();
                Ok(Self::assemble(Direction::Down, g.vertex_count(), k, h, edges))
            }
        }
    }

    fn build_up(g: &TwoMetricGraph, k: usize, h: usize) -> Self {
        let n = g.vertex_count();
        let mut edges = Vec::new();
        for level in 1..=h {
            let m = level_multiplier(k, h, level);
            let weight = |e: &crate::graph::Edge| e.cost + m * e.length;
            for u in 0..n {
                let tree = PathTree::build(g, &weight, u);
                for v in 0..n {
                    let Some(path) = tree.path_to(g, v) else { continue };
                    let cost = path.iter().map(|&e| weight(g.edge(e))).sum();
                    let length = g.path_length(&path);
                    edges.push(LayerEdge { from: (u, level), to: (v, level - 1), cost, length, back_path: path });
                }
            }
        }
        Self::assemble(Direction::Up, n, k, h, edges)
    }

    fn assemble(direction: Direction, n: usize, k: usize, h: usize, edges: Vec<LayerEdge>) -> Self {
        let mut flat = TwoMetricGraph::directed((h + 1) * n);
        for e in &edges {
            let tail = e.from.1 * n + e.from.0;
            let head = e.to.1 * n + e.to.0;
            flat.add_edge(tail, head, e.cost, e.length).expect("layered edge weights are validated upstream");
        }
        Self { direction, h, n, k, edges, flat }
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn base_vertex_count(&self) -> usize {
        self.n
    }

    pub fn pair_count(&self) -> usize {
        self.k
    }

    pub fn edges(&self) -> &[LayerEdge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &LayerEdge {
        &self.edges[id]
    }

    /// The layered graph as a plain directed graph; vertex `(v, i)` is
    /// `i * n + v` and edge ids coincide with [`Self::edges`].
    pub fn as_graph(&self) -> &TwoMetricGraph {
        &self.flat
    }

    pub fn node(&self, v: VertexId, level: usize) -> VertexId {
        level * self.n + v
    }

    pub fn level_of(&self, node: VertexId) -> (VertexId, usize) {
        (node % self.n, node / self.n)
    }

    /// Copy of `v` where terminals attach (level `h`).
    pub fn terminal(&self, v: VertexId) -> VertexId {
        self.node(v, self.h)
    }

    /// Copy of `r` on the root level.
    pub fn root(&self, r: VertexId) -> VertexId {
        self.node(r, 0)
    }

    /// Concatenated back paths of a layered walk.
    pub fn expand_walk(&self, walk: &[EdgeId]) -> Result<Vec<EdgeId>> {
        let mut out = Vec::new();
        for &e in walk {
            let edge = self
                .edges
                .get(e)
                .ok_or_else(|| Error::integrity(format!("layered edge {e} has no back path")))?;
            out.extend_from_slice(&edge.back_path);
        }
        Ok(out)
    }

    /// Replaces every layered edge of `layered` by its back path in `g`.
    pub fn pull_back(&self, g: &TwoMetricGraph, layered: &SolutionLedger) -> Result<SolutionLedger> {
        let mut out = SolutionLedger::new();
        for &e in layered.bought() {
            let edge = self
                .edges
                .get(e)
                .ok_or_else(|| Error::integrity(format!("layered edge {e} has no back path")))?;
            for &ge in &edge.back_path {
                if ge >= g.edge_count() {
                    return Err(Error::integrity(format!("back path of layered edge {e} uses missing edge {ge}")));
                }
                out.buy(g, ge);
            }
        }
        for (&pair, walk) in layered.paths() {
            out.insert_path_unchecked(pair, self.expand_walk(walk)?);
        }
        Ok(out)
    }

    /// JSON dump using the instance edge schema with `v@i` vertex labels.
    pub fn to_debug_json(&self) -> serde_json::Value {
        let edges: Vec<_> = self
            .edges
            .iter()
            .enumerate()
            .map(|(id, e)| {
                serde_json::json!({
                    "id": id,
                    "tail": format!("{}@{}", e.from.0, e.from.1),
                    "head": format!("{}@{}", e.to.0, e.to.1),
                    "c": e.cost,
                    "l": e.length,
                })
            })
            .collect();
        serde_json::json!({
            "directed": true,
            "n": self.flat.vertex_count(),
            "direction": self.direction,
            "h": self.h,
            "edges": edges,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::solution_cost;

    fn single_arc() -> TwoMetricGraph {
        let mut g = TwoMetricGraph::directed(2);
        g.add_edge(0, 1, 2.0, 3.0).unwrap();
        g
    }

    fn find(lg: &LayeredGraph, from: (usize, usize), to: (usize, usize)) -> &LayerEdge {
        lg.edges().iter().find(|e| e.from == from && e.to == to).unwrap()
    }

    #[test]
    fn default_height_examples() {
        assert_eq!(default_height(2), 1);
        assert_eq!(default_height(16), 4);
        assert_eq!(default_height(1000), 10);
        assert_eq!(default_height(17), 5);
    }

    #[test]
    fn top_level_uses_plain_metric() {
        let lg = LayeredGraph::build(&single_arc(), 16, 4, Direction::Up).unwrap();
        let e = find(&lg, (0, 4), (1, 3));
        assert_eq!((e.cost, e.length), (5.0, 3.0));
        assert_eq!(e.back_path, vec![0]);
    }

    #[test]
    fn level_one_scales_length() {
        let lg = LayeredGraph::build(&single_arc(), 16, 4, Direction::Up).unwrap();
        let e = find(&lg, (0, 1), (1, 0));
        assert!((e.cost - 26.0).abs() < 1e-12);
        assert_eq!(e.length, 3.0);
    }

    #[test]
    fn single_level_is_c_plus_l() {
        let lg = LayeredGraph::build(&single_arc(), 7, 1, Direction::Up).unwrap();
        assert_eq!(find(&lg, (0, 1), (1, 0)).cost, 5.0);
    }

    #[test]
    fn identity_edges_and_structure() {
        let lg = LayeredGraph::build(&single_arc(), 4, 3, Direction::Up).unwrap();
        assert_eq!(lg.as_graph().vertex_count(), 4 * 2);
        // Per level: 0->0, 0->1, 1->1 (1 cannot reach 0).
        assert_eq!(lg.edges().len(), 3 * 3);
        for e in lg.edges() {
            assert_eq!(e.from.1, e.to.1 + 1);
        }
        let stay = find(&lg, (1, 2), (1, 1));
        assert!(stay.back_path.is_empty());
        assert_eq!(stay.cost, 0.0);
    }

    #[test]
    fn down_graph_mirrors_up() {
        let lg = LayeredGraph::build(&single_arc(), 16, 4, Direction::Down).unwrap();
        let e = find(&lg, (0, 3), (1, 4));
        assert_eq!((e.cost, e.length), (5.0, 3.0));
        assert_eq!(e.back_path, vec![0]);
        for e in lg.edges() {
            assert_eq!(e.to.1, e.from.1 + 1);
        }
        assert!(lg.edges().iter().all(|e| !(e.from.0 == 1 && e.to.0 == 0)));
    }

    #[test]
    fn rejects_zero_height() {
        assert!(LayeredGraph::build(&single_arc(), 1, 0, Direction::Up).is_err());
    }

    #[test]
    fn pull_back_single_edge_and_empty() {
        let g = single_arc();
        let lg = LayeredGraph::build(&g, 1, 1, Direction::Up).unwrap();
        let id = lg.edges().iter().position(|e| e.from == (0, 1) && e.to == (1, 0)).unwrap();
        let mut layered = SolutionLedger::new();
        layered.commit_path(lg.as_graph(), 0, vec![id]).unwrap();
        let back = lg.pull_back(&g, &layered).unwrap();
        assert_eq!(back.path(0), Some(&[0][..]));
        let lc = solution_cost(lg.as_graph(), &layered).unwrap();
        let gc = solution_cost(&g, &back).unwrap();
        // c' = c + l at k = 1, so the pulled-back buy cost is smaller.
        assert!(gc.total <= lc.total);
        assert!(lg.pull_back(&g, &SolutionLedger::new()).unwrap().is_empty());
    }

    #[test]
    fn pull_back_shares_overlapping_purchases() {
        let mut g = TwoMetricGraph::directed(3);
        g.add_edge(0, 1, 0.0, 0.0).unwrap();
        g.add_edge(1, 2, 10.0, 0.0).unwrap();
        let lg = LayeredGraph::build(&g, 1, 2, Direction::Up).unwrap();
        let a = lg.edges().iter().position(|e| e.from == (0, 2) && e.to == (2, 1)).unwrap();
        let b = lg.edges().iter().position(|e| e.from == (1, 1) && e.to == (2, 0)).unwrap();
        let stay = lg.edges().iter().position(|e| e.from == (2, 1) && e.to == (2, 0)).unwrap();
        let hold = lg.edges().iter().position(|e| e.from == (1, 2) && e.to == (1, 1)).unwrap();
        let mut layered = SolutionLedger::new();
        layered.commit_path(lg.as_graph(), 0, vec![a, stay]).unwrap();
        layered.commit_path(lg.as_graph(), 1, vec![hold, b]).unwrap();
        let lc = solution_cost(lg.as_graph(), &layered).unwrap();
        let gc = solution_cost(&g, &lg.pull_back(&g, &layered).unwrap()).unwrap();
        assert_eq!(lc.buy, 20.0);
        assert_eq!(gc.buy, 10.0);
        assert!(gc.total < lc.total);
    }

    #[test]
    fn missing_back_path_is_integrity_failure() {
        let g = single_arc();
        let lg = LayeredGraph::build(&g, 1, 1, Direction::Up).unwrap();
        let mut bogus = SolutionLedger::new();
        bogus.insert_path_unchecked(0, vec![99]);
        assert!(matches!(lg.pull_back(&g, &bogus), Err(Error::Integrity(_))));
    }
}
