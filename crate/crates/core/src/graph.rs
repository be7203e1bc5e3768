//! Two-metric graphs, cost accounting and shortest paths.
//!
//! Every edge carries a one-time buying cost `c` and a per-unit length `l`.
//! A solution buys a set of edges and routes each request along a walk of
//! bought edges; it pays `c` once per bought edge and `l` once per traversal.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type VertexId = usize;
pub type EdgeId = usize;

/// Absolute tolerance used for all cost comparisons.
pub const EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub tail: VertexId,
    pub head: VertexId,
    pub cost: f64,
    pub length: f64,
    /// Index of the input edge this arc was derived from, when the graph was
    /// produced by a transformation (cable expansion, node splitting, JSON).
    pub origin: Option<usize>,
    /// Anti-parallel partner of an undirected edge. Buying one buys both.
    pub twin: Option<EdgeId>,
}

#[derive(Clone, Debug, Default)]
pub struct TwoMetricGraph {
    directed: bool,
    n: usize,
    edges: Vec<Edge>,
    out_adj: Vec<Vec<EdgeId>>,
    in_adj: Vec<Vec<EdgeId>>,
}

fn check_weight(what: &str, x: f64) -> Result<()> {
    if !x.is_finite() || x < 0.0 {
        return Err(Error::invalid(format!("{what} must be finite and nonnegative, got {x}")));
    }
    Ok(())
}

impl TwoMetricGraph {
    pub fn directed(n: usize) -> Self {
        Self::with_orientation(n, true)
    }

    pub fn undirected(n: usize) -> Self {
        Self::with_orientation(n, false)
    }

    pub fn with_orientation(n: usize, directed: bool) -> Self {
        Self { directed, n, edges: Vec::new(), out_adj: vec![Vec::new(); n], in_adj: vec![Vec::new(); n] }
    }

    /// Adds an edge and returns its id. On an undirected graph this stores
    /// two anti-parallel arcs and returns the id of the `tail -> head` arc.
    pub fn add_edge(&mut self, tail: VertexId, head: VertexId, cost: f64, length: f64) -> Result<EdgeId> {
        self.add_edge_with_origin(tail, head, cost, length, None)
    }

    pub fn add_edge_with_origin(
        &mut self,
        tail: VertexId,
        head: VertexId,
        cost: f64,
        length: f64,
        origin: Option<usize>,
    ) -> Result<EdgeId> {
        if tail >= self.n || head >= self.n {
            return Err(Error::invalid(format!("edge ({tail}, {head}) outside vertex range 0..{}", self.n)));
        }
        check_weight("edge cost", cost)?;
        check_weight("edge length", length)?;
        let id = self.push_arc(tail, head, cost, length, origin);
        if !self.directed {
            let back = self.push_arc(head, tail, cost, length, origin);
            self.edges[id].twin = Some(back);
            self.edges[back].twin = Some(id);
        }
        Ok(id)
    }

    fn push_arc(&mut self, tail: VertexId, head: VertexId, cost: f64, length: f64, origin: Option<usize>) -> EdgeId {
        let id = self.edges.len();
        self.edges.push(Edge { id, tail, head, cost, length, origin, twin: None });
        self.out_adj[tail].push(id);
        self.in_adj[head].push(id);
        id
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn vertex_count(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeId) -> &Edge {
        &self.edges[id]
    }

    pub fn get_edge(&self, id: EdgeId) -> Option<&Edge> {
        self.edges.get(id)
    }

    pub fn out_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.out_adj[v]
    }

    pub fn in_edges(&self, v: VertexId) -> &[EdgeId] {
        &self.in_adj[v]
    }

    /// Canonical representative of the purchase that `e` belongs to: an
    /// undirected edge and its twin share one buying cost.
    pub fn buy_unit(&self, e: EdgeId) -> EdgeId {
        match self.edges[e].twin {
            Some(t) if t < e => t,
            _ => e,
        }
    }

    /// Number of independent purchases (undirected twins count once).
    pub fn buy_unit_count(&self) -> usize {
        (0..self.edges.len()).filter(|&e| self.buy_unit(e) == e).count()
    }

    /// Same vertices and edge ids with every arc flipped.
    pub fn reversed(&self) -> TwoMetricGraph {
        let mut g = TwoMetricGraph {
            directed: self.directed,
            n: self.n,
            edges: self.edges.clone(),
            out_adj: self.in_adj.clone(),
            in_adj: self.out_adj.clone(),
        };
        for e in &mut g.edges {
            std::mem::swap(&mut e.tail, &mut e.head);
        }
        g
    }

    /// Checks that `path` is a contiguous walk from `from` to `to`.
    pub fn validate_walk(&self, path: &[EdgeId], from: VertexId, to: VertexId) -> Result<()> {
        let mut at = from;
        for &e in path {
            let edge = self
                .get_edge(e)
                .ok_or_else(|| Error::integrity(format!("edge {e} does not exist")))?;
            if edge.tail != at {
                return Err(Error::integrity(format!("edge {e} leaves {} but walk is at {at}", edge.tail)));
            }
            at = edge.head;
        }
        if at != to {
            return Err(Error::integrity(format!("walk ends at {at}, expected {to}")));
        }
        Ok(())
    }

    pub fn path_length(&self, path: &[EdgeId]) -> f64 {
        path.iter().map(|&e| self.edges[e].length).sum()
    }

    pub fn path_cost(&self, path: &[EdgeId]) -> f64 {
        path.iter().map(|&e| self.edges[e].cost).sum()
    }
}

/// A piecewise-affine cable option: `fixed + per_unit * load`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CableType {
    pub fixed: f64,
    pub per_unit: f64,
}

impl CableType {
    pub fn new(fixed: f64, per_unit: f64) -> Result<Self> {
        check_weight("cable fixed cost", fixed)?;
        check_weight("cable per-unit cost", per_unit)?;
        Ok(Self { fixed, per_unit })
    }

    pub fn cost_for(&self, load: f64) -> f64 {
        if load <= 0.0 {
            0.0
        } else {
            self.fixed + self.per_unit * load
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BabEdge {
    pub tail: VertexId,
    pub head: VertexId,
    pub cables: Vec<CableType>,
}

/// A buy-at-bulk input whose sub-additive edge costs are given as the
/// minimum over a finite list of cable types.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BabGraph {
    pub directed: bool,
    pub n: usize,
    pub edges: Vec<BabEdge>,
}

/// Expands every cable type into its own parallel two-metric edge with
/// `c = fixed` and `l = per_unit`. The resulting edge's `origin` is the index
/// of the input edge.
pub fn bab_to_two_metric(input: &BabGraph) -> Result<TwoMetricGraph> {
    let mut g = TwoMetricGraph::with_orientation(input.n, input.directed);
    for (idx, edge) in input.edges.iter().enumerate() {
        if edge.cables.is_empty() {
            return Err(Error::invalid(format!("edge {idx} has no cable types")));
        }
        for cable in &edge.cables {
            g.add_edge_with_origin(edge.tail, edge.head, cable.fixed, cable.per_unit, Some(idx))?;
        }
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeWeight {
    pub cost: f64,
    pub length: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeWeightedGraph {
    pub directed: bool,
    pub weights: Vec<NodeWeight>,
    pub edges: Vec<(VertexId, VertexId)>,
}

/// Result of node splitting: vertex `v` becomes `2v` (in) and `2v + 1` (out).
#[derive(Clone, Debug)]
pub struct SplitGraph {
    pub graph: TwoMetricGraph,
}

impl SplitGraph {
    pub fn v_in(v: VertexId) -> VertexId {
        2 * v
    }

    pub fn v_out(v: VertexId) -> VertexId {
        2 * v + 1
    }

    /// Where a request `(s, t)` of the node-weighted input lives in the split
    /// graph: the source leaves from `s_out`, the sink is reached at `t_in`.
    pub fn map_pair(s: VertexId, t: VertexId) -> (VertexId, VertexId) {
        (Self::v_out(s), Self::v_in(t))
    }

    /// The internal arc `v_in -> v_out` carrying the node's weights.
    pub fn node_arc(v: VertexId) -> EdgeId {
        v
    }
}

/// Converts node weights into arc weights on a directed graph where each
/// vertex is an `in -> out` arc and original edges are free connectors.
pub fn node_split(input: &NodeWeightedGraph) -> Result<SplitGraph> {
    let n = input.weights.len();
    let mut g = TwoMetricGraph::directed(2 * n);
    for (v, w) in input.weights.iter().enumerate() {
        if w.cost < 0.0 || w.length < 0.0 {
            return Err(Error::invalid(format!("vertex {v} has a negative weight")));
        }
        g.add_edge_with_origin(SplitGraph::v_in(v), SplitGraph::v_out(v), w.cost, w.length, Some(v))?;
    }
    for &(u, v) in &input.edges {
        if u >= n || v >= n {
            return Err(Error::invalid(format!("edge ({u}, {v}) outside vertex range 0..{n}")));
        }
        g.add_edge(SplitGraph::v_out(u), SplitGraph::v_in(v), 0.0, 0.0)?;
        if !input.directed {
            g.add_edge(SplitGraph::v_out(v), SplitGraph::v_in(u), 0.0, 0.0)?;
        }
    }
    Ok(SplitGraph { graph: g })
}

/// Bought edges plus one committed walk per request.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SolutionLedger {
    bought: BTreeSet<EdgeId>,
    paths: BTreeMap<usize, Vec<EdgeId>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub buy: f64,
    pub length: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn new(buy: f64, length: f64) -> Self {
        Self { buy, length, total: buy + length }
    }
}

impl SolutionLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Marks `e` (and its undirected twin) bought. Returns true when this is a
    /// new purchase.
    pub fn buy(&mut self, graph: &TwoMetricGraph, e: EdgeId) -> bool {
        let fresh = self.bought.insert(e);
        if let Some(t) = graph.edge(e).twin {
            self.bought.insert(t);
        }
        fresh
    }

    pub fn is_bought(&self, e: EdgeId) -> bool {
        self.bought.contains(&e)
    }

    /// Buys every edge of `path` and records it for `pair`. A pair's path is
    /// written once.
    pub fn commit_path(&mut self, graph: &TwoMetricGraph, pair: usize, path: Vec<EdgeId>) -> Result<()> {
        if self.paths.contains_key(&pair) {
            return Err(Error::integrity(format!("pair {pair} already has a committed path")));
        }
        for &e in &path {
            if e >= graph.edge_count() {
                return Err(Error::integrity(format!("edge {e} does not exist")));
            }
            self.buy(graph, e);
        }
        self.paths.insert(pair, path);
        Ok(())
    }

    /// Marginal cost of committing `path` now: `c` of the not-yet-bought
    /// purchases plus the full length.
    pub fn marginal_cost(&self, graph: &TwoMetricGraph, path: &[EdgeId]) -> f64 {
        let mut seen = BTreeSet::new();
        let mut total = 0.0;
        for &e in path {
            let edge = graph.edge(e);
            total += edge.length;
            let unit = graph.buy_unit(e);
            if !self.bought.contains(&e) && seen.insert(unit) {
                total += edge.cost;
            }
        }
        total
    }

    pub fn bought(&self) -> &BTreeSet<EdgeId> {
        &self.bought
    }

    pub fn paths(&self) -> &BTreeMap<usize, Vec<EdgeId>> {
        &self.paths
    }

    pub fn path(&self, pair: usize) -> Option<&[EdgeId]> {
        self.paths.get(&pair).map(Vec::as_slice)
    }

    pub fn is_empty(&self) -> bool {
        self.bought.is_empty() && self.paths.is_empty()
    }

    /// Folds another ledger (over the same graph) into this one. Paths of
    /// `other` are stored under `pair_key(pair)`.
    pub fn absorb(&mut self, graph: &TwoMetricGraph, other: &SolutionLedger) {
        for &e in &other.bought {
            self.buy(graph, e);
        }
        for (&pair, path) in &other.paths {
            self.paths.entry(pair).or_insert_with(|| path.clone());
        }
    }

    pub(crate) fn insert_path_unchecked(&mut self, pair: usize, path: Vec<EdgeId>) {
        self.paths.insert(pair, path);
    }
}

/// Recomputes buy and length cost of a ledger from scratch.
pub fn solution_cost(graph: &TwoMetricGraph, ledger: &SolutionLedger) -> Result<CostBreakdown> {
    let mut units = BTreeSet::new();
    let mut buy = 0.0;
    for &e in ledger.bought() {
        let edge = graph
            .get_edge(e)
            .ok_or_else(|| Error::integrity(format!("bought edge {e} does not exist")))?;
        if units.insert(graph.buy_unit(e)) {
            buy += edge.cost;
        }
    }
    let mut length = 0.0;
    for (pair, path) in ledger.paths() {
        for &e in path {
            let edge = graph
                .get_edge(e)
                .ok_or_else(|| Error::integrity(format!("path of pair {pair} uses missing edge {e}")))?;
            if !ledger.is_bought(e) {
                return Err(Error::integrity(format!("path of pair {pair} uses unbought edge {e}")));
            }
            length += edge.length;
        }
    }
    Ok(CostBreakdown::new(buy, length))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    pub edges: Vec<EdgeId>,
    pub weight: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct HeapEntry {
    pub key: f64,
    pub vertex: VertexId,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.key.total_cmp(&self.key).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Dijkstra distances from `source` along arcs (or against them when
/// `backward`), using `weight` per edge.
pub(crate) fn dijkstra<W>(graph: &TwoMetricGraph, weight: &W, source: VertexId, backward: bool) -> Vec<f64>
where
    W: Fn(&Edge) -> f64,
{
    let mut dist = vec![f64::INFINITY; graph.vertex_count()];
    let mut heap = BinaryHeap::new();
    dist[source] = 0.0;
    heap.push(HeapEntry { key: 0.0, vertex: source });
    while let Some(HeapEntry { key, vertex }) = heap.pop() {
        if key > dist[vertex] {
            continue;
        }
        let adj = if backward { graph.in_edges(vertex) } else { graph.out_edges(vertex) };
        for &e in adj {
            let edge = graph.edge(e);
            let next = if backward { edge.tail } else { edge.head };
            let cand = key + weight(edge);
            if cand < dist[next] {
                dist[next] = cand;
                heap.push(HeapEntry { key: cand, vertex: next });
            }
        }
    }
    dist
}

/// Minimum-weight walk from `from` to `to` under a nonnegative per-edge
/// weight. Ties are broken first by hop count, then by the lexicographically
/// smallest edge-id sequence.
pub fn shortest_path<W>(graph: &TwoMetricGraph, weight: W, from: VertexId, to: VertexId) -> Result<Path>
where
    W: Fn(&Edge) -> f64,
{
    let n = graph.vertex_count();
    if from >= n || to >= n {
        return Err(Error::invalid(format!("vertex out of range: {from} -> {to}")));
    }
    if from == to {
        return Ok(Path { edges: Vec::new(), weight: 0.0 });
    }
    let to_target = dijkstra(graph, &weight, to, true);
    if !to_target[from].is_finite() {
        return Err(Error::Unreachable { from, to });
    }
    let on_shortest = |e: &Edge| {
        let d = to_target[e.head];
        d.is_finite() && weight(e) + d <= to_target[e.tail] + EPS
    };
    // Hop distances to the target inside the shortest-path subgraph.
    let mut hops = vec![usize::MAX; n];
    hops[to] = 0;
    let mut queue = std::collections::VecDeque::from([to]);
    while let Some(v) = queue.pop_front() {
        for &e in graph.in_edges(v) {
            let edge = graph.edge(e);
            if hops[edge.tail] == usize::MAX && on_shortest(edge) {
                hops[edge.tail] = hops[v] + 1;
                queue.push_back(edge.tail);
            }
        }
    }
    let mut edges = Vec::new();
    let mut at = from;
    let mut total = 0.0;
    while at != to {
        let next = graph
            .out_edges(at)
            .iter()
            .copied()
            .filter(|&e| {
                let edge = graph.edge(e);
                on_shortest(edge) && hops[edge.head] != usize::MAX && hops[edge.head] + 1 == hops[at]
            })
            .min()
            .ok_or_else(|| Error::integrity("shortest-path subgraph lost its way"))?;
        total += weight(graph.edge(next));
        edges.push(next);
        at = graph.edge(next).head;
    }
    Ok(Path { edges, weight: total })
}

/// Single-source shortest-path tree with deterministic parents (minimum
/// weight, then fewest hops, then smallest incoming edge id).
pub(crate) struct PathTree {
    pub dist: Vec<f64>,
    pub parent: Vec<Option<EdgeId>>,
}

impl PathTree {
    pub fn build<W>(graph: &TwoMetricGraph, weight: &W, source: VertexId) -> Self
    where
        W: Fn(&Edge) -> f64,
    {
        let n = graph.vertex_count();
        let dist = dijkstra(graph, weight, source, false);
        let mut order: Vec<VertexId> = (0..n).filter(|&v| dist[v].is_finite()).collect();
        order.sort_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)));
        let mut hops = vec![usize::MAX; n];
        let mut parent = vec![None; n];
        hops[source] = 0;
        // Zero-weight edges can tie distances, so relax hop counts until stable.
        let mut changed = true;
        while changed {
            changed = false;
            for &v in &order {
                if v == source {
                    continue;
                }
                let mut best: Option<(usize, EdgeId)> = None;
                for &e in graph.in_edges(v) {
                    let edge = graph.edge(e);
                    let du = dist[edge.tail];
                    if !du.is_finite() || hops[edge.tail] == usize::MAX {
                        continue;
                    }
                    if du + weight(edge) <= dist[v] + EPS {
                        let cand = (hops[edge.tail] + 1, e);
                        if best.map_or(true, |b| cand < b) {
                            best = Some(cand);
                        }
                    }
                }
                if let Some((h, e)) = best {
                    if (h, e) < (hops[v], parent[v].unwrap_or(EdgeId::MAX)) {
                        hops[v] = h;
                        parent[v] = Some(e);
                        changed = true;
                    }
                }
            }
        }
        Self { dist, parent }
    }

    pub fn path_to(&self, graph: &TwoMetricGraph, target: VertexId) -> Option<Vec<EdgeId>> {
        if !self.dist[target].is_finite() {
            return None;
        }
        let mut path = Vec::new();
        let mut at = target;
        while let Some(e) = self.parent[at] {
            path.push(e);
            at = graph.edge(e).tail;
            if path.len() > graph.vertex_count() {
                return None;
            }
        }
        path.reverse();
        Some(path)
    }
}

/// `c + l` metric used for fallback routing and lower bounds.
pub fn buy_plus_length(e: &Edge) -> f64 {
    e.cost + e.length
}
