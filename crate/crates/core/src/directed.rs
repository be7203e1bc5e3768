//! Tree-shaped expansion of the layered graphs for directed instances.
//!
//! For every root `r` the expansion holds an in-tree over tuples
//! `(r, v1, .., vi)` built from the upward layered graph and an out-tree built
//! from the downward one, joined by a free root-link arc. Every source-sink
//! path crosses exactly one root link, so a single-sink sub-instance on one
//! tree is a group Steiner tree problem on that tree.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::composite::{LayeredPair, Side};
use crate::error::{Error, Result};
use crate::graph::{EdgeId, SolutionLedger, TwoMetricGraph, VertexId};

/// Default cap on the number of tuple vertices.
pub const NODE_BUDGET: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TupleVertex {
    pub root: VertexId,
    pub side: Side,
    /// `(v1, .., vi)`; its length is the level.
    pub tuple: Vec<VertexId>,
}

impl TupleVertex {
    pub fn level(&self) -> usize {
        self.tuple.len()
    }

    /// Base vertex this tuple stands for.
    pub fn vertex(&self) -> VertexId {
        self.tuple.last().copied().unwrap_or(self.root)
    }

    pub fn label(&self) -> String {
        let tail: Vec<String> = self.tuple.iter().map(ToString::to_string).collect();
        let side = match self.side {
            Side::Up => "up",
            Side::Down => "down",
        };
        format!("{}|{}|{}", side, self.root, tail.join("."))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum HNode {
    Tuple(TupleVertex),
    PairSource(usize),
    PairSink(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum HArc {
    /// Copy of a layered edge inside one tree.
    Tree { side: Side, layered: EdgeId },
    RootLink { root: VertexId },
    /// Pair source to an upward leaf, or downward leaf to pair sink.
    Attach { pair: usize, side: Side },
}

/// The expanded graph with its tree structure.
#[derive(Clone, Debug)]
pub struct JunctionForest {
    pub graph: TwoMetricGraph,
    pub nodes: Vec<HNode>,
    pub arcs: Vec<HArc>,
    /// Tree arc joining each tuple vertex to its parent tuple.
    parent_arc: Vec<Option<EdgeId>>,
    children: Vec<Vec<VertexId>>,
    /// (up tree root, down tree root) per base vertex.
    tree_roots: Vec<(VertexId, VertexId)>,
    pair_nodes: Vec<(VertexId, VertexId)>,
    h: usize,
}

/// Tuple vertices needed for `n` base vertices and height `h` (both sides).
pub fn required_nodes(n: usize, h: usize) -> u64 {
    let n = n as u64;
    let per_tree: u64 = (0..=h as u32).map(|i| n.saturating_pow(i)).fold(0u64, u64::saturating_add);
    per_tree.saturating_mul(n).saturating_mul(2)
}

/// Builds the forest for `pairs` over `layers`, refusing when more than
/// `budget` tuple vertices would be needed.
pub fn build_h(layers: &LayeredPair, pairs: &[(VertexId, VertexId)], budget: u64) -> Result<JunctionForest> {
    let n = layers.base_vertex_count();
    let h = layers.up.height();
    let required = required_nodes(n, h);
    if required > budget {
        return Err(Error::BudgetExceeded { required, budget });
    }
    let mut f = JunctionForest {
        graph: TwoMetricGraph::directed(0),
        nodes: Vec::new(),
        arcs: Vec::new(),
        parent_arc: Vec::new(),
        children: Vec::new(),
        tree_roots: Vec::new(),
        pair_nodes: Vec::new(),
        h,
    };
    let mut arcs: Vec<(VertexId, VertexId, f64, f64)> = Vec::new();
    let mut leaves: BTreeMap<(Side, VertexId), Vec<VertexId>> = BTreeMap::new();
    for r in 0..n {
        let mut roots = [0; 2];
        for (slot, side) in [Side::Up, Side::Down].into_iter().enumerate() {
            let lg = match side {
                Side::Up => &layers.up,
                Side::Down => &layers.down,
            };
            let flat = lg.as_graph();
            let root_id = f.push_node(HNode::Tuple(TupleVertex { root: r, side, tuple: Vec::new() }));
            roots[slot] = root_id;
            let mut frontier = vec![root_id];
            for level in 1..=h {
                let mut next = Vec::new();
                for &parent in &frontier {
                    let HNode::Tuple(pt) = &f.nodes[parent] else { unreachable!() };
                    let (prefix, w) = (pt.tuple.clone(), pt.vertex());
                    let anchor = lg.node(w, level - 1);
                    let mut links: Vec<(VertexId, EdgeId)> = match side {
                        Side::Up => flat.in_edges(anchor).iter().map(|&e| (flat.edge(e).tail, e)).collect(),
                        Side::Down => flat.out_edges(anchor).iter().map(|&e| (flat.edge(e).head, e)).collect(),
                    };
                    links.sort_unstable();
                    for (other, e) in links {
                        let (v, lv) = lg.level_of(other);
                        debug_assert_eq!(lv, level);
                        let mut tuple = prefix.clone();
                        tuple.push(v);
                        let child = f.push_node(HNode::Tuple(TupleVertex { root: r, side, tuple }));
                        let edge = lg.edge(e);
                        let arc = arcs.len();
                        match side {
                            Side::Up => arcs.push((child, parent, edge.cost, edge.length)),
                            Side::Down => arcs.push((parent, child, edge.cost, edge.length)),
                        }
                        f.arcs.push(HArc::Tree { side, layered: e });
                        f.parent_arc[child] = Some(arc);
                        f.children[parent].push(child);
                        if level == h {
                            leaves.entry((side, v)).or_default().push(child);
                        }
                        next.push(child);
                    }
                }
                frontier = next;
            }
        }
        arcs.push((roots[0], roots[1], 0.0, 0.0));
        f.arcs.push(HArc::RootLink { root: r });
        f.tree_roots.push((roots[0], roots[1]));
    }
    for (i, &(s, t)) in pairs.iter().enumerate() {
        let src = f.push_node(HNode::PairSource(i));
        let dst = f.push_node(HNode::PairSink(i));
        f.pair_nodes.push((src, dst));
        for &leaf in leaves.get(&(Side::Up, s)).map(Vec::as_slice).unwrap_or_default() {
            arcs.push((src, leaf, 0.0, 0.0));
            f.arcs.push(HArc::Attach { pair: i, side: Side::Up });
        }
        for &leaf in leaves.get(&(Side::Down, t)).map(Vec::as_slice).unwrap_or_default() {
            arcs.push((leaf, dst, 0.0, 0.0));
            f.arcs.push(HArc::Attach { pair: i, side: Side::Down });
        }
    }
    let mut g = TwoMetricGraph::directed(f.nodes.len());
    for (tail, head, c, l) in arcs {
        g.add_edge(tail, head, c, l)?;
    }
    f.graph = g;
    Ok(f)
}

impl JunctionForest {
    fn push_node(&mut self, node: HNode) -> VertexId {
        self.nodes.push(node);
        self.parent_arc.push(None);
        self.children.push(Vec::new());
        self.nodes.len() - 1
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn tuple(&self, v: VertexId) -> Option<&TupleVertex> {
        match &self.nodes[v] {
            HNode::Tuple(t) => Some(t),
            _ => None,
        }
    }

    pub fn tree_root(&self, r: VertexId, side: Side) -> VertexId {
        match side {
            Side::Up => self.tree_roots[r].0,
            Side::Down => self.tree_roots[r].1,
        }
    }

    pub fn pair_nodes(&self, pair: usize) -> (VertexId, VertexId) {
        self.pair_nodes[pair]
    }

    pub fn tuple_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, HNode::Tuple(_))).count()
    }

    /// Tuple vertices of the tree rooted at base vertex `r` on `side`.
    pub fn tree_size(&self, r: VertexId, side: Side) -> usize {
        let mut stack = vec![self.tree_root(r, side)];
        let mut count = 0;
        while let Some(v) = stack.pop() {
            count += 1;
            stack.extend_from_slice(&self.children[v]);
        }
        count
    }

    pub fn children(&self, v: VertexId) -> &[VertexId] {
        &self.children[v]
    }

    pub fn parent_arc(&self, v: VertexId) -> Option<EdgeId> {
        self.parent_arc[v]
    }

    /// Tree arcs from `v` up to (but excluding) `top`, nearest first.
    pub fn arcs_to(&self, mut v: VertexId, top: VertexId) -> Result<Vec<EdgeId>> {
        let mut out = Vec::new();
        while v != top {
            let arc = self.parent_arc[v].ok_or_else(|| Error::integrity(format!("node {v} is not below {top}")))?;
            out.push(arc);
            let a = self.graph.edge(arc);
            v = if a.head == v { a.tail } else { a.head };
        }
        Ok(out)
    }

    /// Number of root-link arcs on an H walk.
    pub fn root_links(&self, walk: &[EdgeId]) -> usize {
        walk.iter().filter(|&&e| matches!(self.arcs[e], HArc::RootLink { .. })).count()
    }

    /// Splits an H walk into its upward and downward layered walks.
    pub fn layered_walks(&self, walk: &[EdgeId]) -> (Vec<EdgeId>, Vec<EdgeId>) {
        let mut up = Vec::new();
        let mut down = Vec::new();
        for &e in walk {
            if let HArc::Tree { side, layered } = self.arcs[e] {
                match side {
                    Side::Up => up.push(layered),
                    Side::Down => down.push(layered),
                }
            }
        }
        (up, down)
    }

    /// Walk in the base graph for an H walk.
    pub fn expand(&self, layers: &LayeredPair, walk: &[EdgeId]) -> Result<Vec<EdgeId>> {
        let (up, down) = self.layered_walks(walk);
        let mut out = layers.up.expand_walk(&up)?;
        out.extend(layers.down.expand_walk(&down)?);
        Ok(out)
    }

    /// Edge list in the instance JSON schema with labels `r|v1.v2`.
    pub fn to_debug_json(&self) -> serde_json::Value {
        let label = |v: VertexId| match &self.nodes[v] {
            HNode::Tuple(t) => t.label(),
            HNode::PairSource(i) => format!("s{i}"),
            HNode::PairSink(i) => format!("t{i}"),
        };
        let edges: Vec<_> = self
            .graph
            .edges()
            .iter()
            .map(|e| {
                serde_json::json!({
                    "id": e.id, "tail": label(e.tail), "head": label(e.head), "c": e.cost, "l": e.length,
                })
            })
            .collect();
        serde_json::json!({ "directed": true, "n": self.graph.vertex_count(), "edges": edges })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GstOrigin {
    /// A tuple vertex of the forest.
    Tuple(VertexId),
    /// Pendant leaf standing for terminal `group` attached at forest leaf.
    Dangling { group: usize, leaf: VertexId },
}

/// Group Steiner tree instance on a rooted tree; node 0 is the root and each
/// non-root node has one arc to its parent.
#[derive(Clone, Debug, PartialEq)]
pub struct GstInstance {
    parent: Vec<Option<usize>>,
    weight: Vec<f64>,
    groups: Vec<Vec<usize>>,
    origin: Vec<GstOrigin>,
    side: Side,
}

impl GstInstance {
    /// Builds an instance directly from parent links (node 0 is the root).
    pub fn from_parts(parent: Vec<Option<usize>>, weight: Vec<f64>, groups: Vec<Vec<usize>>) -> Result<Self> {
        if parent.len() != weight.len() || parent.first().is_some_and(|p| p.is_some()) {
            return Err(Error::invalid("tree needs node 0 as root and one weight per node"));
        }
        for (v, p) in parent.iter().enumerate().skip(1) {
            match p {
                Some(p) if *p < v => {}
                _ => return Err(Error::invalid(format!("node {v} needs a parent with a smaller id"))),
            }
        }
        if weight.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::invalid("tree weights must be nonnegative"));
        }
        let origin = (0..parent.len()).map(GstOrigin::Tuple).collect();
        Ok(Self { parent, weight, groups, origin, side: Side::Up })
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn group_count(&self) -> usize {
        self.groups.len()
    }

    pub fn group(&self, g: usize) -> Option<&[usize]> {
        self.groups.get(g).map(Vec::as_slice)
    }

    /// Groups with no member: their terminal cannot be served in this tree.
    pub fn infeasible_groups(&self) -> Vec<usize> {
        (0..self.groups.len()).filter(|&g| self.groups[g].is_empty()).collect()
    }

    pub fn arc_weight(&self, v: usize) -> f64 {
        self.weight[v]
    }

    pub fn origin(&self, v: usize) -> GstOrigin {
        self.origin[v]
    }

    pub fn side(&self) -> Side {
        self.side
    }

    /// Nodes whose parent arcs lead from `v` to the root, `v` first.
    pub fn path_to_root(&self, mut v: usize) -> Vec<usize> {
        let mut out = Vec::new();
        while let Some(p) = self.parent[v] {
            out.push(v);
            v = p;
        }
        out
    }

    /// Weight of the union of root paths of `members`.
    pub fn weight_of(&self, members: &[usize]) -> f64 {
        let mut used = vec![false; self.node_count()];
        for &m in members {
            for u in self.path_to_root(m) {
                used[u] = true;
            }
        }
        (0..used.len()).filter(|&u| used[u]).map(|u| self.weight[u]).sum()
    }

    /// Member of `group` that stands for forest leaf `leaf`.
    pub fn member_for_leaf(&self, group: usize, leaf: VertexId) -> Option<usize> {
        self.groups.get(group)?.iter().copied().find(|&m| self.origin[m] == GstOrigin::Dangling { group, leaf })
    }
}

/// Group Steiner instance for the subtree of `forest` below tuple vertex
/// `junction`, with one group per entry of `terminals`.
pub fn map_to_gst(forest: &JunctionForest, junction: VertexId, terminals: &[VertexId]) -> Result<GstInstance> {
    let Some(top) = forest.tuple(junction) else {
        return Err(Error::invalid(format!("node {junction} is not a tuple vertex")));
    };
    let side = top.side;
    let mut parent = vec![None];
    let mut weight = vec![0.0];
    let mut origin = vec![GstOrigin::Tuple(junction)];
    // Length of the path from each subtree node to the junction.
    let mut depth_len = vec![0.0];
    let mut leaves: Vec<(VertexId, usize)> = Vec::new();
    let mut stack = vec![(junction, 0usize)];
    while let Some((v, id)) = stack.pop() {
        if forest.children(v).is_empty() {
            leaves.push((v, id));
        }
        for &c in forest.children(v).iter().rev() {
            let arc = forest.graph.edge(forest.parent_arc(c).expect("tree child has a parent arc"));
            let cid = parent.len();
            parent.push(Some(id));
            weight.push(arc.cost);
            origin.push(GstOrigin::Tuple(c));
            depth_len.push(depth_len[id] + arc.length);
            stack.push((c, cid));
        }
    }
    leaves.sort_unstable();
    let mut groups = vec![Vec::new(); terminals.len()];
    for (g, &term) in terminals.iter().enumerate() {
        for &(leaf, id) in &leaves {
            let t = forest.tuple(leaf).expect("leaves are tuples");
            if t.level() == forest.height() && t.vertex() == term {
                groups[g].push(parent.len());
                parent.push(Some(id));
                weight.push(depth_len[id]);
                origin.push(GstOrigin::Dangling { group: g, leaf });
            }
        }
    }
    Ok(GstInstance { parent, weight, groups, origin, side })
}

/// H walk (in travel direction) from a chosen dangling member up to the
/// junction of its instance.
pub fn member_walk(forest: &JunctionForest, gst: &GstInstance, member: usize) -> Result<Vec<EdgeId>> {
    let GstOrigin::Dangling { leaf, .. } = gst.origin(member) else {
        return Err(Error::invalid(format!("node {member} is not a group member")));
    };
    let GstOrigin::Tuple(top) = gst.origin(0) else { unreachable!("root is a tuple") };
    let mut arcs = forest.arcs_to(leaf, top)?;
    if gst.side() == Side::Down {
        arcs.reverse();
    }
    Ok(arcs)
}

/// H ledger of a group Steiner solution (`choices[g]` = chosen member of
/// group g). Paths are keyed by group.
pub fn gst_to_h(forest: &JunctionForest, gst: &GstInstance, choices: &[(usize, usize)]) -> Result<SolutionLedger> {
    let mut ledger = SolutionLedger::new();
    for &(group, member) in choices {
        if !gst.group(group).is_some_and(|m| m.contains(&member)) {
            return Err(Error::invalid(format!("node {member} is not in group {group}")));
        }
        ledger.commit_path(&forest.graph, group, member_walk(forest, gst, member)?)?;
    }
    Ok(ledger)
}

/// Group Steiner choices for H walks that each end in a forest leaf of the
/// instance's tree (inverse of [`gst_to_h`]).
pub fn h_to_gst(forest: &JunctionForest, gst: &GstInstance, walks: &BTreeMap<usize, Vec<EdgeId>>) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (&group, walk) in walks {
        let leaf_arc = match gst.side() {
            Side::Up => walk.first(),
            Side::Down => walk.last(),
        };
        let arc = leaf_arc.ok_or_else(|| Error::invalid(format!("empty walk for group {group}")))?;
        let e = forest.graph.edge(*arc);
        let leaf = match gst.side() {
            Side::Up => e.tail,
            Side::Down => e.head,
        };
        let member = gst
            .member_for_leaf(group, leaf)
            .ok_or_else(|| Error::invalid(format!("leaf {leaf} is not a member of group {group}")))?;
        out.push((group, member));
    }
    Ok(out)
}

/// Base-graph ledger of a group Steiner solution. Paths are keyed by
/// `keys[group]`.
pub fn map_back(
    forest: &JunctionForest,
    layers: &LayeredPair,
    base: &TwoMetricGraph,
    gst: &GstInstance,
    choices: &[(usize, usize)],
    keys: &[usize],
) -> Result<SolutionLedger> {
    let mut ledger = SolutionLedger::new();
    for &(group, member) in choices {
        let key = *keys.get(group).ok_or_else(|| Error::invalid(format!("no key for group {group}")))?;
        let walk = member_walk(forest, gst, member)?;
        ledger.commit_path(base, key, forest.expand(layers, &walk)?)?;
    }
    Ok(ledger)
}
