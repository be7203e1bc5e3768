//! Exact offline baselines for tiny instances.

use std::collections::BinaryHeap;

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use serde::{Deserialize, Serialize};

use crate::composite::{LayeredPair, Side};
use crate::directed::{map_to_gst, JunctionForest};
use crate::error::{Error, Result};
use crate::graph::{shortest_path, Edge, EdgeId, HeapEntry, SolutionLedger, TwoMetricGraph, VertexId};
use crate::single_sink::Orientation;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleBudget {
    /// Largest number of buy units for subset enumeration.
    pub max_edges: usize,
    /// Largest vertex count for root enumeration.
    pub max_vertices: usize,
    /// Largest pair count for root enumeration.
    pub max_pairs: usize,
    /// Largest number of leaf combinations per tree for the expanded optimum.
    pub max_combinations: u64,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self { max_edges: 20, max_vertices: 8, max_pairs: 5, max_combinations: 1_000_000 }
    }
}

fn check(required: usize, budget: usize) -> Result<()> {
    if required > budget {
        return Err(Error::BudgetExceeded { required: required as u64, budget: budget as u64 });
    }
    Ok(())
}

/// Optimum by enumerating every set of bought edges (twins count once) and
/// routing each pair on its shortest length path inside the set.
pub fn offline_opt(graph: &TwoMetricGraph, pairs: &[(VertexId, VertexId)], budget: &OracleBudget) -> Result<(f64, SolutionLedger)> {
    let mut units: Vec<EdgeId> = (0..graph.edge_count()).filter(|&e| graph.buy_unit(e) == e).collect();
    units.sort_unstable();
    check(units.len(), budget.max_edges)?;
    if pairs.is_empty() {
        return Ok((0.0, SolutionLedger::new()));
    }
    let unit_index: Vec<usize> =
        (0..graph.edge_count()).map(|e| units.binary_search(&graph.buy_unit(e)).expect("every edge has a unit")).collect();
    let unit_cost: Vec<f64> = units.iter().map(|&u| graph.edge(u).cost).collect();
    let mut best: Option<(f64, u64)> = None;
    for mask in 0u64..(1u64 << units.len()) {
        let mut total: f64 = (0..units.len()).filter(|&j| mask >> j & 1 == 1).map(|j| unit_cost[j]).sum();
        if best.is_some_and(|(b, _)| total >= b) {
            continue;
        }
        let weight = |e: &Edge| if mask >> unit_index[e.id] & 1 == 1 { e.length } else { f64::INFINITY };
        for &(s, t) in pairs {
            total += crate::graph::dijkstra(graph, &weight, s, false)[t];
            if !total.is_finite() || best.is_some_and(|(b, _)| total >= b) {
                break;
            }
        }
        if total.is_finite() && best.is_none_or(|(b, _)| total < b) {
            best = Some((total, mask));
        }
    }
    let (value, mask) = best.ok_or_else(|| Error::Infeasible("some pair cannot be connected".into()))?;
    let weight = |e: &Edge| if mask >> unit_index[e.id] & 1 == 1 { e.length } else { f64::INFINITY };
    let mut ledger = SolutionLedger::new();
    for (i, &(s, t)) in pairs.iter().enumerate() {
        ledger.commit_path(graph, i, shortest_path(graph, weight, s, t)?.edges)?;
    }
    Ok((value, ledger))
}

/// Optimum when pair `i` may instead be discarded for `penalties[i]`:
/// the best split into routed and discarded pairs.
pub fn prize_offline_opt(
    graph: &TwoMetricGraph,
    pairs: &[(VertexId, VertexId)],
    penalties: &[f64],
    budget: &OracleBudget,
) -> Result<f64> {
    best_split(pairs, penalties, budget, |routed| offline_opt(graph, routed, budget).map(|(v, _)| v))
}

/// [`junction_opt`] with discarding allowed.
pub fn prize_junction_opt(
    graph: &TwoMetricGraph,
    pairs: &[(VertexId, VertexId)],
    penalties: &[f64],
    budget: &OracleBudget,
) -> Result<f64> {
    best_split(pairs, penalties, budget, |routed| junction_opt(graph, routed, budget))
}

fn best_split<F>(pairs: &[(VertexId, VertexId)], penalties: &[f64], budget: &OracleBudget, value: F) -> Result<f64>
where
    F: Fn(&[(VertexId, VertexId)]) -> Result<f64>,
{
    if penalties.len() != pairs.len() {
        return Err(Error::invalid("one penalty per pair required"));
    }
    check(pairs.len(), budget.max_pairs)?;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << pairs.len()) {
        let dropped: f64 = (0..pairs.len()).filter(|&i| mask >> i & 1 == 1).map(|i| penalties[i]).sum();
        if dropped >= best {
            continue;
        }
        let routed: Vec<_> = (0..pairs.len()).filter(|&i| mask >> i & 1 == 0).map(|i| pairs[i]).collect();
        match value(&routed) {
            Ok(v) => best = best.min(v + dropped),
            Err(Error::Infeasible(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(best)
}

/// [`offline_opt`] with every terminal paired with `root`.
pub fn ss_offline_opt(
    graph: &TwoMetricGraph,
    terminals: &[VertexId],
    root: VertexId,
    orientation: Orientation,
    budget: &OracleBudget,
) -> Result<f64> {
    let pairs: Vec<_> = terminals
        .iter()
        .map(|&v| match orientation {
            Orientation::Sink => (v, root),
            Orientation::Source => (root, v),
        })
        .collect();
    Ok(offline_opt(graph, &pairs, budget)?.0)
}

/// Dijkstra from several sources with initial labels.
fn settle(graph: &TwoMetricGraph, init: &[f64], per_unit: f64) -> Vec<f64> {
    let mut dist = init.to_vec();
    let mut heap: BinaryHeap<HeapEntry> =
        dist.iter().enumerate().filter(|(_, d)| d.is_finite()).map(|(v, &d)| HeapEntry { key: d, vertex: v }).collect();
    while let Some(HeapEntry { key, vertex }) = heap.pop() {
        if key > dist[vertex] {
            continue;
        }
        for &e in graph.out_edges(vertex) {
            let edge = graph.edge(e);
            let cand = key + edge.cost + per_unit * edge.length;
            if cand < dist[edge.head] {
                dist[edge.head] = cand;
                heap.push(HeapEntry { key: cand, vertex: edge.head });
            }
        }
    }
    dist
}

/// Exact single-sink optimum by a subset dynamic program over terminals.
/// An optimal single-sink solution is a tree, and an edge carrying the
/// terminals `S` costs `c + |S|·ℓ` in it. Returns infinity when some
/// terminal cannot reach the root.
pub fn ss_tree_opt(graph: &TwoMetricGraph, terminals: &[VertexId], root: VertexId, orientation: Orientation) -> f64 {
    let reversed;
    let g = match orientation {
        Orientation::Sink => graph,
        Orientation::Source => {
            reversed = graph.reversed();
            &reversed
        }
    };
    all_subsets_to(g, terminals)[(1usize << terminals.len()) - 1][root]
}

/// `table[S][v]`: cheapest tree sending the terminals in `S` to `v`.
fn all_subsets_to(g: &TwoMetricGraph, terminals: &[VertexId]) -> Vec<Vec<f64>> {
    let n = g.vertex_count();
    let k = terminals.len();
    let mut table = vec![vec![f64::INFINITY; n]; 1 << k];
    table[0] = vec![0.0; n];
    for mask in 1usize..(1 << k) {
        let mut merged = vec![f64::INFINITY; n];
        if mask.count_ones() == 1 {
            merged[terminals[mask.trailing_zeros() as usize]] = 0.0;
        } else {
            let low = mask & mask.wrapping_neg();
            let rest = mask ^ low;
            // Proper splits that keep the lowest terminal on the left.
            let mut sub = rest;
            loop {
                let left = sub | low;
                if left != mask {
                    let right = mask ^ left;
                    for v in 0..n {
                        let c = table[left][v] + table[right][v];
                        if c < merged[v] {
                            merged[v] = c;
                        }
                    }
                }
                if sub == 0 {
                    break;
                }
                sub = (sub - 1) & rest;
            }
        }
        table[mask] = settle(g, &merged, mask.count_ones() as f64);
    }
    table
}

/// Minimum over partitions of `0..k` of the summed block costs.
pub fn partition_min<F: Fn(usize) -> f64>(k: usize, block: F) -> f64 {
    let full = (1usize << k) - 1;
    let mut best = vec![f64::INFINITY; full + 1];
    best[0] = 0.0;
    for mask in 1..=full {
        let low = mask & mask.wrapping_neg();
        let rest = mask ^ low;
        let mut sub = rest;
        loop {
            let part = sub | low;
            let c = block(part) + best[mask ^ part];
            if c < best[mask] {
                best[mask] = c;
            }
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & rest;
        }
    }
    best[full]
}

fn masked<T: Copy>(items: &[T], mask: usize) -> Vec<T> {
    (0..items.len()).filter(|&i| mask >> i & 1 == 1).map(|i| items[i]).collect()
}

/// Best decomposition of the pairs into groups that each route through one
/// root: sources to the root plus root to sinks, with every group's edges
/// paid separately.
pub fn junction_opt(graph: &TwoMetricGraph, pairs: &[(VertexId, VertexId)], budget: &OracleBudget) -> Result<f64> {
    check(graph.vertex_count(), budget.max_vertices)?;
    check(pairs.len(), budget.max_pairs)?;
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let sources: Vec<VertexId> = pairs.iter().map(|p| p.0).collect();
    let sinks: Vec<VertexId> = pairs.iter().map(|p| p.1).collect();
    let up = all_subsets_to(graph, &sources);
    let down = all_subsets_to(&graph.reversed(), &sinks);
    let n = graph.vertex_count();
    let value = partition_min(pairs.len(), |mask| (0..n).map(|r| up[mask][r] + down[mask][r]).fold(f64::INFINITY, f64::min));
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Infeasible("some pair has no common root".into()))
    }
}

/// [`junction_opt`] on the layered graphs: each group of pairs goes up from
/// its sources to a root copy and down from it to its sinks.
pub fn layered_opt(layers: &LayeredPair, pairs: &[(VertexId, VertexId)], budget: &OracleBudget) -> Result<f64> {
    check(pairs.len(), budget.max_pairs)?;
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let sources: Vec<VertexId> = pairs.iter().map(|p| layers.up.terminal(p.0)).collect();
    let sinks: Vec<VertexId> = pairs.iter().map(|p| layers.down.terminal(p.1)).collect();
    let up = all_subsets_to(layers.up.as_graph(), &sources);
    let down = all_subsets_to(&layers.down.as_graph().reversed(), &sinks);
    let n = layers.base_vertex_count();
    let value = partition_min(pairs.len(), |mask| {
        (0..n).map(|r| up[mask][layers.up.root(r)] + down[mask][layers.down.root(r)]).fold(f64::INFINITY, f64::min)
    });
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Infeasible("some pair has no common root".into()))
    }
}

/// Exact optimum on the tree expansion: every pair picks a root, and each
/// root's trees serve their terminals through the cheapest leaf choice.
pub fn expanded_opt(forest: &JunctionForest, n: usize, pairs: &[(VertexId, VertexId)], budget: &OracleBudget) -> Result<f64> {
    check(pairs.len(), budget.max_pairs)?;
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let k = pairs.len();
    let mut block = vec![f64::INFINITY; 1 << k];
    for r in 0..n {
        let mut side_cost = [vec![f64::INFINITY; 1 << k], vec![f64::INFINITY; 1 << k]];
        for (si, side) in [Side::Up, Side::Down].into_iter().enumerate() {
            let terminals: Vec<VertexId> =
                pairs.iter().map(|&(s, t)| if side == Side::Up { s } else { t }).collect();
            let gst = map_to_gst(forest, forest.tree_root(r, side), &terminals)?;
            for mask in 1usize..(1 << k) {
                let groups: Vec<&[usize]> = masked(&(0..k).collect::<Vec<_>>(), mask)
                    .into_iter()
                    .map(|g| gst.group(g).expect("one group per pair"))
                    .collect();
                if groups.iter().any(|g| g.is_empty()) {
                    continue;
                }
                let combos = groups.iter().fold(1u64, |acc, g| acc.saturating_mul(g.len() as u64));
                if combos > budget.max_combinations {
                    return Err(Error::BudgetExceeded { required: combos, budget: budget.max_combinations });
                }
                let mut idx = vec![0usize; groups.len()];
                let mut best = f64::INFINITY;
                loop {
                    let members: Vec<usize> = idx.iter().zip(&groups).map(|(&i, g)| g[i]).collect();
                    best = best.min(gst.weight_of(&members));
                    let mut pos = 0;
                    while pos < idx.len() {
                        idx[pos] += 1;
                        if idx[pos] < groups[pos].len() {
                            break;
                        }
                        idx[pos] = 0;
                        pos += 1;
                    }
                    if pos == idx.len() {
                        break;
                    }
                }
                side_cost[si][mask] = best;
            }
        }
        for mask in 1usize..(1 << k) {
            block[mask] = block[mask].min(side_cost[0][mask] + side_cost[1][mask]);
        }
    }
    let value = partition_min(k, |m| block[m]);
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Infeasible("some pair has no route in the expansion".into()))
    }
}

/// Optimum of the natural flow relaxation: fractional purchases `x` per buy
/// unit and one unit of flow per pair bounded by `x`.
pub fn lp_lb(graph: &TwoMetricGraph, pairs: &[(VertexId, VertexId)]) -> Result<f64> {
    let pairs: Vec<_> = pairs.iter().copied().filter(|(s, t)| s != t).collect();
    if pairs.is_empty() {
        return Ok(0.0);
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let m = graph.edge_count();
    let mut unit_var = vec![None; m];
    for e in 0..m {
        let u = graph.buy_unit(e);
        if unit_var[u].is_none() {
            unit_var[u] = Some(lp.add_var(graph.edge(u).cost, (0.0, 1.0)));
        }
    }
    for &(s, t) in &pairs {
        let flow: Vec<_> = graph.edges().iter().map(|e| lp.add_var(e.length, (0.0, 1.0))).collect();
        for e in 0..m {
            let x = unit_var[graph.buy_unit(e)].expect("unit variable exists");
            lp.add_constraint([(flow[e], 1.0), (x, -1.0)], ComparisonOp::Le, 0.0);
        }
        for v in 0..graph.vertex_count() {
            let mut expr: Vec<_> = graph.out_edges(v).iter().map(|&e| (flow[e], 1.0)).collect();
            expr.extend(graph.in_edges(v).iter().map(|&e| (flow[e], -1.0)));
            let rhs = if v == s {
                1.0
            } else if v == t {
                -1.0
            } else {
                0.0
            };
            lp.add_constraint(expr, ComparisonOp::Eq, rhs);
        }
    }
    match lp.solve() {
        Ok(sol) => Ok(sol.objective()),
        Err(minilp::Error::Infeasible) => Err(Error::Infeasible("some pair cannot be connected".into())),
        Err(e) => Err(Error::Infeasible(e.to_string())),
    }
}
