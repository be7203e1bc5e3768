//! Min-cost flow on real-valued networks and the per-root "maximize Δ"
//! subproblem solved at every step of the fractional algorithm.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::graph::HeapEntry;

/// Residual capacities at or below this are treated as saturated.
const RESIDUAL_EPS: f64 = 1e-14;
/// Feasibility slack for flow values and budgets.
pub const FLOW_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FlowArc {
    pub tail: usize,
    pub head: usize,
    /// `f64::INFINITY` for uncapacitated arcs.
    pub capacity: f64,
    pub unit_cost: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowNetwork {
    nodes: usize,
    arcs: Vec<FlowArc>,
}

impl FlowNetwork {
    pub fn new(nodes: usize) -> Self {
        Self { nodes, arcs: Vec::new() }
    }

    pub fn with_capacity(nodes: usize, arcs: usize) -> Self {
        Self { nodes, arcs: Vec::with_capacity(arcs) }
    }

    pub fn add_arc(&mut self, tail: usize, head: usize, capacity: f64, unit_cost: f64) -> Result<usize> {
        if tail >= self.nodes || head >= self.nodes {
            return Err(Error::invalid(format!("arc ({tail}, {head}) outside node range 0..{}", self.nodes)));
        }
        if capacity.is_nan() || capacity < 0.0 {
            return Err(Error::invalid(format!("arc capacity must be nonnegative, got {capacity}")));
        }
        if !unit_cost.is_finite() || unit_cost < 0.0 {
            return Err(Error::invalid(format!("arc unit cost must be finite and nonnegative, got {unit_cost}")));
        }
        self.arcs.push(FlowArc { tail, head, capacity, unit_cost });
        Ok(self.arcs.len() - 1)
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn arcs(&self) -> &[FlowArc] {
        &self.arcs
    }

    pub fn arc_count(&self) -> usize {
        self.arcs.len()
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct FlowResult {
    pub value: f64,
    /// Flow per arc, indexed like [`FlowNetwork::arcs`].
    pub flow: Vec<f64>,
    pub total_cost: f64,
}

impl FlowResult {
    fn zero(arcs: usize) -> Self {
        Self { value: 0.0, flow: vec![0.0; arcs], total_cost: 0.0 }
    }

    /// Largest violation of conservation, capacity and cost consistency.
    pub fn violation(&self, net: &FlowNetwork, source: usize, sink: usize) -> f64 {
        let mut balance = vec![0.0; net.node_count()];
        let mut worst: f64 = 0.0;
        let mut cost = 0.0;
        for (a, &f) in net.arcs().iter().zip(&self.flow) {
            balance[a.tail] -= f;
            balance[a.head] += f;
            worst = worst.max(-f).max(f - a.capacity);
            cost += a.unit_cost * f;
        }
        for (v, b) in balance.iter().enumerate() {
            let expected = if source == sink {
                0.0
            } else if v == source {
                -self.value
            } else if v == sink {
                self.value
            } else {
                0.0
            };
            worst = worst.max((b - expected).abs());
        }
        worst.max((cost - self.total_cost).abs())
    }
}

struct Residual {
    head: Vec<usize>,
    cap: Vec<f64>,
    cost: Vec<f64>,
    /// Residual arcs leaving `v` are `adj[start[v]..start[v + 1]]`.
    start: Vec<usize>,
    adj: Vec<usize>,
}

impl Residual {
    fn new(net: &FlowNetwork) -> Self {
        let m = net.arc_count();
        let n = net.node_count();
        let mut head = Vec::with_capacity(2 * m);
        let mut cap = Vec::with_capacity(2 * m);
        let mut cost = Vec::with_capacity(2 * m);
        let mut start = vec![0usize; n + 1];
        for a in net.arcs() {
            head.push(a.head);
            cap.push(a.capacity);
            cost.push(a.unit_cost);
            head.push(a.tail);
            cap.push(0.0);
            cost.push(-a.unit_cost);
            start[a.tail + 1] += 1;
            start[a.head + 1] += 1;
        }
        for v in 0..n {
            start[v + 1] += start[v];
        }
        let mut fill = start.clone();
        let mut adj = vec![0usize; 2 * m];
        for (i, a) in net.arcs().iter().enumerate() {
            adj[fill[a.tail]] = 2 * i;
            fill[a.tail] += 1;
            adj[fill[a.head]] = 2 * i + 1;
            fill[a.head] += 1;
        }
        Residual { head, cap, cost, start, adj }
    }

    fn out(&self, v: usize) -> &[usize] {
        &self.adj[self.start[v]..self.start[v + 1]]
    }
}

/// One augmentation: residual arcs of the path and the amount sent.
struct Augmentation {
    arcs: Vec<usize>,
    amount: f64,
}

/// Flow made of the augmentations up to `value` units.
fn replay(net: &FlowNetwork, augmentations: &[Augmentation], value: f64) -> FlowResult {
    let mut flow = vec![0.0; net.arc_count()];
    let mut sent = 0.0;
    for aug in augmentations {
        let amount = aug.amount.min(value - sent);
        if amount <= 0.0 {
            break;
        }
        for &ra in &aug.arcs {
            if ra % 2 == 0 {
                flow[ra / 2] += amount;
            } else {
                flow[ra / 2] -= amount;
            }
        }
        sent += amount;
    }
    for f in &mut flow {
        *f = f.max(0.0);
    }
    let total_cost = net.arcs().iter().zip(&flow).map(|(a, f)| a.unit_cost * f).sum();
    FlowResult { value, flow, total_cost }
}

/// Successive shortest augmenting paths with node potentials. Stops at
/// `max_value` units, when `budget` (if any) on total cost is exhausted, or
/// when the sink becomes unreachable. Augmentations follow nondecreasing
/// path cost, so every prefix of the run is itself a min-cost flow.
fn successive_shortest_paths(
    net: &FlowNetwork,
    source: usize,
    sink: usize,
    max_value: f64,
    budget: Option<f64>,
) -> FlowResult {
    ssp_recorded(net, source, sink, max_value, budget, None)
}

fn ssp_recorded(
    net: &FlowNetwork,
    source: usize,
    sink: usize,
    max_value: f64,
    budget: Option<f64>,
    mut record: Option<&mut Vec<Augmentation>>,
) -> FlowResult {
    let m = net.arc_count();
    let n = net.node_count();
    if source == sink {
        let value = if max_value.is_finite() { max_value } else { f64::INFINITY };
        return FlowResult { value, flow: vec![0.0; m], total_cost: 0.0 };
    }
    let mut res = Residual::new(net);
    let mut potential = vec![0.0; n];
    let mut dist = vec![f64::INFINITY; n];
    let mut pred = vec![usize::MAX; n];
    let mut value = 0.0;
    let mut cost = 0.0;
    let mut heap = BinaryHeap::new();

    while value < max_value {
        dist.fill(f64::INFINITY);
        pred.fill(usize::MAX);
        dist[source] = 0.0;
        heap.push(HeapEntry { key: 0.0, vertex: source });
        while let Some(HeapEntry { key, vertex }) = heap.pop() {
            if key > dist[vertex] {
                continue;
            }
            for &ra in res.out(vertex) {
                if res.cap[ra] <= RESIDUAL_EPS {
                    continue;
                }
                let to = res.head[ra];
                let reduced = (res.cost[ra] + potential[vertex] - potential[to]).max(0.0);
                let cand = key + reduced;
                if cand < dist[to] {
                    dist[to] = cand;
                    pred[to] = ra;
                    heap.push(HeapEntry { key: cand, vertex: to });
                }
            }
        }
        if !dist[sink].is_finite() {
            break;
        }
        let mut bottleneck = f64::INFINITY;
        let mut path_cost = 0.0;
        let mut v = sink;
        while v != source {
            let ra = pred[v];
            bottleneck = bottleneck.min(res.cap[ra]);
            path_cost += res.cost[ra];
            v = res.head[ra ^ 1];
        }
        let path_cost = path_cost.max(0.0);
        let mut amount = bottleneck.min(max_value - value);
        let mut limited = amount < bottleneck;
        if let Some(b) = budget {
            if path_cost > 0.0 {
                let affordable = ((b - cost) / path_cost).max(0.0);
                if affordable < amount {
                    amount = affordable;
                    limited = true;
                }
            }
        }
        if !amount.is_finite() {
            // Unbounded zero-cost augmentation with no target.
            return FlowResult { value: f64::INFINITY, flow: vec![0.0; m], total_cost: cost };
        }
        if amount <= RESIDUAL_EPS {
            break;
        }
        let mut v = sink;
        let mut arcs = Vec::new();
        while v != source {
            let ra = pred[v];
            res.cap[ra] -= amount;
            res.cap[ra ^ 1] += amount;
            if record.is_some() {
                arcs.push(ra);
            }
            v = res.head[ra ^ 1];
        }
        if let Some(rec) = record.as_deref_mut() {
            rec.push(Augmentation { arcs, amount });
        }
        value += amount;
        cost += amount * path_cost;
        let cap = dist[sink];
        for (p, d) in potential.iter_mut().zip(&dist) {
            *p += d.min(cap);
        }
        if limited {
            break;
        }
    }

    let flow: Vec<f64> = (0..m).map(|i| res.cap[2 * i + 1].max(0.0)).collect();
    let total_cost = net.arcs().iter().zip(&flow).map(|(a, f)| a.unit_cost * f).sum();
    FlowResult { value, flow, total_cost }
}

/// A flow of exactly `target` units of minimum total cost.
pub fn min_cost_flow(net: &FlowNetwork, source: usize, sink: usize, target: f64) -> Result<FlowResult> {
    if !(target >= 0.0) || !target.is_finite() {
        return Err(Error::invalid(format!("flow target must be finite and nonnegative, got {target}")));
    }
    if source >= net.node_count() || sink >= net.node_count() {
        return Err(Error::invalid("source or sink outside the network"));
    }
    if target == 0.0 {
        return Ok(FlowResult::zero(net.arc_count()));
    }
    let mut result = successive_shortest_paths(net, source, sink, target, None);
    if result.value < target - FLOW_TOL {
        return Err(Error::Infeasible(format!("max flow {} is below target {target}", result.value)));
    }
    result.value = result.value.min(target);
    Ok(result)
}

/// Maximum flow value (may be infinite on uncapacitated paths).
pub fn max_flow(net: &FlowNetwork, source: usize, sink: usize) -> FlowResult {
    successive_shortest_paths(net, source, sink, f64::INFINITY, None)
}

/// Largest flow value in `[0, cap]` whose min cost stays within `budget`,
/// together with that flow.
pub fn max_flow_within_budget(net: &FlowNetwork, source: usize, sink: usize, cap: f64, budget: f64) -> FlowResult {
    successive_shortest_paths(net, source, sink, cap, Some(budget.max(0.0)))
}

/// One side of the auxiliary problem: a network with its terminal nodes.
#[derive(Clone, Debug)]
pub struct SideNetwork {
    pub net: FlowNetwork,
    pub source: usize,
    pub sink: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaSolution {
    pub delta: f64,
    pub up: FlowResult,
    pub down: FlowResult,
}

/// Largest `Δ ∈ [0, 1]` such that each side admits a flow of value `Δ` with
/// length cost at most `budget`; returns the two min-cost flows of value
/// `Δ`. The sides interact only through the shared `Δ`.
///
/// Each side's min cost is a convex piecewise-linear function of the flow
/// value, and successive shortest paths trace it breakpoint by breakpoint,
/// so the per-side maximum is read off one augmentation sequence.
pub fn max_delta(up: &SideNetwork, down: &SideNetwork, budget: f64) -> DeltaSolution {
    let budget = budget.max(0.0);
    let mut up_augs = Vec::new();
    let mut down_augs = Vec::new();
    let up_best = ssp_recorded(&up.net, up.source, up.sink, 1.0, Some(budget), Some(&mut up_augs));
    let down_best = ssp_recorded(&down.net, down.source, down.sink, 1.0, Some(budget), Some(&mut down_augs));
    let delta = up_best.value.min(down_best.value).clamp(0.0, 1.0);
    if delta <= RESIDUAL_EPS {
        return DeltaSolution {
            delta: 0.0,
            up: FlowResult::zero(up.net.arc_count()),
            down: FlowResult::zero(down.net.arc_count()),
        };
    }
    // Every prefix of the augmentation sequence is a min-cost flow.
    let trim = |side: &SideNetwork, best: FlowResult, augs: &[Augmentation]| {
        if best.value > delta {
            replay(&side.net, augs, delta)
        } else {
            best
        }
    };
    DeltaSolution { delta, up: trim(up, up_best, &up_augs), down: trim(down, down_best, &down_augs) }
}
