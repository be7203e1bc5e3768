//! Online fractional solver for the composite assignment LP.
//!
//! Every pair `i` picks roots fractionally (`z[i][r]`); each root `r` owns an
//! inner single-sink LP on the upward layered graph and a single-source LP on
//! the downward one, with edge capacities `x[r][e]` shared by all pairs routed
//! through `r`. On arrival, the pair's variables grow continuously: capacities
//! on tight edges grow exponentially at rate `1/c_e`, and flow and `z` grow at
//! the rate found by [`crate::flow::max_delta`].
//!
//! The process is integrated with steps that are exact for exponential
//! growth: within a step each root's incremental flow is scaled by
//! `exp(rho * t)` with `rho = min(Δ/z, 1/c_e over binding tight edges)`, which
//! keeps every intermediate point feasible for the auxiliary problem.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{max_delta, FlowNetwork, SideNetwork};
use crate::graph::{shortest_path, EdgeId, TwoMetricGraph, VertexId};
use crate::layering::{Direction, LayeredGraph};

/// Absolute slack below which `x <= f` counts as tight.
pub const TIGHT_EPS: f64 = 1e-9;
/// Relative slack below which an edge counts as tight. Without it, edges
/// whose flow tracks their capacity flip in and out of the tight set and
/// force vanishing steps.
pub const TIGHT_REL: f64 = 1e-2;
/// Slack edges that would saturate within this fraction of a full step are
/// capped as if tight.
const NEAR_TIGHT_FRACTION: f64 = 0.5;
/// Remaining coverage gap treated as satisfied.
const COVER_EPS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpConfig {
    /// Largest integration step.
    pub delta_max: f64,
    /// Overflow threshold on the rescaled LP objective.
    pub kappa: f64,
    pub iteration_cap: u64,
}

impl LpConfig {
    /// Defaults for a base graph with `n` vertices: `δ_max = 0.05`,
    /// `κ = 64 * ceil(log2 n)^3`, at most a million steps per arrival.
    pub fn for_vertices(n: usize) -> Self {
        Self { delta_max: 0.05, kappa: default_kappa(n), iteration_cap: 1_000_000 }
    }
}

pub fn default_kappa(n: usize) -> f64 {
    let lg = crate::layering::default_height(n.max(2)) as f64;
    64.0 * lg.powi(3)
}

/// The two layered graphs shared by every root.
#[derive(Clone, Debug)]
pub struct LayeredPair {
    pub up: LayeredGraph,
    pub down: LayeredGraph,
}

impl LayeredPair {
    pub fn build(g: &TwoMetricGraph, k: usize, h: usize) -> Result<Self> {
        Ok(Self { up: LayeredGraph::build(g, k, h, Direction::Up)?, down: LayeredGraph::build(g, k, h, Direction::Down)? })
    }

    pub fn base_vertex_count(&self) -> usize {
        self.up.base_vertex_count()
    }
}

/// Static data of one composite LP: layered graphs, the requests (on the
/// base graph) and optional per-pair penalties that add the discard root.
#[derive(Clone, Debug)]
pub struct CompositeProblem {
    pub layers: Arc<LayeredPair>,
    pub pairs: Vec<(VertexId, VertexId)>,
    pub penalties: Option<Vec<f64>>,
}

impl CompositeProblem {
    pub fn new(layers: Arc<LayeredPair>, pairs: Vec<(VertexId, VertexId)>) -> Self {
        Self { layers, pairs, penalties: None }
    }

    pub fn with_penalties(mut self, penalties: Vec<f64>) -> Result<Self> {
        if penalties.len() != self.pairs.len() {
            return Err(Error::invalid("one penalty per pair required"));
        }
        if let Some(q) = penalties.iter().find(|q| !(**q >= 0.0)) {
            return Err(Error::invalid(format!("penalty must be nonnegative, got {q}")));
        }
        self.penalties = Some(penalties);
        Ok(self)
    }

    pub fn base_vertex_count(&self) -> usize {
        self.layers.base_vertex_count()
    }

    /// Number of root slots: every base vertex, plus the discard root.
    pub fn slot_count(&self) -> usize {
        self.base_vertex_count() + usize::from(self.penalties.is_some())
    }

    pub fn virtual_slot(&self) -> Option<usize> {
        self.penalties.as_ref().map(|_| self.base_vertex_count())
    }
}

/// Current guess of the optimum and the epoch it belongs to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuessState {
    pub lambda: f64,
    pub epoch: u32,
    pub kappa: f64,
}

impl GuessState {
    pub fn new(lambda: f64, kappa: f64) -> Self {
        Self { lambda, epoch: 0, kappa }
    }

    pub fn double(&mut self) {
        self.lambda *= 2.0;
        self.epoch += 1;
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Side {
    Up,
    Down,
}

#[derive(Clone, Debug)]
struct Topology {
    nodes: usize,
    keys: Vec<usize>,
    tail: Vec<usize>,
    head: Vec<usize>,
    cost: Vec<f64>,
    length: Vec<f64>,
}

impl Topology {
    fn from_layered(lg: &LayeredGraph, offset: usize, alive: &[bool], lambda: f64) -> Self {
        let g = lg.as_graph();
        let mut t = Topology {
            nodes: g.vertex_count(),
            keys: Vec::new(),
            tail: Vec::new(),
            head: Vec::new(),
            cost: Vec::new(),
            length: Vec::new(),
        };
        for e in g.edges() {
            if !alive[offset + e.id] {
                continue;
            }
            t.keys.push(offset + e.id);
            t.tail.push(e.tail);
            t.head.push(e.head);
            t.cost.push(e.cost / lambda);
            t.length.push(e.length / lambda);
        }
        t
    }

    fn single_arc(key: usize, length: f64) -> Self {
        Topology { nodes: 2, keys: vec![key], tail: vec![0], head: vec![1], cost: vec![0.0], length: vec![length] }
    }
}

/// How a pair's arrival ended.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ArrivalOutcome {
    Satisfied { steps: u64 },
    /// The LP objective reached `κ` (in units of the guess) first.
    EpochOverflow { steps: u64 },
    /// No root is reachable from the source and reaches the sink.
    NoRoots,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub arrival: usize,
    pub pair: usize,
    pub steps: u64,
    pub z_total: f64,
    pub lp_obj: f64,
    pub epoch: u32,
    pub lambda: f64,
}

/// Worst observed violation of each structural invariant.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InvariantReport {
    pub conservation: f64,
    pub capacity: f64,
    pub range: f64,
    /// Smallest `Σ_r z[i][r]` over satisfied pairs (1 when there are none).
    pub min_coverage: f64,
}

impl InvariantReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.conservation <= tol && self.capacity <= tol && self.range <= tol && self.min_coverage >= 1.0 - tol
    }
}

/// Values of all LP variables, used to check monotone growth.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    x: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    flows: Vec<Vec<Option<Vec<f64>>>>,
}

struct SlotStep {
    slot: usize,
    delta: f64,
    rho: f64,
    /// (key, rate) of the incremental flow on both sides.
    rates: Vec<(usize, f64)>,
    /// (key, cost) of tight keys that grow.
    tight: Vec<(usize, f64)>,
}

/// Time for flow growing at `g * exp(rho * t)` to use up `slack`.
fn hit_time(rho: f64, slack: f64, g: f64) -> f64 {
    if rho > 0.0 {
        (rho * slack / g).ln_1p() / rho
    } else {
        slack / g
    }
}

fn growth_factor(rho: f64, t: f64) -> f64 {
    if rho * t < 1e-12 {
        t
    } else {
        (rho * t).exp_m1() / rho
    }
}

/// The evolving fractional solution of one epoch.
#[derive(Clone, Debug)]
pub struct FractionalState {
    problem: Arc<CompositeProblem>,
    config: LpConfig,
    lambda: f64,
    init: f64,
    real_keys: usize,
    up_offset: usize,
    alive: Vec<bool>,
    up_topo: Topology,
    down_topo: Topology,
    /// `x[slot][key]`.
    x: Vec<Vec<f64>>,
    /// `z[pair][slot]`.
    z: Vec<Vec<f64>>,
    /// `flows[pair][slot][key]`, allocated for eligible roots only.
    flows: Vec<Vec<Option<Vec<f64>>>>,
    eligible: Vec<Option<Vec<usize>>>,
    satisfied: Vec<bool>,
    objective: f64,
    trace: Vec<TraceRow>,
    arrivals: usize,
}

impl FractionalState {
    /// Fresh state for guess `lambda`: parameters are divided by `lambda`,
    /// edges whose rescaled cost or length exceeds 1 are dropped, and every
    /// remaining capacity starts at `1/n^5`.
    pub fn epoch_init(problem: Arc<CompositeProblem>, lambda: f64, config: LpConfig) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!("guess must be positive, got {lambda}")));
        }
        let n = problem.base_vertex_count();
        let init = (n.max(1) as f64).powi(-5);
        let up_edges = problem.layers.up.edges();
        let down_edges = problem.layers.down.edges();
        let up_offset = up_edges.len();
        let real_keys = up_edges.len() + down_edges.len();
        let keep = |c: f64, l: f64| c / lambda <= 1.0 && l / lambda <= 1.0;
        let alive: Vec<bool> = up_edges.iter().chain(down_edges).map(|e| keep(e.cost, e.length)).collect();
        let up_topo = Topology::from_layered(&problem.layers.up, 0, &alive, lambda);
        let down_topo = Topology::from_layered(&problem.layers.down, up_offset, &alive, lambda);
        let k = problem.pairs.len();
        let mut x = Vec::with_capacity(problem.slot_count());
        let mut objective = 0.0;
        let real_costs: Vec<f64> = up_edges.iter().chain(down_edges).map(|e| e.cost / lambda).collect();
        for _ in 0..n {
            let row: Vec<f64> = alive.iter().map(|&a| if a { init } else { 0.0 }).collect();
            objective += row.iter().zip(&real_costs).map(|(x, c)| x * c).sum::<f64>();
            x.push(row);
        }
        if let Some(q) = &problem.penalties {
            // Penalty arcs cost nothing to buy; only their length matters.
            let row = (0..2 * k).map(|key| if keep(0.0, q[key / 2] / 2.0) { init } else { 0.0 }).collect();
            x.push(row);
        }
        let slots = problem.slot_count();
        Ok(Self {
            config,
            lambda,
            init,
            real_keys,
            up_offset,
            alive,
            up_topo,
            down_topo,
            x,
            z: vec![vec![0.0; slots]; k],
            flows: vec![vec![None; slots]; k],
            eligible: vec![None; k],
            satisfied: vec![false; k],
            objective,
            trace: Vec::new(),
            arrivals: 0,
            problem,
        })
    }

    pub fn problem(&self) -> &CompositeProblem {
        &self.problem
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn initial_value(&self) -> f64 {
        self.init
    }

    pub fn slot_count(&self) -> usize {
        self.problem.slot_count()
    }

    pub fn is_virtual(&self, slot: usize) -> bool {
        self.problem.virtual_slot() == Some(slot)
    }

    /// Number of edge keys in slot `slot` (up keys first, then down keys).
    pub fn key_count(&self, slot: usize) -> usize {
        self.x[slot].len()
    }

    /// Whether layered edge `key` of a real root survived pruning.
    pub fn is_alive(&self, key: usize) -> bool {
        self.alive[key]
    }

    /// Keys below this belong to the upward graph.
    pub fn up_key_count(&self) -> usize {
        self.up_offset
    }

    pub fn real_key_count(&self) -> usize {
        self.real_keys
    }

    pub fn x(&self, slot: usize, key: usize) -> f64 {
        self.x[slot][key]
    }

    pub fn z(&self, pair: usize, slot: usize) -> f64 {
        self.z[pair][slot]
    }

    pub fn z_row(&self, pair: usize) -> &[f64] {
        &self.z[pair]
    }

    pub fn flow(&self, slot: usize, pair: usize, key: usize) -> f64 {
        self.flows[pair][slot].as_ref().map_or(0.0, |f| f[key])
    }

    pub fn flows(&self, slot: usize, pair: usize) -> Option<&[f64]> {
        self.flows[pair][slot].as_deref()
    }

    pub fn eligible_roots(&self, pair: usize) -> Option<&[usize]> {
        self.eligible[pair].as_deref()
    }

    pub fn is_satisfied(&self, pair: usize) -> bool {
        self.satisfied[pair]
    }

    pub fn coverage(&self, pair: usize) -> f64 {
        self.z[pair].iter().sum()
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    /// Objective in units of the guess (running total kept in step with
    /// every update; see [`Self::lp_objective`] for a full recomputation).
    pub fn running_objective(&self) -> f64 {
        self.objective
    }

    fn topology(&self, slot: usize, pair: usize, side: Side) -> (std::borrow::Cow<'_, Topology>, usize, usize) {
        let (s, t) = self.problem.pairs[pair];
        if self.is_virtual(slot) {
            let q = self.problem.penalties.as_ref().expect("virtual slot implies penalties")[pair];
            let key = 2 * pair + usize::from(side == Side::Down);
            return (std::borrow::Cow::Owned(Topology::single_arc(key, q / 2.0 / self.lambda)), 0, 1);
        }
        let layers = &self.problem.layers;
        match side {
            Side::Up => (std::borrow::Cow::Borrowed(&self.up_topo), layers.up.terminal(s), layers.up.root(slot)),
            Side::Down => (std::borrow::Cow::Borrowed(&self.down_topo), layers.down.root(slot), layers.down.terminal(t)),
        }
    }

    /// Network of one side for `(slot, pair)` with the given capacities.
    pub(crate) fn side_network<F>(&self, slot: usize, pair: usize, side: Side, capacity: F) -> (SideNetwork, Vec<usize>)
    where
        F: Fn(usize, f64) -> f64,
    {
        let (topo, source, sink) = self.topology(slot, pair, side);
        let mut net = FlowNetwork::with_capacity(topo.nodes, topo.keys.len());
        for i in 0..topo.keys.len() {
            let key = topo.keys[i];
            if !self.key_alive(slot, key) {
                continue;
            }
            net.add_arc(topo.tail[i], topo.head[i], capacity(key, topo.cost[i]), topo.length[i])
                .expect("topology arcs are valid");
        }
        let keys = topo.keys.iter().copied().filter(|&k| self.key_alive(slot, k)).collect();
        (SideNetwork { net, source, sink }, keys)
    }

    fn key_alive(&self, slot: usize, key: usize) -> bool {
        if self.is_virtual(slot) {
            self.x[slot][key] > 0.0
        } else {
            self.alive[key]
        }
    }

    fn key_weights(&self, slot: usize, pair: usize, key: usize) -> (f64, f64) {
        if self.is_virtual(slot) {
            let q = self.problem.penalties.as_ref().expect("virtual slot implies penalties")[pair];
            (0.0, q / 2.0 / self.lambda)
        } else if key < self.up_offset {
            let e = self.problem.layers.up.edge(key);
            (e.cost / self.lambda, e.length / self.lambda)
        } else {
            let e = self.problem.layers.down.edge(key - self.up_offset);
            (e.cost / self.lambda, e.length / self.lambda)
        }
    }

    /// Determines the eligible roots of `pair` and seeds each with `1/n^5`
    /// units of flow on a fewest-hop path per side and `z = 1/n^5`.
    pub fn arrival_init(&mut self, pair: usize) -> Result<Vec<usize>> {
        if pair >= self.problem.pairs.len() {
            return Err(Error::invalid(format!("pair {pair} out of range")));
        }
        if self.eligible[pair].is_some() {
            return Err(Error::invalid(format!("pair {pair} already arrived in this epoch")));
        }
        let (s, t) = self.problem.pairs[pair];
        let layers = Arc::clone(&self.problem.layers);
        let up_g = layers.up.as_graph();
        let down_g = layers.down.as_graph();
        let up_reach = reachable(up_g, layers.up.terminal(s), &self.alive[..self.up_offset], false);
        let down_reach = reachable(down_g, layers.down.terminal(t), &self.alive[self.up_offset..], true);
        let mut roots: Vec<usize> = (0..self.problem.base_vertex_count())
            .filter(|&r| up_reach[layers.up.root(r)] && down_reach[layers.down.root(r)])
            .collect();
        if let Some(v) = self.problem.virtual_slot() {
            if self.x[v][2 * pair] > 0.0 {
                roots.push(v);
            }
        }
        for &slot in &roots {
            let mut f = vec![0.0; self.key_count(slot)];
            if self.is_virtual(slot) {
                f[2 * pair] = self.init;
                f[2 * pair + 1] = self.init;
            } else {
                let up_alive = &self.alive[..self.up_offset];
                let hop = |e: &crate::graph::Edge| if up_alive[e.id] { 1.0 } else { f64::INFINITY };
                let p = shortest_path(up_g, hop, layers.up.terminal(s), layers.up.root(slot))?;
                for e in p.edges {
                    f[e] += self.init;
                }
                let down_alive = &self.alive[self.up_offset..];
                let hop = |e: &crate::graph::Edge| if down_alive[e.id] { 1.0 } else { f64::INFINITY };
                let p = shortest_path(down_g, hop, layers.down.root(slot), layers.down.terminal(t))?;
                for e in p.edges {
                    f[self.up_offset + e] += self.init;
                }
            }
            for (key, &v) in f.iter().enumerate() {
                if v > 0.0 {
                    self.objective += v * self.key_weights(slot, pair, key).1;
                }
            }
            self.flows[pair][slot] = Some(f);
            self.z[pair][slot] = self.init;
        }
        self.eligible[pair] = Some(roots.clone());
        Ok(roots)
    }

    /// Keys of `slot` that are tight for `pair`.
    pub fn tight_edges(&self, pair: usize, slot: usize) -> Vec<usize> {
        let Some(f) = self.flows[pair][slot].as_ref() else { return Vec::new() };
        let x = &self.x[slot];
        f.iter()
            .enumerate()
            .filter(|&(key, &fv)| fv > 0.0 && x[key] - fv <= TIGHT_EPS + TIGHT_REL * x[key])
            .map(|(key, _)| key)
            .collect()
    }

    /// Rates for one root. Slack edges that the new flow would saturate
    /// within `horizon` are treated as tight right away.
    fn plan_slot(&self, pair: usize, slot: usize, horizon: f64) -> SlotStep {
        let mut is_tight = vec![false; self.key_count(slot)];
        for k in self.tight_edges(pair, slot) {
            is_tight[k] = true;
        }
        let x = &self.x[slot];
        let f = self.flows[pair][slot].as_ref().expect("eligible slot has flows");
        let z = self.z[pair][slot];
        let mut rounds = 0;
        loop {
            let capacity = |key: usize, cost: f64| {
                if is_tight[key] && cost > 0.0 {
                    x[key] / cost
                } else {
                    f64::INFINITY
                }
            };
            let (up, up_keys) = self.side_network(slot, pair, Side::Up, capacity);
            let (down, down_keys) = self.side_network(slot, pair, Side::Down, capacity);
            let sol = max_delta(&up, &down, z);
            let mut rates = Vec::new();
            for (keys, flow) in [(&up_keys, &sol.up.flow), (&down_keys, &sol.down.flow)] {
                for (&key, &g) in keys.iter().zip(flow) {
                    if g > 0.0 {
                        rates.push((key, g));
                    }
                }
            }
            let mut rho = if z > 0.0 { sol.delta / z } else { 0.0 };
            for &(key, g) in &rates {
                if is_tight[key] {
                    let (c, _) = self.key_weights(slot, pair, key);
                    if c > 0.0 && g > 0.0 {
                        rho = rho.min(1.0 / c);
                    }
                }
            }
            rounds += 1;
            let mut grew = false;
            if rounds < 8 {
                for &(key, g) in &rates {
                    if !is_tight[key] && hit_time(rho, (x[key] - f[key]).max(0.0), g) < horizon {
                        is_tight[key] = true;
                        grew = true;
                    }
                }
            }
            if !grew {
                let tight = (0..is_tight.len())
                    .filter(|&k| is_tight[k])
                    .map(|k| (k, self.key_weights(slot, pair, k).0))
                    .collect();
                return SlotStep { slot, delta: sol.delta, rho, rates, tight };
            }
        }
    }

    fn projected_objective(&self, pair: usize, plans: &[SlotStep], t: f64) -> f64 {
        let mut obj = self.objective;
        for p in plans {
            let x = &self.x[p.slot];
            for &(key, c) in &p.tight {
                if c > 0.0 {
                    obj += c * ((x[key] * (t / c).exp()).min(1.0) - x[key]);
                }
            }
            let e = growth_factor(p.rho, t);
            for &(key, g) in &p.rates {
                obj += self.key_weights(p.slot, pair, key).1 * g * e;
            }
        }
        obj
    }

    /// Advances the continuous process for `pair` by at most `dt_max` time
    /// units. Returns the time actually advanced.
    pub fn growth_step(&mut self, pair: usize, dt_max: f64) -> Result<f64> {
        let roots = self.eligible[pair]
            .clone()
            .ok_or_else(|| Error::invalid(format!("pair {pair} has not arrived")))?;
        let horizon = NEAR_TIGHT_FRACTION * dt_max;
        let plans: Vec<SlotStep> = roots.iter().map(|&slot| self.plan_slot(pair, slot, horizon)).collect();
        let mut dt = dt_max;

        // Stop when a slack edge carrying new flow would become tight.
        for p in &plans {
            let f = self.flows[pair][p.slot].as_ref().expect("eligible slot has flows");
            let x = &self.x[p.slot];
            let tight: std::collections::BTreeSet<usize> = p.tight.iter().map(|&(k, _)| k).collect();
            for &(key, g) in &p.rates {
                if tight.contains(&key) {
                    continue;
                }
                dt = dt.min(hit_time(p.rho, (x[key] - f[key]).max(0.0), g));
            }
        }

        // Do not overshoot full coverage.
        let gap = 1.0 - self.coverage(pair);
        let added = |t: f64| plans.iter().map(|p| p.delta * growth_factor(p.rho, t)).sum::<f64>();
        if added(dt) > gap {
            dt = bisect_largest(0.0, dt, |t| added(t) <= gap);
        }

        if self.config.kappa.is_finite() && self.projected_objective(pair, &plans, dt) > self.config.kappa {
            let kappa = self.config.kappa;
            dt = bisect_largest(0.0, dt, |t| self.projected_objective(pair, &plans, t) <= kappa);
        }

        for p in &plans {
            let e = growth_factor(p.rho, dt);
            for &(key, c) in &p.tight {
                let old = self.x[p.slot][key];
                let new = if c > 0.0 { (old * (dt / c).exp()).min(1.0) } else { 1.0 };
                let new = new.max(old);
                self.x[p.slot][key] = new;
                self.objective += c * (new - old);
            }
            for &(key, g) in &p.rates {
                let inc = g * e;
                let l = self.key_weights(p.slot, pair, key).1;
                self.flows[pair][p.slot].as_mut().expect("eligible slot has flows")[key] += inc;
                self.objective += l * inc;
            }
            self.z[pair][p.slot] += p.delta * e;
        }
        Ok(dt)
    }

    /// Runs the growth process for an arrived pair until its roots cover it.
    pub fn on_arrival(&mut self, pair: usize) -> Result<ArrivalOutcome> {
        let roots = self.eligible[pair]
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("pair {pair} has not arrived")))?;
        if roots.is_empty() {
            return Ok(ArrivalOutcome::NoRoots);
        }
        let mut steps = 0u64;
        let outcome = loop {
            if 1.0 - self.coverage(pair) <= COVER_EPS {
                self.satisfied[pair] = true;
                break ArrivalOutcome::Satisfied { steps };
            }
            if self.objective >= self.config.kappa {
                break ArrivalOutcome::EpochOverflow { steps };
            }
            if steps >= self.config.iteration_cap {
                return Err(Error::IterationCap(self.config.iteration_cap));
            }
            self.growth_step(pair, self.config.delta_max)?;
            steps += 1;
        };
        Ok(outcome)
    }

    /// `arrival_init` followed by `on_arrival`, with a trace row.
    pub fn process(&mut self, pair: usize, epoch: u32) -> Result<ArrivalOutcome> {
        self.arrival_init(pair)?;
        let outcome = self.on_arrival(pair)?;
        let steps = match outcome {
            ArrivalOutcome::Satisfied { steps } | ArrivalOutcome::EpochOverflow { steps } => steps,
            ArrivalOutcome::NoRoots => 0,
        };
        self.trace.push(TraceRow {
            arrival: self.arrivals,
            pair,
            steps,
            z_total: self.coverage(pair),
            lp_obj: self.objective * self.lambda,
            epoch,
            lambda: self.lambda,
        });
        self.arrivals += 1;
        Ok(outcome)
    }

    /// Full evaluation of the composite objective, in units of the guess.
    pub fn lp_objective(&self) -> f64 {
        let mut total = 0.0;
        for slot in 0..self.slot_count() {
            for key in 0..self.key_count(slot) {
                if !self.key_alive(slot, key) {
                    continue;
                }
                let pair_of_key = if self.is_virtual(slot) { key / 2 } else { 0 };
                let (c, _) = self.key_weights(slot, pair_of_key, key);
                total += c * self.x[slot][key];
            }
        }
        for pair in 0..self.problem.pairs.len() {
            for slot in 0..self.slot_count() {
                if let Some(f) = &self.flows[pair][slot] {
                    for (key, &v) in f.iter().enumerate() {
                        if v > 0.0 {
                            total += self.key_weights(slot, pair, key).1 * v;
                        }
                    }
                }
            }
        }
        total
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot { x: self.x.clone(), z: self.z.clone(), flows: self.flows.clone() }
    }

    /// True when every variable is at least its value in `earlier`.
    pub fn dominates(&self, earlier: &Snapshot) -> bool {
        let ge = |a: &[f64], b: &[f64]| a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x >= y);
        self.x.iter().zip(&earlier.x).all(|(a, b)| ge(a, b))
            && self.z.iter().zip(&earlier.z).all(|(a, b)| ge(a, b))
            && self.flows.iter().zip(&earlier.flows).all(|(a, b)| {
                a.iter().zip(b).all(|(fa, fb)| match (fa, fb) {
                    (_, None) => true,
                    (Some(fa), Some(fb)) => ge(fa, fb),
                    (None, Some(_)) => false,
                })
            })
    }

    /// Measures capacity, conservation, range and coverage violations.
    pub fn check_invariants(&self) -> InvariantReport {
        let mut report = InvariantReport { min_coverage: 1.0, ..Default::default() };
        for row in &self.x {
            for &v in row {
                report.range = report.range.max(-v).max(v - 1.0);
            }
        }
        for (pair, slots) in self.flows.iter().enumerate() {
            if self.satisfied[pair] {
                report.min_coverage = report.min_coverage.min(self.coverage(pair));
            }
            for (slot, f) in slots.iter().enumerate() {
                let Some(f) = f else { continue };
                let z = self.z[pair][slot];
                report.range = report.range.max(-z).max(z - 1.0);
                for (key, &v) in f.iter().enumerate() {
                    report.range = report.range.max(-v).max(v - 1.0);
                    report.capacity = report.capacity.max(v - self.x[slot][key]);
                }
                for side in [Side::Up, Side::Down] {
                    let (topo, source, sink) = self.topology(slot, pair, side);
                    let mut balance = vec![0.0; topo.nodes];
                    for i in 0..topo.keys.len() {
                        let v = f[topo.keys[i]];
                        balance[topo.tail[i]] -= v;
                        balance[topo.head[i]] += v;
                    }
                    balance[source] += z;
                    balance[sink] -= z;
                    for b in balance {
                        report.conservation = report.conservation.max(b.abs());
                    }
                }
            }
        }
        report
    }
}

/// Vertices reachable from `start` (or reaching it when `backward`) along
/// alive edges.
fn reachable(g: &TwoMetricGraph, start: VertexId, alive: &[bool], backward: bool) -> Vec<bool> {
    let mut seen = vec![false; g.vertex_count()];
    seen[start] = true;
    let mut stack = vec![start];
    while let Some(v) = stack.pop() {
        let adj: &[EdgeId] = if backward { g.in_edges(v) } else { g.out_edges(v) };
        for &e in adj {
            if !alive[e] {
                continue;
            }
            let edge = g.edge(e);
            let next = if backward { edge.tail } else { edge.head };
            if !seen[next] {
                seen[next] = true;
                stack.push(next);
            }
        }
    }
    seen
}

/// Largest `t` in `[lo, hi]` with `ok(t)`, assuming `ok` is monotone and
/// `ok(lo)` holds.
fn bisect_largest<F: Fn(f64) -> bool>(mut lo: f64, mut hi: f64, ok: F) -> f64 {
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[cfg(test)]
mod tests {
    use super::*;

    /// A path `0 -> 1 -> ... -> n-1` with free buying and unit-free lengths.
    fn path_graph(n: usize, lengths: &[f64]) -> TwoMetricGraph {
        let mut g = TwoMetricGraph::directed(n);
        for (i, &l) in lengths.iter().enumerate() {
            g.add_edge(i, i + 1, 0.0, l).unwrap();
        }
        g
    }

    fn state_for(g: &TwoMetricGraph, pairs: Vec<(usize, usize)>, h: usize, lambda: f64) -> FractionalState {
        let layers = Arc::new(LayeredPair::build(g, pairs.len(), h).unwrap());
        let problem = Arc::new(CompositeProblem::new(layers, pairs));
        let mut config = LpConfig::for_vertices(g.vertex_count());
        config.kappa = f64::INFINITY;
        FractionalState::epoch_init(problem, lambda, config).unwrap()
    }

    #[test]
    fn init_value_is_inverse_fifth_power() {
        let mut g = TwoMetricGraph::directed(10);
        for v in 0..9 {
            g.add_edge(v, v + 1, 1.0, 1.0).unwrap();
        }
        let st = state_for(&g, vec![(0, 9)], 2, 100.0);
        assert!((st.initial_value() - 1e-5).abs() < 1e-20);
        for key in 0..st.key_count(0) {
            if st.is_alive(key) {
                assert_eq!(st.x(0, key), 1e-5);
            }
        }
    }

    #[test]
    fn expensive_edges_are_pruned() {
        let mut g = TwoMetricGraph::directed(2);
        g.add_edge(0, 1, 3.0, 0.0).unwrap();
        let st = state_for(&g, vec![(0, 1)], 1, 1.0);
        let up = st.problem().layers.up.edges();
        let pruned = up.iter().position(|e| e.from.0 == 0 && e.to.0 == 1).unwrap();
        assert!(!st.is_alive(pruned));
        let stay = up.iter().position(|e| e.from.0 == 0 && e.to.0 == 0).unwrap();
        assert!(st.is_alive(stay));
    }

    #[test]
    fn initial_objective_is_tiny() {
        let mut g = TwoMetricGraph::directed(10);
        for v in 0..10 {
            g.add_edge(v, (v + 1) % 10, 0.5, 0.5).unwrap();
        }
        let st = state_for(&g, vec![(0, 5)], 3, 10.0);
        let vars = st.slot_count() * st.real_key_count();
        assert!(st.lp_objective() <= vars as f64 * st.initial_value());
        assert!(st.lp_objective() < 1.0);
        assert!((st.lp_objective() - st.running_objective()).abs() < 1e-12);
    }

    #[test]
    fn eligible_roots_follow_reachability() {
        // 0 -> 1 -> 2 and isolated 3.
        let mut g = TwoMetricGraph::directed(4);
        g.add_edge(0, 1, 0.1, 0.1).unwrap();
        g.add_edge(1, 2, 0.1, 0.1).unwrap();
        let mut st = state_for(&g, vec![(0, 2)], 2, 1.0);
        let roots = st.arrival_init(0).unwrap();
        assert_eq!(roots, vec![0, 1, 2]);
        for r in roots {
            assert!((st.z(0, r) - 4f64.powi(-5)).abs() < 1e-18);
        }
        assert_eq!(st.z(0, 3), 0.0);
        assert!(st.arrival_init(0).is_err());
    }

    #[test]
    fn strongly_connected_graph_makes_every_root_eligible() {
        let mut g = TwoMetricGraph::undirected(4);
        for v in 0..4 {
            g.add_edge(v, (v + 1) % 4, 0.1, 0.1).unwrap();
        }
        let mut st = state_for(&g, vec![(0, 2)], 2, 10.0);
        assert_eq!(st.arrival_init(0).unwrap(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn tight_edge_classification() {
        let mut g = TwoMetricGraph::directed(2);
        g.add_edge(0, 1, 1.0, 0.0).unwrap();
        let mut st = state_for(&g, vec![(0, 1)], 1, 10.0);
        st.arrival_init(0).unwrap();
        let tight = st.tight_edges(0, 1);
        assert!(!tight.is_empty());
        // Raise x above the flow on every key: nothing is tight.
        for v in st.x[1].iter_mut() {
            *v = 0.5;
        }
        assert!(st.tight_edges(0, 1).is_empty());
        // Sink side only.
        let f = st.flows[0][1].as_mut().unwrap();
        let down_key = (st.up_offset..f.len()).find(|&k| f[k] > 0.0).unwrap();
        f[down_key] = 0.5;
        assert_eq!(st.tight_edges(0, 1), vec![down_key]);
    }

    #[test]
    fn tight_edge_grows_exponentially() {
        // One real arc with c = 1 at guess 1: after ln 2 time x doubles.
        let mut g = TwoMetricGraph::directed(2);
        g.add_edge(0, 1, 1.0, 0.0).unwrap();
        let mut st = state_for(&g, vec![(0, 1)], 1, 1.0);
        st.arrival_init(0).unwrap();
        let key = st.tight_edges(0, 0).into_iter().find(|&k| st.key_weights(0, 0, k).0 == 1.0).unwrap();
        st.x[0][key] = 0.1;
        st.flows[0][0].as_mut().unwrap()[key] = 0.1;
        let before = st.x(0, key);
        let dt = 2f64.ln();
        // Freeze coverage so the gap does not cut the step short.
        let saved = std::mem::replace(&mut st.eligible[0], Some(vec![0]));
        st.z[0][0] = 0.0;
        st.growth_step(0, dt).unwrap();
        st.eligible[0] = saved;
        assert!((st.x(0, key) - 2.0 * before).abs() < 1e-12);
    }

    #[test]
    fn single_path_matches_exponential_closed_form() {
        // c = 0 everywhere, so no capacity ever binds; dz/dt = z / L.
        let g = path_graph(3, &[0.3, 0.5]);
        let mut st = state_for(&g, vec![(0, 2)], 1, 1.0);
        let roots = st.arrival_init(0).unwrap();
        assert_eq!(roots, vec![0, 1, 2]);
        let z0 = st.initial_value();
        let mut t = 0.0;
        while st.coverage(0) < 1.0 - 1e-10 {
            t += st.growth_step(0, 0.05).unwrap();
            // Root 2: up path length 0.8 (+0 down); root 0: 0 up, 0.8 down.
            let expect = z0 * (t / 0.8).exp();
            assert!((st.z(0, 2) / expect - 1.0).abs() < 1e-9, "t = {t}");
        }
        assert!(st.check_invariants().holds(1e-7));
    }

    #[test]
    fn on_arrival_covers_pair_and_stays_feasible() {
        let mut g = TwoMetricGraph::undirected(5);
        g.add_edge(0, 1, 1.0, 0.2).unwrap();
        g.add_edge(1, 2, 1.0, 0.2).unwrap();
        g.add_edge(2, 3, 0.5, 0.4).unwrap();
        g.add_edge(3, 4, 2.0, 0.1).unwrap();
        g.add_edge(0, 4, 3.0, 0.5).unwrap();
        let mut st = state_for(&g, vec![(0, 3), (4, 1)], 3, 4.0);
        let before_obj = st.lp_objective();
        let snap = st.snapshot();
        assert!(matches!(st.process(0, 0).unwrap(), ArrivalOutcome::Satisfied { .. }));
        assert!(st.coverage(0) >= 1.0 - 1e-7);
        assert!(st.dominates(&snap));
        assert!(st.lp_objective() >= before_obj);
        let snap = st.snapshot();
        assert!(matches!(st.process(1, 0).unwrap(), ArrivalOutcome::Satisfied { .. }));
        assert!(st.dominates(&snap));
        let report = st.check_invariants();
        assert!(report.holds(1e-7), "{report:?}");
        assert!((st.lp_objective() - st.running_objective()).abs() < 1e-9);
    }

    #[test]
    fn overflow_stops_at_threshold() {
        let mut g = TwoMetricGraph::directed(4);
        g.add_edge(0, 1, 5.0, 5.0).unwrap();
        g.add_edge(1, 2, 5.0, 5.0).unwrap();
        g.add_edge(2, 3, 5.0, 5.0).unwrap();
        let layers = Arc::new(LayeredPair::build(&g, 1, 2).unwrap());
        let problem = Arc::new(CompositeProblem::new(layers, vec![(0, 3)]));
        let mut config = LpConfig::for_vertices(4);
        config.kappa = 2.0;
        // Each layered hop costs 10 to buy, so covering the pair costs at
        // least 3 guesses of 10.
        let mut st = FractionalState::epoch_init(problem, 10.0, config).unwrap();
        let outcome = st.process(0, 0).unwrap();
        assert!(matches!(outcome, ArrivalOutcome::EpochOverflow { .. }), "{outcome:?}");
        assert!(st.running_objective() <= 2.0 * (1.0 + 1e-6));
        assert!(st.running_objective() >= 2.0 * (1.0 - 1e-6));
    }

    #[test]
    fn no_roots_when_disconnected() {
        let g = TwoMetricGraph::directed(2);
        let mut st = state_for(&g, vec![(0, 1)], 1, 1.0);
        assert!(st.arrival_init(0).unwrap().is_empty());
        assert_eq!(st.on_arrival(0).unwrap(), ArrivalOutcome::NoRoots);
    }

    #[test]
    fn zero_penalty_discards_immediately() {
        let mut g = TwoMetricGraph::directed(3);
        g.add_edge(0, 1, 1.0, 1.0).unwrap();
        g.add_edge(1, 2, 1.0, 1.0).unwrap();
        let layers = Arc::new(LayeredPair::build(&g, 1, 2).unwrap());
        let problem =
            Arc::new(CompositeProblem::new(layers, vec![(0, 2)]).with_penalties(vec![0.0]).unwrap());
        let mut config = LpConfig::for_vertices(3);
        config.kappa = f64::INFINITY;
        let mut st = FractionalState::epoch_init(problem, 2.0, config).unwrap();
        assert!(matches!(st.process(0, 0).unwrap(), ArrivalOutcome::Satisfied { .. }));
        let v = st.problem().virtual_slot().unwrap();
        assert!(st.z(0, v) > 0.98);
        assert!(st.check_invariants().holds(1e-7));
    }
}
