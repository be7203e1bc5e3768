//! Seeded instance generators.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{shortest_path, SolutionLedger, TwoMetricGraph, VertexId};
use crate::instance::{EdgeRecord, Instance, Mode, NodeCostRecord, PairRecord};

/// Most pairs the adversarial order searches exhaustively.
pub const ADVERSARIAL_MAX_PAIRS: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    RandomDigraph,
    Grid,
    StarOfPaths,
    /// Another kind with its pairs put in the worst order for greedy routing.
    Adversarial,
}

impl std::str::FromStr for Kind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-digraph" => Ok(Kind::RandomDigraph),
            "grid" => Ok(Kind::Grid),
            "star-of-paths" => Ok(Kind::StarOfPaths),
            "adversarial" => Ok(Kind::Adversarial),
            other => Err(Error::invalid(format!("unknown generator {other:?}"))),
        }
    }
}

/// `key=value` pairs separated by commas.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl std::str::FromStr for Params {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(|| Error::invalid(format!("expected key=value, got {part:?}")))?;
            values.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }
}

impl Params {
    fn get<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.values.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::invalid(format!("bad value {v:?} for {key}"))),
        }
    }

    fn check_known(&self, known: &[&str]) -> Result<()> {
        match self.values.keys().find(|k| !known.contains(&k.as_str())) {
            Some(k) => Err(Error::invalid(format!("unknown parameter {k:?}"))),
            None => Ok(()),
        }
    }
}

const COMMON: [&str; 5] = ["k", "cmax", "lmax", "q", "mode"];

pub fn generate(kind: Kind, params: &Params, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inst = match kind {
        Kind::RandomDigraph => {
            params.check_known(&[&COMMON[..], &["n", "m"]].concat())?;
            random_digraph(params, &mut rng)?
        }
        Kind::Grid => {
            params.check_known(&[&COMMON[..], &["rows", "cols"]].concat())?;
            grid(params, &mut rng)?
        }
        Kind::StarOfPaths => {
            params.check_known(&[&COMMON[..], &["arms", "len"]].concat())?;
            star_of_paths(params, &mut rng)?
        }
        Kind::Adversarial => {
            let base: Kind = params.get("base", "random-digraph".to_string())?.parse()?;
            if base == Kind::Adversarial {
                return Err(Error::invalid("adversarial needs a different base kind"));
            }
            let mut inner = params.clone();
            inner.values.remove("base");
            let mut inst = generate(base, &inner, seed)?;
            let order = adversarial_order(&inst)?;
            inst.pairs = order.iter().map(|&i| inst.pairs[i].clone()).collect();
            return Ok(inst);
        }
    };
    let k: usize = params.get("k", 3)?;
    inst.pairs = random_pairs(inst.n, k, &mut rng)?;
    if let Some(q) = params.values.get("q") {
        let q: f64 = q.parse().map_err(|_| Error::invalid(format!("bad penalty {q:?}")))?;
        for p in &mut inst.pairs {
            p.q = Some(q);
        }
    }
    if let Some(mode) = params.values.get("mode") {
        let mode: Mode = mode.parse()?;
        inst.mode = Some(mode);
        if mode == Mode::Node {
            let cmax: u32 = params.get("cmax", 8)?;
            inst.node_costs = Some(
                (0..inst.n)
                    .map(|v| NodeCostRecord { v, c: rng.gen_range(1..=cmax) as f64, l: rng.gen_range(1..=4) as f64 * 0.25 })
                    .collect(),
            );
        }
    }
    inst.validate()?;
    Ok(inst)
}

fn weights(params: &Params, rng: &mut ChaCha8Rng) -> Result<(f64, f64)> {
    let cmax: u32 = params.get("cmax", 8)?;
    let lmax: u32 = params.get("lmax", 4)?;
    if cmax == 0 || lmax == 0 {
        return Err(Error::invalid("cmax and lmax must be positive"));
    }
    Ok((rng.gen_range(1..=cmax) as f64, rng.gen_range(1..=lmax) as f64 * 0.25))
}

fn push_edge(edges: &mut Vec<EdgeRecord>, tail: VertexId, head: VertexId, (c, l): (f64, f64)) {
    edges.push(EdgeRecord { id: edges.len(), tail, head, c, l });
}

/// Hamiltonian cycle plus `m` random extra arcs.
fn random_digraph(params: &Params, rng: &mut ChaCha8Rng) -> Result<Instance> {
    let n: usize = params.get("n", 6)?;
    let m: usize = params.get("m", n)?;
    if n < 2 {
        return Err(Error::invalid("n must be at least 2"));
    }
    let mut order: Vec<VertexId> = (0..n).collect();
    order.shuffle(rng);
    let mut edges = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for i in 0..n {
        let (u, v) = (order[i], order[(i + 1) % n]);
        seen.insert((u, v));
        let w = weights(params, rng)?;
        push_edge(&mut edges, u, v, w);
    }
    let room = n * (n - 1) - n;
    for _ in 0..m.min(room) {
        let (u, v) = loop {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v && seen.insert((u, v)) {
                break (u, v);
            }
        };
        let w = weights(params, rng)?;
        push_edge(&mut edges, u, v, w);
    }
    Ok(Instance { directed: true, n, edges, pairs: Vec::new(), mode: None, node_costs: None })
}

fn grid(params: &Params, rng: &mut ChaCha8Rng) -> Result<Instance> {
    let rows: usize = params.get("rows", 2)?;
    let cols: usize = params.get("cols", 3)?;
    if rows * cols < 2 {
        return Err(Error::invalid("grid needs at least two cells"));
    }
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                let w = weights(params, rng)?;
                push_edge(&mut edges, id(r, c), id(r, c + 1), w);
            }
            if r + 1 < rows {
                let w = weights(params, rng)?;
                push_edge(&mut edges, id(r, c), id(r + 1, c), w);
            }
        }
    }
    Ok(Instance { directed: false, n: rows * cols, edges, pairs: Vec::new(), mode: None, node_costs: None })
}

/// Paths of `len` edges hanging off a center vertex 0.
fn star_of_paths(params: &Params, rng: &mut ChaCha8Rng) -> Result<Instance> {
    let arms: usize = params.get("arms", 3)?;
    let len: usize = params.get("len", 2)?;
    if arms == 0 || len == 0 {
        return Err(Error::invalid("arms and len must be positive"));
    }
    let mut edges = Vec::new();
    let mut next = 1;
    for _ in 0..arms {
        let mut prev = 0;
        for _ in 0..len {
            let w = weights(params, rng)?;
            push_edge(&mut edges, prev, next, w);
            prev = next;
            next += 1;
        }
    }
    Ok(Instance { directed: false, n: next, edges, pairs: Vec::new(), mode: None, node_costs: None })
}

fn random_pairs(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Vec<PairRecord>> {
    if n < 2 {
        return Err(Error::invalid("pairs need two distinct vertices"));
    }
    Ok((0..k)
        .map(|_| {
            let s = rng.gen_range(0..n);
            let t = (s + rng.gen_range(1..n)) % n;
            PairRecord { s, t, q: None, d: None }
        })
        .collect())
}

/// Cost of routing `pairs` in order, each on a cheapest path under
/// `c * [unbought] + l`.
pub fn greedy_cost(graph: &TwoMetricGraph, pairs: &[(VertexId, VertexId)]) -> Result<f64> {
    let mut ledger = SolutionLedger::new();
    let mut total = 0.0;
    for (i, &(s, t)) in pairs.iter().enumerate() {
        if s == t {
            continue;
        }
        let path = {
            let weight = |e: &crate::graph::Edge| if ledger.is_bought(e.id) { e.length } else { e.cost + e.length };
            shortest_path(graph, weight, s, t)?.edges
        };
        total += ledger.marginal_cost(graph, &path);
        ledger.commit_path(graph, i, path)?;
    }
    Ok(total)
}

/// Arrival order that maximises [`greedy_cost`]; the lexicographically
/// smallest among equally bad orders.
pub fn adversarial_order(inst: &Instance) -> Result<Vec<usize>> {
    let k = inst.pairs.len();
    if k > ADVERSARIAL_MAX_PAIRS {
        return Err(Error::BudgetExceeded { required: k as u64, budget: ADVERSARIAL_MAX_PAIRS as u64 });
    }
    let graph = inst.graph()?;
    let pairs = inst.pair_list();
    let mut perm: Vec<usize> = (0..k).collect();
    let mut best: Option<(f64, Vec<usize>)> = None;
    loop {
        let ordered: Vec<_> = perm.iter().map(|&i| pairs[i]).collect();
        let cost = greedy_cost(&graph, &ordered)?;
        if best.as_ref().is_none_or(|(b, _)| cost > *b) {
            best = Some((cost, perm.clone()));
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(best.map(|(_, p)| p).unwrap_or_default())
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else { return false };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("a larger element exists");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}
