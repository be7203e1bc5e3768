//! Instance files: a graph, its requests in arrival order, and the problem
//! variant.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{node_split, NodeWeight, NodeWeightedGraph, SplitGraph, TwoMetricGraph, VertexId};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    /// Edge-weighted.
    Edge,
    /// Node-weighted, solved on the split graph.
    Node,
    /// Directed graphs through the tree expansion.
    Directed,
    /// Edge-weighted with per-pair penalties for discarding.
    Prize,
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge" => Ok(Mode::Edge),
            "node" => Ok(Mode::Node),
            "directed" => Ok(Mode::Directed),
            "prize" => Ok(Mode::Prize),
            other => Err(Error::invalid(format!("unknown mode {other:?}"))),
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Mode::Edge => "edge",
            Mode::Node => "node",
            Mode::Directed => "directed",
            Mode::Prize => "prize",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub id: usize,
    pub tail: VertexId,
    pub head: VertexId,
    #[serde(default)]
    pub c: f64,
    #[serde(default)]
    pub l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub s: VertexId,
    pub t: VertexId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Demand; only unit demands are supported.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeCostRecord {
    pub v: VertexId,
    pub c: f64,
    pub l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub directed: bool,
    pub n: usize,
    pub edges: Vec<EdgeRecord>,
    pub pairs: Vec<PairRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node_costs: Option<Vec<NodeCostRecord>>,
}

impl Instance {
    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n")?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = std::collections::BTreeSet::new();
        for e in &self.edges {
            if e.tail >= self.n || e.head >= self.n {
                return Err(Error::invalid(format!("edge {} has an endpoint outside 0..{}", e.id, self.n)));
            }
            if !ids.insert(e.id) {
                return Err(Error::invalid(format!("duplicate edge id {}", e.id)));
            }
            if !(e.c >= 0.0 && e.c.is_finite() && e.l >= 0.0 && e.l.is_finite()) {
                return Err(Error::invalid(format!("edge {} needs finite nonnegative c and l", e.id)));
            }
        }
        for (i, p) in self.pairs.iter().enumerate() {
            if p.s >= self.n || p.t >= self.n {
                return Err(Error::invalid(format!("pair {i} has an endpoint outside 0..{}", self.n)));
            }
            if let Some(q) = p.q {
                if !(q >= 0.0) {
                    return Err(Error::invalid(format!("pair {i} has negative penalty {q}")));
                }
            }
            if let Some(d) = p.d {
                if d != 1.0 {
                    return Err(Error::invalid(format!("pair {i} has demand {d}; only unit demands are supported")));
                }
            }
        }
        if let Some(costs) = &self.node_costs {
            for nc in costs {
                if nc.v >= self.n || !(nc.c >= 0.0 && nc.l >= 0.0) {
                    return Err(Error::invalid(format!("bad node cost for vertex {}", nc.v)));
                }
            }
        }
        Ok(())
    }

    /// The mode to run: an explicit choice wins, then the file's mode, then
    /// prize mode when penalties are present, else edge mode.
    pub fn resolve_mode(&self, requested: Option<Mode>) -> Mode {
        requested.or(self.mode).unwrap_or(if self.pairs.iter().any(|p| p.q.is_some()) { Mode::Prize } else { Mode::Edge })
    }

    pub fn pair_list(&self) -> Vec<(VertexId, VertexId)> {
        self.pairs.iter().map(|p| (p.s, p.t)).collect()
    }

    /// Edge-weighted graph; edge `j` of the graph comes from record `j`.
    pub fn graph(&self) -> Result<TwoMetricGraph> {
        let mut g = TwoMetricGraph::with_orientation(self.n, self.directed);
        for (j, e) in self.edges.iter().enumerate() {
            g.add_edge_with_origin(e.tail, e.head, e.c, e.l, Some(j))?;
        }
        Ok(g)
    }

    pub fn node_weighted(&self) -> NodeWeightedGraph {
        let mut weights = vec![NodeWeight { cost: 0.0, length: 0.0 }; self.n];
        for nc in self.node_costs.iter().flatten() {
            weights[nc.v] = NodeWeight { cost: nc.c, length: nc.l };
        }
        NodeWeightedGraph { directed: self.directed, weights, edges: self.edges.iter().map(|e| (e.tail, e.head)).collect() }
    }

    /// Graph and requests the online algorithm actually routes on.
    pub fn routing(&self, mode: Mode) -> Result<Routing> {
        match mode {
            Mode::Node => {
                let split: SplitGraph = node_split(&self.node_weighted())?;
                let pairs = self.pairs.iter().map(|p| SplitGraph::map_pair(p.s, p.t)).collect();
                Ok(Routing { graph: split.graph, pairs, penalties: None, trivial: self.trivial() })
            }
            Mode::Prize => {
                let penalties = self
                    .pairs
                    .iter()
                    .enumerate()
                    .map(|(i, p)| p.q.ok_or_else(|| Error::invalid(format!("pair {i} has no penalty"))))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Routing { graph: self.graph()?, pairs: self.pair_list(), penalties: Some(penalties), trivial: self.trivial() })
            }
            Mode::Edge | Mode::Directed => {
                Ok(Routing { graph: self.graph()?, pairs: self.pair_list(), penalties: None, trivial: self.trivial() })
            }
        }
    }

    fn trivial(&self) -> Vec<bool> {
        self.pairs.iter().map(|p| p.s == p.t).collect()
    }
}

/// Routed form of an instance.
#[derive(Clone, Debug)]
pub struct Routing {
    pub graph: TwoMetricGraph,
    pub pairs: Vec<(VertexId, VertexId)>,
    pub penalties: Option<Vec<f64>>,
    /// Pairs whose endpoints coincide in the input.
    pub trivial: Vec<bool>,
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRIANGLE: &str = r#"{
        "directed": true, "n": 3,
        "edges": [{"id": 0, "tail": 0, "head": 2, "c": 10, "l": 1},
                  {"id": 1, "tail": 0, "head": 1, "c": 1, "l": 1},
                  {"id": 2, "tail": 1, "head": 2, "c": 1, "l": 1}],
        "pairs": [{"s": 0, "t": 2}]
    }"#;

    #[test]
    fn parses_and_round_trips() {
        let inst = Instance::from_json(TRIANGLE).unwrap();
        assert_eq!(inst.resolve_mode(None), Mode::Edge);
        let again = Instance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(inst, again);
        let g = inst.graph().unwrap();
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.edge(0).origin, Some(0));
    }

    #[test]
    fn mode_resolution() {
        let mut inst = Instance::from_json(TRIANGLE).unwrap();
        inst.pairs[0].q = Some(3.0);
        assert_eq!(inst.resolve_mode(None), Mode::Prize);
        inst.mode = Some(Mode::Edge);
        assert_eq!(inst.resolve_mode(None), Mode::Edge);
        assert_eq!(inst.resolve_mode(Some(Mode::Directed)), Mode::Directed);
        assert_eq!("node".parse::<Mode>().unwrap(), Mode::Node);
        assert!("bulk".parse::<Mode>().is_err());
    }

    #[test]
    fn rejects_bad_input() {
        let bad = TRIANGLE.replace(r#""head": 2, "c": 10"#, r#""head": 7, "c": 10"#);
        assert!(Instance::from_json(&bad).is_err());
        let bad = TRIANGLE.replace(r#""s": 0, "t": 2"#, r#""s": 0, "t": 2, "d": 2"#);
        assert!(Instance::from_json(&bad).is_err());
        let bad = TRIANGLE.replace(r#""s": 0, "t": 2"#, r#""s": 0, "t": 2, "q": -1"#);
        assert!(Instance::from_json(&bad).is_err());
        let bad = TRIANGLE.replace(r#""id": 2"#, r#""id": 1"#);
        assert!(Instance::from_json(&bad).is_err());
    }

    #[test]
    fn node_mode_maps_terminals() {
        let mut inst = Instance::from_json(TRIANGLE).unwrap();
        inst.node_costs = Some(vec![NodeCostRecord { v: 1, c: 2.0, l: 0.5 }]);
        let r = inst.routing(Mode::Node).unwrap();
        assert_eq!(r.graph.vertex_count(), 6);
        assert_eq!(r.pairs, vec![(1, 4)]);
        assert!(inst.routing(Mode::Prize).is_err());
    }
}
