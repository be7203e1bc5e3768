//! Node weights moved onto `in -> out` arcs.

use bulkroute::graph::{node_split, shortest_path, NodeWeight, NodeWeightedGraph, SplitGraph};

fn main() -> bulkroute::Result<()> {
    let free = NodeWeight { cost: 0.0, length: 0.0 };
    let input = NodeWeightedGraph {
        directed: false,
        weights: vec![free, NodeWeight { cost: 5.0, length: 0.0 }, free, NodeWeight { cost: 1.0, length: 1.0 }],
        edges: vec![(0, 1), (1, 2), (0, 3), (3, 2)],
    };
    let split = node_split(&input)?;
    let (s, t) = SplitGraph::map_pair(0, 2);
    let path = shortest_path(&split.graph, |e| e.cost + e.length, s, t)?;
    let via: Vec<_> = path.edges.iter().filter_map(|&e| split.graph.edge(e).origin).collect();
    println!("0 -> 2 costs {} through vertices {via:?}", path.weight);
    Ok(())
}
