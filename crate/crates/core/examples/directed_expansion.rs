//! Tree expansion of a directed graph and the group Steiner view of one root.

use bulkroute::composite::{LayeredPair, Side};
use bulkroute::directed::{build_h, map_back, map_to_gst, NODE_BUDGET};
use bulkroute::graph::{solution_cost, TwoMetricGraph};
use bulkroute::single_sink::{tree_group_greedy, TreeGroupGreedy};

fn main() -> bulkroute::Result<()> {
    let mut g = TwoMetricGraph::directed(3);
    g.add_edge(0, 1, 2.0, 1.0)?;
    g.add_edge(1, 2, 2.0, 1.0)?;
    g.add_edge(2, 0, 5.0, 0.5)?;
    g.add_edge(0, 2, 9.0, 0.25)?;
    let pairs = [(0, 2), (1, 0)];
    let layers = LayeredPair::build(&g, pairs.len(), 2)?;
    let forest = build_h(&layers, &pairs, NODE_BUDGET)?;
    println!("{} tuple vertices, {} arcs", forest.tuple_count(), forest.graph.edge_count());

    let gst = map_to_gst(&forest, forest.tree_root(0, Side::Up), &[0, 1])?;
    let mut state = TreeGroupGreedy::new(&gst);
    for group in 0..gst.group_count() {
        let (member, bought) = tree_group_greedy(&gst, &mut state, group)?;
        println!("group {group}: member {member}, bought {} tree nodes", bought.len());
    }
    let choices = state.chosen().to_vec();
    let ledger = map_back(&forest, &layers, &g, &gst, &choices, &[0, 1])?;
    println!("tree weight {}, base cost {}", state.weight(&gst), solution_cost(&g, &ledger)?.total);
    Ok(())
}
