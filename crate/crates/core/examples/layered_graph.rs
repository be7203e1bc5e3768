//! Up and down layered copies of a graph and pulling a layered solution back.

use std::sync::Arc;

use bulkroute::composite::LayeredPair;
use bulkroute::graph::{solution_cost, TwoMetricGraph};
use bulkroute::layering::level_multiplier;
use bulkroute::single_sink::{GreedySingleSink, Orientation, SingleSinkAlg};

fn main() -> bulkroute::Result<()> {
    let mut g = TwoMetricGraph::undirected(4);
    g.add_edge(0, 1, 4.0, 1.0)?;
    g.add_edge(1, 2, 4.0, 1.0)?;
    g.add_edge(2, 3, 1.0, 3.0)?;
    g.add_edge(0, 3, 9.0, 0.5)?;
    let (k, h) = (4, 2);
    for level in 0..=h {
        println!("level {level}: length x {}", level_multiplier(k, h, level));
    }
    let layers = LayeredPair::build(&g, k, h)?;
    println!("up graph: {} nodes, {} edges", layers.up.as_graph().vertex_count(), layers.up.edges().len());

    let mut alg = GreedySingleSink::new(Arc::new(layers.up.as_graph().clone()), layers.up.root(3), Orientation::Sink)?;
    for (key, v) in [0, 1, 2].into_iter().enumerate() {
        alg.on_terminal(key, layers.up.terminal(v))?;
    }
    let pulled = layers.up.pull_back(&g, alg.ledger())?;
    println!("layered cost {}, pulled back {}", alg.cost()?.total, solution_cost(&g, &pulled)?.total);
    Ok(())
}
