//! Greedy online single-sink routing: later terminals reuse bought edges.

use std::sync::Arc;

use bulkroute::graph::TwoMetricGraph;
use bulkroute::single_sink::{GreedySingleSink, Orientation, SingleSinkAlg};

fn main() -> bulkroute::Result<()> {
    let mut g = TwoMetricGraph::undirected(5);
    g.add_edge(0, 1, 6.0, 0.5)?;
    g.add_edge(1, 2, 1.0, 0.5)?;
    g.add_edge(1, 3, 1.0, 0.5)?;
    g.add_edge(0, 4, 3.0, 2.0)?;
    g.add_edge(4, 3, 3.0, 2.0)?;
    let mut alg = GreedySingleSink::new(Arc::new(g), 0, Orientation::Sink)?;
    for (key, v) in [2, 3, 4].into_iter().enumerate() {
        let (_, marginal) = alg.quote(v)?;
        let path = alg.on_terminal(key, v)?;
        println!("terminal {v}: path {path:?}, marginal {marginal}");
    }
    println!("total {}", alg.cost()?.total);
    Ok(())
}
