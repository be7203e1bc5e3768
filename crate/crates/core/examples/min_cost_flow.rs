//! Min-cost flow and the two-sided largest-increment problem.

use bulkroute::flow::{max_delta, max_flow, min_cost_flow, FlowNetwork, SideNetwork};

fn main() -> bulkroute::Result<()> {
    let mut net = FlowNetwork::new(4);
    net.add_arc(0, 1, 1.0, 1.0)?;
    net.add_arc(0, 2, 2.0, 3.0)?;
    net.add_arc(1, 3, 2.0, 1.0)?;
    net.add_arc(2, 3, 1.0, 0.0)?;
    net.add_arc(1, 2, 1.0, 0.0)?;
    println!("max flow {}", max_flow(&net, 0, 3).value);
    let res = min_cost_flow(&net, 0, 3, 1.5)?;
    println!("1.5 units cost {} with flows {:?}", res.total_cost, res.flow);

    let side = |cap: f64, len: f64| -> bulkroute::Result<SideNetwork> {
        let mut net = FlowNetwork::new(2);
        net.add_arc(0, 1, cap, len)?;
        Ok(SideNetwork { net, source: 0, sink: 1 })
    };
    let sol = max_delta(&side(0.6, 0.5)?, &side(2.0, 2.0)?, 1.0);
    println!("largest increment {} (capacity 0.6, budget 1/2)", sol.delta);
    Ok(())
}
