//! Cable types become parallel two-metric edges; a ledger pays each bought
//! edge once and every routed path its length.

use bulkroute::graph::{bab_to_two_metric, solution_cost, BabEdge, BabGraph, CableType, SolutionLedger};

fn main() -> bulkroute::Result<()> {
    let thin = CableType::new(1.0, 4.0)?;
    let thick = CableType::new(10.0, 0.5)?;
    let input = BabGraph {
        directed: false,
        n: 3,
        edges: vec![
            BabEdge { tail: 0, head: 1, cables: vec![thin, thick] },
            BabEdge { tail: 1, head: 2, cables: vec![thin, thick] },
        ],
    };
    let g = bab_to_two_metric(&input)?;
    println!("{} cable edges", g.edge_count());

    let mut ledger = SolutionLedger::new();
    // Three requests share the thick cables.
    for pair in 0..3 {
        ledger.commit_path(&g, pair, vec![1, 3])?;
    }
    let cost = solution_cost(&g, &ledger)?;
    println!("buy {} + length {} = {}", cost.buy, cost.length, cost.total);
    for load in [1.0, 3.0, 10.0] {
        println!("load {load}: thin {} thick {}", thin.cost_for(load), thick.cost_for(load));
    }
    Ok(())
}
