//! Instance generators, including worst arrival orders for greedy routing.

use bulkroute::generate::{generate, greedy_cost, Kind};

fn main() -> bulkroute::Result<()> {
    for (kind, params) in [
        (Kind::RandomDigraph, "n=6,m=4,k=3"),
        (Kind::Grid, "rows=2,cols=2,k=2,mode=node"),
        (Kind::StarOfPaths, "arms=3,len=2,k=3,q=5"),
        (Kind::Adversarial, "base=grid,rows=2,cols=3,k=4"),
    ] {
        let inst = generate(kind, &params.parse()?, 3)?;
        println!("{kind:?}: n={} edges={} pairs={:?}", inst.n, inst.edges.len(), inst.pair_list());
        if kind == Kind::Adversarial {
            println!("  greedy cost in this order: {}", greedy_cost(&inst.graph()?, &inst.pair_list())?);
        }
    }
    Ok(())
}
