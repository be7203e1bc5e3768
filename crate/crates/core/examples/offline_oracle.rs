//! Exact offline values for small instances.

use bulkroute::generate::{generate, Kind};
use bulkroute::harness::oracle_values;
use bulkroute::instance::Mode;

fn main() -> bulkroute::Result<()> {
    for (kind, params) in [(Kind::StarOfPaths, "arms=3,len=1,k=3"), (Kind::Grid, "rows=2,cols=3,k=3")] {
        let inst = generate(kind, &params.parse()?, 11)?;
        let r = inst.routing(Mode::Edge)?;
        let o = oracle_values(&r.graph, &r.pairs, None, &r.trivial)?;
        println!("{kind:?}: opt {:?}, junction {:?}, lp bound {:?}", o.opt, o.junction_opt, o.lp_lb);
    }
    Ok(())
}
