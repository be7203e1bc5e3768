//! Penalties let the online algorithm discard requests that are too costly.

use bulkroute::generate::{generate, Kind};
use bulkroute::harness::{run_online, RunConfig};

fn main() -> bulkroute::Result<()> {
    let base = generate(Kind::Grid, &"rows=2,cols=3,k=4".parse()?, 6)?;
    for q in [0.0, 4.0, 1e12] {
        let mut inst = base.clone();
        for p in &mut inst.pairs {
            p.q = Some(q);
        }
        let report = run_online(&inst, &RunConfig { oracle: true, ..RunConfig::seeded(1) })?;
        let t = &report.totals;
        println!(
            "q = {q:e}: total {} (penalties {}, dropped {}), offline optimum {:?}",
            t.total,
            t.penalty,
            t.dropped_count,
            report.oracle.and_then(|o| o.opt)
        );
    }
    Ok(())
}
