//! The full online pipeline on one instance file, printed as CSV rows.

use bulkroute::harness::{run_online, RunConfig};
use bulkroute::instance::Instance;

fn main() -> bulkroute::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/oracle/11-grid.json").to_string());
    let inst = Instance::load(&path)?;
    let report = run_online(&inst, &RunConfig { oracle: true, ..RunConfig::seeded(7) })?;
    print!("{}", report.rows_csv()?);
    println!("ratio to offline optimum: {:?}", report.ratio);
    Ok(())
}
