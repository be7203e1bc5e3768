//! A suite of runs summarised by competitive ratios.

use bulkroute::harness::experiment;

fn main() -> bulkroute::Result<()> {
    let suite = concat!(env!("CARGO_MANIFEST_DIR"), "/data/oracle_suite.json");
    let (csv, summary) = experiment(std::path::Path::new(suite))?;
    for line in csv.lines().take(6) {
        println!("{line}");
    }
    println!("{summary}");
    Ok(())
}
