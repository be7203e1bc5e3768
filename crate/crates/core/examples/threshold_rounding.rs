//! Per-root thresholds turn fractional root weights into one root per pair.

use bulkroute::generate::{generate, Kind};
use bulkroute::harness::{fractional_pass, RunConfig, RunSetup};
use bulkroute::instance::Mode;
use bulkroute::rounding::{scaled_cut, threshold_interval, Assignment};

fn main() -> bulkroute::Result<()> {
    let inst = generate(Kind::RandomDigraph, &"n=6,m=8,k=3".parse()?, 2)?;
    let setup = RunSetup::new(Mode::Edge, inst.routing(Mode::Edge)?, &RunConfig::default())?;
    let frac = fractional_pass(&setup)?;
    println!("thresholds drawn from {:?}", threshold_interval(setup.n()));
    for seed in 0..4 {
        for (pair, lp) in frac.pairs.iter().enumerate() {
            let Some(lp) = lp else { continue };
            let draw = frac.draw(lp.epoch, seed)?;
            match frac.assignment(pair, &draw) {
                Some(Assignment::Assigned(r)) => {
                    let (up, down) = scaled_cut(frac.state(lp.epoch), &draw, pair, r);
                    println!("seed {seed} pair {pair}: root {r}, scaled cuts {up:.3} / {down:.3}");
                }
                other => println!("seed {seed} pair {pair}: {other:?}"),
            }
        }
    }
    Ok(())
}
