//! The online fractional solver: every arrival grows root assignments until
//! the pair is covered.

use std::sync::Arc;

use bulkroute::composite::{CompositeProblem, FractionalState, LayeredPair, LpConfig};
use bulkroute::generate::{generate, Kind};

fn main() -> bulkroute::Result<()> {
    let inst = generate(Kind::Grid, &"rows=2,cols=3,k=3".parse()?, 4)?;
    let g = inst.graph()?;
    let pairs = inst.pair_list();
    let layers = Arc::new(LayeredPair::build(&g, pairs.len(), 2)?);
    let problem = Arc::new(CompositeProblem::new(layers, pairs.clone()));
    let mut state = FractionalState::epoch_init(problem, 40.0, LpConfig::for_vertices(inst.n))?;
    for i in 0..pairs.len() {
        let outcome = state.process(i, 0)?;
        let z: Vec<String> = state.z_row(i).iter().map(|z| format!("{z:.3}")).collect();
        println!("pair {i} {:?}: {outcome:?}, z = [{}]", pairs[i], z.join(", "));
    }
    let report = state.check_invariants();
    println!("objective {:.3}, invariants hold: {}", state.lp_objective() * state.lambda(), report.holds(1e-7));
    Ok(())
}
