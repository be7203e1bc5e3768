use std::sync::Arc;

use bulkroute::composite::LayeredPair;
use bulkroute::flow::{min_cost_flow, FlowNetwork, FLOW_TOL};
use bulkroute::generate::{generate, Kind};
use bulkroute::graph::{shortest_path, solution_cost, SolutionLedger, TwoMetricGraph};
use bulkroute::harness::{run_online, RunConfig};
use bulkroute::instance::Instance;
use bulkroute::rounding::{assign_row, draw_thresholds, threshold_interval, Assignment};
use bulkroute::single_sink::{GreedySingleSink, Orientation, SingleSinkAlg};
use proptest::prelude::*;

fn arb_graph() -> impl Strategy<Value = TwoMetricGraph> {
    (3usize..7).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, 0u32..12, 0u32..8), n..2 * n).prop_map(move |edges| {
            let mut g = TwoMetricGraph::undirected(n);
            // A path keeps the graph connected.
            for v in 1..n {
                g.add_edge(v - 1, v, 3.0, 1.0).unwrap();
            }
            for (u, v, c, l) in edges {
                if u != v {
                    g.add_edge(u, v, f64::from(c) * 0.5, f64::from(l) * 0.25).unwrap();
                }
            }
            g
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ledger_pays_each_edge_once(g in arb_graph(), repeats in 1usize..4) {
        let n = g.vertex_count();
        let path = shortest_path(&g, |e| e.cost + e.length, 0, n - 1).unwrap();
        let mut ledger = SolutionLedger::new();
        for key in 0..repeats {
            ledger.commit_path(&g, key, path.edges.clone()).unwrap();
        }
        let cost = solution_cost(&g, &ledger).unwrap();
        prop_assert!((cost.buy - g.path_cost(&path.edges)).abs() < 1e-9);
        prop_assert!((cost.length - repeats as f64 * g.path_length(&path.edges)).abs() < 1e-9);
    }

    #[test]
    fn pulled_back_solutions_never_cost_more(g in arb_graph(), h in 1usize..4, seed in 0usize..100) {
        let n = g.vertex_count();
        let layers = LayeredPair::build(&g, 3, h).unwrap();
        let root = seed % n;
        let mut alg = GreedySingleSink::new(Arc::new(layers.up.as_graph().clone()), layers.up.root(root), Orientation::Sink).unwrap();
        for (key, v) in (0..n).filter(|&v| v != root).take(3).enumerate() {
            alg.on_terminal(key, layers.up.terminal(v)).unwrap();
        }
        let pulled = layers.up.pull_back(&g, alg.ledger()).unwrap();
        prop_assert!(solution_cost(&g, &pulled).unwrap().total <= alg.cost().unwrap().total);
    }

    #[test]
    fn min_cost_flow_is_feasible(
        arcs in prop::collection::vec((0usize..5, 0usize..5, 1u32..8, 0u32..6), 1..10),
        fraction in 0.0f64..=1.0,
    ) {
        let mut net = FlowNetwork::new(5);
        for &(a, b, cap, cost) in &arcs {
            net.add_arc(a, b, f64::from(cap) * 0.5, f64::from(cost)).unwrap();
        }
        let most = bulkroute::flow::max_flow(&net, 0, 4).value;
        let res = min_cost_flow(&net, 0, 4, most * fraction).unwrap();
        prop_assert!(res.violation(&net, 0, 4) <= 10.0 * FLOW_TOL);
        prop_assert!((res.value - most * fraction).abs() <= 10.0 * FLOW_TOL);
    }

    #[test]
    fn thresholds_stay_in_their_interval(n in 2usize..64, slots in 1usize..20, seed in any::<u64>()) {
        let (lo, hi) = threshold_interval(n);
        let draw = draw_thresholds(slots, n, seed).unwrap();
        prop_assert_eq!(draw.taus.len(), slots);
        prop_assert!(draw.taus.iter().all(|&t| lo <= t && t <= hi));
    }

    #[test]
    fn assignment_takes_the_heaviest_root_over_threshold(z in prop::collection::vec(0.0f64..1.0, 1..8), tau in 0.01f64..0.5) {
        let taus = vec![tau; z.len()];
        match assign_row(&z, &taus, None) {
            Assignment::Assigned(r) => {
                prop_assert!(z[r] >= tau);
                prop_assert!(z.iter().all(|&v| v <= z[r]));
            }
            Assignment::Fallback => prop_assert!(z.iter().all(|&v| v < tau || v == 0.0)),
            Assignment::Dropped => prop_assert!(false),
        }
    }

    #[test]
    fn instances_round_trip(seed in 0u64..50, k in 1usize..4) {
        let inst = generate(Kind::Grid, &format!("rows=2,cols=3,k={k},q=2").parse().unwrap(), seed).unwrap();
        let again = Instance::from_json(&inst.to_json().unwrap()).unwrap();
        prop_assert_eq!(inst, again);
    }
}

#[test]
fn online_totals_match_the_ledger() {
    for seed in 0..6 {
        let inst = generate(Kind::RandomDigraph, &"n=5,m=6,k=3".parse().unwrap(), seed).unwrap();
        let report = run_online(&inst, &RunConfig::seeded(seed)).unwrap();
        let recomputed = report.recomputed_total().unwrap();
        assert!((recomputed - report.totals.total).abs() < 1e-9);
        assert_eq!(report.rows.last().map(|r| r.cumulative), Some(report.totals.total));
    }
}
