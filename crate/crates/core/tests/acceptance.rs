use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bulkroute::composite::{FractionalState, LayeredPair, LpConfig, Side, Snapshot};
use bulkroute::directed::{build_h, gst_to_h, h_to_gst, map_to_gst, NODE_BUDGET};
use bulkroute::flow::{max_delta, max_flow, min_cost_flow, FlowNetwork, SideNetwork};
use bulkroute::generate::{generate, Kind, Params};
use bulkroute::graph::{solution_cost, TwoMetricGraph};
use bulkroute::harness::{
    fractional_pass, fractional_pass_with, run_online, run_suite, run_with, RunConfig, RunReport, RunSetup, Suite,
};
use bulkroute::instance::{Instance, Mode};
use bulkroute::oracle::{expanded_opt, junction_opt, layered_opt, offline_opt, OracleBudget};
use bulkroute::rounding::{scaled_cut, Assignment};
use bulkroute::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn data() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

fn load_dir(dir: &str) -> Vec<(String, Instance)> {
    let mut files: Vec<PathBuf> =
        std::fs::read_dir(data().join(dir)).unwrap().map(|e| e.unwrap().path()).filter(|p| p.extension().is_some_and(|x| x == "json")).collect();
    files.sort();
    files.into_iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), Instance::load(&p).unwrap())).collect()
}

fn params(text: &str) -> Params {
    text.parse().unwrap()
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn lp_feasibility() -> Outcome {
    let start = Instant::now();
    let (mut conservation, mut capacity, mut coverage_gap) = (0.0f64, 0.0f64, 0.0f64);
    let mut monotone = true;
    let mut observed = 0usize;
    let mut errors = Vec::new();
    for seed in 0..100u64 {
        let n = 3 + (seed % 4) as usize;
        let k = 2 + (seed % 3) as usize;
        let kind = if seed % 5 == 4 { "grid" } else { "random-digraph" };
        let p = if kind == "grid" { format!("rows=2,cols={},k={k}", n.min(4)) } else { format!("n={n},m={},k={k}", n + (seed % 2) as usize) };
        let inst = generate(kind.parse().unwrap(), &params(&p), 1000 + seed).unwrap();
        let setup = RunSetup::new(Mode::Edge, inst.routing(Mode::Edge).unwrap(), &RunConfig::seeded(seed)).unwrap();
        let mut last: Option<(u32, Snapshot)> = None;
        let res = fractional_pass_with(&setup, |epoch, st: &FractionalState| {
            let r = st.check_invariants();
            conservation = conservation.max(r.conservation);
            capacity = capacity.max(r.capacity);
            coverage_gap = coverage_gap.max(1.0 - r.min_coverage).max(r.range);
            if let Some((e, snap)) = &last {
                if *e == epoch && !st.dominates(snap) {
                    monotone = false;
                }
            }
            last = Some((epoch, st.snapshot()));
            observed += 1;
        });
        if let Err(e) = res {
            errors.push(format!("seed {seed}: {e}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let tol = 1e-7;
    verdict(
        errors.is_empty() && conservation <= tol && capacity <= tol && coverage_gap <= tol && monotone && secs <= 60.0,
        format!(
            "100 instances, {observed} arrivals; conservation {conservation:.2e}, f-x {capacity:.2e}, coverage/range {coverage_gap:.2e}, monotone {monotone}, {secs:.1}s, errors {errors:?}"
        ),
    )
}

fn rounding_domination() -> Outcome {
    let inst = generate(Kind::RandomDigraph, &params("n=16,m=24,k=2"), 16).unwrap();
    let config = RunConfig { h: Some(2), ..RunConfig::default() };
    let setup = RunSetup::new(Mode::Edge, inst.routing(Mode::Edge).unwrap(), &config).unwrap();
    let frac = fractional_pass(&setup).unwrap();
    let (mut worst, mut assigned, mut decisions, mut fallbacks) = (f64::INFINITY, 0usize, 0usize, 0usize);
    for seed in 0..200u64 {
        let report = run_with(&setup, &frac, &RunConfig { seed, ..config.clone() }).unwrap();
        decisions += frac.pairs.iter().flatten().count();
        fallbacks += report.totals.fallback_count;
        for (pair, lp) in frac.pairs.iter().enumerate() {
            let Some(lp) = lp else { continue };
            let draw = frac.draw(lp.epoch, seed).unwrap();
            if let Some(Assignment::Assigned(r)) = frac.assignment(pair, &draw) {
                let (up, down) = scaled_cut(frac.state(lp.epoch), &draw, pair, r);
                worst = worst.min(up).min(down);
                assigned += 1;
            }
        }
    }
    let rate = fallbacks as f64 / decisions.max(1) as f64;
    verdict(
        assigned > 0 && worst >= 1.0 - 1e-6 && rate <= 0.02,
        format!("n=16, 200 seeds: {assigned} assigned, min scaled cut {worst:.9}, fallback rate {rate:.4}"),
    )
}

fn oracle_ratios() -> Outcome {
    let start = Instant::now();
    let suite: Suite = serde_json::from_str(&std::fs::read_to_string(data().join("oracle_suite.json")).unwrap()).unwrap();
    let rows = run_suite(&suite, &data());
    let secs = start.elapsed().as_secs_f64();
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).collect();
    let all_finite = ratios.len() == rows.len() && ratios.iter().all(|r| r.is_finite());
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let geomean = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len().max(1) as f64).exp();
    let junction_ok = rows.iter().all(|r| matches!((r.junction_opt, r.opt), (Some(j), Some(o)) if j >= o));
    verdict(
        rows.len() == 30 && all_finite && max <= 50.0 && junction_ok && secs <= 300.0,
        format!("{} runs, max ratio {max:.4}, geomean {geomean:.4}, junction >= opt {junction_ok}, {secs:.1}s", rows.len()),
    )
}

fn layering_inequalities() -> Outcome {
    let budget = OracleBudget::default();
    let mut pull_ok = true;
    let mut checks = 0;
    let mut worst_factor = 0.0f64;
    let mut worst_scaled = 0.0f64;
    for (_, inst) in load_dir("small").iter().chain(&load_dir("oracle")) {
        let report = run_online(inst, &RunConfig::seeded(3)).unwrap();
        for c in &report.pull_back {
            pull_ok &= c.pulled <= c.layered;
            checks += 1;
        }
    }
    for (_, inst) in load_dir("small") {
        let r = inst.routing(Mode::Edge).unwrap();
        let k = r.pairs.len();
        let h = bulkroute::layering::default_height(inst.n);
        let layers = LayeredPair::build(&r.graph, k, h).unwrap();
        let layered = layered_opt(&layers, &r.pairs, &budget).unwrap();
        let (opt, _) = offline_opt(&r.graph, &r.pairs, &budget).unwrap();
        let factor = layered / opt;
        worst_factor = worst_factor.max(factor);
        worst_scaled = worst_scaled.max(factor / (h as f64 * (k as f64).powf(1.0 / h as f64)));
    }
    verdict(
        pull_ok && checks > 0 && worst_scaled <= 4.0,
        format!("{checks} pulled-back solutions, pulled <= layered {pull_ok}; layered/opt max {worst_factor:.4}, constant {worst_scaled:.4} (<= 4)"),
    )
}

fn complete_digraph(n: usize, rng: &mut ChaCha8Rng) -> TwoMetricGraph {
    let mut g = TwoMetricGraph::directed(n);
    for u in 0..n {
        for v in 0..n {
            if u != v {
                g.add_edge(u, v, rng.gen_range(0..16) as f64 * 0.25, rng.gen_range(0..8) as f64 * 0.25).unwrap();
            }
        }
    }
    g
}

fn index_tuples(lens: &[usize]) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new()];
    for &len in lens {
        out = out.into_iter().flat_map(|p| (0..len).map(move |i| [p.clone(), vec![i]].concat())).collect();
    }
    out
}

/// Every path from `from` to `to` in an acyclic graph.
fn all_walks(g: &TwoMetricGraph, from: usize, to: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut stack = vec![(from, Vec::new())];
    while let Some((v, walk)) = stack.pop() {
        if v == to {
            out.push(walk);
            continue;
        }
        for &e in g.out_edges(v) {
            let mut next = walk.clone();
            next.push(e);
            stack.push((g.edge(e).head, next));
        }
    }
    out
}

fn directed_reduction() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut bijection_ok = true;
    let mut solutions = 0usize;
    // k = 4 with h = 2 keeps every level multiplier a power of two, so sums are exact.
    for (n, h) in [(2, 1), (2, 2), (2, 3), (3, 1)] {
        let g = complete_digraph(n, &mut rng);
        let layers = LayeredPair::build(&g, 4, h).unwrap();
        let forest = build_h(&layers, &[], NODE_BUDGET).unwrap();
        for r in 0..n {
            for side in [Side::Up, Side::Down] {
                for terminals in index_tuples(&[n, n]).into_iter().chain(index_tuples(&[n])) {
                    let gst = map_to_gst(&forest, forest.tree_root(r, side), &terminals).unwrap();
                    let lens: Vec<usize> = (0..terminals.len()).map(|g| gst.group(g).unwrap().len()).collect();
                    for pick in index_tuples(&lens) {
                        let choices: Vec<(usize, usize)> = pick.iter().enumerate().map(|(g, &i)| (g, gst.group(g).unwrap()[i])).collect();
                        let members: Vec<usize> = choices.iter().map(|c| c.1).collect();
                        let ledger = gst_to_h(&forest, &gst, &choices).unwrap();
                        let objective = solution_cost(&forest.graph, &ledger).unwrap().total;
                        bijection_ok &= objective == gst.weight_of(&members);
                        bijection_ok &= h_to_gst(&forest, &gst, ledger.paths()).unwrap() == choices;
                        solutions += 1;
                    }
                }
            }
        }
    }

    let budget = OracleBudget::default();
    let mut links_ok = true;
    let mut walks = 0usize;
    let mut worst_scaled = 0.0f64;
    let mut worst_factor = 0.0f64;
    for (_, inst) in load_dir("directed") {
        let r = inst.routing(Mode::Directed).unwrap();
        let k = r.pairs.len();
        for h in 1..=2 {
            let layers = LayeredPair::build(&r.graph, k, h).unwrap();
            let forest = build_h(&layers, &r.pairs, NODE_BUDGET).unwrap();
            for pair in 0..k {
                let (src, dst) = forest.pair_nodes(pair);
                for walk in all_walks(&forest.graph, src, dst) {
                    links_ok &= forest.root_links(&walk) == 1;
                    walks += 1;
                }
            }
            let expanded = expanded_opt(&forest, inst.n, &r.pairs, &budget).unwrap();
            let junction = junction_opt(&r.graph, &r.pairs, &budget).unwrap();
            let factor = expanded / junction;
            worst_factor = worst_factor.max(factor);
            worst_scaled = worst_scaled.max(factor / (h as f64 * (k as f64).powf(1.0 / h as f64)));
        }
    }
    verdict(
        bijection_ok && links_ok && worst_scaled <= 4.0,
        format!(
            "{solutions} tree solutions map exactly {bijection_ok}; {walks} pair walks with one root link {links_ok}; expanded/junction max {worst_factor:.4}, constant {worst_scaled:.4} (<= 4)"
        ),
    )
}

fn calibration() -> Outcome {
    let mut worst = 0.0f64;
    let mut steps = 0usize;
    for (length, scale) in [(1.0, 1.0), (0.75, 1.0), (2.0, 3.0), (0.5, 4.0), (3.0, 3.5)] {
        let mut g = TwoMetricGraph::directed(2);
        g.add_edge(0, 1, 0.0, length).unwrap();
        let layers = std::sync::Arc::new(LayeredPair::build(&g, 1, 1).unwrap());
        let problem = bulkroute::composite::CompositeProblem::new(layers, vec![(0, 1)]);
        let lambda = length * scale;
        let mut st = FractionalState::epoch_init(std::sync::Arc::new(problem), lambda, LpConfig::for_vertices(2)).unwrap();
        let roots = st.arrival_init(0).unwrap();
        let z0 = st.initial_value();
        // Rescaled length L; the rate is z / L until it saturates at 1.
        let l = length / lambda;
        let exact = |t: f64| {
            let t_sat = l * (l / z0).ln();
            if t <= t_sat { z0 * (t / l).exp() } else { l + (t - t_sat) }
        };
        let mut t = 0.0;
        while st.coverage(0) < 1.0 - 1e-10 {
            t += st.growth_step(0, 0.05).unwrap();
            steps += 1;
            for &r in &roots {
                worst = worst.max((st.z(0, r) / exact(t) - 1.0).abs());
            }
        }
    }
    verdict(worst <= 0.05, format!("{steps} steps on 5 single-path instances, worst relative error {worst:.2e}"))
}

/// Minimum cost over the vertices of the flow polytope, by fixing every arc
/// at a bound or leaving it basic and solving the conservation equations.
fn vertex_enumeration(net: &FlowNetwork, source: usize, sink: usize, target: f64) -> Option<f64> {
    let arcs = net.arcs();
    let m = arcs.len();
    let rows: Vec<usize> = (0..net.node_count()).filter(|&v| v != sink).collect();
    let mut best: Option<f64> = None;
    for code in 0..3usize.pow(m as u32) {
        let mut state = vec![0usize; m];
        let mut c = code;
        for s in state.iter_mut() {
            *s = c % 3;
            c /= 3;
        }
        let free: Vec<usize> = (0..m).filter(|&a| state[a] == 2).collect();
        let fixed = |a: usize| if state[a] == 1 { arcs[a].capacity } else { 0.0 };
        // Rows: outflow - inflow = target at the source, 0 elsewhere.
        let mut mat: Vec<Vec<f64>> = rows
            .iter()
            .map(|&v| {
                let mut row: Vec<f64> = free.iter().map(|&a| (arcs[a].tail == v) as i32 as f64 - (arcs[a].head == v) as i32 as f64).collect();
                let mut rhs = if v == source { target } else { 0.0 };
                for a in (0..m).filter(|&a| state[a] != 2) {
                    rhs -= ((arcs[a].tail == v) as i32 as f64 - (arcs[a].head == v) as i32 as f64) * fixed(a);
                }
                row.push(rhs);
                row
            })
            .collect();
        let Some(sol) = solve_unique(&mut mat, free.len()) else { continue };
        let mut f: Vec<f64> = (0..m).map(fixed).collect();
        for (i, &a) in free.iter().enumerate() {
            f[a] = sol[i];
        }
        if f.iter().zip(arcs).all(|(&x, a)| x >= -1e-9 && x <= a.capacity + 1e-9) {
            let cost: f64 = f.iter().zip(arcs).map(|(x, a)| x * a.unit_cost).sum();
            best = Some(best.map_or(cost, |b: f64| b.min(cost)));
        }
    }
    best
}

/// Gaussian elimination; `None` unless the system has exactly one solution.
fn solve_unique(mat: &mut [Vec<f64>], vars: usize) -> Option<Vec<f64>> {
    let mut row = 0;
    let mut pivots = Vec::new();
    for col in 0..vars {
        let Some(p) = (row..mat.len()).max_by(|&a, &b| mat[a][col].abs().total_cmp(&mat[b][col].abs())) else { break };
        if mat[p][col].abs() < 1e-12 {
            continue;
        }
        mat.swap(row, p);
        let pivot = mat[row][col];
        for x in mat[row].iter_mut() {
            *x /= pivot;
        }
        for r in 0..mat.len() {
            if r != row {
                let factor = mat[r][col];
                if factor != 0.0 {
                    let src = mat[row].clone();
                    for (x, s) in mat[r].iter_mut().zip(src) {
                        *x -= factor * s;
                    }
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    if pivots.len() != vars || mat[row..].iter().any(|r| r[vars].abs() > 1e-9) {
        return None;
    }
    Some((0..vars).map(|i| mat[i][vars]).collect())
}

fn path_side(caps: &[f64], lengths: &[f64]) -> SideNetwork {
    let mut net = FlowNetwork::new(caps.len() + 1);
    for (i, (&c, &l)) in caps.iter().zip(lengths).enumerate() {
        net.add_arc(i, i + 1, c, l).unwrap();
    }
    SideNetwork { net, source: 0, sink: caps.len() }
}

fn flow_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut worst = 0.0f64;
    let mut agree = true;
    let mut infeasible = 0;
    for _ in 0..100 {
        let nodes = rng.gen_range(2..=4);
        let arcs = rng.gen_range(1..=6);
        let mut net = FlowNetwork::new(nodes);
        for _ in 0..arcs {
            let (a, b) = (rng.gen_range(0..nodes), rng.gen_range(0..nodes));
            net.add_arc(a, b, rng.gen_range(1..=8) as f64 * 0.5, rng.gen_range(0..=6) as f64).unwrap();
        }
        let sink = nodes - 1;
        let most = max_flow(&net, 0, sink).value;
        // Mostly feasible targets, with some just past the maximum flow.
        let target = if rng.gen_bool(0.85) { most * rng.gen_range(0..=4) as f64 / 4.0 } else { most + 0.5 };
        let expected = vertex_enumeration(&net, 0, sink, target);
        match (min_cost_flow(&net, 0, sink, target), expected) {
            (Ok(res), Some(opt)) => worst = worst.max((res.total_cost - opt).abs()),
            (Err(Error::Infeasible(_)), None) => infeasible += 1,
            _ => agree = false,
        }
    }
    let mut delta_worst = 0.0f64;
    for _ in 0..100 {
        let up_len = rng.gen_range(1..=4);
        let down_len = rng.gen_range(1..=4);
        let caps = |rng: &mut ChaCha8Rng, n| (0..n).map(|_| rng.gen_range(0.05..2.0)).collect::<Vec<f64>>();
        let lens = |rng: &mut ChaCha8Rng, n| (0..n).map(|_| rng.gen_range(0.0..1.0)).collect::<Vec<f64>>();
        let (uc, ul, dc, dl) = (caps(&mut rng, up_len), lens(&mut rng, up_len), caps(&mut rng, down_len), lens(&mut rng, down_len));
        let budget = rng.gen_range(0.0..1.5);
        let side_max = |c: &[f64], l: &[f64]| {
            let total: f64 = l.iter().sum();
            let by_budget = if total > 0.0 { budget / total } else { f64::INFINITY };
            c.iter().copied().fold(by_budget, f64::min)
        };
        let closed = side_max(&uc, &ul).min(side_max(&dc, &dl)).min(1.0);
        let sol = max_delta(&path_side(&uc, &ul), &path_side(&dc, &dl), budget);
        delta_worst = delta_worst.max((sol.delta - closed).abs());
    }
    verdict(
        agree && worst <= 1e-7 && delta_worst <= 1e-8,
        format!("100 networks ({infeasible} infeasible), agree {agree}, worst cost gap {worst:.2e}; 100 path pairs, worst delta gap {delta_worst:.2e}"),
    )
}

fn with_penalty(inst: &Instance, q: f64) -> Instance {
    let mut out = inst.clone();
    for p in &mut out.pairs {
        p.q = Some(q);
    }
    out.mode = Some(Mode::Prize);
    out
}

fn prize_collecting() -> Outcome {
    let insts: Vec<Instance> = load_dir("small").into_iter().take(4).map(|(_, i)| i).collect();
    let mut zero_ok = true;
    let mut identical = true;
    let mut bounded = true;
    let mut runs = 0;
    for inst in &insts {
        let plain = RunSetup::new(Mode::Edge, inst.routing(Mode::Edge).unwrap(), &RunConfig::default()).unwrap();
        let plain_frac = fractional_pass(&plain).unwrap();
        let huge = with_penalty(inst, 1e12);
        let prize = RunSetup::new(Mode::Prize, huge.routing(Mode::Prize).unwrap(), &RunConfig::default()).unwrap();
        let prize_frac = fractional_pass(&prize).unwrap();
        for seed in 0..50 {
            let config = RunConfig::seeded(seed);
            let a = run_with(&plain, &plain_frac, &config).unwrap();
            let b = run_with(&prize, &prize_frac, &config).unwrap();
            identical &= a.assignments == b.assignments;
            bounded &= b.totals.total <= 1e12 * inst.pairs.len() as f64;
            runs += 1;
        }
        for q in [0.0, 0.5, 3.0, 10.0] {
            let report = run_online(&with_penalty(inst, q), &RunConfig::seeded(1)).unwrap();
            bounded &= report.totals.total <= q * inst.pairs.len() as f64 + 1e-9;
            if q == 0.0 {
                zero_ok &= report.totals.total == 0.0;
            }
            runs += 1;
        }
    }
    verdict(
        zero_ok && identical && bounded,
        format!("{runs} runs; q=0 total 0 {zero_ok}; q=1e12 matches plain on 50 seeds {identical}; total <= sum q {bounded}"),
    )
}

fn determinism() -> Outcome {
    let mut same = true;
    let mut runs = 0;
    let cases: Vec<(Instance, Option<Mode>)> = load_dir("small")
        .into_iter()
        .take(3)
        .map(|(_, i)| (i, None))
        .chain(load_dir("directed").into_iter().take(2).map(|(_, i)| (i, Some(Mode::Directed))))
        .chain(load_dir("oracle").into_iter().filter(|(n, _)| n.contains("prize")).map(|(_, i)| (i, None)))
        .collect();
    for (inst, mode) in &cases {
        for seed in [0, 9] {
            let config = RunConfig { mode: *mode, ..RunConfig::seeded(seed) };
            let csv = |r: RunReport| r.rows_csv().unwrap();
            same &= csv(run_online(inst, &config).unwrap()) == csv(run_online(inst, &config).unwrap());
            runs += 1;
        }
    }
    verdict(same, format!("{runs} repeated runs byte-identical {same}"))
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("lp feasibility", lp_feasibility),
        ("rounding domination", rounding_domination),
        ("oracle ratios", oracle_ratios),
        ("layering inequalities", layering_inequalities),
        ("directed reduction", directed_reduction),
        ("solver calibration", calibration),
        ("flow engine equivalence", flow_equivalence),
        ("prize collecting", prize_collecting),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    let mut results = BTreeMap::new();
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        let status = if out.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {name}: {status} ({:.1}s) {}", i + 1, start.elapsed().as_secs_f64(), out.detail);
        failed += usize::from(!out.pass);
        results.insert(i + 1, out.pass);
    }
    println!("acceptance: {} of {} criteria pass", results.values().filter(|&&p| p).count(), results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
