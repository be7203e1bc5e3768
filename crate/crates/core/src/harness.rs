//! End-to-end online runs: fractional update, rounding, dispatch to the
//! per-root single-sink instances, reports and experiment suites.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::composite::{ArrivalOutcome, CompositeProblem, FractionalState, LayeredPair, LpConfig, Side};
use crate::directed::{build_h, map_to_gst, member_walk, GstInstance, JunctionForest, NODE_BUDGET};
use crate::error::{Error, Result};
use crate::graph::{buy_plus_length, shortest_path, solution_cost, EdgeId, SolutionLedger, TwoMetricGraph, VertexId};
use crate::instance::{Instance, Mode, Routing};
use crate::layering::default_height;
use crate::oracle::{junction_opt, lp_lb, offline_opt, prize_junction_opt, prize_offline_opt, OracleBudget};
use crate::prize::{settle, PenaltyLedger, SettleAction};
use crate::rounding::{assign, draw_thresholds, Assignment, AssignmentMap, ThresholdDraw};
use crate::single_sink::{tree_group_greedy, GreedySingleSink, Orientation, SingleSinkAlg, TreeGroupGreedy};

/// Mixes the epoch into the threshold seed.
const EPOCH_SEED_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

/// Online single-sink plug-in.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SsAlg {
    #[default]
    Greedy,
}

impl std::str::FromStr for SsAlg {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(SsAlg::Greedy),
            other => Err(Error::invalid(format!("unknown single-sink algorithm {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Overrides the instance's mode.
    pub mode: Option<Mode>,
    pub h: Option<usize>,
    pub kappa: Option<f64>,
    pub delta_max: Option<f64>,
    pub seed: u64,
    pub ss_alg: SsAlg,
    pub oracle: bool,
    pub rows_out: Option<PathBuf>,
    pub report_out: Option<PathBuf>,
}

impl RunConfig {
    pub fn seeded(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }
}

/// One arrival.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrivalRow {
    pub arrival: usize,
    pub pair: usize,
    pub s: VertexId,
    pub t: VertexId,
    /// assigned, fallback, dropped, trivial or unserved.
    pub outcome: String,
    pub root: Option<usize>,
    pub marginal: f64,
    pub penalty: f64,
    pub cumulative: f64,
    pub epoch: u32,
    pub lambda: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub buy: f64,
    pub length: f64,
    pub penalty: f64,
    pub total: f64,
    pub fallback_count: usize,
    pub dropped_count: usize,
    pub unserved_count: usize,
    pub epochs: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OracleValues {
    pub opt: Option<f64>,
    pub junction_opt: Option<f64>,
    pub lp_lb: Option<f64>,
}

/// Cost of a single-sink instance on its layered graph and after pulling
/// its solution back to the routed graph.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PullBackCheck {
    pub root: usize,
    pub orientation: Orientation,
    pub epoch: u32,
    pub layered: f64,
    pub pulled: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    /// Vertices of the routed graph.
    pub n: usize,
    pub k: usize,
    pub h: usize,
    pub seed: u64,
    pub rows: Vec<ArrivalRow>,
    pub totals: Totals,
    pub oracle: Option<OracleValues>,
    pub ratio: Option<f64>,
    /// Rounding decision per pair; `None` for pairs never sent to the LP.
    pub assignments: Vec<Option<Assignment>>,
    pub pull_back: Vec<PullBackCheck>,
    #[serde(skip)]
    pub ledger: SolutionLedger,
    #[serde(skip)]
    pub graph: Option<Arc<TwoMetricGraph>>,
}

pub const ROW_COLUMNS: [&str; 12] =
    ["arrival", "pair", "s", "t", "outcome", "root", "marginal", "penalty", "cumulative", "epoch", "lambda", "fallback"];

impl RunReport {
    /// Per-arrival rows as CSV.
    pub fn rows_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(ROW_COLUMNS)?;
        for r in &self.rows {
            w.write_record([
                r.arrival.to_string(),
                r.pair.to_string(),
                r.s.to_string(),
                r.t.to_string(),
                r.outcome.clone(),
                r.root.map(|v| v.to_string()).unwrap_or_default(),
                r.marginal.to_string(),
                r.penalty.to_string(),
                r.cumulative.to_string(),
                r.epoch.to_string(),
                r.lambda.to_string(),
                usize::from(r.outcome == "fallback").to_string(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn fallback_rate(&self) -> f64 {
        let routed = self.assignments.iter().flatten().count();
        if routed == 0 {
            0.0
        } else {
            self.totals.fallback_count as f64 / routed as f64
        }
    }

    /// Recomputes the totals from the ledger.
    pub fn recomputed_total(&self) -> Result<f64> {
        let g = self.graph.as_ref().ok_or_else(|| Error::integrity("report has no graph"))?;
        Ok(solution_cost(g, &self.ledger)?.total + self.totals.penalty)
    }
}

/// Everything a run needs besides the seed.
#[derive(Clone, Debug)]
pub struct RunSetup {
    pub mode: Mode,
    pub graph: Arc<TwoMetricGraph>,
    pub layers: Arc<LayeredPair>,
    pub problem: Arc<CompositeProblem>,
    pub trivial: Vec<bool>,
    pub h: usize,
    pub lp_config: LpConfig,
}

impl RunSetup {
    pub fn new(mode: Mode, routing: Routing, config: &RunConfig) -> Result<Self> {
        let Routing { graph, pairs, penalties, trivial } = routing;
        let n = graph.vertex_count();
        if n < 2 {
            return Err(Error::invalid("need at least two vertices"));
        }
        let h = config.h.unwrap_or(if mode == Mode::Directed { 2 } else { default_height(n) });
        if h == 0 {
            return Err(Error::invalid("height must be positive"));
        }
        let layers = Arc::new(LayeredPair::build(&graph, pairs.len().max(1), h)?);
        let mut problem = CompositeProblem::new(Arc::clone(&layers), pairs);
        if let Some(q) = penalties {
            problem = crate::prize::augment(problem, q)?.0;
        }
        let mut lp_config = LpConfig::for_vertices(n);
        if let Some(kappa) = config.kappa {
            lp_config.kappa = kappa;
        }
        if let Some(d) = config.delta_max {
            lp_config.delta_max = d;
        }
        Ok(Self { mode, graph: Arc::new(graph), layers, problem: Arc::new(problem), trivial, h, lp_config })
    }

    pub fn n(&self) -> usize {
        self.graph.vertex_count()
    }

    pub fn pairs(&self) -> &[(VertexId, VertexId)] {
        &self.problem.pairs
    }

    pub fn penalties(&self) -> Option<&[f64]> {
        self.problem.penalties.as_deref()
    }
}

/// How the fractional solver handled one pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairLp {
    /// Epoch whose state rounds the pair.
    pub epoch: u32,
    pub lambda: f64,
    pub outcome: ArrivalOutcome,
}

/// The fractional side of a run. It does not depend on the seed.
#[derive(Clone, Debug)]
pub struct FractionalRun {
    /// Final state of every epoch that processed a pair.
    pub states: BTreeMap<u32, FractionalState>,
    /// `None` for pairs that never reach the solver.
    pub pairs: Vec<Option<PairLp>>,
    /// Last epoch started, counting doublings that processed nothing.
    pub last_epoch: Option<u32>,
}

impl FractionalRun {
    pub fn state(&self, epoch: u32) -> &FractionalState {
        &self.states[&epoch]
    }

    /// Thresholds of `epoch` under `seed`.
    pub fn draw(&self, epoch: u32, seed: u64) -> Result<ThresholdDraw> {
        let st = self.state(epoch);
        draw_thresholds(st.slot_count(), st.problem().base_vertex_count(), epoch_seed(seed, epoch))
    }

    /// Rounding decision for `pair` under `draw` (the draw of its epoch).
    pub fn assignment(&self, pair: usize, draw: &ThresholdDraw) -> Option<Assignment> {
        let lp = self.pairs[pair]?;
        Some(match lp.outcome {
            ArrivalOutcome::Satisfied { .. } => assign(self.state(lp.epoch), draw, pair),
            _ => Assignment::Fallback,
        })
    }
}

pub fn epoch_seed(seed: u64, epoch: u32) -> u64 {
    seed ^ u64::from(epoch).wrapping_mul(EPOCH_SEED_MIX)
}

/// Feeds the pairs to the fractional solver in arrival order. The guess
/// starts at the first pair's distance bound and doubles whenever a bound
/// exceeds it or the objective overflows; each new epoch replays the
/// pairs seen so far into a fresh state.
pub fn fractional_pass(setup: &RunSetup) -> Result<FractionalRun> {
    fractional_pass_with(setup, |_, _| {})
}

/// [`fractional_pass`], calling `observe(epoch, state)` after every pair the
/// solver processes, replays included.
pub fn fractional_pass_with<F>(setup: &RunSetup, mut observe: F) -> Result<FractionalRun>
where
    F: FnMut(u32, &FractionalState),
{
    let graph = &setup.graph;
    let floor = graph.edges().iter().map(buy_plus_length).filter(|&w| w > 0.0).min_by(f64::total_cmp).unwrap_or(1.0);
    let mut states: BTreeMap<u32, FractionalState> = BTreeMap::new();
    let mut out = vec![None; setup.pairs().len()];
    let mut lambda: Option<f64> = None;
    let mut epoch = 0u32;
    let mut state: Option<(u32, FractionalState)> = None;
    let mut seen: Vec<usize> = Vec::new();
    let fresh = |lambda: f64| FractionalState::epoch_init(Arc::clone(&setup.problem), lambda, setup.lp_config.clone());
    for (i, &(s, t)) in setup.pairs().iter().enumerate() {
        if setup.trivial[i] || s == t {
            continue;
        }
        let direct = match shortest_path(graph, buy_plus_length, s, t) {
            Ok(p) => p.weight,
            Err(Error::Unreachable { .. }) => continue,
            Err(e) => return Err(e),
        };
        let bound = setup.penalties().map_or(direct, |q| direct.min(q[i]));
        match lambda {
            None => lambda = Some(bound.max(floor)),
            Some(mut l) if l < bound => {
                while l < bound {
                    l *= 2.0;
                    epoch += 1;
                }
                lambda = Some(l);
                if let Some((e, old)) = state.take() {
                    states.insert(e, old);
                }
            }
            Some(_) => {}
        }
        'epoch: loop {
            if state.is_none() {
                let mut st = fresh(lambda.expect("guess set"))?;
                for &p in &seen {
                    let outcome = st.process(p, epoch)?;
                    observe(epoch, &st);
                    if let ArrivalOutcome::EpochOverflow { .. } = outcome {
                        lambda = lambda.map(|l| 2.0 * l);
                        epoch += 1;
                        continue 'epoch;
                    }
                }
                state = Some((epoch, st));
            }
            let (_, st) = state.as_mut().expect("state set");
            let outcome = st.process(i, epoch)?;
            observe(epoch, st);
            if let ArrivalOutcome::EpochOverflow { .. } = outcome {
                let (e, old) = state.take().expect("state set");
                states.insert(e, old);
                lambda = lambda.map(|l| 2.0 * l);
                epoch += 1;
                continue;
            }
            out[i] = Some(PairLp { epoch, lambda: lambda.expect("guess set"), outcome });
            seen.push(i);
            break;
        }
    }
    if let Some((e, st)) = state {
        states.insert(e, st);
    }
    // Only epochs that rounded some pair are kept.
    states.retain(|e, _| out.iter().flatten().any(|p: &PairLp| p.epoch == *e));
    Ok(FractionalRun { states, pairs: out, last_epoch: lambda.map(|_| epoch) })
}

/// Per-root single-sink instances of one epoch.
struct Dispatch {
    up: Vec<Option<GreedySingleSink>>,
    down: Vec<Option<GreedySingleSink>>,
    gst: Vec<Option<[(GstInstance, TreeGroupGreedy); 2]>>,
}

impl Dispatch {
    fn new(n: usize) -> Self {
        Self { up: vec![None; n], down: vec![None; n], gst: (0..n).map(|_| None).collect() }
    }
}

struct Runner<'a> {
    setup: &'a RunSetup,
    up_flat: Arc<TwoMetricGraph>,
    down_flat: Arc<TwoMetricGraph>,
    forest: Option<JunctionForest>,
    epoch: Option<u32>,
    dispatch: Dispatch,
    ledger: SolutionLedger,
    penalties: PenaltyLedger,
    pull_back: Vec<PullBackCheck>,
}

impl Runner<'_> {
    /// Fresh single-sink instances for a new epoch.
    fn enter_epoch(&mut self, epoch: u32) -> Result<()> {
        if self.epoch != Some(epoch) {
            self.record_pull_back()?;
            self.dispatch = Dispatch::new(self.setup.n());
            self.epoch = Some(epoch);
        }
        Ok(())
    }

    fn record_pull_back(&mut self) -> Result<()> {
        let Some(epoch) = self.epoch else { return Ok(()) };
        let graph = &self.setup.graph;
        let layers = &self.setup.layers;
        for (insts, layered, orientation) in
            [(&self.dispatch.up, &layers.up, Orientation::Sink), (&self.dispatch.down, &layers.down, Orientation::Source)]
        {
            for (root, inst) in insts.iter().enumerate() {
                let Some(inst) = inst else { continue };
                let pulled = layered.pull_back(graph, inst.ledger())?;
                self.pull_back.push(PullBackCheck {
                    root,
                    orientation,
                    epoch,
                    layered: inst.cost()?.total,
                    pulled: solution_cost(graph, &pulled)?.total,
                });
            }
        }
        Ok(())
    }

    /// Path in the routed graph through root `r`. With a `limit`, nothing is
    /// committed when the path would cost more than it.
    fn root_path(&mut self, pair: usize, r: usize, limit: Option<f64>) -> Result<Option<Vec<EdgeId>>> {
        let (s, t) = self.setup.pairs()[pair];
        if self.setup.mode == Mode::Directed {
            return self.directed_path(s, t, r).map(Some);
        }
        let layers = Arc::clone(&self.setup.layers);
        let up = match &mut self.dispatch.up[r] {
            Some(a) => a,
            slot => slot.insert(GreedySingleSink::new(Arc::clone(&self.up_flat), layers.up.root(r), Orientation::Sink)?),
        };
        let (up_walk, _) = up.quote(layers.up.terminal(s))?;
        let down = match &mut self.dispatch.down[r] {
            Some(a) => a,
            slot => slot.insert(GreedySingleSink::new(Arc::clone(&self.down_flat), layers.down.root(r), Orientation::Source)?),
        };
        let (down_walk, _) = down.quote(layers.down.terminal(t))?;
        let mut path = layers.up.expand_walk(&up_walk)?;
        path.extend(layers.down.expand_walk(&down_walk)?);
        if limit.is_some_and(|q| self.ledger.marginal_cost(&self.setup.graph, &path) > q) {
            return Ok(None);
        }
        let committed_up = self.dispatch.up[r].as_mut().expect("created above").on_terminal(pair, layers.up.terminal(s))?;
        let committed_down =
            self.dispatch.down[r].as_mut().expect("created above").on_terminal(pair, layers.down.terminal(t))?;
        debug_assert_eq!((committed_up, committed_down), (up_walk, down_walk));
        Ok(Some(path))
    }

    fn directed_path(&mut self, s: VertexId, t: VertexId, r: usize) -> Result<Vec<EdgeId>> {
        let forest = self.forest.as_ref().expect("directed mode builds the forest");
        let n = self.setup.n();
        let entry = match &mut self.dispatch.gst[r] {
            Some(e) => e,
            slot => {
                let terminals: Vec<VertexId> = (0..n).collect();
                let mk = |side| -> Result<(GstInstance, TreeGroupGreedy)> {
                    let gst = map_to_gst(forest, forest.tree_root(r, side), &terminals)?;
                    let st = TreeGroupGreedy::new(&gst);
                    Ok((gst, st))
                };
                slot.insert([mk(Side::Up)?, mk(Side::Down)?])
            }
        };
        let [(up_gst, up_st), (down_gst, down_st)] = entry;
        let (up_member, _) = tree_group_greedy(up_gst, up_st, s)?;
        let (down_member, _) = tree_group_greedy(down_gst, down_st, t)?;
        let mut walk = member_walk(forest, up_gst, up_member)?;
        walk.extend(member_walk(forest, down_gst, down_member)?);
        forest.expand(&self.setup.layers, &walk)
    }
}

/// Runs the online algorithm on `instance`.
pub fn run_online(instance: &Instance, config: &RunConfig) -> Result<RunReport> {
    let mode = instance.resolve_mode(config.mode);
    let routing = instance.routing(mode)?;
    run_routing(mode, routing, config)
}

/// [`run_online`] on an already routed instance.
pub fn run_routing(mode: Mode, routing: Routing, config: &RunConfig) -> Result<RunReport> {
    let setup = RunSetup::new(mode, routing, config)?;
    let frac = fractional_pass(&setup)?;
    run_with(&setup, &frac, config)
}

/// Rounding and dispatch for a finished fractional pass.
pub fn run_with(setup: &RunSetup, frac: &FractionalRun, config: &RunConfig) -> Result<RunReport> {
    let graph = Arc::clone(&setup.graph);
    let pairs = setup.pairs();
    let k = pairs.len();
    let penalties = setup.penalties();
    let forest =
        if setup.mode == Mode::Directed { Some(build_h(&setup.layers, pairs, NODE_BUDGET)?) } else { None };
    let mut run = Runner {
        setup,
        up_flat: Arc::new(setup.layers.up.as_graph().clone()),
        down_flat: Arc::new(setup.layers.down.as_graph().clone()),
        forest,
        epoch: None,
        dispatch: Dispatch::new(0),
        ledger: SolutionLedger::new(),
        penalties: PenaltyLedger::new(),
        pull_back: Vec::new(),
    };
    let mut assignments = AssignmentMap::new(k);
    let mut draws: BTreeMap<u32, ThresholdDraw> = BTreeMap::new();
    let mut rows = Vec::with_capacity(k);
    let mut totals = Totals::default();
    let mut cumulative = 0.0;
    let mut shown_epoch = 0;
    let mut shown_lambda = 0.0;
    for (i, &(s, t)) in pairs.iter().enumerate() {
        let q = penalties.map(|q| q[i]);
        let before = solution_cost(&graph, &run.ledger)?.total + run.penalties.total();
        let mut root = None;
        let outcome = if setup.trivial[i] || s == t {
            "trivial"
        } else if let Some(lp) = frac.pairs[i] {
            shown_epoch = lp.epoch;
            shown_lambda = lp.lambda;
            run.enter_epoch(lp.epoch)?;
            let draw = match draws.entry(lp.epoch) {
                std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
                std::collections::btree_map::Entry::Vacant(e) => e.insert(frac.draw(lp.epoch, config.seed)?),
            };
            let a = frac.assignment(i, draw).expect("pair reached the solver");
            assignments.record(i, a)?;
            let direct = shortest_path(&graph, buy_plus_length, s, t)?.edges;
            let action = match penalties {
                Some(q) => settle(i, a, q, &mut run.penalties)?,
                None => match a {
                    Assignment::Assigned(r) => SettleAction::Route(r),
                    _ => SettleAction::Direct,
                },
            };
            match action {
                SettleAction::Paid => "dropped",
                SettleAction::Route(r) => {
                    root = Some(r);
                    match run.root_path(i, r, q) {
                        Ok(Some(path)) => {
                            run.ledger.commit_path(&graph, i, path)?;
                            "assigned"
                        }
                        Ok(None) => {
                            run.penalties.drop_pair(i, q.expect("limit implies a penalty"))?;
                            "dropped"
                        }
                        Err(e) => {
                            log::warn!("dispatch of pair {i} to root {r} failed: {e}; routing directly");
                            root = None;
                            totals.fallback_count += 1;
                            run.ledger.commit_path(&graph, i, direct)?;
                            "fallback"
                        }
                    }
                }
                SettleAction::Direct => {
                    totals.fallback_count += 1;
                    let marginal = run.ledger.marginal_cost(&graph, &direct);
                    match q {
                        Some(q) if marginal > q => {
                            run.penalties.drop_pair(i, q)?;
                            "dropped"
                        }
                        _ => {
                            run.ledger.commit_path(&graph, i, direct)?;
                            "fallback"
                        }
                    }
                }
            }
        } else if let Some(q) = q {
            run.penalties.drop_pair(i, q)?;
            "dropped"
        } else {
            log::warn!("pair {i} ({s}, {t}) is unreachable");
            totals.unserved_count += 1;
            "unserved"
        };
        let after = solution_cost(&graph, &run.ledger)?.total + run.penalties.total();
        cumulative = after;
        let penalty = if outcome == "dropped" { q.unwrap_or(0.0) } else { 0.0 };
        rows.push(ArrivalRow {
            arrival: i,
            pair: i,
            s,
            t,
            outcome: outcome.to_string(),
            root,
            marginal: after - before,
            penalty,
            cumulative,
            epoch: shown_epoch,
            lambda: shown_lambda,
        });
    }
    run.record_pull_back()?;
    let cost = solution_cost(&graph, &run.ledger)?;
    totals.buy = cost.buy;
    totals.length = cost.length;
    totals.penalty = run.penalties.total();
    totals.total = cost.total + totals.penalty;
    totals.dropped_count = run.penalties.dropped().len();
    totals.epochs = frac.last_epoch.map_or(0, |e| e + 1);
    debug_assert_eq!(totals.total, cumulative.max(totals.total));

    let (oracle, ratio) = if config.oracle {
        let o = oracle_values(&graph, pairs, penalties, &setup.trivial)?;
        let ratio = o.opt.map(|opt| ratio_of(totals.total, opt));
        (Some(o), ratio)
    } else {
        (None, None)
    };
    Ok(RunReport {
        mode: setup.mode,
        n: setup.n(),
        k,
        h: setup.h,
        seed: config.seed,
        rows,
        totals,
        oracle,
        ratio,
        assignments: (0..k).map(|i| assignments.get(i)).collect(),
        pull_back: run.pull_back,
        ledger: run.ledger,
        graph: Some(graph),
    })
}

fn ratio_of(total: f64, opt: f64) -> f64 {
    if opt > 0.0 {
        total / opt
    } else if total == 0.0 {
        1.0
    } else {
        f64::INFINITY
    }
}

/// Oracle values for the servable pairs. The optimum must fit the oracle
/// budget; the junction optimum and LP bound are left empty when they do not.
pub fn oracle_values(
    graph: &TwoMetricGraph,
    pairs: &[(VertexId, VertexId)],
    penalties: Option<&[f64]>,
    trivial: &[bool],
) -> Result<OracleValues> {
    let budget = OracleBudget::default();
    let keep: Vec<usize> = (0..pairs.len()).filter(|&i| !trivial[i] && pairs[i].0 != pairs[i].1).collect();
    if let Some(q) = penalties {
        let sub: Vec<_> = keep.iter().map(|&i| pairs[i]).collect();
        let sub_q: Vec<_> = keep.iter().map(|&i| q[i]).collect();
        let opt = prize_offline_opt(graph, &sub, &sub_q, &budget)?;
        let junction = prize_junction_opt(graph, &sub, &sub_q, &budget)
            .map_err(|e| log::warn!("junction_opt unavailable: {e}"))
            .ok();
        return Ok(OracleValues { opt: Some(opt), junction_opt: junction, lp_lb: None });
    }
    let reach = |&(s, t): &(VertexId, VertexId)| shortest_path(graph, buy_plus_length, s, t).is_ok();
    let sub: Vec<_> = keep.iter().map(|&i| pairs[i]).filter(reach).collect();
    let opt = offline_opt(graph, &sub, &budget)?.0;
    let warn = |what: &str, e: &Error| log::warn!("{what} unavailable: {e}");
    let junction = junction_opt(graph, &sub, &budget).map_err(|e| warn("junction_opt", &e)).ok();
    let lb = lp_lb(graph, &sub).map_err(|e| warn("lp_lb", &e)).ok();
    Ok(OracleValues { opt: Some(opt), junction_opt: junction, lp_lb: lb })
}

/// One entry of an experiment suite. Paths are relative to the suite file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteRun {
    pub instance: PathBuf,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub h: Option<usize>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub delta_max: Option<f64>,
    #[serde(default = "default_true")]
    pub oracle: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub runs: Vec<SuiteRun>,
}

pub const EXPERIMENT_COLUMNS: [&str; 11] =
    ["instance", "n", "k", "mode", "online_total", "opt", "junction_opt", "ratio", "fallback_rate", "epochs", "wall_ms"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub instance: String,
    pub n: Option<usize>,
    pub k: Option<usize>,
    pub mode: Option<Mode>,
    pub online_total: Option<f64>,
    pub opt: Option<f64>,
    pub junction_opt: Option<f64>,
    pub ratio: Option<f64>,
    pub fallback_rate: Option<f64>,
    pub epochs: Option<u32>,
    pub wall_ms: Option<u128>,
    #[serde(skip)]
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub runs: usize,
    pub failures: usize,
    pub max_ratio: Option<f64>,
    pub geomean_ratio: Option<f64>,
}

impl std::fmt::Display for ExperimentSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        write!(
            f,
            "runs={} failures={} max_ratio={} geomean_ratio={}",
            self.runs,
            self.failures,
            show(self.max_ratio),
            show(self.geomean_ratio)
        )
    }
}

pub fn summarize(rows: &[ExperimentRow]) -> ExperimentSummary {
    let ratios: Vec<f64> = rows.iter().filter_map(|r| r.ratio).filter(|r| r.is_finite() && *r > 0.0).collect();
    ExperimentSummary {
        runs: rows.len(),
        failures: rows.iter().filter(|r| r.error.is_some()).count(),
        max_ratio: ratios.iter().copied().max_by(f64::total_cmp),
        geomean_ratio: (!ratios.is_empty())
            .then(|| (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp()),
    }
}

/// Runs every entry of a suite; failures are recorded and the suite goes on.
pub fn run_suite(suite: &Suite, base: &Path) -> Vec<ExperimentRow> {
    suite
        .runs
        .iter()
        .map(|entry| {
            let path = base.join(&entry.instance);
            let name = entry.instance.display().to_string();
            let config = RunConfig {
                mode: entry.mode,
                h: entry.h,
                kappa: entry.kappa,
                delta_max: entry.delta_max,
                seed: entry.seed,
                oracle: entry.oracle,
                ..RunConfig::default()
            };
            let started = Instant::now();
            match Instance::load(&path).and_then(|inst| run_online(&inst, &config)) {
                Ok(rep) => ExperimentRow {
                    instance: name,
                    n: Some(rep.n),
                    k: Some(rep.k),
                    mode: Some(rep.mode),
                    online_total: Some(rep.totals.total),
                    opt: rep.oracle.as_ref().and_then(|o| o.opt),
                    junction_opt: rep.oracle.as_ref().and_then(|o| o.junction_opt),
                    ratio: rep.ratio,
                    fallback_rate: Some(rep.fallback_rate()),
                    epochs: Some(rep.totals.epochs),
                    wall_ms: Some(started.elapsed().as_millis()),
                    error: None,
                },
                Err(e) => ExperimentRow {
                    instance: name,
                    n: None,
                    k: None,
                    mode: entry.mode,
                    online_total: None,
                    opt: None,
                    junction_opt: None,
                    ratio: None,
                    fallback_rate: None,
                    epochs: None,
                    wall_ms: Some(started.elapsed().as_millis()),
                    error: Some(e.to_string()),
                },
            }
        })
        .collect()
}

pub fn experiment_csv(rows: &[ExperimentRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(EXPERIMENT_COLUMNS)?;
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        w.write_record([
            r.instance.clone(),
            r.n.map(|v| v.to_string()).unwrap_or_default(),
            r.k.map(|v| v.to_string()).unwrap_or_default(),
            r.mode.map(|m| m.to_string()).unwrap_or_default(),
            opt(r.online_total),
            opt(r.opt),
            opt(r.junction_opt),
            opt(r.ratio),
            opt(r.fallback_rate),
            r.epochs.map(|v| v.to_string()).unwrap_or_default(),
            r.wall_ms.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Loads a suite file and runs it.
pub fn experiment(suite_path: &Path) -> Result<(String, ExperimentSummary)> {
    let suite: Suite = serde_json::from_str(&std::fs::read_to_string(suite_path)?)?;
    let base = suite_path.parent().unwrap_or(Path::new("."));
    let rows = run_suite(&suite, base);
    for r in rows.iter().filter(|r| r.error.is_some()) {
        log::warn!("{} failed: {}", r.instance, r.error.as_deref().unwrap_or_default());
    }
    Ok((experiment_csv(&rows)?, summarize(&rows)))
}
