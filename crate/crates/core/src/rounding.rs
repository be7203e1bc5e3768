//! Partial rounding: per-root random thresholds turn the fractional root
//! choice of each pair into a single root, while the inner flows stay
//! fractional (scaled up by `1/τ_r`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::composite::{FractionalState, Side};
use crate::error::{Error, Result};
use crate::flow::max_flow;

/// One threshold per root slot, drawn once per epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdDraw {
    pub taus: Vec<f64>,
    pub seed: u64,
}

impl ThresholdDraw {
    pub fn tau(&self, slot: usize) -> f64 {
        self.taus[slot]
    }
}

/// Closed interval the thresholds are drawn from for `n` vertices.
pub fn threshold_interval(n: usize) -> (f64, f64) {
    let n = n as f64;
    let lo = 1.0 / (2.0 * n);
    let hi = (lo * (1.0 + 1e-12)).max(1.0 / (3.0 * n.log2()));
    (lo, hi)
}

/// Draws `slots` independent thresholds, uniform on
/// [`threshold_interval`]`(n)`.
pub fn draw_thresholds(slots: usize, n: usize, seed: u64) -> Result<ThresholdDraw> {
    if n < 2 {
        return Err(Error::invalid(format!("threshold draw needs n >= 2, got {n}")));
    }
    let (lo, hi) = threshold_interval(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let taus = (0..slots).map(|_| rng.gen_range(lo..=hi)).collect();
    Ok(ThresholdDraw { taus, seed })
}

/// The fractional state divided by the thresholds and capped at 1.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaledSolution {
    pub x: Vec<Vec<f64>>,
    /// `[pair][slot]`, allocated for eligible roots only.
    pub flows: Vec<Vec<Option<Vec<f64>>>>,
    pub z: Vec<Vec<bool>>,
}

pub fn scale(state: &FractionalState, draw: &ThresholdDraw) -> ScaledSolution {
    let slots = state.slot_count();
    let pairs = state.problem().pairs.len();
    let cap = |v: f64, slot: usize| (v / draw.tau(slot)).min(1.0);
    let x = (0..slots).map(|s| (0..state.key_count(s)).map(|k| cap(state.x(s, k), s)).collect()).collect();
    let flows = (0..pairs)
        .map(|i| (0..slots).map(|s| state.flows(s, i).map(|f| f.iter().map(|&v| cap(v, s)).collect())).collect())
        .collect();
    let z = (0..pairs).map(|i| (0..slots).map(|s| state.z(i, s) >= draw.tau(s)).collect()).collect();
    ScaledSolution { x, flows, z }
}

/// Maximum flow of the scaled flows of `pair` through root `slot`, per side.
pub fn scaled_cut(state: &FractionalState, draw: &ThresholdDraw, pair: usize, slot: usize) -> (f64, f64) {
    let Some(f) = state.flows(slot, pair) else { return (0.0, 0.0) };
    let tau = draw.tau(slot);
    let value = |side| {
        let (net, _) = state.side_network(slot, pair, side, |key, _| (f[key] / tau).min(1.0));
        max_flow(&net.net, net.source, net.sink).value
    };
    (value(Side::Up), value(Side::Down))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "root", rename_all = "lowercase")]
pub enum Assignment {
    Assigned(usize),
    Fallback,
    /// Rounded to the discard root.
    Dropped,
}

/// Rounds pair `pair`: the root with the largest `z` among those reaching
/// their threshold (smallest id on ties), or `Fallback` if none does.
pub fn assign(state: &FractionalState, draw: &ThresholdDraw, pair: usize) -> Assignment {
    assign_row(state.z_row(pair), &draw.taus, state.problem().virtual_slot())
}

/// [`assign`] on a bare row of root weights.
pub fn assign_row(z: &[f64], taus: &[f64], virtual_slot: Option<usize>) -> Assignment {
    let mut best: Option<(usize, f64)> = None;
    for (slot, (&z, &tau)) in z.iter().zip(taus).enumerate() {
        if z > 0.0 && z >= tau && best.is_none_or(|(_, b)| z > b) {
            best = Some((slot, z));
        }
    }
    match best {
        None => Assignment::Fallback,
        Some((slot, _)) if Some(slot) == virtual_slot => Assignment::Dropped,
        Some((slot, _)) => Assignment::Assigned(slot),
    }
}

/// Write-once record of every pair's rounding decision.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AssignmentMap {
    entries: Vec<Option<Assignment>>,
}

impl AssignmentMap {
    pub fn new(pairs: usize) -> Self {
        Self { entries: vec![None; pairs] }
    }

    pub fn record(&mut self, pair: usize, a: Assignment) -> Result<()> {
        let slot = self.entries.get_mut(pair).ok_or_else(|| Error::invalid(format!("pair {pair} out of range")))?;
        if let Some(prev) = slot {
            return Err(Error::integrity(format!("pair {pair} already assigned as {prev:?}")));
        }
        *slot = Some(a);
        Ok(())
    }

    pub fn get(&self, pair: usize) -> Option<Assignment> {
        self.entries.get(pair).copied().flatten()
    }

    pub fn fallback_count(&self) -> usize {
        self.entries.iter().filter(|a| matches!(a, Some(Assignment::Fallback))).count()
    }
}

/// One line of the assignment trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub pair: usize,
    pub outcome: String,
    pub root: Option<usize>,
    pub z_value: Option<f64>,
    pub tau: Option<f64>,
}

impl AssignmentRow {
    pub fn new(state: &FractionalState, draw: &ThresholdDraw, pair: usize, a: Assignment) -> Self {
        let (outcome, root) = match a {
            Assignment::Assigned(r) => ("assigned", Some(r)),
            Assignment::Fallback => ("fallback", None),
            Assignment::Dropped => ("dropped", state.problem().virtual_slot()),
        };
        Self {
            pair,
            outcome: outcome.to_string(),
            root,
            z_value: root.map(|r| state.z(pair, r)),
            tau: root.map(|r| draw.tau(r)),
        }
    }
}
