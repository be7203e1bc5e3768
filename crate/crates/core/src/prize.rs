//! Prize-collecting variant: every pair may be discarded for its penalty.
//!
//! The composite LP gains a discard root. Pair `i` reaches it through two
//! private arcs, `s_i -> discard` and `discard -> t_i`, each of length
//! `q_i / 2` and no buying cost, so choosing it fractionally costs
//! `q_i * z[i][discard]`.

use serde::{Deserialize, Serialize};

use crate::composite::CompositeProblem;
use crate::error::{Error, Result};
use crate::graph::VertexId;
use crate::rounding::Assignment;

/// One private arc to or from the discard root.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyArc {
    pub pair: usize,
    pub from_terminal: bool,
    pub terminal: VertexId,
    pub cost: f64,
    pub length: f64,
}

/// The discard root and its pair-private arcs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PenaltyAugmentation {
    /// Slot of the discard root in the composite LP.
    pub slot: usize,
    pub arcs: Vec<PenaltyArc>,
}

impl PenaltyAugmentation {
    pub fn arcs_of(&self, pair: usize) -> (&PenaltyArc, &PenaltyArc) {
        (&self.arcs[2 * pair], &self.arcs[2 * pair + 1])
    }
}

/// Adds the discard root to `problem`.
pub fn augment(problem: CompositeProblem, penalties: Vec<f64>) -> Result<(CompositeProblem, PenaltyAugmentation)> {
    let problem = problem.with_penalties(penalties)?;
    let q = problem.penalties.as_ref().expect("penalties set");
    let slot = problem.virtual_slot().expect("penalties set");
    let mut arcs = Vec::with_capacity(2 * q.len());
    for (i, (&(s, t), &qi)) in problem.pairs.iter().zip(q).enumerate() {
        arcs.push(PenaltyArc { pair: i, from_terminal: true, terminal: s, cost: 0.0, length: qi / 2.0 });
        arcs.push(PenaltyArc { pair: i, from_terminal: false, terminal: t, cost: 0.0, length: qi / 2.0 });
    }
    Ok((problem, PenaltyAugmentation { slot, arcs }))
}

/// Penalties paid for discarded pairs.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PenaltyLedger {
    dropped: Vec<(usize, f64)>,
    total: f64,
}

impl PenaltyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn dropped(&self) -> &[(usize, f64)] {
        &self.dropped
    }

    pub fn is_dropped(&self, pair: usize) -> bool {
        self.dropped.iter().any(|&(p, _)| p == pair)
    }

    /// Records that `pair` is discarded at penalty `q`.
    pub fn drop_pair(&mut self, pair: usize, q: f64) -> Result<()> {
        if self.is_dropped(pair) {
            return Err(Error::integrity(format!("pair {pair} dropped twice")));
        }
        self.dropped.push((pair, q));
        self.total += q;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SettleAction {
    /// Pay the penalty and route nothing.
    Paid,
    /// Route through the given root.
    Route(usize),
    /// Route on the direct shortest path.
    Direct,
}

/// Turns a rounding outcome into an accounting action.
pub fn settle(pair: usize, assignment: Assignment, penalties: &[f64], ledger: &mut PenaltyLedger) -> Result<SettleAction> {
    match assignment {
        Assignment::Dropped => {
            let q = *penalties.get(pair).ok_or_else(|| Error::invalid(format!("pair {pair} has no penalty")))?;
            ledger.drop_pair(pair, q)?;
            Ok(SettleAction::Paid)
        }
        Assignment::Assigned(r) => Ok(SettleAction::Route(r)),
        Assignment::Fallback => Ok(SettleAction::Direct),
    }
}
