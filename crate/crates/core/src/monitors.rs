//! Online invariant monitors.
//!
//! The monitors are side-effect-free observers over the global state
//! vector, evaluated after every processed event. Radio phases only change
//! at events, so checking at event boundaries is equivalent to checking
//! over the intervals between them.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::params::NodeId;
use crate::protocol::NodeState;
use crate::topology::Topology;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum InvariantId {
    /// Whenever a node is sending, all its neighbors are receiving.
    Inv1,
    /// No two distinct nodes with a common neighbor send simultaneously.
    Inv2,
    /// Every reachable state has a successor (checked by the explorer).
    Inv3,
}

impl fmt::Display for InvariantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InvariantId::Inv1 => write!(f, "INV1"),
            InvariantId::Inv2 => write!(f, "INV2"),
            InvariantId::Inv3 => write!(f, "INV3"),
        }
    }
}

/// A property failure at the earliest event boundary where it holds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub invariant: InvariantId,
    /// Global time of the violating event boundary.
    pub time: u64,
    /// Offending nodes: (sender, deaf neighbor) for INV1,
    /// (sender, sender, common neighbor) for INV2.
    pub witnesses: Vec<NodeId>,
    pub description: String,
    /// Length of the trace prefix up to and including the violation.
    pub trace_len: usize,
}

impl Violation {
    /// One-line serialization: invariant, time, witnesses, description.
    pub fn to_line(&self) -> String {
        let witnesses = self
            .witnesses
            .iter()
            .map(|w| format!("{w}"))
            .collect::<Vec<_>>()
            .join(" ");
        format!(
            "{},{},{},{}",
            self.invariant, self.time, witnesses, self.description
        )
    }
}

/// Which monitors a run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MonitorSet {
    pub inv1: bool,
    pub inv2: bool,
}

impl MonitorSet {
    pub fn all() -> Self {
        Self {
            inv1: true,
            inv2: true,
        }
    }

    pub fn none() -> Self {
        Self {
            inv1: false,
            inv2: false,
        }
    }

    pub fn is_empty(&self) -> bool {
        !self.inv1 && !self.inv2
    }
}

impl Default for MonitorSet {
    fn default() -> Self {
        Self::all()
    }
}

/// Fires iff some node is sending while a neighbor is not receiving.
/// `time` and `trace_len` are filled in by the caller.
pub fn check_inv1(states: &[NodeState], topology: &Topology) -> Option<Violation> {
    for (i, s) in states.iter().enumerate() {
        if !s.radio.is_sending() {
            continue;
        }
        for j in topology.neighbors(i) {
            if !states[j].radio.is_receiving() {
                return Some(Violation {
                    invariant: InvariantId::Inv1,
                    time: 0,
                    witnesses: vec![i, j],
                    description: format!("node {i} is sending but neighbor {j} is not receiving"),
                    trace_len: 0,
                });
            }
        }
    }
    None
}

/// Fires iff two distinct senders share a common neighbor.
pub fn check_inv2(states: &[NodeState], topology: &Topology) -> Option<Violation> {
    let senders: Vec<NodeId> = states
        .iter()
        .enumerate()
        .filter(|(_, s)| s.radio.is_sending())
        .map(|(i, _)| i)
        .collect();
    for (a, &i) in senders.iter().enumerate() {
        for &j in &senders[a + 1..] {
            for k in 0..states.len() {
                if topology.neighbor(i, k) && topology.neighbor(j, k) {
                    return Some(Violation {
                        invariant: InvariantId::Inv2,
                        time: 0,
                        witnesses: vec![i, j, k],
                        description: format!(
                            "nodes {i} and {j} send simultaneously with common neighbor {k}"
                        ),
                        trace_len: 0,
                    });
                }
            }
        }
    }
    None
}

/// Fires iff an explorer state has no successor. In the simulation engine a
/// clock tick is always enabled, so this can only ever fire inside the
/// explorer, and there it never should.
pub fn check_progress(successor_count: usize) -> Option<Violation> {
    if successor_count == 0 {
        Some(Violation {
            invariant: InvariantId::Inv3,
            time: 0,
            witnesses: Vec::new(),
            description: String::from("reachable state has no successor"),
            trace_len: 0,
        })
    } else {
        None
    }
}
