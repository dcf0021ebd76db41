//! Bounded exhaustive exploration of tick interleavings for tiny instances.
//!
//! Clock drift is the only source of nondeterminism: each inter-tick gap is
//! chosen independently from the node's `[min, max]` interval. The explorer
//! branches over every admissible choice, processes simultaneous events
//! with the engine's exact tie-breaks, and memoizes visited states under a
//! time-shift abstraction: states are keyed by relative ticks-to-fire
//! rather than absolute times, which keeps the reachable set finite.
//!
//! A search result is explicitly bounded evidence, not a proof: exhausting
//! the space to a depth only certifies the absence of violations up to that
//! depth.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::rc::Rc;
use alloc::vec;
use alloc::vec::Vec;

use crate::engine::{emit_controller_records, emit_recv_records, emit_tick_records, Trace};
use crate::monitors::{check_inv1, check_inv2, check_progress, MonitorSet, Violation};
use crate::params::{NodeId, ProtocolParams};
use crate::protocol::{NodeState, RadioPhase};
use crate::step::{deliver_end_of_transmission, initial_states, tick_node, EotEligibility};
use crate::topology::Topology;

/// A search state under the time-shift abstraction: per-node ticks until
/// the next clock tick (at least one is zero) plus the full automaton
/// configuration of every node. Equal states have identical futures.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct CanonicalState {
    /// Real-time units until each node's next tick, relative to the
    /// instant about to be processed; the minimum is always zero.
    pub deltas: Vec<u64>,
    pub nodes: Vec<NodeState>,
}

impl CanonicalState {
    /// Nodes whose tick fires at this state's instant.
    pub fn due(&self) -> Vec<NodeId> {
        self.deltas
            .iter()
            .enumerate()
            .filter(|(_, &d)| d == 0)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Outcome of processing all events of one instant.
struct InstantResult {
    violation: Option<Violation>,
    overflow: Option<NodeId>,
}

/// Applies the events of one instant in engine order: end-of-transmission
/// deliveries for due senders (ascending id), then one tick per due node
/// (ascending id). Monitors run after every event, and processing stops at
/// the first violation, exactly as the engine stops mid-instant. Delivery
/// uses end-instant eligibility, the modeled radio semantics.
fn apply_instant(
    p: &ProtocolParams,
    topology: &Topology,
    monitors: MonitorSet,
    nodes: &mut [NodeState],
    due: &[NodeId],
    mut trace: Option<(&mut Trace, u64)>,
) -> InstantResult {
    let check = |nodes: &[NodeState]| -> Option<Violation> {
        if monitors.inv1 {
            if let Some(v) = check_inv1(nodes, topology) {
                return Some(v);
            }
        }
        if monitors.inv2 {
            if let Some(v) = check_inv2(nodes, topology) {
                return Some(v);
            }
        }
        None
    };

    // Transmissions ending at this instant were armed one tick earlier and
    // sort before every tick of the instant.
    for &sender in due {
        if nodes[sender].radio == (RadioPhase::Sending { remaining: 1 }) {
            let recipients =
                deliver_end_of_transmission(topology, nodes, sender, EotEligibility::EndInstant);
            if let Some((trace, time)) = trace.as_mut() {
                emit_recv_records(*time, &recipients, nodes, trace);
            }
            if let Some(violation) = check(nodes) {
                return InstantResult {
                    violation: Some(violation),
                    overflow: None,
                };
            }
        }
    }

    for &node in due {
        let report = tick_node(&mut nodes[node], p, node);
        if report.tick.overflow {
            return InstantResult {
                violation: None,
                overflow: Some(node),
            };
        }
        if let Some((trace, time)) = trace.as_mut() {
            emit_tick_records(*time, node, &report, &nodes[node], trace);
        }
        if report.began_sending() && report.finished_sending() {
            // Zero-length transmission: delivered within the same event.
            let recipients =
                deliver_end_of_transmission(topology, nodes, node, EotEligibility::EndInstant);
            if let Some((trace, time)) = trace.as_mut() {
                emit_recv_records(*time, &recipients, nodes, trace);
            }
        }
        if let Some(violation) = check(nodes) {
            return InstantResult {
                violation: Some(violation),
                overflow: None,
            };
        }
    }

    InstantResult {
        violation: None,
        overflow: None,
    }
}

/// Enumerates every interval combination for the due nodes and assembles
/// canonicalized successors. Each result carries the choice vector aligned
/// with `due` and already normalized so the minimum delta is zero.
fn branch(
    p: &ProtocolParams,
    base_deltas: &[u64],
    nodes: &[NodeState],
    due: &[NodeId],
) -> Vec<(CanonicalState, Vec<u64>)> {
    fn recurse(
        p: &ProtocolParams,
        base_deltas: &[u64],
        nodes: &[NodeState],
        due: &[NodeId],
        current: &mut Vec<u64>,
        out: &mut Vec<(CanonicalState, Vec<u64>)>,
    ) {
        if current.len() == due.len() {
            let mut deltas = base_deltas.to_vec();
            for (k, &node) in due.iter().enumerate() {
                deltas[node] = current[k];
            }
            let shift = deltas.iter().copied().min().unwrap_or(0);
            for d in &mut deltas {
                *d -= shift;
            }
            out.push((
                CanonicalState {
                    deltas,
                    nodes: nodes.to_vec(),
                },
                current.clone(),
            ));
            return;
        }
        let id = due[current.len()];
        for c in p.tick_min[id]..=p.tick_max[id] {
            current.push(c);
            recurse(p, base_deltas, nodes, due, current, out);
            current.pop();
        }
    }
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(due.len());
    recurse(p, base_deltas, nodes, due, &mut current, &mut out);
    out
}

/// The transition relation alone: all canonicalized successors of `s`, one
/// per admissible interval combination of the nodes ticking at this
/// instant. Monitors are not consulted. A phase-buffer overflow halts the
/// branch (no successors); it cannot arise in well-configured instances.
pub fn successors(s: &CanonicalState, p: &ProtocolParams, t: &Topology) -> Vec<CanonicalState> {
    let due = s.due();
    let mut nodes = s.nodes.clone();
    let result = apply_instant(p, t, MonitorSet::none(), &mut nodes, &due, None);
    if result.overflow.is_some() {
        return Vec::new();
    }
    branch(p, &s.deltas, &nodes, &due)
        .into_iter()
        .map(|(state, _)| state)
        .collect()
}

/// Exploration bounds and monitor selection.
#[derive(Debug, Clone)]
pub struct ExploreConfig {
    /// Depth bound counted in instants (global tick events).
    pub max_depth: u64,
    /// Visited-state budget; exceeding it yields an inconclusive verdict.
    pub max_states: usize,
    pub monitors: MonitorSet,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            max_depth: 1 << 12,
            max_states: 1 << 21,
            monitors: MonitorSet::all(),
        }
    }
}

/// A violating execution in replayable form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViolationPath {
    /// Per-node inter-tick interval sequences realizing the execution;
    /// feeding them to the engine as an explicit schedule reproduces the
    /// violation.
    pub schedule: Vec<Vec<u64>>,
    /// Instants processed up to and including the violating one.
    pub instants: u64,
    /// Absolute time of the violating instant.
    pub time: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExploreVerdict {
    /// Every execution is violation-free up to the explored depth. When
    /// memoization exhausts the reachable set early, `depth` reports how
    /// deep the search actually got.
    ExhaustedOk { depth: u64 },
    /// Shortest violating execution found (by instant count).
    Violation {
        violation: Violation,
        path: ViolationPath,
    },
    /// State budget exceeded before the depth bound.
    Inconclusive { states_explored: usize, depth: u64 },
    /// A phase-error buffer overflowed: configuration out of budget.
    Aborted { node: NodeId },
}

impl ExploreVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, ExploreVerdict::ExhaustedOk { .. })
    }

    pub fn violation(&self) -> Option<&Violation> {
        match self {
            ExploreVerdict::Violation { violation, .. } => Some(violation),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExploreOutcome {
    pub verdict: ExploreVerdict,
    pub states_explored: usize,
}

struct EdgeInfo {
    parent: Option<Rc<CanonicalState>>,
    /// Interval choices (node, interval) drawn on the edge into this state.
    choices: Vec<(NodeId, u64)>,
    /// Absolute time of this state's instant along the discovery path.
    time: u64,
    depth: u64,
}

fn reconstruct_schedule(
    p: &ProtocolParams,
    meta: &BTreeMap<Rc<CanonicalState>, EdgeInfo>,
    last: &Rc<CanonicalState>,
) -> Vec<Vec<u64>> {
    let mut reversed: Vec<Vec<(NodeId, u64)>> = Vec::new();
    let mut cursor = last.clone();
    loop {
        let info = &meta[&cursor];
        reversed.push(info.choices.clone());
        match &info.parent {
            Some(parent) => cursor = parent.clone(),
            None => break,
        }
    }
    reversed.reverse();
    let mut schedule = vec![Vec::new(); p.n_nodes];
    for step in reversed {
        for (node, interval) in step {
            schedule[node].push(interval);
        }
    }
    schedule
}

/// Breadth-first search over all tick interleavings up to `max_depth`
/// instants, memoizing canonical states. Returns the shortest violating
/// path or a bounded all-clear.
pub fn explore(p: &ProtocolParams, t: &Topology, config: &ExploreConfig) -> ExploreOutcome {
    let mut meta: BTreeMap<Rc<CanonicalState>, EdgeInfo> = BTreeMap::new();
    let mut frontier: VecDeque<Rc<CanonicalState>> = VecDeque::new();
    let mut deepest = 0u64;

    // Roots: the initial controller pass runs before any clock tick, then
    // each combination of first intervals forms one root. The elapsed time
    // to a root's instant is the smallest of its first intervals.
    let (init_nodes, _) = initial_states(p, &[]);
    let all: Vec<NodeId> = (0..p.n_nodes).collect();
    for (state, choice_vec) in branch(p, &vec![0; p.n_nodes], &init_nodes, &all) {
        let time = choice_vec.iter().copied().min().unwrap_or(0);
        let state = Rc::new(state);
        if !meta.contains_key(&state) {
            meta.insert(
                state.clone(),
                EdgeInfo {
                    parent: None,
                    choices: all.iter().copied().zip(choice_vec).collect(),
                    time,
                    depth: 0,
                },
            );
            frontier.push_back(state);
        }
    }

    while let Some(state) = frontier.pop_front() {
        let (depth, time) = {
            let info = &meta[&state];
            (info.depth, info.time)
        };
        deepest = deepest.max(depth);
        if depth >= config.max_depth {
            continue;
        }

        let due = state.due();
        let mut nodes = state.nodes.clone();
        let result = apply_instant(p, t, config.monitors, &mut nodes, &due, None);

        if let Some(node) = result.overflow {
            return ExploreOutcome {
                verdict: ExploreVerdict::Aborted { node },
                states_explored: meta.len(),
            };
        }

        if let Some(mut violation) = result.violation {
            violation.time = time;
            let schedule = reconstruct_schedule(p, &meta, &state);
            return ExploreOutcome {
                verdict: ExploreVerdict::Violation {
                    violation,
                    path: ViolationPath {
                        schedule,
                        instants: depth + 1,
                        time,
                    },
                },
                states_explored: meta.len(),
            };
        }

        let branches = branch(p, &state.deltas, &nodes, &due);
        if let Some(violation) = check_progress(branches.len()) {
            // Unreachable by construction: some tick is always enabled.
            let schedule = reconstruct_schedule(p, &meta, &state);
            return ExploreOutcome {
                verdict: ExploreVerdict::Violation {
                    violation,
                    path: ViolationPath {
                        schedule,
                        instants: depth + 1,
                        time,
                    },
                },
                states_explored: meta.len(),
            };
        }

        for (succ, choice_vec) in branches {
            if meta.len() >= config.max_states {
                return ExploreOutcome {
                    verdict: ExploreVerdict::Inconclusive {
                        states_explored: meta.len(),
                        depth: deepest,
                    },
                    states_explored: meta.len(),
                };
            }
            let succ = Rc::new(succ);
            if meta.contains_key(&succ) {
                continue;
            }
            // Elapsed time to the successor's instant: the normalization
            // shift of its pre-canonical deltas.
            let mut pre = state.deltas.clone();
            for (k, &node) in due.iter().enumerate() {
                pre[node] = choice_vec[k];
            }
            let shift = pre.iter().copied().min().unwrap_or(0);
            meta.insert(
                succ.clone(),
                EdgeInfo {
                    parent: Some(state.clone()),
                    choices: due.iter().copied().zip(choice_vec).collect(),
                    time: time + shift,
                    depth: depth + 1,
                },
            );
            frontier.push_back(succ);
        }
    }

    ExploreOutcome {
        verdict: ExploreVerdict::ExhaustedOk { depth: deepest },
        states_explored: meta.len(),
    }
}

/// Depth expressed in frames assuming lock-step clocks: `frames * C * k0`
/// instants. With drifting clocks, instants outnumber per-node ticks, so
/// this understates how far individual nodes get; it is exact for
/// `min = max`.
pub fn explore_frames(
    p: &ProtocolParams,
    t: &Topology,
    frames: u64,
    monitors: MonitorSet,
) -> ExploreOutcome {
    let config = ExploreConfig {
        max_depth: frames * p.frame_len(),
        monitors,
        ..ExploreConfig::default()
    };
    explore(p, t, &config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockstepError {
    /// Some node has `min != max`; the execution is not unique.
    NotDeterministic { node: NodeId },
    /// A phase-error buffer overflowed.
    Overflow { node: NodeId },
}

/// Drives the unique execution of a deterministic instance (`min == max`
/// for every node) through the explorer's transition machinery, recording
/// the same trace records the engine emits, with the engine's stopping
/// rule: processing halts right after the tick on which node 0 completes
/// `horizon_frames` frames. Monitors are not evaluated; use it on
/// violation-free configurations to check engine conformance.
pub fn lockstep_trace(
    p: &ProtocolParams,
    t: &Topology,
    horizon_frames: u64,
) -> Result<Trace, LockstepError> {
    for id in 0..p.n_nodes {
        if p.tick_min[id] != p.tick_max[id] {
            return Err(LockstepError::NotDeterministic { node: id });
        }
    }

    let mut trace = Trace::new(usize::MAX);
    let (mut nodes, init_actions) = initial_states(p, &[]);
    for (node, act) in init_actions.iter().enumerate() {
        emit_controller_records(0, node, act, &nodes[node], &mut trace);
    }

    let mut deltas: Vec<u64> = (0..p.n_nodes).map(|id| p.tick_min[id]).collect();
    let mut time = 0u64;
    let mut wraps = 0u64;

    'run: loop {
        let shift = deltas.iter().copied().min().unwrap_or(0);
        time += shift;
        for d in &mut deltas {
            *d -= shift;
        }
        let due: Vec<NodeId> = (0..p.n_nodes).filter(|&i| deltas[i] == 0).collect();

        for &sender in &due {
            if nodes[sender].radio == (RadioPhase::Sending { remaining: 1 }) {
                let recipients = deliver_end_of_transmission(
                    t,
                    &mut nodes,
                    sender,
                    EotEligibility::EndInstant,
                );
                emit_recv_records(time, &recipients, &nodes, &mut trace);
            }
        }
        for &node in &due {
            let report = tick_node(&mut nodes[node], p, node);
            if report.tick.overflow {
                return Err(LockstepError::Overflow { node });
            }
            emit_tick_records(time, node, &report, &nodes[node], &mut trace);
            if report.began_sending() && report.finished_sending() {
                let recipients =
                    deliver_end_of_transmission(t, &mut nodes, node, EotEligibility::EndInstant);
                emit_recv_records(time, &recipients, &nodes, &mut trace);
            }
            deltas[node] = p.tick_min[node];
            if node == 0 && report.tick.frame_wrapped {
                wraps += 1;
                if wraps > horizon_frames {
                    break 'run;
                }
            }
        }
    }

    Ok(trace)
}
