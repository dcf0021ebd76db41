//! Global discrete-event scheduler.
//!
//! Node clocks tick on a shared integer real-time axis. Each tick event
//! drives one node's automaton; end-of-transmission events carry messages
//! to every listening neighbor. Processing order is lexicographic in
//! (time, kind, node id) with end-of-transmission strictly before ticks at
//! the same instant, so a message whose transmission ends exactly at a
//! receiver's tick is stored with that tick's clock reading. That makes a
//! perfectly synchronized network measure phase error zero everywhere.
//!
//! An end-of-transmission coincides with the sender's final sending tick;
//! its timestamp is known one tick in advance (the sender's next tick is
//! already scheduled), so the event is enqueued ahead of time and sorts
//! before all ticks at its instant.
//!
//! Everything is deterministic: identical parameters, topology, and drift
//! policy (including the jitter seed) reproduce bit-identical traces.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};
use core::fmt;

use crate::frame::circular_distance;
use crate::monitors::{check_inv1, check_inv2, MonitorSet, Violation};
use crate::params::{validate_params, ConstraintViolation, NodeId, ProtocolParams};
use crate::protocol::{NodeState, RadioPhase};
use crate::rng::SplitMix64;
use crate::step::{
    deliver_end_of_transmission, initial_states, tick_node, ControllerActions, EotEligibility,
    FullTickReport,
};
use crate::topology::{validate_slot_allocation, Topology};

/// A timestamped occurrence on the global axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Event {
    /// Global time in real-time units.
    pub time: u64,
    pub kind: EventKind,
    /// Tie-break ordinal within (time, kind); the engine uses the subject
    /// node id, which realizes the ascending-id tie-break.
    pub seq: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    /// A transmission by `sender` ends now.
    EndOfTransmission { sender: NodeId },
    /// Hardware clock tick of `node`.
    Tick { node: NodeId },
}

impl EventKind {
    fn rank(&self) -> u8 {
        match self {
            EventKind::EndOfTransmission { .. } => 0,
            EventKind::Tick { .. } => 1,
        }
    }
}

impl Ord for Event {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.kind.rank(), self.seq).cmp(&(
            other.time,
            other.kind.rank(),
            other.seq,
        ))
    }
}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// How the inter-tick intervals of each node are chosen. Every emitted
/// interval lies in the node's `[min, max]` bounds; fixed cycles and
/// explicit schedules are validated against them up front.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DriftPolicy {
    /// Every node ticks at its minimal interval.
    Perfect,
    /// Per-node constant cycle length.
    FixedRate(Vec<u64>),
    /// Each interval drawn uniformly from `[min, max]`, deterministically
    /// from the seed with one independent stream per node.
    SeededJitter(u64),
    /// Explicit per-node interval sequences, e.g. a path found by the
    /// explorer; the last entry repeats once a sequence is exhausted.
    Schedule(Vec<Vec<u64>>),
}

struct TickScheduler {
    policy: DriftPolicy,
    rngs: Vec<SplitMix64>,
    cursor: Vec<usize>,
}

impl TickScheduler {
    fn new(policy: DriftPolicy, p: &ProtocolParams) -> Result<Self, EngineError> {
        match &policy {
            DriftPolicy::Perfect | DriftPolicy::SeededJitter(_) => {}
            DriftPolicy::FixedRate(cycles) => {
                if cycles.len() != p.n_nodes {
                    return Err(EngineError::PolicyShape {
                        reason: format!(
                            "fixed-rate cycles: expected {} entries, got {}",
                            p.n_nodes,
                            cycles.len()
                        ),
                    });
                }
                for (id, &c) in cycles.iter().enumerate() {
                    if c < p.tick_min[id] || c > p.tick_max[id] {
                        return Err(EngineError::IntervalOutOfRange { node: id, interval: c });
                    }
                }
            }
            DriftPolicy::Schedule(seqs) => {
                if seqs.len() != p.n_nodes {
                    return Err(EngineError::PolicyShape {
                        reason: format!(
                            "schedule: expected {} sequences, got {}",
                            p.n_nodes,
                            seqs.len()
                        ),
                    });
                }
                for (id, seq) in seqs.iter().enumerate() {
                    if seq.is_empty() {
                        return Err(EngineError::PolicyShape {
                            reason: format!("schedule for node {id} is empty"),
                        });
                    }
                    for &iv in seq {
                        if iv < p.tick_min[id] || iv > p.tick_max[id] {
                            return Err(EngineError::IntervalOutOfRange {
                                node: id,
                                interval: iv,
                            });
                        }
                    }
                }
            }
        }
        let rngs = match &policy {
            DriftPolicy::SeededJitter(seed) => (0..p.n_nodes)
                .map(|id| SplitMix64::stream(*seed, id as u64))
                .collect(),
            _ => Vec::new(),
        };
        Ok(Self {
            policy,
            rngs,
            cursor: vec![0; p.n_nodes],
        })
    }

    fn next_interval(&mut self, id: NodeId, p: &ProtocolParams) -> u64 {
        match &self.policy {
            DriftPolicy::Perfect => p.tick_min[id],
            DriftPolicy::FixedRate(cycles) => cycles[id],
            DriftPolicy::SeededJitter(_) => {
                self.rngs[id].in_range(p.tick_min[id], p.tick_max[id])
            }
            DriftPolicy::Schedule(seqs) => {
                let seq = &seqs[id];
                let i = self.cursor[id].min(seq.len() - 1);
                self.cursor[id] += 1;
                seq[i]
            }
        }
    }
}

/// Whether a message counts as received by a listening neighbor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeliveryPolicy {
    /// Received iff the radio is receiving at the end-of-transmission
    /// instant (matches the modeled radio).
    #[default]
    EndInstant,
    /// Received iff the radio was receiving for the whole transmission.
    FullOverlap,
}

/// Transition labels recorded in traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceLabel {
    SwitchTx,
    TxBegin,
    TxEnd,
    SwitchRx,
    RxOn,
    RxOff,
    Recv,
}

impl fmt::Display for TraceLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TraceLabel::SwitchTx => "SWITCH_TX",
            TraceLabel::TxBegin => "TX_BEGIN",
            TraceLabel::TxEnd => "TX_END",
            TraceLabel::SwitchRx => "SWITCH_RX",
            TraceLabel::RxOn => "RX_ON",
            TraceLabel::RxOff => "RX_OFF",
            TraceLabel::Recv => "RECV",
        };
        f.write_str(s)
    }
}

/// One trace line: a radio/receive transition with the node's frame
/// position after the event, or a per-frame offset decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceRecord {
    Transition {
        time: u64,
        node: NodeId,
        label: TraceLabel,
        slot: u32,
        tick: u32,
    },
    Offset {
        time: u64,
        node: NodeId,
        value: i64,
    },
}

impl TraceRecord {
    /// Comma-separated line: `time,node,label,slot,tick` for transitions,
    /// `time,node,OFFSET,value` for offset decisions.
    pub fn to_csv_line(&self) -> String {
        match self {
            TraceRecord::Transition {
                time,
                node,
                label,
                slot,
                tick,
            } => format!("{time},{node},{label},{slot},{tick}"),
            TraceRecord::Offset { time, node, value } => {
                format!("{time},{node},OFFSET,{value}")
            }
        }
    }
}

/// Append-only, bounded record of a run. Replaying the same configuration
/// reproduces the identical trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    records: Vec<TraceRecord>,
    limit: usize,
    dropped: u64,
}

impl Trace {
    pub fn new(limit: usize) -> Self {
        Self {
            records: Vec::new(),
            limit,
            dropped: 0,
        }
    }

    pub(crate) fn push(&mut self, rec: TraceRecord) {
        if self.records.len() < self.limit {
            self.records.push(rec);
        } else {
            self.dropped += 1;
        }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records that did not fit under the limit.
    pub fn dropped(&self) -> u64 {
        self.dropped
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            out.push_str(&rec.to_csv_line());
            out.push('\n');
        }
        out
    }
}

/// Emits the trace records of one full tick in canonical order. Shared by
/// the engine and the explorer so their traces agree record for record.
pub(crate) fn emit_tick_records(
    time: u64,
    node: NodeId,
    report: &FullTickReport,
    state: &NodeState,
    trace: &mut Trace,
) {
    let transition = |label: TraceLabel| TraceRecord::Transition {
        time,
        node,
        label,
        slot: state.pos.slot,
        tick: state.pos.tick,
    };
    if report.tick.entered_receiving {
        trace.push(transition(TraceLabel::RxOn));
    }
    if report.tick.started_sending {
        trace.push(transition(TraceLabel::TxBegin));
    }
    if report.tick.finished_sending {
        trace.push(transition(TraceLabel::TxEnd));
    }
    emit_controller_records(time, node, &report.controller, state, trace);
    if let Some(value) = report.offset_applied {
        trace.push(TraceRecord::Offset { time, node, value });
    }
}

/// Trace records of controller commands alone (also used at start of run).
pub(crate) fn emit_controller_records(
    time: u64,
    node: NodeId,
    act: &ControllerActions,
    state: &NodeState,
    trace: &mut Trace,
) {
    let transition = |label: TraceLabel| TraceRecord::Transition {
        time,
        node,
        label,
        slot: state.pos.slot,
        tick: state.pos.tick,
    };
    if act.entered_receiving {
        trace.push(transition(TraceLabel::RxOn));
    }
    if act.switch_rx_started {
        trace.push(transition(TraceLabel::SwitchRx));
    }
    if act.rx_turned_off {
        trace.push(transition(TraceLabel::RxOff));
    }
    if act.switch_tx_started {
        trace.push(transition(TraceLabel::SwitchTx));
    }
    if act.started_sending {
        trace.push(transition(TraceLabel::TxBegin));
    }
    if act.finished_sending {
        trace.push(transition(TraceLabel::TxEnd));
    }
}

/// Trace records for a batch of message recipients.
pub(crate) fn emit_recv_records(
    time: u64,
    recipients: &[NodeId],
    states: &[NodeState],
    trace: &mut Trace,
) {
    for &j in recipients {
        trace.push(TraceRecord::Transition {
            time,
            node: j,
            label: TraceLabel::Recv,
            slot: states[j].pos.slot,
            tick: states[j].pos.tick,
        });
    }
}

/// Run configuration knobs beyond parameters, topology, and drift policy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunConfig {
    /// Stop after node 0's clock has completed this many frames.
    pub horizon_frames: u64,
    pub delivery: DeliveryPolicy,
    pub monitors: MonitorSet,
    /// Per-node initial phase offset in ticks against the standard start
    /// position; empty means all zero. Length must otherwise equal `N`.
    pub initial_phase: Vec<i64>,
    pub record_trace: bool,
    pub trace_limit: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            horizon_frames: 100,
            delivery: DeliveryPolicy::EndInstant,
            monitors: MonitorSet::all(),
            initial_phase: Vec::new(),
            record_trace: true,
            trace_limit: 1 << 20,
        }
    }
}

/// Aggregate observations over a run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunStats {
    /// Events processed.
    pub events: u64,
    /// Complete frames elapsed on node 0's clock.
    pub frames_completed: u64,
    /// 1-based frame index of node 0 at the violation, when one occurred
    /// (0 means before node 0's first frame start).
    pub frame_of_violation: Option<u64>,
    pub transmissions: u64,
    pub messages_delivered: u64,
    /// Largest absolute stored phase error.
    pub max_abs_phase_error: u64,
    /// Largest absolute applied clock offset.
    pub max_abs_offset: u64,
    /// Largest pairwise circular distance between frame positions seen at
    /// any event boundary.
    pub max_phase_spread: u64,
    /// Offsets whose magnitude exceeded half the sleeping period; reported
    /// as a diagnostic, the run continues.
    pub oversized_offsets: u64,
}

/// Why a run ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunVerdict {
    /// Horizon reached with every enabled monitor silent.
    Ok,
    /// A monitor fired; the trace prefix up to the violation is retained.
    Violation(Violation),
    /// A node received more messages in one frame than its buffer admits.
    Aborted { node: NodeId, time: u64 },
}

impl RunVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, RunVerdict::Ok)
    }

    pub fn violation(&self) -> Option<&Violation> {
        match self {
            RunVerdict::Violation(v) => Some(v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunOutcome {
    pub verdict: RunVerdict,
    pub trace: Trace,
    pub stats: RunStats,
}

/// Rejected configurations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EngineError {
    InvalidParams(Vec<ConstraintViolation>),
    SlotConflicts(Vec<(NodeId, NodeId)>),
    TopologySize { expected: usize, got: usize },
    PolicyShape { reason: String },
    IntervalOutOfRange { node: NodeId, interval: u64 },
    PhaseVectorLength { expected: usize, got: usize },
}

impl fmt::Display for EngineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EngineError::InvalidParams(v) => {
                write!(f, "invalid parameters: ")?;
                for (i, c) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            EngineError::SlotConflicts(pairs) => {
                write!(f, "conflicting TX slots on neighbor pairs {pairs:?}")
            }
            EngineError::TopologySize { expected, got } => {
                write!(f, "topology covers {got} nodes, parameters declare {expected}")
            }
            EngineError::PolicyShape { reason } => write!(f, "drift policy: {reason}"),
            EngineError::IntervalOutOfRange { node, interval } => {
                write!(f, "interval {interval} outside [min, max] of node {node}")
            }
            EngineError::PhaseVectorLength { expected, got } => {
                write!(f, "initial phase vector has {got} entries, expected {expected}")
            }
        }
    }
}

/// Maximum pairwise circular distance between linear frame positions.
pub fn max_phase_spread(states: &[NodeState], p: &ProtocolParams) -> u64 {
    let len = p.frame_len();
    let mut max = 0;
    for i in 0..states.len() {
        for j in i + 1..states.len() {
            let d = circular_distance(states[i].linear_pos(p), states[j].linear_pos(p), len);
            max = max.max(d);
        }
    }
    max
}

struct Engine<'a> {
    p: &'a ProtocolParams,
    topology: &'a Topology,
    config: &'a RunConfig,
    scheduler: TickScheduler,
    states: Vec<NodeState>,
    queue: BinaryHeap<Reverse<Event>>,
    next_tick: Vec<u64>,
    receiving_since: Vec<Option<u64>>,
    tx_started: Vec<Option<u64>>,
    /// Node 0 wraps to slot 0 so far (= 1-based index of its current frame).
    frame_wraps: u64,
    trace: Trace,
    stats: RunStats,
}

impl<'a> Engine<'a> {
    /// Samples the phase spread of the settled state at one instant.
    /// Mid-instant snapshots would show serialization artifacts: with every
    /// clock perfect, nodes still tick one after the other within an
    /// instant, and half-advanced snapshots sit one tick apart.
    fn note_spread(&mut self) {
        let spread = max_phase_spread(&self.states, self.p);
        self.stats.max_phase_spread = self.stats.max_phase_spread.max(spread);
    }

    /// True when every event of the instant `time` has been processed.
    fn instant_settled(&self, time: u64) -> bool {
        match self.queue.peek() {
            Some(Reverse(next)) => next.time > time,
            None => true,
        }
    }

    /// Bookkeeping shared by tick-driven and controller-driven transitions.
    fn track_radio(&mut self, time: u64, node: NodeId, entered_rx: bool, rx_off: bool, began_tx: bool) {
        if entered_rx {
            self.receiving_since[node] = Some(time);
        }
        if rx_off {
            self.receiving_since[node] = None;
        }
        if began_tx {
            self.tx_started[node] = Some(time);
            self.stats.transmissions += 1;
        }
    }

    fn deliver(&mut self, time: u64, sender: NodeId) {
        let eligibility = match self.config.delivery {
            DeliveryPolicy::EndInstant => EotEligibility::EndInstant,
            DeliveryPolicy::FullOverlap => EotEligibility::FullOverlap {
                receiving_since: &self.receiving_since,
                tx_started: self.tx_started[sender].unwrap_or(u64::MAX),
            },
        };
        let recipients =
            deliver_end_of_transmission(self.topology, &mut self.states, sender, eligibility);
        self.stats.messages_delivered += recipients.len() as u64;
        if self.config.record_trace {
            emit_recv_records(time, &recipients, &self.states, &mut self.trace);
        }
    }

    fn process_tick(&mut self, time: u64, node: NodeId) -> Result<(), RunVerdict> {
        debug_assert_eq!(self.next_tick[node], time, "one tick per node per instant");
        let report = tick_node(&mut self.states[node], self.p, node);

        if report.tick.overflow {
            return Err(RunVerdict::Aborted { node, time });
        }

        if node == 0 && report.tick.frame_wrapped {
            self.frame_wraps += 1;
        }

        if let Some((_, err)) = report.tick.stored {
            self.stats.max_abs_phase_error =
                self.stats.max_abs_phase_error.max(err.unsigned_abs());
        }

        self.track_radio(
            time,
            node,
            report.entered_receiving(),
            report.controller.rx_turned_off,
            report.began_sending(),
        );

        if let Some(offset) = report.offset_applied {
            self.stats.max_abs_offset = self.stats.max_abs_offset.max(offset.unsigned_abs());
            let sleeping_ticks = u64::from(self.p.slots_per_frame - self.p.active_slots)
                * u64::from(self.p.ticks_per_slot);
            if offset.unsigned_abs() > sleeping_ticks / 2 {
                self.stats.oversized_offsets += 1;
            }
        }

        if self.config.record_trace {
            emit_tick_records(time, node, &report, &self.states[node], &mut self.trace);
        }

        // Schedule the node's next tick, then the end of its transmission
        // if that next tick concludes one.
        let interval = self.scheduler.next_interval(node, self.p);
        debug_assert!(
            interval >= self.p.tick_min[node] && interval <= self.p.tick_max[node],
            "interval outside drift bounds"
        );
        let next = time + interval;
        self.next_tick[node] = next;
        self.queue.push(Reverse(Event {
            time: next,
            kind: EventKind::Tick { node },
            seq: node as u64,
        }));
        if self.states[node].radio == (RadioPhase::Sending { remaining: 1 }) {
            self.queue.push(Reverse(Event {
                time: next,
                kind: EventKind::EndOfTransmission { sender: node },
                seq: node as u64,
            }));
        }

        // A zero-length transmission begins and ends at this very instant.
        if report.began_sending() && report.finished_sending() {
            self.deliver(time, node);
        }

        Ok(())
    }

    fn check_monitors(&mut self, time: u64) -> Option<Violation> {
        let monitors = self.config.monitors;
        let found = if monitors.inv1 {
            check_inv1(&self.states, self.topology)
        } else {
            None
        }
        .or_else(|| {
            if monitors.inv2 {
                check_inv2(&self.states, self.topology)
            } else {
                None
            }
        });
        found.map(|mut v| {
            v.time = time;
            v.trace_len = self.trace.len();
            v
        })
    }
}

/// Runs the protocol until node 0 has completed `horizon_frames` frames, a
/// monitor fires, or a phase-error buffer overflows.
pub fn run_simulation(
    p: &ProtocolParams,
    topology: &Topology,
    policy: &DriftPolicy,
    config: &RunConfig,
) -> Result<RunOutcome, EngineError> {
    let violations = validate_params(p);
    if !violations.is_empty() {
        return Err(EngineError::InvalidParams(violations));
    }
    if topology.n_nodes() != p.n_nodes {
        return Err(EngineError::TopologySize {
            expected: p.n_nodes,
            got: topology.n_nodes(),
        });
    }
    let conflicts = validate_slot_allocation(p, topology);
    if !conflicts.is_empty() {
        return Err(EngineError::SlotConflicts(conflicts));
    }
    if !config.initial_phase.is_empty() && config.initial_phase.len() != p.n_nodes {
        return Err(EngineError::PhaseVectorLength {
            expected: p.n_nodes,
            got: config.initial_phase.len(),
        });
    }

    let scheduler = TickScheduler::new(policy.clone(), p)?;
    let (states, init_actions) = initial_states(p, &config.initial_phase);

    let mut engine = Engine {
        p,
        topology,
        config,
        scheduler,
        states,
        queue: BinaryHeap::new(),
        next_tick: vec![0; p.n_nodes],
        receiving_since: vec![None; p.n_nodes],
        tx_started: vec![None; p.n_nodes],
        frame_wraps: 0,
        trace: Trace::new(if config.record_trace {
            config.trace_limit
        } else {
            0
        }),
        stats: RunStats::default(),
    };

    // Initialization: controller guards already enabled at start of run
    // fire at time 0, then every node's first tick is scheduled.
    for (node, act) in init_actions.iter().enumerate() {
        engine.track_radio(
            0,
            node,
            act.entered_receiving,
            act.rx_turned_off,
            act.started_sending,
        );
        if config.record_trace {
            emit_controller_records(0, node, act, &engine.states[node], &mut engine.trace);
        }
    }
    for (node, act) in init_actions.iter().enumerate() {
        let interval = engine.scheduler.next_interval(node, p);
        engine.next_tick[node] = interval;
        engine.queue.push(Reverse(Event {
            time: interval,
            kind: EventKind::Tick { node },
            seq: node as u64,
        }));
        if engine.states[node].radio == (RadioPhase::Sending { remaining: 1 }) {
            engine.queue.push(Reverse(Event {
                time: interval,
                kind: EventKind::EndOfTransmission { sender: node },
                seq: node as u64,
            }));
        }
        if act.started_sending && act.finished_sending {
            engine.deliver(0, node);
        }
    }
    engine.note_spread();

    let mut verdict = match engine.check_monitors(0) {
        Some(v) => {
            engine.stats.frame_of_violation = Some(engine.frame_wraps);
            RunVerdict::Violation(v)
        }
        None => RunVerdict::Ok,
    };

    while verdict.is_ok() {
        let Some(Reverse(event)) = engine.queue.pop() else {
            break;
        };
        engine.stats.events += 1;
        let time = event.time;
        match event.kind {
            EventKind::Tick { node } => {
                if let Err(v) = engine.process_tick(time, node) {
                    verdict = v;
                    break;
                }
            }
            EventKind::EndOfTransmission { sender } => {
                engine.deliver(time, sender);
            }
        }
        if engine.instant_settled(time) {
            engine.note_spread();
        }
        if let Some(v) = engine.check_monitors(time) {
            engine.stats.frame_of_violation = Some(engine.frame_wraps);
            verdict = RunVerdict::Violation(v);
            break;
        }
        if engine.frame_wraps > config.horizon_frames {
            break;
        }
    }

    engine.stats.frames_completed = engine.frame_wraps.saturating_sub(1);
    Ok(RunOutcome {
        verdict,
        trace: engine.trace,
        stats: engine.stats,
    })
}
