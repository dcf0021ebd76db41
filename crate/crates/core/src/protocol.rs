//! Pure per-node transition logic: hardware clock progression, the radio
//! control predicates, phase-error bookkeeping, and the median correction
//! rule. Nothing here knows about global time; the engine and the explorer
//! both drive these functions and stay in lock step by construction.

use alloc::vec::Vec;

use crate::frame::FramePosition;
use crate::params::{NodeId, ProtocolParams};

/// State of the radio hardware.
///
/// Switch counters start at `r` and count local ticks down to the moment
/// the radio reaches the target mode; the sending counter starts at
/// `k0 - 2g` and reaches zero exactly at the end-of-transmission instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RadioPhase {
    Idle,
    SwitchingToSend { remaining: u32 },
    Sending { remaining: u32 },
    SwitchingToReceive { remaining: u32 },
    Receiving,
}

impl RadioPhase {
    pub fn is_receiving(&self) -> bool {
        matches!(self, RadioPhase::Receiving)
    }

    pub fn is_sending(&self) -> bool {
        matches!(self, RadioPhase::Sending { .. })
    }

    pub(crate) fn in_receive_chain(&self) -> bool {
        matches!(
            self,
            RadioPhase::Receiving | RadioPhase::SwitchingToReceive { .. }
        )
    }
}

/// Per-frame synchronizer state: the phase errors of messages received this
/// frame in arrival order, plus an at-most-one-deep latch for a message
/// whose error is stored at the next local tick.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SyncState {
    phase_errors: Vec<i64>,
    capacity: usize,
    pending_store: Option<NodeId>,
}

/// Raised when a node receives more messages in one frame than its buffer
/// admits; this signals a topology/degree misconfiguration and aborts the
/// run rather than silently corrupting the median.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhaseBufferOverflow;

impl SyncState {
    pub fn new(capacity: usize) -> Self {
        Self {
            phase_errors: Vec::with_capacity(capacity),
            capacity,
            pending_store: None,
        }
    }

    /// Number of messages received (and stored) this frame.
    pub fn msg_counter(&self) -> usize {
        self.phase_errors.len()
    }

    pub fn phase_errors(&self) -> &[i64] {
        &self.phase_errors
    }

    pub fn pending_store(&self) -> Option<NodeId> {
        self.pending_store
    }

    /// Latches a delivered message for storage at the next local tick.
    /// A second delivery before that tick is dropped: the synchronizer is
    /// busy until the latch is consumed.
    pub fn latch_delivery(&mut self, sender: NodeId) {
        if self.pending_store.is_none() {
            self.pending_store = Some(sender);
        }
    }

    fn clear(&mut self) {
        self.phase_errors.clear();
    }
}

/// Full automaton configuration of one node.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeState {
    pub pos: FramePosition,
    pub radio: RadioPhase,
    pub sync: SyncState,
    /// Set once the per-frame clock adjustment has run; cleared when the
    /// slot wraps to 0.
    pub adjusted_this_frame: bool,
}

/// What a single local clock tick did, as far as the caller needs to know.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TickEvents {
    /// Slot wrapped to 0: a new frame started on this node's clock.
    pub frame_wrapped: bool,
    /// Radio entered `Sending` (send switch completed).
    pub started_sending: bool,
    /// Sending counter reached zero: transmission over, radio idle.
    pub finished_sending: bool,
    /// Radio entered `Receiving` (receive switch completed).
    pub entered_receiving: bool,
    /// A latched message was stored: (sender, phase error).
    pub stored: Option<(NodeId, i64)>,
    /// Storing failed because the buffer was full.
    pub overflow: bool,
}

impl NodeState {
    /// Initial configuration: tick 0 of the last sleeping slot, radio idle,
    /// empty error buffer. `capacity` bounds messages per frame and is set
    /// by the engine to `N - 1`.
    pub fn initial(p: &ProtocolParams, capacity: usize) -> Self {
        Self {
            pos: FramePosition::initial(p),
            radio: RadioPhase::Idle,
            sync: SyncState::new(capacity),
            adjusted_this_frame: false,
        }
    }

    /// Linear frame position in ticks.
    pub fn linear_pos(&self, p: &ProtocolParams) -> u64 {
        self.pos.linear(p)
    }
}

/// Advances one hardware clock tick: the position moves forward (wrapping
/// slot and frame as needed), tick-driven radio counters decrement, and a
/// latched phase error is materialized with the post-tick clock reading.
///
/// Radio control predicates are evaluated by the caller afterwards, against
/// the state this function produces.
pub fn clock_tick(s: &mut NodeState, p: &ProtocolParams) -> TickEvents {
    let mut ev = TickEvents::default();

    if s.pos.advance(p) {
        ev.frame_wrapped = true;
        s.adjusted_this_frame = false;
    }

    match s.radio {
        RadioPhase::SwitchingToSend { remaining } => {
            let remaining = remaining - 1;
            if remaining == 0 {
                s.radio = RadioPhase::Sending {
                    remaining: p.tx_len(),
                };
                ev.started_sending = true;
                if p.tx_len() == 0 {
                    // Degenerate zero-length transmission: over immediately.
                    s.radio = RadioPhase::Idle;
                    ev.finished_sending = true;
                }
            } else {
                s.radio = RadioPhase::SwitchingToSend { remaining };
            }
        }
        RadioPhase::Sending { remaining } => {
            let remaining = remaining - 1;
            if remaining == 0 {
                s.radio = RadioPhase::Idle;
                ev.finished_sending = true;
            } else {
                s.radio = RadioPhase::Sending { remaining };
            }
        }
        RadioPhase::SwitchingToReceive { remaining } => {
            let remaining = remaining - 1;
            if remaining == 0 {
                s.radio = RadioPhase::Receiving;
                ev.entered_receiving = true;
            } else {
                s.radio = RadioPhase::SwitchingToReceive { remaining };
            }
        }
        RadioPhase::Idle | RadioPhase::Receiving => {}
    }

    if let Some(sender) = s.sync.pending_store.take() {
        match store_phase_error(s, sender, p) {
            Ok(err) => ev.stored = Some((sender, err)),
            Err(PhaseBufferOverflow) => ev.overflow = true,
        }
    }

    ev
}

/// True iff the sender must be activated now, so that the transmission
/// itself starts exactly at tick `g` of the node's TX slot:
/// at tick `g - r` of the TX slot when `r <= g`, and `r - g` ticks before
/// the end of the preceding slot when `r > g`.
pub fn go_send(s: &NodeState, p: &ProtocolParams, id: NodeId) -> bool {
    let tsn = p.tx_slot[id];
    let (slot, tick) = (i64::from(s.pos.slot), i64::from(s.pos.tick));
    let (g, r, k0) = (
        i64::from(p.guard),
        i64::from(p.switch_time),
        i64::from(p.ticks_per_slot),
    );
    if r > g {
        let prev = (tsn + p.slots_per_frame - 1) % p.slots_per_frame;
        slot == i64::from(prev) && tick == k0 - (r - g)
    } else {
        slot == i64::from(tsn) && tick == g - r
    }
}

/// True iff the receiver must be switched on now: `r` ticks before the
/// start of the frame when the first slot is a listening slot, at the start
/// of slot 0 when switching is free, or at the start of the listening slot
/// that immediately follows this node's own TX slot.
pub fn go_receive(s: &NodeState, p: &ProtocolParams, id: NodeId) -> bool {
    let tsn = p.tx_slot[id];
    let (slot, tick) = (i64::from(s.pos.slot), i64::from(s.pos.tick));
    let (r, k0) = (i64::from(p.switch_time), i64::from(p.ticks_per_slot));
    let last_slot = i64::from(p.slots_per_frame - 1);
    let n = i64::from(p.active_slots);

    (r > 0 && tsn != 0 && slot == last_slot && tick == k0 - r)
        || (r == 0 && tsn != 0 && slot == 0 && tick == 0)
        || (slot > 0 && slot < n && slot - 1 == i64::from(tsn) && tick == 0)
}

/// True iff the active period just ended: the receiver is switched off at
/// the first tick of the first sleeping slot. When every slot is active the
/// slot counter wraps before reaching `n` and this never fires.
pub fn go_sleep(s: &NodeState, p: &ProtocolParams) -> bool {
    s.pos.slot == p.active_slots && s.pos.tick == 0
}

/// Stores the phase error of a message from `sender`, read against this
/// node's current clock: expected end-of-transmission reading minus actual
/// reading, both linearized from the start of the frame.
pub fn store_phase_error(
    s: &mut NodeState,
    sender: NodeId,
    p: &ProtocolParams,
) -> Result<i64, PhaseBufferOverflow> {
    if s.sync.phase_errors.len() >= s.sync.capacity {
        return Err(PhaseBufferOverflow);
    }
    let k0 = i64::from(p.ticks_per_slot);
    let expected = i64::from(p.tx_slot[sender]) * k0 + k0 - i64::from(p.guard);
    let actual = i64::from(s.pos.slot) * k0 + i64::from(s.pos.tick);
    let err = expected - actual;
    s.sync.phase_errors.push(err);
    Ok(err)
}

/// The per-frame correction rule: no messages means no correction, one or
/// two messages means the first phase error scaled by the gain, three or
/// more means the median scaled by the gain. The gain is exactly 1/2 with
/// integer division truncating toward zero, and the median of an
/// even-length list is the lower-middle element after sorting.
pub fn compute_phase_correction(errors: &[i64]) -> i64 {
    let raw = match errors.len() {
        0 => return 0,
        1 | 2 => errors[0],
        m => {
            let mut sorted: Vec<i64> = errors.to_vec();
            sorted.sort_unstable();
            sorted[(m - 1) / 2]
        }
    };
    raw / 2
}

/// Applies a clock correction: the linear frame position moves by `offset`
/// modulo the frame length, the error buffer empties, and the node is
/// marked adjusted for this frame.
pub fn apply_clock_adjustment(s: &mut NodeState, offset: i64, p: &ProtocolParams) {
    s.pos = s.pos.shifted(offset, p);
    s.sync.clear();
    s.adjusted_this_frame = true;
}
