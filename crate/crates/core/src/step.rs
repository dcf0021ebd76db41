//! Shared transition machinery for the event-queue engine and the bounded
//! explorer. Both drive nodes exclusively through these functions, so the
//! two stay transition-for-transition identical by construction.

use alloc::vec::Vec;

use crate::params::{NodeId, ProtocolParams};
use crate::protocol::{
    apply_clock_adjustment, clock_tick, compute_phase_correction, go_receive, go_send, go_sleep,
    NodeState, RadioPhase, TickEvents,
};
use crate::topology::Topology;

/// What the radio controller did after a tick (or at initialization).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct ControllerActions {
    pub switch_tx_started: bool,
    pub switch_rx_started: bool,
    /// Radio went straight to `Sending` (`r == 0`).
    pub started_sending: bool,
    /// Zero-length transmission: over in the same instant it began.
    pub finished_sending: bool,
    /// Radio went straight to `Receiving` (`r == 0`).
    pub entered_receiving: bool,
    pub rx_turned_off: bool,
}

/// Evaluates the controller predicates against the current state and
/// performs the resulting radio commands. Activating the sender overrides
/// an active receiver; the receiver is only armed from idle; going to
/// sleep shuts down the receive chain and wins over a same-instant arm.
pub(crate) fn apply_controller(
    s: &mut NodeState,
    p: &ProtocolParams,
    id: NodeId,
) -> ControllerActions {
    let mut act = ControllerActions::default();

    if go_send(s, p, id) {
        if s.radio.in_receive_chain() {
            act.rx_turned_off = true;
        }
        if p.switch_time == 0 {
            s.radio = RadioPhase::Sending {
                remaining: p.tx_len(),
            };
            act.started_sending = true;
            if p.tx_len() == 0 {
                s.radio = RadioPhase::Idle;
                act.finished_sending = true;
            }
        } else {
            s.radio = RadioPhase::SwitchingToSend {
                remaining: p.switch_time,
            };
            act.switch_tx_started = true;
        }
    } else if go_receive(s, p, id) && s.radio == RadioPhase::Idle {
        if p.switch_time == 0 {
            s.radio = RadioPhase::Receiving;
            act.entered_receiving = true;
        } else {
            s.radio = RadioPhase::SwitchingToReceive {
                remaining: p.switch_time,
            };
            act.switch_rx_started = true;
        }
    }

    if go_sleep(s, p) && s.radio.in_receive_chain() {
        s.radio = RadioPhase::Idle;
        act.rx_turned_off = true;
        act.switch_rx_started = false;
        act.entered_receiving = false;
    }

    act
}

/// Everything one full local tick did: clock movement, radio counter
/// transitions, materialized phase error, controller commands, and the
/// per-frame clock adjustment when its instant was reached.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub(crate) struct FullTickReport {
    pub tick: TickEvents,
    pub controller: ControllerActions,
    pub offset_applied: Option<i64>,
}

impl FullTickReport {
    pub fn began_sending(&self) -> bool {
        self.tick.started_sending || self.controller.started_sending
    }

    pub fn finished_sending(&self) -> bool {
        self.tick.finished_sending || self.controller.finished_sending
    }

    pub fn entered_receiving(&self) -> bool {
        self.tick.entered_receiving || self.controller.entered_receiving
    }
}

/// Processes one local clock tick of `id` end to end: advance the clock,
/// materialize a latched phase error, run the controller, and apply the
/// once-per-frame clock adjustment at tick 0 of the adjustment slot.
///
/// The controller sees the pre-adjustment position; an adjustment only
/// influences predicates from the next tick on.
pub(crate) fn tick_node(s: &mut NodeState, p: &ProtocolParams, id: NodeId) -> FullTickReport {
    let tick = clock_tick(s, p);
    let controller = apply_controller(s, p, id);
    let mut offset_applied = None;
    if s.pos.slot == p.adjustment_slot() && s.pos.tick == 0 && !s.adjusted_this_frame {
        let offset = compute_phase_correction(s.sync.phase_errors());
        apply_clock_adjustment(s, offset, p);
        offset_applied = Some(offset);
    }
    FullTickReport {
        tick,
        controller,
        offset_applied,
    }
}

/// Builds the initial node states and runs the controller once against
/// them, mirroring guards that are already enabled at start of run.
/// Per-node initial phase offsets (in ticks) support counterexample setups.
pub(crate) fn initial_states(
    p: &ProtocolParams,
    initial_phase: &[i64],
) -> (Vec<NodeState>, Vec<ControllerActions>) {
    let capacity = p.n_nodes.saturating_sub(1);
    let mut states = Vec::with_capacity(p.n_nodes);
    let mut actions = Vec::with_capacity(p.n_nodes);
    for id in 0..p.n_nodes {
        let mut s = NodeState::initial(p, capacity);
        if let Some(&off) = initial_phase.get(id) {
            s.pos = s.pos.shifted(off, p);
        }
        let act = apply_controller(&mut s, p, id);
        actions.push(act);
        states.push(s);
    }
    (states, actions)
}

/// Whether a neighbor receives a message whose transmission ends now.
///
/// `EndInstant` requires the radio to be receiving at the end instant;
/// `FullOverlap` additionally requires it to have been receiving since
/// before the transmission started.
#[derive(Debug, Clone, Copy)]
pub(crate) enum EotEligibility<'a> {
    EndInstant,
    FullOverlap {
        receiving_since: &'a [Option<u64>],
        tx_started: u64,
    },
}

/// Delivers an end-of-transmission signal to every eligible neighbor; the
/// synchronizer of each recipient latches the sender for storage at its
/// next tick. Returns the recipients.
pub(crate) fn deliver_end_of_transmission(
    topology: &Topology,
    states: &mut [NodeState],
    sender: NodeId,
    eligibility: EotEligibility<'_>,
) -> Vec<NodeId> {
    let mut delivered = Vec::new();
    for j in topology.neighbors(sender) {
        let ok = match eligibility {
            EotEligibility::EndInstant => states[j].radio.is_receiving(),
            EotEligibility::FullOverlap {
                receiving_since,
                tx_started,
            } => {
                states[j].radio.is_receiving()
                    && receiving_since[j].is_some_and(|since| since <= tx_started)
            }
        };
        if ok {
            states[j].sync.latch_delivery(sender);
            delivered.push(j);
        }
    }
    delivered
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::FramePosition;
    use alloc::vec;

    fn params(g: u32, r: u32) -> ProtocolParams {
        ProtocolParams::uniform(3, 10, 3, vec![0, 1, 2], 29, g, r, 1, 1)
    }

    #[test]
    fn controller_arms_sender_and_kills_receiver() {
        let p = params(2, 0);
        let mut s = NodeState::initial(&p, 2);
        s.pos = FramePosition { slot: 1, tick: 2 };
        s.radio = RadioPhase::Receiving;
        let act = apply_controller(&mut s, &p, 1);
        assert!(act.started_sending && act.rx_turned_off);
        assert_eq!(s.radio, RadioPhase::Sending { remaining: 25 });
    }

    #[test]
    fn controller_with_switch_time_passes_through_switching() {
        let p = params(3, 2);
        let mut s = NodeState::initial(&p, 2);
        s.pos = FramePosition { slot: 1, tick: 1 }; // g - r = 1
        let act = apply_controller(&mut s, &p, 1);
        assert!(act.switch_tx_started);
        assert_eq!(s.radio, RadioPhase::SwitchingToSend { remaining: 2 });
    }

    #[test]
    fn receiver_only_armed_from_idle() {
        let p = params(2, 0);
        let mut s = NodeState::initial(&p, 2);
        s.pos = FramePosition { slot: 0, tick: 0 };
        s.radio = RadioPhase::Receiving;
        let act = apply_controller(&mut s, &p, 1);
        assert_eq!(act, ControllerActions::default());
        assert_eq!(s.radio, RadioPhase::Receiving);
    }

    #[test]
    fn sleep_shuts_down_receive_chain() {
        let p = params(2, 0);
        let mut s = NodeState::initial(&p, 2);
        s.pos = FramePosition { slot: 3, tick: 0 };
        s.radio = RadioPhase::Receiving;
        let act = apply_controller(&mut s, &p, 2);
        assert!(act.rx_turned_off);
        assert_eq!(s.radio, RadioPhase::Idle);
    }

    #[test]
    fn adjustment_fires_once_at_mid_sleep() {
        let p = params(2, 0);
        let mut s = NodeState::initial(&p, 2);
        s.pos = FramePosition { slot: 5, tick: 28 };
        s.sync.latch_delivery(1);
        // Tick into (6, 0): latch materializes, then the adjustment runs on
        // the stored error.
        let report = tick_node(&mut s, &p, 0);
        assert!(report.tick.stored.is_some());
        assert!(report.offset_applied.is_some());
        assert!(s.adjusted_this_frame);
        assert_eq!(s.sync.msg_counter(), 0);
        // A second pass through the same position does not re-adjust.
        s.pos = FramePosition { slot: 5, tick: 28 };
        let report = tick_node(&mut s, &p, 0);
        assert_eq!(report.offset_applied, None);
    }

    #[test]
    fn delivery_respects_eligibility_and_topology() {
        let p = params(2, 0);
        let t = Topology::line(3);
        let (mut states, _) = initial_states(&p, &[]);
        states[1].radio = RadioPhase::Receiving;
        states[2].radio = RadioPhase::Receiving;
        // Sender 0: neighbor 1 is receiving; node 2 receives but is not a
        // neighbor of 0 on the line.
        let delivered =
            deliver_end_of_transmission(&t, &mut states, 0, EotEligibility::EndInstant);
        assert_eq!(delivered, vec![1]);
        assert_eq!(states[1].sync.pending_store(), Some(0));
        assert_eq!(states[2].sync.pending_store(), None);
    }

    #[test]
    fn full_overlap_requires_listening_since_tx_start() {
        let p = params(2, 0);
        let t = Topology::clique(2);
        let (mut states, _) = initial_states(&p, &[]);
        states[1].radio = RadioPhase::Receiving;
        // Receiver switched on mid-transmission.
        let since = [None, Some(40u64)];
        let delivered = deliver_end_of_transmission(
            &t,
            &mut states,
            0,
            EotEligibility::FullOverlap {
                receiving_since: &since,
                tx_started: 30,
            },
        );
        assert!(delivered.is_empty());
        // Receiver on since before the transmission began.
        let since = [None, Some(30u64)];
        let delivered = deliver_end_of_transmission(
            &t,
            &mut states,
            0,
            EotEligibility::FullOverlap {
                receiving_since: &since,
                tx_started: 30,
            },
        );
        assert_eq!(delivered, vec![1]);
    }

    #[test]
    fn initial_phase_offsets_shift_positions() {
        let p = params(2, 0);
        let (states, _) = initial_states(&p, &[0, 5, -1]);
        assert_eq!(states[0].pos, FramePosition { slot: 9, tick: 0 });
        assert_eq!(states[1].pos, FramePosition { slot: 9, tick: 5 });
        assert_eq!(states[2].pos, FramePosition { slot: 8, tick: 28 });
    }
}
