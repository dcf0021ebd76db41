//! Deterministic discrete-event core for a slotted TDMA MAC protocol with
//! median-based clock synchronization.
//!
//! Nodes share a radio channel via fixed-length frames of `C` slots, each
//! `k0` hardware clock ticks long. Every node transmits once per frame in
//! its own slot and listens during the remaining active slots. Hardware
//! clocks drift within per-node `[min, max]` bounds on the real-time length
//! of a tick, so nodes estimate their neighbors' phase from the arrival
//! time of messages and correct their own clock once per frame.
//!
//! The crate is split along the moving parts:
//!
//! - [`params`] / [`topology`] / [`frame`]: the configuration data model.
//! - [`protocol`]: pure per-node transition logic (clock, radio control
//!   predicates, phase-error bookkeeping, the median correction rule).
//! - [`engine`]: a single-threaded discrete-event scheduler that composes
//!   the per-node logic on a shared integer time axis.
//! - [`monitors`]: online checks of the protocol's safety properties.
//! - [`explorer`]: bounded exhaustive search over all admissible tick
//!   interleavings for tiny instances.
//! - [`analysis`]: community detection, the effective synchronization
//!   graph, and scenario sweeps.
//!
//! Everything is integer arithmetic over value-semantics state, so runs
//! are reproducible bit-for-bit and states are ordered and hashable.
//! The crate is `no_std` (with `alloc`); all IO lives in companion crates.

#![cfg_attr(not(test), no_std)]
#![deny(unsafe_code)]

extern crate alloc;

pub mod analysis;
pub mod engine;
pub mod explorer;
pub mod frame;
pub mod monitors;
pub mod params;
pub mod protocol;
pub mod rng;
mod step;
pub mod topology;

pub use engine::{
    max_phase_spread, run_simulation, DeliveryPolicy, DriftPolicy, EngineError, RunConfig,
    RunOutcome, RunStats, RunVerdict, Trace, TraceRecord,
};
pub use frame::FramePosition;
pub use monitors::{InvariantId, MonitorSet, Violation};
pub use params::{validate_params, ConstraintViolation, NodeId, ProtocolParams};
pub use protocol::{compute_phase_correction, NodeState, RadioPhase, SyncState};
pub use topology::{validate_slot_allocation, Topology, TopologyError};
