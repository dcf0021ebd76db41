//! Protocol parameter vector and its validation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

/// Dense node identifier in `0..n_nodes`.
pub type NodeId = usize;

/// The full parameter vector of a protocol instance.
///
/// Time quantities are in hardware clock ticks except `tick_min`/`tick_max`,
/// which bound the real-time length of one tick in integer real-time units.
/// Clock drift ratios are therefore represented exactly: a node with cycle
/// length 351 against one with 350 drifts by 1/351 of a tick per tick, with
/// no floating point involved.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProtocolParams {
    /// Number of nodes.
    pub n_nodes: usize,
    /// Slots per frame (`C`).
    pub slots_per_frame: u32,
    /// Active slots at the start of each frame (`n`), the rest are sleeping.
    pub active_slots: u32,
    /// Transmission slot per node; `tx_slot[id] < active_slots`.
    pub tx_slot: Vec<u32>,
    /// Clock ticks per slot (`k0`).
    pub ticks_per_slot: u32,
    /// Guard time `g`: silent ticks at each end of the transmission slot.
    pub guard: u32,
    /// Radio switch time `r`: ticks to move the radio between modes.
    pub switch_time: u32,
    /// Minimal real-time units between two ticks, per node.
    pub tick_min: Vec<u64>,
    /// Maximal real-time units between two ticks, per node.
    pub tick_max: Vec<u64>,
}

impl ProtocolParams {
    /// Convenience constructor with uniform clock bounds for all nodes.
    #[allow(clippy::too_many_arguments)]
    pub fn uniform(
        n_nodes: usize,
        slots_per_frame: u32,
        active_slots: u32,
        tx_slot: Vec<u32>,
        ticks_per_slot: u32,
        guard: u32,
        switch_time: u32,
        tick_min: u64,
        tick_max: u64,
    ) -> Self {
        Self {
            n_nodes,
            slots_per_frame,
            active_slots,
            tx_slot,
            ticks_per_slot,
            guard,
            switch_time,
            tick_min: vec![tick_min; n_nodes],
            tick_max: vec![tick_max; n_nodes],
        }
    }

    /// Frame length in ticks: `C * k0`.
    pub fn frame_len(&self) -> u64 {
        u64::from(self.slots_per_frame) * u64::from(self.ticks_per_slot)
    }

    /// Ticks a transmission occupies: `k0 - 2g`, saturating at zero.
    pub fn tx_len(&self) -> u32 {
        self.ticks_per_slot.saturating_sub(2 * self.guard)
    }

    /// Slot in which the per-frame clock adjustment is applied: the middle
    /// of the sleeping period, `n + (C - n) / 2`. When every slot is active
    /// this returns `C`, a slot number that never occurs, and no adjustment
    /// ever takes place.
    pub fn adjustment_slot(&self) -> u32 {
        self.active_slots + (self.slots_per_frame - self.active_slots) / 2
    }
}

/// One violated parameter constraint. Violations are data, not errors: the
/// validator returns all of them at once.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstraintViolation {
    /// Name of the offending parameter, e.g. `"tsn[2]"`.
    pub parameter: String,
    /// The constraint that does not hold, e.g. `"tsn[2] < n"`.
    pub constraint: String,
}

impl ConstraintViolation {
    fn new(parameter: impl Into<String>, constraint: impl Into<String>) -> Self {
        Self {
            parameter: parameter.into(),
            constraint: constraint.into(),
        }
    }
}

impl fmt::Display for ConstraintViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} fails", self.constraint)
    }
}

/// Checks every constraint on the parameter vector and returns the complete
/// list of violations; an empty list means the instance is well-formed.
pub fn validate_params(p: &ProtocolParams) -> Vec<ConstraintViolation> {
    let mut out = Vec::new();
    if p.n_nodes == 0 {
        out.push(ConstraintViolation::new("N", "0 < N"));
    }
    if p.slots_per_frame == 0 {
        out.push(ConstraintViolation::new("C", "0 < C"));
    }
    if p.active_slots == 0 {
        out.push(ConstraintViolation::new("n", "0 < n"));
    }
    if p.active_slots > p.slots_per_frame {
        out.push(ConstraintViolation::new("n", "n <= C"));
    }
    if p.tx_slot.len() != p.n_nodes {
        out.push(ConstraintViolation::new("tsn", "len(tsn) = N"));
    }
    for (id, &slot) in p.tx_slot.iter().enumerate() {
        if slot >= p.active_slots {
            out.push(ConstraintViolation::new(
                format!("tsn[{id}]"),
                format!("tsn[{id}] < n"),
            ));
        }
    }
    if p.ticks_per_slot == 0 {
        out.push(ConstraintViolation::new("k0", "0 < k0"));
    }
    if p.guard == 0 {
        out.push(ConstraintViolation::new("g", "0 < g"));
    }
    if p.tick_min.len() != p.n_nodes {
        out.push(ConstraintViolation::new("min", "len(min) = N"));
    }
    if p.tick_max.len() != p.n_nodes {
        out.push(ConstraintViolation::new("max", "len(max) = N"));
    }
    for (id, &lo) in p.tick_min.iter().enumerate() {
        if lo == 0 {
            out.push(ConstraintViolation::new(
                format!("min[{id}]"),
                format!("0 < min[{id}]"),
            ));
        }
        if let Some(&hi) = p.tick_max.get(id) {
            if lo > hi {
                out.push(ConstraintViolation::new(
                    format!("min[{id}]"),
                    format!("min[{id}] <= max[{id}]"),
                ));
            }
        }
    }
    out
}
