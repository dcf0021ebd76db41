//! Position of a node's clock within its frame.

use crate::params::ProtocolParams;

/// A (slot, tick) pair with `0 <= slot < C` and `0 <= tick < k0`.
///
/// Positions linearize to `slot * k0 + tick`, a bijection onto
/// `[0, C * k0)`, which is the representation used for clock adjustments
/// and phase-spread measurements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FramePosition {
    pub slot: u32,
    pub tick: u32,
}

impl FramePosition {
    /// Start-of-run position: tick 0 of the last sleeping slot.
    pub fn initial(p: &ProtocolParams) -> Self {
        Self {
            slot: p.slots_per_frame - 1,
            tick: 0,
        }
    }

    /// Linear position in ticks from the start of the frame.
    pub fn linear(&self, p: &ProtocolParams) -> u64 {
        u64::from(self.slot) * u64::from(p.ticks_per_slot) + u64::from(self.tick)
    }

    /// Inverse of [`linear`](Self::linear); `pos` must be below `C * k0`.
    pub fn from_linear(pos: u64, p: &ProtocolParams) -> Self {
        debug_assert!(pos < p.frame_len());
        let k0 = u64::from(p.ticks_per_slot);
        Self {
            slot: (pos / k0) as u32,
            tick: (pos % k0) as u32,
        }
    }

    /// Advances by one tick. Returns `true` when the slot wraps to 0,
    /// i.e. a new frame starts.
    pub fn advance(&mut self, p: &ProtocolParams) -> bool {
        self.tick += 1;
        if self.tick == p.ticks_per_slot {
            self.tick = 0;
            self.slot += 1;
            if self.slot == p.slots_per_frame {
                self.slot = 0;
                return true;
            }
        }
        false
    }

    /// Position moved by a signed tick offset, modulo the frame length.
    pub fn shifted(&self, offset: i64, p: &ProtocolParams) -> Self {
        let len = p.frame_len() as i64;
        let pos = (self.linear(p) as i64 + offset).rem_euclid(len);
        Self::from_linear(pos as u64, p)
    }
}

/// Circular distance between two linear frame positions.
pub fn circular_distance(a: u64, b: u64, frame_len: u64) -> u64 {
    let d = a.abs_diff(b);
    d.min(frame_len - d)
}
