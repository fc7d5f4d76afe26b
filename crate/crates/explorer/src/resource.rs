//! On-chip resource accounting: DSP slices, 18Kb BRAM blocks, external
//! bandwidth, and LUTs, plus the power-of-two helpers used by every
//! parallelism allocator.

use serde::{Deserialize, Serialize};

/// One 18Kb BRAM primitive, modeled as 36 bits x 512 entries.
pub const BRAM_WIDTH_BITS: u64 = 36;
pub const BRAM_DEPTH: u64 = 512;
pub const BRAM_BITS: u64 = BRAM_WIDTH_BITS * BRAM_DEPTH; // 18_432

/// Bits one LUT provides when used as distributed RAM.
pub const LUT_RAM_BITS: u64 = 64;

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceUsage {
    /// DSP slices.
    pub dsp: u64,
    /// 18Kb BRAM blocks.
    pub bram: u64,
    /// External bandwidth, bits/second.
    pub bw: f64,
    /// LUTs (only charged where a buffer is mapped to LUT-RAM).
    pub lut: u64,
}

impl ResourceUsage {
    pub fn add(&self, other: &ResourceUsage) -> ResourceUsage {
        ResourceUsage {
            dsp: self.dsp + other.dsp,
            bram: self.bram + other.bram,
            bw: self.bw + other.bw,
            lut: self.lut + other.lut,
        }
    }

    pub fn scale(&self, k: u64) -> ResourceUsage {
        ResourceUsage {
            dsp: self.dsp * k,
            bram: self.bram * k,
            // Weights are broadcast to batch replicas, so bandwidth does
            // not scale with batch.
            bw: self.bw,
            lut: self.lut * k,
        }
    }
}

pub fn ceil_div(a: u64, b: u64) -> u64 {
    debug_assert!(b > 0);
    a.div_ceil(b)
}

/// Largest power of two <= x. Requires x >= 1.
pub fn pow2_floor(x: u64) -> u64 {
    debug_assert!(x >= 1);
    1u64 << (63 - x.leading_zeros())
}

/// Smallest power of two >= x. Requires x >= 1.
pub fn pow2_ceil(x: u64) -> u64 {
    x.next_power_of_two()
}

pub fn is_pow2(x: u64) -> bool {
    x >= 1 && x.is_power_of_two()
}

/// Block count of a RAM with the given port width and depth, tiled onto
/// 36-bit x 512-entry primitives.
pub fn bram_cost(width_bits: u64, depth: u64) -> u64 {
    if width_bits == 0 || depth == 0 {
        return 0;
    }
    ceil_div(width_bits, BRAM_WIDTH_BITS) * ceil_div(depth, BRAM_DEPTH)
}

/// DSP slices for `pf` MAC lanes at the given packing factor
/// (alpha = MACs per DSP per cycle: 2 at 16-bit, 4 at 8-bit).
pub fn dsp_for_macs(pf: u64, alpha: u64) -> u64 {
    ceil_div(pf * 2, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pow2_helpers() {
        assert_eq!(pow2_floor(1), 1);
        assert_eq!(pow2_floor(7), 4);
        assert_eq!(pow2_floor(8), 8);
        assert_eq!(pow2_floor(1023), 512);
        assert_eq!(pow2_ceil(3), 4);
        assert!(is_pow2(64));
        assert!(!is_pow2(48));
    }

    #[test]
    fn bram_geometry() {
        // 64-bit wide, 1024 deep: 2 block-columns x 2 block-rows.
        assert_eq!(bram_cost(64, 1024), 4);
        assert_eq!(bram_cost(36, 512), 1);
        assert_eq!(bram_cost(37, 513), 4);
        assert_eq!(bram_cost(0, 512), 0);
    }

    #[test]
    fn dsp_packing() {
        // 16 MAC lanes: one DSP each at 16-bit, two lanes per DSP at 8-bit.
        assert_eq!(dsp_for_macs(16, 2), 16);
        assert_eq!(dsp_for_macs(16, 4), 8);
        assert_eq!(dsp_for_macs(1, 4), 1);
    }
}
