//! Analytical cost model of the accelerator.

mod memory;
mod parallel;
mod report;
mod schedule;

pub use memory::{
    dram_energy, dram_traffic, input_sram_bits, megabytes_to_bits, DramTraffic, MemoryConfig,
    StageTraffic, DRAM_JOULES_PER_BIT,
};
pub use parallel::{parallelism_latency, ParallelScheme, PeOrg, Workload};
pub use report::{ReportFormat, SimReport};
pub use schedule::{ktbc_schedule, reorder_address, KtbcSchedule, ReorderDims};

use crate::neuron::PoolConfig;
use crate::tensor::{tile_count, TILE_H, TILE_W};

/// Geometry of one convolution stage as seen by the cost model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageShape {
    /// Input (and pre-pooling output) height.
    pub height: usize,
    /// Input (and pre-pooling output) width.
    pub width: usize,
    pub in_c: usize,
    pub out_c: usize,
    pub k: usize,
    pub in_t: usize,
    pub out_t: usize,
    /// Input bit planes: 8 for the encoding layer, 1 for spikes.
    pub bits: usize,
    pub pool: Option<PoolConfig>,
    /// Bits per stored output value: 1 for spikes, 16 for averaged potentials.
    pub output_value_bits: usize,
    /// Output maps written per frame: `out_t` for spikes, 1 for the
    /// time-averaged output layer.
    pub output_steps: usize,
}

impl StageShape {
    pub fn tiles(&self) -> usize {
        tile_count(self.height, self.width, TILE_H, TILE_W)
    }

    pub fn output_dims(&self) -> (usize, usize) {
        match self.pool {
            Some(p) => (p.output_len(self.height), p.output_len(self.width)),
            None => (self.height, self.width),
        }
    }

    /// Whole input map in bits, one per spike or pixel bit.
    pub fn input_bits(&self) -> u64 {
        (self.height * self.width * self.in_c * self.in_t * self.bits) as u64
    }

    /// Input footprint of a single (largest) tile across all channels and steps.
    pub fn tile_input_bits(&self) -> u64 {
        (self.height.min(TILE_H) * self.width.min(TILE_W) * self.in_c * self.in_t * self.bits)
            as u64
    }

    pub fn output_bits(&self) -> u64 {
        let (oh, ow) = self.output_dims();
        (oh * ow * self.out_c * self.output_steps * self.output_value_bits) as u64
    }
}
