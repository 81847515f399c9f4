use super::StageShape;
use crate::error::{Error, Result};
use crate::weights::SparseLayer;

/// Cycle accounting for one stage under the output channel -> time step ->
/// bit plane -> input channel loop nest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KtbcSchedule {
    pub tiles: u64,
    /// Loop extents `(K, T, B, C)`.
    pub extents: (usize, usize, usize, usize),
    /// Cycles one tile spends on each output channel.
    pub per_output_channel: Vec<u64>,
    pub cycles: u64,
}

impl KtbcSchedule {
    pub fn cycles_per_tile(&self) -> u64 {
        self.per_output_channel.iter().sum()
    }

    pub fn fps(&self, clock_hz: f64) -> f64 {
        clock_hz / self.cycles as f64
    }
}

/// One cycle per nonzero weight per input channel per tile pass; zero
/// weights are skipped. The time loop counts convolution executions, so a
/// one-step input expanded to several output steps is convolved once.
pub fn ktbc_schedule(shape: &StageShape, weights: &SparseLayer) -> Result<KtbcSchedule> {
    if weights.in_channels() != shape.in_c
        || weights.out_channels() != shape.out_c
        || weights.kernel_size() != shape.k
    {
        return Err(Error::shape(format!(
            "weights ({},{},{}) do not match stage ({},{},{})",
            weights.out_channels(),
            weights.in_channels(),
            weights.kernel_size(),
            shape.out_c,
            shape.in_c,
            shape.k
        )));
    }
    let steps = shape.in_t;
    let per_output_channel: Vec<u64> = weights
        .nnz_matrix()
        .iter()
        .map(|row| (steps * shape.bits) as u64 * row.iter().sum::<usize>() as u64)
        .collect();
    let tiles = shape.tiles() as u64;
    let cycles = tiles * per_output_channel.iter().sum::<u64>();
    Ok(KtbcSchedule {
        tiles,
        extents: (shape.out_c, steps, shape.bits, shape.in_c),
        per_output_channel,
        cycles,
    })
}

/// Extents of the `(t, b, k)` output address space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReorderDims {
    pub channels: usize,
    pub steps: usize,
    pub bits: usize,
}

impl ReorderDims {
    pub fn slots(&self) -> usize {
        self.channels * self.steps * self.bits
    }
}

/// Output slot for channel `k`, step `t`, bit plane `b`: `(t * B + b) * C + k`.
/// The next layer then reads its input channels contiguously for each step
/// and bit plane, even though the producer finishes all steps of one channel
/// before moving to the next channel.
pub fn reorder_address(k: usize, t: usize, b: usize, dims: ReorderDims) -> Result<usize> {
    if k >= dims.channels || t >= dims.steps || b >= dims.bits {
        return Err(Error::param(format!(
            "(k={k}, t={t}, b={b}) outside ({}, {}, {})",
            dims.channels, dims.steps, dims.bits
        )));
    }
    Ok((t * dims.bits + b) * dims.channels + k)
}
