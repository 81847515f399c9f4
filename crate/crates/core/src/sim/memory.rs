use super::StageShape;
use crate::error::{Error, Result};
use crate::weights::{storage_bits, LayerWeights, StorageFormat};

/// External DDR3 access energy.
pub const DRAM_JOULES_PER_BIT: f64 = 70e-12;

/// On-chip buffer sizes and clock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemoryConfig {
    pub input_sram_bits: u64,
    pub weight_map_sram_bits: u64,
    pub nz_weight_sram_bits: u64,
    pub clock_hz: f64,
    /// Output channels processed per pass over an input that does not fit
    /// the input SRAM. Each pass re-reads the whole input.
    pub out_channels_per_pass: usize,
}

impl Default for MemoryConfig {
    /// 36 KB input SRAM (one 32x18 tile, 512 channels, one step), 216 KB of
    /// weight SRAM, 500 MHz.
    fn default() -> Self {
        MemoryConfig {
            input_sram_bits: input_sram_bits(18, 32, 512, 1),
            weight_map_sram_bits: 72 * 1024 * 8,
            nz_weight_sram_bits: 144 * 1024 * 8,
            clock_hz: 500e6,
            out_channels_per_pass: 1,
        }
    }
}

impl MemoryConfig {
    pub fn validate(&self) -> Result<()> {
        if self.input_sram_bits == 0
            || self.weight_map_sram_bits == 0
            || self.nz_weight_sram_bits == 0
        {
            return Err(Error::param("SRAM sizes must be positive"));
        }
        if !(self.clock_hz.is_finite() && self.clock_hz > 0.0) {
            return Err(Error::param("clock must be positive"));
        }
        if self.out_channels_per_pass == 0 {
            return Err(Error::param("out_channels_per_pass must be positive"));
        }
        Ok(())
    }
}

/// Input SRAM needed for one tile: one bit per spike.
pub fn input_sram_bits(tile_h: usize, tile_w: usize, channels: usize, steps: usize) -> u64 {
    (tile_h * tile_w * channels * steps) as u64
}

pub fn dram_energy(bits: f64) -> f64 {
    bits * DRAM_JOULES_PER_BIT
}

/// Decimal megabytes to bits.
pub fn megabytes_to_bits(mb: f64) -> f64 {
    mb * 8e6
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageTraffic {
    pub input_bits: u64,
    pub refetch_factor: u64,
    pub output_bits: u64,
    pub weight_bits: u64,
    /// Whether the layer's compressed weights fit the on-chip weight SRAMs.
    pub weights_fit: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DramTraffic {
    pub stages: Vec<StageTraffic>,
}

impl DramTraffic {
    pub fn input_bits(&self) -> u64 {
        self.stages.iter().map(|s| s.input_bits).sum()
    }

    pub fn output_bits(&self) -> u64 {
        self.stages.iter().map(|s| s.output_bits).sum()
    }

    pub fn weight_bits(&self) -> u64 {
        self.stages.iter().map(|s| s.weight_bits).sum()
    }

    pub fn total_bits(&self) -> u64 {
        self.input_bits() + self.output_bits() + self.weight_bits()
    }

    pub fn energy(&self) -> f64 {
        dram_energy(self.total_bits() as f64)
    }
}

/// Per-frame DRAM traffic. Each stage reads its input map, writes its output
/// map and fetches its weights once. When one tile's input (all channels and
/// steps) exceeds the input SRAM, the input is re-read once per output-channel
/// pass.
pub fn dram_traffic(
    stages: &[StageShape],
    weights: &[LayerWeights],
    mem: &MemoryConfig,
    format: StorageFormat,
) -> Result<DramTraffic> {
    mem.validate()?;
    if stages.len() != weights.len() {
        return Err(Error::shape(format!(
            "{} stages but {} weight layers",
            stages.len(),
            weights.len()
        )));
    }
    let stages = stages
        .iter()
        .zip(weights)
        .map(|(s, w)| {
            let refetch_factor = if s.tile_input_bits() > mem.input_sram_bits {
                s.out_c.div_ceil(mem.out_channels_per_pass) as u64
            } else {
                1
            };
            let weight_bits = storage_bits(w, format);
            let mask_bits =
                (w.out_channels() * w.in_channels() * w.kernel_size() * w.kernel_size()) as u64;
            StageTraffic {
                input_bits: s.input_bits() * refetch_factor,
                refetch_factor,
                output_bits: s.output_bits(),
                weight_bits,
                weights_fit: mask_bits <= mem.weight_map_sram_bits
                    && (w.nnz() as u64) * 8 <= mem.nz_weight_sram_bits,
            }
        })
        .collect();
    Ok(DramTraffic { stages })
}
