//! Gated one-to-all product convolution.
//!
//! For each nonzero weight at kernel position `(R, C)` the engine derives an
//! enable map, the padded input shifted `R` rows down and `C` columns right,
//! and adds the weight to every output position whose enable bit is set.
//! Positions with a zero enable bit are clock-gated and keep their partial
//! sum. One nonzero weight costs one cycle for the whole tile; zero weights
//! cost nothing.

use std::ops::{Add, AddAssign};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::neuron::{
    lif_step, output_accumulate, spike_maxpool, FixedPoint, LifParams, LifState, PoolConfig,
};
use crate::tensor::{
    bit_plane_split, replicate_pad, tile_partition, FeatureMap, Grid, MultibitTensor, SpikeTensor,
    Tile, TILE_H, TILE_W,
};
use crate::weights::{BitmaskKernel, SparseLayer};

/// Binary enable bit per output position for one nonzero weight.
pub type EnableMap = Grid<bool>;

/// 16-bit partial sums for one output tile.
pub type PartialSumTile = Grid<i16>;

/// Event counts produced by the engine.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GateStats {
    /// One per nonzero weight per input channel per tile pass.
    pub cycles: u64,
    /// Accumulations performed at enabled positions.
    pub enabled_accum: u64,
    /// Positions clock-gated because their enable bit was zero.
    pub gated_accum: u64,
    /// Accumulator or membrane saturation events.
    pub saturations: u64,
}

impl GateStats {
    pub fn enabled_fraction(&self) -> f64 {
        let total = self.enabled_accum + self.gated_accum;
        if total == 0 {
            0.0
        } else {
            self.enabled_accum as f64 / total as f64
        }
    }
}

impl Add for GateStats {
    type Output = GateStats;

    fn add(self, rhs: GateStats) -> GateStats {
        GateStats {
            cycles: self.cycles + rhs.cycles,
            enabled_accum: self.enabled_accum + rhs.enabled_accum,
            gated_accum: self.gated_accum + rhs.gated_accum,
            saturations: self.saturations + rhs.saturations,
        }
    }
}

impl AddAssign for GateStats {
    fn add_assign(&mut self, rhs: GateStats) {
        *self = *self + rhs;
    }
}

impl std::iter::Sum for GateStats {
    fn sum<I: Iterator<Item = GateStats>>(iter: I) -> GateStats {
        iter.fold(GateStats::default(), Add::add)
    }
}

/// Enable map for a nonzero weight at `(r, c)`: the `out_h x out_w` window
/// of `input` whose top-left corner is `(r, c)`.
pub fn enable_map(input: &Grid<bool>, r: usize, c: usize, out_h: usize, out_w: usize) -> EnableMap {
    assert!(
        r + out_h <= input.height() && c + out_w <= input.width(),
        "enable window ({r},{c})+{out_h}x{out_w} exceeds input {}x{}",
        input.height(),
        input.width()
    );
    Grid::from_fn(out_h, out_w, |y, x| input.get(y + r, x + c))
}

/// Adds `w` to every enabled partial sum. All positions update in lock-step,
/// so this is one cycle.
pub fn gated_accumulate(psum: &mut PartialSumTile, enable: &EnableMap, w: i8) -> GateStats {
    assert_eq!(
        (psum.height(), psum.width()),
        (enable.height(), enable.width()),
        "enable map and partial-sum tile differ in size"
    );
    let mut stats = GateStats {
        cycles: 1,
        ..GateStats::default()
    };
    for (acc, &en) in psum.as_mut_slice().iter_mut().zip(enable.as_slice()) {
        if en {
            let (v, overflow) = acc.overflowing_add(w as i16);
            *acc = if overflow {
                acc.saturating_add(w as i16)
            } else {
                v
            };
            stats.enabled_accum += 1;
            stats.saturations += overflow as u64;
        } else {
            stats.gated_accum += 1;
        }
    }
    stats
}

/// Convolves one input channel of a tile with one bit-mask kernel,
/// accumulating into `psum`. `padded` is the tile padded by `k / 2` on every
/// side.
pub fn sparse_conv_channel(
    padded: &Grid<bool>,
    kernel: &BitmaskKernel,
    psum: &mut PartialSumTile,
) -> Result<GateStats> {
    let k = kernel.size();
    if padded.height() != psum.height() + k - 1 || padded.width() != psum.width() + k - 1 {
        return Err(Error::shape(format!(
            "padded input {}x{} does not match {}x{} output for a {k}x{k} kernel",
            padded.height(),
            padded.width(),
            psum.height(),
            psum.width()
        )));
    }
    let (oh, ow) = (psum.height(), psum.width());
    let mut stats = GateStats::default();
    for (r, c, w) in kernel.nonzeros() {
        let en = enable_map(padded, r, c, oh, ow);
        stats += gated_accumulate(psum, &en, w);
    }
    Ok(stats)
}

/// Runs the tile loop shared by spike and bit-serial layers. `planes[b]` is
/// bit plane `b` (a single plane for spike input); each plane's partial sums
/// are shifted left by `b` before being added to the 32-bit result.
fn conv_planes(
    planes: &[&SpikeTensor],
    t: usize,
    layer: &SparseLayer,
) -> Result<(FeatureMap<i32>, GateStats)> {
    let first = planes[0];
    let (_, in_c, h, w) = first.dims();
    if in_c != layer.in_channels() {
        return Err(Error::shape(format!(
            "input has {in_c} channels, layer expects {}",
            layer.in_channels()
        )));
    }
    if t >= first.steps() {
        return Err(Error::shape(format!("time step {t} out of range")));
    }
    let pad = layer.kernel_size() / 2;
    let out_c = layer.out_channels();
    let tiles = tile_partition(h, w, TILE_H, TILE_W);

    let per_tile: Vec<(Tile, Vec<Grid<i32>>, GateStats)> = tiles
        .par_iter()
        .map(|tile| {
            let padded: Vec<Vec<Grid<bool>>> = planes
                .iter()
                .map(|p| {
                    (0..in_c)
                        .map(|c| replicate_pad(&p.extract_tile(t, c, tile), pad))
                        .collect()
                })
                .collect();
            let mut stats = GateStats::default();
            let mut outs = Vec::with_capacity(out_c);
            for k in 0..out_c {
                let mut acc = Grid::<i32>::new(tile.height, tile.width);
                for (b, plane) in padded.iter().enumerate() {
                    let mut psum = PartialSumTile::new(tile.height, tile.width);
                    for (c, input) in plane.iter().enumerate() {
                        stats += sparse_conv_channel(input, layer.kernel(k, c), &mut psum)?;
                    }
                    for (a, &p) in acc.as_mut_slice().iter_mut().zip(psum.as_slice()) {
                        *a += (p as i32) << b;
                    }
                }
                outs.push(acc);
            }
            Ok((*tile, outs, stats))
        })
        .collect::<Result<_>>()?;

    let mut out = FeatureMap::<i32>::zeros(out_c, h, w);
    let mut stats = GateStats::default();
    for (tile, outs, s) in per_tile {
        stats += s;
        for (k, g) in outs.iter().enumerate() {
            for y in 0..tile.height {
                for x in 0..tile.width {
                    out.set(k, tile.row + y, tile.col + x, g.get(y, x));
                }
            }
        }
    }
    Ok((out, stats))
}

/// Block convolution of time step `t`: every 18x32 tile is replicate-padded
/// and convolved on its own, then written back at its origin.
pub fn block_conv(
    input: &SpikeTensor,
    t: usize,
    layer: &SparseLayer,
) -> Result<(FeatureMap<i32>, GateStats)> {
    conv_planes(&[input], t, layer)
}

/// Bit-serial convolution of an 8-bit image: the sum over bit planes of
/// `2^b * block_conv(plane_b)`.
pub fn encode_layer_conv(
    img: &MultibitTensor,
    layer: &SparseLayer,
) -> Result<(FeatureMap<i32>, GateStats)> {
    let planes = bit_plane_split(img);
    let refs: Vec<&SpikeTensor> = planes.iter().collect();
    conv_planes(&refs, 0, layer)
}

/// Time-step configuration of one convolution stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StageTiming {
    pub in_t: usize,
    pub out_t: usize,
}

impl StageTiming {
    pub fn new(in_t: usize, out_t: usize) -> Result<Self> {
        if in_t == 0 || out_t == 0 {
            return Err(Error::param("time steps must be positive"));
        }
        if in_t != out_t && in_t != 1 {
            return Err(Error::param(format!(
                "unsupported time steps in_T={in_t}, out_T={out_t}: need in_T == out_T or in_T == 1"
            )));
        }
        Ok(StageTiming { in_t, out_t })
    }

    /// Number of times the convolution itself runs.
    pub fn conv_steps(&self) -> usize {
        self.in_t
    }
}

fn to_currents(conv: &FeatureMap<i32>, shift: u32) -> (Vec<FixedPoint>, u64) {
    let mut sat = 0;
    let currents = conv
        .as_slice()
        .iter()
        .map(|&v| {
            let raw = if shift == 0 {
                v
            } else {
                (v + (1 << (shift - 1))) >> shift
            };
            let (fp, s) = FixedPoint::saturate_from(raw);
            sat += s as u64;
            fp
        })
        .collect();
    (currents, sat)
}

/// Feeds per-step currents through LIF neurons with a persistent membrane
/// and stacks the spikes into an `(out_t, c, h, w)` tensor. When only one
/// current map is given it is injected at every output step.
fn fire(
    currents: &[Vec<FixedPoint>],
    out_t: usize,
    (c, h, w): (usize, usize, usize),
    lif: &LifParams,
    pool: Option<PoolConfig>,
    stats: &mut GateStats,
) -> Result<SpikeTensor> {
    let mut state = LifState::new(c * h * w);
    let mut data = Vec::with_capacity(out_t * c * h * w);
    for t in 0..out_t {
        let current = if currents.len() == 1 {
            &currents[0]
        } else {
            &currents[t]
        };
        let out = lif_step(current, &mut state, lif)?;
        stats.saturations += out.saturated as u64;
        data.extend(out.spikes);
    }
    let spikes = SpikeTensor::from_vec(out_t, c, h, w, data)?;
    Ok(match pool {
        Some(p) => spike_maxpool(&spikes, p),
        None => spikes,
    })
}

/// One spiking convolution stage: block convolution, LIF, optional pooling.
///
/// With `in_t == out_t` each step is convolved and fed to the neurons. With
/// `in_t == 1 < out_t` the convolution runs once and the same current drives
/// the neurons for every output step, so outputs can still differ through
/// the membrane carry-over.
pub fn layer_forward(
    input: &SpikeTensor,
    timing: StageTiming,
    pool: Option<PoolConfig>,
    weights: &SparseLayer,
    lif: &LifParams,
) -> Result<(SpikeTensor, GateStats)> {
    if input.steps() != timing.in_t {
        return Err(Error::TimeStep {
            expected: timing.in_t,
            actual: input.steps(),
        });
    }
    let mut stats = GateStats::default();
    let mut currents = Vec::with_capacity(timing.conv_steps());
    for t in 0..timing.conv_steps() {
        let (conv, s) = block_conv(input, t, weights)?;
        stats += s;
        let (cur, sat) = to_currents(&conv, 0);
        stats.saturations += sat;
        currents.push(cur);
    }
    let dims = (weights.out_channels(), input.height(), input.width());
    let spikes = fire(&currents, timing.out_t, dims, lif, pool, &mut stats)?;
    Ok((spikes, stats))
}

/// Encoding layer: bit-serial convolution of the image, fired through LIF
/// neurons. Pixels are read as fractions `p / 256`, so the 32-bit product sum
/// is rounded down by 8 bits into the Q8.8 current.
pub fn encode_forward(
    img: &MultibitTensor,
    out_t: usize,
    pool: Option<PoolConfig>,
    weights: &SparseLayer,
    lif: &LifParams,
) -> Result<(SpikeTensor, GateStats)> {
    if out_t == 0 {
        return Err(Error::param("out_T must be positive"));
    }
    let (conv, mut stats) = encode_layer_conv(img, weights)?;
    let (cur, sat) = to_currents(&conv, FixedPoint::FRAC_BITS);
    stats.saturations += sat;
    let dims = (weights.out_channels(), img.height(), img.width());
    let spikes = fire(&[cur], out_t, dims, lif, pool, &mut stats)?;
    Ok((spikes, stats))
}

/// Output layer: convolve every step and average the currents over time.
pub fn output_forward(
    input: &SpikeTensor,
    weights: &SparseLayer,
) -> Result<(FeatureMap<FixedPoint>, GateStats)> {
    let mut stats = GateStats::default();
    let mut currents = Vec::with_capacity(input.steps());
    for t in 0..input.steps() {
        let (conv, s) = block_conv(input, t, weights)?;
        stats += s;
        let (cur, sat) = to_currents(&conv, 0);
        stats.saturations += sat;
        currents.push(cur);
    }
    let avg = output_accumulate(&currents)?;
    let map = FeatureMap::from_vec(weights.out_channels(), input.height(), input.width(), avg)?;
    Ok((map, stats))
}
