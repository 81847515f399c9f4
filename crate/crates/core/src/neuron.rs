//! Discrete-time leaky integrate-and-fire neurons, the averaging output
//! layer and OR-gate spike pooling.
//!
//! Potentials are Q8.8 fixed point held in 16 bits. A quantized 8-bit weight
//! is added to the accumulator as a raw value, so weight `q` contributes
//! `q / 256` to the membrane potential.

use std::fmt;

use crate::error::{Error, Result};
use crate::tensor::SpikeTensor;

/// Signed Q8.8 fixed-point value with 16-bit accumulator semantics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FixedPoint(pub i16);

impl FixedPoint {
    pub const FRAC_BITS: u32 = 8;
    pub const ONE: i32 = 1 << Self::FRAC_BITS;
    pub const ZERO: FixedPoint = FixedPoint(0);

    /// Nearest representable value, saturating at the i16 range.
    pub fn from_f64(v: f64) -> Self {
        let raw = (v * Self::ONE as f64).round();
        FixedPoint(raw.clamp(i16::MIN as f64, i16::MAX as f64) as i16)
    }

    pub fn to_f64(self) -> f64 {
        self.0 as f64 / Self::ONE as f64
    }

    #[inline]
    pub fn raw(self) -> i16 {
        self.0
    }

    /// Saturating add; the flag reports whether saturation occurred.
    #[inline]
    pub fn saturating_add(self, rhs: FixedPoint) -> (FixedPoint, bool) {
        match self.0.checked_add(rhs.0) {
            Some(v) => (FixedPoint(v), false),
            None => (FixedPoint(self.0.saturating_add(rhs.0)), true),
        }
    }

    /// Clamps a wide accumulator into 16 bits, flagging saturation.
    #[inline]
    pub fn saturate_from(raw: i32) -> (FixedPoint, bool) {
        let clamped = raw.clamp(i16::MIN as i32, i16::MAX as i32);
        (FixedPoint(clamped as i16), clamped != raw)
    }
}

impl fmt::Display for FixedPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

/// What happens to the membrane after a spike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResetMode {
    /// Membrane returns to exactly zero.
    #[default]
    Hard,
    /// Threshold is subtracted from the membrane.
    Subtract,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LifParams {
    pub threshold: FixedPoint,
    /// Leak multiplier as a right shift: the multiplier is `2^-leak_shift`.
    pub leak_shift: u32,
    pub reset: ResetMode,
}

impl Default for LifParams {
    /// Threshold 0.5, leak 0.25, hard reset.
    fn default() -> Self {
        LifParams {
            threshold: FixedPoint(128),
            leak_shift: 2,
            reset: ResetMode::Hard,
        }
    }
}

impl LifParams {
    pub fn new(threshold: FixedPoint, leak_shift: u32, reset: ResetMode) -> Result<Self> {
        if threshold.0 <= 0 {
            return Err(Error::param("LIF threshold must be positive"));
        }
        // shift 0 would be a leak of 1.0, outside [0, 1)
        if leak_shift == 0 || leak_shift > 15 {
            return Err(Error::param("leak shift must be in 1..=15"));
        }
        Ok(LifParams {
            threshold,
            leak_shift,
            reset,
        })
    }

    pub fn leak(&self) -> f64 {
        1.0 / (1u32 << self.leak_shift) as f64
    }
}

/// Membrane potentials for a population of neurons.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LifState {
    membrane: Vec<FixedPoint>,
}

impl LifState {
    pub fn new(neurons: usize) -> Self {
        LifState {
            membrane: vec![FixedPoint::ZERO; neurons],
        }
    }

    pub fn from_membrane(membrane: Vec<FixedPoint>) -> Self {
        LifState { membrane }
    }

    pub fn membrane(&self) -> &[FixedPoint] {
        &self.membrane
    }

    pub fn len(&self) -> usize {
        self.membrane.len()
    }

    pub fn is_empty(&self) -> bool {
        self.membrane.is_empty()
    }

    pub fn reset(&mut self) {
        self.membrane.fill(FixedPoint::ZERO);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LifOutput {
    pub spikes: Vec<bool>,
    /// Neurons whose membrane saturated this step.
    pub saturated: usize,
}

/// One time step: `V' = leak * V + I`; fire iff `V' > threshold`.
pub fn lif_step(
    current: &[FixedPoint],
    state: &mut LifState,
    params: &LifParams,
) -> Result<LifOutput> {
    if current.len() != state.len() {
        return Err(Error::shape(format!(
            "{} currents for {} neurons",
            current.len(),
            state.len()
        )));
    }
    let mut spikes = Vec::with_capacity(current.len());
    let mut saturated = 0;
    for (v, &i) in state.membrane.iter_mut().zip(current) {
        let leaked = FixedPoint(v.0 >> params.leak_shift);
        let (next, sat) = leaked.saturating_add(i);
        saturated += sat as usize;
        let fire = next > params.threshold;
        *v = match (fire, params.reset) {
            (false, _) => next,
            (true, ResetMode::Hard) => FixedPoint::ZERO,
            (true, ResetMode::Subtract) => FixedPoint(next.0 - params.threshold.0),
        };
        spikes.push(fire);
    }
    Ok(LifOutput { spikes, saturated })
}

/// Output-layer readout: per-neuron mean of the currents over all time
/// steps. No threshold, reset or leak. The quotient rounds to nearest, ties
/// to even.
pub fn output_accumulate(currents: &[Vec<FixedPoint>]) -> Result<Vec<FixedPoint>> {
    let steps = currents.len();
    if steps == 0 {
        return Err(Error::param("output layer needs at least one time step"));
    }
    let n = currents[0].len();
    if currents.iter().any(|c| c.len() != n) {
        return Err(Error::shape("ragged currents across time steps"));
    }
    let t = steps as i64;
    Ok((0..n)
        .map(|i| {
            let sum: i64 = currents.iter().map(|c| c[i].0 as i64).sum();
            FixedPoint(div_round_half_even(sum, t) as i16)
        })
        .collect())
}

fn div_round_half_even(num: i64, den: i64) -> i64 {
    let q = num.div_euclid(den);
    let r = num.rem_euclid(den);
    match (2 * r).cmp(&den) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q & 1),
    }
}

/// Pooling window geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolConfig {
    pub window: usize,
    pub stride: usize,
}

impl Default for PoolConfig {
    fn default() -> Self {
        PoolConfig {
            window: 2,
            stride: 2,
        }
    }
}

impl PoolConfig {
    pub fn output_len(&self, len: usize) -> usize {
        len.saturating_sub(self.window).div_ceil(self.stride) + 1
    }
}

/// Max pooling over binary spikes, i.e. an OR of each window. Windows that
/// run past the bottom or right edge replicate the last row or column.
pub fn spike_maxpool(map: &SpikeTensor, pool: PoolConfig) -> SpikeTensor {
    let (t, c, h, w) = map.dims();
    let (oh, ow) = (pool.output_len(h), pool.output_len(w));
    let mut data = Vec::with_capacity(t * c * oh * ow);
    for ti in 0..t {
        for ci in 0..c {
            let plane = map.plane(ti, ci);
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut any = false;
                    for dy in 0..pool.window {
                        let y = (oy * pool.stride + dy).min(h - 1);
                        for dx in 0..pool.window {
                            let x = (ox * pool.stride + dx).min(w - 1);
                            any |= plane[y * w + x];
                        }
                    }
                    data.push(any);
                }
            }
        }
    }
    SpikeTensor::from_vec(t, c, oh, ow, data).expect("pooled dims are positive")
}
