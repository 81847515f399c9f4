use super::{LayerWeights, RealLayerWeights};
use crate::error::Result;

const QMAX: f64 = 127.0;

/// Symmetric per-layer 8-bit quantization: `scale = max|w| / 127`,
/// `q = round(w / scale)` with ties away from zero, clamped to `[-127, 127]`.
/// An all-zero layer gets scale 1.
pub fn quantize8(weights: &RealLayerWeights) -> Result<LayerWeights> {
    let max_abs = weights.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if max_abs == 0.0 { 1.0 } else { max_abs / QMAX };
    let values = weights
        .values
        .iter()
        .map(|&w| (w / scale).round().clamp(-QMAX, QMAX) as i8)
        .collect();
    LayerWeights::new(weights.out_c, weights.in_c, weights.k, scale as f32, values)
}

pub fn dequantize(weights: &LayerWeights) -> RealLayerWeights {
    let scale = weights.scale() as f64;
    RealLayerWeights {
        out_c: weights.out_channels(),
        in_c: weights.in_channels(),
        k: weights.kernel_size(),
        values: weights.values().iter().map(|&q| q as f64 * scale).collect(),
    }
}
