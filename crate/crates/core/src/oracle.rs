//! Dense reference convolution used to check the sparse engine.
//!
//! Deliberately plain: a nested loop over output channel, row, column, input
//! channel and kernel tap, with out-of-range taps resolved by the padding
//! mode. Nothing here touches the tiling or bit-mask code paths.

use crate::error::{Error, Result};
use crate::tensor::{FeatureMap, TILE_H, TILE_W};
use crate::weights::LayerWeights;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    Zero,
    Replicate,
    /// Replicate padding applied per 18x32 block, matching block convolution.
    BlockReplicate,
}

/// Stride-1 cross-correlation with same-size output and exact integer
/// arithmetic.
pub fn dense_conv_oracle(
    input: &FeatureMap<i32>,
    weights: &LayerWeights,
    padding: Padding,
) -> Result<FeatureMap<i64>> {
    let (in_c, h, w) = (input.channels(), input.height(), input.width());
    if in_c != weights.in_channels() {
        return Err(Error::shape(format!(
            "input has {in_c} channels, weights expect {}",
            weights.in_channels()
        )));
    }
    let k = weights.kernel_size() as isize;
    let half = k / 2;
    let out_c = weights.out_channels();
    let mut out = FeatureMap::<i64>::zeros(out_c, h, w);
    for o in 0..out_c {
        for y in 0..h {
            for x in 0..w {
                // bounds of the region padding refers to
                let (y0, y1, x0, x1) = match padding {
                    Padding::BlockReplicate => {
                        let by = y / TILE_H * TILE_H;
                        let bx = x / TILE_W * TILE_W;
                        (by, (by + TILE_H).min(h) - 1, bx, (bx + TILE_W).min(w) - 1)
                    }
                    _ => (0, h - 1, 0, w - 1),
                };
                let mut acc = 0i64;
                for i in 0..in_c {
                    let kernel = weights.kernel(o, i);
                    for r in 0..k {
                        for c in 0..k {
                            let sy = y as isize + r - half;
                            let sx = x as isize + c - half;
                            let inside = sy >= y0 as isize
                                && sy <= y1 as isize
                                && sx >= x0 as isize
                                && sx <= x1 as isize;
                            let v = if inside {
                                input.get(i, sy as usize, sx as usize)
                            } else if padding == Padding::Zero {
                                0
                            } else {
                                let cy = sy.clamp(y0 as isize, y1 as isize) as usize;
                                let cx = sx.clamp(x0 as isize, x1 as isize) as usize;
                                input.get(i, cy, cx)
                            };
                            acc += v as i64 * kernel.get(r as usize, c as usize) as i64;
                        }
                    }
                }
                out.set(o, y, x, acc);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_kernel_reproduces_input() {
        let mut k = vec![0i8; 9];
        k[4] = 1;
        let w = LayerWeights::new(1, 1, 3, 1.0, k).unwrap();
        let input = FeatureMap::from_vec(1, 3, 3, vec![1, 0, 1, 1, 1, 0, 0, 0, 1]).unwrap();
        let out = dense_conv_oracle(&input, &w, Padding::Zero).unwrap();
        assert_eq!(out.as_slice(), &[1, 0, 1, 1, 1, 0, 0, 0, 1]);
    }

    #[test]
    fn ones_kernel_center_sums_nine() {
        let w = LayerWeights::new(1, 1, 3, 1.0, vec![1; 9]).unwrap();
        let input = FeatureMap::from_vec(1, 3, 3, vec![1; 9]).unwrap();
        let out = dense_conv_oracle(&input, &w, Padding::Zero).unwrap();
        assert_eq!(out.get(0, 1, 1), 9);
        assert_eq!(out.get(0, 0, 0), 4);
        let out = dense_conv_oracle(&input, &w, Padding::Replicate).unwrap();
        assert_eq!(out.get(0, 0, 0), 9);
    }

    #[test]
    fn channel_mismatch_rejected() {
        let w = LayerWeights::new(1, 2, 1, 1.0, vec![1, 1]).unwrap();
        let input = FeatureMap::from_vec(1, 1, 1, vec![1]).unwrap();
        assert!(dense_conv_oracle(&input, &w, Padding::Zero).is_err());
    }
}
