//! Kernel storage, pruning, quantization and the sparse codecs.
//!
//! A layer is stored densely as [`LayerWeights`] (8-bit values plus a
//! per-layer scale) and converted to [`SparseLayer`] for the engine, where
//! every `(out, in)` kernel is a [`BitmaskKernel`].

mod codec;
mod prune;
mod quant;
mod storage;

pub use codec::{BitmaskKernel, CsrKernel};
pub use prune::{prune_layer, prune_magnitude, LayerDensity, PruneReport, PruneScope};
pub use quant::{dequantize, quantize8};
pub use storage::{kernel_storage_bits, storage_bits, StorageFormat};

use crate::error::{Error, Result};

/// Largest channel count a layer may have.
pub const MAX_CHANNELS: usize = 512;

pub(crate) fn check_kernel_size(k: usize) -> Result<()> {
    match k {
        1 | 3 => Ok(()),
        _ => Err(Error::param(format!("kernel size must be 1 or 3, got {k}"))),
    }
}

/// A single `k x k` kernel of signed 8-bit weights, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DenseKernel {
    k: usize,
    values: Vec<i8>,
}

impl DenseKernel {
    pub fn new(k: usize, values: Vec<i8>) -> Result<Self> {
        check_kernel_size(k)?;
        if values.len() != k * k {
            return Err(Error::shape(format!(
                "{k}x{k} kernel needs {} weights, got {}",
                k * k,
                values.len()
            )));
        }
        Ok(DenseKernel { k, values })
    }

    pub fn zeros(k: usize) -> Result<Self> {
        Self::new(k, vec![0; k * k])
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn get(&self, r: usize, c: usize) -> i8 {
        self.values[r * self.k + c]
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }
}

/// Quantized layer weights `(out_c, in_c, k, k)` with a per-layer scale;
/// the real weight is `value * scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    out_c: usize,
    in_c: usize,
    k: usize,
    scale: f32,
    values: Vec<i8>,
}

impl LayerWeights {
    pub fn new(out_c: usize, in_c: usize, k: usize, scale: f32, values: Vec<i8>) -> Result<Self> {
        check_layer_dims(out_c, in_c, k)?;
        if values.len() != out_c * in_c * k * k {
            return Err(Error::shape(format!(
                "layer ({out_c},{in_c},{k},{k}) needs {} weights, got {}",
                out_c * in_c * k * k,
                values.len()
            )));
        }
        if !scale.is_finite() || scale <= 0.0 {
            return Err(Error::param(format!(
                "scale must be positive and finite, got {scale}"
            )));
        }
        if values.contains(&i8::MIN) {
            return Err(Error::param("weights must lie in [-127, 127]"));
        }
        Ok(LayerWeights {
            out_c,
            in_c,
            k,
            scale,
            values,
        })
    }

    /// Builds a layer from per-`(out, in)` kernels in row-major order.
    pub fn from_kernels(
        out_c: usize,
        in_c: usize,
        k: usize,
        scale: f32,
        kernels: &[DenseKernel],
    ) -> Result<Self> {
        if kernels.len() != out_c * in_c {
            return Err(Error::shape(format!(
                "expected {} kernels, got {}",
                out_c * in_c,
                kernels.len()
            )));
        }
        if let Some(bad) = kernels.iter().find(|kr| kr.size() != k) {
            return Err(Error::shape(format!(
                "kernel size {} in a {k}x{k} layer",
                bad.size()
            )));
        }
        let values = kernels
            .iter()
            .flat_map(|kr| kr.values.iter().copied())
            .collect();
        Self::new(out_c, in_c, k, scale, values)
    }

    pub fn out_channels(&self) -> usize {
        self.out_c
    }

    pub fn in_channels(&self) -> usize {
        self.in_c
    }

    pub fn kernel_size(&self) -> usize {
        self.k
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn kernel(&self, o: usize, i: usize) -> DenseKernel {
        let n = self.k * self.k;
        let start = (o * self.in_c + i) * n;
        DenseKernel {
            k: self.k,
            values: self.values[start..start + n].to_vec(),
        }
    }

    pub fn kernels(&self) -> impl Iterator<Item = DenseKernel> + '_ {
        let n = self.k * self.k;
        self.values.chunks(n).map(move |c| DenseKernel {
            k: self.k,
            values: c.to_vec(),
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0).count()
    }

    pub fn density(&self) -> f64 {
        self.nnz() as f64 / self.values.len() as f64
    }

    pub fn to_sparse(&self) -> SparseLayer {
        SparseLayer {
            out_c: self.out_c,
            in_c: self.in_c,
            k: self.k,
            scale: self.scale,
            kernels: self
                .kernels()
                .map(|kr| BitmaskKernel::encode(&kr))
                .collect(),
        }
    }
}

/// Real-valued layer weights before quantization.
#[derive(Debug, Clone, PartialEq)]
pub struct RealLayerWeights {
    pub out_c: usize,
    pub in_c: usize,
    pub k: usize,
    pub values: Vec<f64>,
}

impl RealLayerWeights {
    pub fn new(out_c: usize, in_c: usize, k: usize, values: Vec<f64>) -> Result<Self> {
        check_layer_dims(out_c, in_c, k)?;
        if values.len() != out_c * in_c * k * k {
            return Err(Error::shape(format!(
                "layer ({out_c},{in_c},{k},{k}) needs {} weights, got {}",
                out_c * in_c * k * k,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("weights must be finite"));
        }
        Ok(RealLayerWeights {
            out_c,
            in_c,
            k,
            values,
        })
    }

    pub fn nnz(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }
}

/// Layer weights in bit-mask form, the representation the engine consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseLayer {
    out_c: usize,
    in_c: usize,
    k: usize,
    scale: f32,
    kernels: Vec<BitmaskKernel>,
}

impl SparseLayer {
    pub fn out_channels(&self) -> usize {
        self.out_c
    }

    pub fn in_channels(&self) -> usize {
        self.in_c
    }

    pub fn kernel_size(&self) -> usize {
        self.k
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }

    pub fn kernel(&self, o: usize, i: usize) -> &BitmaskKernel {
        &self.kernels[o * self.in_c + i]
    }

    pub fn kernels(&self) -> &[BitmaskKernel] {
        &self.kernels
    }

    pub fn nnz(&self) -> usize {
        self.kernels.iter().map(BitmaskKernel::nnz).sum()
    }

    /// Nonzero counts indexed `[out][in]`.
    pub fn nnz_matrix(&self) -> Vec<Vec<usize>> {
        self.kernels
            .chunks(self.in_c)
            .map(|row| row.iter().map(BitmaskKernel::nnz).collect())
            .collect()
    }

    pub fn to_dense(&self) -> LayerWeights {
        let values = self
            .kernels
            .iter()
            .flat_map(|kr| kr.decode().values)
            .collect();
        LayerWeights {
            out_c: self.out_c,
            in_c: self.in_c,
            k: self.k,
            scale: self.scale,
            values,
        }
    }
}

fn check_layer_dims(out_c: usize, in_c: usize, k: usize) -> Result<()> {
    check_kernel_size(k)?;
    for (name, c) in [("out_c", out_c), ("in_c", in_c)] {
        if c == 0 || c > MAX_CHANNELS {
            return Err(Error::param(format!(
                "{name} must be in 1..={MAX_CHANNELS}, got {c}"
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_sizes_are_limited() {
        assert!(DenseKernel::zeros(2).is_err());
        assert!(DenseKernel::zeros(5).is_err());
        assert!(DenseKernel::new(3, vec![0; 8]).is_err());
    }

    #[test]
    fn sparse_round_trip_preserves_layer() {
        let vals: Vec<i8> = (0..2 * 3 * 9).map(|i| ((i * 7) % 11) as i8 - 5).collect();
        let layer = LayerWeights::new(2, 3, 3, 0.5, vals).unwrap();
        let sparse = layer.to_sparse();
        assert_eq!(sparse.nnz(), layer.nnz());
        assert_eq!(sparse.to_dense(), layer);
        assert_eq!(sparse.kernel(1, 2).decode(), layer.kernel(1, 2));
    }

    #[test]
    fn layer_validation() {
        assert!(LayerWeights::new(0, 1, 1, 1.0, vec![]).is_err());
        assert!(LayerWeights::new(1, 1, 1, 0.0, vec![1]).is_err());
        assert!(LayerWeights::new(1, 1, 1, 1.0, vec![i8::MIN]).is_err());
        assert!(LayerWeights::new(513, 1, 1, 1.0, vec![0; 513]).is_err());
    }
}
