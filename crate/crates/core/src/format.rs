//! Binary tensor (`SNNT`) and weight (`SNNW`) files. All integers are
//! little-endian; bit-packed data is MSB-first and padded to a byte per row
//! (tensors) or per kernel (weight masks).

use crate::error::{Error, Result};
use crate::neuron::FixedPoint;
use crate::tensor::{FeatureMap, MultibitTensor, SpikeTensor};
use crate::weights::{BitmaskKernel, CsrKernel, DenseKernel, LayerWeights, StorageFormat};

const TENSOR_MAGIC: &[u8; 4] = b"SNNT";
const WEIGHT_MAGIC: &[u8; 4] = b"SNNW";
const WEIGHT_VERSION: u8 = 1;

const KIND_SPIKES: u8 = 0;
const KIND_U8: u8 = 1;
const KIND_I16: u8 = 2;

/// Contents of a tensor file.
#[derive(Debug, Clone, PartialEq)]
pub enum TensorData {
    /// Rank 4, `(T, C, H, W)`.
    Spikes(SpikeTensor),
    /// Rank 3, `(C, H, W)`.
    Image(MultibitTensor),
    /// Rank 3 Q8.8 potentials, `(C, H, W)`.
    Potentials(FeatureMap<FixedPoint>),
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn new(buf: &'a [u8]) -> Self {
        Cursor { buf, pos: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| {
                Error::corrupt(format!("truncated at byte {}, need {n} more", self.pos))
            })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(
            self.take(2)?.try_into().expect("2 bytes"),
        ))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.buf.len() {
            return Err(Error::corrupt(format!(
                "{} trailing bytes after payload",
                self.buf.len() - self.pos
            )));
        }
        Ok(())
    }
}

fn pack_row(bits: &[bool], out: &mut Vec<u8>) {
    for chunk in bits.chunks(8) {
        let byte = chunk
            .iter()
            .enumerate()
            .fold(0u8, |acc, (i, &b)| acc | ((b as u8) << (7 - i)));
        out.push(byte);
    }
}

fn unpack_row(bytes: &[u8], width: usize, out: &mut Vec<bool>) -> Result<()> {
    for x in 0..width {
        out.push(bytes[x / 8] >> (7 - x % 8) & 1 == 1);
    }
    if !width.is_multiple_of(8) && bytes[width / 8] & (0xFF >> (width % 8)) != 0 {
        return Err(Error::corrupt("nonzero padding bits"));
    }
    Ok(())
}

pub fn encode_tensor(data: &TensorData) -> Vec<u8> {
    let mut out = TENSOR_MAGIC.to_vec();
    let (rank, dims, kind) = match data {
        TensorData::Spikes(s) => {
            let (t, c, h, w) = s.dims();
            (4u8, [t, c, h, w], KIND_SPIKES)
        }
        TensorData::Image(m) => (3, [m.channels(), m.height(), m.width(), 0], KIND_U8),
        TensorData::Potentials(p) => (3, [p.channels(), p.height(), p.width(), 0], KIND_I16),
    };
    out.push(rank);
    for d in dims {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.push(kind);
    match data {
        TensorData::Spikes(s) => {
            for row in s.as_slice().chunks(s.width()) {
                pack_row(row, &mut out);
            }
        }
        TensorData::Image(m) => out.extend_from_slice(m.as_slice()),
        TensorData::Potentials(p) => {
            for v in p.as_slice() {
                out.extend_from_slice(&v.raw().to_le_bytes());
            }
        }
    }
    out
}

pub fn decode_tensor(bytes: &[u8]) -> Result<TensorData> {
    let mut cur = Cursor::new(bytes);
    if cur.take(4)? != TENSOR_MAGIC {
        return Err(Error::corrupt("not an SNNT tensor file"));
    }
    let rank = cur.u8()?;
    let mut dims = [0usize; 4];
    for d in &mut dims {
        *d = cur.u32()? as usize;
    }
    let kind = cur.u8()?;
    let expected_rank = match kind {
        KIND_SPIKES => 4,
        KIND_U8 | KIND_I16 => 3,
        other => return Err(Error::corrupt(format!("unknown element kind {other}"))),
    };
    if rank != expected_rank {
        return Err(Error::corrupt(format!(
            "kind {kind} needs rank {expected_rank}, got {rank}"
        )));
    }
    let used = &dims[..rank as usize];
    if used.contains(&0) || dims[rank as usize..].iter().any(|&d| d != 0) {
        return Err(Error::corrupt(format!(
            "invalid dims {dims:?} for rank {rank}"
        )));
    }
    let count = used
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .filter(|&n| n <= bytes.len().saturating_mul(8))
        .ok_or_else(|| Error::corrupt("dims exceed payload"))?;
    let data = match kind {
        KIND_SPIKES => {
            let [t, c, h, w] = dims;
            let row_bytes = w.div_ceil(8);
            let mut bits = Vec::with_capacity(count);
            for _ in 0..t * c * h {
                unpack_row(cur.take(row_bytes)?, w, &mut bits)?;
            }
            TensorData::Spikes(SpikeTensor::from_vec(t, c, h, w, bits)?)
        }
        KIND_U8 => {
            let px = cur.take(count)?.to_vec();
            TensorData::Image(MultibitTensor::from_vec(dims[0], dims[1], dims[2], px)?)
        }
        _ => {
            let raw = cur.take(count * 2)?;
            let vals = raw
                .chunks_exact(2)
                .map(|b| FixedPoint(i16::from_le_bytes([b[0], b[1]])))
                .collect();
            TensorData::Potentials(FeatureMap::from_vec(dims[0], dims[1], dims[2], vals)?)
        }
    };
    cur.finish()?;
    Ok(data)
}

fn format_code(f: StorageFormat) -> u8 {
    match f {
        StorageFormat::Dense => 0,
        StorageFormat::Bitmask => 1,
        StorageFormat::Csr => 2,
    }
}

/// Serializes layers in order; the layer id is the position in the list.
pub fn encode_weights(layers: &[LayerWeights], format: StorageFormat) -> Vec<u8> {
    let mut out = WEIGHT_MAGIC.to_vec();
    out.push(WEIGHT_VERSION);
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for (id, l) in layers.iter().enumerate() {
        out.extend_from_slice(&(id as u32).to_le_bytes());
        out.extend_from_slice(&(l.out_channels() as u16).to_le_bytes());
        out.extend_from_slice(&(l.in_channels() as u16).to_le_bytes());
        out.push(l.kernel_size() as u8);
        out.push(format_code(format));
        out.extend_from_slice(&l.scale().to_bits().to_le_bytes());
        for kernel in l.kernels() {
            match format {
                StorageFormat::Dense => out.extend(kernel.values().iter().map(|&v| v as u8)),
                StorageFormat::Bitmask => {
                    let bits: Vec<bool> = kernel.values().iter().map(|&v| v != 0).collect();
                    pack_row(&bits, &mut out);
                    out.extend(
                        kernel
                            .values()
                            .iter()
                            .filter(|&&v| v != 0)
                            .map(|&v| v as u8),
                    );
                }
                StorageFormat::Csr => {
                    let csr = CsrKernel::encode(&kernel);
                    out.extend_from_slice(csr.row_ptr());
                    out.extend_from_slice(csr.col_idx());
                    out.extend(csr.values().iter().map(|&v| v as u8));
                }
            }
        }
    }
    out
}

fn signed(bytes: &[u8]) -> Vec<i8> {
    bytes.iter().map(|&b| b as i8).collect()
}

fn read_kernel(cur: &mut Cursor, k: usize, format: u8) -> Result<DenseKernel> {
    let k2 = k * k;
    match format {
        0 => DenseKernel::new(k, signed(cur.take(k2)?)),
        1 => {
            let mut bits = Vec::with_capacity(k2);
            unpack_row(cur.take(k2.div_ceil(8))?, k2, &mut bits)?;
            let mask = bits
                .iter()
                .enumerate()
                .fold(0u16, |m, (i, &b)| m | ((b as u16) << i));
            let values = signed(cur.take(mask.count_ones() as usize)?);
            Ok(BitmaskKernel::from_parts(k, mask, values)?.decode())
        }
        2 => {
            let row_ptr = cur.take(k + 1)?.to_vec();
            let nnz = *row_ptr.last().expect("k + 1 >= 2") as usize;
            let col_idx = cur.take(nnz)?.to_vec();
            let values = signed(cur.take(nnz)?);
            Ok(CsrKernel::from_parts(k, row_ptr, col_idx, values)?.decode())
        }
        other => Err(Error::corrupt(format!("unknown weight format {other}"))),
    }
}

/// Parses a weight file. Kernels in sparse formats are fully validated; any
/// malformed content is reported as corrupt data.
pub fn decode_weights(bytes: &[u8]) -> Result<Vec<LayerWeights>> {
    let mut cur = Cursor::new(bytes);
    if cur.take(4)? != WEIGHT_MAGIC {
        return Err(Error::corrupt("not an SNNW weight file"));
    }
    let version = cur.u8()?;
    if version != WEIGHT_VERSION {
        return Err(Error::corrupt(format!(
            "unsupported weight file version {version}"
        )));
    }
    let count = cur.u32()? as usize;
    let mut layers = Vec::with_capacity(count.min(1024));
    for expected in 0..count {
        let id = cur.u32()? as usize;
        if id != expected {
            return Err(Error::corrupt(format!(
                "layer id {id} where {expected} was expected"
            )));
        }
        let out_c = cur.u16()? as usize;
        let in_c = cur.u16()? as usize;
        let k = cur.u8()? as usize;
        let format = cur.u8()?;
        let scale = f32::from_bits(cur.u32()?);
        if k != 1 && k != 3 {
            return Err(Error::corrupt(format!("layer {id}: kernel size {k}")));
        }
        let kernels = (0..out_c * in_c)
            .map(|_| read_kernel(&mut cur, k, format))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| Error::corrupt(format!("layer {id}: {e}")))?;
        let layer = LayerWeights::from_kernels(out_c, in_c, k, scale, &kernels)
            .map_err(|e| Error::corrupt(format!("layer {id}: {e}")))?;
        layers.push(layer);
    }
    cur.finish()?;
    Ok(layers)
}
