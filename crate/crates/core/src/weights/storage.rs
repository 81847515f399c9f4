use std::fmt;
use std::str::FromStr;

use super::LayerWeights;
use crate::error::Error;

/// Weight representation used when counting storage or traffic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StorageFormat {
    Dense,
    Bitmask,
    Csr,
}

impl StorageFormat {
    pub const ALL: [StorageFormat; 3] = [
        StorageFormat::Dense,
        StorageFormat::Bitmask,
        StorageFormat::Csr,
    ];
}

impl fmt::Display for StorageFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StorageFormat::Dense => "dense",
            StorageFormat::Bitmask => "bitmask",
            StorageFormat::Csr => "csr",
        })
    }
}

impl FromStr for StorageFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dense" => Ok(StorageFormat::Dense),
            "bitmask" => Ok(StorageFormat::Bitmask),
            "csr" => Ok(StorageFormat::Csr),
            other => Err(Error::param(format!("unknown storage format '{other}'"))),
        }
    }
}

fn ceil_log2(n: usize) -> u64 {
    if n <= 1 {
        0
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as u64
    }
}

/// Bits to store one `k x k` kernel holding `nnz` nonzero 8-bit weights.
///
/// CSR uses the narrowest fixed widths that fit: row pointers of
/// `ceil(log2(k*k + 1))` bits and column indices of `ceil(log2(k))` bits.
pub fn kernel_storage_bits(k: usize, nnz: usize, format: StorageFormat) -> u64 {
    let (k, nnz) = (k as u64, nnz as u64);
    match format {
        StorageFormat::Dense => 8 * k * k,
        StorageFormat::Bitmask => k * k + 8 * nnz,
        StorageFormat::Csr => {
            let ptr_bits = ceil_log2((k * k + 1) as usize);
            let idx_bits = ceil_log2(k as usize);
            (k + 1) * ptr_bits + nnz * idx_bits + 8 * nnz
        }
    }
}

pub fn storage_bits(layer: &LayerWeights, format: StorageFormat) -> u64 {
    let k = layer.kernel_size();
    let n = k * k;
    layer
        .values()
        .chunks(n)
        .map(|c| kernel_storage_bits(k, c.iter().filter(|&&v| v != 0).count(), format))
        .sum()
}
