use super::{check_kernel_size, DenseKernel};
use crate::error::{Error, Result};

/// Sparse kernel as an occupancy mask plus the nonzero weights.
///
/// Bit `i` of `mask` covers kernel position `i` in row-major order, so
/// position `(0, 0)` is bit 0. `values` holds the nonzero weights in the same
/// order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitmaskKernel {
    k: usize,
    mask: u16,
    values: Vec<i8>,
}

impl BitmaskKernel {
    pub fn encode(kernel: &DenseKernel) -> Self {
        let mut mask = 0u16;
        let mut values = Vec::new();
        for (i, &v) in kernel.values().iter().enumerate() {
            if v != 0 {
                mask |= 1 << i;
                values.push(v);
            }
        }
        BitmaskKernel {
            k: kernel.size(),
            mask,
            values,
        }
    }

    /// Validates raw parts read from storage.
    pub fn from_parts(k: usize, mask: u16, values: Vec<i8>) -> Result<Self> {
        check_kernel_size(k)?;
        let positions = k * k;
        if positions < 16 && mask >> positions != 0 {
            return Err(Error::corrupt(format!(
                "mask {mask:#b} has bits beyond {positions} positions"
            )));
        }
        if mask.count_ones() as usize != values.len() {
            return Err(Error::corrupt(format!(
                "mask popcount {} but {} stored values",
                mask.count_ones(),
                values.len()
            )));
        }
        if values.contains(&0) {
            return Err(Error::corrupt("bit-mask kernel stores a zero weight"));
        }
        Ok(BitmaskKernel { k, mask, values })
    }

    pub fn decode(&self) -> DenseKernel {
        let mut dense = vec![0i8; self.k * self.k];
        for (pos, w) in self.positions() {
            dense[pos] = w;
        }
        DenseKernel::new(self.k, dense).expect("kernel size validated on construction")
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn mask(&self) -> u16 {
        self.mask
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// The mask as a string of `k*k` digits, position `(0, 0)` first.
    pub fn mask_string(&self) -> String {
        (0..self.k * self.k)
            .map(|i| if self.mask >> i & 1 == 1 { '1' } else { '0' })
            .collect()
    }

    /// Nonzero weights as `(row, col, weight)`, leftmost first within each
    /// row, rows top-down. Mirrors a priority encoder that locates the first
    /// set mask bit and clears it before the next cycle.
    pub fn nonzeros(&self) -> impl Iterator<Item = (usize, usize, i8)> + '_ {
        let k = self.k;
        self.positions().map(move |(pos, w)| (pos / k, pos % k, w))
    }

    fn positions(&self) -> impl Iterator<Item = (usize, i8)> + '_ {
        let mut remaining = self.mask;
        self.values.iter().map(move |&w| {
            let pos = remaining.trailing_zeros() as usize;
            remaining &= remaining - 1;
            (pos, w)
        })
    }
}

/// Compressed sparse row form of a single kernel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrKernel {
    k: usize,
    row_ptr: Vec<u8>,
    col_idx: Vec<u8>,
    values: Vec<i8>,
}

impl CsrKernel {
    pub fn encode(kernel: &DenseKernel) -> Self {
        let k = kernel.size();
        let mut row_ptr = Vec::with_capacity(k + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for r in 0..k {
            for c in 0..k {
                let v = kernel.get(r, c);
                if v != 0 {
                    col_idx.push(c as u8);
                    values.push(v);
                }
            }
            row_ptr.push(values.len() as u8);
        }
        CsrKernel {
            k,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn from_parts(
        k: usize,
        row_ptr: Vec<u8>,
        col_idx: Vec<u8>,
        values: Vec<i8>,
    ) -> Result<Self> {
        check_kernel_size(k)?;
        if row_ptr.len() != k + 1 {
            return Err(Error::corrupt(format!(
                "row_ptr has {} entries, expected {}",
                row_ptr.len(),
                k + 1
            )));
        }
        if row_ptr[0] != 0 {
            return Err(Error::corrupt("row_ptr must start at 0"));
        }
        if row_ptr.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::corrupt("row_ptr is not non-decreasing"));
        }
        let nnz = row_ptr[k] as usize;
        if nnz != values.len() || nnz != col_idx.len() {
            return Err(Error::corrupt(format!(
                "row_ptr ends at {nnz} but {} indices and {} values",
                col_idx.len(),
                values.len()
            )));
        }
        for r in 0..k {
            let row = &col_idx[row_ptr[r] as usize..row_ptr[r + 1] as usize];
            if row.iter().any(|&c| c as usize >= k) {
                return Err(Error::corrupt("column index out of range"));
            }
            if row.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::corrupt("column indices not strictly increasing"));
            }
        }
        if values.contains(&0) {
            return Err(Error::corrupt("CSR kernel stores a zero weight"));
        }
        Ok(CsrKernel {
            k,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn decode(&self) -> DenseKernel {
        let k = self.k;
        let mut dense = vec![0i8; k * k];
        for r in 0..k {
            for j in self.row_ptr[r] as usize..self.row_ptr[r + 1] as usize {
                dense[r * k + self.col_idx[j] as usize] = self.values[j];
            }
        }
        DenseKernel::new(k, dense).expect("kernel size validated on construction")
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn row_ptr(&self) -> &[u8] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[u8] {
        &self.col_idx
    }

    pub fn values(&self) -> &[i8] {
        &self.values
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }
}
