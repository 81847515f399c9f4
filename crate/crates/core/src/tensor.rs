//! Tensor types shared by the engine and the simulator.
//!
//! All multi-dimensional data is stored row-major. A [`SpikeTensor`] is laid
//! out as `(t, c, row, col)`, so one `(t, c)` plane is a contiguous
//! `height * width` slice.

use crate::error::{Error, Result};

/// Block height used by block convolution.
pub const TILE_H: usize = 18;
/// Block width used by block convolution.
pub const TILE_W: usize = 32;
/// Output positions in a full tile, one processing element each.
pub const TILE_POSITIONS: usize = TILE_H * TILE_W;

/// Bits per pixel of a multibit input image.
pub const PIXEL_BITS: usize = 8;

/// A dense 2-D grid, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grid<T> {
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> Grid<T> {
    pub fn new(height: usize, width: usize) -> Self {
        Grid {
            height,
            width,
            data: vec![T::default(); height * width],
        }
    }

    pub fn filled(height: usize, width: usize, value: T) -> Self {
        Grid {
            height,
            width,
            data: vec![value; height * width],
        }
    }
}

impl<T: Copy> Grid<T> {
    pub fn from_vec(height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::shape(format!(
                "grid {}x{} needs {} cells, got {}",
                height,
                width,
                height * width,
                data.len()
            )));
        }
        Ok(Grid {
            height,
            width,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Grid {
            height,
            width,
            data,
        }
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, value: T) {
        self.data[y * self.width + x] = value;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Grid<U> {
        Grid {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl Grid<bool> {
    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// Binary activation map indexed `(t, c, row, col)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpikeTensor {
    steps: usize,
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<bool>,
}

impl SpikeTensor {
    pub fn zeros(steps: usize, channels: usize, height: usize, width: usize) -> Result<Self> {
        check_dims(&[steps, channels, height, width])?;
        Ok(SpikeTensor {
            steps,
            channels,
            height,
            width,
            data: vec![false; steps * channels * height * width],
        })
    }

    pub fn from_vec(
        steps: usize,
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<bool>,
    ) -> Result<Self> {
        check_dims(&[steps, channels, height, width])?;
        if data.len() != steps * channels * height * width {
            return Err(Error::shape(format!(
                "spike tensor ({steps},{channels},{height},{width}) needs {} values, got {}",
                steps * channels * height * width,
                data.len()
            )));
        }
        Ok(SpikeTensor {
            steps,
            channels,
            height,
            width,
            data,
        })
    }

    /// Stacks per-step channel stacks into one tensor. Every step must hold
    /// `channels` planes of identical size.
    pub fn from_planes(steps: Vec<Vec<Grid<bool>>>) -> Result<Self> {
        let t = steps.len();
        let c = steps.first().map_or(0, Vec::len);
        let (h, w) = steps
            .first()
            .and_then(|s| s.first())
            .map_or((0, 0), |g| (g.height(), g.width()));
        let mut data = Vec::with_capacity(t * c * h * w);
        for planes in &steps {
            if planes.len() != c {
                return Err(Error::shape("ragged channel count across time steps"));
            }
            for p in planes {
                if p.height() != h || p.width() != w {
                    return Err(Error::shape("ragged plane size"));
                }
                data.extend_from_slice(p.as_slice());
            }
        }
        SpikeTensor::from_vec(t, c, h, w, data)
    }

    #[inline]
    pub fn steps(&self) -> usize {
        self.steps
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize, usize, usize) {
        (self.steps, self.channels, self.height, self.width)
    }

    #[inline]
    fn index(&self, t: usize, c: usize, y: usize, x: usize) -> usize {
        ((t * self.channels + c) * self.height + y) * self.width + x
    }

    #[inline]
    pub fn get(&self, t: usize, c: usize, y: usize, x: usize) -> bool {
        self.data[self.index(t, c, y, x)]
    }

    #[inline]
    pub fn set(&mut self, t: usize, c: usize, y: usize, x: usize, v: bool) {
        let i = self.index(t, c, y, x);
        self.data[i] = v;
    }

    /// Contiguous `height * width` slice of one `(t, c)` plane.
    pub fn plane(&self, t: usize, c: usize) -> &[bool] {
        let n = self.height * self.width;
        let start = (t * self.channels + c) * n;
        &self.data[start..start + n]
    }

    pub fn plane_grid(&self, t: usize, c: usize) -> Grid<bool> {
        Grid {
            height: self.height,
            width: self.width,
            data: self.plane(t, c).to_vec(),
        }
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.data
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Stacks `other`'s channels after this tensor's, step by step.
    pub fn concat_channels(&self, other: &SpikeTensor) -> Result<SpikeTensor> {
        if self.steps != other.steps || self.height != other.height || self.width != other.width {
            return Err(Error::shape(format!(
                "cannot concatenate {:?} with {:?}",
                self.dims(),
                other.dims()
            )));
        }
        let (a, b) = (
            self.channels * self.height * self.width,
            other.channels * other.height * other.width,
        );
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        for t in 0..self.steps {
            data.extend_from_slice(&self.data[t * a..(t + 1) * a]);
            data.extend_from_slice(&other.data[t * b..(t + 1) * b]);
        }
        SpikeTensor::from_vec(
            self.steps,
            self.channels + other.channels,
            self.height,
            self.width,
            data,
        )
    }

    /// Copies the tile window of plane `(t, c)` out as its own grid.
    pub fn extract_tile(&self, t: usize, c: usize, tile: &Tile) -> Grid<bool> {
        let plane = self.plane(t, c);
        Grid::from_fn(tile.height, tile.width, |y, x| {
            plane[(tile.row + y) * self.width + tile.col + x]
        })
    }
}

/// Multibit input image `(c, row, col)` with 8-bit unsigned pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultibitTensor {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl MultibitTensor {
    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(&[channels, height, width])?;
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "image ({channels},{height},{width}) needs {} pixels, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(MultibitTensor {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn zeros(channels: usize, height: usize, width: usize) -> Result<Self> {
        Self::from_vec(channels, height, width, vec![0; channels * height * width])
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, c: usize, y: usize, x: usize) -> u8 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }
}

/// Integer or fixed-point map `(c, row, col)`, used for convolution results.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMap<T> {
    channels: usize,
    height: usize,
    width: usize,
    data: Vec<T>,
}

impl<T: Copy + Default> FeatureMap<T> {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![T::default(); channels * height * width],
        }
    }
}

impl<T: Copy> FeatureMap<T> {
    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != channels * height * width {
            return Err(Error::shape(format!(
                "feature map ({channels},{height},{width}) needs {} values, got {}",
                channels * height * width,
                data.len()
            )));
        }
        Ok(FeatureMap {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn get(&self, c: usize, y: usize, x: usize) -> T {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, c: usize, y: usize, x: usize, v: T) {
        self.data[(c * self.height + y) * self.width + x] = v;
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let n = self.height * self.width;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> FeatureMap<U> {
        FeatureMap {
            channels: self.channels,
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl FeatureMap<i32> {
    /// Integer view of one spike time step, 1 for a spike and 0 otherwise.
    pub fn from_spikes(spikes: &SpikeTensor, t: usize) -> Self {
        let (_, c, h, w) = spikes.dims();
        let mut data = Vec::with_capacity(c * h * w);
        for ch in 0..c {
            data.extend(spikes.plane(t, ch).iter().map(|&b| b as i32));
        }
        FeatureMap {
            channels: c,
            height: h,
            width: w,
            data,
        }
    }

    pub fn from_image(img: &MultibitTensor) -> Self {
        FeatureMap {
            channels: img.channels,
            height: img.height,
            width: img.width,
            data: img.data.iter().map(|&p| p as i32).collect(),
        }
    }
}

/// A rectangular window of a parent map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tile {
    pub row: usize,
    pub col: usize,
    pub height: usize,
    pub width: usize,
}

impl Tile {
    pub fn positions(&self) -> usize {
        self.height * self.width
    }
}

/// Splits every pixel into its bits; plane `b` holds bit `b`, least
/// significant first. Each plane is a one-step spike tensor with the image's
/// channel count.
pub fn bit_plane_split(img: &MultibitTensor) -> Vec<SpikeTensor> {
    (0..PIXEL_BITS)
        .map(|b| SpikeTensor {
            steps: 1,
            channels: img.channels,
            height: img.height,
            width: img.width,
            data: img.data.iter().map(|&p| (p >> b) & 1 == 1).collect(),
        })
        .collect()
}

/// Partitions a `height x width` map into non-overlapping tiles of at most
/// `tile_h x tile_w`, row-major over the tile grid. Tiles on the right and
/// bottom edges shrink when the map is not an exact multiple.
pub fn tile_partition(height: usize, width: usize, tile_h: usize, tile_w: usize) -> Vec<Tile> {
    assert!(tile_h > 0 && tile_w > 0, "tile dims must be positive");
    let mut tiles = Vec::with_capacity(height.div_ceil(tile_h) * width.div_ceil(tile_w));
    for row in (0..height).step_by(tile_h) {
        for col in (0..width).step_by(tile_w) {
            tiles.push(Tile {
                row,
                col,
                height: tile_h.min(height - row),
                width: tile_w.min(width - col),
            });
        }
    }
    tiles
}

/// Number of tiles [`tile_partition`] produces for a map.
pub fn tile_count(height: usize, width: usize, tile_h: usize, tile_w: usize) -> usize {
    height.div_ceil(tile_h) * width.div_ceil(tile_w)
}

/// Pads a grid on all four sides by copying the nearest edge cell.
pub fn replicate_pad<T: Copy>(grid: &Grid<T>, pad: usize) -> Grid<T> {
    if pad == 0 {
        return grid.clone();
    }
    let (h, w) = (grid.height() as isize, grid.width() as isize);
    let p = pad as isize;
    Grid::from_fn(grid.height() + 2 * pad, grid.width() + 2 * pad, |y, x| {
        let sy = (y as isize - p).clamp(0, h - 1) as usize;
        let sx = (x as isize - p).clamp(0, w - 1) as usize;
        grid.get(sy, sx)
    })
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.contains(&0) {
        return Err(Error::shape(format!(
            "all dims must be positive, got {dims:?}"
        )));
    }
    Ok(())
}
