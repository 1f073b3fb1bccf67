//! Row-major rasters: float planes, validated grayscale frames and binary masks.

use crate::error::{Error, Result};

/// A row-major grid of `f32` values with no range constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl Plane {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImage("zero-sized plane".into()));
        }
        if data.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} samples, got {}",
                width * height,
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f32) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Bilinear sample with coordinates clamped to the grid.
    pub fn sample(&self, x: f64, y: f64) -> f32 {
        let xm = (self.width - 1) as f64;
        let ym = (self.height - 1) as f64;
        let x = x.clamp(0.0, xm);
        let y = y.clamp(0.0, ym);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = (x - x0 as f64) as f32;
        let fy = (y - y0 as f64) as f32;
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bottom * fy
    }

    pub fn max(&self) -> f32 {
        self.data.iter().copied().fold(f32::NEG_INFINITY, f32::max)
    }

    /// Copies the `w` x `h` window whose top-left corner is `(x0, y0)`.
    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> Plane {
        assert!(x0 + w <= self.width && y0 + h <= self.height);
        let mut data = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + w]);
        }
        Plane {
            width: w,
            height: h,
            data,
        }
    }
}

/// One grayscale frame of a sequence with intensities normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageFrame {
    plane: Plane,
}

impl ImageFrame {
    pub fn new(width: usize, height: usize, intensities: Vec<f32>) -> Result<Self> {
        let plane = Plane::new(width, height, intensities)?;
        Self::from_plane(plane)
    }

    pub fn from_plane(plane: Plane) -> Result<Self> {
        if let Some(v) = plane.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidImage(format!(
                "intensity {v} outside [0, 1]"
            )));
        }
        Ok(Self { plane })
    }

    /// Clamps every sample into `[0, 1]` (NaN becomes 0).
    pub fn from_plane_clamped(mut plane: Plane) -> Self {
        for v in &mut plane.data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self { plane }
    }

    pub fn width(&self) -> usize {
        self.plane.width
    }

    pub fn height(&self) -> usize {
        self.plane.height
    }

    pub fn dims(&self) -> (usize, usize) {
        self.plane.dims()
    }

    pub fn plane(&self) -> &Plane {
        &self.plane
    }

    pub fn intensities(&self) -> &[f32] {
        &self.plane.data
    }

    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.plane.get(x, y)
    }
}

pub(crate) fn check_dims(expected: (usize, usize), actual: (usize, usize)) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

/// The eight neighbour offsets, 4-neighbours first.
pub const NEIGHBORS_8: [(isize, isize); 8] = [
    (1, 0),
    (0, 1),
    (-1, 0),
    (0, -1),
    (1, 1),
    (-1, 1),
    (-1, -1),
    (1, -1),
];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![true; width * height],
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Out-of-bounds coordinates read as unset.
    #[inline]
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.bits[y as usize * self.width + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!(self.dims(), other.dims());
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a && *b).collect(),
        }
    }

    pub fn or(&self, other: &BinaryMask) -> BinaryMask {
        assert_eq!(self.dims(), other.dims());
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(a, b)| *a || *b).collect(),
        }
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }

    /// Set pixels as `(x, y)` in raster order.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| (i % self.width, i / self.width))
    }

    /// Number of set 8-neighbours of `(x, y)`.
    pub fn neighbor_count(&self, x: usize, y: usize) -> usize {
        NEIGHBORS_8
            .iter()
            .filter(|(dx, dy)| self.get_signed(x as isize + dx, y as isize + dy))
            .count()
    }

    /// 8-connected component labels (`0` = background, components numbered
    /// from 1 in raster order of their first pixel) and the component count.
    pub fn components(&self) -> (Vec<u32>, usize) {
        let mut labels = vec![0u32; self.bits.len()];
        let mut next = 0u32;
        let mut stack = Vec::new();
        for start in 0..self.bits.len() {
            if !self.bits[start] || labels[start] != 0 {
                continue;
            }
            next += 1;
            labels[start] = next;
            stack.push(start);
            while let Some(i) = stack.pop() {
                let (x, y) = ((i % self.width) as isize, (i / self.width) as isize);
                for (dx, dy) in NEIGHBORS_8 {
                    let (nx, ny) = (x + dx, y + dy);
                    if self.get_signed(nx, ny) {
                        let j = ny as usize * self.width + nx as usize;
                        if labels[j] == 0 {
                            labels[j] = next;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        (labels, next as usize)
    }

    pub fn component_count(&self) -> usize {
        self.components().1
    }

    pub fn crop(&self, x0: usize, y0: usize, w: usize, h: usize) -> BinaryMask {
        assert!(x0 + w <= self.width && y0 + h <= self.height);
        let mut bits = Vec::with_capacity(w * h);
        for y in y0..y0 + h {
            bits.extend_from_slice(&self.bits[y * self.width + x0..y * self.width + x0 + w]);
        }
        BinaryMask {
            width: w,
            height: h,
            bits,
        }
    }

    /// Smallest `(x0, y0, x1, y1)` (inclusive) enclosing every set pixel.
    pub fn bounding_box(&self) -> Option<(usize, usize, usize, usize)> {
        let mut bb: Option<(usize, usize, usize, usize)> = None;
        for (x, y) in self.pixels() {
            bb = Some(match bb {
                None => (x, y, x, y),
                Some((a, b, c, d)) => (a.min(x), b.min(y), c.max(x), d.max(y)),
            });
        }
        bb
    }
}
