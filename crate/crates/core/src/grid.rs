// SPDX-License-Identifier: Apache-2.0

//! Dense n×m grid storage and the geometry that maps layout coordinates onto
//! grid indices. Index `i` runs along x (0..n) and `j` along y (0..m); storage
//! is i-major, so `(i, j)` lives at `i * m + j`.

use crate::netlist::{LayoutRegion, RoutingGrid};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2<T> {
    n: usize,
    m: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid2<T> {
    pub fn filled(n: usize, m: usize, value: T) -> Self {
        Self {
            n,
            m,
            data: vec![value; n * m],
        }
    }
}

impl<T> Grid2<T> {
    pub fn from_vec(n: usize, m: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), n * m, "grid data length");
        Self { n, m, data }
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.n && j < self.m);
        i * self.m + j
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.m + j]
    }

    #[inline]
    pub fn get_mut(&mut self, i: usize, j: usize) -> &mut T {
        &mut self.data[i * self.m + j]
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

    /// Iterates `(i, j, &value)` in storage order.
    pub fn iter_indexed(&self) -> impl Iterator<Item = (usize, usize, &T)> + '_ {
        let m = self.m;
        self.data
            .iter()
            .enumerate()
            .map(move |(k, v)| (k / m, k % m, v))
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> Grid2<U> {
        Grid2 {
            n: self.n,
            m: self.m,
            data: self.data.iter().map(f).collect(),
        }
    }
}

impl std::ops::Index<(usize, usize)> for Grid2<f64> {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        self.get(i, j)
    }
}

impl std::ops::IndexMut<(usize, usize)> for Grid2<f64> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        self.get_mut(i, j)
    }
}

/// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn new(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self { x0, y0, x1, y1 }
    }

    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }

    /// Area of the intersection, zero when disjoint.
    pub fn overlap_area(&self, other: &Rect) -> f64 {
        let w = self.x1.min(other.x1) - self.x0.max(other.x0);
        let h = self.y1.min(other.y1) - self.y0.max(other.y0);
        if w > 0.0 && h > 0.0 {
            w * h
        } else {
            0.0
        }
    }
}

/// Maps layout coordinates onto the routing grid of a region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridGeometry {
    pub region: LayoutRegion,
    pub n: usize,
    pub m: usize,
    pub pitch_x: f64,
    pub pitch_y: f64,
}

impl GridGeometry {
    pub fn new(region: LayoutRegion, grid: &RoutingGrid) -> Self {
        Self {
            region,
            n: grid.n,
            m: grid.m,
            pitch_x: (region.x1 - region.x0) / grid.n as f64,
            pitch_y: (region.y1 - region.y0) / grid.m as f64,
        }
    }

    pub fn len(&self) -> usize {
        self.n * self.m
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Smaller of the two pitches.
    pub fn pitch(&self) -> f64 {
        self.pitch_x.min(self.pitch_y)
    }

    pub fn bin_area(&self) -> f64 {
        self.pitch_x * self.pitch_y
    }

    pub fn bin_rect(&self, i: usize, j: usize) -> Rect {
        let x0 = self.region.x0 + i as f64 * self.pitch_x;
        let y0 = self.region.y0 + j as f64 * self.pitch_y;
        Rect::new(x0, y0, x0 + self.pitch_x, y0 + self.pitch_y)
    }

    pub fn bin_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.region.x0 + (i as f64 + 0.5) * self.pitch_x,
            self.region.y0 + (j as f64 + 0.5) * self.pitch_y,
        )
    }

    /// Column index of `x`, clamped into `0..n`.
    #[inline]
    pub fn col_clamped(&self, x: f64) -> usize {
        let t = ((x - self.region.x0) / self.pitch_x).floor();
        if t <= 0.0 || t.is_nan() {
            0
        } else {
            (t as usize).min(self.n - 1)
        }
    }

    /// Row index of `y`, clamped into `0..m`.
    #[inline]
    pub fn row_clamped(&self, y: f64) -> usize {
        let t = ((y - self.region.y0) / self.pitch_y).floor();
        if t <= 0.0 || t.is_nan() {
            0
        } else {
            (t as usize).min(self.m - 1)
        }
    }

    /// Grid containing `(x, y)`; points on the upper/right region boundary
    /// belong to the last row/column. `None` outside the region.
    pub fn locate(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        if self.region.contains(x, y) {
            Some((self.col_clamped(x), self.row_clamped(y)))
        } else {
            None
        }
    }

    /// Half-open index ranges of the bins that overlap `rect` with positive
    /// area, clipped to the grid.
    pub fn overlapping_bins(
        &self,
        rect: &Rect,
    ) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let span = |lo: f64, hi: f64, origin: f64, pitch: f64, count: usize| {
            let a = ((lo - origin) / pitch).floor();
            let b = ((hi - origin) / pitch).ceil();
            let a = if a < 0.0 { 0 } else { (a as usize).min(count) };
            let b = if b < 0.0 { 0 } else { (b as usize).min(count) };
            a..b.max(a)
        };
        (
            span(rect.x0, rect.x1, self.region.x0, self.pitch_x, self.n),
            span(rect.y0, rect.y1, self.region.y0, self.pitch_y, self.m),
        )
    }
}
