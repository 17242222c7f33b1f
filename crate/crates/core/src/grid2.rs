//! Row-major rectangular grids.
//!
//! A thin wrapper over `Vec<T>` with `(ix, iy)` indexing, shared by the
//! transverse phase tables, the time-domain solver fields and the
//! reconstruction tiles. Row-major means `iy` is the fast (contiguous)
//! index, matching the on-disk layout of the binary snapshot format.

use std::ops::{Index, IndexMut};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2<T> {
    nx: usize,
    ny: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid2<T> {
    pub fn filled(nx: usize, ny: usize, value: T) -> Self {
        Grid2 { nx, ny, data: vec![value; nx * ny] }
    }
}

impl<T> Grid2<T> {
    pub fn from_fn(nx: usize, ny: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(nx * ny);
        for ix in 0..nx {
            for iy in 0..ny {
                data.push(f(ix, iy));
            }
        }
        Grid2 { nx, ny, data }
    }

    pub fn from_vec(nx: usize, ny: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), nx * ny, "grid data length must equal nx * ny");
        Grid2 { nx, ny, data }
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    /// Contiguous row `ix` (all `iy`).
    pub fn row(&self, ix: usize) -> &[T] {
        &self.data[ix * self.ny..(ix + 1) * self.ny]
    }

    pub fn row_mut(&mut self, ix: usize) -> &mut [T] {
        &mut self.data[ix * self.ny..(ix + 1) * self.ny]
    }

    pub fn iter(&self) -> impl Iterator<Item = &T> {
        self.data.iter()
    }
}

impl<T> Index<(usize, usize)> for Grid2<T> {
    type Output = T;
    fn index(&self, (ix, iy): (usize, usize)) -> &T {
        debug_assert!(ix < self.nx && iy < self.ny);
        &self.data[ix * self.ny + iy]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid2<T> {
    fn index_mut(&mut self, (ix, iy): (usize, usize)) -> &mut T {
        debug_assert!(ix < self.nx && iy < self.ny);
        &mut self.data[ix * self.ny + iy]
    }
}
