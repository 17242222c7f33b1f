//! Minimal 2D FFT on square complex grids, built on 1D plans: rows, a
//! transpose, rows again, and a transpose back. Inverse transforms are
//! normalized so that `ifft2(fft2(x)) = x`.

use crate::grid2::Grid2;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

pub struct Fft2 {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
    transpose_buf: Vec<Complex64>,
}

impl Fft2 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        let scratch_len = fwd.get_inplace_scratch_len().max(inv.get_inplace_scratch_len());
        Fft2 {
            n,
            fwd,
            inv,
            scratch: vec![Complex64::ZERO; scratch_len],
            transpose_buf: vec![Complex64::ZERO; n * n],
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    fn pass(&mut self, data: &mut [Complex64], forward: bool) {
        let n = self.n;
        let plan = if forward { &self.fwd } else { &self.inv };
        for row in data.chunks_exact_mut(n) {
            plan.process_with_scratch(row, &mut self.scratch);
        }
        for i in 0..n {
            for j in 0..n {
                self.transpose_buf[j * n + i] = data[i * n + j];
            }
        }
        for row in self.transpose_buf.chunks_exact_mut(n) {
            plan.process_with_scratch(row, &mut self.scratch);
        }
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.transpose_buf[i * n + j];
            }
        }
    }

    /// In-place forward 2D transform (unnormalized).
    pub fn forward(&mut self, grid: &mut Grid2<Complex64>) {
        assert_eq!(grid.nx(), self.n);
        assert_eq!(grid.ny(), self.n);
        self.pass(grid.as_mut_slice(), true);
    }

    /// In-place inverse 2D transform, normalized by `1/n²`.
    pub fn inverse(&mut self, grid: &mut Grid2<Complex64>) {
        assert_eq!(grid.nx(), self.n);
        assert_eq!(grid.ny(), self.n);
        self.pass(grid.as_mut_slice(), false);
        let scale = 1.0 / (self.n * self.n) as f64;
        for z in grid.as_mut_slice() {
            *z *= scale;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_plane_wave_spectrum() {
        let n = 16;
        let mut fft = Fft2::new(n);
        let original = Grid2::from_fn(n, n, |i, j| {
            Complex64::new((i as f64 * 0.3).sin() + j as f64 * 0.01, (j as f64 * 0.7).cos())
        });
        let mut grid = original.clone();
        fft.forward(&mut grid);
        fft.inverse(&mut grid);
        for (a, b) in grid.iter().zip(original.iter()) {
            assert!((a - b).norm() < 1e-12);
        }

        // A pure plane wave concentrates on a single mode.
        let (ki, kj) = (3, 14);
        let mut wave = Grid2::from_fn(n, n, |i, j| {
            Complex64::from_polar(
                1.0,
                2.0 * std::f64::consts::PI * (ki * i + kj * j) as f64 / n as f64,
            )
        });
        fft.forward(&mut wave);
        for i in 0..n {
            for j in 0..n {
                let expect = if (i, j) == (ki, kj) { (n * n) as f64 } else { 0.0 };
                assert!(
                    (wave[(i, j)].norm() - expect).abs() < 1e-9 * (n * n) as f64,
                    "mode ({i},{j})"
                );
            }
        }
    }
}
