//! Lattice mode grid and FFT plumbing.
//!
//! Lattice fields live on `N` sites. Their transforms are indexed in two ways:
//! *grid order* `j = 0..N` with `k_j = j/N - 1/2` (ascending on the torus), and
//! *FFT order* `m = 0..N` with `k = m/N` taken modulo 1. For even `N` the two are
//! related by a half rotation, `m = (j + N/2) mod N`.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{require, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeGrid {
    n: usize,
}

impl ModeGrid {
    pub fn new(n: usize) -> Result<Self> {
        require(n >= 2 && n % 2 == 0, || format!("lattice size must be even and >= 2, got {n}"))?;
        Ok(Self { n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `k_j = j/N - 1/2`.
    pub fn k(&self, j: usize) -> f64 {
        j as f64 / self.n as f64 - 0.5
    }

    pub fn ks(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.k(j)).collect()
    }

    /// FFT index of grid index `j`; the map is an involution for even `N`.
    pub fn fft_index(&self, j: usize) -> usize {
        (j + self.n / 2) % self.n
    }

    /// Grid index of `-k_j`.
    pub fn negative(&self, j: usize) -> usize {
        (self.n - j) % self.n
    }

    /// Grid index of the mode `k = 0`.
    pub fn zero_index(&self) -> usize {
        self.n / 2
    }

    /// Grid index of the lattice mode nearest to `k`.
    pub fn nearest(&self, k: f64) -> usize {
        let j = ((crate::model::wrap(k) + 0.5) * self.n as f64).round() as usize;
        j % self.n
    }

    pub fn to_grid_order<T: Copy>(&self, fft_ordered: &[T]) -> Vec<T> {
        (0..self.n).map(|j| fft_ordered[self.fft_index(j)]).collect()
    }

    pub fn to_fft_order<T: Copy>(&self, grid_ordered: &[T]) -> Vec<T> {
        // the half rotation is its own inverse
        self.to_grid_order(grid_ordered)
    }
}

/// Forward/inverse FFT pair of a fixed size with its own scratch space.
#[derive(Clone)]
pub struct Dft {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex64>,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl Dft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            scratch: vec![Complex64::new(0.0, 0.0); len],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `x̂_m = Σ_y x_y exp(-2πi y m / N)`, in place.
    pub fn forward(&mut self, buf: &mut [Complex64]) {
        self.forward.process_with_scratch(buf, &mut self.scratch);
    }

    /// `x_y = (1/N) Σ_m x̂_m exp(2πi y m / N)`, in place.
    pub fn inverse(&mut self, buf: &mut [Complex64]) {
        self.inverse.process_with_scratch(buf, &mut self.scratch);
        let s = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|z| *z *= s);
    }

    pub fn forward_real(&mut self, x: &[f64], out: &mut [Complex64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o = Complex64::new(v, 0.0);
        }
        self.forward(out);
    }
}
