//! Linear kinetic equation `∂_t Ē = 𝓛Ē` and the forcing intensity `𝓡(t,k)`.
//!
//! `𝓛f(k) = ∫ R(k,k') f(k') dk' - (β̂(k)/2) f(k)` on a uniform torus grid with
//! weights `1/K`. The kernel is a trigonometric polynomial of rank two in
//! separated form,
//!
//! ```text
//! ∫ R(k,k') f(k') dk' = 16 a(k) [⟨a, f⟩ - cos(2πk) ⟨a cos 2π·, f⟩],   a = sin²(π·),
//! ```
//!
//! so applying `𝓛` costs `O(K)` and the quadrature is exact for `K > 4`
//! whenever `f` is a trigonometric polynomial of low degree. The same
//! separation lets a trajectory store two scalars per time and evaluate
//! `𝓡(t,k)` at any `k`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::model::{beta_hat, R_kernel, BETA_HAT_MAX};
use crate::stats::pairwise_sum;

/// Default RK4 step, `0.1 / max β̂`.
pub const DEFAULT_DT: f64 = 0.1 / BETA_HAT_MAX;

/// Largest grid accepted by the dense exponential oracle.
pub const MAX_EXPONENTIAL_NODES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GridKind {
    /// `k_j = (j + 1/2)/K - 1/2`.
    Midpoint,
    /// `k_j = j/K - 1/2`, the lattice modes of a chain with `K` sites.
    Lattice,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticGrid {
    kind: GridKind,
    ks: Vec<f64>,
    a: Vec<f64>,
    cos: Vec<f64>,
    beta: Vec<f64>,
}

impl KineticGrid {
    pub fn new(kind: GridKind, nodes: usize) -> Result<Self> {
        require(nodes >= 8, || format!("kinetic grid needs at least 8 nodes, got {nodes}"))?;
        let offset = match kind {
            GridKind::Midpoint => 0.5,
            GridKind::Lattice => 0.0,
        };
        let ks: Vec<f64> = (0..nodes).map(|j| (j as f64 + offset) / nodes as f64 - 0.5).collect();
        Ok(Self {
            kind,
            a: ks.iter().map(|k| (PI * k).sin().powi(2)).collect(),
            cos: ks.iter().map(|k| (2.0 * PI * k).cos()).collect(),
            beta: ks.iter().map(|&k| beta_hat(k)).collect(),
            ks,
        })
    }

    pub fn midpoint(nodes: usize) -> Result<Self> {
        Self::new(GridKind::Midpoint, nodes)
    }

    pub fn lattice(nodes: usize) -> Result<Self> {
        Self::new(GridKind::Lattice, nodes)
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    pub fn ks(&self) -> &[f64] {
        &self.ks
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    /// Quadrature mean `(1/K) Σ_j f(k_j)`.
    pub fn mean(&self, f: &[f64]) -> f64 {
        pairwise_sum(f) / self.len() as f64
    }

    /// `(⟨a, f⟩, ⟨a cos 2π·, f⟩)`.
    fn moments(&self, f: &[f64]) -> (f64, f64) {
        let af: Vec<f64> = self.a.iter().zip(f).map(|(a, f)| a * f).collect();
        let acf: Vec<f64> = af.iter().zip(&self.cos).map(|(x, c)| x * c).collect();
        (self.mean(&af), self.mean(&acf))
    }

    fn gain(&self, a_moment: f64, b_moment: f64, j: usize) -> f64 {
        16.0 * self.a[j] * (a_moment - self.cos[j] * b_moment)
    }

    /// Dense generator `G_ij = R(k_i,k_j)/K - δ_ij β̂(k_i)/2`.
    pub fn generator_matrix(&self) -> DMatrix<f64> {
        let k = self.len();
        DMatrix::from_fn(k, k, |i, j| {
            let r = R_kernel(self.ks[i], self.ks[j]) / k as f64;
            if i == j {
                r - 0.5 * self.beta[i]
            } else {
                r
            }
        })
    }
}

/// `𝓡(k) = 16 sin²(πk) [A - cos(2πk) B]` from the two kernel moments.
pub fn rate_from_moments(k: f64, a_moment: f64, b_moment: f64) -> f64 {
    (16.0 * (PI * k).sin().powi(2) * (a_moment - (2.0 * PI * k).cos() * b_moment)).max(0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct KineticState {
    pub grid: KineticGrid,
    pub values: Vec<f64>,
    pub t: f64,
}

impl KineticState {
    pub fn new(grid: KineticGrid, values: Vec<f64>) -> Result<Self> {
        require(values.len() == grid.len(), || {
            format!("{} values for a grid of {} nodes", values.len(), grid.len())
        })?;
        require(values.iter().all(|v| v.is_finite() && *v >= 0.0), || {
            "kinetic energy density must be finite and nonnegative".into()
        })?;
        Ok(Self { grid, values, t: 0.0 })
    }

    pub fn constant(grid: KineticGrid, temperature: f64) -> Result<Self> {
        let n = grid.len();
        Self::new(grid, vec![temperature; n])
    }

    pub fn from_fn(grid: KineticGrid, f: impl Fn(f64) -> f64) -> Result<Self> {
        let values = grid.ks().iter().map(|&k| f(k)).collect();
        Self::new(grid, values)
    }

    /// `(1/K) Σ_j Ē(k_j)`; the equilibrium temperature.
    pub fn mass(&self) -> f64 {
        self.grid.mean(&self.values)
    }

    /// `(1/K) Σ_j |Ē(k_j) - T|` with `T` the mass.
    pub fn l1_distance_to_equilibrium(&self) -> f64 {
        let t = self.mass();
        let d: Vec<f64> = self.values.iter().map(|v| (v - t).abs()).collect();
        self.grid.mean(&d)
    }
}

/// `𝓛f` at the grid nodes.
pub fn apply_l(grid: &KineticGrid, f: &[f64]) -> Vec<f64> {
    let (a, b) = grid.moments(f);
    (0..grid.len())
        .map(|j| grid.gain(a, b, j) - 0.5 * grid.beta[j] * f[j])
        .collect()
}

/// `𝓡(k_j) = ∫ R(k_j,k') Ē(k') dk'` by quadrature; vanishes at `k = 0`.
pub fn scattering_rate(state: &KineticState) -> Vec<f64> {
    let (a, b) = state.grid.moments(&state.values);
    (0..state.grid.len()).map(|j| state.grid.gain(a, b, j).max(0.0)).collect()
}

fn rk4_step(grid: &KineticGrid, f: &mut [f64], dt: f64) {
    let k1 = apply_l(grid, f);
    let y: Vec<f64> = f.iter().zip(&k1).map(|(f, k)| f + 0.5 * dt * k).collect();
    let k2 = apply_l(grid, &y);
    let y: Vec<f64> = f.iter().zip(&k2).map(|(f, k)| f + 0.5 * dt * k).collect();
    let k3 = apply_l(grid, &y);
    let y: Vec<f64> = f.iter().zip(&k3).map(|(f, k)| f + dt * k).collect();
    let k4 = apply_l(grid, &y);
    for j in 0..f.len() {
        f[j] += dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
    }
}

fn check_step(dt: f64) -> Result<()> {
    require(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))?;
    require(dt <= 1.0 / BETA_HAT_MAX, || {
        format!("dt must be <= 1/max beta_hat = {:.6} for positivity, got {dt}", 1.0 / BETA_HAT_MAX)
    })
}

fn check_positive(f: &[f64], t: f64) -> Result<()> {
    if let Some(v) = f.iter().find(|v| **v < -1e-12 || !v.is_finite()) {
        return Err(Error::StepSize(format!("kinetic solution reached {v:e} at t = {t}; reduce dt")));
    }
    Ok(())
}

/// Number of equal RK4 steps of size at most `dt` covering `span`.
fn step_count(span: f64, dt: f64) -> usize {
    ((span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize
}

/// RK4 solution at `t` (macroscopic time elapsed from `initial.t`).
pub fn evolve(initial: &KineticState, t: f64, dt: f64) -> Result<KineticState> {
    require(t >= 0.0 && t.is_finite(), || format!("t must be >= 0, got {t}"))?;
    check_step(dt)?;
    let mut out = initial.clone();
    if t == 0.0 {
        return Ok(out);
    }
    let steps = step_count(t, dt);
    let h = t / steps as f64;
    for i in 0..steps {
        rk4_step(&initial.grid, &mut out.values, h);
        check_positive(&out.values, initial.t + (i + 1) as f64 * h)?;
    }
    for v in &mut out.values {
        *v = v.max(0.0);
    }
    out.t = initial.t + t;
    Ok(out)
}

/// RK4 image of a signed grid function under the kinetic semigroup.
///
/// The quadrature generator is symmetric, so `mean(g · P_t f) = mean(P_t g · f)`;
/// this is what turns a test function into a control variate.
pub fn propagate_signed(grid: &KineticGrid, f: &[f64], t: f64, dt: f64) -> Result<Vec<f64>> {
    require(f.len() == grid.len(), || format!("function has {} nodes, grid {}", f.len(), grid.len()))?;
    require(t >= 0.0 && t.is_finite(), || format!("t must be >= 0, got {t}"))?;
    check_step(dt)?;
    let mut out = f.to_vec();
    if t > 0.0 {
        let steps = step_count(t, dt);
        let h = t / steps as f64;
        for _ in 0..steps {
            rk4_step(grid, &mut out, h);
        }
    }
    Ok(out)
}

/// Exact propagator `exp(tG)` of the dense quadrature generator via a
/// symmetric eigendecomposition.
#[derive(Debug, Clone)]
pub struct ExponentialSolver {
    grid: KineticGrid,
    eigen: SymmetricEigen<f64, nalgebra::Dyn>,
}

impl ExponentialSolver {
    pub fn new(grid: &KineticGrid) -> Result<Self> {
        require(grid.len() <= MAX_EXPONENTIAL_NODES, || {
            format!("exponential oracle supports at most {MAX_EXPONENTIAL_NODES} nodes, got {}", grid.len())
        })?;
        Ok(Self {
            grid: grid.clone(),
            eigen: SymmetricEigen::new(grid.generator_matrix()),
        })
    }

    /// Generator eigenvalues; all `≤ 0` up to roundoff.
    pub fn eigenvalues(&self) -> &[f64] {
        self.eigen.eigenvalues.as_slice()
    }

    pub fn apply(&self, f: &[f64], t: f64) -> Vec<f64> {
        let v = &self.eigen.eigenvectors;
        let coeffs = v.transpose() * DVector::from_column_slice(f);
        let scaled = DVector::from_iterator(
            coeffs.len(),
            coeffs.iter().zip(self.eigen.eigenvalues.iter()).map(|(c, l)| c * (l * t).exp()),
        );
        (v * scaled).as_slice().to_vec()
    }

    pub fn evolve(&self, initial: &KineticState, t: f64) -> Result<KineticState> {
        require(initial.grid == self.grid, || "state lives on a different grid".into())?;
        let values = self.apply(&initial.values, t).into_iter().map(|v| v.max(0.0)).collect();
        Ok(KineticState {
            grid: self.grid.clone(),
            values,
            t: initial.t + t,
        })
    }
}

/// Evenly stepped RK4 solution with the kernel moments recorded at every step.
#[derive(Debug, Clone)]
pub struct KineticTrajectory {
    grid: KineticGrid,
    dt: f64,
    values: Vec<Vec<f64>>,
    a_moment: Vec<f64>,
    b_moment: Vec<f64>,
}

impl KineticTrajectory {
    /// Solves on `[0, t_end]` with the largest step `≤ dt` that divides `t_end`.
    pub fn solve(initial: &KineticState, t_end: f64, dt: f64) -> Result<Self> {
        require(t_end > 0.0 && t_end.is_finite(), || format!("t_end must be positive, got {t_end}"))?;
        check_step(dt)?;
        let steps = step_count(t_end, dt);
        let h = t_end / steps as f64;
        let grid = initial.grid.clone();
        let mut f = initial.values.clone();
        let mut values = Vec::with_capacity(steps + 1);
        let mut a_moment = Vec::with_capacity(steps + 1);
        let mut b_moment = Vec::with_capacity(steps + 1);
        for i in 0..=steps {
            if i > 0 {
                rk4_step(&grid, &mut f, h);
                check_positive(&f, i as f64 * h)?;
            }
            let (a, b) = grid.moments(&f);
            values.push(f.clone());
            a_moment.push(a);
            b_moment.push(b);
        }
        Ok(Self {
            grid,
            dt: h,
            values,
            a_moment,
            b_moment,
        })
    }

    pub fn grid(&self) -> &KineticGrid {
        &self.grid
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.dt * (self.values.len() - 1) as f64
    }

    /// Four-point Lagrange weights around `t`, clamped to the recorded range.
    fn stencil(&self, t: f64) -> ([usize; 4], [f64; 4]) {
        let last = self.values.len() - 1;
        let x = (t / self.dt).clamp(0.0, last as f64);
        let i0 = (x.floor() as usize).saturating_sub(1).min(last.saturating_sub(3));
        let idx = [i0, i0 + 1, i0 + 2, i0 + 3].map(|i| i.min(last));
        let mut w = [0.0; 4];
        for (a, wa) in w.iter_mut().enumerate() {
            let mut p = 1.0;
            for b in 0..4 {
                if a != b {
                    p *= (x - (i0 + b) as f64) / (a as f64 - b as f64);
                }
            }
            *wa = p;
        }
        (idx, w)
    }

    fn interpolate(&self, series: &[f64], t: f64) -> f64 {
        let (idx, w) = self.stencil(t);
        idx.iter().zip(&w).map(|(&i, w)| series[i] * w).sum()
    }

    /// `𝓡(t,k)` at any torus point.
    pub fn rate_at(&self, t: f64, k: f64) -> f64 {
        rate_from_moments(k, self.interpolate(&self.a_moment, t), self.interpolate(&self.b_moment, t))
    }

    /// `Ē(t, k_j)` at node `j`.
    pub fn value_at(&self, t: f64, j: usize) -> f64 {
        let (idx, w) = self.stencil(t);
        idx.iter().zip(&w).map(|(&i, w)| self.values[i][j] * w).sum::<f64>().max(0.0)
    }

    pub fn state_at(&self, t: f64) -> KineticState {
        KineticState {
            grid: self.grid.clone(),
            values: (0..self.grid.len()).map(|j| self.value_at(t, j)).collect(),
            t,
        }
    }
}
