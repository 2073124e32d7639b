//! Exact second moments of the finite chain at fixed ε.
//!
//! With `z = (q, p)` the Itô system is linear, `dz = A z dt + √ε Σ_x B_x z dw_x`,
//! so `C = E[z zᵀ]` solves the closed equation
//!
//! ```text
//! dC/dt = A C + C Aᵀ + ε Σ_x B_x C B_xᵀ.
//! ```
//!
//! Writing `A = A₀ + εD` with `A₀` the free flow and working in macroscopic time
//! `τ = εt` and in the interaction picture `C_I = U(-τ/ε) C U(-τ/ε)ᵀ` removes the
//! stiff `1/ε` rotation; what remains carries the `ε`-scale phases of the noise
//! gain and is integrated by RK4 with `dt ≤ ε/(10 max ω)`.
//!
//! [`CovarianceState`] is the dense `2N × 2N` version (small `N`).
//! [`HomogeneousMoments`] is its exact reduction for translation-invariant
//! laws, which decouple into one `2 × 2` block per mode and scale to any `N`.
//! In the interaction picture the wave-function moments are those of the
//! compensated field.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::{beta_convolve, ChainState};
use crate::error::{require, Error, Result};
use crate::model::ModelParams;
use crate::spectral::{Dft, ModeGrid};
use crate::wavefield::{from_wave, gaussian_field};

/// Largest lattice accepted by the dense oracle.
pub const MAX_DENSE_SITES: usize = 64;

/// `Y_x` restricted to `(p_{x-1}, p_x, p_{x+1})`.
const Y3: [[f64; 3]; 3] = [[0.0, 1.0, -1.0], [-1.0, 0.0, 1.0], [1.0, -1.0, 0.0]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Picture {
    Lab,
    Interaction,
}

/// Second-moment matrix `E[z zᵀ]` of `z = (q_0..q_{N-1}, p_0..p_{N-1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    pub c: DMatrix<f64>,
    /// Macroscopic time.
    pub t: f64,
    pub epsilon: f64,
    pub picture: Picture,
}

/// Circulant matrix with first column `col`.
fn circulant(col: &[f64]) -> DMatrix<f64> {
    let n = col.len();
    DMatrix::from_fn(n, n, |x, y| col[(x + n - y) % n])
}

/// First column of the circulant with symbol `s(k)` on the lattice modes.
fn circulant_column(n: usize, symbol: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut buf: Vec<Complex64> = (0..n).map(|m| Complex64::new(symbol(m as f64 / n as f64), 0.0)).collect();
    Dft::new(n).inverse(&mut buf);
    buf.iter().map(|z| z.re).collect()
}

/// Free-flow propagator `U(s)` on `(q, p)` for microscopic time `s`.
pub fn free_flow_matrix(params: &ModelParams, n: usize, s: f64) -> DMatrix<f64> {
    let cos = circulant(&circulant_column(n, |k| (params.omega(k) * s).cos()));
    let sin_over = circulant(&circulant_column(n, |k| {
        let w = params.omega(k);
        if w > 0.0 {
            (w * s).sin() / w
        } else {
            s
        }
    }));
    let w_sin = circulant(&circulant_column(n, |k| {
        let w = params.omega(k);
        w * (w * s).sin()
    }));
    let mut u = DMatrix::zeros(2 * n, 2 * n);
    u.view_mut((0, 0), (n, n)).copy_from(&cos);
    u.view_mut((0, n), (n, n)).copy_from(&sin_over);
    u.view_mut((n, 0), (n, n)).copy_from(&(-w_sin));
    u.view_mut((n, n), (n, n)).copy_from(&cos);
    u
}

/// `D = -(1/2) β∗` acting on the momentum block.
fn damping_matrix(n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(2 * n, 2 * n);
    for y in 0..n {
        let mut e = vec![0.0; n];
        e[y] = 1.0;
        let col = beta_convolve(&e);
        for x in 0..n {
            d[(n + x, n + y)] = -0.5 * col[x];
        }
    }
    d
}

/// `Σ_x B_x C B_xᵀ`; only the momentum block is nonzero.
fn noise_gain(c: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for x in 0..n {
        let idx = [n + (x + n - 1) % n, n + x, n + (x + 1) % n];
        let mut p3 = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                p3[a][b] = c[(idx[a], idx[b])];
            }
        }
        for a in 0..3 {
            for b in 0..3 {
                let mut s = 0.0;
                for i in 0..3 {
                    for j in 0..3 {
                        s += Y3[a][i] * p3[i][j] * Y3[b][j];
                    }
                }
                out[(idx[a], idx[b])] += s;
            }
        }
    }
    out
}

/// Row vector `u` with `ψ̂(k) = u · z`.
fn wave_row(params: &ModelParams, n: usize, k: f64, conj_negative: bool) -> Vec<Complex64> {
    let w = params.omega(k);
    let i = Complex64::new(0.0, 1.0);
    (0..2 * n)
        .map(|col| {
            let y = (col % n) as f64;
            let e = Complex64::from_polar(1.0, -2.0 * std::f64::consts::PI * y * k);
            match (col < n, conj_negative) {
                (true, _) => e * w,
                (false, false) => e * i,
                (false, true) => -e * i,
            }
        })
        .collect()
}

impl CovarianceState {
    fn sites(&self) -> usize {
        self.c.nrows() / 2
    }

    fn check_sites(n: usize) -> Result<()> {
        require(n >= 8 && n % 2 == 0 && n <= MAX_DENSE_SITES, || {
            format!("dense covariance oracle needs even 8 <= N <= {MAX_DENSE_SITES}, got {n}")
        })
    }

    /// Second moment of a deterministic state.
    pub fn from_state(state: &ChainState, epsilon: f64) -> Result<Self> {
        Self::check_sites(state.len())?;
        let z = nalgebra::DVector::from_iterator(2 * state.len(), state.q.iter().chain(&state.p).copied());
        Ok(Self {
            c: &z * z.transpose(),
            t: 0.0,
            epsilon,
            picture: Picture::Lab,
        })
    }

    /// Exact second moment of the homogeneous Gaussian initial law with
    /// `E|ψ̂(k_j)|² = N E0(k_j)` (the law sampled by [`gaussian_field`]).
    pub fn gaussian(params: &ModelParams, e0: &[f64], epsilon: f64) -> Result<Self> {
        let n = e0.len();
        Self::check_sites(n)?;
        require(e0.iter().all(|v| *v >= 0.0 && v.is_finite()), || "E0 must be nonnegative".into())?;
        let sqrt_e0: Vec<f64> = e0.iter().map(|v| v.sqrt()).collect();
        let mut c = DMatrix::zeros(2 * n, 2 * n);
        // ξ_y = (a + ib)/√2 with a, b standard normal: one column per real degree of freedom
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for y in 0..n {
            for unit in [Complex64::new(s, 0.0), Complex64::new(0.0, s)] {
                let mut xi = vec![Complex64::new(0.0, 0.0); n];
                xi[y] = unit;
                let state = from_wave(&gaussian_field(&sqrt_e0, &xi, params), params)?;
                let z = nalgebra::DVector::from_iterator(2 * n, state.q.iter().chain(&state.p).copied());
                c += &z * z.transpose();
            }
        }
        Ok(Self {
            c,
            t: 0.0,
            epsilon,
            picture: Picture::Lab,
        })
    }

    /// Gibbs law with flat spectrum `Ŝ ≡ T`.
    pub fn gibbs(params: &ModelParams, n: usize, temperature: f64, epsilon: f64) -> Result<Self> {
        Self::gaussian(params, &vec![temperature; n], epsilon)
    }

    fn flow_time(&self) -> f64 {
        self.t / self.epsilon
    }

    pub fn to_lab(&self, params: &ModelParams) -> Self {
        match self.picture {
            Picture::Lab => self.clone(),
            Picture::Interaction => {
                let u = free_flow_matrix(params, self.sites(), self.flow_time());
                Self {
                    c: &u * &self.c * u.transpose(),
                    picture: Picture::Lab,
                    ..self.clone()
                }
            }
        }
    }

    pub fn to_interaction(&self, params: &ModelParams) -> Self {
        match self.picture {
            Picture::Interaction => self.clone(),
            Picture::Lab => {
                let u = free_flow_matrix(params, self.sites(), -self.flow_time());
                Self {
                    c: &u * &self.c * u.transpose(),
                    picture: Picture::Interaction,
                    ..self.clone()
                }
            }
        }
    }

    /// Expected Hamiltonian `½ tr(H C)` with `H = diag(α∗, I)`.
    pub fn energy(&self, params: &ModelParams) -> f64 {
        let n = self.sites();
        let a = circulant(&circulant_column(n, |k| params.alpha_hat(k)));
        let qq = self.c.view((0, 0), (n, n));
        let pp = self.c.view((n, n), (n, n));
        0.5 * ((a * qq).trace() + pp.trace())
    }

    /// Hermitian moments `E[Φ Φ*]` of `Φ = (ψ̂(k_j), ψ̂*(-k_j))_j` in grid order.
    pub fn psi_moments(&self, params: &ModelParams) -> DMatrix<Complex64> {
        let n = self.sites();
        let grid = ModeGrid::new(n).expect("even lattice");
        let mut t = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            let k = grid.k(j);
            for (col, v) in wave_row(params, n, k, false).into_iter().enumerate() {
                t[(j, col)] = v;
            }
            for (col, v) in wave_row(params, n, k, true).into_iter().enumerate() {
                t[(n + j, col)] = v;
            }
        }
        let c = self.c.map(|v| Complex64::new(v, 0.0));
        &t * c * t.adjoint()
    }

    /// Smallest eigenvalue must be `≥ -1e-10 · trace`.
    pub fn check_psd(&self) -> Result<()> {
        let trace = self.c.trace().abs().max(f64::MIN_POSITIVE);
        let sym = (&self.c + self.c.transpose()) * 0.5;
        let min = sym.symmetric_eigenvalues().min();
        if min < -1e-10 * trace {
            return Err(Error::Stiffness(format!(
                "second-moment matrix lost positivity (min eigenvalue {min:e}, trace {trace:e}); reduce dt"
            )));
        }
        Ok(())
    }
}

/// `E|ψ̂(k_j)|²` in grid order. Identical in both pictures since the free flow
/// only rotates the phase of each mode.
pub fn predicted_mode_energies(state: &CovarianceState, params: &ModelParams) -> Vec<f64> {
    let n = state.sites();
    let grid = ModeGrid::new(n).expect("even lattice");
    (0..n)
        .map(|j| {
            let u = wave_row(params, n, grid.k(j), false);
            let mut s = 0.0;
            for a in 0..2 * n {
                let mut row = Complex64::new(0.0, 0.0);
                for b in 0..2 * n {
                    row += state.c[(a, b)] * u[b].conj();
                }
                s += (u[a] * row).re;
            }
            s.max(0.0)
        })
        .collect()
}

/// Macroscopic-time derivative of the interaction-picture moments.
pub fn covariance_rhs(state: &CovarianceState, params: &ModelParams) -> Result<DMatrix<f64>> {
    require(state.picture == Picture::Interaction, || "covariance_rhs works in the interaction picture".into())?;
    require(state.epsilon > 0.0, || "epsilon must be positive".into())?;
    let n = state.sites();
    let s = state.flow_time();
    Ok(rhs_with(&state.c, &free_flow_matrix(params, n, s), &free_flow_matrix(params, n, -s), &damping_matrix(n), n))
}

fn rhs_with(ci: &DMatrix<f64>, u: &DMatrix<f64>, u_inv: &DMatrix<f64>, d: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    rhs_parts(ci, u, u_inv, d, n, true)
}

fn rhs_parts(ci: &DMatrix<f64>, u: &DMatrix<f64>, u_inv: &DMatrix<f64>, d: &DMatrix<f64>, n: usize, noise: bool) -> DMatrix<f64> {
    let c = u * ci * u.transpose();
    let dc = d * &c;
    let mut g = &dc + dc.transpose();
    if noise {
        g += noise_gain(&c, n);
    }
    let out = u_inv * g * u_inv.transpose();
    (&out + out.transpose()) * 0.5
}

/// RK4 in macroscopic time over `[t, t + t_span]`.
pub fn evolve_covariance(initial: &CovarianceState, params: &ModelParams, t_span: f64, dt: f64) -> Result<CovarianceState> {
    require(initial.epsilon > 0.0 && initial.epsilon <= 1.0, || "epsilon must be in (0,1]".into())?;
    require(t_span >= 0.0, || "t_span must be >= 0".into())?;
    let limit = initial.epsilon / (10.0 * params.omega_max());
    require(dt > 0.0 && dt <= limit * (1.0 + 1e-12), || {
        format!("dt must be in (0, epsilon/(10 max omega)] = (0, {limit:e}], got {dt}")
    })?;
    let n = initial.sites();
    let mut state = initial.to_interaction(params);
    if t_span == 0.0 {
        return Ok(state);
    }
    let steps = ((t_span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let h = t_span / steps as f64;
    let d = damping_matrix(n);
    let flows = |t: f64| {
        let s = t / initial.epsilon;
        (free_flow_matrix(params, n, s), free_flow_matrix(params, n, -s))
    };
    let t0 = state.t;
    let (mut u0, mut v0) = flows(t0);
    for i in 0..steps {
        let t = t0 + i as f64 * h;
        let (um, vm) = flows(t + 0.5 * h);
        let (u1, v1) = flows(t + h);
        let k1 = rhs_with(&state.c, &u0, &v0, &d, n);
        let k2 = rhs_with(&(&state.c + &k1 * (0.5 * h)), &um, &vm, &d, n);
        let k3 = rhs_with(&(&state.c + &k2 * (0.5 * h)), &um, &vm, &d, n);
        let k4 = rhs_with(&(&state.c + &k3 * h), &u1, &v1, &d, n);
        state.c += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        state.t = t0 + (i + 1) as f64 * h;
        if (i + 1) % 64 == 0 || i + 1 == steps {
            state.check_psd()?;
        }
        u0 = u1;
        v0 = v1;
    }
    Ok(state)
}

/// `|Σ_{a,b} Y3[a][b] e^{-2πi(a-1)k} e^{2πi(b-1)k'}|²`: the rate at which the noise
/// feeds momentum variance at `k` from momentum variance at `k'`.
///
/// Its symmetrization `(K(k,k') + K(k,-k'))/2` equals `2R(k,k')`.
pub fn noise_kernel(k: f64, kp: f64) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    let mut s = Complex64::new(0.0, 0.0);
    for (a, row) in Y3.iter().enumerate() {
        for (b, c) in row.iter().enumerate() {
            if *c != 0.0 {
                s += *c * Complex64::from_polar(1.0, -tau * (a as f64 - 1.0) * k + tau * (b as f64 - 1.0) * kp);
            }
        }
    }
    s.norm_sqr()
}

/// Exact moments of a translation-invariant Gaussian law.
///
/// Per mode `k_j` the state is the Hermitian `2 × 2` matrix of
/// `(q̂(k_j), p̂(k_j))` normalized by `N`: `Q = E|q̂|²/N`, `X = E[q̂ p̂*]/N`,
/// `P = E|p̂|²/N`, kept in the interaction picture. Modes couple only through the
/// noise gain `(1/N) Σ_{k'} K(k,k') P(k')`.
#[derive(Debug, Clone)]
pub struct HomogeneousMoments {
    epsilon: f64,
    omega: Vec<f64>,
    beta: Vec<f64>,
    kernel: Vec<f64>,
    q: Vec<f64>,
    x: Vec<Complex64>,
    p: Vec<f64>,
    t: f64,
}

#[derive(Clone)]
struct ModeBlocks {
    q: Vec<f64>,
    x: Vec<Complex64>,
    p: Vec<f64>,
}

impl ModeBlocks {
    fn axpy(&self, h: f64, d: &ModeBlocks) -> ModeBlocks {
        ModeBlocks {
            q: self.q.iter().zip(&d.q).map(|(a, b)| a + h * b).collect(),
            x: self.x.iter().zip(&d.x).map(|(a, b)| a + b * h).collect(),
            p: self.p.iter().zip(&d.p).map(|(a, b)| a + h * b).collect(),
        }
    }
}

/// Rotates a per-mode `2 × 2` block by the real flow `U(s)`:
/// returns `U Σ Uᵀ` for `Σ = [[q, x], [x*, p]]`.
fn rotate_block(w: f64, s: f64, q: f64, x: Complex64, p: f64) -> (f64, Complex64, f64) {
    let (sn, c) = (w * s).sin_cos();
    let so = if w > 0.0 { sn / w } else { s };
    let ws = w * sn;
    // U = [[c, so], [-ws, c]]
    let q2 = c * c * q + 2.0 * c * so * x.re + so * so * p;
    let p2 = ws * ws * q - 2.0 * ws * c * x.re + c * c * p;
    let x2 = Complex64::new(-c * ws * q + (c * c - so * ws) * x.re + so * c * p, x.im * (c * c + so * ws));
    (q2, x2, p2)
}

impl HomogeneousMoments {
    /// Gaussian homogeneous data with `E|ψ̂(k_j)|² = N E0(k_j)` and `E ψ̂(k)ψ̂(k') = 0`.
    pub fn new(params: &ModelParams, e0: &[f64], epsilon: f64) -> Result<Self> {
        let n = e0.len();
        let grid = ModeGrid::new(n)?;
        require(n >= 8, || format!("need at least 8 modes, got {n}"))?;
        require(epsilon > 0.0 && epsilon <= 1.0, || format!("epsilon must be in (0,1], got {epsilon}"))?;
        require(e0.iter().all(|v| *v >= 0.0 && v.is_finite()), || "E0 must be nonnegative".into())?;
        let ks = grid.ks();
        let omega: Vec<f64> = ks.iter().map(|&k| params.omega(k)).collect();
        let mut q = vec![0.0; n];
        let mut x = vec![Complex64::new(0.0, 0.0); n];
        let mut p = vec![0.0; n];
        for j in 0..n {
            let (a, b) = (e0[j], e0[grid.negative(j)]);
            let w = omega[j];
            if w > 0.0 {
                q[j] = (a + b) / (4.0 * w * w);
                p[j] = (a + b) / 4.0;
                x[j] = Complex64::new(0.0, (a - b) / (4.0 * w));
            } else {
                p[j] = a;
            }
        }
        let kernel = ks
            .iter()
            .flat_map(|&k| ks.iter().map(move |&kp| noise_kernel(k, kp)))
            .collect();
        Ok(Self {
            epsilon,
            beta: ks.iter().map(|&k| crate::model::beta_hat(k)).collect(),
            omega,
            kernel,
            q,
            x,
            p,
            t: 0.0,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    fn rhs(&self, b: &ModeBlocks, t: f64) -> ModeBlocks {
        let n = self.omega.len();
        let s = t / self.epsilon;
        let lab: Vec<(f64, Complex64, f64)> = (0..n)
            .map(|j| rotate_block(self.omega[j], s, b.q[j], b.x[j], b.p[j]))
            .collect();
        let mut out = ModeBlocks {
            q: vec![0.0; n],
            x: vec![Complex64::new(0.0, 0.0); n],
            p: vec![0.0; n],
        };
        for j in 0..n {
            let row = &self.kernel[j * n..(j + 1) * n];
            let gain: f64 = row.iter().zip(&lab).map(|(k, l)| k * l.2).sum::<f64>() / n as f64;
            let (_, xl, pl) = lab[j];
            // lab-frame derivative: damping on p, gain into p
            let dq = 0.0;
            let dx = -0.5 * self.beta[j] * xl;
            let dp = -self.beta[j] * pl + gain;
            let (q2, x2, p2) = rotate_block(self.omega[j], -s, dq, dx, dp);
            out.q[j] = q2;
            out.x[j] = x2;
            out.p[j] = p2;
        }
        out
    }

    /// RK4 in macroscopic time with `dt ≤ ε/(10 max ω)`.
    pub fn evolve(&mut self, t_span: f64, dt: f64) -> Result<()> {
        let w_max = self.omega.iter().fold(0.0f64, |a, b| a.max(*b));
        let limit = self.epsilon / (10.0 * w_max);
        require(dt > 0.0 && dt <= limit * (1.0 + 1e-12), || {
            format!("dt must be in (0, epsilon/(10 max omega)] = (0, {limit:e}], got {dt}")
        })?;
        require(t_span >= 0.0, || "t_span must be >= 0".into())?;
        if t_span == 0.0 {
            return Ok(());
        }
        let steps = ((t_span / dt) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let h = t_span / steps as f64;
        let mut b = ModeBlocks {
            q: self.q.clone(),
            x: self.x.clone(),
            p: self.p.clone(),
        };
        let t0 = self.t;
        for i in 0..steps {
            let t = t0 + i as f64 * h;
            let k1 = self.rhs(&b, t);
            let k2 = self.rhs(&b.axpy(0.5 * h, &k1), t + 0.5 * h);
            let k3 = self.rhs(&b.axpy(0.5 * h, &k2), t + 0.5 * h);
            let k4 = self.rhs(&b.axpy(h, &k3), t + h);
            for j in 0..b.q.len() {
                b.q[j] += h / 6.0 * (k1.q[j] + 2.0 * k2.q[j] + 2.0 * k3.q[j] + k4.q[j]);
                b.x[j] += (k1.x[j] + k2.x[j] * 2.0 + k3.x[j] * 2.0 + k4.x[j]) * (h / 6.0);
                b.p[j] += h / 6.0 * (k1.p[j] + 2.0 * k2.p[j] + 2.0 * k3.p[j] + k4.p[j]);
            }
        }
        self.q = b.q;
        self.x = b.x;
        self.p = b.p;
        self.t = t0 + t_span;
        Ok(())
    }

    /// `Ŝ(k_j) = E|ψ̂(k_j)|²/N = ω²Q + P + 2ω Im X`, in grid order.
    pub fn s_hat(&self) -> Vec<f64> {
        (0..self.omega.len())
            .map(|j| {
                let w = self.omega[j];
                (w * w * self.q[j] + self.p[j] + 2.0 * w * self.x[j].im).max(0.0)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::{evolve as kinetic_evolve, KineticGrid, KineticState, DEFAULT_DT};
    use crate::model::R_kernel;
    use crate::rng::{normal, path_rng};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn one_plus_cos(n: usize) -> Vec<f64> {
        ModeGrid::new(n).unwrap().ks().iter().map(|k| 1.0 + (2.0 * PI * k).cos()).collect()
    }

    fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = path_rng(seed, 0);
        let g = DMatrix::from_fn(2 * n, 2 * n, |_, _| normal(&mut rng));
        &g * g.transpose()
    }

    fn dt_for(params: &ModelParams, eps: f64) -> f64 {
        eps / (10.0 * params.omega_max())
    }

    #[test]
    fn flow_matrix_matches_free_flight() {
        let params = ModelParams::default();
        let mut rng = path_rng(1, 0);
        let q: Vec<f64> = (0..16).map(|_| normal(&mut rng)).collect();
        let p: Vec<f64> = (0..16).map(|_| normal(&mut rng)).collect();
        let mut s = ChainState::new(q.clone(), p.clone(), 0.0).unwrap();
        crate::chain::step_hamiltonian(&mut s, 0.7, &params);
        let z = nalgebra::DVector::from_iterator(32, q.iter().chain(&p).copied());
        let moved = free_flow_matrix(&params, 16, 0.7) * z;
        for x in 0..16 {
            assert_abs_diff_eq!(moved[x], s.q[x], epsilon = 1e-12);
            assert_abs_diff_eq!(moved[16 + x], s.p[x], epsilon = 1e-12);
        }
    }

    #[test]
    fn noise_kernel_symmetrizes_to_twice_r() {
        for (k, kp) in [(0.1, 0.3), (0.27, -0.4), (0.45, 0.05), (0.0, 0.2)] {
            assert_abs_diff_eq!(0.5 * (noise_kernel(k, kp) + noise_kernel(k, -kp)), 2.0 * R_kernel(k, kp), epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_noise_strength_freezes_interaction_picture() {
        // without the noise (and hence without its Itô damping) only the free flow remains,
        // which the interaction picture removes
        let params = ModelParams::default();
        let n = 8;
        let s = CovarianceState::gaussian(&params, &one_plus_cos(n), 0.5).unwrap();
        let u = free_flow_matrix(&params, n, 0.3);
        let v = free_flow_matrix(&params, n, -0.3);
        assert!((&u * &v - DMatrix::identity(2 * n, 2 * n)).amax() < 1e-12);
        let r = rhs_parts(&s.c, &u, &v, &DMatrix::zeros(2 * n, 2 * n), n, false);
        assert_eq!(r.amax(), 0.0);
    }

    #[test]
    fn rhs_conserves_energy_and_is_symmetric() {
        let params = ModelParams::default();
        let n = 8;
        for seed in 0..5 {
            let s = CovarianceState {
                c: random_psd(n, seed),
                t: 0.37,
                epsilon: 0.1,
                picture: Picture::Interaction,
            };
            let d = covariance_rhs(&s, &params).unwrap();
            assert!((&d - d.transpose()).amax() < 1e-12 * d.amax());
            let ds = CovarianceState { c: d, ..s.clone() };
            let lab = ds.to_lab(&params);
            assert!(lab.energy(&params).abs() < 1e-12 * s.c.norm());
            let m = ds.psi_moments(&params);
            assert!(m.trace().norm() < 1e-12 * s.c.norm() * n as f64);
        }
    }

    #[test]
    fn gibbs_law_is_stationary() {
        let params = ModelParams::default();
        let eps = 0.2;
        let g = CovarianceState::gibbs(&params, 16, 1.0, eps).unwrap();
        let e = predicted_mode_energies(&g, &params);
        assert!(e.iter().all(|v| (v - 16.0).abs() < 1e-10));
        let out = evolve_covariance(&g, &params, 1.0, dt_for(&params, eps)).unwrap();
        assert!((out.to_lab(&params).c - &g.c).amax() < 1e-8);
        let rhs = covariance_rhs(&g.to_interaction(&params), &params).unwrap();
        assert!(rhs.amax() < 1e-12);
    }

    #[test]
    fn psi_moments_and_energies_agree() {
        let params = ModelParams::default();
        let s = CovarianceState::gaussian(&params, &one_plus_cos(8), 0.1).unwrap();
        let m = s.psi_moments(&params);
        let e = predicted_mode_energies(&s, &params);
        for j in 0..8 {
            assert_abs_diff_eq!(m[(j, j)].re, e[j], epsilon = 1e-10);
            assert_abs_diff_eq!(e[j], 8.0 * (1.0 + (2.0 * PI * ModeGrid::new(8).unwrap().k(j)).cos()), epsilon = 1e-10);
        }
        assert!((&m - m.adjoint()).iter().all(|z| z.norm() < 1e-12));
        let zero = CovarianceState { c: DMatrix::zeros(16, 16), ..s };
        assert!(predicted_mode_energies(&zero, &params).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn evolution_conserves_energy_and_positivity() {
        let params = ModelParams::default();
        let eps = 0.1;
        let s0 = CovarianceState::gaussian(&params, &one_plus_cos(16), eps).unwrap();
        let e0 = predicted_mode_energies(&s0, &params).iter().sum::<f64>() / 16.0;
        let out = evolve_covariance(&s0, &params, 1.0, dt_for(&params, eps)).unwrap();
        let e1 = predicted_mode_energies(&out, &params).iter().sum::<f64>() / 16.0;
        assert!((e1 - e0).abs() <= 1e-8 * e0);
        out.check_psd().unwrap();
    }

    #[test]
    fn rk4_order_by_step_halving() {
        let params = ModelParams::default();
        let eps = 0.5;
        let s0 = CovarianceState::gaussian(&params, &one_plus_cos(8), eps).unwrap();
        let dt = dt_for(&params, eps);
        let a = predicted_mode_energies(&evolve_covariance(&s0, &params, 0.5, dt).unwrap(), &params);
        let b = predicted_mode_energies(&evolve_covariance(&s0, &params, 0.5, dt / 2.0).unwrap(), &params);
        let c = predicted_mode_energies(&evolve_covariance(&s0, &params, 0.5, dt / 4.0).unwrap(), &params);
        let e1: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let e2: f64 = b.iter().zip(&c).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let order = (e1 / e2).log2();
        assert!(order > 3.5, "observed order {order}");
    }

    #[test]
    fn homogeneous_reduction_matches_dense_oracle() {
        for params in [ModelParams::default(), ModelParams::nearest_neighbour(0.0).unwrap()] {
            let eps = 0.2;
            let n = 16;
            let e0 = one_plus_cos(n);
            let dense = CovarianceState::gaussian(&params, &e0, eps).unwrap();
            let mut hom = HomogeneousMoments::new(&params, &e0, eps).unwrap();
            for (a, b) in predicted_mode_energies(&dense, &params).iter().zip(hom.s_hat()) {
                assert_abs_diff_eq!(a / n as f64, b, epsilon = 1e-12);
            }
            let dt = dt_for(&params, eps);
            let out = evolve_covariance(&dense, &params, 0.8, dt).unwrap();
            hom.evolve(0.8, dt).unwrap();
            for (a, b) in predicted_mode_energies(&out, &params).iter().zip(hom.s_hat()) {
                assert_abs_diff_eq!(a / n as f64, b, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn homogeneous_moments_approach_kinetic_solution() {
        let params = ModelParams::default();
        let n = 64;
        let e0 = one_plus_cos(n);
        let grid = KineticGrid::lattice(n).unwrap();
        let kin = kinetic_evolve(&KineticState::new(grid, e0.clone()).unwrap(), 1.0, DEFAULT_DT).unwrap();
        let mut errors = Vec::new();
        for eps in [0.2, 0.1, 0.05, 0.025] {
            let mut h = HomogeneousMoments::new(&params, &e0, eps).unwrap();
            h.evolve(1.0, dt_for(&params, eps)).unwrap();
            let err = h.s_hat().iter().zip(&kin.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            errors.push(err);
        }
        assert!(errors.windows(2).all(|w| w[1] < w[0]), "{errors:?}");
    }

    #[test]
    fn dense_oracle_rejects_large_lattices_and_steps() {
        let params = ModelParams::default();
        assert!(CovarianceState::gibbs(&params, 66, 1.0, 0.1).is_err());
        let g = CovarianceState::gibbs(&params, 8, 1.0, 0.1).unwrap();
        assert!(evolve_covariance(&g, &params, 1.0, 1.0).is_err());
        let bad = CovarianceState {
            c: -DMatrix::identity(16, 16),
            ..g
        };
        assert!(matches!(bad.check_psd(), Err(Error::Stiffness(_))));
    }
}
