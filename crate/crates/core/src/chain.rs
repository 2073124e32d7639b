//! Microscopic dynamics of the periodic chain.
//!
//! The Itô system is
//!
//! ```text
//! dq_y = p_y dt
//! dp_y = -(α∗q)_y dt - (ε/2)(β∗p)_y dt + √ε Σ_{z=-1,0,1} (Y_{y+z} p_y) dw_{y+z}
//! ```
//!
//! where `Y_x` generates rotations of `(p_{x-1}, p_x, p_{x+1})` about `(1,1,1)`.
//! The `-(ε/2) β∗p` drift is exactly the Itô correction of the Stratonovich
//! rotations, so the splitting scheme composes the exact free flight with exact
//! rotations and adds no drift of its own. [`step_em`] integrates the Itô form as
//! written and serves as an independent cross-check.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};
use crate::model::{beta_at, ModelParams};
use crate::rng::normal;
use crate::spectral::Dft;
use crate::stats::pairwise_sum;

/// Positions and momenta on `N` periodic sites at microscopic time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainState {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl ChainState {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64) -> Result<Self> {
        let s = Self { q, p, t };
        s.validate()?;
        Ok(s)
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![0.0; n], vec![0.0; n], 0.0)
    }

    pub fn len(&self) -> usize {
        self.q.len()
    }

    pub fn is_empty(&self) -> bool {
        self.q.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.q.len();
        require(n == self.p.len(), || format!("q has {n} sites but p has {}", self.p.len()))?;
        require(n >= 8 && n % 2 == 0, || format!("lattice size must be even and >= 8, got {n}"))?;
        require(
            self.q.iter().chain(&self.p).all(|v| v.is_finite()) && self.t.is_finite() && self.t >= 0.0,
            || "chain state has non-finite entries".into(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Splitting,
    EulerMaruyama,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub epsilon: f64,
    pub dt: f64,
    pub scheme: Scheme,
    pub seed: u64,
    pub trajectory_index: u64,
}

impl SimConfig {
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        require(self.epsilon > 0.0 && self.epsilon <= 1.0, || {
            format!("epsilon must be in (0,1], got {}", self.epsilon)
        })?;
        require(self.dt > 0.0 && self.dt.is_finite(), || format!("dt must be positive, got {}", self.dt))?;
        if self.scheme == Scheme::EulerMaruyama {
            let w = params.omega_max();
            require(self.dt * w < 0.5, || {
                format!("euler-maruyama needs dt * max omega < 0.5, got {}", self.dt * w)
            })?;
        }
        Ok(())
    }
}

/// `(α∗q)_x = Σ_y α_y q_{x-y}` with periodic indexing.
pub fn alpha_convolve(params: &ModelParams, q: &[f64]) -> Vec<f64> {
    let n = q.len() as i64;
    let range = params.range() as i64;
    (0..n)
        .map(|x| {
            (-range..=range)
                .map(|y| params.alpha_at(y) * q[(x - y).rem_euclid(n) as usize])
                .sum()
        })
        .collect()
}

/// `(β∗p)_x` with periodic indexing.
pub fn beta_convolve(p: &[f64]) -> Vec<f64> {
    let n = p.len() as i64;
    (0..n)
        .map(|x| (-2i64..=2).map(|y| beta_at(y) * p[(x - y).rem_euclid(n) as usize]).sum())
        .collect()
}

/// Conserved energy `Σ p²/2 + ½ Σ_{x,y} α_{x-y} q_x q_y`.
///
/// Under the transform conventions of [`crate::wavefield`] this is half the
/// spectral energy `(1/N) Σ_j |ψ̂(k_j)|²`.
pub fn hamiltonian_energy(state: &ChainState, params: &ModelParams) -> f64 {
    let aq = alpha_convolve(params, &state.q);
    let terms: Vec<f64> = state
        .p
        .iter()
        .zip(state.q.iter().zip(&aq))
        .map(|(p, (q, a))| 0.5 * p * p + 0.5 * q * a)
        .collect();
    pairwise_sum(&terms)
}

pub fn total_momentum(state: &ChainState) -> f64 {
    pairwise_sum(&state.p)
}

/// Order in which the site rotations of one noise sweep are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepOrder {
    Forward,
    Backward,
}

/// Applies `exp(s Y_x)` to `(p_{x-1}, p_x, p_{x+1})`: a rotation about `(1,1,1)`
/// by the angle `√3 s`.
#[inline]
pub fn rotate_triple(p: &mut [f64], x: usize, angle: f64) {
    let n = p.len();
    let left = if x == 0 { n - 1 } else { x - 1 };
    let right = if x + 1 == n { 0 } else { x + 1 };
    let (a, b, c) = (p[left], p[x], p[right]);
    let m = (a + b + c) / 3.0;
    let (d0, d1, d2) = (a - m, b - m, c - m);
    let (s, co) = angle.sin_cos();
    let k = s / 3f64.sqrt();
    p[left] = m + co * d0 + k * (d1 - d2);
    p[x] = m + co * d1 + k * (d2 - d0);
    p[right] = m + co * d2 + k * (d0 - d1);
}

fn noise_sweep<R: Rng + ?Sized>(p: &mut [f64], dt: f64, epsilon: f64, order: SweepOrder, rng: &mut R) {
    if epsilon == 0.0 {
        return;
    }
    let scale = (3.0 * epsilon * dt).sqrt();
    let n = p.len();
    match order {
        SweepOrder::Forward => {
            for x in 0..n {
                let angle = scale * normal(rng);
                rotate_triple(p, x, angle);
            }
        }
        SweepOrder::Backward => {
            for x in (0..n).rev() {
                let angle = scale * normal(rng);
                rotate_triple(p, x, angle);
            }
        }
    }
}

/// One noise sweep over all sites with independent increments `Δw_x ~ N(0, dt)`.
///
/// Positions and the clock are left untouched.
pub fn step_noise<R: Rng + ?Sized>(state: &mut ChainState, dt: f64, epsilon: f64, order: SweepOrder, rng: &mut R) {
    noise_sweep(&mut state.p, dt, epsilon, order, rng);
}

/// Per-mode coefficients of the exact free flight over a fixed time span.
#[derive(Debug, Clone)]
struct FlightCoefficients {
    cos: Vec<f64>,
    /// `sin(ωτ)/ω`, or `τ` where `ω = 0`.
    sin_over_omega: Vec<f64>,
    omega_sin: Vec<f64>,
}

impl FlightCoefficients {
    fn new(omega: &[f64], tau: f64) -> Self {
        let mut cos = Vec::with_capacity(omega.len());
        let mut sin_over_omega = Vec::with_capacity(omega.len());
        let mut omega_sin = Vec::with_capacity(omega.len());
        for &w in omega {
            let (s, c) = (w * tau).sin_cos();
            cos.push(c);
            sin_over_omega.push(if w > 0.0 { s / w } else { tau });
            omega_sin.push(w * s);
        }
        Self {
            cos,
            sin_over_omega,
            omega_sin,
        }
    }

    #[inline]
    fn apply(&self, qh: &mut [Complex64], ph: &mut [Complex64]) {
        for m in 0..qh.len() {
            let (q, p) = (qh[m], ph[m]);
            qh[m] = q * self.cos[m] + p * self.sin_over_omega[m];
            ph[m] = p * self.cos[m] - q * self.omega_sin[m];
        }
    }
}

/// `ω(m/N)` in FFT order.
pub fn fft_order_omega(params: &ModelParams, n: usize) -> Vec<f64> {
    (0..n).map(|m| params.omega(m as f64 / n as f64)).collect()
}

/// Exact Hamiltonian flow, `ψ̂(k) ↦ e^{-iω(k)τ} ψ̂(k)` mode by mode.
///
/// A mode with `ω = 0` (the unpinned zero mode) shears: `p̂` stays fixed and
/// `q̂` advances by `τ p̂`.
#[derive(Debug, Clone)]
pub struct FreeFlight {
    omega: Vec<f64>,
    dft: Dft,
    qh: Vec<Complex64>,
    ph: Vec<Complex64>,
}

impl FreeFlight {
    pub fn new(params: &ModelParams, n: usize) -> Self {
        Self {
            omega: fft_order_omega(params, n),
            dft: Dft::new(n),
            qh: vec![Complex64::new(0.0, 0.0); n],
            ph: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn apply(&mut self, state: &mut ChainState, tau: f64) {
        let coeffs = FlightCoefficients::new(&self.omega, tau);
        self.dft.forward_real(&state.q, &mut self.qh);
        self.dft.forward_real(&state.p, &mut self.ph);
        coeffs.apply(&mut self.qh, &mut self.ph);
        self.dft.inverse(&mut self.qh);
        self.dft.inverse(&mut self.ph);
        for (q, z) in state.q.iter_mut().zip(&self.qh) {
            *q = z.re;
        }
        for (p, z) in state.p.iter_mut().zip(&self.ph) {
            *p = z.re;
        }
        state.t += tau;
    }
}

/// Exact noise-free evolution over `dt`.
pub fn step_hamiltonian(state: &mut ChainState, dt: f64, params: &ModelParams) {
    FreeFlight::new(params, state.len()).apply(state, dt);
}

/// One Strang step: half free flight, a forward noise sweep, half free flight.
pub fn step<R: Rng + ?Sized>(state: &mut ChainState, cfg: &SimConfig, params: &ModelParams, rng: &mut R) -> Result<()> {
    require(cfg.scheme == Scheme::Splitting, || "step() integrates the splitting scheme".into())?;
    let mut flight = FreeFlight::new(params, state.len());
    flight.apply(state, 0.5 * cfg.dt);
    step_noise(state, cfg.dt, cfg.epsilon, SweepOrder::Forward, rng);
    flight.apply(state, 0.5 * cfg.dt);
    Ok(())
}

/// One Euler–Maruyama step of the Itô system, sharing `Δw_x` among the three
/// momenta touched by `Y_x`.
pub fn step_em<R: Rng + ?Sized>(state: &mut ChainState, cfg: &SimConfig, params: &ModelParams, rng: &mut R) -> Result<()> {
    cfg.validate(params)?;
    let before = hamiltonian_energy(state, params);
    em_update(state, cfg.dt, cfg.epsilon, params, rng);
    check_growth(state, params, before)
}

fn em_update<R: Rng + ?Sized>(state: &mut ChainState, dt: f64, epsilon: f64, params: &ModelParams, rng: &mut R) {
    let n = state.len();
    let aq = alpha_convolve(params, &state.q);
    let bp = beta_convolve(&state.p);
    let sq = epsilon.sqrt() * dt.sqrt();
    let mut dp: Vec<f64> = aq
        .iter()
        .zip(&bp)
        .map(|(a, b)| (-a - 0.5 * epsilon * b) * dt)
        .collect();
    if epsilon > 0.0 {
        let p = &state.p;
        for x in 0..n {
            let left = (x + n - 1) % n;
            let right = (x + 1) % n;
            let dw = sq * normal(rng);
            dp[left] += (p[x] - p[right]) * dw;
            dp[x] += (p[right] - p[left]) * dw;
            dp[right] += (p[left] - p[x]) * dw;
        }
    }
    for (q, p) in state.q.iter_mut().zip(&state.p) {
        *q += p * dt;
    }
    for (p, d) in state.p.iter_mut().zip(&dp) {
        *p += d;
    }
    state.t += dt;
}

fn check_growth(state: &ChainState, params: &ModelParams, reference: f64) -> Result<()> {
    let after = hamiltonian_energy(state, params);
    if !after.is_finite() || (reference > 0.0 && after > 10.0 * reference) {
        return Err(Error::Divergence(format!(
            "energy grew from {reference:e} to {after:e}; reduce dt"
        )));
    }
    Ok(())
}

/// Euler–Maruyama driver that watches energy growth against the energy at load time.
#[derive(Debug, Clone)]
pub struct EulerMaruyamaIntegrator {
    params: ModelParams,
    epsilon: f64,
    dt: f64,
    state: ChainState,
    reference_energy: f64,
}

impl EulerMaruyamaIntegrator {
    pub fn new(params: &ModelParams, cfg: &SimConfig, state: ChainState) -> Result<Self> {
        cfg.validate(params)?;
        state.validate()?;
        let reference_energy = hamiltonian_energy(&state, params);
        Ok(Self {
            params: params.clone(),
            epsilon: cfg.epsilon,
            dt: cfg.dt,
            state,
            reference_energy,
        })
    }

    pub fn advance<R: Rng + ?Sized>(&mut self, steps: usize, rng: &mut R) -> Result<()> {
        for _ in 0..steps {
            em_update(&mut self.state, self.dt, self.epsilon, &self.params, rng);
        }
        check_growth(&self.state, &self.params, self.reference_energy)
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }
}

/// Fast Strang integrator.
///
/// Positions are kept in mode space between steps (the noise never touches
/// them) and consecutive half flights are fused, so a step costs one forward
/// and one inverse FFT plus the noise sweep. Sweep direction alternates between
/// steps.
#[derive(Debug, Clone)]
pub struct SplittingIntegrator {
    n: usize,
    epsilon: f64,
    dt: f64,
    omega: Vec<f64>,
    half: FlightCoefficients,
    full: FlightCoefficients,
    dft: Dft,
    qh: Vec<Complex64>,
    ph: Vec<Complex64>,
    p: Vec<f64>,
    t: f64,
    steps: u64,
}

impl SplittingIntegrator {
    pub fn new(params: &ModelParams, n: usize, epsilon: f64, dt: f64) -> Result<Self> {
        require(n >= 8 && n % 2 == 0, || format!("lattice size must be even and >= 8, got {n}"))?;
        require((0.0..=1.0).contains(&epsilon), || format!("epsilon must be in [0,1], got {epsilon}"))?;
        require(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))?;
        let omega = fft_order_omega(params, n);
        Ok(Self {
            n,
            epsilon,
            dt,
            half: FlightCoefficients::new(&omega, 0.5 * dt),
            full: FlightCoefficients::new(&omega, dt),
            omega,
            dft: Dft::new(n),
            qh: vec![Complex64::new(0.0, 0.0); n],
            ph: vec![Complex64::new(0.0, 0.0); n],
            p: vec![0.0; n],
            t: 0.0,
            steps: 0,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Microscopic time.
    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn load(&mut self, state: &ChainState) -> Result<()> {
        state.validate()?;
        require(state.len() == self.n, || format!("state has {} sites, integrator {}", state.len(), self.n))?;
        self.dft.forward_real(&state.q, &mut self.qh);
        self.p.copy_from_slice(&state.p);
        self.t = state.t;
        self.steps = 0;
        Ok(())
    }

    fn flight(&mut self, full: bool) {
        self.dft.forward_real(&self.p, &mut self.ph);
        let coeffs = if full { &self.full } else { &self.half };
        coeffs.apply(&mut self.qh, &mut self.ph);
        self.dft.inverse(&mut self.ph);
        for (p, z) in self.p.iter_mut().zip(&self.ph) {
            *p = z.re;
        }
    }

    /// Advances by `steps` Strang steps.
    pub fn advance<R: Rng + ?Sized>(&mut self, steps: usize, rng: &mut R) {
        if steps == 0 {
            return;
        }
        self.flight(false);
        for i in 0..steps {
            let order = if self.steps % 2 == 0 {
                SweepOrder::Forward
            } else {
                SweepOrder::Backward
            };
            noise_sweep(&mut self.p, self.dt, self.epsilon, order, rng);
            self.flight(i + 1 < steps);
            self.steps += 1;
        }
        self.t += steps as f64 * self.dt;
    }

    /// Wave function `ψ̂ = ω q̂ + i p̂` in FFT order at the current time.
    pub fn wave_fft_order(&mut self, out: &mut [Complex64]) {
        self.dft.forward_real(&self.p, &mut self.ph);
        for m in 0..self.n {
            out[m] = self.qh[m] * self.omega[m] + Complex64::new(0.0, 1.0) * self.ph[m];
        }
    }

    /// `q̂(0)`, the position zero mode (only meaningful when `ω(0) = 0`).
    pub fn zero_mode_position(&self) -> f64 {
        self.qh[0].re
    }

    pub fn state(&mut self) -> ChainState {
        let mut q = self.qh.clone();
        self.dft.inverse(&mut q);
        ChainState {
            q: q.iter().map(|z| z.re).collect(),
            p: self.p.clone(),
            t: self.t,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::path_rng;
    use approx::assert_abs_diff_eq;
    use nalgebra::Matrix3;

    fn random_state(n: usize, seed: u64) -> ChainState {
        let mut rng = path_rng(seed, 0);
        let q = (0..n).map(|_| normal(&mut rng)).collect();
        let p = (0..n).map(|_| normal(&mut rng)).collect();
        ChainState::new(q, p, 0.0).unwrap()
    }

    #[test]
    fn energy_examples() {
        let params = ModelParams::default();
        let s = ChainState::zeros(16).unwrap();
        assert_eq!(hamiltonian_energy(&s, &params), 0.0);
        let mut s = ChainState::zeros(16).unwrap();
        s.p[0] = 1.0;
        assert_abs_diff_eq!(hamiltonian_energy(&s, &params), 0.5);
    }

    #[test]
    fn state_validation() {
        assert!(ChainState::zeros(7).is_err());
        assert!(ChainState::zeros(6).is_err());
        assert!(ChainState::new(vec![0.0; 8], vec![0.0; 10], 0.0).is_err());
        assert!(ChainState::new(vec![f64::NAN; 8], vec![0.0; 8], 0.0).is_err());
    }

    /// The rotation equals the matrix exponential of the printed vector field `Y_x`.
    #[test]
    fn rotation_matches_matrix_exponential() {
        // Y_x p = (p_x - p_{x+1}, p_{x+1} - p_{x-1}, p_{x-1} - p_x)
        let y = Matrix3::new(0.0, 1.0, -1.0, -1.0, 0.0, 1.0, 1.0, -1.0, 0.0);
        for s in [0.0, 0.37, -1.2, 2.9] {
            let e = (y * s).exp();
            let v = nalgebra::Vector3::new(0.3, -1.1, 2.4);
            let expected = e * v;
            let mut p = vec![v[0], v[1], v[2]];
            rotate_triple(&mut p, 1, 3f64.sqrt() * s);
            for i in 0..3 {
                assert_abs_diff_eq!(p[i], expected[i], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn rotation_fixes_the_axis() {
        let mut p = vec![1.0, 1.0, 1.0];
        rotate_triple(&mut p, 1, 0.83);
        for v in p {
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn noise_sweep_conserves_momentum_and_kinetic_energy() {
        let mut s = random_state(64, 3);
        let mut rng = path_rng(3, 1);
        for order in [SweepOrder::Forward, SweepOrder::Backward] {
            let p2: f64 = s.p.iter().map(|p| p * p).sum();
            let p1: f64 = s.p.iter().sum();
            let l1: f64 = s.p.iter().map(|p| p.abs()).sum();
            let q = s.q.clone();
            step_noise(&mut s, 0.3, 0.5, order, &mut rng);
            let p2b: f64 = s.p.iter().map(|p| p * p).sum();
            let p1b: f64 = s.p.iter().sum();
            assert!((p2b - p2).abs() <= 1e-12 * p2);
            assert!((p1b - p1).abs() <= 1e-12 * l1);
            assert_eq!(q, s.q);
        }
    }

    #[test]
    fn zero_noise_is_identity() {
        let mut s = random_state(16, 4);
        let before = s.clone();
        step_noise(&mut s, 0.1, 0.0, SweepOrder::Forward, &mut path_rng(0, 0));
        assert_eq!(s, before);
    }

    #[test]
    fn free_flight_examples() {
        let params = ModelParams::nearest_neighbour(1.0).unwrap();
        let mut s = random_state(32, 5);
        let before = s.clone();
        step_hamiltonian(&mut s, 0.0, &params);
        for (a, b) in s.q.iter().zip(&before.q) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        let h0 = hamiltonian_energy(&s, &params);
        step_hamiltonian(&mut s, 0.37, &params);
        assert!((hamiltonian_energy(&s, &params) - h0).abs() <= 1e-12 * h0);
        assert_abs_diff_eq!(s.t, 0.37);
    }

    #[test]
    fn free_flight_matches_euler_limit_for_short_times() {
        // q̇ = p, ṗ = -α∗q: compare a tiny exact step with the Taylor expansion
        let params = ModelParams::nearest_neighbour(0.7).unwrap();
        let s0 = random_state(16, 6);
        let mut s = s0.clone();
        let h = 1e-5;
        step_hamiltonian(&mut s, h, &params);
        let aq = alpha_convolve(&params, &s0.q);
        for x in 0..16 {
            assert_abs_diff_eq!((s.q[x] - s0.q[x]) / h, s0.p[x], epsilon = 1e-4);
            assert_abs_diff_eq!((s.p[x] - s0.p[x]) / h, -aq[x], epsilon = 1e-4);
        }
    }

    #[test]
    fn unpinned_zero_mode_shears() {
        let params = ModelParams::nearest_neighbour(0.0).unwrap();
        let mut s = ChainState::new(vec![0.0; 8], vec![1.0; 8], 0.0).unwrap();
        step_hamiltonian(&mut s, 2.0, &params);
        for x in 0..8 {
            assert_abs_diff_eq!(s.q[x], 2.0, epsilon = 1e-12);
            assert_abs_diff_eq!(s.p[x], 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_noise_step_is_free_flight() {
        let params = ModelParams::default();
        let cfg = SimConfig {
            epsilon: 0.0,
            dt: 0.2,
            scheme: Scheme::Splitting,
            seed: 0,
            trajectory_index: 0,
        };
        let mut a = random_state(16, 7);
        let mut b = a.clone();
        step(&mut a, &cfg, &params, &mut path_rng(0, 0)).unwrap();
        step_hamiltonian(&mut b, 0.2, &params);
        for (x, y) in a.q.iter().zip(&b.q).chain(a.p.iter().zip(&b.p)) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn fused_integrator_matches_single_step() {
        let params = ModelParams::default();
        let cfg = SimConfig {
            epsilon: 0.3,
            dt: 0.05,
            scheme: Scheme::Splitting,
            seed: 9,
            trajectory_index: 2,
        };
        let s0 = random_state(16, 8);
        let mut a = s0.clone();
        step(&mut a, &cfg, &params, &mut path_rng(9, 2)).unwrap();
        let mut integ = SplittingIntegrator::new(&params, 16, 0.3, 0.05).unwrap();
        integ.load(&s0).unwrap();
        integ.advance(1, &mut path_rng(9, 2));
        let b = integ.state();
        for (x, y) in a.q.iter().zip(&b.q).chain(a.p.iter().zip(&b.p)) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(a.t, b.t, epsilon = 1e-15);
    }

    #[test]
    fn splitting_conserves_momentum_and_energy_over_many_steps() {
        let params = ModelParams::nearest_neighbour(0.0).unwrap();
        let s0 = random_state(32, 10);
        let mut integ = SplittingIntegrator::new(&params, 32, 0.5, 0.01).unwrap();
        integ.load(&s0).unwrap();
        integ.advance(10_000, &mut path_rng(1, 1));
        let s = integ.state();
        assert!((total_momentum(&s) - total_momentum(&s0)).abs() <= 1e-10);
        let h0 = hamiltonian_energy(&s0, &params);
        assert!((hamiltonian_energy(&s, &params) - h0).abs() <= 1e-10 * h0);
    }

    #[test]
    fn em_conserves_momentum_to_roundoff() {
        let params = ModelParams::nearest_neighbour(0.0).unwrap();
        let cfg = SimConfig {
            epsilon: 0.2,
            dt: 1e-3,
            scheme: Scheme::EulerMaruyama,
            seed: 0,
            trajectory_index: 0,
        };
        let s0 = random_state(16, 11);
        let mut integ = EulerMaruyamaIntegrator::new(&params, &cfg, s0.clone()).unwrap();
        integ.advance(10_000, &mut path_rng(2, 0)).unwrap();
        assert!((total_momentum(integ.state()) - total_momentum(&s0)).abs() <= 1e-10);
    }

    #[test]
    fn em_rejects_large_steps_and_detects_divergence() {
        let params = ModelParams::default();
        let mut cfg = SimConfig {
            epsilon: 0.1,
            dt: 1.0,
            scheme: Scheme::EulerMaruyama,
            seed: 0,
            trajectory_index: 0,
        };
        let mut s = random_state(16, 12);
        assert!(matches!(step_em(&mut s, &cfg, &params, &mut path_rng(0, 0)), Err(Error::Precondition(_))));
        // stable per-step bound, but unstable over a long horizon
        cfg.dt = 0.3;
        let mut integ = EulerMaruyamaIntegrator::new(&params, &cfg, s).unwrap();
        assert!(matches!(integ.advance(5_000, &mut path_rng(0, 0)), Err(Error::Divergence(_))));
    }

    #[test]
    fn em_harmonic_energy_drift_is_first_order() {
        // ε = 0: explicit Euler multiplies each mode energy by (1 + ω² dt²) per step
        let params = ModelParams::default();
        let mut s = random_state(16, 13);
        let h0 = hamiltonian_energy(&s, &params);
        let dt = 1e-3;
        for _ in 0..1000 {
            em_update(&mut s, dt, 0.0, &params, &mut path_rng(0, 0));
        }
        let drift = hamiltonian_energy(&s, &params) / h0 - 1.0;
        let wmax = params.omega_max();
        assert!(drift > 0.0 && drift <= (1.0 + wmax * wmax * dt * dt).powi(1000) - 1.0);
    }
}
