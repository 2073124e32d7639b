//! Limiting Ornstein-Uhlenbeck processes of single modes and of the mode field.
//!
//! For a fixed mode `k`,
//!
//! ```text
//! dψ̃(t) = -(β̂(k)/4) ψ̃(t) dt + √𝓡(t,k) dw(t),
//! ```
//!
//! with `w` a standard complex Brownian motion (`E|w(t)|² = t`, `E w(t)² = 0`;
//! real and imaginary parts each have variance `t/2`). The Gaussian transition
//! between two times is sampled exactly; the noise variance
//! `∫ e^{-β̂(t₁-s)/2} 𝓡(s,k) ds` is evaluated by composite Simpson quadrature.

use num_complex::Complex64;
use rand::Rng;

use crate::error::{require, Result};
use crate::kinetic::KineticTrajectory;
use crate::rng::complex_normal;
use crate::spectral::ModeGrid;
use crate::wavefield::{FieldKind, SpectralField};

/// Minimum number of Simpson subintervals per quadrature.
pub const SIMPSON_INTERVALS: usize = 64;

/// Single-mode parameters; `rate` is `t ↦ 𝓡(t,k)`.
#[derive(Clone, Copy)]
pub struct OuParams<F: Fn(f64) -> f64> {
    pub k: f64,
    pub beta_k: f64,
    pub rate: F,
    pub psi0: Complex64,
}

impl<F: Fn(f64) -> f64> std::fmt::Debug for OuParams<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OuParams")
            .field("k", &self.k)
            .field("beta_k", &self.beta_k)
            .field("psi0", &self.psi0)
            .finish_non_exhaustive()
    }
}

/// Composite Simpson rule on `[a, b]` with at least `min_intervals` (even) subintervals
/// and at most `0.01` spacing.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, min_intervals: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut n = min_intervals.max(((b - a) / 0.01).ceil() as usize).max(2);
    n += n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// `∫_{t0}^{t1} e^{-β̂(t1-s)/2} 𝓡(s) ds`.
pub fn increment_variance(beta_k: f64, rate: impl Fn(f64) -> f64, t0: f64, t1: f64) -> f64 {
    simpson(|s| (-0.5 * beta_k * (t1 - s)).exp() * rate(s).max(0.0), t0, t1, SIMPSON_INTERVALS).max(0.0)
}

fn check_times(times: &[f64]) -> Result<()> {
    require(!times.is_empty() && times[0] == 0.0, || "time grid must start at 0".into())?;
    require(times.windows(2).all(|w| w[1] > w[0]), || "time grid must be strictly increasing".into())
}

/// Exact sample of the path on `times` (which must start at 0).
pub fn ou_sample_exact<F: Fn(f64) -> f64, R: Rng + ?Sized>(
    params: &OuParams<F>,
    times: &[f64],
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    check_times(times)?;
    require(params.beta_k >= 0.0, || "beta_k must be nonnegative".into())?;
    let mut path = Vec::with_capacity(times.len());
    let mut psi = params.psi0;
    path.push(psi);
    for w in times.windows(2) {
        let decay = (-0.25 * params.beta_k * (w[1] - w[0])).exp();
        let var = increment_variance(params.beta_k, &params.rate, w[0], w[1]);
        psi = psi * decay + complex_normal(rng, var);
        path.push(psi);
    }
    Ok(path)
}

/// `E ψ̃(t) = e^{-β̂t/4} ψ̂₀`.
pub fn ou_mean<F: Fn(f64) -> f64>(params: &OuParams<F>, t: f64) -> Complex64 {
    params.psi0 * (-0.25 * params.beta_k * t).exp()
}

/// `E|ψ̃(t)|² = e^{-β̂t/2}|ψ̂₀|² + ∫₀ᵗ e^{-β̂(t-s)/2} 𝓡(s) ds`.
pub fn ou_second_moment<F: Fn(f64) -> f64>(params: &OuParams<F>, t: f64) -> Result<f64> {
    require(t >= 0.0, || format!("t must be >= 0, got {t}"))?;
    Ok((-0.5 * params.beta_k * t).exp() * params.psi0.norm_sqr() + increment_variance(params.beta_k, &params.rate, 0.0, t))
}

/// Time-homogeneous OU with drift `-β̂/4` and intensity `β̂T/2`, started at `psi0`;
/// its stationary law has `E|ψ|² = T`.
pub fn ou_stationary_sample<R: Rng + ?Sized>(
    beta_k: f64,
    temperature: f64,
    psi0: Complex64,
    times: &[f64],
    rng: &mut R,
) -> Result<Vec<Complex64>> {
    check_times(times)?;
    require(temperature >= 0.0, || format!("temperature must be >= 0, got {temperature}"))?;
    require(beta_k >= 0.0, || "beta_k must be nonnegative".into())?;
    let mut path = Vec::with_capacity(times.len());
    let mut psi = psi0;
    path.push(psi);
    for w in times.windows(2) {
        let decay = (-0.25 * beta_k * (w[1] - w[0])).exp();
        let var = temperature * (1.0 - decay * decay);
        psi = psi * decay + complex_normal(rng, var);
        path.push(psi);
    }
    Ok(path)
}

/// Field version on the lattice modes of `rates.grid()`, with independent complex
/// noises per mode of per-step variance `K · ∫ e^{-β̂(t₁-s)/2} 𝓡(s,k_j) ds`.
///
/// The factor `K` is the discrete image of `δ(k - k')`; it matches the mode
/// variance `K · E0(k_j)` of homogeneous initial data.
pub fn ou_field_sample<R: Rng + ?Sized>(
    rates: &KineticTrajectory,
    init: &[Complex64],
    times: &[f64],
    rng: &mut R,
) -> Result<Vec<SpectralField>> {
    check_times(times)?;
    let kgrid = rates.grid();
    let n = kgrid.len();
    require(init.len() == n, || format!("init has {} modes, grid {}", init.len(), n))?;
    require(times[times.len() - 1] <= rates.t_end() + 1e-12, || "time grid exceeds the kinetic solution".into())?;
    let grid = ModeGrid::new(n)?;
    let ks = grid.ks();
    let beta = kgrid.beta();
    let mut psi = init.to_vec();
    let snapshot = |values: &[Complex64], t: f64| SpectralField {
        values: values.to_vec(),
        kind: FieldKind::Compensated,
        t,
        epsilon: 0.0,
        zero_mode: None,
    };
    let mut out = vec![snapshot(&psi, 0.0)];
    for w in times.windows(2) {
        for j in 0..n {
            let decay = (-0.25 * beta[j] * (w[1] - w[0])).exp();
            let var = n as f64 * increment_variance(beta[j], |s| rates.rate_at(s, ks[j]), w[0], w[1]);
            psi[j] = psi[j] * decay + complex_normal(rng, var);
        }
        out.push(snapshot(&psi, w[1]));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetic::{evolve, GridKind, KineticGrid, KineticState, DEFAULT_DT};
    use crate::model::beta_hat;
    use crate::rng::path_rng;
    use crate::stats::{complex_correlation, complex_mean_se, mean_se};
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn times(n: usize, dt: f64) -> Vec<f64> {
        (0..=n).map(|i| i as f64 * dt).collect()
    }

    #[test]
    fn simpson_is_exact_for_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x, 0.0, 2.0, 2);
        assert_abs_diff_eq!(v, 0.0, epsilon = 1e-14);
        let e = simpson(f64::exp, 0.0, 1.0, 64);
        assert!((e - (1f64.exp() - 1.0)).abs() < 1e-8 * e);
    }

    #[test]
    fn zero_rate_gives_deterministic_decay() {
        let p = OuParams {
            k: 0.25,
            beta_k: beta_hat(0.25),
            rate: |_| 0.0,
            psi0: Complex64::new(1.0, 2.0),
        };
        let ts = times(10, 0.1);
        let path = ou_sample_exact(&p, &ts, &mut path_rng(0, 0)).unwrap();
        for (z, t) in path.iter().zip(&ts) {
            assert!((z - ou_mean(&p, *t)).norm() < 1e-14);
        }
    }

    #[test]
    fn frozen_zero_mode() {
        let p = OuParams {
            k: 0.0,
            beta_k: beta_hat(0.0),
            rate: |_| 0.0,
            psi0: Complex64::new(0.3, -0.1),
        };
        let path = ou_sample_exact(&p, &times(5, 0.2), &mut path_rng(0, 0)).unwrap();
        assert!(path.iter().all(|z| *z == p.psi0));
        let s = ou_stationary_sample(0.0, 1.0, p.psi0, &times(5, 0.2), &mut path_rng(0, 0)).unwrap();
        assert!(s.iter().all(|z| *z == p.psi0));
    }

    #[test]
    fn brownian_convention() {
        // β̂ = 0 and 𝓡 ≡ 1 give ψ̃(t) = w(t)
        let p = OuParams {
            k: 0.1,
            beta_k: 0.0,
            rate: |_| 1.0,
            psi0: Complex64::new(0.0, 0.0),
        };
        let ts = [0.0, 0.5, 1.5];
        let paths: Vec<Vec<Complex64>> = (0..10_000)
            .map(|i| ou_sample_exact(&p, &ts, &mut path_rng(1, i)).unwrap())
            .collect();
        let prod: Vec<f64> = paths.iter().map(|w| (w[1].conj() * w[2]).re).collect();
        assert!(mean_se(&prod).within(0.5, 3.0));
        let pseudo: Vec<Complex64> = paths.iter().map(|w| w[1] * w[2]).collect();
        assert!(complex_mean_se(&pseudo).within(Complex64::new(0.0, 0.0), 3.0));
    }

    #[test]
    fn second_moment_of_ensemble_matches_closed_form() {
        let p = OuParams {
            k: 0.3,
            beta_k: beta_hat(0.3),
            rate: |s: f64| 1.0 + 0.5 * (3.0 * s).sin(),
            psi0: Complex64::new(0.8, 0.4),
        };
        let ts = times(8, 0.25);
        let paths: Vec<Vec<Complex64>> = (0..10_000)
            .map(|i| ou_sample_exact(&p, &ts, &mut path_rng(2, i)).unwrap())
            .collect();
        for (i, t) in ts.iter().enumerate().skip(1) {
            let e2: Vec<f64> = paths.iter().map(|w| w[i].norm_sqr()).collect();
            assert!(mean_se(&e2).within(ou_second_moment(&p, *t).unwrap(), 3.0));
            let zs: Vec<Complex64> = paths.iter().map(|w| w[i]).collect();
            assert!(complex_mean_se(&zs).within(ou_mean(&p, *t), 3.0));
        }
    }

    #[test]
    fn second_moment_solves_its_ode() {
        let p = OuParams {
            k: 0.2,
            beta_k: beta_hat(0.2),
            rate: |s: f64| 2.0 + s.cos(),
            psi0: Complex64::new(1.0, 0.0),
        };
        assert_eq!(ou_second_moment(&p, 0.0).unwrap(), 1.0);
        let h = 1e-3;
        for t in [0.3, 1.0, 2.5] {
            let m = |t| ou_second_moment(&p, t).unwrap();
            let dm = (m(t + h) - m(t - h)) / (2.0 * h);
            assert!((dm + 0.5 * p.beta_k * m(t) - (p.rate)(t)).abs() < 1e-6);
        }
    }

    #[test]
    fn second_moment_equals_kinetic_solution() {
        let grid = KineticGrid::new(GridKind::Lattice, 128).unwrap();
        let s0 = KineticState::from_fn(grid, |k| 1.0 + (2.0 * PI * k).cos()).unwrap();
        let traj = KineticTrajectory::solve(&s0, 2.0, DEFAULT_DT).unwrap();
        for t in [0.5, 1.0, 2.0] {
            let kin = evolve(&s0, t, DEFAULT_DT).unwrap();
            for j in [5usize, 40, 70, 100] {
                let k = s0.grid.ks()[j];
                let p = OuParams {
                    k,
                    beta_k: beta_hat(k),
                    rate: |s| traj.rate_at(s, k),
                    psi0: Complex64::new(s0.values[j].sqrt(), 0.0),
                };
                assert!((ou_second_moment(&p, t).unwrap() - kin.values[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn stationary_sampler_keeps_variance() {
        let beta = beta_hat(0.35);
        let ts = times(6, 0.5);
        let paths: Vec<Vec<Complex64>> = (0..10_000)
            .map(|i| {
                let mut rng = path_rng(3, i);
                let psi0 = complex_normal(&mut rng, 2.0);
                ou_stationary_sample(beta, 2.0, psi0, &ts, &mut rng).unwrap()
            })
            .collect();
        for i in 0..ts.len() {
            let e2: Vec<f64> = paths.iter().map(|w| w[i].norm_sqr()).collect();
            assert!(mean_se(&e2).within(2.0, 3.0));
        }
    }

    #[test]
    fn exact_sampler_approaches_stationary_law() {
        let grid = KineticGrid::new(GridKind::Lattice, 64).unwrap();
        let s0 = KineticState::from_fn(grid, |k| 1.0 + (2.0 * PI * k).cos()).unwrap();
        let traj = KineticTrajectory::solve(&s0, 12.0, DEFAULT_DT).unwrap();
        let temperature = s0.mass();
        let j = 20;
        let k = s0.grid.ks()[j];
        let p = OuParams {
            k,
            beta_k: beta_hat(k),
            rate: |s| traj.rate_at(s, k),
            psi0: Complex64::new(s0.values[j].sqrt(), 0.0),
        };
        let gap = |t: f64| (ou_second_moment(&p, t).unwrap() - temperature).abs();
        assert!(gap(12.0) < gap(4.0) && gap(4.0) < gap(1.0));
    }

    #[test]
    fn field_sampler_in_equilibrium() {
        let n = 32;
        let grid = KineticGrid::new(GridKind::Lattice, n).unwrap();
        let s0 = KineticState::constant(grid, 1.0).unwrap();
        let traj = KineticTrajectory::solve(&s0, 1.0, DEFAULT_DT).unwrap();
        let ts = [0.0, 0.5, 1.0];
        let m = 4000;
        let paths: Vec<Vec<SpectralField>> = (0..m)
            .map(|i| {
                let mut rng = path_rng(4, i);
                let init: Vec<Complex64> = (0..n).map(|_| complex_normal(&mut rng, n as f64)).collect();
                ou_field_sample(&traj, &init, &ts, &mut rng).unwrap()
            })
            .collect();
        for j in 0..n {
            let e2: Vec<f64> = paths.iter().map(|p| p[2].values[j].norm_sqr() / n as f64).collect();
            assert!(mean_se(&e2).within(1.0, 4.0), "mode {j}");
        }
        let a: Vec<Complex64> = paths.iter().map(|p| p[2].values[5]).collect();
        let b: Vec<Complex64> = paths.iter().map(|p| p[2].values[9]).collect();
        assert!(complex_correlation(&a, &b).unwrap().norm() <= 3.0 / (m as f64).sqrt());
    }

    #[test]
    fn time_grid_preconditions() {
        let p = OuParams {
            k: 0.1,
            beta_k: 1.0,
            rate: |_| 1.0,
            psi0: Complex64::new(0.0, 0.0),
        };
        assert!(ou_sample_exact(&p, &[0.1, 0.2], &mut path_rng(0, 0)).is_err());
        assert!(ou_sample_exact(&p, &[0.0, 0.2, 0.2], &mut path_rng(0, 0)).is_err());
    }
}
