//! Dispersion relation, noise coefficients and scattering kernels.
//!
//! The harmonic interaction is given by an even, finitely supported sequence
//! `α_y`; its symbol `α̂(k) = α_0 + 2 Σ_{y≥1} α_y cos(2π y k)` must be positive
//! away from `k = 0`, and the dispersion relation is `ω(k) = √α̂(k)`.
//!
//! The noise enters through the fixed sequence `β = Δβ⁽⁰⁾` whose symbol is
//! [`beta_hat`]. The scattering kernel `R(k,k')` of the limiting kinetic equation
//! is independent of the interaction.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{require, Error, Result};

/// Number of probe points used to validate `α̂ ≥ 0` on the torus.
const VALIDATION_GRID: usize = 4096;

/// Wraps a real number onto the torus `[-1/2, 1/2)`.
pub fn wrap(k: f64) -> f64 {
    let w = k - k.round();
    if w >= 0.5 {
        w - 1.0
    } else {
        w
    }
}

/// Uniform midpoint grid of `n` nodes on the torus, `k_j = -1/2 + (j + 1/2)/n`.
pub fn midpoint_grid(n: usize) -> Vec<f64> {
    (0..n).map(|j| -0.5 + (j as f64 + 0.5) / n as f64).collect()
}

/// Harmonic interaction of the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// `alpha[y]` is `α_y = α_{-y}` for `y = 0, 1, ...`.
    alpha: Vec<f64>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self::nearest_neighbour(1.0).expect("default pinning is valid")
    }
}

impl ModelParams {
    /// Nearest-neighbour chain with pinning frequency `ω₀`:
    /// `α_0 = ω₀²/2 + 1`, `α_{±1} = -1/2`.
    pub fn nearest_neighbour(omega0: f64) -> Result<Self> {
        if !(omega0.is_finite() && omega0 >= 0.0) {
            return Err(Error::InvalidModel(format!(
                "pinning frequency must be finite and nonnegative, got {omega0}"
            )));
        }
        Self::from_alpha(vec![0.5 * omega0 * omega0 + 1.0, -0.5])
    }

    /// General finitely supported interaction `α_0, α_1, ..., α_L` (extended evenly).
    pub fn from_alpha(alpha: Vec<f64>) -> Result<Self> {
        if alpha.is_empty() || alpha.iter().any(|a| !a.is_finite()) {
            return Err(Error::InvalidModel(
                "alpha must be a nonempty list of finite numbers".into(),
            ));
        }
        let params = Self { alpha };
        let scale = params.alpha.iter().map(|a| a.abs()).sum::<f64>().max(1.0);
        for k in midpoint_grid(VALIDATION_GRID) {
            let a = params.alpha_hat(k);
            if a <= 0.0 {
                return Err(Error::InvalidModel(format!(
                    "alpha_hat({k:.6}) = {a:e} is not positive away from k = 0"
                )));
            }
        }
        let a0 = params.alpha_hat(0.0);
        if a0 < -1e-12 * scale {
            return Err(Error::InvalidModel(format!("alpha_hat(0) = {a0:e} < 0")));
        }
        if a0.abs() <= 1e-12 * scale && params.alpha_hat_second_derivative_at_zero() <= 0.0 {
            return Err(Error::InvalidModel(
                "unpinned interaction needs alpha_hat''(0) > 0".into(),
            ));
        }
        Ok(params)
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    /// `α_y` for any lattice offset.
    pub fn alpha_at(&self, y: i64) -> f64 {
        self.alpha.get(y.unsigned_abs() as usize).copied().unwrap_or(0.0)
    }

    /// Interaction range `L` (largest `y` with `α_y` stored).
    pub fn range(&self) -> usize {
        self.alpha.len() - 1
    }

    /// `α̂(k) = α̂(0) - 4 Σ_{y≥1} α_y sin²(πyk)`; this form keeps full relative
    /// accuracy near `k = 0` in the unpinned case.
    pub fn alpha_hat(&self, k: f64) -> f64 {
        let at_zero = self.alpha[0] + 2.0 * self.alpha[1..].iter().sum::<f64>();
        let mut s = at_zero;
        for (y, a) in self.alpha.iter().enumerate().skip(1) {
            s -= 4.0 * a * (PI * y as f64 * k).sin().powi(2);
        }
        s
    }

    fn alpha_hat_derivative(&self, k: f64) -> f64 {
        self.alpha
            .iter()
            .enumerate()
            .skip(1)
            .map(|(y, a)| -4.0 * PI * y as f64 * a * (2.0 * PI * y as f64 * k).sin())
            .sum()
    }

    fn alpha_hat_second_derivative_at_zero(&self) -> f64 {
        self.alpha
            .iter()
            .enumerate()
            .skip(1)
            .map(|(y, a)| -8.0 * PI * PI * (y * y) as f64 * a)
            .sum()
    }

    /// Pinning frequency implied by the interaction, `ω₀ = √(2 α̂(0))`.
    pub fn omega0(&self) -> f64 {
        (2.0 * self.alpha_hat(0.0).max(0.0)).sqrt()
    }

    pub fn is_pinned(&self) -> bool {
        self.omega(0.0) > 1e-12
    }

    /// Dispersion relation `ω(k) = √α̂(k)`.
    pub fn omega(&self, k: f64) -> f64 {
        self.alpha_hat(k).max(0.0).sqrt()
    }

    /// `ω'(k)`, computed analytically from the finite Fourier series of `α̂`.
    ///
    /// Where `ω` vanishes (`k = 0` in the unpinned case) the right-sided
    /// derivative `√(α̂''(0)/2)` is returned.
    pub fn omega_prime(&self, k: f64) -> f64 {
        let w = self.omega(k);
        if w < 1e-9 {
            (0.5 * self.alpha_hat_second_derivative_at_zero()).max(0.0).sqrt()
        } else {
            self.alpha_hat_derivative(k) / (2.0 * w)
        }
    }

    /// Largest frequency on a fine probe grid.
    pub fn omega_max(&self) -> f64 {
        (0..=VALIDATION_GRID)
            .map(|j| self.omega(-0.5 + j as f64 / VALIDATION_GRID as f64))
            .fold(0.0, f64::max)
    }
}

/// `β⁽⁰⁾`: -4 at the origin, -1 at `±1`.
pub fn beta0_at(y: i64) -> f64 {
    match y {
        0 => -4.0,
        1 | -1 => -1.0,
        _ => 0.0,
    }
}

/// `β_y = β⁽⁰⁾_{y+1} + β⁽⁰⁾_{y-1} - 2β⁽⁰⁾_y`, supported on `|y| ≤ 2`.
pub fn beta_at(y: i64) -> f64 {
    beta0_at(y + 1) + beta0_at(y - 1) - 2.0 * beta0_at(y)
}

/// Closed form `β̂(k) = 8 sin²(πk) [1 + 2 cos²(πk)]`.
pub fn beta_hat(k: f64) -> f64 {
    let s = (PI * k).sin();
    let c = (PI * k).cos();
    8.0 * s * s * (1.0 + 2.0 * c * c)
}

/// `β̂(k)` evaluated as the Fourier series of `β_y`.
pub fn beta_hat_series(k: f64) -> f64 {
    (-2i64..=2)
        .map(|y| beta_at(y) * (2.0 * PI * y as f64 * k).cos())
        .sum()
}

/// Maximum of `β̂` on the torus, attained where `cos²(πk) = 1/4`.
pub const BETA_HAT_MAX: f64 = 9.0;

/// `r(k,k') = sin(2πk) + sin(2π(k-k')) + sin(2π(k'-2k))`.
pub fn r_kernel(k: f64, kp: f64) -> f64 {
    (2.0 * PI * k).sin() + (2.0 * PI * (k - kp)).sin() + (2.0 * PI * (kp - 2.0 * k)).sin()
}

/// Product form `4 sin(πk) sin(π(k-k')) sin(π(2k-k'))` of [`r_kernel`].
pub fn r_kernel_product(k: f64, kp: f64) -> f64 {
    4.0 * (PI * k).sin() * (PI * (k - kp)).sin() * (PI * (2.0 * k - kp)).sin()
}

/// Scattering kernel `R(k,k') = 16 sin²(πk) sin²(πk') {sin²(π(k+k')) + sin²(π(k-k'))}`.
#[allow(non_snake_case)]
pub fn R_kernel(k: f64, kp: f64) -> f64 {
    let sk = (PI * k).sin();
    let skp = (PI * kp).sin();
    let sp = (PI * (k + kp)).sin();
    let sm = (PI * (k - kp)).sin();
    16.0 * sk * sk * skp * skp * (sp * sp + sm * sm)
}

/// `R(k,k') = r²(k, k-k') + r²(k, k+k')`.
#[allow(non_snake_case)]
pub fn R_kernel_sum_of_squares(k: f64, kp: f64) -> f64 {
    let a = r_kernel(k, k - kp);
    let b = r_kernel(k, k + kp);
    a * a + b * b
}

/// Max over a `grid`-node midpoint grid of `|2 (1/K) Σ_l R(k, k_l) - β̂(k)|`.
pub fn kernel_identity_residual(grid: usize) -> Result<f64> {
    require(grid >= 8, || format!("kernel identity needs at least 8 nodes, got {grid}"))?;
    let nodes = midpoint_grid(grid);
    Ok(kernel_identity_table(&nodes, grid)
        .into_iter()
        .map(|row| row.residual)
        .fold(0.0, f64::max))
}

/// One row of the kernel-identity table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KernelIdentityRow {
    pub k: f64,
    pub beta_hat: f64,
    pub two_int_r: f64,
    pub residual: f64,
}

/// `β̂(k)` against `2∫R(k,k')dk'` (midpoint rule with `quadrature` nodes) at each `k`.
pub fn kernel_identity_table(ks: &[f64], quadrature: usize) -> Vec<KernelIdentityRow> {
    let nodes = midpoint_grid(quadrature);
    ks.iter()
        .map(|&k| {
            let integral = nodes.iter().map(|&kp| R_kernel(k, kp)).sum::<f64>() / quadrature as f64;
            let b = beta_hat(k);
            KernelIdentityRow {
                k,
                beta_hat: b,
                two_int_r: 2.0 * integral,
                residual: (2.0 * integral - b).abs(),
            }
        })
        .collect()
}

/// Smallest mismatch `|ω(k₁) + σ₃ω(k-k₁) - σ₁[ω(k₂) + σ₂ω(k-k₂)]|` over all sign choices.
pub fn resonance_mismatch(params: &ModelParams, k1: f64, k2: f64, k: f64) -> f64 {
    let w1 = params.omega(k1);
    let w2 = params.omega(k2);
    let a = params.omega(k - k1);
    let b = params.omega(k - k2);
    let mut best = f64::INFINITY;
    for s3 in [1.0, -1.0] {
        for s1 in [1.0, -1.0] {
            for s2 in [1.0, -1.0] {
                best = best.min((w1 + s3 * a - s1 * (w2 + s2 * b)).abs());
            }
        }
    }
    best
}

/// Fraction of a `grid`-node midpoint grid lying within `tol` of the resonance set `𝒦(k₁,k₂)`.
pub fn resonance_fraction(params: &ModelParams, k1: f64, k2: f64, tol: f64, grid: usize) -> Result<f64> {
    require(wrap(k1 - k2).abs() > 1e-14, || "resonance scan needs k1 != k2".into())?;
    require(tol > 0.0, || format!("tolerance must be positive, got {tol}"))?;
    require(grid > 0, || "empty grid".into())?;
    let hits = midpoint_grid(grid)
        .into_iter()
        .filter(|&k| resonance_mismatch(params, k1, k2, k) < tol)
        .count();
    Ok(hits as f64 / grid as f64)
}

/// Near-resonance fractions at `tol`, `tol/10`, `tol/100`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResonanceScan {
    pub tolerances: Vec<f64>,
    pub fractions: Vec<f64>,
    /// Least-squares slope of `log fraction` against `log tol` (NaN when undefined).
    pub slope: f64,
    /// Set when the fraction fails to shrink by at least a factor 2 over two decades of `tol`.
    pub resonant: bool,
}

pub fn resonance_scan(params: &ModelParams, k1: f64, k2: f64, tol: f64, grid: usize) -> Result<ResonanceScan> {
    let tolerances = vec![tol, tol / 10.0, tol / 100.0];
    let fractions = tolerances
        .iter()
        .map(|&t| resonance_fraction(params, k1, k2, t, grid))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = tolerances
        .iter()
        .zip(&fractions)
        .filter(|(_, &f)| f > 0.0)
        .map(|(&t, &f)| (t.ln(), f.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    } else {
        f64::NAN
    };
    let resonant = fractions[0] > 0.0 && fractions[2] > 0.5 * fractions[0];
    Ok(ResonanceScan {
        tolerances,
        fractions,
        slope,
        resonant,
    })
}

/// Fraction of grid points where `|ω'(k) - σ ω'(k+a)| < tol`.
///
/// Points within `4/grid` of a zero of `ω` (the kink of the unpinned chain) are
/// excluded from both numerator and denominator.
pub fn derivative_match_fraction(params: &ModelParams, shift: f64, sigma: f64, tol: f64, grid: usize) -> f64 {
    let guard = 4.0 / grid as f64;
    let near_kink = |k: f64| !params.is_pinned() && wrap(k).abs() < guard;
    let (mut hits, mut total) = (0usize, 0usize);
    for k in midpoint_grid(grid) {
        if near_kink(k) || near_kink(k + shift) {
            continue;
        }
        total += 1;
        if (params.omega_prime(k) - sigma * params.omega_prime(wrap(k + shift))).abs() < tol {
            hits += 1;
        }
    }
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}
