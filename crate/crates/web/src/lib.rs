//! Browser bindings: dispersion curves, kinetic relaxation and a single noisy
//! chain trajectory. Every export returns a flat `Float64Array`.

use lattice_kinetic::experiments::{make_initial, InitSpec, LocalizedProfile};
use lattice_kinetic::kinetic::{evolve, KineticGrid, KineticState, DEFAULT_DT};
use lattice_kinetic::model::{beta_hat, ModelParams};
use lattice_kinetic::rng::path_rng;
use lattice_kinetic::spectral::ModeGrid;
use lattice_kinetic::{chain::SplittingIntegrator, wavefield::to_wave};
use wasm_bindgen::prelude::*;

/// Largest lattice the page may request; keeps a call well under a second.
pub const MAX_SITES: usize = 512;

fn check_sites(n: usize) -> Result<(), String> {
    if (8..=MAX_SITES).contains(&n) && n % 2 == 0 {
        Ok(())
    } else {
        Err(format!("lattice size must be even and in [8, {MAX_SITES}], got {n}"))
    }
}

/// `[k…, ω(k)…, β̂(k)…]` on `n` lattice modes.
pub fn dispersion_table(omega0: f64, n: usize) -> Result<Vec<f64>, String> {
    check_sites(n)?;
    let params = ModelParams::nearest_neighbour(omega0).map_err(|e| e.to_string())?;
    let ks = ModeGrid::new(n).map_err(|e| e.to_string())?.ks();
    let mut out = ks.clone();
    out.extend(ks.iter().map(|&k| params.omega(k)));
    out.extend(ks.iter().map(|&k| beta_hat(k)));
    Ok(out)
}

/// `[k…, Ē(0,k)…, Ē(t,k)…]` for `E0(k) = 1 + a cos 2πk`, `|a| ≤ 1`.
pub fn kinetic_profile(amplitude: f64, t: f64, n: usize) -> Result<Vec<f64>, String> {
    check_sites(n)?;
    if !(amplitude.abs() <= 1.0) {
        return Err(format!("amplitude must be in [-1, 1], got {amplitude}"));
    }
    if !(0.0..=50.0).contains(&t) {
        return Err(format!("t must be in [0, 50], got {t}"));
    }
    let grid = KineticGrid::lattice(n).map_err(|e| e.to_string())?;
    let ks = grid.ks().to_vec();
    let initial = KineticState::from_fn(grid, |k| 1.0 + amplitude * (2.0 * std::f64::consts::PI * k).cos())
        .map_err(|e| e.to_string())?;
    let later = evolve(&initial, t, DEFAULT_DT).map_err(|e| e.to_string())?;
    let mut out = ks;
    out.extend(&initial.values);
    out.extend(&later.values);
    Ok(out)
}

/// `[k…, |ψ̂(0,k)|²…, |ψ̂(t,k)|²…]` of one trajectory started from a bump at
/// `center`; the mass leaves the bump at rate `β̂/2` as noise scatters it.
pub fn trajectory_spectrum(center: f64, epsilon: f64, t: f64, n: usize, seed: u64) -> Result<Vec<f64>, String> {
    check_sites(n)?;
    if !(0.01..=1.0).contains(&epsilon) {
        return Err(format!("epsilon must be in [0.01, 1], got {epsilon}"));
    }
    if !(0.0..=2.0).contains(&t) {
        return Err(format!("t must be in [0, 2], got {t}"));
    }
    let params = ModelParams::default();
    let init = InitSpec::Localized {
        profile: LocalizedProfile {
            center,
            ..LocalizedProfile::default()
        },
    };
    let mut rng = path_rng(seed, 0);
    let state = make_initial(&init, &params, n, &mut rng).map_err(|e| e.to_string())?;
    let start = to_wave(&state, &params, epsilon).mode_energies();
    let steps = (t / epsilon / 0.01).ceil().max(1.0) as usize;
    let h = t / epsilon / steps as f64;
    let mut integrator = SplittingIntegrator::new(&params, n, epsilon, h).map_err(|e| e.to_string())?;
    integrator.load(&state).map_err(|e| e.to_string())?;
    if t > 0.0 {
        integrator.advance(steps, &mut rng);
    }
    let end = to_wave(&integrator.state(), &params, epsilon).mode_energies();
    let mut out = ModeGrid::new(n).map_err(|e| e.to_string())?.ks();
    out.extend(start);
    out.extend(end);
    Ok(out)
}

#[wasm_bindgen]
pub fn dispersion(omega0: f64, n: usize) -> Result<Vec<f64>, JsError> {
    dispersion_table(omega0, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn kinetic(amplitude: f64, t: f64, n: usize) -> Result<Vec<f64>, JsError> {
    kinetic_profile(amplitude, t, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn trajectory(center: f64, epsilon: f64, t: f64, n: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    trajectory_spectrum(center, epsilon, t, n, seed as u64).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dispersion_layout() {
        let v = dispersion_table(1.0, 16).unwrap();
        assert_eq!(v.len(), 48);
        // ω(0) = ω₀/√2 with α̂(k) = ω₀²/2 + 2 sin²πk
        assert!(v[16..32].iter().all(|w| *w >= std::f64::consts::FRAC_1_SQRT_2 - 1e-12));
        assert!(v[32..].iter().all(|b| (0.0..=9.0).contains(b)));
        assert!(dispersion_table(1.0, 7).is_err());
    }

    #[test]
    fn kinetic_profile_conserves_mass() {
        let v = kinetic_profile(0.8, 2.0, 64).unwrap();
        let (a, b) = (&v[64..128], &v[128..]);
        let (ma, mb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        assert!((ma - mb).abs() < 1e-10 * ma);
        let spread = |x: &[f64]| x.iter().cloned().fold(f64::MIN, f64::max) - x.iter().cloned().fold(f64::MAX, f64::min);
        assert!(spread(b) < spread(a));
        assert!(kinetic_profile(2.0, 1.0, 64).is_err());
    }

    #[test]
    fn trajectory_conserves_energy() {
        let v = trajectory_spectrum(0.25, 0.1, 0.5, 64, 3).unwrap();
        let (a, b) = (&v[64..128], &v[128..]);
        let (ea, eb): (f64, f64) = (a.iter().sum(), b.iter().sum());
        assert!((ea - eb).abs() < 1e-9 * ea, "{ea} vs {eb}");
        assert_eq!(v, trajectory_spectrum(0.25, 0.1, 0.5, 64, 3).unwrap());
    }
}
