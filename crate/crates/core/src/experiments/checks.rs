//! Single-ε ensemble checks: conservation, Gibbs invariance, the exact
//! second-moment oracle, and kinetic thermalization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chain::{hamiltonian_energy, step_noise, total_momentum, FreeFlight, SweepOrder};
use crate::error::{require, Result};
use crate::experiments::ensemble::{run_ensemble, EnsembleConfig, Snapshot};
use crate::experiments::init::{make_initial, E0Preset, InitSpec};
use crate::experiments::report::{strictly_decreasing, ReportRow, SweepReport, Verdict};
use crate::kinetic::{evolve, scattering_rate, GridKind, KineticGrid, KineticState, DEFAULT_DT};
use crate::model::ModelParams;
use crate::moments::{evolve_covariance, predicted_mode_energies, CovarianceState};
use crate::rng::path_rng;
use crate::spectral::ModeGrid;
use crate::stats::mean_se;

#[derive(Serialize)]
struct Provenance<'a, C> {
    model: &'a ModelParams,
    config: &'a C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConservationConfig {
    pub n: usize,
    pub epsilon: f64,
    pub dt: f64,
    /// Microscopic horizon.
    pub t_micro: f64,
    /// Number of equally spaced sampling times after 0.
    pub samples: usize,
    pub temperature: f64,
    pub paths: usize,
    pub seed: u64,
}

impl Default for ConservationConfig {
    fn default() -> Self {
        Self {
            n: 256,
            epsilon: 0.1,
            dt: 1e-3,
            t_micro: 10.0,
            samples: 10,
            temperature: 1.0,
            paths: 500,
            seed: 20261015,
        }
    }
}

/// Momentum drift per path, ensemble-mean energy over time, and `Σp²` / `Σp`
/// across individual noise sub-steps along one trajectory.
pub fn conservation_test(params: &ModelParams, cfg: &ConservationConfig) -> Result<SweepReport> {
    require(cfg.samples >= 1, || "need at least one sampling time".into())?;
    let init = InitSpec::Gibbs {
        temperature: cfg.temperature,
    };
    let times: Vec<f64> = (0..=cfg.samples)
        .map(|i| cfg.epsilon * cfg.t_micro * i as f64 / cfg.samples as f64)
        .collect();
    let ens = EnsembleConfig {
        n: cfg.n,
        epsilon: cfg.epsilon,
        dt: cfg.dt,
        paths: cfg.paths,
        seed: cfg.seed,
    };
    let pinned = params.is_pinned();
    let per_path = run_ensemble(params, &ens, &init, &times, |_, snaps: &[Snapshot]| {
        let energy: Vec<f64> = snaps.iter().map(|s| s.field.spectral_energy()).collect();
        let drift = if pinned {
            0.0
        } else {
            let p0 = snaps[0].field.zero_mode.expect("unpinned").p_hat;
            snaps
                .iter()
                .map(|s| (s.field.zero_mode.expect("unpinned").p_hat - p0).abs())
                .fold(0.0, f64::max)
        };
        (energy, drift)
    })?;

    let mut report = SweepReport::new("conservation", &Provenance { model: params, config: cfg }, cfg.seed, cfg.paths);
    let initial = mean_se(&per_path.iter().map(|(e, _)| e[0]).collect::<Vec<_>>());
    let mut worst_z: f64 = 0.0;
    for (i, &t) in times.iter().enumerate() {
        let e = mean_se(&per_path.iter().map(|(e, _)| e[i]).collect::<Vec<_>>());
        let row = ReportRow::new("mean_energy", e.mean, e.se, initial.mean).eps(cfg.epsilon).at(t);
        worst_z = worst_z.max(row.z_score());
        report.row(row);
    }
    report.check("energy", Verdict::from_bool(worst_z <= 3.0), format!("max |z| {worst_z:.2e} (limit 3)"));

    if !pinned {
        let drift = per_path.iter().map(|(_, d)| *d).fold(0.0, f64::max);
        report.row(ReportRow::new("max_momentum_drift", drift, 0.0, 0.0).eps(cfg.epsilon));
        report.check(
            "momentum",
            Verdict::from_bool(drift <= 1e-10),
            format!("max |P(t) - P(0)| {drift:.2e} (limit 1e-10)"),
        );
    }

    let (rel, mom) = noise_substep_drift(params, cfg, &init)?;
    report.row(ReportRow::new("noise_substep_kinetic_energy", rel, 0.0, 0.0).eps(cfg.epsilon));
    report.row(ReportRow::new("noise_substep_momentum", mom, 0.0, 0.0).eps(cfg.epsilon));
    report.check(
        "noise_substep",
        Verdict::from_bool(rel <= 1e-12 && mom <= 1e-12),
        format!("max relative change of sum p^2 {rel:.2e}, of sum p {mom:.2e} (limit 1e-12)"),
    );
    Ok(report)
}

/// Largest relative change of `Σp²` and absolute change of `Σp` (relative to
/// `√Σp²`) over single noise sweeps along trajectory 0.
fn noise_substep_drift(params: &ModelParams, cfg: &ConservationConfig, init: &InitSpec) -> Result<(f64, f64)> {
    let mut rng = path_rng(cfg.seed, 0);
    let mut state = make_initial(init, params, cfg.n, &mut rng)?;
    let mut flight = FreeFlight::new(params, cfg.n);
    let steps = (cfg.t_micro / cfg.dt).round() as usize;
    let (mut rel, mut mom) = (0.0f64, 0.0f64);
    for i in 0..steps {
        flight.apply(&mut state, 0.5 * cfg.dt);
        let k0: f64 = state.p.iter().map(|p| p * p).sum();
        let m0 = total_momentum(&state);
        let order = if i % 2 == 0 { SweepOrder::Forward } else { SweepOrder::Backward };
        step_noise(&mut state, cfg.dt, cfg.epsilon, order, &mut rng);
        let k1: f64 = state.p.iter().map(|p| p * p).sum();
        rel = rel.max((k1 - k0).abs() / k0);
        mom = mom.max((total_momentum(&state) - m0).abs() / k0.sqrt());
        flight.apply(&mut state, 0.5 * cfg.dt);
    }
    debug_assert!(hamiltonian_energy(&state, params).is_finite());
    Ok((rel, mom))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsConfig {
    pub n: usize,
    pub epsilon: f64,
    pub t: f64,
    pub temperature: f64,
    pub paths: usize,
    pub seed: u64,
    pub dt: f64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            n: 256,
            epsilon: 0.1,
            t: 1.0,
            temperature: 1.0,
            paths: 2000,
            seed: 20261015,
            dt: 0.01,
        }
    }
}

/// Gibbs data must stay flat: `Ŝ(t,k) = T` per mode and in the pairings.
pub fn gibbs_invariance_test(params: &ModelParams, cfg: &GibbsConfig) -> Result<SweepReport> {
    let n = cfg.n;
    let init = InitSpec::Gibbs {
        temperature: cfg.temperature,
    };
    let ens = EnsembleConfig {
        n,
        epsilon: cfg.epsilon,
        dt: cfg.dt,
        paths: cfg.paths,
        seed: cfg.seed,
    };
    let per_path = run_ensemble(params, &ens, &init, &[0.0, cfg.t], |_, s: &[Snapshot]| {
        s[1].field.mode_energies().iter().map(|v| v / n as f64).collect::<Vec<f64>>()
    })?;
    let mut report = SweepReport::new("gibbs_invariance", &Provenance { model: params, config: cfg }, cfg.seed, cfg.paths);
    let ks = ModeGrid::new(n)?.ks();
    let mut worst: f64 = 0.0;
    let mut outside = 0usize;
    for (j, &k) in ks.iter().enumerate() {
        let ms = mean_se(&per_path.iter().map(|s| s[j]).collect::<Vec<_>>());
        let row = ReportRow::new("s_hat", ms.mean, ms.se, cfg.temperature).eps(cfg.epsilon).at(cfg.t).mode(k);
        worst = worst.max(row.z_score());
        outside += usize::from(row.z_score() > 3.0);
        report.row(row);
    }
    report.check(
        "flat",
        Verdict::from_bool(outside == 0),
        format!("{outside} of {n} modes beyond 3 SE (max |z| {worst:.2})"),
    );
    let fs: [(&str, Box<dyn Fn(f64) -> f64>); 3] = [
        ("1", Box::new(|_| 1.0)),
        ("cos", Box::new(|k| (2.0 * PI * k).cos())),
        ("sin2", Box::new(|k| (PI * k).sin().powi(2))),
    ];
    let mut worst_pair: f64 = 0.0;
    for (name, f) in &fs {
        let fv: Vec<f64> = ks.iter().map(|&k| f(k)).collect();
        let target = cfg.temperature * fv.iter().sum::<f64>() / n as f64;
        let samples: Vec<f64> = per_path
            .iter()
            .map(|s| s.iter().zip(&fv).map(|(a, b)| a * b).sum::<f64>() / n as f64)
            .collect();
        let ms = mean_se(&samples);
        let row = ReportRow::new(format!("pairing[{name}]"), ms.mean, ms.se, target).eps(cfg.epsilon).at(cfg.t);
        worst_pair = worst_pair.max(row.z_score());
        report.row(row);
    }
    report.check(
        "pairings",
        Verdict::from_bool(worst_pair <= 3.0),
        format!("max |z| {worst_pair:.2} over f in {{1, cos, sin^2}} (limit 3)"),
    );
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceOracleConfig {
    pub n: usize,
    pub epsilon: f64,
    pub times: Vec<f64>,
    pub e0: E0Preset,
    pub paths: usize,
    pub seed: u64,
    pub dt: f64,
}

impl Default for CovarianceOracleConfig {
    fn default() -> Self {
        Self {
            n: 32,
            epsilon: 0.1,
            times: vec![0.0, 0.5, 1.0],
            e0: E0Preset::OnePlusCos,
            paths: 4000,
            seed: 20261015,
            dt: 0.01,
        }
    }
}

/// Monte Carlo mode energies against the exact second-moment ODE.
pub fn covariance_oracle_test(params: &ModelParams, cfg: &CovarianceOracleConfig) -> Result<SweepReport> {
    let n = cfg.n;
    require(cfg.times.first() == Some(&0.0), || "times must start at 0".into())?;
    let init = InitSpec::Homogeneous { e0: cfg.e0.clone() };
    let ens = EnsembleConfig {
        n,
        epsilon: cfg.epsilon,
        dt: cfg.dt,
        paths: cfg.paths,
        seed: cfg.seed,
    };
    let per_path = run_ensemble(params, &ens, &init, &cfg.times, |_, snaps: &[Snapshot]| {
        snaps.iter().map(|s| s.field.mode_energies()).collect::<Vec<Vec<f64>>>()
    })?;
    let ode_dt = cfg.epsilon / (10.0 * params.omega_max());
    let mut cov = CovarianceState::gaussian(params, &init.kinetic_initial(n)?, cfg.epsilon)?;
    let e_start = cov.energy(params);
    let ks = ModeGrid::new(n)?.ks();
    let mut report = SweepReport::new("covariance_oracle", &Provenance { model: params, config: cfg }, cfg.seed, cfg.paths);
    let mut worst: f64 = 0.0;
    let mut drift: f64 = 0.0;
    for (i, &t) in cfg.times.iter().enumerate() {
        if t > cov.t {
            cov = evolve_covariance(&cov, params, t - cov.t, ode_dt)?;
        }
        cov.check_psd()?;
        drift = drift.max((cov.energy(params) - e_start).abs() / e_start);
        let exact = predicted_mode_energies(&cov, params);
        for (j, &k) in ks.iter().enumerate() {
            let ms = mean_se(&per_path.iter().map(|p| p[i][j] / n as f64).collect::<Vec<_>>());
            let row = ReportRow::new("s_hat", ms.mean, ms.se, exact[j] / n as f64).eps(cfg.epsilon).at(t).mode(k);
            if t > 0.0 {
                worst = worst.max(row.z_score());
            }
            report.row(row);
        }
    }
    report.row(ReportRow::new("oracle_energy_drift", drift, 0.0, 0.0).eps(cfg.epsilon));
    report.check("modes", Verdict::from_bool(worst <= 4.0), format!("max |z| {worst:.2} (limit 4)"));
    report.check(
        "oracle_energy",
        Verdict::from_bool(drift <= 1e-8),
        format!("relative drift of tr(HC)/2 {drift:.2e} (limit 1e-8)"),
    );
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThermalizationConfig {
    pub e0: E0Preset,
    pub nodes: usize,
    pub grid: GridKind,
    pub times: Vec<f64>,
    pub dt: f64,
}

impl Default for ThermalizationConfig {
    fn default() -> Self {
        Self {
            e0: E0Preset::OnePlusCos,
            nodes: 256,
            grid: GridKind::Midpoint,
            times: vec![1.0, 2.0, 4.0, 8.0],
            dt: DEFAULT_DT,
        }
    }
}

/// Relaxation of `Ē` and of `𝓡` towards `T` and `β̂T/2`, `T` the conserved mass.
pub fn thermalization_test(cfg: &ThermalizationConfig) -> Result<SweepReport> {
    cfg.e0.validate()?;
    require(!cfg.times.is_empty() && cfg.times.windows(2).all(|w| w[1] > w[0]) && cfg.times[0] > 0.0, || {
        "times must be positive and increasing".into()
    })?;
    let grid = KineticGrid::new(cfg.grid, cfg.nodes)?;
    let mut state = KineticState::new(grid.clone(), cfg.e0.values(grid.ks()))?;
    let temp = state.mass();
    let mut report = SweepReport::new("thermalization", cfg, 0, 0);
    let mut sup_r = Vec::new();
    let mut l1 = Vec::new();
    for &t in &cfg.times {
        state = evolve(&state, t - state.t, cfg.dt)?;
        let rate = scattering_rate(&state);
        let s = rate
            .iter()
            .zip(grid.beta())
            .map(|(r, b)| (r - 0.5 * b * temp).abs())
            .fold(0.0, f64::max);
        let d = state.l1_distance_to_equilibrium();
        report.row(ReportRow::new("sup_rate_deviation", s, 0.0, 0.0).at(t));
        report.row(ReportRow::new("l1_distance", d, 0.0, 0.0).at(t));
        sup_r.push(s);
        l1.push(d);
    }
    report.row(ReportRow::new("temperature", temp, 0.0, temp));
    let flat = matches!(cfg.e0, E0Preset::Constant { .. });
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.3e}")).collect::<Vec<_>>().join(", ");
    if flat {
        let worst = sup_r.iter().chain(&l1).fold(0.0f64, |a, b| a.max(*b));
        report.check("equilibrium", Verdict::from_bool(worst <= 1e-10), format!("max deviation {worst:.2e} (limit 1e-10)"));
    } else {
        report.check("rate_decreasing", Verdict::from_bool(strictly_decreasing(&sup_r)), fmt(&sup_r));
        report.check("l1_decreasing", Verdict::from_bool(strictly_decreasing(&l1)), fmt(&l1));
    }
    Ok(report)
}
