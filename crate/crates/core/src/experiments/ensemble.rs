//! Parallel ensembles of independent trajectories.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chain::{ChainState, SplittingIntegrator};
use crate::error::{require, Result};
use crate::experiments::init::{make_initial, InitSpec};
use crate::model::ModelParams;
use crate::rng::path_rng;
use crate::spectral::ModeGrid;
use crate::wavefield::{FieldKind, SpectralField, ZeroMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n: usize,
    pub epsilon: f64,
    /// Upper bound on the microscopic splitting step.
    pub dt: f64,
    pub paths: usize,
    pub seed: u64,
}

/// One trajectory at one sampling time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    /// Macroscopic time.
    pub t: f64,
    /// Compensated field `ψ̃`.
    pub field: SpectralField,
}

/// Largest step `≤ dt` that divides every microscopic interval of `times`,
/// with the step counts per interval.
pub fn commensurate_step(times: &[f64], epsilon: f64, dt: f64) -> Result<(f64, Vec<usize>)> {
    require(!times.is_empty() && times[0] == 0.0, || "sampling times must start at 0".into())?;
    require(times.windows(2).all(|w| w[1] > w[0]), || "sampling times must increase".into())?;
    require(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))?;
    require(epsilon > 0.0 && epsilon <= 1.0, || format!("epsilon must be in (0,1], got {epsilon}"))?;
    let spans: Vec<f64> = times.windows(2).map(|w| (w[1] - w[0]) / epsilon).collect();
    let Some(shortest) = spans.iter().copied().reduce(f64::min) else {
        return Ok((dt, Vec::new()));
    };
    let h = shortest / (shortest / dt * (1.0 - 1e-12)).ceil();
    let mut counts = Vec::with_capacity(spans.len());
    for s in &spans {
        let c = (s / h).round();
        require((s / h - c).abs() < 1e-6, || {
            format!("sampling interval {s} (microscopic) is not a multiple of the step {h}")
        })?;
        counts.push(c as usize);
    }
    Ok((h, counts))
}

/// Runs `cfg.paths` trajectories and maps each to `observe(index, snapshots)`.
///
/// Trajectory `m` uses the stream `(cfg.seed, m)` for both its initial datum and
/// its noise; the result is ordered by `m` and independent of the thread count.
pub fn run_ensemble<T, F>(
    params: &ModelParams,
    cfg: &EnsembleConfig,
    init: &InitSpec,
    times: &[f64],
    observe: F,
) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, &[Snapshot]) -> T + Sync,
{
    require(cfg.paths > 0, || "ensemble needs at least one path".into())?;
    init.validate()?;
    let (h, counts) = commensurate_step(times, cfg.epsilon, cfg.dt)?;
    let grid = ModeGrid::new(cfg.n)?;
    // fail early on bad (n, epsilon)
    SplittingIntegrator::new(params, cfg.n, cfg.epsilon, h)?;
    let omega: Vec<f64> = grid.ks().iter().map(|&k| params.omega(k)).collect();
    (0..cfg.paths)
        .into_par_iter()
        .map(|m| {
            let mut rng = path_rng(cfg.seed, m as u64);
            let state = make_initial(init, params, cfg.n, &mut rng)?;
            let mut integrator = SplittingIntegrator::new(params, cfg.n, cfg.epsilon, h)?;
            integrator.load(&state)?;
            let mut buf = vec![Complex64::new(0.0, 0.0); cfg.n];
            let mut snaps = Vec::with_capacity(times.len());
            for (i, &t) in times.iter().enumerate() {
                if i > 0 {
                    integrator.advance(counts[i - 1], &mut rng);
                }
                integrator.wave_fft_order(&mut buf);
                snaps.push(Snapshot {
                    t,
                    field: compensated_field(&grid, &omega, &buf, params, &mut integrator, t, cfg.epsilon),
                });
            }
            Ok(observe(m, &snaps))
        })
        .collect()
}

fn compensated_field(
    grid: &ModeGrid,
    omega: &[f64],
    fft_order: &[Complex64],
    params: &ModelParams,
    integrator: &mut SplittingIntegrator,
    t: f64,
    epsilon: f64,
) -> SpectralField {
    let phase_t = t / epsilon;
    let values = (0..grid.len())
        .map(|j| fft_order[grid.fft_index(j)] * Complex64::from_polar(1.0, omega[j] * phase_t))
        .collect();
    let zero_mode = (!params.is_pinned()).then(|| ZeroMode {
        q_hat: integrator.zero_mode_position(),
        p_hat: fft_order[0].im,
    });
    SpectralField {
        values,
        kind: FieldKind::Compensated,
        t,
        epsilon,
        zero_mode,
    }
}

/// Chain states of one trajectory at the microscopic times `k · stride · dt`.
pub fn trajectory_states(
    params: &ModelParams,
    cfg: &EnsembleConfig,
    init: &InitSpec,
    index: usize,
    stride: usize,
    samples: usize,
) -> Result<Vec<ChainState>> {
    let mut rng = path_rng(cfg.seed, index as u64);
    let state = make_initial(init, params, cfg.n, &mut rng)?;
    let mut integrator = SplittingIntegrator::new(params, cfg.n, cfg.epsilon, cfg.dt)?;
    integrator.load(&state)?;
    let mut out = vec![state];
    for _ in 0..samples {
        integrator.advance(stride, &mut rng);
        out.push(integrator.state());
    }
    Ok(out)
}
