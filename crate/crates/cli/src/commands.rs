//! Subcommand bodies. Each returns the files to write and, for verification
//! runs, the verdicts that decide the exit code.

use anyhow::{bail, Result};
use lattice_kinetic::chain::{EulerMaruyamaIntegrator, Scheme, SimConfig};
use lattice_kinetic::experiments::checks::{
    conservation_test, covariance_oracle_test, gibbs_invariance_test, thermalization_test, ConservationConfig,
    CovarianceOracleConfig, GibbsConfig, ThermalizationConfig,
};
use lattice_kinetic::experiments::ensemble::commensurate_step;
use lattice_kinetic::experiments::{
    kinetic_limit_test, localized_limit_tests, make_initial, run_ensemble, EnsembleConfig, InitSpec,
    KineticLimitConfig, LocalizedLimitConfig, Snapshot, SweepReport, Verdict,
};
use lattice_kinetic::kinetic::{KineticGrid, KineticState, KineticTrajectory, DEFAULT_DT};
use lattice_kinetic::model::{beta_hat, beta_hat_series, kernel_identity_table, midpoint_grid, resonance_scan};
use lattice_kinetic::moments::{evolve_covariance, predicted_mode_energies, CovarianceState, HomogeneousMoments};
use lattice_kinetic::ou::{ou_mean, ou_sample_exact, ou_second_moment, OuParams};
use lattice_kinetic::rng::path_rng;
use lattice_kinetic::spectral::ModeGrid;
use lattice_kinetic::stats::{complex_mean_se, mean_se};
use lattice_kinetic::wavefield::to_wave;
use rayon::prelude::*;

use crate::config::{Format, RunConfig, SweepTest};
use crate::output::{file_name, Table};

pub struct CommandOutput {
    pub files: Vec<(String, Vec<u8>)>,
    pub verdicts: Vec<Verdict>,
    /// Printed to stdout.
    pub summary: String,
}

impl CommandOutput {
    fn new() -> Self {
        Self {
            files: Vec::new(),
            verdicts: Vec::new(),
            summary: String::new(),
        }
    }

    fn table(&mut self, stem: &str, table: &Table, format: Format) -> Result<()> {
        self.files.push((file_name(stem, format), table.encode(format)?));
        Ok(())
    }

    fn report(&mut self, stem: &str, report: &SweepReport) -> Result<()> {
        let mut csv = Vec::new();
        report.write_csv(&mut csv)?;
        self.files.push((format!("{stem}.csv"), csv));
        self.files.push((format!("{stem}.json"), report.to_json().into_bytes()));
        self.summary.push_str(&report.summary());
        self.verdicts.push(report.verdict());
        Ok(())
    }

    pub fn failed(&self) -> bool {
        self.verdicts.contains(&Verdict::Fail)
    }
}

pub fn model_check(cfg: &RunConfig) -> Result<CommandOutput> {
    let params = cfg.model()?;
    let mut out = CommandOutput::new();
    let nodes = midpoint_grid(256);
    let mut kernel = Table::new(&["k", "beta_hat", "beta_hat_series", "two_int_r", "residual"]);
    let mut worst_kernel: f64 = 0.0;
    let mut worst_series: f64 = 0.0;
    for row in kernel_identity_table(&nodes, 256) {
        let series = beta_hat_series(row.k);
        worst_kernel = worst_kernel.max(row.residual);
        worst_series = worst_series.max((series - row.beta_hat).abs());
        kernel.push(vec![row.k, row.beta_hat, series, row.two_int_r, row.residual]);
    }
    // the closed form against the series on a finer grid
    for i in 0..10_000 {
        let k = -0.5 + i as f64 / 10_000.0;
        worst_series = worst_series.max((beta_hat(k) - beta_hat_series(k)).abs());
    }
    out.table("kernel_identity", &kernel, cfg.output.format)?;

    let mut dispersion = Table::new(&["k", "omega", "omega_prime", "beta_hat"]);
    for k in ModeGrid::new(cfg.lattice.n)?.ks() {
        dispersion.push(vec![k, params.omega(k), params.omega_prime(k), beta_hat(k)]);
    }
    out.table("dispersion", &dispersion, cfg.output.format)?;

    let scan = resonance_scan(&params, 0.13, 0.37, 1e-2, 100_000)?;
    let mut resonance = Table::new(&["tol", "fraction"]);
    for (t, f) in scan.tolerances.iter().zip(&scan.fractions) {
        resonance.push(vec![*t, *f]);
    }
    out.table("resonance", &resonance, cfg.output.format)?;

    let kernel_ok = worst_kernel <= 1e-10;
    let series_ok = worst_series <= 1e-12;
    out.verdicts.push(Verdict::from_bool(kernel_ok && series_ok));
    out.summary = format!(
        "{:<12} kernel identity: max residual {worst_kernel:.2e} (limit 1e-10)\n\
         {:<12} beta_hat closed form vs series: max difference {worst_series:.2e} (limit 1e-12)\n\
         resonance fractions {:?}, slope {:.3}{}\n",
        Verdict::from_bool(kernel_ok).to_string(),
        Verdict::from_bool(series_ok).to_string(),
        scan.fractions,
        scan.slope,
        if scan.resonant { ", RESONANT dispersion" } else { "" }
    );
    Ok(out)
}

/// Per-path observables at one snapshot: mode energies `|ψ̂|²/N` and total energy.
fn observe(fields: &[(f64, Vec<f64>)]) -> Vec<(Vec<f64>, f64)> {
    fields
        .iter()
        .map(|(_, e)| {
            let n = e.len() as f64;
            let s: Vec<f64> = e.iter().map(|v| v / n).collect();
            let total = s.iter().sum::<f64>() / n;
            (s, total)
        })
        .collect()
}

fn simulate_paths(cfg: &RunConfig, init: &InitSpec) -> Result<Vec<Vec<(Vec<f64>, f64)>>> {
    let params = cfg.model()?;
    let times = cfg.snapshot_times();
    let eps = cfg.noise.epsilon;
    let n = cfg.lattice.n;
    match cfg.noise.scheme {
        Scheme::Splitting => {
            let ens = EnsembleConfig {
                n,
                epsilon: eps,
                dt: cfg.noise.dt,
                paths: cfg.run.ensemble,
                seed: cfg.run.seed,
            };
            Ok(run_ensemble(&params, &ens, init, &times, |_, snaps: &[Snapshot]| {
                let fields: Vec<(f64, Vec<f64>)> = snaps.iter().map(|s| (s.t, s.field.mode_energies())).collect();
                observe(&fields)
            })?)
        }
        Scheme::EulerMaruyama => {
            let (h, counts) = commensurate_step(&times, eps, cfg.noise.dt)?;
            (0..cfg.run.ensemble)
                .into_par_iter()
                .map(|m| -> Result<_> {
                    let mut rng = path_rng(cfg.run.seed, m as u64);
                    let state = make_initial(init, &params, n, &mut rng)?;
                    let sim = SimConfig {
                        dt: h,
                        trajectory_index: m as u64,
                        ..cfg.sim_config()
                    };
                    let mut integ = EulerMaruyamaIntegrator::new(&params, &sim, state)?;
                    let mut fields = Vec::with_capacity(times.len());
                    for (i, &t) in times.iter().enumerate() {
                        if i > 0 {
                            integ.advance(counts[i - 1], &mut rng)?;
                        }
                        fields.push((t, to_wave(integ.state(), &params, eps).mode_energies()));
                    }
                    Ok(observe(&fields))
                })
                .collect()
        }
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<CommandOutput> {
    let init = cfg.init_spec()?;
    let times = cfg.snapshot_times();
    let paths = simulate_paths(cfg, &init)?;
    let ks = ModeGrid::new(cfg.lattice.n)?.ks();
    let mut spectrum = Table::new(&["t", "k", "s_hat", "se"]);
    let mut energy = Table::new(&["t", "energy", "se"]);
    for (i, &t) in times.iter().enumerate() {
        for (j, &k) in ks.iter().enumerate() {
            let ms = mean_se(&paths.iter().map(|p| p[i].0[j]).collect::<Vec<_>>());
            spectrum.push(vec![t, k, ms.mean, ms.se]);
        }
        let ms = mean_se(&paths.iter().map(|p| p[i].1).collect::<Vec<_>>());
        energy.push(vec![t, ms.mean, ms.se]);
    }
    let mut out = CommandOutput::new();
    out.table("spectrum", &spectrum, cfg.output.format)?;
    out.table("energy", &energy, cfg.output.format)?;
    let first = &energy.rows[0];
    let last = &energy.rows[energy.rows.len() - 1];
    out.summary = format!(
        "simulated {} paths to t = {}: mean spectral energy {:.6} -> {:.6} (SE {:.1e})\n",
        cfg.run.ensemble, cfg.run.t_end, first[1], last[1], last[2]
    );
    Ok(out)
}

fn kinetic_trajectory(cfg: &RunConfig, init: &InitSpec) -> Result<KineticTrajectory> {
    let grid = KineticGrid::lattice(cfg.lattice.n)?;
    let state = KineticState::new(grid, init.kinetic_initial(cfg.lattice.n)?)?;
    Ok(KineticTrajectory::solve(&state, cfg.run.t_end, DEFAULT_DT)?)
}

pub fn kinetic(cfg: &RunConfig) -> Result<CommandOutput> {
    let init = cfg.init_spec()?;
    let traj = kinetic_trajectory(cfg, &init)?;
    let mut table = Table::new(&["t", "k", "energy", "rate"]);
    let mut masses = Vec::new();
    for t in cfg.snapshot_times() {
        let state = traj.state_at(t);
        masses.push(state.mass());
        for (j, &k) in state.grid.ks().iter().enumerate() {
            table.push(vec![t, k, state.values[j], traj.rate_at(t, k)]);
        }
    }
    let mut out = CommandOutput::new();
    out.table("kinetic", &table, cfg.output.format)?;
    let drift = masses.iter().map(|m| (m - masses[0]).abs()).fold(0.0, f64::max);
    out.summary = format!("kinetic solution to t = {}: mass {:.12} (max drift {drift:.2e})\n", cfg.run.t_end, masses[0]);
    Ok(out)
}

pub fn ou(cfg: &RunConfig) -> Result<CommandOutput> {
    let init = cfg.init_spec()?;
    let InitSpec::Localized { profile } = init else {
        bail!("the ou subcommand needs init.kind = localized");
    };
    if cfg.sweep.modes.is_empty() {
        bail!("sweep.modes lists no modes to follow");
    }
    let traj = kinetic_trajectory(cfg, &init)?;
    let grid = ModeGrid::new(cfg.lattice.n)?;
    let times = cfg.snapshot_times();
    let mut table = Table::new(&[
        "t",
        "k",
        "mean_re",
        "mean_im",
        "second_moment",
        "sample_mean_re",
        "sample_mean_im",
        "sample_second_moment",
        "sample_second_moment_se",
    ]);
    for (mi, &k_req) in cfg.sweep.modes.iter().enumerate() {
        let k = grid.k(grid.nearest(k_req));
        let params = OuParams {
            k,
            beta_k: beta_hat(k),
            rate: |s: f64| traj.rate_at(s, k),
            psi0: profile.eval(k),
        };
        let samples = (0..cfg.run.ensemble)
            .into_par_iter()
            .map(|m| ou_sample_exact(&params, &times, &mut path_rng(cfg.run.seed ^ mi as u64, m as u64)))
            .collect::<lattice_kinetic::Result<Vec<_>>>()?;
        for (i, &t) in times.iter().enumerate() {
            let z: Vec<_> = samples.iter().map(|p| p[i]).collect();
            let mean = complex_mean_se(&z);
            let second = mean_se(&z.iter().map(|v| v.norm_sqr()).collect::<Vec<_>>());
            let exact = ou_mean(&params, t);
            table.push(vec![
                t,
                k,
                exact.re,
                exact.im,
                ou_second_moment(&params, t)?,
                mean.mean.re,
                mean.mean.im,
                second.mean,
                second.se,
            ]);
        }
    }
    let mut out = CommandOutput::new();
    out.table("ou", &table, cfg.output.format)?;
    out.summary = format!(
        "limiting OU processes for {} modes, {} exact sample paths each\n",
        cfg.sweep.modes.len(),
        cfg.run.ensemble
    );
    Ok(out)
}

pub fn oracle(cfg: &RunConfig) -> Result<CommandOutput> {
    let params = cfg.model()?;
    let init = cfg.init_spec()?;
    let n = cfg.lattice.n;
    let eps = cfg.noise.epsilon;
    let ks = ModeGrid::new(n)?.ks();
    let ode_dt = eps / (10.0 * params.omega_max());
    let mut table = Table::new(&["t", "k", "s_hat"]);
    let times = cfg.snapshot_times();
    match &init {
        InitSpec::Localized { .. } => {
            let state = make_initial(&init, &params, n, &mut path_rng(cfg.run.seed, 0))?;
            let mut cov = CovarianceState::from_state(&state, eps)?;
            for &t in &times {
                if t > cov.t {
                    cov = evolve_covariance(&cov, &params, t - cov.t, ode_dt)?;
                }
                for (j, e) in predicted_mode_energies(&cov, &params).iter().enumerate() {
                    table.push(vec![t, ks[j], e / n as f64]);
                }
            }
        }
        _ => {
            let mut hm = HomogeneousMoments::new(&params, &init.kinetic_initial(n)?, eps)?;
            for &t in &times {
                if t > hm.time() {
                    hm.evolve(t - hm.time(), ode_dt)?;
                }
                for (j, s) in hm.s_hat().iter().enumerate() {
                    table.push(vec![t, ks[j], *s]);
                }
            }
        }
    }
    let mut out = CommandOutput::new();
    out.table("oracle", &table, cfg.output.format)?;
    out.summary = format!("exact second moments on {} modes at {} times\n", n, times.len());
    Ok(out)
}

pub fn sweep(cfg: &RunConfig) -> Result<CommandOutput> {
    let params = cfg.model()?;
    let init = cfg.init_spec()?;
    let r = &cfg.run;
    let mut out = CommandOutput::new();
    let temperature = match &init {
        InitSpec::Gibbs { temperature } => *temperature,
        _ => 1.0,
    };
    match cfg.sweep.test {
        SweepTest::Kinetic => {
            let c = KineticLimitConfig {
                init,
                n: cfg.lattice.n,
                epsilons: cfg.sweep.epsilons.clone(),
                t: r.t_end,
                paths: r.ensemble,
                seed: r.seed,
                dt: cfg.noise.dt,
            };
            out.report("kinetic_limit", &kinetic_limit_test(&params, &c)?)?;
        }
        SweepTest::Localized => {
            let InitSpec::Localized { profile } = init else {
                bail!("sweep.test = localized needs init.kind = localized");
            };
            let stride = ((0.25 / r.snapshot_dt).round() as usize).max(1);
            let c = LocalizedLimitConfig {
                profile,
                n: cfg.lattice.n,
                epsilons: cfg.sweep.epsilons.clone(),
                t_grid: cfg.snapshot_times(),
                qv_stride: stride,
                modes: cfg.sweep.modes.clone(),
                paths: r.ensemble,
                seed: r.seed,
                dt: cfg.noise.dt,
            };
            let reports = localized_limit_tests(&params, &c)?;
            out.report("ou_limit", &reports.ou)?;
            out.report("weak_limit", &reports.weak)?;
        }
        SweepTest::Gibbs => {
            let c = GibbsConfig {
                n: cfg.lattice.n,
                epsilon: cfg.noise.epsilon,
                t: r.t_end,
                temperature,
                paths: r.ensemble,
                seed: r.seed,
                dt: cfg.noise.dt,
            };
            out.report("gibbs_invariance", &gibbs_invariance_test(&params, &c)?)?;
        }
        SweepTest::Conservation => {
            let c = ConservationConfig {
                n: cfg.lattice.n,
                epsilon: cfg.noise.epsilon,
                dt: cfg.noise.dt,
                temperature,
                paths: r.ensemble,
                seed: r.seed,
                ..Default::default()
            };
            out.report("conservation", &conservation_test(&params, &c)?)?;
        }
        SweepTest::Covariance => {
            let Some(e0) = init.e0() else {
                bail!("sweep.test = covariance needs homogeneous initial data");
            };
            let c = CovarianceOracleConfig {
                n: cfg.lattice.n,
                epsilon: cfg.noise.epsilon,
                times: cfg.snapshot_times(),
                e0,
                paths: r.ensemble,
                seed: r.seed,
                dt: cfg.noise.dt,
            };
            out.report("covariance_oracle", &covariance_oracle_test(&params, &c)?)?;
        }
        SweepTest::Thermalization => {
            let Some(e0) = init.e0() else {
                bail!("sweep.test = thermalization needs homogeneous initial data");
            };
            let c = ThermalizationConfig {
                e0,
                nodes: cfg.lattice.n,
                times: cfg.snapshot_times().into_iter().skip(1).collect(),
                ..Default::default()
            };
            out.report("thermalization", &thermalization_test(&c)?)?;
        }
    }
    Ok(out)
}
