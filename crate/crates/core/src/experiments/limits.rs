//! ε-sweeps against the kinetic and Ornstein-Uhlenbeck limits.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{require, Result};
use crate::experiments::ensemble::{run_ensemble, EnsembleConfig, Snapshot};
use crate::experiments::init::{E0Preset, InitSpec, LocalizedProfile};
use crate::experiments::report::{strictly_decreasing, ReportRow, SweepReport, Verdict};
use crate::kinetic::{evolve, propagate_signed, KineticGrid, KineticState, KineticTrajectory, DEFAULT_DT};
use crate::model::{beta_hat, ModelParams};
use crate::moments::HomogeneousMoments;
use crate::ou::{increment_variance, ou_mean, ou_sample_exact, ou_second_moment, OuParams};
use crate::rng::path_rng;
use crate::spectral::ModeGrid;
use crate::stats::{complex_correlation, complex_mean_se, mean_se, MeanSe};

#[derive(Serialize)]
struct Provenance<'a, C> {
    model: &'a ModelParams,
    config: &'a C,
}

fn check_epsilons(eps: &[f64]) -> Result<()> {
    require(!eps.is_empty(), || "epsilon sweep is empty".into())?;
    require(eps.iter().all(|e| *e > 0.0 && *e <= 1.0), || "noise.epsilon must be in (0,1]".into())?;
    require(eps.windows(2).all(|w| w[1] < w[0]), || "epsilon sweep must be strictly decreasing".into())
}

/// Verdict on `|errors|` shrinking along the sweep.
///
/// A violation within two combined standard errors is `Inconclusive` (the
/// ensemble is too small to resolve the difference), otherwise `Fail`.
pub fn decreasing_verdict(errors: &[MeanSe]) -> (Verdict, String) {
    let abs: Vec<f64> = errors.iter().map(|e| e.mean.abs()).collect();
    let listing = errors
        .iter()
        .map(|e| format!("{:.3e}±{:.1e}", e.mean.abs(), e.se))
        .collect::<Vec<_>>()
        .join(" > ");
    if strictly_decreasing(&abs) {
        return (Verdict::Pass, listing);
    }
    let significant = errors
        .windows(2)
        .any(|w| w[1].mean.abs() - w[0].mean.abs() > 2.0 * w[0].se.hypot(w[1].se));
    if significant {
        (Verdict::Fail, format!("{listing}; not decreasing"))
    } else {
        (
            Verdict::Inconclusive,
            format!("{listing}; differences are within the standard errors, increase paths"),
        )
    }
}

/// Named test functions paired against `Ŝ`.
fn kinetic_test_functions(ks: &[f64]) -> Vec<(&'static str, Vec<f64>)> {
    vec![
        ("1", vec![1.0; ks.len()]),
        ("cos", ks.iter().map(|k| (2.0 * PI * k).cos()).collect()),
        ("sin2", ks.iter().map(|k| (PI * k).sin().powi(2)).collect()),
    ]
}

fn dot_mean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KineticLimitConfig {
    pub init: InitSpec,
    pub n: usize,
    pub epsilons: Vec<f64>,
    pub t: f64,
    pub paths: usize,
    pub seed: u64,
    pub dt: f64,
}

impl Default for KineticLimitConfig {
    fn default() -> Self {
        Self {
            init: InitSpec::Homogeneous { e0: E0Preset::OnePlusCos },
            n: 256,
            epsilons: vec![0.2, 0.1, 0.05],
            t: 1.0,
            paths: 2000,
            seed: 20261015,
            dt: 0.01,
        }
    }
}

/// Homogeneous data: `⟨Ŝ^ε(t) - Ē(t), f⟩` along the sweep.
///
/// The estimator subtracts `⟨Ŝ_m(0), P_t f⟩` path by path, which has known mean
/// `⟨E0, P_t f⟩ = ⟨Ē(t), f⟩`; this removes the initial-data fluctuation and
/// makes the `f = 1` pairing exact (energy is conserved path by path). Each row
/// also carries the exact finite-ε value from the second-moment closure.
pub fn kinetic_limit_test(params: &ModelParams, cfg: &KineticLimitConfig) -> Result<SweepReport> {
    check_epsilons(&cfg.epsilons)?;
    require(cfg.init.is_homogeneous(), || "kinetic limit test needs homogeneous initial data".into())?;
    require(cfg.t > 0.0, || "t must be positive".into())?;
    let n = cfg.n;
    let e0 = cfg.init.kinetic_initial(n)?;
    let grid = KineticGrid::lattice(n)?;
    let kin = evolve(&KineticState::new(grid.clone(), e0.clone())?, cfg.t, DEFAULT_DT)?;
    let fine = KineticGrid::lattice(2 * n)?;
    let kin_fine = evolve(
        &KineticState::new(fine.clone(), cfg.init.kinetic_initial(2 * n)?)?,
        cfg.t,
        DEFAULT_DT,
    )?;
    let fs = kinetic_test_functions(grid.ks());
    let fs_fine = kinetic_test_functions(fine.ks());
    let targets: Vec<f64> = fs.iter().map(|(_, f)| dot_mean(&kin.values, f)).collect();
    let quad: Vec<f64> = fs
        .iter()
        .zip(&fs_fine)
        .zip(&targets)
        .map(|(((_, _), (_, g)), t)| (t - dot_mean(&kin_fine.values, g)).abs())
        .collect();
    let propagated: Vec<Vec<f64>> = fs
        .iter()
        .map(|(_, f)| propagate_signed(&grid, f, cfg.t, DEFAULT_DT))
        .collect::<Result<_>>()?;

    let mut report = SweepReport::new("kinetic_limit", &Provenance { model: params, config: cfg }, cfg.seed, cfg.paths);
    let mut errors: Vec<Vec<MeanSe>> = vec![Vec::new(); fs.len()];
    let mut exact: Vec<Vec<f64>> = vec![Vec::new(); fs.len()];
    for &eps in &cfg.epsilons {
        let ens = EnsembleConfig {
            n,
            epsilon: eps,
            dt: cfg.dt,
            paths: cfg.paths,
            seed: cfg.seed,
        };
        let per_path = run_ensemble(params, &ens, &cfg.init, &[0.0, cfg.t], |_, s: &[Snapshot]| {
            let s0: Vec<f64> = s[0].field.mode_energies().iter().map(|v| v / n as f64).collect();
            let s1: Vec<f64> = s[1].field.mode_energies().iter().map(|v| v / n as f64).collect();
            let cv: Vec<f64> = fs
                .iter()
                .zip(&propagated)
                .map(|((_, f), g)| dot_mean(&s1, f) - dot_mean(&s0, g))
                .collect();
            (s1, cv)
        })?;
        let mut moments = HomogeneousMoments::new(params, &e0, eps)?;
        moments.evolve(cfg.t, eps / (10.0 * params.omega_max()))?;
        let s_exact = moments.s_hat();

        let ks = grid.ks();
        for j in 0..n {
            let col: Vec<f64> = per_path.iter().map(|(s, _)| s[j]).collect();
            let ms = mean_se(&col);
            report.row(ReportRow::new("s_hat", ms.mean, ms.se, kin.values[j]).eps(eps).at(cfg.t).mode(ks[j]));
        }
        for (i, (name, f)) in fs.iter().enumerate() {
            let col: Vec<f64> = per_path.iter().map(|(_, cv)| cv[i]).collect();
            let ms = mean_se(&col);
            let bias = dot_mean(&s_exact, f) - targets[i];
            report.row(ReportRow::new(format!("error[{name}]"), ms.mean, ms.se, bias).eps(eps).at(cfg.t));
            errors[i].push(ms);
            exact[i].push(bias.abs());
        }
    }

    let last = cfg.epsilons.len() - 1;
    for (i, (name, _)) in fs.iter().enumerate() {
        report.row(ReportRow::new(format!("quadrature_error[{name}]"), quad[i], 0.0, 0.0).at(cfg.t));
        if *name == "1" {
            let worst = errors[i].iter().map(|e| e.mean.abs()).fold(0.0, f64::max);
            report.check(
                "conserved[1]",
                Verdict::from_bool(worst <= 1e-10),
                format!("max |error| {worst:.2e} (limit 1e-10)"),
            );
            continue;
        }
        let (v, detail) = decreasing_verdict(&errors[i]);
        report.check(&format!("decreasing[{name}]"), v, detail);
        let e = errors[i][last];
        let bound = 3.0 * (e.se + quad[i]);
        report.check(
            &format!("final[{name}]"),
            Verdict::from_bool(e.mean.abs() < bound),
            format!("|error| {:.3e} < 3(SE + quadrature) = {bound:.3e}", e.mean.abs()),
        );
        let listing = exact[i].iter().map(|b| format!("{b:.3e}")).collect::<Vec<_>>().join(" > ");
        report.check(
            &format!("exact_decreasing[{name}]"),
            Verdict::from_bool(strictly_decreasing(&exact[i])),
            format!("second-moment closure |bias| {listing}"),
        );
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizedLimitConfig {
    pub profile: LocalizedProfile,
    pub n: usize,
    pub epsilons: Vec<f64>,
    /// Macroscopic sampling times, starting at 0.
    pub t_grid: Vec<f64>,
    /// Quadratic variation uses every `qv_stride`-th sampling time.
    pub qv_stride: usize,
    /// Modes followed pointwise (rounded to the nearest lattice mode). A pair
    /// whose group velocity matches that across the bump keeps a stationary
    /// noise phase and decorrelates slowly in `ε`; the defaults sit where `ω'`
    /// differs from its value on the bump.
    pub modes: Vec<f64>,
    pub paths: usize,
    pub seed: u64,
    pub dt: f64,
}

impl Default for LocalizedLimitConfig {
    fn default() -> Self {
        Self {
            profile: LocalizedProfile::default(),
            n: 256,
            epsilons: vec![0.2, 0.1, 0.05],
            t_grid: (0..=20).map(|i| i as f64 * 0.05).collect(),
            qv_stride: 5,
            modes: vec![0.25, 0.4, 0.5],
            paths: 2000,
            seed: 20261015,
            dt: 0.01,
        }
    }
}

struct PathRecord {
    /// `ψ̃(t_i, k)` per followed mode.
    modes: Vec<Vec<Complex64>>,
    weak_sup: f64,
    single_sup: f64,
}

/// Reports of the pointwise (Ornstein-Uhlenbeck) and weak (deterministic)
/// limits for localized data, computed from one set of ensembles.
pub struct LocalizedReports {
    pub ou: SweepReport,
    pub weak: SweepReport,
}

/// `f(k) = 1 + cos 2π(k - k₀)`, a trigonometric polynomial centred on the profile.
fn weak_test_function(ks: &[f64], center: f64) -> Vec<f64> {
    ks.iter().map(|k| 1.0 + (2.0 * PI * (k - center)).cos()).collect()
}

pub fn localized_limit_tests(params: &ModelParams, cfg: &LocalizedLimitConfig) -> Result<LocalizedReports> {
    check_epsilons(&cfg.epsilons)?;
    cfg.profile.validate()?;
    require(cfg.t_grid.len() >= 2 && cfg.t_grid[0] == 0.0, || "t_grid must start at 0 and have two points".into())?;
    require(cfg.qv_stride >= 1 && (cfg.t_grid.len() - 1) % cfg.qv_stride == 0, || {
        "qv_stride must divide the number of sampling intervals".into()
    })?;
    require(!cfg.modes.is_empty(), || "no modes to follow".into())?;
    let n = cfg.n;
    let grid = ModeGrid::new(n)?;
    let ks = grid.ks();
    let idx: Vec<usize> = cfg.modes.iter().map(|&k| grid.nearest(k)).collect();
    require(
        idx.iter().enumerate().all(|(i, a)| idx[..i].iter().all(|b| b != a)),
        || "followed modes collapse onto the same lattice mode".into(),
    )?;
    let t_end = *cfg.t_grid.last().expect("nonempty");
    let init = InitSpec::Localized { profile: cfg.profile };
    let e0 = init.kinetic_initial(n)?;
    let traj = &KineticTrajectory::solve(&KineticState::new(KineticGrid::lattice(n)?, e0)?, t_end, DEFAULT_DT)?;
    let psi0: Vec<Complex64> = ks.iter().map(|&k| cfg.profile.eval(k)).collect();
    let f = weak_test_function(&ks, cfg.profile.center);
    let single = grid.nearest(cfg.profile.center);
    let beta: Vec<f64> = ks.iter().map(|&k| beta_hat(k)).collect();
    let mean_field = |t: f64, j: usize| psi0[j] * (-0.25 * beta[j] * t).exp();

    let ou_params: Vec<_> = idx
        .iter()
        .map(|&j| {
            let k = ks[j];
            OuParams {
                k,
                beta_k: beta[j],
                rate: move |s: f64| traj.rate_at(s, k),
                psi0: psi0[j],
            }
        })
        .collect();
    let coarse: Vec<f64> = cfg.t_grid.iter().copied().step_by(cfg.qv_stride).collect();
    let qv_oracle: Vec<f64> = ou_params
        .iter()
        .map(|p| coarse.windows(2).map(|w| increment_variance(p.beta_k, &p.rate, w[0], w[1])).sum())
        .collect();
    let rate_integral: Vec<f64> = ou_params
        .iter()
        .map(|p| crate::ou::simpson(&p.rate, 0.0, t_end, crate::ou::SIMPSON_INTERVALS))
        .collect();

    // the single-mode statistic tends to E sup|OU - mean|, estimated from exact OU paths
    let p = OuParams {
        k: ks[single],
        beta_k: beta[single],
        rate: |s: f64| traj.rate_at(s, ks[single]),
        psi0: psi0[single],
    };
    let mut reference = Vec::with_capacity(cfg.paths);
    for m in 0..cfg.paths {
        let path = ou_sample_exact(&p, &cfg.t_grid, &mut path_rng(cfg.seed ^ 0x5eed, m as u64))?;
        let sup = path
            .iter()
            .zip(&cfg.t_grid)
            .map(|(z, &t)| (z - ou_mean(&p, t)).norm())
            .fold(0.0, f64::max);
        reference.push(sup);
    }
    let r = mean_se(&reference);
    let mut ou = SweepReport::new("ou_limit", &Provenance { model: params, config: cfg }, cfg.seed, cfg.paths);
    let mut weak = SweepReport::new("weak_limit", &Provenance { model: params, config: cfg }, cfg.seed, cfg.paths);
    let mut weak_stats = Vec::new();
    let mut single_stats = Vec::new();
    let mut worst_last = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let last = cfg.epsilons.len() - 1;
    for (e_i, &eps) in cfg.epsilons.iter().enumerate() {
        let ens = EnsembleConfig {
            n,
            epsilon: eps,
            dt: cfg.dt,
            paths: cfg.paths,
            seed: cfg.seed,
        };
        let records = run_ensemble(params, &ens, &init, &cfg.t_grid, |_, snaps: &[Snapshot]| {
            let mut weak_sup: f64 = 0.0;
            let mut single_sup: f64 = 0.0;
            for s in snaps {
                let v = &s.field.values;
                let pairing: Complex64 =
                    (0..n).map(|j| (v[j] - mean_field(s.t, j)) * f[j]).sum::<Complex64>() / n as f64;
                weak_sup = weak_sup.max(pairing.norm());
                single_sup = single_sup.max((v[single] - mean_field(s.t, single)).norm());
            }
            PathRecord {
                modes: idx.iter().map(|&j| snaps.iter().map(|s| s.field.values[j]).collect()).collect(),
                weak_sup,
                single_sup,
            }
        })?;

        let mut worst_mean: f64 = 0.0;
        let mut worst_second: f64 = 0.0;
        let mut worst_qv: f64 = 0.0;
        for (mi, p) in ou_params.iter().enumerate() {
            for (ti, &t) in cfg.t_grid.iter().enumerate().skip(1) {
                let z: Vec<Complex64> = records.iter().map(|r| r.modes[mi][ti]).collect();
                let m = complex_mean_se(&z);
                let target = ou_mean(p, t);
                let zm = (m.mean - target).norm() / m.se;
                worst_mean = worst_mean.max(zm);
                ou.row(ReportRow::new("mean_re", m.mean.re, m.se, target.re).eps(eps).at(t).mode(p.k));
                ou.row(ReportRow::new("mean_im", m.mean.im, m.se, target.im).eps(eps).at(t).mode(p.k));
                let sq: Vec<f64> = z.iter().map(|v| v.norm_sqr()).collect();
                let s = mean_se(&sq);
                let row = ReportRow::new("second_moment", s.mean, s.se, ou_second_moment(p, t)?).eps(eps).at(t).mode(p.k);
                worst_second = worst_second.max(row.z_score());
                ou.row(row);
            }
            let decay = (-0.25 * p.beta_k * (coarse[1] - coarse[0])).exp();
            let qv: Vec<f64> = records
                .iter()
                .map(|r| {
                    let path: Vec<Complex64> = r.modes[mi].iter().copied().step_by(cfg.qv_stride).collect();
                    path.windows(2).map(|w| (w[1] - w[0] * decay).norm_sqr()).sum()
                })
                .collect();
            let q = mean_se(&qv);
            let row = ReportRow::new("quadratic_variation", q.mean, q.se, qv_oracle[mi]).eps(eps).at(t_end).mode(p.k);
            worst_qv = worst_qv.max(row.z_score());
            ou.row(row);
            let raw: Vec<f64> = records
                .iter()
                .map(|r| {
                    let path: Vec<Complex64> = r.modes[mi].iter().copied().step_by(cfg.qv_stride).collect();
                    path.windows(2).map(|w| (w[1] - w[0]).norm_sqr()).sum()
                })
                .collect();
            let rq = mean_se(&raw);
            ou.row(ReportRow::new("raw_quadratic_variation", rq.mean, rq.se, rate_integral[mi]).eps(eps).at(t_end).mode(p.k));
        }

        let final_t = cfg.t_grid.len() - 1;
        let mut worst_corr: f64 = 0.0;
        for a in 0..idx.len() {
            for b in a + 1..idx.len() {
                let xa: Vec<Complex64> = records.iter().map(|r| r.modes[a][final_t]).collect();
                let xb: Vec<Complex64> = records.iter().map(|r| r.modes[b][final_t]).collect();
                let c = complex_correlation(&xa, &xb).map_or(f64::NAN, |c| c.norm());
                worst_corr = worst_corr.max(c);
                let mut row = ReportRow::new(format!("correlation[{:.4},{:.4}]", ks[idx[a]], ks[idx[b]]), c, 0.0, 0.0);
                row = row.eps(eps).at(t_end);
                ou.row(row);
            }
        }
        if e_i == last {
            worst_last = (worst_mean, worst_second, worst_qv, worst_corr);
        }

        let ws: Vec<f64> = records.iter().map(|r| r.weak_sup).collect();
        let ss: Vec<f64> = records.iter().map(|r| r.single_sup).collect();
        let (w, s) = (mean_se(&ws), mean_se(&ss));
        weak.row(ReportRow::new("weak_sup", w.mean, w.se, 0.0).eps(eps));
        weak.row(ReportRow::new("single_mode_sup", s.mean, s.se, r.mean).eps(eps).mode(ks[single]));
        weak_stats.push(w);
        single_stats.push(s);
    }

    let (zm, zs, zq, corr) = worst_last;
    let eps_min = cfg.epsilons[last];
    let corr_bound = 3.0 / (cfg.paths as f64).sqrt();
    ou.check("mean", Verdict::from_bool(zm <= 4.0), format!("max |z| {zm:.2} at epsilon {eps_min} (limit 4)"));
    ou.check("second_moment", Verdict::from_bool(zs <= 4.0), format!("max |z| {zs:.2} at epsilon {eps_min} (limit 4)"));
    ou.check("quadratic_variation", Verdict::from_bool(zq <= 4.0), format!("max |z| {zq:.2} at epsilon {eps_min} (limit 4)"));
    ou.check(
        "independence",
        Verdict::from_bool(corr <= corr_bound),
        format!("max |corr| {corr:.4} at epsilon {eps_min} (limit 3/sqrt(M) = {corr_bound:.4})"),
    );

    weak.row(ReportRow::new("single_mode_sup_limit", r.mean, r.se, r.mean).mode(ks[single]));

    let (v, detail) = decreasing_verdict(&weak_stats);
    weak.check("weak_decreasing", v, detail);
    let (first, last_s) = (single_stats[0], single_stats[last]);
    let tol = 4.0 * first.se.hypot(last_s.se);
    weak.check(
        "single_mode_control",
        Verdict::from_bool(last_s.mean >= first.mean - tol),
        format!(
            "E sup|psi~ - psi_bar| at k = {:.4}: {:.4} -> {:.4} (no significant decrease; OU limit {:.4})",
            ks[single], first.mean, last_s.mean, r.mean
        ),
    );
    Ok(LocalizedReports { ou, weak })
}

pub fn ou_limit_test(params: &ModelParams, cfg: &LocalizedLimitConfig) -> Result<SweepReport> {
    localized_limit_tests(params, cfg).map(|r| r.ou)
}

pub fn weak_limit_test(params: &ModelParams, cfg: &LocalizedLimitConfig) -> Result<SweepReport> {
    localized_limit_tests(params, cfg).map(|r| r.weak)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ms(mean: f64, se: f64) -> MeanSe {
        MeanSe { mean, se }
    }

    #[test]
    fn decreasing_verdicts() {
        assert_eq!(decreasing_verdict(&[ms(3.0, 0.1), ms(-2.0, 0.1), ms(1.0, 0.1)]).0, Verdict::Pass);
        assert_eq!(decreasing_verdict(&[ms(1.0, 0.1), ms(2.0, 0.1)]).0, Verdict::Fail);
        assert_eq!(decreasing_verdict(&[ms(1.0, 0.5), ms(1.2, 0.5)]).0, Verdict::Inconclusive);
    }

    #[test]
    fn small_kinetic_sweep_runs() {
        let cfg = KineticLimitConfig {
            n: 16,
            epsilons: vec![0.5, 0.25],
            t: 0.25,
            paths: 40,
            dt: 0.05,
            ..Default::default()
        };
        let r = kinetic_limit_test(&ModelParams::default(), &cfg).unwrap();
        assert_eq!(r.find("conserved[1]").unwrap().verdict, Verdict::Pass);
        assert_eq!(r.rows.iter().filter(|r| r.observable == "s_hat").count(), 32);
        assert!(kinetic_limit_test(
            &ModelParams::default(),
            &KineticLimitConfig {
                epsilons: vec![0.1, 0.2],
                ..cfg.clone()
            }
        )
        .is_err());
        assert!(kinetic_limit_test(
            &ModelParams::default(),
            &KineticLimitConfig {
                init: InitSpec::Localized {
                    profile: LocalizedProfile::default()
                },
                ..cfg
            }
        )
        .is_err());
    }

    #[test]
    fn small_localized_sweep_runs() {
        let cfg = LocalizedLimitConfig {
            n: 32,
            epsilons: vec![0.5, 0.25],
            t_grid: vec![0.0, 0.25, 0.5],
            qv_stride: 1,
            paths: 30,
            dt: 0.05,
            ..Default::default()
        };
        let r = localized_limit_tests(&ModelParams::default(), &cfg).unwrap();
        for name in ["mean", "second_moment", "quadratic_variation", "independence"] {
            assert!(r.ou.find(name).is_some(), "{name}");
        }
        assert!(r.weak.find("weak_decreasing").is_some());
        assert!(localized_limit_tests(
            &ModelParams::default(),
            &LocalizedLimitConfig {
                qv_stride: 3,
                ..cfg.clone()
            }
        )
        .is_err());
        assert!(localized_limit_tests(
            &ModelParams::default(),
            &LocalizedLimitConfig {
                modes: vec![0.25, 0.251],
                ..cfg
            }
        )
        .is_err());
    }
}
