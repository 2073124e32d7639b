//! Wave function of the chain and empirical correlation estimators.
//!
//! `ψ̂(k) = ω(k) q̂(k) + i p̂(k)` on the lattice modes `k_j = j/N - 1/2`, stored in
//! grid order. The Hamiltonian equals `(1/(2N)) Σ_j |ψ̂(k_j)|²`.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chain::ChainState;
use crate::error::{require, Result};
use crate::model::ModelParams;
use crate::spectral::{Dft, ModeGrid};
use crate::stats::{complex_mean_se, mean_se, pairwise_sum, ComplexMeanSe, MeanSe};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Raw,
    Compensated,
}

/// Position/momentum zero mode `(q̂(0), p̂(0))`, carried separately when
/// `ω(0) = 0` because the wave function does not see `q̂(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZeroMode {
    pub q_hat: f64,
    pub p_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralField {
    /// `ψ(k_j)` in grid order.
    pub values: Vec<Complex64>,
    pub kind: FieldKind,
    /// Macroscopic time `ε · t_micro`.
    pub t: f64,
    /// Noise strength; `0` marks a limit object with no microscopic clock.
    pub epsilon: f64,
    pub zero_mode: Option<ZeroMode>,
}

impl SpectralField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn grid(&self) -> ModeGrid {
        ModeGrid::new(self.values.len()).expect("field length is even")
    }

    /// `|ψ(k_j)|²` in grid order.
    pub fn mode_energies(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `(1/(2N)) Σ_j |ψ(k_j)|²`, which equals the Hamiltonian of the chain.
    pub fn spectral_energy(&self) -> f64 {
        pairwise_sum(&self.mode_energies()) / (2.0 * self.len() as f64)
    }

    /// Pairing `(1/N) Σ_j ψ(k_j) f(k_j)*`.
    pub fn pairing(&self, f: &[Complex64]) -> Complex64 {
        assert_eq!(f.len(), self.len());
        let terms: Vec<Complex64> = self.values.iter().zip(f).map(|(a, b)| a * b.conj()).collect();
        crate::stats::pairwise_sum_complex(&terms) / self.len() as f64
    }
}

/// Wave function of `state` with `t = epsilon · state.t`.
///
/// Pass `epsilon = 1` when the microscopic clock is the one of interest.
pub fn to_wave(state: &ChainState, params: &ModelParams, epsilon: f64) -> SpectralField {
    let n = state.len();
    let grid = ModeGrid::new(n).expect("chain states have even length");
    let mut dft = Dft::new(n);
    let mut qh = vec![Complex64::new(0.0, 0.0); n];
    let mut ph = vec![Complex64::new(0.0, 0.0); n];
    dft.forward_real(&state.q, &mut qh);
    dft.forward_real(&state.p, &mut ph);
    let values = (0..n)
        .map(|j| {
            let m = grid.fft_index(j);
            qh[m] * params.omega(grid.k(j)) + Complex64::new(0.0, 1.0) * ph[m]
        })
        .collect();
    let zero_mode = (!params.is_pinned()).then(|| ZeroMode {
        q_hat: qh[0].re,
        p_hat: ph[0].re,
    });
    SpectralField {
        values,
        kind: FieldKind::Raw,
        t: epsilon * state.t,
        epsilon,
        zero_mode,
    }
}

/// Inverse of [`to_wave`] for a raw field.
///
/// Any complex `ψ̂` yields real `(q, p)`: `q̂(k) = (ψ̂(k) + ψ̂*(-k)) / (2ω)` and
/// `p̂(k) = (ψ̂(k) - ψ̂*(-k)) / (2i)`. Where `ω = 0`, `q̂(0)` is taken from the
/// stored zero mode (or 0 if there is none).
pub fn from_wave(field: &SpectralField, params: &ModelParams) -> Result<ChainState> {
    require(field.kind == FieldKind::Raw, || "from_wave needs a raw field".into())?;
    let n = field.len();
    let grid = ModeGrid::new(n)?;
    let mut qh = vec![Complex64::new(0.0, 0.0); n];
    let mut ph = vec![Complex64::new(0.0, 0.0); n];
    for j in 0..n {
        let m = grid.fft_index(j);
        let a = field.values[j];
        let b = field.values[grid.negative(j)].conj();
        let w = params.omega(grid.k(j));
        qh[m] = if w > 0.0 {
            (a + b) / (2.0 * w)
        } else {
            Complex64::new(field.zero_mode.map_or(0.0, |z| z.q_hat), 0.0)
        };
        ph[m] = (a - b) / Complex64::new(0.0, 2.0);
    }
    let mut dft = Dft::new(n);
    dft.inverse(&mut qh);
    dft.inverse(&mut ph);
    let t = if field.epsilon > 0.0 { field.t / field.epsilon } else { 0.0 };
    ChainState::new(qh.iter().map(|z| z.re).collect(), ph.iter().map(|z| z.re).collect(), t)
}

/// `ψ̃(k) = ψ̂(k) exp(i ω(k) t / ε)` with `t` the macroscopic time of the field.
pub fn compensate(field: &SpectralField, params: &ModelParams) -> Result<SpectralField> {
    require(field.kind == FieldKind::Raw, || "field is already compensated".into())?;
    require(field.epsilon > 0.0, || format!("compensation needs epsilon > 0, got {}", field.epsilon))?;
    let grid = field.grid();
    let phase_t = field.t / field.epsilon;
    let values = field
        .values
        .iter()
        .enumerate()
        .map(|(j, z)| z * Complex64::from_polar(1.0, params.omega(grid.k(j)) * phase_t))
        .collect();
    Ok(SpectralField {
        values,
        kind: FieldKind::Compensated,
        ..field.clone()
    })
}

/// Circular Gaussian field `ψ̂(k_j) = E0^{1/2}(k_j) Σ_y ξ_y e_y(k_j)` from the
/// site variables `ξ_y` (iid, `E|ξ|² = 1` for a homogeneous law).
///
/// If `ω(0) = 0` the zero mode is replaced by `i √2 Im ψ̂(0)` and `q̂(0) = 0`,
/// which keeps `E|ψ̂(0)|²` while making `ψ̂(0)` a pure momentum.
pub fn gaussian_field(sqrt_e0: &[f64], xi: &[Complex64], params: &ModelParams) -> SpectralField {
    let n = xi.len();
    assert_eq!(sqrt_e0.len(), n);
    let grid = ModeGrid::new(n).expect("even lattice");
    let mut buf = xi.to_vec();
    Dft::new(n).forward(&mut buf);
    let mut values: Vec<Complex64> = (0..n).map(|j| buf[grid.fft_index(j)] * sqrt_e0[j]).collect();
    let zero_mode = (!params.is_pinned()).then(|| {
        let j0 = grid.zero_index();
        let p = std::f64::consts::SQRT_2 * values[j0].im;
        values[j0] = Complex64::new(0.0, p);
        ZeroMode { q_hat: 0.0, p_hat: p }
    });
    SpectralField {
        values,
        kind: FieldKind::Raw,
        t: 0.0,
        epsilon: 1.0,
        zero_mode,
    }
}

/// Site-space wave function `ψ_y = (1/N) Σ_j ψ̂(k_j) e^{2πi y k_j}`.
pub fn site_values(field: &SpectralField) -> Vec<Complex64> {
    let grid = field.grid();
    let mut buf = grid.to_fft_order(&field.values);
    Dft::new(field.len()).inverse(&mut buf);
    buf
}

/// Result of the homogeneity check on an ensemble.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneityAdvisory {
    /// `Σ_y (m_y - m̄)² / se_y²` over the site energies `m_y = E|ψ_y|²`.
    pub chi2: f64,
    pub threshold: f64,
    pub homogeneous: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub ks: Vec<f64>,
    /// `Ŝ(k_j) = E|ψ(k_j)|² / N`.
    pub s_hat: Vec<MeanSe>,
    /// `Ŷ(k_j) = E[ψ(k_j) ψ(-k_j)] / N`.
    pub y_hat: Vec<ComplexMeanSe>,
    pub homogeneity: HomogeneityAdvisory,
}

/// Mode-space correlation estimators over an ensemble.
///
/// `|ψ̂(k)|²` and `ψ̂(k)ψ̂(-k)` are invariant under lattice translations, so the
/// mode-space estimators already average over them. The advisory compares the
/// site energies `E|ψ_y|²` across sites with a χ² statistic and flags the
/// ensemble when it exceeds `(N-1) + 5√(2(N-1))`.
pub fn empirical_correlations(ensemble: &[SpectralField]) -> Result<Correlations> {
    require(ensemble.len() >= 2, || format!("need at least 2 fields, got {}", ensemble.len()))?;
    let n = ensemble[0].len();
    require(ensemble.iter().all(|f| f.len() == n), || "fields have different lengths".into())?;
    let grid = ModeGrid::new(n)?;
    let nf = n as f64;
    let mut s_hat = Vec::with_capacity(n);
    let mut y_hat = Vec::with_capacity(n);
    for j in 0..n {
        let jn = grid.negative(j);
        let s: Vec<f64> = ensemble.iter().map(|f| f.values[j].norm_sqr() / nf).collect();
        let y: Vec<Complex64> = ensemble.iter().map(|f| f.values[j] * f.values[jn] / nf).collect();
        s_hat.push(mean_se(&s));
        y_hat.push(complex_mean_se(&y));
    }
    let sites: Vec<Vec<Complex64>> = ensemble.iter().map(site_values).collect();
    let per_site: Vec<MeanSe> = (0..n)
        .map(|y| mean_se(&sites.iter().map(|s| s[y].norm_sqr()).collect::<Vec<_>>()))
        .collect();
    let grand = pairwise_sum(&per_site.iter().map(|m| m.mean).collect::<Vec<_>>()) / nf;
    let chi2 = per_site
        .iter()
        .map(|m| {
            if m.se > 0.0 {
                ((m.mean - grand) / m.se).powi(2)
            } else if (m.mean - grand).abs() > 1e-12 * grand.abs().max(1.0) {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    let dof = nf - 1.0;
    let threshold = dof + 5.0 * (2.0 * dof).sqrt();
    Ok(Correlations {
        ks: grid.ks(),
        s_hat,
        y_hat,
        homogeneity: HomogeneityAdvisory {
            chi2,
            threshold,
            homogeneous: chi2 <= threshold,
        },
    })
}

/// CSV `k,re_psi,im_psi,abs2_psi` with 17 significant digits.
pub fn write_field_csv<W: Write>(field: &SpectralField, mut out: W) -> io::Result<()> {
    writeln!(out, "k,re_psi,im_psi,abs2_psi")?;
    let grid = field.grid();
    for (j, z) in field.values.iter().enumerate() {
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", grid.k(j), z.re, z.im, z.norm_sqr())?;
    }
    Ok(())
}

/// CSV `k,S_hat,SE_S,re_Y_hat,im_Y_hat,SE_Y`.
pub fn write_correlations_csv<W: Write>(c: &Correlations, mut out: W) -> io::Result<()> {
    writeln!(out, "k,S_hat,SE_S,re_Y_hat,im_Y_hat,SE_Y")?;
    for ((k, s), y) in c.ks.iter().zip(&c.s_hat).zip(&c.y_hat) {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            k, s.mean, s.se, y.mean.re, y.mean.im, y.se
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::hamiltonian_energy;
    use crate::rng::{complex_normal, normal, path_rng};
    use approx::assert_abs_diff_eq;

    fn random_state(n: usize, seed: u64) -> ChainState {
        let mut rng = path_rng(seed, 0);
        let q = (0..n).map(|_| normal(&mut rng)).collect();
        let p = (0..n).map(|_| normal(&mut rng)).collect();
        ChainState::new(q, p, 0.0).unwrap()
    }

    #[test]
    fn trivial_fields() {
        let params = ModelParams::default();
        let zero = ChainState::zeros(16).unwrap();
        assert!(to_wave(&zero, &params, 1.0).values.iter().all(|z| z.norm() == 0.0));
        let mut s = ChainState::zeros(16).unwrap();
        s.p[0] = 1.0;
        for z in to_wave(&s, &params, 1.0).values {
            assert_abs_diff_eq!(z.re, 0.0, epsilon = 1e-15);
            assert_abs_diff_eq!(z.im, 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn parseval_and_round_trip() {
        for params in [ModelParams::default(), ModelParams::nearest_neighbour(0.0).unwrap()] {
            let s = random_state(32, 1);
            let w = to_wave(&s, &params, 1.0);
            let h = hamiltonian_energy(&s, &params);
            assert!((w.spectral_energy() - h).abs() <= 1e-10 * h);
            let back = from_wave(&w, &params).unwrap();
            for (a, b) in back.q.iter().zip(&s.q).chain(back.p.iter().zip(&s.p)) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn arbitrary_complex_field_maps_to_real_state() {
        let params = ModelParams::default();
        let mut rng = path_rng(2, 0);
        let values: Vec<Complex64> = (0..16).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let field = SpectralField {
            values: values.clone(),
            kind: FieldKind::Raw,
            t: 0.0,
            epsilon: 1.0,
            zero_mode: None,
        };
        let s = from_wave(&field, &params).unwrap();
        let w = to_wave(&s, &params, 1.0);
        for (a, b) in w.values.iter().zip(&values) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn compensation_is_unimodular() {
        let params = ModelParams::default();
        let mut s = random_state(16, 3);
        s.t = 12.5;
        let w = to_wave(&s, &params, 0.1);
        assert_abs_diff_eq!(w.t, 1.25, epsilon = 1e-15);
        let c = compensate(&w, &params).unwrap();
        for (a, b) in c.values.iter().zip(&w.values) {
            assert!((a.norm() - b.norm()).abs() <= 1e-14 * b.norm().max(1.0));
        }
        assert!(compensate(&c, &params).is_err());
        let mut at_zero = to_wave(&random_state(16, 4), &params, 0.1);
        at_zero.t = 0.0;
        assert_eq!(compensate(&at_zero, &params).unwrap().values, at_zero.values);
        let mut no_eps = at_zero.clone();
        no_eps.epsilon = 0.0;
        assert!(compensate(&no_eps, &params).is_err());
    }

    #[test]
    fn compensation_undoes_free_flight() {
        let params = ModelParams::default();
        let mut s = random_state(16, 5);
        let w0 = to_wave(&s, &params, 0.2);
        crate::chain::step_hamiltonian(&mut s, 3.3, &params);
        let c = compensate(&to_wave(&s, &params, 0.2), &params).unwrap();
        for (a, b) in c.values.iter().zip(&w0.values) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn identical_ensemble_has_zero_se() {
        let params = ModelParams::default();
        let w = to_wave(&random_state(16, 6), &params, 1.0);
        let c = empirical_correlations(&[w.clone(), w.clone(), w]).unwrap();
        assert!(c.s_hat.iter().all(|s| s.se == 0.0));
        assert!(c.y_hat.iter().all(|y| y.se == 0.0));
        assert!(empirical_correlations(&[]).is_err());
    }

    #[test]
    fn homogeneous_sampler_gives_flat_spectrum_and_no_pseudo_correlation() {
        let params = ModelParams::default();
        let n = 32;
        let sqrt_e0 = vec![1.0; n];
        let ensemble: Vec<SpectralField> = (0..2000)
            .map(|i| {
                let mut rng = path_rng(7, i);
                let xi: Vec<Complex64> = (0..n).map(|_| complex_normal(&mut rng, 1.0)).collect();
                gaussian_field(&sqrt_e0, &xi, &params)
            })
            .collect();
        let c = empirical_correlations(&ensemble).unwrap();
        for (s, y) in c.s_hat.iter().zip(&c.y_hat) {
            // 4 SE so that 64 simultaneous comparisons stay well clear of chance failures
            assert!(s.within(1.0, 4.0), "{s:?}");
            assert!(y.within(Complex64::new(0.0, 0.0), 4.0), "{y:?}");
        }
        assert!(c.homogeneity.homogeneous);
    }

    #[test]
    fn localized_ensemble_is_flagged() {
        let params = ModelParams::default();
        let ensemble: Vec<SpectralField> = (0..200)
            .map(|i| {
                let mut rng = path_rng(8, i);
                let mut s = ChainState::zeros(16).unwrap();
                s.p[3] = 1.0 + 0.1 * normal(&mut rng);
                to_wave(&s, &params, 1.0)
            })
            .collect();
        assert!(!empirical_correlations(&ensemble).unwrap().homogeneity.homogeneous);
    }

    #[test]
    fn csv_layout() {
        let params = ModelParams::default();
        let w = to_wave(&random_state(8, 9), &params, 1.0);
        let mut buf = Vec::new();
        write_field_csv(&w, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 9);
        assert!(text.starts_with("k,re_psi,im_psi,abs2_psi\n"));
    }
}
