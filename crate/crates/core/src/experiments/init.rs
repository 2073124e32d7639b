//! Initial data: localized profiles, Gibbs states and homogeneous Gaussian fields.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::chain::ChainState;
use crate::error::{require, Result};
use crate::model::{wrap, ModelParams};
use crate::rng::complex_normal;
use crate::spectral::ModeGrid;
use crate::wavefield::{from_wave, gaussian_field, FieldKind, SpectralField};

/// Spectral energy profile `E0(k)` of homogeneous data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum E0Preset {
    /// `E0 ≡ temperature`.
    Constant { temperature: f64 },
    /// `E0(k) = 1 + cos 2πk`.
    OnePlusCos,
    /// `E0(k) = c₀ + Σ_{n≥1} cₙ cos 2πnk`.
    Cosine { coefficients: Vec<f64> },
    /// Periodized Gaussian bump; smooth but not a trigonometric polynomial, so
    /// only accepted by the kinetic solver.
    GaussianBump { center: f64, width: f64, amplitude: f64, floor: f64 },
}

impl E0Preset {
    pub fn eval(&self, k: f64) -> f64 {
        match self {
            Self::Constant { temperature } => *temperature,
            Self::OnePlusCos => 1.0 + (2.0 * PI * k).cos(),
            Self::Cosine { coefficients } => coefficients
                .iter()
                .enumerate()
                .map(|(n, c)| c * (2.0 * PI * n as f64 * k).cos())
                .sum(),
            Self::GaussianBump {
                center,
                width,
                amplitude,
                floor,
            } => floor + amplitude * periodized_gaussian(k, *center, *width),
        }
    }

    pub fn values(&self, ks: &[f64]) -> Vec<f64> {
        ks.iter().map(|&k| self.eval(k)).collect()
    }

    pub fn is_trig_polynomial(&self) -> bool {
        !matches!(self, Self::GaussianBump { .. })
    }

    /// Parameter checks plus nonnegativity on a fine midpoint grid.
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Constant { temperature } => {
                require(temperature.is_finite() && *temperature >= 0.0, || {
                    format!("temperature must be finite and >= 0, got {temperature}")
                })?;
            }
            Self::OnePlusCos => {}
            Self::Cosine { coefficients } => {
                require(!coefficients.is_empty() && coefficients.iter().all(|c| c.is_finite()), || {
                    "cosine coefficients must be a nonempty list of finite numbers".into()
                })?;
            }
            Self::GaussianBump {
                width,
                amplitude,
                floor,
                center,
            } => {
                require(*width > 0.0 && *width < 0.5, || format!("bump width must be in (0, 1/2), got {width}"))?;
                require(*amplitude >= 0.0 && *floor >= 0.0 && center.is_finite(), || {
                    "bump amplitude and floor must be >= 0".into()
                })?;
            }
        }
        let min = crate::model::midpoint_grid(4096)
            .into_iter()
            .map(|k| self.eval(k))
            .fold(f64::INFINITY, f64::min);
        require(min >= -1e-12, || format!("E0 must be nonnegative, minimum is {min:e}"))
    }
}

fn periodized_gaussian(k: f64, center: f64, width: f64) -> f64 {
    let d = wrap(k - center);
    (-1..=1)
        .map(|n| {
            let x = d + n as f64;
            (-0.5 * x * x / (width * width)).exp()
        })
        .sum()
}

/// Square-integrable wave profile `ψ̂₀(k)` for localized data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocalizedProfile {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Default for LocalizedProfile {
    fn default() -> Self {
        Self {
            center: 0.25,
            width: 0.06,
            amplitude: 1.0,
        }
    }
}

impl LocalizedProfile {
    pub fn eval(&self, k: f64) -> Complex64 {
        Complex64::new(self.amplitude * periodized_gaussian(k, self.center, self.width), 0.0)
    }

    /// The bump must sit at least four widths away from `k = 0`.
    pub fn validate(&self) -> Result<()> {
        require(self.width > 0.0 && self.width < 0.125, || {
            format!("profile width must be in (0, 1/8), got {}", self.width)
        })?;
        require(self.amplitude.is_finite() && self.amplitude > 0.0, || "profile amplitude must be positive".into())?;
        require(wrap(self.center).abs() >= 4.0 * self.width, || {
            format!(
                "profile centre {} is within four widths of k = 0",
                self.center
            )
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitSpec {
    Localized { profile: LocalizedProfile },
    /// Homogeneous data with `E0 ≡ temperature`.
    Gibbs { temperature: f64 },
    Homogeneous { e0: E0Preset },
}

impl InitSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Localized { profile } => profile.validate(),
            Self::Gibbs { temperature } => E0Preset::Constant {
                temperature: *temperature,
            }
            .validate(),
            Self::Homogeneous { e0 } => {
                require(e0.is_trig_polynomial(), || {
                    "homogeneous initial data needs a trigonometric-polynomial E0".into()
                })?;
                e0.validate()
            }
        }
    }

    pub fn is_homogeneous(&self) -> bool {
        !matches!(self, Self::Localized { .. })
    }

    /// `E0` of a homogeneous spec.
    pub fn e0(&self) -> Option<E0Preset> {
        match self {
            Self::Localized { .. } => None,
            Self::Gibbs { temperature } => Some(E0Preset::Constant {
                temperature: *temperature,
            }),
            Self::Homogeneous { e0 } => Some(e0.clone()),
        }
    }

    /// Initial datum of the kinetic equation on the lattice modes of `n` sites:
    /// `E0(k_j)` for homogeneous data, `|ψ̂₀(k_j)|²` for localized data.
    pub fn kinetic_initial(&self, n: usize) -> Result<Vec<f64>> {
        let ks = ModeGrid::new(n)?.ks();
        Ok(match self {
            Self::Localized { profile } => ks.iter().map(|&k| profile.eval(k).norm_sqr()).collect(),
            _ => self.e0().expect("homogeneous").values(&ks),
        })
    }
}

/// Samples the initial chain state of one trajectory.
///
/// Homogeneous data draw `N` complex normals from `rng`; localized data are
/// deterministic and leave `rng` untouched.
pub fn make_initial<R: Rng + ?Sized>(spec: &InitSpec, params: &ModelParams, n: usize, rng: &mut R) -> Result<ChainState> {
    spec.validate()?;
    let grid = ModeGrid::new(n)?;
    let field = match spec {
        InitSpec::Localized { profile } => SpectralField {
            values: grid.ks().iter().map(|&k| profile.eval(k)).collect(),
            kind: FieldKind::Raw,
            t: 0.0,
            epsilon: 1.0,
            zero_mode: None,
        },
        _ => {
            let sqrt_e0: Vec<f64> = spec.kinetic_initial(n)?.iter().map(|v| v.max(0.0).sqrt()).collect();
            let xi: Vec<Complex64> = (0..n).map(|_| complex_normal(rng, 1.0)).collect();
            gaussian_field(&sqrt_e0, &xi, params)
        }
    };
    from_wave(&field, params)
}
