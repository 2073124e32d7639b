//! Ensemble estimators.
//!
//! All reductions run over slices in index order with pairwise summation, so an
//! ensemble collected in trajectory order reduces to the same bits on any
//! number of threads.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

pub fn pairwise_sum_complex(xs: &[Complex64]) -> Complex64 {
    const BLOCK: usize = 32;
    if xs.len() <= BLOCK {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum_complex(a) + pairwise_sum_complex(b)
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

impl MeanSe {
    /// `|mean - target| ≤ z · se`.
    pub fn within(&self, target: f64, z: f64) -> bool {
        (self.mean - target).abs() <= z * self.se
    }
}

pub fn mean_se(xs: &[f64]) -> MeanSe {
    let n = xs.len();
    if n == 0 {
        return MeanSe { mean: f64::NAN, se: f64::NAN };
    }
    if xs.iter().all(|x| *x == xs[0]) {
        return MeanSe { mean: xs[0], se: if n < 2 { f64::NAN } else { 0.0 } };
    }
    let mean = pairwise_sum(xs) / n as f64;
    if n < 2 {
        return MeanSe { mean, se: f64::NAN };
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    MeanSe {
        mean,
        se: (var / n as f64).sqrt(),
    }
}

/// Complex sample mean; `se = √(Σ|z - z̄|² / (n(n-1)))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexMeanSe {
    pub mean: Complex64,
    pub se: f64,
}

impl ComplexMeanSe {
    pub fn within(&self, target: Complex64, z: f64) -> bool {
        (self.mean - target).norm() <= z * self.se
    }
}

pub fn complex_mean_se(zs: &[Complex64]) -> ComplexMeanSe {
    let n = zs.len();
    if n == 0 {
        return ComplexMeanSe {
            mean: Complex64::new(f64::NAN, f64::NAN),
            se: f64::NAN,
        };
    }
    if zs.iter().all(|z| *z == zs[0]) {
        return ComplexMeanSe { mean: zs[0], se: if n < 2 { f64::NAN } else { 0.0 } };
    }
    let mean = pairwise_sum_complex(zs) / n as f64;
    if n < 2 {
        return ComplexMeanSe { mean, se: f64::NAN };
    }
    let dev: Vec<f64> = zs.iter().map(|z| (z - mean).norm_sqr()).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    ComplexMeanSe {
        mean,
        se: (var / n as f64).sqrt(),
    }
}

/// Hermitian sample correlation `Σ(x-x̄)(y-ȳ)* / √(Σ|x-x̄|² Σ|y-ȳ|²)`.
///
/// Returns `None` when either sample is constant.
pub fn complex_correlation(xs: &[Complex64], ys: &[Complex64]) -> Option<Complex64> {
    assert_eq!(xs.len(), ys.len());
    let mx = pairwise_sum_complex(xs) / xs.len() as f64;
    let my = pairwise_sum_complex(ys) / ys.len() as f64;
    let cross: Vec<Complex64> = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my).conj()).collect();
    let vx: Vec<f64> = xs.iter().map(|x| (x - mx).norm_sqr()).collect();
    let vy: Vec<f64> = ys.iter().map(|y| (y - my).norm_sqr()).collect();
    let denom = (pairwise_sum(&vx) * pairwise_sum(&vy)).sqrt();
    if denom == 0.0 || !denom.is_finite() {
        None
    } else {
        Some(pairwise_sum_complex(&cross) / denom)
    }
}

/// Non-Hermitian (pseudo) correlation `Σ(x-x̄)(y-ȳ) / √(Σ|x-x̄|² Σ|y-ȳ|²)`.
pub fn complex_pseudo_correlation(xs: &[Complex64], ys: &[Complex64]) -> Option<Complex64> {
    let conj: Vec<Complex64> = ys.iter().map(|y| y.conj()).collect();
    complex_correlation(xs, &conj)
}

/// Column-wise mean/SE of a row-major `rows × cols` table of per-path values.
pub fn column_mean_se(rows: &[Vec<f64>]) -> Vec<MeanSe> {
    if rows.is_empty() {
        return Vec::new();
    }
    let cols = rows[0].len();
    (0..cols)
        .map(|c| {
            let col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            mean_se(&col)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{complex_normal, normal, path_rng};

    #[test]
    fn pairwise_sum_matches_naive_on_exact_values() {
        let xs: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 499_500.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn deterministic_sample_has_zero_se() {
        let m = mean_se(&[2.5; 10]);
        assert_eq!(m.mean, 2.5);
        assert_eq!(m.se, 0.0);
        let c = complex_mean_se(&[Complex64::new(1.0, -1.0); 4]);
        assert_eq!(c.se, 0.0);
        assert!(complex_correlation(&[Complex64::new(1.0, 0.0); 3], &[Complex64::new(0.0, 1.0); 3]).is_none());
    }

    /// Coverage of `mean ± 1.96 SE` on synthetic Gaussian batches with known mean.
    #[test]
    fn standard_error_coverage_is_nominal() {
        let batches = 2000;
        let size = 50;
        let mut rng = path_rng(99, 0);
        let mut covered = 0usize;
        let mut covered_c = 0usize;
        for _ in 0..batches {
            let xs: Vec<f64> = (0..size).map(|_| 3.0 + 2.0 * normal(&mut rng)).collect();
            if mean_se(&xs).within(3.0, 1.96) {
                covered += 1;
            }
            let zs: Vec<Complex64> = (0..size).map(|_| complex_normal(&mut rng, 4.0)).collect();
            // |z̄|²/SE² ~ Exp(1) for circular data, so P(|z̄| ≤ c SE) = 1 - exp(-c²)
            if complex_mean_se(&zs).within(Complex64::new(0.0, 0.0), 1.7308) {
                covered_c += 1;
            }
        }
        // binomial(2000, 0.95): sd ≈ 9.7 counts; allow 4 sd (t-correction at n=50 is ~0.5%)
        let lo = (0.95 * batches as f64 - 4.0 * 9.75 - 0.006 * batches as f64) as usize;
        let hi = (0.95 * batches as f64 + 4.0 * 9.75) as usize;
        assert!((lo..=hi).contains(&covered), "real coverage {covered}");
        assert!((lo..=hi).contains(&covered_c), "complex coverage {covered_c}");
    }

    #[test]
    fn correlation_of_independent_and_identical_samples() {
        let mut rng = path_rng(5, 1);
        let m = 4000;
        let xs: Vec<Complex64> = (0..m).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let ys: Vec<Complex64> = (0..m).map(|_| complex_normal(&mut rng, 1.0)).collect();
        let c = complex_correlation(&xs, &ys).unwrap();
        assert!(c.norm() < 3.0 / (m as f64).sqrt());
        let same = complex_correlation(&xs, &xs).unwrap();
        assert!((same - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }
}
