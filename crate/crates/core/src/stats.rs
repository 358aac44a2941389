//! Dispersion statistics, z-scores, p-values and p-value combination.

use libm::erfc;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Below this `log σ` (or `σ` in arithmetic mode) the fit is degenerate and
/// every z-score is 0.
pub const DEGENERATE_SPREAD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DispersionMode {
    Arithmetic,
    Geometric,
}

/// Location and spread of a set of distances.
///
/// In geometric mode `mu` is the geometric mean and `sigma ≥ 1` the
/// geometric standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionStats<T: Scalar> {
    pub mu: T,
    pub sigma: T,
    pub mode: DispersionMode,
}

pub fn fit_dispersion<T: Scalar>(distances: &[T], mode: DispersionMode) -> Result<DispersionStats<T>> {
    if distances.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = T::from_usize_lossy(distances.len());
    match mode {
        DispersionMode::Geometric => {
            if let Some(&d) = distances.iter().find(|&&d| !(d > T::zero())) {
                return Err(Error::NonPositiveDistance(d.as_f64()));
            }
            let logs: Vec<T> = distances.iter().map(|d| d.ln()).collect();
            let mean = logs.iter().fold(T::zero(), |a, &b| a + b) / n;
            let var = logs
                .iter()
                .map(|&l| (l - mean) * (l - mean))
                .fold(T::zero(), |a, b| a + b)
                / n;
            Ok(DispersionStats {
                mu: mean.exp(),
                sigma: var.sqrt().exp(),
                mode,
            })
        }
        DispersionMode::Arithmetic => {
            let mean = distances.iter().fold(T::zero(), |a, &b| a + b) / n;
            let sigma = if distances.len() < 2 {
                T::zero()
            } else {
                let ss = distances
                    .iter()
                    .map(|&d| (d - mean) * (d - mean))
                    .fold(T::zero(), |a, b| a + b);
                (ss / T::from_usize_lossy(distances.len() - 1)).sqrt()
            };
            Ok(DispersionStats { mu: mean, sigma, mode })
        }
    }
}

pub fn z_score<T: Scalar>(d: T, stats: &DispersionStats<T>) -> T {
    let guard = T::lit(DEGENERATE_SPREAD);
    match stats.mode {
        DispersionMode::Geometric => {
            let log_sigma = stats.sigma.ln();
            if !(log_sigma >= guard) {
                return T::zero();
            }
            let tiny = T::lit(T::tiny());
            (d.max(tiny) / stats.mu).ln() / log_sigma
        }
        DispersionMode::Arithmetic => {
            if !(stats.sigma >= guard) {
                return T::zero();
            }
            (d - stats.mu) / stats.sigma
        }
    }
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p)
}

fn clamp_p<T: Scalar>(p: f64) -> f64 {
    p.clamp(T::p_floor(), T::p_ceil())
}

/// Upper-tail normal p-value `1 − Φ(z)`, clamped into `(0, 1)`.
pub fn z_to_p<T: Scalar>(z: T) -> T {
    let z = z.as_f64();
    T::lit(clamp_p::<T>(0.5 * erfc(z / std::f64::consts::SQRT_2)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CombinerKind {
    Fisher,
    Liptak,
    Pearson,
    Tippett,
    MetaTippettOverLiptakFisher,
}

impl CombinerKind {
    pub const ALL: [CombinerKind; 5] = [
        CombinerKind::Fisher,
        CombinerKind::Liptak,
        CombinerKind::Pearson,
        CombinerKind::Tippett,
        CombinerKind::MetaTippettOverLiptakFisher,
    ];
}

/// Scaling and tail of the Liptak combiner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LiptakForm {
    /// `Φ(Σ Φ⁻¹(p) / √J)`: small inputs give a small output, uniform under
    /// the null.
    #[default]
    Stouffer,
    /// `1 − Φ(Σ Φ⁻¹(p) / J)`, kept for reproduction studies. Its tail is
    /// reversed relative to the other combiners.
    Printed,
}

fn validate(p_values: &[f64]) -> Result<()> {
    if p_values.is_empty() {
        return Err(Error::EmptyInput);
    }
    match p_values.iter().find(|&&p| !(p > 0.0 && p < 1.0)) {
        Some(&p) => Err(Error::OutOfRangeP(p)),
        None => Ok(()),
    }
}

fn fisher(p: &[f64]) -> f64 {
    let q = -2.0 * p.iter().map(|v| v.ln()).sum::<f64>();
    gamma_ur(p.len() as f64, q / 2.0)
}

fn pearson(p: &[f64]) -> f64 {
    let q = -2.0 * p.iter().map(|v| (-v).ln_1p()).sum::<f64>();
    gamma_lr(p.len() as f64, q / 2.0)
}

fn tippett(p: &[f64]) -> f64 {
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    -(p.len() as f64 * (-min).ln_1p()).exp_m1()
}

fn liptak(p: &[f64], form: LiptakForm) -> f64 {
    let sum: f64 = p.iter().map(|&v| normal_quantile(v)).sum();
    let j = p.len() as f64;
    match form {
        LiptakForm::Stouffer => normal_cdf(sum / j.sqrt()),
        LiptakForm::Printed => 1.0 - normal_cdf(sum / j),
    }
}

fn combine_f64<T: Scalar>(p: &[f64], kind: CombinerKind, form: LiptakForm) -> f64 {
    match kind {
        CombinerKind::Fisher => fisher(p),
        CombinerKind::Pearson => pearson(p),
        CombinerKind::Tippett => tippett(p),
        CombinerKind::Liptak => liptak(p, form),
        CombinerKind::MetaTippettOverLiptakFisher => {
            let inner = [clamp_p::<T>(liptak(p, form)), clamp_p::<T>(fisher(p))];
            tippett(&inner)
        }
    }
}

/// Combines independent p-values into one.
pub fn combine<T: Scalar>(p_values: &[T], kind: CombinerKind) -> Result<T> {
    combine_with(p_values, kind, LiptakForm::Stouffer)
}

pub fn combine_with<T: Scalar>(p_values: &[T], kind: CombinerKind, form: LiptakForm) -> Result<T> {
    let p: Vec<f64> = p_values.iter().map(|v| v.as_f64()).collect();
    validate(&p)?;
    Ok(T::lit(combine_f64::<T>(&p, kind, form).clamp(0.0, 1.0)))
}
