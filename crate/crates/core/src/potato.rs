//! A single potato: a barycenter plus dispersion statistics of the distances
//! to it, fitted either plainly, with knee-driven trimming or with fixed
//! z-score trimming.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kneedle::{find_knee_with, Sensitivity, Shape};
use crate::scalar::Scalar;
use crate::signal_io::Label;
use crate::spd::{barycenter, distance, riemannian_from_isqrt, DistanceKind, SpdMatrix};
use crate::stats::{fit_dispersion, z_score, z_to_p, DispersionMode, DispersionStats};

/// Most knee-driven trimming passes in [`fit_adaptive`].
pub const MAX_TRIM_ITERATIONS: usize = 4;
/// Fewest training epochs a fit may be left with.
pub const MIN_SURVIVORS: usize = 5;
/// Fixed-trim defaults for the RPF baseline.
pub const FIXED_TRIM_Z: f64 = 2.0;
pub const FIXED_TRIM_ITERATIONS: usize = 3;
/// Scored distances are floored at this fraction of `mu`.
pub const DISTANCE_FLOOR_FRACTION: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotatoModel<T: Scalar> {
    pub barycenter: SpdMatrix<T>,
    #[serde(skip)]
    barycenter_isqrt: Option<SpdMatrix<T>>,
    pub stats: DispersionStats<T>,
    pub distance_kind: DistanceKind,
    pub channels: Vec<String>,
    pub band: (f64, Option<f64>),
    /// True for training epochs used in the final fit.
    pub kept_mask: Vec<bool>,
    /// Trimming passes that removed epochs.
    pub trim_iterations: usize,
    pub barycenter_converged: bool,
}

impl<T: Scalar> PotatoModel<T> {
    /// Attaches the channel subset and band the covariances came from.
    pub fn labelled(mut self, channels: &[String], band: (f64, Option<f64>)) -> Self {
        self.channels = channels.to_vec();
        self.band = band;
        self
    }

    pub fn n_kept(&self) -> usize {
        self.kept_mask.iter().filter(|&&k| k).count()
    }

    pub fn dim(&self) -> usize {
        self.barycenter.dim()
    }

    /// Distance from `cov` to the barycenter under the model's metric.
    pub fn distance(&self, cov: &SpdMatrix<T>) -> Result<T> {
        match (&self.barycenter_isqrt, self.distance_kind) {
            (Some(isqrt), DistanceKind::Riemannian) => riemannian_from_isqrt(isqrt, cov),
            _ => distance(&self.barycenter, cov, self.distance_kind),
        }
    }

    fn z_of_distance(&self, d: T) -> T {
        let d = match self.stats.mode {
            DispersionMode::Geometric => d.max(self.stats.mu * T::lit(DISTANCE_FLOOR_FRACTION)),
            DispersionMode::Arithmetic => d,
        };
        z_score(d, &self.stats)
    }

    /// `(z, p)` of one covariance.
    pub fn score(&self, cov: &SpdMatrix<T>) -> Result<(T, T)> {
        let z = self.z_of_distance(self.distance(cov)?);
        Ok((z, z_to_p(z)))
    }
}

fn fit_on<T: Scalar>(
    covs: &[SpdMatrix<T>],
    keep: &[usize],
    kind: DistanceKind,
    mode: DispersionMode,
) -> Result<PotatoModel<T>> {
    let subset: Vec<SpdMatrix<T>> = keep.iter().map(|&i| covs[i].clone()).collect();
    let center = barycenter(&subset, kind)?;
    if !center.converged {
        warn!(
            "barycenter stopped after {} iterations with gradient norm {:e}",
            center.iterations,
            center.gradient_norm.as_f64()
        );
    }
    let isqrt = (kind == DistanceKind::Riemannian).then(|| center.mean.inv_sqrt());
    let mut model = PotatoModel {
        barycenter: center.mean,
        barycenter_isqrt: isqrt,
        stats: DispersionStats {
            mu: T::one(),
            sigma: T::one(),
            mode,
        },
        distance_kind: kind,
        channels: Vec::new(),
        band: (0.0, None),
        kept_mask: vec![false; covs.len()],
        trim_iterations: 0,
        barycenter_converged: center.converged,
    };
    let tiny = T::lit(T::tiny());
    let mut distances = Vec::with_capacity(keep.len());
    for &i in keep {
        let d = model.distance(&covs[i])?;
        distances.push(match mode {
            DispersionMode::Geometric => d.max(tiny),
            DispersionMode::Arithmetic => d,
        });
        model.kept_mask[i] = true;
    }
    model.stats = fit_dispersion(&distances, mode)?;
    Ok(model)
}

fn require<T>(covs: &[T], min: usize) -> Result<()> {
    if covs.len() < min {
        return Err(Error::TooFewEpochs {
            got: covs.len(),
            min,
        });
    }
    Ok(())
}

/// Fits on every covariance with geometric dispersion statistics.
pub fn fit_simple<T: Scalar>(covs: &[SpdMatrix<T>], kind: DistanceKind) -> Result<PotatoModel<T>> {
    fit_simple_with_mode(covs, kind, DispersionMode::Geometric)
}

pub fn fit_simple_with_mode<T: Scalar>(
    covs: &[SpdMatrix<T>],
    kind: DistanceKind,
    mode: DispersionMode,
) -> Result<PotatoModel<T>> {
    require(covs, 2)?;
    let all: Vec<usize> = (0..covs.len()).collect();
    fit_on(covs, &all, kind, mode)
}

/// Robust fit that repeatedly trims the low-p cluster marked by a knee on the
/// ascending p-value curve.
///
/// Each pass drops the `k + 1` lowest-p epochs when the knee sits at sorted
/// position `k`, then refits on the survivors. The knee orientation follows
/// the curve: far outliers inflate the spread and compress the bulk, which
/// turns the p curve into a step that only the concave reading detects. Trimming stops when no knee
/// is found, after [`MAX_TRIM_ITERATIONS`] passes, or when a cut would leave
/// fewer than [`MIN_SURVIVORS`] epochs.
pub fn fit_adaptive<T: Scalar>(
    covs: &[SpdMatrix<T>],
    kind: DistanceKind,
    sensitivity: Sensitivity,
) -> Result<PotatoModel<T>> {
    require(covs, MIN_SURVIVORS)?;
    let mut keep: Vec<usize> = (0..covs.len()).collect();
    let mut model = fit_on(covs, &keep, kind, DispersionMode::Geometric)?;
    let mut passes = 0;
    while passes < MAX_TRIM_ITERATIONS {
        let mut ranked: Vec<(T, usize)> = Vec::with_capacity(keep.len());
        for &i in &keep {
            ranked.push((model.score(&covs[i])?.1, i));
        }
        ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite p").then(a.1.cmp(&b.1)));
        let sorted_p: Vec<T> = ranked.iter().map(|r| r.0).collect();
        let Some(k) = find_knee_with(&sorted_p, sensitivity.at(sorted_p.len()), Shape::Any)?.index else {
            break;
        };
        if keep.len() - (k + 1) < MIN_SURVIVORS {
            break;
        }
        keep = ranked[k + 1..].iter().map(|r| r.1).collect();
        keep.sort_unstable();
        passes += 1;
        model = fit_on(covs, &keep, kind, DispersionMode::Geometric)?;
    }
    model.trim_iterations = passes;
    Ok(model)
}

/// Robust fit that drops epochs with `z > z_th` for a fixed number of passes.
pub fn fit_fixed_trim<T: Scalar>(
    covs: &[SpdMatrix<T>],
    kind: DistanceKind,
    z_th: f64,
    iterations: usize,
) -> Result<PotatoModel<T>> {
    require(covs, MIN_SURVIVORS)?;
    let z_th = T::lit(z_th);
    let mut keep: Vec<usize> = (0..covs.len()).collect();
    let mut model = fit_on(covs, &keep, kind, DispersionMode::Geometric)?;
    let mut passes = 0;
    while passes < iterations {
        let mut next = Vec::with_capacity(keep.len());
        for &i in &keep {
            if model.score(&covs[i])?.0 <= z_th {
                next.push(i);
            }
        }
        if next.len() == keep.len() || next.len() < MIN_SURVIVORS {
            break;
        }
        keep = next;
        passes += 1;
        model = fit_on(covs, &keep, kind, DispersionMode::Geometric)?;
    }
    model.trim_iterations = passes;
    Ok(model)
}

/// Artifact iff `z > z_th`.
pub fn rp_classify<T: Scalar>(model: &PotatoModel<T>, cov: &SpdMatrix<T>, z_th: f64) -> Result<Label> {
    let (z, _) = model.score(cov)?;
    Ok(Label::from_flag(z > T::lit(z_th)))
}
