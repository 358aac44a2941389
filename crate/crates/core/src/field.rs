//! Potato fields end to end: the iRPF pipeline and the RPF and RP baselines.
//!
//! All entry points expect a recording that already went through
//! [`prepare`] (broad band-pass, then epoching), so the gate and the epochs
//! see the same samples.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::dsp::{fit_outlier_gate, frms_matrix, preprocess, BandPassFilter, OutlierGate, PREPROCESS_BAND};
use crate::error::{Error, Result};
use crate::kneedle::{find_knee_with, Sensitivity, Shape, MIN_POINTS};
use crate::potato::{
    fit_adaptive, fit_fixed_trim, fit_simple_with_mode, PotatoModel, FIXED_TRIM_ITERATIONS, FIXED_TRIM_Z,
    MIN_SURVIVORS,
};
use crate::scalar::Scalar;
use crate::signal_io::{epoch, EpochSet, FieldConfig, Label, PotatoSpec, Recording};
use crate::spd::{covariance, DistanceKind, SpdMatrix};
use crate::stats::{combine, z_to_p, CombinerKind, DispersionMode};

/// Fewest epochs a field can be fitted on.
pub const MIN_EPOCHS: usize = 10;

/// Default knee sensitivity for SQI thresholding, as a multiple of `√(n − 1)`.
pub const DEFAULT_KAPPA: f64 = 1.0;
/// Default knee sensitivity for barycenter trimming, as a multiple of
/// `√(n − 1)`.
pub const DEFAULT_TRIM_KAPPA: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Irpf,
    Rpf,
    Rp,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Irpf => "irpf",
            Method::Rpf => "rpf",
            Method::Rp => "rp",
        }
    }
}

/// iRPF switches beyond the field configuration. The toggles exist for
/// ablation studies; the defaults are the full method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IrpfOptions {
    /// Knee sensitivity for SQI thresholding.
    pub sensitivity: Sensitivity,
    /// Knee sensitivity for adaptive barycenter trimming.
    pub trim_sensitivity: Sensitivity,
    pub use_gate: bool,
    /// Collapse the field to its distinct Riemannian potatoes.
    pub riemannian_only: bool,
    /// Overrides the configured combiner.
    pub combiner: Option<CombinerKind>,
    /// Fixed SQI threshold instead of the knee.
    pub fixed_threshold: Option<f64>,
}

impl Default for IrpfOptions {
    fn default() -> Self {
        Self {
            sensitivity: Sensitivity::Scaled(DEFAULT_KAPPA),
            trim_sensitivity: Sensitivity::Scaled(DEFAULT_TRIM_KAPPA),
            use_gate: true,
            riemannian_only: false,
            combiner: None,
            fixed_threshold: None,
        }
    }
}

/// A fitted field: one potato per spec, the gate and the combination rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldModel<T: Scalar> {
    pub specs: Vec<PotatoSpec>,
    pub models: Vec<PotatoModel<T>>,
    pub gate: OutlierGate<T>,
    pub combiner: CombinerKind,
    #[serde(skip)]
    pub sensitivity: Sensitivity,
    pub fixed_threshold: Option<f64>,
    #[serde(skip)]
    filters: Vec<BandPassFilter>,
    #[serde(skip)]
    channel_rows: Vec<Vec<usize>>,
    use_gate: bool,
}

/// Per-epoch scores and decisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SqiReport<T: Scalar> {
    pub method: Method,
    /// `J × I` p-values, one row per potato.
    pub per_potato_p: Vec<Vec<T>>,
    pub sqi: Vec<T>,
    pub threshold: T,
    /// Position in the ascending sort of non-gated SQI where the knee fell.
    pub knee_index: Option<usize>,
    pub gate_rejected: Vec<bool>,
    pub rejected: Vec<bool>,
}

impl<T: Scalar> SqiReport<T> {
    pub fn verdict(&self) -> Vec<Label> {
        self.rejected.iter().map(|&r| Label::from_flag(r)).collect()
    }

    pub fn n_rejected(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }

    /// Epoch indices sorted by ascending SQI, ties by index.
    pub fn sorted_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.sqi.len()).collect();
        order.sort_by(|&a, &b| {
            self.sqi[a]
                .partial_cmp(&self.sqi[b])
                .expect("finite SQI")
                .then(a.cmp(&b))
        });
        order
    }
}

/// Applies the broad preprocessing band to a raw recording and epochs it.
pub fn prepare<T: Scalar>(raw: &Recording<T>, epoch_duration: f64) -> Result<(Recording<T>, EpochSet<T>)> {
    let filtered = preprocess(raw, PREPROCESS_BAND)?;
    let epochs = epoch(&filtered, epoch_duration)?;
    Ok((filtered, epochs))
}

fn channel_rows(spec: &PotatoSpec, names: &[String]) -> Result<Vec<usize>> {
    spec.channels
        .iter()
        .map(|c| {
            names
                .iter()
                .position(|n| n == c)
                .ok_or_else(|| Error::UnknownChannel(c.clone()))
        })
        .collect()
}

fn potato_covariance<T: Scalar>(
    epoch: &nalgebra::DMatrix<T>,
    rows: &[usize],
    filter: Option<&BandPassFilter>,
) -> Result<SpdMatrix<T>> {
    let sub = epoch.select_rows(rows);
    match filter {
        Some(f) => covariance(&f.apply_epoch(&sub)?),
        None => covariance(&sub),
    }
}

fn covariances<T: Scalar>(
    epochs: &EpochSet<T>,
    indices: &[usize],
    rows: &[usize],
    filter: Option<&BandPassFilter>,
) -> Result<Vec<SpdMatrix<T>>> {
    indices
        .iter()
        .map(|&i| potato_covariance(&epochs.epochs[i], rows, filter))
        .collect()
}

/// Distinct channel/band pairs of the field, all with the Riemannian metric.
pub fn riemannian_field(specs: &[PotatoSpec]) -> Vec<PotatoSpec> {
    let mut seen = HashSet::new();
    specs
        .iter()
        .filter(|s| {
            let key = (s.channels.clone(), s.band_low.to_bits(), s.band_high.map(f64::to_bits));
            seen.insert(key)
        })
        .map(|s| PotatoSpec {
            distance: DistanceKind::Riemannian,
            ..s.clone()
        })
        .collect()
}

fn gate_for<T: Scalar>(
    recording: &Recording<T>,
    epochs: &EpochSet<T>,
    u_lim: f64,
    use_gate: bool,
) -> Result<(OutlierGate<T>, Vec<usize>)> {
    if epochs.len() < MIN_EPOCHS {
        return Err(Error::TooFewEpochs {
            got: epochs.len(),
            min: MIN_EPOCHS,
        });
    }
    let gate = if use_gate {
        fit_outlier_gate(recording, epochs, u_lim)?
    } else {
        OutlierGate::disabled(epochs.len())
    };
    let survivors: Vec<usize> = (0..epochs.len()).filter(|&i| !gate.rejected[i]).collect();
    if survivors.len() < MIN_SURVIVORS {
        return Err(Error::TooFewCleanEpochs {
            survivors: survivors.len(),
            min: MIN_SURVIVORS,
        });
    }
    Ok((gate, survivors))
}

enum Trim {
    Adaptive(Sensitivity),
    Fixed,
}

/// Gate, fitted potatoes, their band filters and channel rows.
type FittedField<T> = (OutlierGate<T>, Vec<PotatoModel<T>>, Vec<BandPassFilter>, Vec<Vec<usize>>);

fn fit_field<T: Scalar>(
    recording: &Recording<T>,
    epochs: &EpochSet<T>,
    config: &FieldConfig,
    specs: Vec<PotatoSpec>,
    use_gate: bool,
    trim: Trim,
) -> Result<FittedField<T>> {
    config.validate(recording.channel_names(), recording.sampling_rate())?;
    let (gate, survivors) = gate_for(recording, epochs, config.u_lim, use_gate)?;
    let mut models = Vec::with_capacity(specs.len());
    let mut filters = Vec::with_capacity(specs.len());
    let mut rows_all = Vec::with_capacity(specs.len());
    for spec in &specs {
        let rows = channel_rows(spec, &epochs.channel_names)?;
        let filter = BandPassFilter::for_band(spec.band_low, spec.band_high, epochs.sampling_rate)?;
        let covs = covariances(epochs, &survivors, &rows, Some(&filter))?;
        let fitted = match trim {
            Trim::Adaptive(s) => fit_adaptive(&covs, spec.distance, s)?,
            Trim::Fixed => fit_fixed_trim(&covs, spec.distance, FIXED_TRIM_Z, FIXED_TRIM_ITERATIONS)?,
        };
        let mut kept = vec![false; epochs.len()];
        for (slot, &i) in survivors.iter().enumerate() {
            kept[i] = fitted.kept_mask[slot];
        }
        let mut model = fitted.labelled(&spec.channels, (spec.band_low, spec.band_high));
        model.kept_mask = kept;
        models.push(model);
        filters.push(filter);
        rows_all.push(rows);
    }
    Ok((gate, models, filters, rows_all))
}

pub fn fit_irpf<T: Scalar>(
    recording: &Recording<T>,
    epochs: &EpochSet<T>,
    config: &FieldConfig,
) -> Result<FieldModel<T>> {
    fit_irpf_with(recording, epochs, config, &IrpfOptions::default())
}

pub fn fit_irpf_with<T: Scalar>(
    recording: &Recording<T>,
    epochs: &EpochSet<T>,
    config: &FieldConfig,
    options: &IrpfOptions,
) -> Result<FieldModel<T>> {
    let specs = if options.riemannian_only {
        riemannian_field(&config.potatoes)
    } else {
        config.potatoes.clone()
    };
    let (gate, models, filters, channel_rows) = fit_field(
        recording,
        epochs,
        config,
        specs.clone(),
        options.use_gate,
        Trim::Adaptive(options.trim_sensitivity),
    )?;
    Ok(FieldModel {
        specs,
        models,
        gate,
        combiner: options.combiner.unwrap_or(config.combiner),
        sensitivity: options.sensitivity,
        fixed_threshold: options.fixed_threshold,
        filters,
        channel_rows,
        use_gate: options.use_gate,
    })
}

impl<T: Scalar> FieldModel<T> {
    /// Gate decision for every epoch, from each epoch's own FRMS.
    pub fn gate_mask(&self, epochs: &EpochSet<T>) -> Vec<bool> {
        if !self.use_gate {
            return vec![false; epochs.len()];
        }
        epochs
            .epochs
            .iter()
            .map(|e| self.gate.rejects(&frms_matrix(e)))
            .collect()
    }

    /// `J × I` p-values of every epoch under every potato.
    pub fn potato_p_values(&self, epochs: &EpochSet<T>) -> Result<Vec<Vec<T>>> {
        self.models
            .iter()
            .zip(&self.filters)
            .zip(&self.channel_rows)
            .map(|((model, filter), rows)| {
                if rows.iter().any(|&r| r >= epochs.n_channels()) {
                    return Err(Error::DimensionMismatch {
                        left: model.dim(),
                        right: epochs.n_channels(),
                    });
                }
                epochs
                    .epochs
                    .iter()
                    .map(|e| Ok(model.score(&potato_covariance(e, rows, Some(filter))?)?.1))
                    .collect()
            })
            .collect()
    }
}

/// Final decisions from SQI values: the gate, then an adaptive or fixed
/// threshold on the non-gated SQI.
///
/// The knee is read on the convex side only. Combined p-values of correlated
/// potatoes are not uniform under the null and pile up towards 1, so the
/// clean bulk alone is concave; its concave knee sits mid-curve and would
/// reject half of the clean data. Artifacts form a flat run of low values
/// ahead of that bulk.
fn threshold_sqi<T: Scalar>(
    sqi: &mut [T],
    gate_rejected: &[bool],
    fixed: Option<f64>,
    sensitivity: Sensitivity,
) -> Result<(T, Option<usize>, Vec<bool>)> {
    for (s, &g) in sqi.iter_mut().zip(gate_rejected) {
        if g {
            *s = T::zero();
        }
    }
    let (threshold, knee_index) = match fixed {
        Some(t) => (T::lit(t), None),
        None => {
            let mut open: Vec<T> = sqi
                .iter()
                .zip(gate_rejected)
                .filter(|(_, &g)| !g)
                .map(|(&s, _)| s)
                .collect();
            open.sort_by(|a, b| a.partial_cmp(b).expect("finite SQI"));
            if open.len() < MIN_POINTS {
                (T::zero(), None)
            } else {
                let knee = find_knee_with(&open, sensitivity.at(open.len()), Shape::Convex)?;
                match knee.index {
                    Some(k) => (open[k], Some(k)),
                    None => (T::zero(), None),
                }
            }
        }
    };
    let rejected = sqi
        .iter()
        .zip(gate_rejected)
        .map(|(&s, &g)| g || s < threshold)
        .collect();
    Ok((threshold, knee_index, rejected))
}

pub fn score_irpf<T: Scalar>(model: &FieldModel<T>, epochs: &EpochSet<T>) -> Result<SqiReport<T>> {
    let per_potato_p = model.potato_p_values(epochs)?;
    let gate_rejected = model.gate_mask(epochs);
    let mut sqi = Vec::with_capacity(epochs.len());
    let mut row = Vec::with_capacity(per_potato_p.len());
    for i in 0..epochs.len() {
        row.clear();
        row.extend(per_potato_p.iter().map(|p| p[i]));
        sqi.push(combine(&row, model.combiner)?);
    }
    let (threshold, knee_index, rejected) =
        threshold_sqi(&mut sqi, &gate_rejected, model.fixed_threshold, model.sensitivity)?;
    Ok(SqiReport {
        method: Method::Irpf,
        per_potato_p,
        sqi,
        threshold,
        knee_index,
        gate_rejected,
        rejected,
    })
}

/// Fit and score the same epochs.
pub fn run_irpf<T: Scalar>(
    recording: &Recording<T>,
    epochs: &EpochSet<T>,
    config: &FieldConfig,
    options: &IrpfOptions,
) -> Result<SqiReport<T>> {
    let model = fit_irpf_with(recording, epochs, config, options)?;
    score_irpf(&model, epochs)
}

/// RPF baseline: gate, distinct Riemannian potatoes with fixed z-score
/// trimming, Fisher combination and the configured fixed p threshold.
pub fn run_rpf<T: Scalar>(recording: &Recording<T>, epochs: &EpochSet<T>, config: &FieldConfig) -> Result<SqiReport<T>> {
    let specs = riemannian_field(&config.potatoes);
    let (gate, models, filters, channel_rows) =
        fit_field(recording, epochs, config, specs.clone(), true, Trim::Fixed)?;
    let model = FieldModel {
        specs,
        models,
        gate,
        combiner: CombinerKind::Fisher,
        sensitivity: Sensitivity::Fixed(1.0),
        fixed_threshold: Some(config.rpf_p_threshold),
        filters,
        channel_rows,
        use_gate: true,
    };
    let report = score_irpf(&model, epochs)?;
    Ok(SqiReport {
        method: Method::Rpf,
        ..report
    })
}

/// RP baseline: one all-channel Riemannian potato on the preprocessed band,
/// arithmetic z-scores, `z > z_th` rejects.
pub fn run_rp<T: Scalar>(recording: &Recording<T>, epochs: &EpochSet<T>, z_th: f64) -> Result<SqiReport<T>> {
    run_rp_with(recording, epochs, z_th, 1.0)
}

pub fn run_rp_with<T: Scalar>(
    recording: &Recording<T>,
    epochs: &EpochSet<T>,
    z_th: f64,
    u_lim: f64,
) -> Result<SqiReport<T>> {
    let (gate, survivors) = gate_for(recording, epochs, u_lim, true)?;
    let rows: Vec<usize> = (0..epochs.n_channels()).collect();
    let train = covariances(epochs, &survivors, &rows, None)?;
    let model = fit_simple_with_mode(&train, DistanceKind::Riemannian, DispersionMode::Arithmetic)?;
    let mut z = Vec::with_capacity(epochs.len());
    for e in &epochs.epochs {
        z.push(model.score(&potato_covariance(e, &rows, None)?)?.0);
    }
    let gate_rejected = gate.rejected.clone();
    let z_lim = T::lit(z_th);
    let p: Vec<T> = z.iter().map(|&v| z_to_p(v)).collect();
    let sqi = p
        .iter()
        .zip(&gate_rejected)
        .map(|(&v, &g)| if g { T::zero() } else { v })
        .collect();
    let rejected = z.iter().zip(&gate_rejected).map(|(&v, &g)| g || v > z_lim).collect();
    Ok(SqiReport {
        method: Method::Rp,
        per_potato_p: vec![p],
        sqi,
        threshold: z_to_p(z_lim),
        knee_index: None,
        gate_rejected,
        rejected,
    })
}

/// Runs `method` with the given options (iRPF only) and thresholds.
pub fn run_method<T: Scalar>(
    method: Method,
    recording: &Recording<T>,
    epochs: &EpochSet<T>,
    config: &FieldConfig,
    options: &IrpfOptions,
) -> Result<SqiReport<T>> {
    match method {
        Method::Irpf => run_irpf(recording, epochs, config, options),
        Method::Rpf => run_rpf(recording, epochs, config),
        Method::Rp => run_rp_with(recording, epochs, config.rp_z_threshold, config.u_lim),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::synth::{generate_synthetic, ArtifactMix, SyntheticSpec};

    fn clean_recording(seed: u64, seconds: f64) -> Recording<f64> {
        let spec = SyntheticSpec {
            duration_s: seconds,
            epoch_duration_s: 2.0,
            artifact_mix: ArtifactMix::default(),
            seed,
            ..SyntheticSpec::default()
        };
        generate_synthetic(&spec).unwrap().recording
    }

    fn small_config() -> FieldConfig {
        FieldConfig::new(vec![
            PotatoSpec::new(&["Fp1", "Fp2"], 1.0, Some(20.0), DistanceKind::Riemannian),
            PotatoSpec::new(&["Fp1", "Fp2"], 1.0, Some(20.0), DistanceKind::Euclidean),
            PotatoSpec::new(&["O1"], 20.0, None, DistanceKind::DiagEuclidean),
        ])
    }

    #[test]
    fn riemannian_field_dedupes() {
        let f = riemannian_field(&small_config().potatoes);
        assert_eq!(f.len(), 2);
        assert!(f.iter().all(|s| s.distance == DistanceKind::Riemannian));
    }

    #[test]
    fn too_few_epochs() {
        let rec = clean_recording(1, 18.0);
        let (rec, eps) = prepare(&rec, 2.0).unwrap();
        assert!(matches!(
            fit_irpf(&rec, &eps, &small_config()),
            Err(Error::TooFewEpochs { got: 9, min: 10 })
        ));
    }

    #[test]
    fn report_invariants_hold() {
        let raw = clean_recording(2, 120.0);
        let (rec, eps) = prepare(&raw, 2.0).unwrap();
        let cfg = small_config();
        for method in [Method::Irpf, Method::Rpf, Method::Rp] {
            let r = run_method(method, &rec, &eps, &cfg, &IrpfOptions::default()).unwrap();
            assert_eq!(r.sqi.len(), eps.len());
            assert!(r.sqi.iter().all(|&s| (0.0..=1.0).contains(&s)));
            for i in 0..eps.len() {
                assert!(!r.gate_rejected[i] || r.rejected[i]);
                if method != Method::Rp {
                    assert_eq!(r.rejected[i], r.gate_rejected[i] || r.sqi[i] < r.threshold);
                }
            }
        }
    }

    #[test]
    fn scoring_is_deterministic() {
        let raw = clean_recording(3, 80.0);
        let (rec, eps) = prepare(&raw, 2.0).unwrap();
        let a = run_irpf(&rec, &eps, &small_config(), &IrpfOptions::default()).unwrap();
        let b = run_irpf(&rec, &eps, &small_config(), &IrpfOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_fisher_potato_passes_p_through() {
        let raw = clean_recording(4, 80.0);
        let (rec, eps) = prepare(&raw, 2.0).unwrap();
        let mut cfg = FieldConfig::new(vec![PotatoSpec::new(&["Fp1", "Fz", "O2"], 1.0, Some(20.0), DistanceKind::Riemannian)]);
        cfg.combiner = CombinerKind::Fisher;
        let r = run_irpf(&rec, &eps, &cfg, &IrpfOptions::default()).unwrap();
        for (i, &s) in r.sqi.iter().enumerate() {
            if !r.gate_rejected[i] {
                assert!((s - r.per_potato_p[0][i]).abs() <= 1e-10 * r.per_potato_p[0][i].max(1e-300));
            }
        }
    }

    #[test]
    fn fixed_threshold_boundary_is_clean() {
        let mut sqi = vec![0.01f64, 0.005, 0.5, 0.2, 0.9, 0.3];
        let gate = vec![false; 6];
        let (_, _, rejected) = threshold_sqi(&mut sqi, &gate, Some(0.01), Sensitivity::Fixed(1.0)).unwrap();
        assert_eq!(rejected, vec![false, true, false, false, false, false]);
    }

    #[test]
    fn gated_epochs_get_zero_sqi() {
        let mut sqi = vec![0.4f64, 0.5, 0.6, 0.7, 0.8, 0.9];
        let gate = vec![false, true, false, false, false, false];
        let (t, k, rejected) = threshold_sqi(&mut sqi, &gate, None, Sensitivity::Scaled(1.0)).unwrap();
        assert_eq!(sqi[1], 0.0);
        assert!(rejected[1]);
        assert_eq!((t, k), (0.0, None));
    }
}
