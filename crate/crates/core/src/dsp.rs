//! Butterworth band-pass filtering and the FRMS outlier gate.
//!
//! Filters are 4th-order Butterworth sections designed with the bilinear
//! transform (pre-warped cutoffs) and run forward-backward for zero phase.
//! Recursions always run in `f64` regardless of the sample type: sections
//! with cutoffs near 0.1 Hz have poles within 1e-3 of the unit circle, which
//! single precision cannot place accurately.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal_io::{EpochSet, Recording};

pub const ORDER: usize = 4;

/// Reflection padding used for per-epoch filtering (3 × order).
pub const EPOCH_PAD: usize = 3 * ORDER;

/// Broad band applied to the continuous recording before gating and epoching.
pub const PREPROCESS_BAND: (f64, f64) = (0.1, 44.0);

/// Open-ended (high-pass) bands stop at this fraction of Nyquist.
pub const OPEN_BAND_EDGE: f64 = 0.9;

// Pole quality factors of a 4th-order Butterworth prototype:
// 1 / (2 cos(pi/8)) and 1 / (2 cos(3 pi/8)).
const BUTTER4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_7];

/// One biquad, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Section {
    fn lowpass(w0: f64, q: f64) -> Self {
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b0 = (1.0 - c) / 2.0 / a0;
        Self {
            b: [b0, 2.0 * b0, b0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    fn highpass(w0: f64, q: f64) -> Self {
        let (s, c) = w0.sin_cos();
        let alpha = s / (2.0 * q);
        let a0 = 1.0 + alpha;
        let b0 = (1.0 + c) / 2.0 / a0;
        Self {
            b: [b0, -2.0 * b0, b0],
            a: [-2.0 * c / a0, (1.0 - alpha) / a0],
        }
    }

    /// Both poles strictly inside the unit circle (stability triangle).
    pub fn is_stable(&self) -> bool {
        let [a1, a2] = self.a;
        a2.abs() < 1.0 && a1.abs() < 1.0 + a2
    }

    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Transposed direct-form II state for a unit step in steady state.
    fn step_state(&self) -> [f64; 2] {
        let g = self.dc_gain();
        [g - self.b[0], self.b[2] - self.a[1] * g]
    }

    fn response(&self, w: f64) -> (f64, f64) {
        // H(e^{jw}) = (b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)
        let (s1, c1) = w.sin_cos();
        let (s2, c2) = (2.0 * w).sin_cos();
        let num = (self.b[0] + self.b[1] * c1 + self.b[2] * c2, -(self.b[1] * s1 + self.b[2] * s2));
        let den = (1.0 + self.a[0] * c1 + self.a[1] * c2, -(self.a[0] * s1 + self.a[1] * s2));
        let d = den.0 * den.0 + den.1 * den.1;
        ((num.0 * den.0 + num.1 * den.1) / d, (num.1 * den.0 - num.0 * den.1) / d)
    }
}

/// A 4th-order Butterworth low-, high- or band-pass filter.
///
/// A band-pass is the cascade of a 4th-order high-pass and a 4th-order
/// low-pass, which keeps every section design identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandPassFilter {
    pub order: usize,
    pub low_cut: Option<f64>,
    pub high_cut: Option<f64>,
    pub sampling_rate: f64,
    pub sections: Vec<Section>,
}

impl BandPassFilter {
    pub fn new(low_cut: Option<f64>, high_cut: Option<f64>, sampling_rate: f64) -> Result<Self> {
        let nyquist = sampling_rate / 2.0;
        let check = |f: f64| {
            if f > 0.0 && f < nyquist && f.is_finite() {
                Ok(f)
            } else {
                Err(Error::CutoffOutOfRange { cutoff: f, nyquist })
            }
        };
        if low_cut.is_none() && high_cut.is_none() {
            return Err(Error::InvalidConfig("filter needs at least one cutoff".into()));
        }
        let mut sections = Vec::with_capacity(4);
        if let Some(f) = low_cut {
            let w0 = 2.0 * PI * check(f)? / sampling_rate;
            sections.extend(BUTTER4_Q.iter().map(|&q| Section::highpass(w0, q)));
        }
        if let Some(f) = high_cut {
            let w0 = 2.0 * PI * check(f)? / sampling_rate;
            sections.extend(BUTTER4_Q.iter().map(|&q| Section::lowpass(w0, q)));
        }
        if let (Some(lo), Some(hi)) = (low_cut, high_cut) {
            if lo >= hi {
                return Err(Error::BandOutOfRange {
                    low: lo,
                    high: hi,
                    nyquist,
                });
            }
        }
        let filter = Self {
            order: ORDER,
            low_cut,
            high_cut,
            sampling_rate,
            sections,
        };
        debug_assert!(filter.is_stable());
        Ok(filter)
    }

    /// Filter for a potato band: a zero low edge drops the high-pass stage,
    /// an open or Nyquist high edge becomes `OPEN_BAND_EDGE · Nyquist` or no
    /// low-pass respectively.
    pub fn for_band(low: f64, high: Option<f64>, sampling_rate: f64) -> Result<Self> {
        let nyquist = sampling_rate / 2.0;
        let low_cut = (low > 0.0).then_some(low);
        let high_cut = match high {
            None => Some(OPEN_BAND_EDGE * nyquist),
            Some(h) if h >= nyquist => None,
            Some(h) => Some(h),
        };
        if low_cut.is_none() && high_cut.is_none() {
            return Err(Error::BandOutOfRange {
                low,
                high: high.unwrap_or(nyquist),
                nyquist,
            });
        }
        Self::new(low_cut, high_cut, sampling_rate)
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Section::is_stable)
    }

    /// Single-pass magnitude response at `freq` Hz. The zero-phase filter's
    /// gain is the square of this.
    pub fn magnitude_response(&self, freq: f64) -> f64 {
        let w = 2.0 * PI * freq / self.sampling_rate;
        self.sections
            .iter()
            .map(|s| {
                let (re, im) = s.response(w);
                re.hypot(im)
            })
            .product()
    }

    /// Minimum length for per-epoch filtering.
    pub fn min_len(&self) -> usize {
        6 * self.order
    }

    /// Steady-state initial conditions of the cascade for a unit step.
    fn step_states(&self) -> Vec<[f64; 2]> {
        let mut scale = 1.0;
        self.sections
            .iter()
            .map(|s| {
                let [z1, z2] = s.step_state();
                let out = [z1 * scale, z2 * scale];
                scale *= s.dc_gain();
                out
            })
            .collect()
    }

    /// Zero-phase filtering of one channel with odd reflection padding of
    /// `pad` samples per side.
    pub fn filtfilt(&self, signal: &[f64], pad: usize) -> Result<Vec<f64>> {
        let n = signal.len();
        if n < 2 || pad >= n {
            return Err(Error::TooShort { len: n, min: pad.max(1) });
        }
        let zi = self.step_states();
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (signal[0], signal[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - signal[i]));
        ext.extend_from_slice(signal);
        ext.extend((1..=pad).map(|i| 2.0 * last - signal[n - 1 - i]));

        self.run_scaled(&mut ext, &zi);
        ext.reverse();
        self.run_scaled(&mut ext, &zi);
        ext.reverse();
        Ok(ext[pad..pad + n].to_vec())
    }

    /// Runs the cascade seeded so that a constant input stays in steady
    /// state. The step states carry the cumulative upstream DC gain, so every
    /// section is scaled by the cascade input `x[0]`.
    fn run_scaled(&self, x: &mut [f64], zi: &[[f64; 2]]) {
        let x0 = x.first().copied().unwrap_or(0.0);
        let mut states: Vec<(f64, f64)> = zi.iter().map(|z| (z[0] * x0, z[1] * x0)).collect();
        for v in x.iter_mut() {
            let mut sample = *v;
            for (s, st) in self.sections.iter().zip(states.iter_mut()) {
                let y = s.b[0] * sample + st.0;
                st.0 = s.b[1] * sample - s.a[0] * y + st.1;
                st.1 = s.b[2] * sample - s.a[1] * y;
                sample = y;
            }
            *v = sample;
        }
    }

    /// Filters every row of `x` (channels × samples) with `pad` samples of
    /// reflection per side.
    pub fn apply<T: Scalar>(&self, x: &DMatrix<T>, pad: usize) -> Result<DMatrix<T>> {
        let (rows, cols) = x.shape();
        let mut out = DMatrix::<T>::zeros(rows, cols);
        let mut buf = Vec::with_capacity(cols);
        for r in 0..rows {
            buf.clear();
            buf.extend(x.row(r).iter().map(|v| v.as_f64()));
            let y = self.filtfilt(&buf, pad)?;
            for (c, v) in y.into_iter().enumerate() {
                out[(r, c)] = T::lit(v);
            }
        }
        Ok(out)
    }

    /// Per-epoch filtering with the standard `3 · order` padding.
    pub fn apply_epoch<T: Scalar>(&self, x: &DMatrix<T>) -> Result<DMatrix<T>> {
        if x.ncols() <= self.min_len() {
            return Err(Error::TooShort {
                len: x.ncols(),
                min: self.min_len(),
            });
        }
        self.apply(x, EPOCH_PAD)
    }
}

/// Zero-phase band-pass of one epoch (channels × samples).
pub fn bandpass<T: Scalar>(
    epoch: &DMatrix<T>,
    low_cut: Option<f64>,
    high_cut: Option<f64>,
    rate: f64,
) -> Result<DMatrix<T>> {
    BandPassFilter::new(low_cut, high_cut, rate)?.apply_epoch(epoch)
}

/// Padding for filtering a whole recording: three periods of the lowest
/// cutoff, so the edge transient of a 0.1 Hz high-pass settles outside the
/// data rather than inside the first epochs.
pub fn continuous_pad(filter: &BandPassFilter, n_samples: usize) -> usize {
    let lowest = filter.low_cut.or(filter.high_cut).unwrap_or(filter.sampling_rate);
    let periods = (3.0 * filter.sampling_rate / lowest).ceil() as usize;
    periods.max(EPOCH_PAD).min(n_samples.saturating_sub(1))
}

/// Applies the broad preprocessing band to the continuous recording. The
/// upper edge is clipped to `OPEN_BAND_EDGE · Nyquist` for low sampling
/// rates.
pub fn preprocess<T: Scalar>(recording: &Recording<T>, band: (f64, f64)) -> Result<Recording<T>> {
    let nyquist = recording.nyquist();
    let high = band.1.min(OPEN_BAND_EDGE * nyquist);
    let filter = BandPassFilter::new(Some(band.0), Some(high), recording.sampling_rate())?;
    let n = recording.n_samples();
    if n <= filter.min_len() {
        return Err(Error::TooShort {
            len: n,
            min: filter.min_len(),
        });
    }
    let pad = continuous_pad(&filter, n);
    recording.with_samples(filter.apply(recording.samples(), pad)?)
}

/// Field root mean square across channels at every sample.
pub fn frms_matrix<T: Scalar>(x: &DMatrix<T>) -> Vec<T> {
    let n = T::from_usize_lossy(x.nrows().max(1));
    x.column_iter()
        .map(|col| (col.iter().fold(T::zero(), |acc, &v| acc + v * v) / n).sqrt())
        .collect()
}

pub fn frms<T: Scalar>(recording: &Recording<T>) -> Vec<T> {
    frms_matrix(recording.samples())
}

/// Amplitude gate fitted on the sorted FRMS of a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierGate<T: Scalar> {
    pub mu_frms: T,
    pub l_lim: T,
    pub u_lim: T,
    pub th_rej: T,
    pub rejected: Vec<bool>,
}

impl<T: Scalar> OutlierGate<T> {
    /// True when any sample of the FRMS segment exceeds the threshold.
    pub fn rejects(&self, frms_segment: &[T]) -> bool {
        frms_segment.iter().any(|&v| v > self.th_rej)
    }

    pub fn n_rejected(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }

    /// A gate that rejects nothing (used when gating is disabled).
    pub fn disabled(n_epochs: usize) -> Self {
        Self {
            mu_frms: T::zero(),
            l_lim: T::zero(),
            u_lim: T::zero(),
            th_rej: T::max_value().unwrap_or_else(|| T::lit(f64::MAX)),
            rejected: vec![false; n_epochs],
        }
    }
}

/// Fits the gate from the recording's FRMS and marks each epoch of
/// `epoch_set` whose FRMS exceeds `th_rej` anywhere.
///
/// `mu_frms` is the mean of the sorted FRMS over a window of twice the epoch
/// length centered on the median position.
pub fn fit_outlier_gate<T: Scalar>(
    recording: &Recording<T>,
    epoch_set: &EpochSet<T>,
    u_lim: f64,
) -> Result<OutlierGate<T>> {
    let values = frms(recording);
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("FRMS is finite"));
    let l_lim = *sorted
        .iter()
        .find(|&&v| v > T::zero())
        .ok_or(Error::AllZeroSignal)?;

    let n = sorted.len();
    let w = epoch_set.samples_per_epoch().max(1);
    let mid = n / 2;
    let lo = mid.saturating_sub(w);
    let hi = (mid + w).min(n);
    let window = &sorted[lo..hi];
    let mu_frms =
        window.iter().fold(T::zero(), |acc, &v| acc + v) / T::from_usize_lossy(window.len());
    // With more than half the samples exactly zero the window mean can sit
    // below the first positive value; keep l_lim <= mu_frms.
    let l_lim = l_lim.min(mu_frms);
    let u = T::lit(u_lim);
    let th_rej = mu_frms + u * (mu_frms - l_lim);

    let len = epoch_set.samples_per_epoch();
    let gate = OutlierGate {
        mu_frms,
        l_lim,
        u_lim: u,
        th_rej,
        rejected: Vec::new(),
    };
    let rejected = epoch_set
        .source_indices
        .iter()
        .map(|&s| gate.rejects(&values[s..(s + len).min(values.len())]))
        .collect();
    Ok(OutlierGate { rejected, ..gate })
}
