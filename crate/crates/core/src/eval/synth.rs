//! Seeded synthetic EEG with injected, labeled artifacts.
//!
//! The background is pink noise per channel, mixed across channels by a
//! fixed random matrix so clean epochs share one covariance structure. Each
//! artifact event is placed inside a single epoch, so the labels follow the
//! event ledger exactly.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dsp::BandPassFilter;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::signal_io::{epoch, EpochSet, Label, Recording};

/// 21-electrode 10-20 montage.
pub const MONTAGE: [&str; 21] = [
    "Fp1", "Fpz", "Fp2", "F7", "F3", "Fz", "F4", "F8", "T7", "T8", "C3", "Cz", "C4", "P7", "P3", "Pz", "P4",
    "P8", "O1", "Oz", "O2",
];

/// Background standard deviation per channel before mixing (microvolts).
const BACKGROUND_UV: f64 = 10.0;
/// Off-diagonal weight of the channel mixing matrix `I + w R / √N`.
const MIXING_WEIGHT: f64 = 0.15;
/// Events keep this many samples away from epoch edges.
const EDGE_MARGIN: usize = 20;

/// Fraction of epochs receiving each artifact kind.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ArtifactMix {
    pub blink: f64,
    pub vem: f64,
    pub hem: f64,
    pub emg: f64,
    pub pop: f64,
}

impl ArtifactMix {
    /// Equal shares summing to `total`.
    pub fn uniform(total: f64) -> Self {
        let s = total / 5.0;
        Self {
            blink: s,
            vem: s,
            hem: s,
            emg: s,
            pop: s,
        }
    }

    pub fn total(&self) -> f64 {
        self.blink + self.vem + self.hem + self.emg + self.pop
    }

    fn shares(&self) -> [(ArtifactKind, f64); 5] {
        [
            (ArtifactKind::Blink, self.blink),
            (ArtifactKind::Vem, self.vem),
            (ArtifactKind::Hem, self.hem),
            (ArtifactKind::Emg, self.emg),
            (ArtifactKind::Pop, self.pop),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Blink,
    Vem,
    Hem,
    Emg,
    Pop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n_channels: usize,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub epoch_duration_s: f64,
    pub artifact_mix: ArtifactMix,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_channels: MONTAGE.len(),
            duration_s: 400.0,
            rate_hz: 200.0,
            epoch_duration_s: 4.0,
            artifact_mix: ArtifactMix::uniform(0.2),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_owned()));
        if self.n_channels == 0 {
            return bad("n_channels must be positive");
        }
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return bad("rate_hz must be positive");
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return bad("duration_s must be positive");
        }
        if !(self.epoch_duration_s > 0.0 && self.epoch_duration_s <= self.duration_s) {
            return bad("epoch_duration_s must lie in (0, duration_s]");
        }
        let shares = self.artifact_mix.shares();
        if shares.iter().any(|(_, s)| !(*s >= 0.0 && s.is_finite())) {
            return bad("artifact proportions must be non-negative");
        }
        if !(self.artifact_mix.total() < 1.0) {
            return bad("artifact proportions must sum to less than 1");
        }
        let epoch_len = (self.epoch_duration_s * self.rate_hz).round() as usize;
        if epoch_len < 2 * EDGE_MARGIN + (0.8 * self.rate_hz) as usize + 1 {
            return bad("epochs are too short to hold an artifact event");
        }
        Ok(())
    }

    pub fn channel_names(&self) -> Vec<String> {
        (0..self.n_channels)
            .map(|i| MONTAGE.get(i).map_or_else(|| format!("E{}", i + 1), |s| (*s).to_owned()))
            .collect()
    }
}

/// One injected event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectedEvent {
    pub kind: ArtifactKind,
    pub epoch: usize,
    pub start_sample: usize,
    pub len: usize,
    pub channels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData<T: Scalar> {
    pub recording: Recording<T>,
    /// Labeled epochs of the raw recording.
    pub epochs: EpochSet<T>,
    pub events: Vec<InjectedEvent>,
}

impl<T: Scalar> SyntheticData<T> {
    pub fn labels(&self) -> &[Label] {
        self.epochs.labels.as_deref().unwrap_or(&[])
    }
}

/// Unit-variance 1/f noise, one row per channel.
fn pink_noise(rng: &mut ChaCha8Rng, channels: usize, len: usize) -> DMatrix<f64> {
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let mut out = DMatrix::zeros(channels, len);
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for c in 0..channels {
        for b in buf.iter_mut() {
            *b = Complex::new(rng.sample(StandardNormal), 0.0);
        }
        fwd.process(&mut buf);
        for (k, b) in buf.iter_mut().enumerate() {
            // Symmetric in k, so the inverse stays real.
            let bin = k.min(len - k).max(1) as f64;
            *b /= bin.sqrt();
        }
        buf[0] = Complex::new(0.0, 0.0);
        inv.process(&mut buf);
        let mean = buf.iter().map(|v| v.re).sum::<f64>() / len as f64;
        let sd = (buf.iter().map(|v| (v.re - mean).powi(2)).sum::<f64>() / len as f64).sqrt();
        for (t, v) in buf.iter().enumerate() {
            out[(c, t)] = if sd > 0.0 { (v.re - mean) / sd } else { 0.0 };
        }
    }
    out
}

struct Injector<'a> {
    x: &'a mut DMatrix<f64>,
    names: &'a [String],
    rate: f64,
}

impl Injector<'_> {
    fn add(&mut self, channel: &str, gain: f64, start: usize, wave: &[f64]) -> bool {
        let Some(row) = self.names.iter().position(|n| n == channel) else {
            return false;
        };
        for (i, w) in wave.iter().enumerate() {
            self.x[(row, start + i)] += gain * w;
        }
        true
    }

    fn add_group(&mut self, pattern: &[(&str, f64)], start: usize, wave: &[f64]) -> Vec<String> {
        pattern
            .iter()
            .filter(|(ch, g)| self.add(ch, *g, start, wave))
            .map(|(ch, _)| (*ch).to_owned())
            .collect()
    }

    fn samples(&self, seconds: f64) -> usize {
        (seconds * self.rate).round() as usize
    }
}

fn sign(rng: &mut ChaCha8Rng) -> f64 {
    if rng.random_bool(0.5) {
        1.0
    } else {
        -1.0
    }
}

/// Trapezoid with linear ramps over `edge` of the duration at each end.
fn plateau(len: usize, edge: f64) -> Vec<f64> {
    (0..len)
        .map(|i| {
            let t = i as f64 / len as f64;
            if t < edge {
                t / edge
            } else if t > 1.0 - edge {
                (1.0 - t) / edge
            } else {
                1.0
            }
        })
        .collect()
}

fn inject(
    kind: ArtifactKind,
    rng: &mut ChaCha8Rng,
    inj: &mut Injector<'_>,
    epoch_start: usize,
    epoch_len: usize,
) -> Result<InjectedEvent> {
    let duration = match kind {
        ArtifactKind::Blink => inj.samples(rng.random_range(0.2..0.4)),
        ArtifactKind::Vem | ArtifactKind::Hem => inj.samples(rng.random_range(1.0..2.0)),
        ArtifactKind::Emg => inj.samples(rng.random_range(1.0..2.5)),
        ArtifactKind::Pop => inj.samples(0.8),
    }
    .min(epoch_len - 2 * EDGE_MARGIN - 1)
    .max(2);
    let start = epoch_start + rng.random_range(EDGE_MARGIN..epoch_len - duration - EDGE_MARGIN);

    let channels = match kind {
        ArtifactKind::Blink => {
            // Biphasic, same polarity across the frontal row.
            let a = rng.random_range(80.0..200.0);
            let wave: Vec<f64> = (0..duration)
                .map(|i| {
                    let t = i as f64 / duration as f64;
                    a * ((PI * t).sin().powi(2) - 0.2 * (2.0 * PI * t).sin())
                })
                .collect();
            inj.add_group(
                &[
                    ("Fp1", 1.0),
                    ("Fpz", 1.0),
                    ("Fp2", 1.0),
                    ("F3", 0.5),
                    ("Fz", 0.5),
                    ("F4", 0.5),
                    ("F7", 0.3),
                    ("F8", 0.3),
                ],
                start,
                &wave,
            )
        }
        ArtifactKind::Vem => {
            // Slow plateau; the F row moves against the Fp row.
            let a = rng.random_range(40.0..100.0) * sign(rng);
            let wave: Vec<f64> = plateau(duration, 0.2).into_iter().map(|v| a * v).collect();
            inj.add_group(
                &[
                    ("Fp1", 1.0),
                    ("Fpz", 1.0),
                    ("Fp2", 1.0),
                    ("F3", -0.3),
                    ("Fz", -0.3),
                    ("F4", -0.3),
                ],
                start,
                &wave,
            )
        }
        ArtifactKind::Hem => {
            // Step-like plateau with opposite polarity left and right.
            let a = rng.random_range(40.0..100.0) * sign(rng);
            let wave: Vec<f64> = plateau(duration, 0.05).into_iter().map(|v| a * v).collect();
            inj.add_group(
                &[("F7", 1.0), ("F8", -1.0), ("Fp1", 0.5), ("Fp2", -0.5)],
                start,
                &wave,
            )
        }
        ArtifactKind::Emg => {
            let groups: [&[&str]; 4] = [&["F7", "F8"], &["T7", "T8"], &["P7", "P8"], &["O1", "Oz", "O2"]];
            let group = groups[rng.random_range(0..groups.len())];
            let a = rng.random_range(50.0..100.0);
            let nyquist = inj.rate / 2.0;
            let filter = BandPassFilter::new(Some(20.0), Some(60.0f64.min(0.9 * nyquist)), inj.rate)?;
            let window: Vec<f64> = (0..duration)
                .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (duration - 1) as f64).cos())
                .collect();
            let mut used = Vec::new();
            for ch in group {
                let white: Vec<f64> = (0..duration).map(|_| rng.sample(StandardNormal)).collect();
                let burst = filter.filtfilt(&white, duration.min(60) - 1)?;
                let sd = (burst.iter().map(|v| v * v).sum::<f64>() / duration as f64).sqrt();
                let wave: Vec<f64> = burst
                    .iter()
                    .zip(&window)
                    .map(|(b, w)| a * w * b / sd.max(f64::MIN_POSITIVE))
                    .collect();
                if inj.add(ch, 1.0, start, &wave) {
                    used.push((*ch).to_owned());
                }
            }
            used
        }
        ArtifactKind::Pop => {
            // Contact loss: an abrupt step relaxing back, with ringing.
            let a = rng.random_range(60.0..150.0) * sign(rng);
            let row = rng.random_range(0..inj.names.len());
            let wave: Vec<f64> = (0..duration)
                .map(|i| {
                    let t = i as f64 / inj.rate;
                    a * (0.6 * (-t / 0.3).exp() + 0.4 * (-t / 0.15).exp() * (2.0 * PI * 4.0 * t).cos())
                })
                .collect();
            let name = inj.names[row].clone();
            inj.add(&name, 1.0, start, &wave);
            vec![name]
        }
    };
    Ok(InjectedEvent {
        kind,
        epoch: epoch_start / epoch_len,
        start_sample: start,
        len: duration,
        channels,
    })
}

pub fn generate_synthetic<T: Scalar>(spec: &SyntheticSpec) -> Result<SyntheticData<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let names = spec.channel_names();
    let n = spec.n_channels;
    let total = (spec.duration_s * spec.rate_hz).round() as usize;
    let epoch_len = (spec.epoch_duration_s * spec.rate_hz).round() as usize;
    let n_epochs = total / epoch_len;
    if n_epochs == 0 {
        return Err(Error::InvalidSpec("duration holds no complete epoch".into()));
    }

    let mixing = DMatrix::identity(n, n)
        + DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal)) * (MIXING_WEIGHT / (n as f64).sqrt());
    let mut x = mixing * pink_noise(&mut rng, n, total) * BACKGROUND_UV;

    let mut order: Vec<usize> = (0..n_epochs).collect();
    order.shuffle(&mut rng);
    let mut next = order.into_iter();
    let mut events = Vec::new();
    let mut labels = vec![Label::Clean; n_epochs];
    let mut inj = Injector {
        x: &mut x,
        names: &names,
        rate: spec.rate_hz,
    };
    for (kind, share) in spec.artifact_mix.shares() {
        let count = (share * n_epochs as f64).round() as usize;
        for _ in 0..count {
            let Some(e) = next.next() else { break };
            let event = inject(kind, &mut rng, &mut inj, e * epoch_len, epoch_len)?;
            debug_assert_eq!(event.epoch, e);
            labels[e] = Label::Artifact;
            events.push(event);
        }
    }

    let recording = Recording::new(names, spec.rate_hz, x.map(T::lit))?;
    let epochs = epoch(&recording, spec.epoch_duration_s)?.with_labels(labels)?;
    Ok(SyntheticData {
        recording,
        epochs,
        events,
    })
}
