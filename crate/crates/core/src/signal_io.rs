//! Recordings, epoching, label files and potato-field configuration files.
//!
//! Recordings are CSV: a header row of channel names followed by one row per
//! time sample (microvolts). Labels are one `0`/`1` per line. Field
//! configurations are JSON, see [`FieldConfig`].

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::spd::DistanceKind;
use crate::stats::CombinerKind;

/// Ground-truth or predicted class of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Clean,
    Artifact,
}

impl Label {
    pub fn is_artifact(self) -> bool {
        matches!(self, Label::Artifact)
    }

    pub fn from_flag(artifact: bool) -> Self {
        if artifact {
            Label::Artifact
        } else {
            Label::Clean
        }
    }

    pub fn as_digit(self) -> u8 {
        match self {
            Label::Clean => 0,
            Label::Artifact => 1,
        }
    }
}

/// A multichannel recording, `channels × samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording<T: Scalar> {
    channel_names: Vec<String>,
    sampling_rate: f64,
    samples: DMatrix<T>,
}

impl<T: Scalar> Recording<T> {
    pub fn new(channel_names: Vec<String>, sampling_rate: f64, samples: DMatrix<T>) -> Result<Self> {
        if !(sampling_rate > 0.0 && sampling_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sampling rate must be positive, got {sampling_rate}"
            )));
        }
        if channel_names.len() != samples.nrows() {
            return Err(Error::LengthMismatch {
                expected: samples.nrows(),
                found: channel_names.len(),
            });
        }
        if channel_names.is_empty() || samples.ncols() == 0 {
            return Err(Error::MalformedFile("recording has no channels or no samples".into()));
        }
        let mut seen = HashSet::new();
        for name in &channel_names {
            if !seen.insert(name.as_str()) {
                return Err(Error::MalformedFile(format!("duplicate channel name {name:?}")));
            }
        }
        Ok(Self {
            channel_names,
            sampling_rate,
            samples,
        })
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn sampling_rate(&self) -> f64 {
        self.sampling_rate
    }

    pub fn samples(&self) -> &DMatrix<T> {
        &self.samples
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sampling_rate
    }

    pub fn nyquist(&self) -> f64 {
        self.sampling_rate / 2.0
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channel_names.iter().position(|c| c == name)
    }

    /// Same channels and rate, new sample matrix.
    pub fn with_samples(&self, samples: DMatrix<T>) -> Result<Self> {
        Self::new(self.channel_names.clone(), self.sampling_rate, samples)
    }
}

/// Non-overlapping fixed-length segmentation of a [`Recording`].
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet<T: Scalar> {
    pub epochs: Vec<DMatrix<T>>,
    pub epoch_duration: f64,
    pub labels: Option<Vec<Label>>,
    pub source_indices: Vec<usize>,
    pub channel_names: Vec<String>,
    pub sampling_rate: f64,
}

impl<T: Scalar> EpochSet<T> {
    pub fn len(&self) -> usize {
        self.epochs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.epochs.is_empty()
    }

    pub fn samples_per_epoch(&self) -> usize {
        self.epochs.first().map_or(0, |e| e.ncols())
    }

    pub fn n_channels(&self) -> usize {
        self.channel_names.len()
    }

    pub fn with_labels(mut self, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != self.epochs.len() {
            return Err(Error::LengthMismatch {
                expected: self.epochs.len(),
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Keeps the epochs at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            epochs: indices.iter().map(|&i| self.epochs[i].clone()).collect(),
            epoch_duration: self.epoch_duration,
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
            source_indices: indices.iter().map(|&i| self.source_indices[i]).collect(),
            channel_names: self.channel_names.clone(),
            sampling_rate: self.sampling_rate,
        }
    }
}

pub fn load_recording<T: Scalar>(path: impl AsRef<Path>, sampling_rate: f64) -> Result<Recording<T>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))?
        .clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let names: Vec<String> = header.iter().map(str::to_owned).collect();

    let mut values: Vec<T> = Vec::new();
    let mut rows = 0usize;
    for (line, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::MalformedFile(format!("{}: {e}", path.display())))?;
        if record.len() != names.len() {
            return Err(Error::MalformedFile(format!(
                "{}: row {} has {} cells, header has {}",
                path.display(),
                line + 2,
                record.len(),
                names.len()
            )));
        }
        for cell in record.iter() {
            let v: f64 = cell.parse().map_err(|_| {
                Error::MalformedFile(format!(
                    "{}: non-numeric cell {cell:?} on row {}",
                    path.display(),
                    line + 2
                ))
            })?;
            if !v.is_finite() {
                return Err(Error::MalformedFile(format!(
                    "{}: non-finite cell on row {}",
                    path.display(),
                    line + 2
                )));
            }
            values.push(T::lit(v));
        }
        rows += 1;
    }
    if rows == 0 {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    // Row-major (time × channel) buffer read as column-major (channel × time).
    let samples = DMatrix::from_vec(names.len(), rows, values);
    Recording::new(names, sampling_rate, samples)
}

pub fn save_recording<T: Scalar>(path: impl AsRef<Path>, recording: &Recording<T>) -> Result<()> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut out = std::io::BufWriter::new(file);
    writeln!(out, "{}", recording.channel_names().join(",")).map_err(io_err)?;
    let samples = recording.samples();
    let mut line = String::new();
    for t in 0..samples.ncols() {
        line.clear();
        for (c, v) in samples.column(t).iter().enumerate() {
            if c > 0 {
                line.push(',');
            }
            // `{}` on floats prints the shortest representation that round-trips.
            line.push_str(&v.as_f64().to_string());
        }
        writeln!(out, "{line}").map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Cuts the recording into consecutive epochs of `duration` seconds; a
/// trailing partial epoch is dropped.
pub fn epoch<T: Scalar>(recording: &Recording<T>, duration: f64) -> Result<EpochSet<T>> {
    let len = (duration * recording.sampling_rate()).round();
    if !(len >= 2.0) {
        return Err(Error::TooShort {
            len: len.max(0.0) as usize,
            min: 1,
        });
    }
    let len = len as usize;
    let count = recording.n_samples() / len;
    if count == 0 {
        return Err(Error::DurationTooLong {
            duration_s: duration,
            total_samples: recording.n_samples(),
        });
    }
    let samples = recording.samples();
    let source_indices: Vec<usize> = (0..count).map(|i| i * len).collect();
    let epochs = source_indices
        .iter()
        .map(|&start| samples.columns(start, len).into_owned())
        .collect();
    Ok(EpochSet {
        epochs,
        epoch_duration: len as f64 / recording.sampling_rate(),
        labels: None,
        source_indices,
        channel_names: recording.channel_names().to_vec(),
        sampling_rate: recording.sampling_rate(),
    })
}

pub fn load_labels(path: impl AsRef<Path>, n_epochs: usize) -> Result<Vec<Label>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let labels = parse_flags(BufReader::new(file))?;
    if labels.len() != n_epochs {
        return Err(Error::LengthMismatch {
            expected: n_epochs,
            found: labels.len(),
        });
    }
    Ok(labels)
}

/// Reads a 0/1-per-line file of any length (labels or a rejection mask).
pub fn load_flags(path: impl AsRef<Path>) -> Result<Vec<Label>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_flags(BufReader::new(file))
}

fn parse_flags(reader: impl BufRead) -> Result<Vec<Label>> {
    let mut labels = Vec::new();
    let mut lines: Vec<String> = Vec::new();
    for line in reader.lines() {
        lines.push(line.map_err(|e| Error::MalformedFile(e.to_string()))?);
    }
    // Trailing blank lines are tolerated, interior ones are not.
    while lines.last().is_some_and(|l| l.trim().is_empty()) {
        lines.pop();
    }
    for (i, line) in lines.iter().enumerate() {
        match line.trim() {
            "0" => labels.push(Label::Clean),
            "1" => labels.push(Label::Artifact),
            other => {
                return Err(Error::InvalidLabelValue {
                    line: i + 1,
                    value: other.to_owned(),
                })
            }
        }
    }
    Ok(labels)
}

/// Writes one `0`/`1` per line, `1` = artifact.
pub fn save_flags(path: impl AsRef<Path>, labels: &[Label]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_flags(labels)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn format_flags(labels: &[Label]) -> String {
    let mut s = String::with_capacity(labels.len() * 2);
    for l in labels {
        s.push(if l.is_artifact() { '1' } else { '0' });
        s.push('\n');
    }
    s
}

/// Epoch labels from annotated artifact intervals (seconds). An epoch that
/// overlaps any interval, even partially, is an artifact.
pub fn labels_from_intervals<T: Scalar>(epochs: &EpochSet<T>, intervals: &[(f64, f64)]) -> Vec<Label> {
    let len = epochs.samples_per_epoch() as f64 / epochs.sampling_rate;
    epochs
        .source_indices
        .iter()
        .map(|&start| {
            let t0 = start as f64 / epochs.sampling_rate;
            let t1 = t0 + len;
            Label::from_flag(intervals.iter().any(|&(a, b)| a < t1 && b > t0))
        })
        .collect()
}

/// One potato: a channel subset, a frequency band and a distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotatoSpec {
    pub channels: Vec<String>,
    pub band_low: f64,
    /// `None` is an open-ended (high-pass) band.
    pub band_high: Option<f64>,
    pub distance: DistanceKind,
}

impl PotatoSpec {
    pub fn new(channels: &[&str], band_low: f64, band_high: Option<f64>, distance: DistanceKind) -> Self {
        Self {
            channels: channels.iter().map(|c| (*c).to_owned()).collect(),
            band_low,
            band_high,
            distance,
        }
    }

    pub fn validate(&self, channel_names: &[String], sampling_rate: f64) -> Result<()> {
        if self.channels.is_empty() {
            return Err(Error::InvalidConfig("potato with no channels".into()));
        }
        let mut seen = HashSet::new();
        for ch in &self.channels {
            if !channel_names.contains(ch) {
                return Err(Error::UnknownChannel(ch.clone()));
            }
            if !seen.insert(ch) {
                return Err(Error::InvalidConfig(format!("channel {ch:?} listed twice in a potato")));
            }
        }
        let nyquist = sampling_rate / 2.0;
        let high = self.band_high.unwrap_or(nyquist);
        let out_of_range = !(self.band_low >= 0.0 && self.band_low.is_finite())
            || self.band_high.is_some_and(|h| !(h.is_finite() && h <= nyquist))
            || self.band_low >= high;
        if out_of_range {
            return Err(Error::BandOutOfRange {
                low: self.band_low,
                high,
                nyquist,
            });
        }
        Ok(())
    }
}

fn default_combiner() -> CombinerKind {
    CombinerKind::MetaTippettOverLiptakFisher
}

fn default_u_lim() -> f64 {
    1.0
}

fn default_rp_z_threshold() -> f64 {
    2.0
}

fn default_rpf_p_threshold() -> f64 {
    0.01
}

/// A potato field plus the thresholds used by the three methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub potatoes: Vec<PotatoSpec>,
    #[serde(default = "default_combiner")]
    pub combiner: CombinerKind,
    #[serde(default = "default_u_lim")]
    pub u_lim: f64,
    #[serde(default = "default_rp_z_threshold")]
    pub rp_z_threshold: f64,
    #[serde(default = "default_rpf_p_threshold")]
    pub rpf_p_threshold: f64,
}

impl FieldConfig {
    pub fn new(potatoes: Vec<PotatoSpec>) -> Self {
        Self {
            potatoes,
            combiner: default_combiner(),
            u_lim: default_u_lim(),
            rp_z_threshold: default_rp_z_threshold(),
            rpf_p_threshold: default_rpf_p_threshold(),
        }
    }

    /// Field for a 10-10 montage: eye potatoes on the pre-frontal channels
    /// (0.1–7 Hz), EMG potatoes on peripheral pairs (above 20 Hz) and one
    /// all-channel 1–20 Hz potato for electrode pops and general artifacts.
    /// Potatoes whose channels are missing from `channel_names` are skipped.
    pub fn standard(channel_names: &[String]) -> Result<Self> {
        use DistanceKind::{DiagEuclidean, Euclidean, Riemannian};
        let eye = (0.1, Some(7.0));
        let mut potatoes = vec![
            PotatoSpec::new(&["Fp1", "Fp2"], eye.0, eye.1, Riemannian),
            PotatoSpec::new(&["Fp1", "Fp2"], eye.0, eye.1, Euclidean),
            PotatoSpec::new(&["Fp1", "Fpz", "Fp2"], eye.0, eye.1, Riemannian),
            PotatoSpec::new(&["F7", "F8"], 20.0, None, DiagEuclidean),
            PotatoSpec::new(&["T7", "T8"], 20.0, None, DiagEuclidean),
            PotatoSpec::new(&["P7", "P8"], 20.0, None, DiagEuclidean),
            PotatoSpec::new(&["O1", "Oz", "O2"], 20.0, None, DiagEuclidean),
        ];
        potatoes.retain(|p| p.channels.iter().all(|c| channel_names.contains(c)));
        if channel_names.len() >= 2 {
            potatoes.push(PotatoSpec {
                channels: channel_names.to_vec(),
                band_low: 1.0,
                band_high: Some(20.0),
                distance: Riemannian,
            });
        }
        if potatoes.is_empty() {
            return Err(Error::EmptyField);
        }
        Ok(Self::new(potatoes))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::MalformedFile(format!("field config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("field config serializes")
    }

    pub fn validate(&self, channel_names: &[String], sampling_rate: f64) -> Result<()> {
        if self.potatoes.is_empty() {
            return Err(Error::EmptyField);
        }
        if !(self.u_lim > 0.0 && self.u_lim.is_finite()) {
            return Err(Error::InvalidConfig(format!("u_lim must be positive, got {}", self.u_lim)));
        }
        if !self.rp_z_threshold.is_finite() {
            return Err(Error::InvalidConfig("rp_z_threshold must be finite".into()));
        }
        if !(self.rpf_p_threshold > 0.0 && self.rpf_p_threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "rpf_p_threshold must lie in (0, 1), got {}",
                self.rpf_p_threshold
            )));
        }
        self.potatoes
            .iter()
            .try_for_each(|p| p.validate(channel_names, sampling_rate))
    }
}

pub fn load_field_config<T: Scalar>(path: impl AsRef<Path>, recording: &Recording<T>) -> Result<FieldConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let config = FieldConfig::from_json(&text)?;
    config.validate(recording.channel_names(), recording.sampling_rate())?;
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    fn csv_with_rows(header: &str, n_cols: usize, rows: usize) -> String {
        let mut s = format!("{header}\n");
        for r in 0..rows {
            let row: Vec<String> = (0..n_cols).map(|c| format!("{}.5", r * 10 + c)).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    #[test]
    fn loads_three_channel_csv() {
        let f = write_tmp(&csv_with_rows("Fp1,Fp2,Cz", 3, 10));
        let rec: Recording<f64> = load_recording(f.path(), 200.0).unwrap();
        assert_eq!(rec.n_channels(), 3);
        assert_eq!(rec.n_samples(), 10);
        assert_eq!(rec.channel_names(), ["Fp1", "Fp2", "Cz"]);
        assert_eq!(rec.samples()[(1, 2)], 21.5);
    }

    #[test]
    fn duplicate_header_is_malformed() {
        let f = write_tmp(&csv_with_rows("Fp1,Fp1", 2, 3));
        let err = load_recording::<f64>(f.path(), 200.0).unwrap_err();
        assert!(matches!(err, Error::MalformedFile(_)), "{err}");
    }

    #[test]
    fn ragged_and_non_numeric_rows_are_malformed() {
        let f = write_tmp("a,b\n1,2\n3\n");
        assert!(matches!(load_recording::<f64>(f.path(), 1.0), Err(Error::MalformedFile(_))));
        let f = write_tmp("a,b\n1,2\n3,x\n");
        assert!(matches!(load_recording::<f64>(f.path(), 1.0), Err(Error::MalformedFile(_))));
    }

    #[test]
    fn empty_file_and_header_only() {
        let f = write_tmp("");
        assert!(matches!(load_recording::<f64>(f.path(), 1.0), Err(Error::EmptyFile(_))));
        let f = write_tmp("a,b\n");
        assert!(matches!(load_recording::<f64>(f.path(), 1.0), Err(Error::EmptyFile(_))));
    }

    #[test]
    fn duration_from_rows_and_rate() {
        let f = write_tmp(&csv_with_rows("a,b", 2, 800));
        let rec: Recording<f64> = load_recording(f.path(), 200.0).unwrap();
        assert_eq!(rec.duration_s(), 4.0);
    }

    fn ramp_recording(n_samples: usize, rate: f64) -> Recording<f64> {
        let m = DMatrix::from_fn(2, n_samples, |c, t| (c * 100_000 + t) as f64);
        Recording::new(vec!["a".into(), "b".into()], rate, m).unwrap()
    }

    #[test]
    fn epoching_drops_trailing_samples() {
        let set = epoch(&ramp_recording(1000, 200.0), 4.0).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.samples_per_epoch(), 800);
        assert_eq!(set.source_indices, vec![0]);

        let set = epoch(&ramp_recording(800, 200.0), 4.0).unwrap();
        assert_eq!(set.len(), 1);

        let set = epoch(&ramp_recording(125 * 5 * 3, 125.0), 5.0).unwrap();
        assert_eq!(set.len(), 3);
        assert_eq!(set.samples_per_epoch(), 625);
        assert_eq!(set.source_indices, vec![0, 625, 1250]);
    }

    #[test]
    fn epoching_too_long_errors() {
        let err = epoch(&ramp_recording(100, 200.0), 4.0).unwrap_err();
        assert!(matches!(err, Error::DurationTooLong { .. }));
    }

    #[test]
    fn epoch_concatenation_reproduces_leading_samples() {
        let rec = ramp_recording(1234, 100.0);
        let set = epoch(&rec, 1.5).unwrap();
        let used = set.len() * set.samples_per_epoch();
        let mut t = 0;
        for e in &set.epochs {
            for col in 0..e.ncols() {
                assert_eq!(e.column(col), rec.samples().column(t));
                t += 1;
            }
        }
        assert_eq!(t, used);
        assert_eq!(used, 1200);
    }

    #[test]
    fn label_parsing() {
        let f = write_tmp("0\n1\n0");
        assert_eq!(
            load_labels(f.path(), 3).unwrap(),
            vec![Label::Clean, Label::Artifact, Label::Clean]
        );
        let f = write_tmp("0\n1\n");
        assert!(matches!(
            load_labels(f.path(), 3),
            Err(Error::LengthMismatch { expected: 3, found: 2 })
        ));
        let f = write_tmp("2\n");
        assert!(matches!(load_labels(f.path(), 1), Err(Error::InvalidLabelValue { .. })));
    }

    #[test]
    fn interval_overlap_marks_artifact() {
        let rec = ramp_recording(1000, 100.0);
        let set = epoch(&rec, 2.0).unwrap();
        // Epochs cover [0,2), [2,4), [4,6), [6,8), [8,10).
        let labels = labels_from_intervals(&set, &[(3.9, 4.1), (9.5, 12.0)]);
        let digits: Vec<u8> = labels.iter().map(|l| l.as_digit()).collect();
        assert_eq!(digits, vec![0, 1, 1, 0, 1]);
    }

    fn table5_recording() -> Recording<f64> {
        let names = ["Fp1", "Fp2", "F7", "F8"];
        Recording::new(
            names.iter().map(|s| s.to_string()).collect(),
            125.0,
            DMatrix::zeros(4, 10),
        )
        .unwrap()
    }

    #[test]
    fn field_config_loads_with_defaults() {
        let f = write_tmp(
            r#"{"potatoes":[
                {"channels":["Fp1","Fp2"],"band_low":0.1,"band_high":7,"distance":"riemannian"},
                {"channels":["F7","F8"],"band_low":20,"band_high":60,"distance":"diag_euclidean"}]}"#,
        );
        let cfg = load_field_config(f.path(), &table5_recording()).unwrap();
        assert_eq!(cfg.potatoes.len(), 2);
        assert_eq!(cfg.potatoes[1].distance, DistanceKind::DiagEuclidean);
        assert_eq!(cfg.combiner, CombinerKind::MetaTippettOverLiptakFisher);
        assert_eq!(cfg.u_lim, 1.0);
        assert_eq!(cfg.rp_z_threshold, 2.0);
        assert_eq!(cfg.rpf_p_threshold, 0.01);
    }

    #[test]
    fn field_config_errors() {
        let rec = table5_recording();
        let f = write_tmp(r#"{"potatoes":[{"channels":["XX"],"band_low":1,"band_high":7,"distance":"riemannian"}]}"#);
        assert!(matches!(load_field_config(f.path(), &rec), Err(Error::UnknownChannel(c)) if c == "XX"));

        let f = write_tmp(r#"{"potatoes":[{"channels":["F7","F8"],"band_low":20,"band_high":80,"distance":"euclidean"}]}"#);
        match load_field_config(f.path(), &rec) {
            Err(Error::BandOutOfRange { nyquist, .. }) => assert_eq!(nyquist, 62.5),
            other => panic!("expected BandOutOfRange, got {other:?}"),
        }

        let f = write_tmp(r#"{"potatoes":[]}"#);
        assert!(matches!(load_field_config(f.path(), &rec), Err(Error::EmptyField)));
    }

    #[test]
    fn high_pass_band_is_null() {
        let cfg = FieldConfig::from_json(
            r#"{"potatoes":[{"channels":["F7"],"band_low":20,"band_high":null,"distance":"diag_euclidean"}],
                "combiner":"fisher","u_lim":1.5,"rp_z_threshold":2.5,"rpf_p_threshold":0.5}"#,
        )
        .unwrap();
        assert_eq!(cfg.potatoes[0].band_high, None);
        assert_eq!(cfg.combiner, CombinerKind::Fisher);
        cfg.validate(&["F7".to_string()], 125.0).unwrap();
    }

    #[test]
    fn field_config_reserialization_is_idempotent() {
        let cfg = FieldConfig::new(vec![
            PotatoSpec::new(&["Fp1", "Fp2"], 0.1, Some(7.0), DistanceKind::Euclidean),
            PotatoSpec::new(&["F7", "F8"], 20.0, None, DistanceKind::DiagEuclidean),
        ]);
        let once = FieldConfig::from_json(&cfg.to_json()).unwrap();
        let twice = FieldConfig::from_json(&once.to_json()).unwrap();
        assert_eq!(cfg, once);
        assert_eq!(once, twice);
    }
}
