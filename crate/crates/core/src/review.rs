//! Self-contained review bundle for threshold inspection in the browser UI.
//!
//! Schema (version 1):
//! `{"version":1,"method","epoch_duration","channel_names","sqi",
//! "sorted_order","knee_index","suggested_threshold","labels","waveforms"}`
//! with `waveforms[epoch][channel][sample]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SqiReport;
use crate::scalar::Scalar;
use crate::signal_io::{EpochSet, FieldConfig};

pub const BUNDLE_VERSION: u32 = 1;
/// Upper bound on samples per channel in an exported waveform.
pub const MAX_WAVEFORM_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReviewBundle {
    pub version: u32,
    pub method: String,
    pub epoch_duration: f64,
    pub channel_names: Vec<String>,
    pub sqi: Vec<f64>,
    pub sorted_order: Vec<usize>,
    pub knee_index: Option<usize>,
    pub suggested_threshold: f64,
    pub labels: Option<Vec<u8>>,
    pub waveforms: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<FieldConfig>,
}

/// Min/max-pair decimation to at most `max_len` samples.
///
/// The signal is cut into `max_len / 2` buckets; each contributes its
/// minimum and maximum in time order, so the global extremes survive.
pub fn decimate_min_max(x: &[f64], max_len: usize) -> Vec<f64> {
    if x.len() <= max_len {
        return x.to_vec();
    }
    let buckets = (max_len / 2).max(1);
    let mut out = Vec::with_capacity(2 * buckets);
    for b in 0..buckets {
        let lo = b * x.len() / buckets;
        let hi = ((b + 1) * x.len() / buckets).max(lo + 1);
        let chunk = &x[lo..hi];
        let (mut imin, mut imax) = (0, 0);
        for (i, &v) in chunk.iter().enumerate() {
            if v < chunk[imin] {
                imin = i;
            }
            if v > chunk[imax] {
                imax = i;
            }
        }
        if imin <= imax {
            out.extend([chunk[imin], chunk[imax]]);
        } else {
            out.extend([chunk[imax], chunk[imin]]);
        }
    }
    out
}

impl ReviewBundle {
    /// Builds a bundle from a report and the epochs it scored. The suggested
    /// threshold is the report's threshold, raised to the smallest positive
    /// `f64` when it is zero.
    pub fn from_report<T: Scalar>(
        report: &SqiReport<T>,
        epochs: &EpochSet<T>,
        config: Option<&FieldConfig>,
    ) -> Result<Self> {
        if report.sqi.len() != epochs.len() {
            return Err(Error::LengthMismatch {
                expected: epochs.len(),
                found: report.sqi.len(),
            });
        }
        let sqi: Vec<f64> = report.sqi.iter().map(|v| v.as_f64()).collect();
        let sorted_order = report.sorted_order();
        let threshold = report.threshold.as_f64();
        // Position of the knee within the full ascending order (gated epochs,
        // all at SQI 0, come first).
        let knee_index = report.knee_index.and_then(|_| {
            sorted_order
                .iter()
                .position(|&i| !report.gate_rejected[i] && sqi[i] == threshold)
        });
        // Gated epochs carry SQI 0; a strictly positive threshold keeps them
        // rejected under the plain `sqi < threshold` rule the UI applies.
        let suggested_threshold = threshold.max(f64::MIN_POSITIVE);
        let waveforms = epochs
            .epochs
            .iter()
            .map(|e| {
                e.row_iter()
                    .map(|row| {
                        let v: Vec<f64> = row.iter().map(|x| x.as_f64()).collect();
                        decimate_min_max(&v, MAX_WAVEFORM_SAMPLES)
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            version: BUNDLE_VERSION,
            method: report.method.as_str().to_owned(),
            epoch_duration: epochs.epoch_duration,
            channel_names: epochs.channel_names.clone(),
            sqi,
            sorted_order,
            knee_index,
            suggested_threshold,
            labels: epochs
                .labels
                .as_ref()
                .map(|l| l.iter().map(|x| x.as_digit()).collect()),
            waveforms,
            config: config.cloned(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bundle: Self =
            serde_json::from_str(text).map_err(|e| Error::MalformedFile(format!("review bundle: {e}")))?;
        if bundle.version != BUNDLE_VERSION {
            return Err(Error::MalformedFile(format!(
                "unsupported review bundle version {}",
                bundle.version
            )));
        }
        Ok(bundle)
    }

    /// The mask the UI shows before any adjustment: an epoch is rejected
    /// when its SQI is below the suggested threshold.
    pub fn default_mask(&self) -> Vec<u8> {
        self.sqi
            .iter()
            .map(|&s| u8::from(s < self.suggested_threshold))
            .collect()
    }
}
