//! Artifact rejection for multichannel EEG with potato fields on the SPD
//! manifold.
//!
//! Each potato models the covariance of clean epochs on one channel subset
//! and frequency band. Epochs far from a potato's barycenter receive a low
//! p-value; the p-values of all potatoes are combined into a signal quality
//! index (SQI) and thresholded at the knee of the sorted SQI curve. An
//! amplitude gate removes gross outliers before any fitting.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases name the double-precision instantiation.
//!
//! ```no_run
//! use irpf::{field, signal_io};
//!
//! let raw: irpf::Recording64 = signal_io::load_recording("rec.csv", 200.0)?;
//! let (recording, epochs) = field::prepare(&raw, 4.0)?;
//! let config = signal_io::load_field_config("field.json", &recording)?;
//! let model = field::fit_irpf(&recording, &epochs, &config)?;
//! let report = field::score_irpf(&model, &epochs)?;
//! println!("rejected {} of {} epochs", report.n_rejected(), epochs.len());
//! # Ok::<(), irpf::Error>(())
//! ```

pub mod dsp;
pub mod error;
pub mod eval;
pub mod field;
pub mod kneedle;
pub mod potato;
pub mod review;
pub mod scalar;
pub mod signal_io;
pub mod spd;
pub mod stats;

pub use error::{Error, Result};
pub use field::{FieldModel, IrpfOptions, Method, SqiReport};
pub use scalar::Scalar;
pub use signal_io::{EpochSet, FieldConfig, Label, PotatoSpec, Recording};
pub use spd::{DistanceKind, SpdMatrix};
pub use stats::CombinerKind;

pub type Recording64 = Recording<f64>;
pub type Recording32 = Recording<f32>;
pub type EpochSet64 = EpochSet<f64>;
pub type EpochSet32 = EpochSet<f32>;
pub type SpdMatrix64 = SpdMatrix<f64>;
pub type SpdMatrix32 = SpdMatrix<f32>;
pub type FieldModel64 = FieldModel<f64>;
pub type SqiReport64 = SqiReport<f64>;
pub type PotatoModel64 = potato::PotatoModel<f64>;
