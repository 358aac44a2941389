//! `irpf`: reject artifact-contaminated EEG epochs, score masks against
//! labels, generate synthetic recordings and export review bundles.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when too few clean epochs
//! remain to fit a model, 1 on any other failure.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use irpf::eval::synth::{generate_synthetic, ArtifactMix, SyntheticSpec};
use irpf::eval::{confusion, metrics, ConfusionCounts, MetricSet};
use irpf::field::{self, DEFAULT_KAPPA, DEFAULT_TRIM_KAPPA};
use irpf::kneedle::Sensitivity;
use irpf::review::ReviewBundle;
use irpf::signal_io::{self, FieldConfig};
use irpf::stats::CombinerKind;
use irpf::{EpochSet64, IrpfOptions, Method, Recording64};

#[derive(Parser)]
#[command(name = "irpf", version, about = "Riemannian potato field artifact rejection for EEG")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every epoch and write the rejection mask, report and timing.
    Reject(RejectArgs),
    /// Compare a rejection mask with ground-truth labels.
    Eval(EvalArgs),
    /// Generate a labeled synthetic recording.
    Synth(SynthArgs),
    /// Fit iRPF and write a review bundle for threshold inspection.
    ExportReview(ExportArgs),
}

#[derive(Args)]
struct InputArgs {
    /// Recording CSV: a header of channel names, one row per sample.
    recording: PathBuf,
    /// Field configuration JSON. Defaults to the standard field for the
    /// recording's channels.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sampling rate in Hz.
    #[arg(long)]
    rate: f64,
    /// Epoch duration in seconds.
    #[arg(long, default_value_t = 4.0)]
    duration: f64,
}

#[derive(Args)]
struct TuningArgs {
    /// RP rejection threshold on the arithmetic z-score.
    #[arg(long = "z-th")]
    z_th: Option<f64>,
    /// RPF rejection threshold on the combined p-value.
    #[arg(long = "p-th")]
    p_th: Option<f64>,
    /// Amplitude gate multiplier.
    #[arg(long = "u-lim")]
    u_lim: Option<f64>,
    /// Knee sensitivity for the SQI threshold, scaled by the square root of
    /// the curve length.
    #[arg(long, default_value_t = DEFAULT_KAPPA)]
    sensitivity: f64,
    /// Knee sensitivity for barycenter trimming, scaled like `--sensitivity`.
    #[arg(long, default_value_t = DEFAULT_TRIM_KAPPA)]
    trim_sensitivity: f64,
    /// p-value combiner; overrides the configuration.
    #[arg(long, value_enum)]
    combiner: Option<Combiner>,
    /// Reject below this SQI instead of at the knee.
    #[arg(long)]
    fixed_threshold: Option<f64>,
    /// Skip the amplitude gate.
    #[arg(long)]
    no_gate: bool,
    /// Keep only the distinct Riemannian potatoes of the field.
    #[arg(long)]
    riemannian_only: bool,
}

#[derive(Args)]
struct RejectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, value_enum, default_value_t = MethodArg::Irpf)]
    method: MethodArg,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Output directory for mask.txt, report.json and timing.json.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Rejection mask, one 0/1 per line.
    mask: PathBuf,
    /// Ground-truth labels, one 0/1 per line.
    labels: PathBuf,
    /// Also write the metrics JSON here.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 21)]
    channels: usize,
    /// Recording length in seconds.
    #[arg(long = "length", default_value_t = 400.0)]
    length_s: f64,
    #[arg(long, default_value_t = 200.0)]
    rate: f64,
    /// Epoch duration in seconds.
    #[arg(long, default_value_t = 4.0)]
    duration: f64,
    /// Fraction of epochs with an artifact, split evenly across kinds.
    #[arg(long, default_value_t = 0.2)]
    artifacts: f64,
    #[arg(long)]
    blink: Option<f64>,
    #[arg(long)]
    vem: Option<f64>,
    #[arg(long)]
    hem: Option<f64>,
    #[arg(long)]
    emg: Option<f64>,
    #[arg(long)]
    pop: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct ExportArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Ground-truth labels to embed in the bundle.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Bundle JSON path.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Irpf,
    Rpf,
    Rp,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Irpf => Method::Irpf,
            MethodArg::Rpf => Method::Rpf,
            MethodArg::Rp => Method::Rp,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Combiner {
    Fisher,
    Liptak,
    Pearson,
    Tippett,
    Meta,
}

impl From<Combiner> for CombinerKind {
    fn from(c: Combiner) -> Self {
        match c {
            Combiner::Fisher => CombinerKind::Fisher,
            Combiner::Liptak => CombinerKind::Liptak,
            Combiner::Pearson => CombinerKind::Pearson,
            Combiner::Tippett => CombinerKind::Tippett,
            Combiner::Meta => CombinerKind::MetaTippettOverLiptakFisher,
        }
    }
}

#[derive(Serialize)]
struct Timing {
    method: &'static str,
    n_epochs: usize,
    total_ms: f64,
    per_epoch_ms: f64,
}

#[derive(Serialize)]
struct EvalReport {
    counts: ConfusionCounts,
    metrics: MetricSet,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Reject(args) => cmd_reject(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
        Command::ExportReview(args) => cmd_export_review(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = format!("{e:#}").replace('\n', " ");
            eprintln!("irpf: {message}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    use irpf::Error as E;
    match e.downcast_ref::<irpf::Error>() {
        Some(E::TooFewCleanEpochs { .. }) => 3,
        Some(
            E::Io { .. }
            | E::MalformedFile(_)
            | E::EmptyFile(_)
            | E::DurationTooLong { .. }
            | E::LengthMismatch { .. }
            | E::InvalidLabelValue { .. }
            | E::UnknownChannel(_)
            | E::BandOutOfRange { .. }
            | E::EmptyField
            | E::InvalidConfig(_)
            | E::CutoffOutOfRange { .. }
            | E::TooShort { .. }
            | E::AllZeroSignal
            | E::TooFewEpochs { .. }
            | E::EmptyInput
            | E::InvalidSpec(_),
        ) => 2,
        Some(_) => 1,
        // Errors raised by the CLI itself are argument problems.
        None => 2,
    }
}

struct Loaded {
    recording: Recording64,
    epochs: EpochSet64,
    config: FieldConfig,
}

fn load_input(input: &InputArgs, tuning: &TuningArgs) -> Result<Loaded> {
    if !(input.rate > 0.0 && input.rate.is_finite()) {
        bail!("--rate must be positive, got {}", input.rate);
    }
    if !(input.duration > 0.0 && input.duration.is_finite()) {
        bail!("--duration must be positive, got {}", input.duration);
    }
    let raw: Recording64 = signal_io::load_recording(&input.recording, input.rate)?;
    let mut config = match &input.config {
        Some(path) => signal_io::load_field_config(path, &raw)?,
        None => FieldConfig::standard(raw.channel_names())?,
    };
    if let Some(z) = tuning.z_th {
        config.rp_z_threshold = z;
    }
    if let Some(p) = tuning.p_th {
        config.rpf_p_threshold = p;
    }
    if let Some(u) = tuning.u_lim {
        config.u_lim = u;
    }
    config.validate(raw.channel_names(), raw.sampling_rate())?;
    let (recording, epochs) = field::prepare(&raw, input.duration)?;
    Ok(Loaded {
        recording,
        epochs,
        config,
    })
}

fn options(tuning: &TuningArgs) -> Result<IrpfOptions> {
    for (flag, v) in [("--sensitivity", tuning.sensitivity), ("--trim-sensitivity", tuning.trim_sensitivity)] {
        if !(v > 0.0 && v.is_finite()) {
            bail!("{flag} must be positive, got {v}");
        }
    }
    if let Some(t) = tuning.fixed_threshold {
        if !(t > 0.0 && t < 1.0) {
            bail!("--fixed-threshold must lie in (0, 1), got {t}");
        }
    }
    Ok(IrpfOptions {
        sensitivity: Sensitivity::Scaled(tuning.sensitivity),
        trim_sensitivity: Sensitivity::Scaled(tuning.trim_sensitivity),
        use_gate: !tuning.no_gate,
        riemannian_only: tuning.riemannian_only,
        combiner: tuning.combiner.map(Into::into),
        fixed_threshold: tuning.fixed_threshold,
    })
}

fn write(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("cannot create {}", path.display()))
}

fn cmd_reject(args: RejectArgs) -> Result<()> {
    let options = options(&args.tuning)?;
    let method = Method::from(args.method);
    let start = Instant::now();
    let Loaded {
        recording,
        epochs,
        config,
    } = load_input(&args.input, &args.tuning)?;
    let scoring = Instant::now();
    let report = field::run_method(method, &recording, &epochs, &config, &options)?;
    let scoring_ms = scoring.elapsed().as_secs_f64() * 1e3;
    let total_ms = start.elapsed().as_secs_f64() * 1e3;

    create_dir(&args.out)?;
    write(&args.out.join("mask.txt"), &signal_io::format_flags(&report.verdict()))?;
    write(&args.out.join("report.json"), &serde_json::to_string_pretty(&report)?)?;
    let timing = Timing {
        method: method.as_str(),
        n_epochs: epochs.len(),
        total_ms,
        per_epoch_ms: scoring_ms / epochs.len() as f64,
    };
    write(&args.out.join("timing.json"), &serde_json::to_string_pretty(&timing)?)?;
    println!(
        "{}: rejected {} of {} epochs ({:.3} ms/epoch)",
        method.as_str(),
        report.n_rejected(),
        epochs.len(),
        timing.per_epoch_ms
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mask = signal_io::load_flags(&args.mask)?;
    let labels = signal_io::load_flags(&args.labels)?;
    if labels.is_empty() {
        bail!("label file {} is empty", args.labels.display());
    }
    let counts = confusion(&mask, &labels)?;
    let report = EvalReport {
        counts,
        metrics: metrics(&counts),
    };
    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(out) = &args.out {
        write(out, &json)?;
    }
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let base = ArtifactMix::uniform(args.artifacts);
    let mix = ArtifactMix {
        blink: args.blink.unwrap_or(base.blink),
        vem: args.vem.unwrap_or(base.vem),
        hem: args.hem.unwrap_or(base.hem),
        emg: args.emg.unwrap_or(base.emg),
        pop: args.pop.unwrap_or(base.pop),
    };
    let spec = SyntheticSpec {
        n_channels: args.channels,
        duration_s: args.length_s,
        rate_hz: args.rate,
        epoch_duration_s: args.duration,
        artifact_mix: mix,
        seed: args.seed,
    };
    let data = generate_synthetic::<f64>(&spec)?;
    create_dir(&args.out)?;
    signal_io::save_recording(args.out.join("recording.csv"), &data.recording)?;
    signal_io::save_flags(args.out.join("labels.txt"), data.labels())?;
    let config = FieldConfig::standard(data.recording.channel_names())?;
    write(&args.out.join("field.json"), &config.to_json())?;
    write(&args.out.join("events.json"), &serde_json::to_string_pretty(&data.events)?)?;
    write(&args.out.join("spec.json"), &serde_json::to_string_pretty(&spec)?)?;
    println!(
        "wrote {} epochs ({} artifacts) to {}",
        data.epochs.len(),
        data.labels().iter().filter(|l| l.is_artifact()).count(),
        args.out.display()
    );
    Ok(())
}

fn cmd_export_review(args: ExportArgs) -> Result<()> {
    let options = options(&args.tuning)?;
    let Loaded {
        recording,
        mut epochs,
        config,
    } = load_input(&args.input, &args.tuning)?;
    if let Some(path) = &args.labels {
        let labels = signal_io::load_labels(path, epochs.len())?;
        epochs = epochs.with_labels(labels)?;
    }
    let model = field::fit_irpf_with(&recording, &epochs, &config, &options)?;
    let report = field::score_irpf(&model, &epochs)?;
    let bundle = ReviewBundle::from_report(&report, &epochs, Some(&config))?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    write(&args.out, &bundle.to_json())?;
    println!(
        "wrote review bundle for {} epochs to {} (suggested threshold {:.3e})",
        epochs.len(),
        args.out.display(),
        bundle.suggested_threshold
    );
    Ok(())
}
