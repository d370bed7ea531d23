//! Argument parsing and dispatch for the `speechprobe` executable.
//!
//! [`run`] takes the full argument vector and output streams and returns the
//! process exit code: 0 on success, 1 on input or validation errors, 2 on
//! usage errors.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "speechprobe", version, about = "Diarization and separation pipeline tools and scorers")]
#[command(args_override_self = true, propagate_version = true)]
pub struct Cli {
    /// key=value file with defaults for the chosen subcommand's options;
    /// flags on the command line take precedence
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resample a mono PCM16 WAV between 8 and 16 kHz
    Resample(ResampleArgs),
    /// Print the powerset class table or decode per-frame class scores
    Powerset(PowersetArgs),
    /// Weighted average of SSL layers, optionally aligned to a frame count
    Fuse(FuseArgs),
    /// Oracle-mask separation through an encoder/mask/decoder basis
    SeparateOracle(SeparateArgs),
    /// File-level diarization from per-chunk activities or powerset scores
    Diarize(DiarizeArgs),
    /// Diarization error rate between two RTTM files
    ScoreDer(ScoreDerArgs),
    /// SDR / SI-SDR of estimated sources, permutation-invariant by default
    ScoreSdr(ScoreSdrArgs),
    /// Print the version
    Version,
}

#[derive(Debug, Args)]
pub struct ResampleArgs {
    /// Input WAV
    pub input: PathBuf,
    /// Output WAV
    pub output: PathBuf,
    /// Target sample rate in Hz (8000 or 16000)
    #[arg(long)]
    pub rate: u32,
    /// Kaiser stopband attenuation in dB
    #[arg(long, default_value_t = 80.0)]
    pub stopband_db: f64,
    /// Transition width as a fraction of the lower rate's band
    #[arg(long, default_value_t = 0.05)]
    pub transition: f64,
}

#[derive(Debug, Args)]
pub struct PowersetArgs {
    /// Maximum number of local speakers K
    #[arg(long, default_value_t = 3)]
    pub speakers: usize,
    /// SSLF scores: layers = chunks, frames = frames, dim = classes
    #[arg(long, value_name = "FILE")]
    pub scores: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct FuseArgs {
    /// SSLF feature stack (one layer per SSL layer)
    pub stack: PathBuf,
    /// Text file with one layer logit per line
    #[arg(long, value_name = "FILE")]
    pub weights: PathBuf,
    /// Output SSLF file holding the single fused layer
    #[arg(long, short)]
    pub output: PathBuf,
    /// Replicate frames up to this count (nearest-lower index)
    #[arg(long)]
    pub target_frames: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SeparateArgs {
    /// Clean source WAV; repeat once per source
    #[arg(long = "source", required = true, value_name = "WAV")]
    pub sources: Vec<PathBuf>,
    /// Mixture WAV (defaults to the sum of the sources)
    #[arg(long)]
    pub mixture: Option<PathBuf>,
    /// Directory receiving est_0.wav, est_1.wav, ...
    #[arg(long)]
    pub out_dir: PathBuf,
    /// SSLF basis: layer 0 analysis, layer 1 synthesis, frames = filters,
    /// dim = kernel
    #[arg(long, value_name = "FILE", conflicts_with_all = ["kernel", "filters"])]
    pub basis: Option<PathBuf>,
    /// Seed for the random basis (required without --basis)
    #[arg(long, required_unless_present = "basis")]
    pub seed: Option<u64>,
    /// Use the seeded [Q; -Q] orthonormal bank (2 x kernel filters, stride
    /// = kernel), which reconstructs exactly, instead of random banks
    #[arg(long, conflicts_with_all = ["basis", "filters", "stride"])]
    pub orthonormal: bool,
    /// Encoder kernel length L in samples
    #[arg(long, default_value_t = 16)]
    pub kernel: usize,
    /// Encoder stride in samples
    #[arg(long, default_value_t = 8)]
    pub stride: usize,
    /// Number of encoder filters N
    #[arg(long, default_value_t = 128)]
    pub filters: usize,
    /// Ratio-mask denominator offset
    #[arg(long, default_value_t = 1e-8)]
    pub epsilon: f32,
    /// Write the masks as SSLF (layers = sources, frames, dim = filters)
    #[arg(long, value_name = "FILE")]
    pub masks_out: Option<PathBuf>,
    /// Write the mixture latent as a one-layer SSLF
    #[arg(long, value_name = "FILE")]
    pub latent_out: Option<PathBuf>,
    /// SSLF SSL features to fuse and concatenate onto the written latent
    #[arg(long, value_name = "FILE", requires_all = ["ssl_weights", "latent_out"])]
    pub ssl: Option<PathBuf>,
    /// Layer logits for --ssl
    #[arg(long, value_name = "FILE", requires = "ssl")]
    pub ssl_weights: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct DiarizeArgs {
    /// SSLF powerset scores: layers = chunks, frames, dim = classes
    #[arg(long, value_name = "FILE", required_unless_present = "activity", conflicts_with = "activity")]
    pub scores: Option<PathBuf>,
    /// SSLF binary activity: layers = chunks, frames, dim = local speakers
    /// (values above 0.5 are active)
    #[arg(long, value_name = "FILE")]
    pub activity: Option<PathBuf>,
    /// Local speaker count K used to decode --scores
    #[arg(long, default_value_t = 3)]
    pub speakers: usize,
    /// SSLF embeddings: layers = chunks, frames = local speakers, dim =
    /// embedding size; all-zero rows are absent
    #[arg(long, value_name = "FILE", required_unless_present = "features", conflicts_with = "features")]
    pub embeddings: Option<PathBuf>,
    /// SSLF per-chunk features to mean-pool: layers = chunks
    #[arg(long, value_name = "FILE")]
    pub features: Option<PathBuf>,
    /// File duration in seconds (defaults to the extent of the last chunk)
    #[arg(long)]
    pub duration: Option<f64>,
    /// Chunk length in seconds
    #[arg(long, default_value_t = 10.0)]
    pub window: f64,
    /// Chunk hop in seconds
    #[arg(long, default_value_t = 5.0)]
    pub hop: f64,
    /// Minimum single-speaker run used for embeddings, in seconds
    #[arg(long, default_value_t = 0.25)]
    pub min_seg: f64,
    /// AHC stopping threshold on cosine distance
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    /// Recording name written to the RTTM
    #[arg(long, default_value = "file")]
    pub uri: String,
    /// Output RTTM (stdout when omitted)
    #[arg(long, short)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ScoreDerArgs {
    /// Reference RTTM
    pub reference: PathBuf,
    /// Hypothesis RTTM
    pub hypothesis: PathBuf,
    /// Evaluation regions, lines "uri channel onset offset"
    #[arg(long, value_name = "FILE")]
    pub uem: Option<PathBuf>,
    /// Seconds excluded on each side of reference boundaries
    #[arg(long, default_value_t = 0.0)]
    pub collar: f64,
    /// Only per-file rows
    #[arg(long, conflicts_with = "aggregate")]
    pub per_file: bool,
    /// Only the aggregate row
    #[arg(long)]
    pub aggregate: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Worker threads (0 = all cores)
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct ScoreSdrArgs {
    /// Reference WAV; repeat once per source
    #[arg(long = "ref", required = true, value_name = "WAV")]
    pub refs: Vec<PathBuf>,
    /// Estimate WAV; repeat once per source
    #[arg(long = "est", required = true, value_name = "WAV")]
    pub ests: Vec<PathBuf>,
    /// Mixture WAV for improvement scores
    #[arg(long)]
    pub mixture: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = MetricArg::Sdr)]
    pub metric: MetricArg,
    /// Pair references and estimates in the given order
    #[arg(long)]
    pub no_pit: bool,
    /// Clamp printed scores to [-X, X] dB
    #[arg(long, value_name = "X")]
    pub cap_db: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Sdr,
    SiSdr,
}

/// Parses `argv` (including the program name), runs the subcommand and
/// returns the exit code. Results go to `out`, diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let argv = match config::expand(argv) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {}", describe(&e));
            return EXIT_INPUT;
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{rendered}")
            } else {
                write!(out, "{rendered}")
            };
            return code;
        }
    };
    match commands::dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", describe(&e));
            EXIT_INPUT
        }
    }
}

/// Joins the error chain, skipping causes already spelled out by their
/// wrapper's message.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !text.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}
