//! Command-line experiment driver. Every subcommand writes CSV preceded by
//! `#` comment lines carrying the tool version, a SHA-256 of the parsed
//! configuration, and the seed.

mod commands;
mod values;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::Error;

pub use values::{ChannelArg, Grid, Sizes, Span};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_VALIDITY: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "uwafml", version, about = "Chirp links, neural receivers and federated meta-learning experiments")]
pub struct Cli {
    /// Master seed for every random draw.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// CSV destination; standard output when omitted.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Synthesise a node dataset file.
    GenData(GenDataArgs),
    /// Train one receiver on a dataset file.
    TrainSingle(TrainSingleArgs),
    /// Monte-Carlo BER of the matched filter and/or a trained receiver.
    BerSweep(BerSweepArgs),
    /// Federated meta-learning or FedAvg rounds.
    RunFed(RunFedArgs),
    /// Convergence constants and round bound.
    Bound(BoundArgs),
    /// Operation counts of both receivers.
    Complexity(ComplexityArgs),
    /// Generate or inspect channel impulse response files.
    #[command(subcommand)]
    Cir(CirCommand),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Self::GenData(_) => "gen-data",
            Self::TrainSingle(_) => "train-single",
            Self::BerSweep(_) => "ber-sweep",
            Self::RunFed(_) => "run-fed",
            Self::Bound(_) => "bound",
            Self::Complexity(_) => "complexity",
            Self::Cir(CirCommand::Generate(_)) => "cir generate",
            Self::Cir(CirCommand::Inspect(_)) => "cir inspect",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum SnrRef {
    /// Mean sample power over noise variance.
    Sample,
    /// Eb/N0 over one symbol.
    Symbol,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SignalArgs {
    /// Receiver decimation factor λ.
    #[arg(long, default_value_t = 6)]
    pub lambda: usize,
    #[arg(long, default_value_t = 6000.0)]
    pub f1: f64,
    #[arg(long, default_value_t = 12000.0)]
    pub f2: f64,
    /// Symbol duration in seconds.
    #[arg(long, default_value_t = 0.010)]
    pub duration: f64,
    #[arg(long, default_value_t = 96000.0)]
    pub fs: f64,
    /// identity, rayleigh, or cir:<path>.
    #[arg(long, default_value = "identity")]
    pub channel: ChannelArg,
    /// Maximum Doppler frequency of Rayleigh taps (Hz).
    #[arg(long, default_value_t = 0.0)]
    pub fd: f64,
    /// Rayleigh tap spacing is 1/bandwidth.
    #[arg(long, default_value_t = 6000.0)]
    pub bandwidth: f64,
    #[arg(long, value_enum, default_value_t = SnrRef::Symbol)]
    pub snr_ref: SnrRef,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GenDataArgs {
    /// Dataset file to write.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1250)]
    pub symbols: usize,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    /// SNR range in dB (`lo:hi`); noiseless when omitted.
    #[arg(long)]
    pub snr_db: Option<Span>,
    /// Timing offset range in full-rate samples.
    #[arg(long, default_value = "0")]
    pub sto: Span,
    /// Relative speed range in m/s.
    #[arg(long, default_value = "0")]
    pub speed: Span,
    /// Records sharing one impairment draw.
    #[arg(long, default_value_t = 1)]
    pub frame_len: usize,
    #[command(flatten)]
    pub signal: SignalArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TrainSingleArgs {
    /// Dataset file produced by gen-data.
    #[arg(long)]
    pub data: PathBuf,
    /// Hidden layer sizes; defaults to N1,⌊7·N1/8⌋.
    #[arg(long)]
    pub hidden: Option<Sizes>,
    #[arg(long, default_value_t = 50)]
    pub epochs: usize,
    /// Rows per step; 0 for full batch.
    #[arg(long, default_value_t = 64)]
    pub batch: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
    /// Where to save the trained parameters.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum DetectorArg {
    Mf,
    Dnn,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BerSweepArgs {
    /// SNR grid in dB.
    #[arg(long, default_value = "0:2:16")]
    pub snr_db: Grid,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "mf")]
    pub detector: Vec<DetectorArg>,
    /// Timing offsets in full-rate samples.
    #[arg(long, default_value = "0")]
    pub sto: Grid,
    /// Relative speeds in m/s.
    #[arg(long, default_value = "0")]
    pub speed: Grid,
    /// Symbols per grid point.
    #[arg(long, default_value_t = 10000)]
    pub trials: usize,
    /// Receiver parameters, required for the dnn detector.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub signal: SignalArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ModeArg {
    Fml,
    Fl,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum MetaArg {
    Exact,
    FirstOrder,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RunFedArgs {
    #[arg(long, value_enum, default_value_t = ModeArg::Fml)]
    pub mode: ModeArg,
    /// Total nodes.
    #[arg(long, default_value_t = 33)]
    pub k: usize,
    /// Scheduling ratio N/K.
    #[arg(long, default_value_t = 0.3)]
    pub g: f64,
    /// Inner (adaptation) rate.
    #[arg(long, default_value_t = 0.001)]
    pub alpha: f64,
    /// Outer (update) rate.
    #[arg(long, default_value_t = 0.0001)]
    pub beta: f64,
    /// Local epochs per round.
    #[arg(long, default_value_t = 1)]
    pub t0: usize,
    #[arg(long, default_value_t = 50)]
    pub rounds: usize,
    /// Probability that a scheduled upload is decoded.
    #[arg(long, default_value_t = 1.0)]
    pub p_decode: f64,
    #[arg(long, value_enum, default_value_t = MetaArg::Exact)]
    pub meta: MetaArg,
    /// FedAvg local rate; defaults to beta.
    #[arg(long)]
    pub fl_lr: Option<f64>,
    #[arg(long)]
    pub hidden: Option<Sizes>,
    /// Directory of node dataset files (`*.uwds`, sorted by name); generated inline when omitted.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Symbols per generated node (train + test).
    #[arg(long, default_value_t = 1250)]
    pub symbols: usize,
    #[arg(long, default_value_t = 0.8)]
    pub train_fraction: f64,
    #[arg(long, default_value = "5:15")]
    pub snr_db: Span,
    #[arg(long, default_value = "0")]
    pub sto: Span,
    #[arg(long, default_value = "0")]
    pub speed: Span,
    /// Held-out generated tasks to score on instead of the training nodes.
    #[arg(long, default_value_t = 0)]
    pub eval_nodes: usize,
    /// Offsets `dlo:dhi` applied to the STO range of the held-out tasks.
    #[arg(long)]
    pub eval_shift_sto: Option<Span>,
    /// Offsets `dlo:dhi` applied to the speed range of the held-out tasks.
    #[arg(long)]
    pub eval_shift_speed: Option<Span>,
    #[command(flatten)]
    pub signal: SignalArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum XiArg {
    Theorem,
    Proof,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BoundArgs {
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 2.0)]
    pub h: f64,
    #[arg(long, default_value_t = 0.0)]
    pub rho: f64,
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0.001)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0.01)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.0)]
    pub c: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tau: f64,
    /// Scheduled nodes N.
    #[arg(long, default_value_t = 10)]
    pub n_nodes: usize,
    /// Initial gap bound.
    #[arg(long, default_value_t = 1.0)]
    pub n: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub epsilon: f64,
    #[arg(long, default_value = "1,5,10")]
    pub t0: Sizes,
    #[arg(long, value_enum, default_value_t = XiArg::Proof)]
    pub xi: XiArg,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ComplexityArgs {
    #[arg(long, default_value = "1,2,6")]
    pub mf_lambda: Sizes,
    #[arg(long, default_value_t = 6)]
    pub dnn_lambda: usize,
    /// Hidden sizes of the network; defaults to N1,⌊7·N1/8⌋.
    #[arg(long)]
    pub hidden: Option<Sizes>,
    /// Samples per symbol at the full rate.
    #[arg(long, default_value_t = 960)]
    pub symbol_samples: usize,
}

#[derive(Debug, Subcommand, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CirCommand {
    /// Draw a Rayleigh realization and save it.
    Generate(CirGenerateArgs),
    /// Summarise a CIR file per tap.
    Inspect(CirInspectArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CirGenerateArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 6000.0)]
    pub bandwidth: f64,
    #[arg(long, default_value_t = 1.0)]
    pub fd: f64,
    /// Bell-shape parameter.
    #[arg(long, default_value_t = 9.0)]
    pub a: f64,
    /// Realization length in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 96000.0)]
    pub fs: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CirInspectArgs {
    #[arg(long)]
    pub path: PathBuf,
}

/// Failure of a subcommand, already mapped to its exit status.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) | Error::Input(_) => EXIT_USAGE,
            Error::Validity(_) => EXIT_VALIDITY,
            Error::Parse { .. } | Error::Training { .. } | Error::Io(_) => EXIT_RUNTIME,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

/// Result of a subcommand: CSV body plus an exit code (non-zero when some
/// rows carry failed validity flags).
pub(crate) struct Report {
    pub extra_header: Vec<String>,
    pub body: String,
    pub code: i32,
}

impl Report {
    fn ok(body: String) -> Self {
        Self { extra_header: Vec::new(), body, code: EXIT_OK }
    }
}

/// `# key: value` header lines for a run.
pub fn header(command: &Command, seed: u64) -> Vec<String> {
    #[derive(Serialize)]
    struct Stamp<'a> {
        command: &'a Command,
        seed: u64,
    }
    let json = serde_json::to_string(&Stamp { command, seed }).expect("arguments serialise");
    let hash = hex::encode(Sha256::digest(json.as_bytes()));
    vec![
        format!("# {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")),
        format!("# command: {}", command.name()),
        format!("# config_sha256: {hash}"),
        format!("# seed: {seed}"),
        format!("# config: {json}"),
    ]
}

/// Parses `args` (including the program name) and runs the subcommand,
/// writing CSV to `--output` or `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let Some(seed) = cli.seed else {
        let _ = writeln!(err, "error: --seed is required; runs are never seeded from the clock");
        return EXIT_USAGE;
    };
    let report = match commands::dispatch(&cli.command, seed) {
        Ok(r) => r,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            return f.code;
        }
    };
    let mut text = header(&cli.command, seed).join("\n");
    text.push('\n');
    for line in &report.extra_header {
        text.push_str(line);
        text.push('\n');
    }
    text.push_str(&report.body);
    let written = match &cli.output {
        Some(p) => std::fs::write(p, text.as_bytes()),
        None => out.write_all(text.as_bytes()),
    };
    if let Err(e) = written {
        let _ = writeln!(err, "error: writing output: {e}");
        return EXIT_RUNTIME;
    }
    if report.code != EXIT_OK {
        let _ = writeln!(err, "error: some rows failed their validity checks");
    }
    report.code
}
