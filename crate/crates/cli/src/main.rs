//! `covr` — cooperative GNSS ranging toolkit.
//!
//! Subcommands: `simulate` writes synthetic two-receiver epoch files,
//! `solve` estimates one baseline, `eval` compares all five methods,
//! `sweep` scans the candidate CNR threshold, and `codec` converts
//! piggyback messages to and from hex.
//!
//! Exit codes: 0 success, 1 usage error, 2 input parse error, 3 no eligible
//! epochs.

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use covr_cli::epochs::{load_epochs, save_epochs};
use covr_cli::eval::{
    cnr_threshold_sweep, comparison_csv, comparison_table, pair_epochs, run_comparison, sweep_csv,
    sweep_table,
};
use covr_cli::sim::{generate, CnrBand, ScenarioConfig};
use covr_core::codec::{decode, encode, PiggybackEntry, PiggybackMessage};
use covr_core::estimate::{
    baseline_distance, estimate_baseline, EstimateConfig, Method, DEFAULT_CNR_MIN_DBHZ,
    DEFAULT_CNR_REF_DBHZ,
};
use covr_core::measurement::{NoiseModel, ReceiverEpoch};
use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_USAGE: u8 = 1;
const EXIT_PARSE: u8 = 2;
const EXIT_NO_ELIGIBLE: u8 = 3;

/// A command failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn parse(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_PARSE,
            message: message.into(),
        }
    }

    fn no_eligible(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NO_ELIGIBLE,
            message: message.into(),
        }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "covr",
    version,
    about = "Cooperative GNSS ranging: simulate, exchange, and estimate inter-receiver baselines"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic two-receiver epoch file (line-delimited JSON)
    Simulate(SimulateArgs),
    /// Estimate the baseline for one epoch pair from a file
    Solve(SolveArgs),
    /// Compare all five methods over a file's epoch pairs
    Eval(EvalArgs),
    /// Sweep the candidate CNR threshold with plain LS on double differences
    Sweep(SweepArgs),
    /// Encode or decode piggyback messages as hex
    #[command(subcommand)]
    Codec(CodecCommand),
}

#[derive(Clone, Copy, ValueEnum)]
enum OutputFormat {
    /// Aligned, human-readable table
    Table,
    /// Machine-readable CSV
    Csv,
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of epoch pairs
    #[arg(long, default_value_t = 1000)]
    epochs: usize,
    /// True baseline from receiver a to b, ECEF meters: "x,y,z"
    #[arg(long, default_value = "3,0,0", value_parser = parse_vec3)]
    baseline: (f64, f64, f64),
    /// Master seed; per-epoch seeds derive from it deterministically
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Constellation size for the default single CNR band
    #[arg(long, default_value_t = 8)]
    sats: usize,
    /// Lower CNR bound of the default band (dBHz)
    #[arg(long, default_value_t = 30.0)]
    cnr_lo: f64,
    /// Upper CNR bound of the default band (dBHz)
    #[arg(long, default_value_t = 50.0)]
    cnr_hi: f64,
    /// Extra CNR band "count:lo:hi" (repeatable; replaces --sats/--cnr-lo/--cnr-hi)
    #[arg(long = "cnr-band", value_parser = parse_band)]
    cnr_bands: Vec<CnrBand>,
    /// Give both receivers the same CNR per satellite
    #[arg(long, default_value_t = false)]
    symmetric_cnr: bool,
    /// Probability a receiver fails to track a satellite (0..=0.5)
    #[arg(long, default_value_t = 0.0)]
    visibility_loss: f64,
    /// Noncommon noise scale kappa (m*dBHz), sigma = kappa / CNR
    #[arg(long, default_value_t = 300.0)]
    kappa: f64,
    /// Per-satellite common error standard deviation (m)
    #[arg(long, default_value_t = 5.0)]
    common_sigma: f64,
    /// Half-width of the uniform per-receiver clock bias (m)
    #[arg(long, default_value_t = 1.0e5)]
    clock_range: f64,
    /// Elevation window in degrees: "lo,hi"
    #[arg(long, default_value = "15,85", value_parser = parse_window)]
    elevation: (f64, f64),
    /// First GPS time tag (ms of week)
    #[arg(long, default_value_t = 60_000)]
    start_tag: u32,
    /// Time tag increment per epoch (ms)
    #[arg(long, default_value_t = 1_000)]
    tag_step: u32,
    /// Output epoch file path
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    /// Epoch file to read
    #[arg(long)]
    input: PathBuf,
    /// Time tag of the pair to solve (default: first pair in the file)
    #[arg(long)]
    tag: Option<u32>,
    /// Estimation method: gps-fix, ls-sd, ls-dd, wls-sd, wls-dd
    #[arg(long, default_value = "wls-dd", value_parser = parse_method)]
    method: Method,
    /// Candidate CNR threshold (dBHz)
    #[arg(long, default_value_t = DEFAULT_CNR_MIN_DBHZ)]
    cnr_min: f64,
    /// Reference-satellite CNR gate (dBHz)
    #[arg(long, default_value_t = DEFAULT_CNR_REF_DBHZ)]
    cnr_ref: f64,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("truth").required(true).args(["baseline", "distance"])))]
struct EvalArgs {
    /// Epoch file to read
    #[arg(long)]
    input: PathBuf,
    /// True baseline "x,y,z" (its norm is the reference distance)
    #[arg(long, value_parser = parse_vec3)]
    baseline: Option<(f64, f64, f64)>,
    /// True inter-receiver distance in meters
    #[arg(long)]
    distance: Option<f64>,
    /// Candidate CNR threshold (dBHz)
    #[arg(long, default_value_t = DEFAULT_CNR_MIN_DBHZ)]
    cnr_min: f64,
    /// Reference-satellite CNR gate (dBHz)
    #[arg(long, default_value_t = DEFAULT_CNR_REF_DBHZ)]
    cnr_ref: f64,
    /// Report format
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    output: OutputFormat,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("truth").required(true).args(["baseline", "distance"])))]
struct SweepArgs {
    /// Epoch file to read
    #[arg(long)]
    input: PathBuf,
    /// True baseline "x,y,z" (its norm is the reference distance)
    #[arg(long, value_parser = parse_vec3)]
    baseline: Option<(f64, f64, f64)>,
    /// True inter-receiver distance in meters
    #[arg(long)]
    distance: Option<f64>,
    /// Comma-separated candidate thresholds in dBHz
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "30,35,40,44,47",
        value_parser = parse_threshold
    )]
    thresholds: Vec<f64>,
    /// Report format
    #[arg(long, value_enum, default_value_t = OutputFormat::Table)]
    output: OutputFormat,
    /// Write the report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum CodecCommand {
    /// Encode a piggyback message and print it as hex
    Encode(EncodeArgs),
    /// Decode a hex piggyback message and print its fields
    Decode(DecodeArgs),
}

#[derive(Args)]
struct EncodeArgs {
    /// GPS time tag (ms of week)
    #[arg(long)]
    tag: u32,
    /// Entry "prn:pseudorange:cnr" (repeatable)
    #[arg(long = "entry", required = true, value_parser = parse_entry)]
    entries: Vec<PiggybackEntry>,
}

#[derive(Args)]
struct DecodeArgs {
    /// Hex-encoded message bytes
    #[arg(long)]
    hex: String,
}

fn parse_vec3(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected \"x,y,z\", got \"{s}\""));
    }
    let mut v = [0.0f64; 3];
    for (slot, part) in v.iter_mut().zip(&parts) {
        *slot = part
            .trim()
            .parse::<f64>()
            .map_err(|e| format!("bad component \"{part}\": {e}"))?;
        if !slot.is_finite() {
            return Err(format!("component \"{part}\" is not finite"));
        }
    }
    Ok((v[0], v[1], v[2]))
}

fn parse_window(s: &str) -> Result<(f64, f64), String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 2 {
        return Err(format!("expected \"lo,hi\", got \"{s}\""));
    }
    let lo = parts[0]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad bound \"{}\": {e}", parts[0]))?;
    let hi = parts[1]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad bound \"{}\": {e}", parts[1]))?;
    Ok((lo, hi))
}

fn parse_band(s: &str) -> Result<CnrBand, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected \"count:lo:hi\", got \"{s}\""));
    }
    let count = parts[0]
        .trim()
        .parse::<usize>()
        .map_err(|e| format!("bad count \"{}\": {e}", parts[0]))?;
    let lo = parts[1]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad lower bound \"{}\": {e}", parts[1]))?;
    let hi = parts[2]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad upper bound \"{}\": {e}", parts[2]))?;
    Ok(CnrBand::new(count, lo, hi))
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let v = s
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad threshold \"{s}\": {e}"))?;
    if !v.is_finite() {
        return Err(format!("threshold \"{s}\" is not finite"));
    }
    Ok(v)
}

fn parse_entry(s: &str) -> Result<PiggybackEntry, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected \"prn:pseudorange:cnr\", got \"{s}\""));
    }
    let prn = parts[0]
        .trim()
        .parse::<u8>()
        .map_err(|e| format!("bad PRN \"{}\": {e}", parts[0]))?;
    let pr = parts[1]
        .trim()
        .parse::<f64>()
        .map_err(|e| format!("bad pseudorange \"{}\": {e}", parts[1]))?;
    let cnr_dbhz = parts[2]
        .trim()
        .parse::<u8>()
        .map_err(|e| format!("bad CNR \"{}\": {e}", parts[2]))?;
    Ok(PiggybackEntry { prn, pr, cnr_dbhz })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp
                | ErrorKind::DisplayVersion
                | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => {
                    let _ = e.print();
                    return ExitCode::SUCCESS;
                }
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Codec(args) => cmd_codec(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn cmd_simulate(args: SimulateArgs) -> CmdResult {
    let bands = if args.cnr_bands.is_empty() {
        vec![CnrBand::new(args.sats, args.cnr_lo, args.cnr_hi)]
    } else {
        args.cnr_bands.clone()
    };
    let cfg = ScenarioConfig {
        n_epochs: args.epochs,
        baseline: args.baseline,
        master_seed: args.seed,
        noise: NoiseModel {
            kappa: args.kappa,
            common_error_sigma: args.common_sigma,
            clock_bias_range: args.clock_range,
        },
        bands,
        symmetric_cnr: args.symmetric_cnr,
        visibility_loss: args.visibility_loss,
        elevation_deg: args.elevation,
        start_tag: args.start_tag,
        tag_step_ms: args.tag_step,
    };
    let pairs = generate(&cfg).map_err(|e| Failure::usage(e.to_string()))?;
    let flat: Vec<ReceiverEpoch> = pairs.into_iter().flat_map(|(a, b)| [a, b]).collect();
    save_epochs(&args.out, &flat).map_err(|e| Failure::usage(e.to_string()))?;
    println!(
        "wrote {} epoch pairs ({} records) to {}",
        flat.len() / 2,
        flat.len(),
        args.out.display()
    );
    Ok(())
}

fn load_pairs(path: &PathBuf) -> Result<Vec<(ReceiverEpoch, ReceiverEpoch)>, Failure> {
    let epochs = load_epochs(path).map_err(|e| Failure::parse(e.to_string()))?;
    pair_epochs(epochs).map_err(|e| Failure::parse(e.to_string()))
}

fn cmd_solve(args: SolveArgs) -> CmdResult {
    let pairs = load_pairs(&args.input)?;
    let (a, b) = match args.tag {
        Some(tag) => pairs
            .iter()
            .find(|(a, _)| a.gps_time_tag == tag)
            .ok_or_else(|| {
                Failure::no_eligible(format!("no epoch pair with time tag {tag} in the file"))
            })?,
        None => pairs
            .first()
            .ok_or_else(|| Failure::no_eligible("the file holds no epoch pairs"))?,
    };
    let cfg = EstimateConfig {
        cnr_min: args.cnr_min,
        cnr_ref: args.cnr_ref,
    };
    let est = estimate_baseline(a, b, args.method, &cfg)
        .map_err(|e| Failure::no_eligible(format!("epoch pair not solvable: {e}")))?;
    println!(
        "tag {}  receivers {} -> {}  method {}  sats {}",
        a.gps_time_tag, a.receiver_id, b.receiver_id, est.method, est.n_sats
    );
    println!("baseline_m {:.4} {:.4} {:.4}", est.r.rx, est.r.ry, est.r.rz);
    println!("distance_m {:.4}", baseline_distance(&est.r));
    if let Some(clock) = est.clock_diff {
        println!("clock_diff_m {clock:.4}");
    }
    println!("residual_norm_m {:.4}", est.residual_norm);
    Ok(())
}

fn truth_distance(
    baseline: Option<(f64, f64, f64)>,
    distance: Option<f64>,
) -> Result<f64, Failure> {
    let d = match (baseline, distance) {
        (Some((x, y, z)), None) => (x * x + y * y + z * z).sqrt(),
        (None, Some(d)) => d,
        _ => unreachable!("clap group enforces exactly one"),
    };
    if !d.is_finite() || d < 0.0 {
        return Err(Failure::usage(format!(
            "reference distance {d} must be finite and nonnegative"
        )));
    }
    Ok(d)
}

fn emit(text: &str, out: Option<&PathBuf>) -> CmdResult {
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| Failure::usage(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn cmd_eval(args: EvalArgs) -> CmdResult {
    let pairs = load_pairs(&args.input)?;
    let d_b = truth_distance(args.baseline, args.distance)?;
    let cfg = EstimateConfig {
        cnr_min: args.cnr_min,
        cnr_ref: args.cnr_ref,
    };
    let report =
        run_comparison(&pairs, d_b, &cfg).map_err(|e| Failure::no_eligible(e.to_string()))?;
    let text = match args.output {
        OutputFormat::Table => comparison_table(&report),
        OutputFormat::Csv => comparison_csv(&report),
    };
    emit(&text, args.out.as_ref())?;
    if report.valid_samples() == 0 {
        return Err(Failure::no_eligible(
            "no epoch pair passed the double-difference eligibility gates",
        ));
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> CmdResult {
    let pairs = load_pairs(&args.input)?;
    let d_b = truth_distance(args.baseline, args.distance)?;
    let rows = cnr_threshold_sweep(&pairs, &args.thresholds, d_b)
        .map_err(|e| Failure::no_eligible(e.to_string()))?;
    let text = match args.output {
        OutputFormat::Table => sweep_table(&rows),
        OutputFormat::Csv => sweep_csv(&rows),
    };
    emit(&text, args.out.as_ref())?;
    if rows.iter().all(|r| r.valid_samples == 0) {
        return Err(Failure::no_eligible(
            "no epoch pair was eligible at any threshold",
        ));
    }
    Ok(())
}

fn cmd_codec(cmd: CodecCommand) -> CmdResult {
    match cmd {
        CodecCommand::Encode(args) => {
            let msg = PiggybackMessage::new(args.tag, args.entries)
                .map_err(|e| Failure::usage(e.to_string()))?;
            let bytes = encode(&msg);
            let mut hex = String::with_capacity(bytes.len() * 2);
            for byte in &bytes {
                let _ = write!(hex, "{byte:02x}");
            }
            println!("{hex}");
            Ok(())
        }
        CodecCommand::Decode(args) => {
            let bytes = hex_to_bytes(args.hex.trim()).map_err(Failure::parse)?;
            let msg = decode(&bytes).map_err(|e| Failure::parse(e.to_string()))?;
            println!("tag {}", msg.gps_time_tag());
            println!("bitmap {:#010x}", msg.sat_bitmap());
            println!("prn pr_m cnr_dbhz");
            for e in msg.entries() {
                println!("{} {} {}", e.prn, e.pr, e.cnr_dbhz);
            }
            Ok(())
        }
    }
}

fn hex_to_bytes(hex: &str) -> Result<Vec<u8>, String> {
    if hex.len() % 2 != 0 {
        return Err(format!("hex string has odd length {}", hex.len()));
    }
    (0..hex.len())
        .step_by(2)
        .map(|i| {
            u8::from_str_radix(&hex[i..i + 2], 16)
                .map_err(|e| format!("bad hex byte \"{}\": {e}", &hex[i..i + 2]))
        })
        .collect()
}
