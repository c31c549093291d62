//! Command-line front end: BASS queries, codec debugging, single runs,
//! Monte-Carlo sweeps, and chart rendering.

use std::fs;
use std::io::Write as _;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bassim::bass::{bass_symmetric, block_size_kappa, max_resolution, minimax_rate};
use bassim::codec;
use bassim::harness::{self, chart, SweepConfig};
use bassim::models::ModelKind;
use bassim::protocol::{self, Transport};
use bassim::rng::stream_rng;
use bassim::wavelets::TestFunctionKind;

#[derive(Parser)]
#[command(
    name = "bassim",
    version,
    about = "Distributed wavelet estimation simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print bit-adjusted sample size, rate, block size and max resolution.
    Bass(BassArgs),
    /// Encode a value into its budgeted codeword (debugging aid).
    Encode(EncodeArgs),
    /// Decode a codeword printed by `encode`.
    Decode(DecodeArgs),
    /// Run the protocol once and print a CSV row.
    Run(RunArgs),
    /// Run a replicated sweep from a config file.
    Sweep(SweepArgs),
    /// Render a sweep summary CSV as an SVG log-log chart.
    Chart(ChartArgs),
}

#[derive(Args)]
struct BassArgs {
    #[arg(long)]
    n: u64,
    #[arg(long)]
    m: u64,
    #[arg(long, short = 'b')]
    budget: f64,
    #[arg(long)]
    r: f64,
}

#[derive(Args)]
struct EncodeArgs {
    #[arg(long)]
    value: f64,
    /// Total sample size N = n*m.
    #[arg(long)]
    total: u64,
    #[arg(long, default_value_t = 0.5)]
    d: f64,
}

#[derive(Args)]
struct DecodeArgs {
    /// Codeword as a 0/1 string, sign bit first.
    #[arg(long)]
    bits: String,
    #[arg(long)]
    total: u64,
    #[arg(long, default_value_t = 0.5)]
    d: f64,
}

#[derive(Args, Clone)]
struct RunArgs {
    #[arg(long, value_parser = parse_model)]
    model: ModelKind,
    #[arg(long, value_parser = parse_kind, default_value = "rough")]
    func: TestFunctionKind,
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    l: f64,
    #[arg(long, default_value_t = 0.0)]
    c0: f64,
    #[arg(long)]
    n: u64,
    #[arg(long)]
    m: u64,
    #[arg(long, short = 'b')]
    budget: f64,
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    replicate: u32,
    /// Write per-machine messages (one line each, hex) to this file.
    #[arg(long)]
    trace: Option<std::path::PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    /// Flat key=value config file.
    #[arg(long)]
    config: std::path::PathBuf,
    /// Overrides the config file's `seed` key; one of the two must be set.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results.csv")]
    out_results: std::path::PathBuf,
    #[arg(long, default_value = "summary.csv")]
    out_summary: std::path::PathBuf,
}

#[derive(Args)]
struct ChartArgs {
    #[arg(long)]
    summary: std::path::PathBuf,
    #[arg(long, default_value = "chart.svg")]
    out: std::path::PathBuf,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    ModelKind::parse(s).ok_or_else(|| {
        "expected one of: gaussian, density, binary, poisson, heteroskedastic".to_string()
    })
}

fn parse_kind(s: &str) -> Result<TestFunctionKind, String> {
    TestFunctionKind::parse(s).ok_or_else(|| "expected one of: zero, rough, smooth".to_string())
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 1;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(message)) => {
            eprintln!("config error: {message}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(CliError::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

enum CliError {
    Config(String),
    Runtime(String),
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Bass(args) => {
            if args.n < 2 || args.m < 1 || args.n * args.m < 4 || args.r <= 0.0 {
                return Err(CliError::Config(
                    "need n >= 2, m >= 1, n*m >= 4, r > 0".to_string(),
                ));
            }
            let result = bass_symmetric(args.n, args.m, args.budget, args.r);
            let kappa = block_size_kappa(args.budget, args.n, args.m, args.r);
            println!("n,m,B,r,nbass,regime,rate,kappa,j_n");
            println!(
                "{},{},{},{},{},{},{},{},{}",
                args.n,
                args.m,
                args.budget,
                args.r,
                result.value,
                result.regime.expect("symmetric").name(),
                minimax_rate(args.n, args.m, args.budget, args.r),
                kappa,
                max_resolution(args.n, kappa, args.r),
            );
            Ok(())
        }
        Command::Encode(args) => {
            if args.total < 4 || args.d <= 0.0 {
                return Err(CliError::Config("need total >= 4 and d > 0".to_string()));
            }
            let cw = codec::encode(args.value, args.total, args.d)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let bits: String = cw
                .bits()
                .iter()
                .map(|&b| if b { '1' } else { '0' })
                .collect();
            let decoded = codec::decode(&cw, args.total, args.d)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("bits={bits} width={} decoded={decoded}", cw.width());
            Ok(())
        }
        Command::Decode(args) => {
            if args.total < 4 || args.d <= 0.0 {
                return Err(CliError::Config("need total >= 4 and d > 0".to_string()));
            }
            let width = codec::codeword_width(args.total, args.d);
            if args.bits.len() != width as usize || !args.bits.chars().all(|c| c == '0' || c == '1')
            {
                return Err(CliError::Config(format!(
                    "bits must be a 0/1 string of length {width}"
                )));
            }
            let mut writer = codec::BitWriter::new();
            for c in args.bits.chars() {
                writer.push_bit(c == '1');
            }
            let (bytes, bit_len) = writer.into_parts();
            let mut reader = codec::BitReader::new(&bytes, bit_len);
            let cw = reader
                .read_codeword(width)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            let value = codec::decode(&cw, args.total, args.d)
                .map_err(|e| CliError::Runtime(e.to_string()))?;
            println!("{value}");
            Ok(())
        }
        Command::Run(args) => {
            let config = SweepConfig {
                model: args.model,
                function: harness::FunctionSpec {
                    kind: args.func,
                    r: args.r,
                    l: args.l,
                    c0: args.c0,
                },
                grid: vec![harness::GridPoint {
                    n: args.n,
                    m: args.m,
                    budget: args.budget,
                }],
                replicates: 1,
                seed: args.seed,
            }
            .validated()
            .map_err(|e| CliError::Config(e.to_string()))?;

            let spec = config
                .build_spec()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let result = protocol::estimate_with(
                &spec,
                args.n,
                args.m,
                args.budget,
                args.r,
                args.seed,
                0,
                args.replicate,
                Transport::Codec,
            );
            if let Some(path) = &args.trace {
                write_trace(path, &spec, &args)?;
            }
            println!("{}", harness::RUN_CSV_HEADER);
            println!("{}", harness::run_csv_row(args.model, &result));
            Ok(())
        }
        Command::Sweep(args) => {
            let text = fs::read_to_string(&args.config)
                .map_err(|e| CliError::Config(format!("{}: {e}", args.config.display())))?;
            let config = SweepConfig::parse_with_seed(&text, args.seed)
                .map_err(|e| CliError::Config(e.to_string()))?;
            let outcome = harness::sweep(&config).map_err(|e| CliError::Runtime(e.to_string()))?;
            fs::write(&args.out_results, &outcome.results_csv)?;
            fs::write(&args.out_summary, &outcome.summary_csv)?;
            if outcome.mixed_regimes {
                eprintln!(
                    "warning: grid mixes budget regimes; the slope fit only uses intermediate-regime points"
                );
            }
            match outcome.slope_intermediate {
                Some(slope) => println!("slope_intermediate={slope}"),
                None => println!("slope_intermediate=NA"),
            }
            println!(
                "wrote {} and {}",
                args.out_results.display(),
                args.out_summary.display()
            );
            Ok(())
        }
        Command::Chart(args) => {
            let text = fs::read_to_string(&args.summary)
                .map_err(|e| CliError::Config(format!("{}: {e}", args.summary.display())))?;
            let svg = chart::emit_chart(&text).map_err(|e| CliError::Config(e.to_string()))?;
            fs::write(&args.out, svg)?;
            println!("wrote {}", args.out.display());
            Ok(())
        }
    }
}

/// Re-run the machines with the same RNG streams and dump their messages.
fn write_trace(
    path: &std::path::Path,
    spec: &bassim::ModelSpec,
    args: &RunArgs,
) -> Result<(), CliError> {
    let assignment = protocol::assign_blocks(args.n, args.m, args.budget, args.r);
    let mut file = fs::File::create(path)?;
    if !assignment.distributed {
        writeln!(file, "# local-only path: no transmissions")?;
        return Ok(());
    }
    for machine in 1..=args.m {
        let mut rng = stream_rng(args.seed, 0, args.replicate, machine as u32);
        let message = protocol::run_machine(spec, args.n, &assignment, machine, &mut rng);
        let hex: String = message.bytes.iter().map(|b| format!("{b:02x}")).collect();
        writeln!(
            file,
            "machine={machine} bits={} hex={hex}",
            message.bit_count
        )?;
    }
    Ok(())
}
