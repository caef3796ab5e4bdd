use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use upconv::bench::{self, Subject, SweepParameter, SweepSpec, TimingRecord};
use upconv::io::{process_file, ProcessOptions};
use upconv::verify::{run_verification, Grid};
use upconv::{list_backends, Backend, Error};

const EXIT_FAILURE: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Parser)]
#[command(name = "upconv", version, about = "Partitioned-convolution auralization engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Time single-block processing over a parameter sweep and write CSV.
    Bench(BenchArgs),
    /// Auralize (or convolve) a mono file with a filter set.
    Process(ProcessArgs),
    /// Check the engine against its reference implementations.
    Verify(VerifyArgs),
    /// List execution backends.
    Devices,
}

#[derive(Args)]
struct BenchArgs {
    /// Pipeline to time; repeat to time several.
    #[arg(long, default_values = ["convolver"], value_parser = ["convolver", "auralizer"])]
    subject: Vec<String>,
    #[arg(long, value_parser = ["block-size", "filter-length", "channels", "fc-length"])]
    sweep: String,
    /// Backend name (reference, parallel, accelerator; aliases cpu, gpu). Repeat to compare.
    #[arg(long, default_values = ["reference"])]
    device: Vec<String>,
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    #[arg(long, default_value_t = 100)]
    warmup: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated swept values overriding the default range.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    /// Fixed block size when it is not swept.
    #[arg(long, default_value_t = 128)]
    block_size: usize,
    /// Fixed output channel count when it is not swept.
    #[arg(long, default_value_t = 32)]
    channels: usize,
    /// Fixed synthesis filter length in seconds when it is not swept.
    #[arg(long, default_value_t = 10.0)]
    filter_length: f64,
    /// Fixed feedback filter length in seconds when it is not swept.
    #[arg(long, default_value_t = 1.0)]
    fc_length: f64,
    #[arg(long, default_value_t = 48_000)]
    sample_rate: u32,
}

#[derive(Args)]
struct ProcessArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    filters: PathBuf,
    #[arg(long)]
    fc_filters: Option<PathBuf>,
    #[arg(long, default_value_t = 128)]
    block_size: usize,
    #[arg(long, default_value = "reference")]
    device: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, default_value = "small")]
    grid: Grid,
    #[arg(long, default_value = "reference")]
    device: String,
}

/// Failure of a subcommand, mapped to an exit status.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::UnknownBackend(_) | Error::InvalidSweep(_) => Failure::Usage(e.to_string()),
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Bench(args) => run_bench(args),
        Command::Process(args) => run_process(args),
        Command::Verify(args) => run_verify(args),
        Command::Devices => {
            for d in list_backends() {
                println!("{}\t{}\t{}", d.name, if d.available { "available" } else { "unavailable" }, d.detail);
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("usage: upconv <bench|process|verify|devices> [OPTIONS]; see `upconv --help`");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn run_bench(args: BenchArgs) -> Result<(), Failure> {
    let parameter: SweepParameter = args.sweep.parse()?;
    let devices: Vec<Backend> = args
        .device
        .iter()
        .map(|d| Backend::from_name(d))
        .collect::<Result<_, _>>()?;
    let mut records: Vec<TimingRecord> = Vec::new();
    for subject in &args.subject {
        let subject: Subject = subject.parse()?;
        for device in &devices {
            let spec = SweepSpec {
                backend: device.name().to_string(),
                values: args.values.clone().unwrap_or_else(|| parameter.default_values()),
                sample_rate_hz: args.sample_rate,
                block_size: args.block_size,
                channels: args.channels,
                synth_length_s: args.filter_length,
                fc_length_s: args.fc_length,
                trials: args.trials,
                warmup_trials: args.warmup,
                rng_seed: args.seed,
                ..SweepSpec::new(subject, parameter)
            };
            spec.validate()?;
            let report = bench::run_sweep(&spec)?;
            for r in &report.records {
                eprintln!(
                    "{} {} {}={} mean {:.3} ms (min {:.3}, max {:.3}) budget {:.3} ms {}",
                    r.subject,
                    r.backend,
                    r.parameter,
                    r.value,
                    r.mean_s * 1e3,
                    r.min_s * 1e3,
                    r.max_s * 1e3,
                    r.budget_s * 1e3,
                    if r.realtime { "real-time" } else { "over budget" }
                );
            }
            for f in &report.failures {
                eprintln!("{subject} {device} {parameter}={} skipped: {}", f.value, f.reason);
            }
            records.extend(report.records);
        }
    }
    if records.is_empty() {
        return Err(Failure::Runtime("no sweep point could be measured".into()));
    }
    print_ratios(&records);
    bench::emit_csv(&records, &args.out)?;
    eprintln!("wrote {} records to {}", records.len(), args.out.display());
    Ok(())
}

/// Speed-up of each further backend over the first one, and the spread
/// between the smallest and largest swept value.
fn print_ratios(records: &[TimingRecord]) {
    let first_backend = &records[0].backend;
    for r in records.iter().filter(|r| &r.backend != first_backend) {
        if let Some(base) = records
            .iter()
            .find(|b| &b.backend == first_backend && b.subject == r.subject && b.value == r.value)
        {
            println!(
                "speedup {} {} over {} at {}={}: {:.2}x",
                r.subject,
                r.backend,
                base.backend,
                r.parameter,
                r.value,
                base.mean_s / r.mean_s
            );
        }
    }
    let mut groups: Vec<(&str, &str)> = records.iter().map(|r| (r.subject.as_str(), r.backend.as_str())).collect();
    groups.dedup();
    for (subject, backend) in groups {
        let group: Vec<&TimingRecord> = records
            .iter()
            .filter(|r| r.subject.as_str() == subject && r.backend == backend)
            .collect();
        if let (Some(lo), Some(hi)) = (group.first(), group.last()) {
            println!(
                "{subject} {backend}: mean at {}={} is {:.3}x the mean at {}={}",
                hi.parameter, hi.value, hi.mean_s / lo.mean_s, lo.parameter, lo.value
            );
        }
    }
}

fn run_process(args: ProcessArgs) -> Result<(), Failure> {
    let backend = Backend::from_name(&args.device)?;
    let summary = process_file(&ProcessOptions {
        input: args.input,
        filters: args.filters,
        fc_filters: args.fc_filters,
        block_size: args.block_size,
        backend,
        output: args.out.clone(),
    })?;
    eprintln!(
        "wrote {} frames x {} channels ({} blocks) to {}",
        summary.frames,
        summary.channels,
        summary.blocks,
        args.out.display()
    );
    Ok(())
}

fn run_verify(args: VerifyArgs) -> Result<(), Failure> {
    let backend = Backend::from_name(&args.device)?;
    let outcomes = run_verification(args.grid, backend, |o| println!("{o}"))?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    println!("{} cases, {} failed", outcomes.len(), failed);
    if failed > 0 {
        return Err(Failure::Runtime(format!("{failed} verification case(s) failed")));
    }
    Ok(())
}
