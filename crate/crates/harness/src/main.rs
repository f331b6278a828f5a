use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tmsk_harness::config::load_with_overrides;
use tmsk_harness::{emit_report, run_experiment, ExperimentKind, Format, THREADS_ENV};

#[derive(Parser)]
#[command(name = "tmsk", version, about = "3MSK DFT-s-OFDM reproduction studies")]
struct Cli {
    /// Worker threads; 0 lets the runtime decide.
    #[arg(long, global = true, env = THREADS_ENV, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// PAPR CCDF.
    Papr(StudyArgs),
    /// Welch power spectral density.
    Psd(StudyArgs),
    /// Normalized occupied bandwidth at OOB power ratios.
    Obw(StudyArgs),
    /// Output back-off search against RF requirements.
    Obo(StudyArgs),
    /// Uncoded BER over an SNR sweep.
    Link(StudyArgs),
    /// Structural checks of the signal chain.
    Selftest,
}

#[derive(Args)]
struct StudyArgs {
    /// Experiment spec (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, overriding the spec.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory, overriding the spec (default `results`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Frames per sweep point, overriding the spec.
    #[arg(long)]
    trials: Option<usize>,
    /// Extra `dotted.key=value` overrides, applied in order.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

fn study(kind: ExperimentKind, args: &StudyArgs) -> tmsk_harness::Result<()> {
    let mut overrides = vec![format!("kind = \"{}\"", kind.name())];
    if let Some(s) = args.seed {
        overrides.push(format!("seed = {s}"));
    }
    if let Some(t) = args.trials {
        overrides.push(format!("trials = {t}"));
    }
    overrides.extend(args.set.iter().cloned());
    let spec = load_with_overrides(&args.config, &overrides)?;
    let record = run_experiment(&spec)?;
    let dir = args
        .out
        .clone()
        .or(spec.output.clone())
        .unwrap_or_else(|| PathBuf::from("results"));
    for path in emit_report(&record, &dir, args.format)? {
        println!("{}", path.display());
    }
    eprintln!(
        "{} {} in {:.1} s (config {})",
        kind.name(),
        spec.id,
        record.runtime_s,
        &record.config_hash[..12]
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    let (kind, args) = match &cli.command {
        Command::Papr(a) => (ExperimentKind::Papr, a),
        Command::Psd(a) => (ExperimentKind::Psd, a),
        Command::Obw(a) => (ExperimentKind::Obw, a),
        Command::Obo(a) => (ExperimentKind::Obo, a),
        Command::Link(a) => (ExperimentKind::Link, a),
        Command::Selftest => {
            let mut ok = true;
            for c in tmsk_harness::selftest::run() {
                match c.outcome {
                    Ok(()) => println!("PASS {}", c.name),
                    Err(e) => {
                        ok = false;
                        println!("FAIL {}: {e}", c.name);
                    }
                }
            }
            return if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            };
        }
    };
    match study(kind, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
