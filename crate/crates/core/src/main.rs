use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use resonance_lab::fit::Verdict;
use resonance_lab::study::{exit_code, fit_file, run_study, write_outputs, StudyError, StudyName, StudySpec};

/// Runs named studies and grades them against their tolerance tables.
#[derive(Parser)]
#[command(name = "resonance-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sup-norm decay of the free flow; d >= 3 runs the coarse smoke test.
    LinearDecay(RunArgs),
    /// Decay of L^1-normalised dyadic bands.
    BandedDecay(RunArgs),
    /// Sampled lower bounds and the space-time resonance audit.
    ResonanceAudit(RunArgs),
    /// Pseudo-product, fractional integration and multiplier-norm checks.
    OperatorSuite(RunArgs),
    /// Solver cross-validation and the small-data long-time run.
    NonlinearScatter(RunArgs),
    /// Profile decomposition on a short run.
    ProfileMonitor(RunArgs),
    /// Fits the first two columns of a CSV as `(t, norm)` and grades the slope.
    Fit(FitArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat TOML study configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    dim: Option<usize>,
    /// Points per axis.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct FitArgs {
    csv: PathBuf,
    #[arg(long, allow_hyphen_values = true)]
    expected: f64,
    #[arg(long, default_value_t = 0.05)]
    tolerance: f64,
    #[arg(long)]
    quiet: bool,
}

fn run(name: StudyName, args: RunArgs) -> Result<Verdict, StudyError> {
    let mut spec = match &args.config {
        Some(path) => StudySpec::from_toml(&std::fs::read_to_string(path)?)?,
        None => StudySpec::default(),
    };
    if args.dim.is_some() {
        spec.dim = args.dim;
    }
    if args.grid.is_some() {
        spec.n = args.grid;
    }
    if args.seed.is_some() {
        spec.seed = args.seed;
    }
    let report = run_study(name, &spec, None)?;
    write_outputs(&report, &spec, &args.out)?;
    if !args.quiet {
        for c in &report.checks {
            let tag = if c.asserted { "" } else { " (recorded)" };
            println!("{:<9} {:<28} {:>12.5e}  {}{}", c.verdict.label(), c.name, c.measured, c.limit, tag);
        }
        println!("{} {} in {:.1} s -> {}", report.verdict().label(), name, report.runtime_seconds, args.out.display());
    }
    Ok(report.verdict())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Fit(a) => fit_file(&a.csv, a.expected, a.tolerance).map(|(fit, v)| {
            if !a.quiet {
                println!("{} slope {:.6} over {:.2} decades", v.label(), fit.slope, fit.decades());
            }
            v
        }),
        Command::LinearDecay(a) => run(StudyName::LinearDecay, a),
        Command::BandedDecay(a) => run(StudyName::BandedDecay, a),
        Command::ResonanceAudit(a) => run(StudyName::ResonanceAudit, a),
        Command::OperatorSuite(a) => run(StudyName::OperatorSuite, a),
        Command::NonlinearScatter(a) => run(StudyName::NonlinearScatter, a),
        Command::ProfileMonitor(a) => run(StudyName::ProfileMonitor, a),
    };
    match outcome {
        Ok(v) => ExitCode::from(exit_code(v) as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
