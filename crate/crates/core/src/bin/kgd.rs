use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kgd::harness::{self, CompareArgs, RunArgs};

#[derive(Parser)]
#[command(
    name = "kgd",
    version,
    about = "Kalman-filtered gradient descent experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one configuration over a list of seeds and write the trace CSV.
    Run(Box<RunArgs>),
    /// Run two config files on the same seeds and report paired differences.
    Compare(CompareArgs),
    /// Run the numerical diagnostic suite.
    Verify,
}

fn run(args: &RunArgs) -> kgd::Result<()> {
    let mut config = args.to_config()?;
    let out = config.out_path.take();
    let traces = harness::run_experiment(&config)?;
    match out {
        Some(path) => harness::write_csv_path(&path, &traces)?,
        None => harness::write_csv(std::io::stdout().lock(), &traces)?,
    }
    let failed = traces.iter().filter(|r| !r.status.is_ok()).count();
    if failed > 0 {
        eprintln!("{failed} seed(s) ended with a failure row");
    }
    Ok(())
}

fn compare(args: &CompareArgs) -> kgd::Result<()> {
    let mut a = harness::parse_config_file(&args.config_a)?.to_config()?;
    let mut b = harness::parse_config_file(&args.config_b)?.to_config()?;
    a.out_path = None;
    b.out_path = None;
    let report = harness::compare(&a, &b, args.threshold)?;
    match &args.out {
        Some(path) => report.write_csv(std::fs::File::create(path)?)?,
        None => report.write_csv(std::io::stdout().lock())?,
    }
    eprintln!(
        "A better on {} seed(s), B better on {}, ties {}; sign test p = {:.4}",
        report.a_better, report.b_better, report.ties, report.sign_test_p
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Compare(args) => compare(args),
        Command::Verify => {
            let checks = kgd::verify::run_all();
            for c in &checks {
                println!(
                    "{} {:<28} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if checks.iter().all(|c| c.passed) {
                return ExitCode::SUCCESS;
            }
            return ExitCode::FAILURE;
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
