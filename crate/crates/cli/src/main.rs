use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sdc_core::journal::Journal;
use sdc_core::simulator::{
    calibrate_buffer, load_scenario, run_simulation, write_report, Outcome, ReportFormat, RunMode, Scenario, SimError,
};
use sdc_core::TerminationCause;

const EXIT_ENGINE: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_EARLY_TERMINATION: u8 = 3;

#[derive(Parser)]
#[command(name = "sdc", version, about = "Run and inspect smart derivative contract simulations")]
struct Cli {
    /// Print progress details to standard error.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario file.
    Validate { scenario: PathBuf },
    /// Run a scenario and write its report and journal.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<RunMode>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value = "text", value_parser = parse_format)]
        format: ReportFormat,
    },
    /// Check the hash chain of an exported journal.
    Verify { journal: PathBuf },
    /// Size a margin buffer as a quantile of simulated settlement amounts.
    Calibrate {
        scenario: PathBuf,
        #[arg(long, default_value_t = 0.99)]
        q: f64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn parse_mode(s: &str) -> Result<RunMode, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse()
}

fn fail(code: u8, msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("sdc: {msg}");
    ExitCode::from(code)
}

fn load(path: &Path) -> Result<Scenario, ExitCode> {
    load_scenario(path).map_err(|e| fail(EXIT_INPUT, format!("{}: {e}", path.display())))
}

fn validate(path: &Path, verbose: u8) -> ExitCode {
    match load(path) {
        Ok(s) => {
            if verbose > 0 {
                eprintln!(
                    "{}: {} settlements, maturity tick {}, mode {}",
                    path.display(),
                    s.contract.settlements,
                    s.maturity_tick(),
                    s.mode
                );
            }
            ExitCode::SUCCESS
        }
        Err(code) => code,
    }
}

fn run(path: &Path, seed: Option<u64>, mode: Option<RunMode>, out: &Path, format: ReportFormat, verbose: u8) -> ExitCode {
    let mut scenario = match load(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    if let Some(mode) = mode {
        scenario.mode = mode;
        if let Err(e) = scenario.validate() {
            return fail(EXIT_INPUT, e);
        }
    }
    let report = match run_simulation(&scenario) {
        Ok(r) => r,
        Err(e @ (SimError::Scenario(_) | SimError::Script { .. })) => return fail(EXIT_INPUT, e),
        Err(e) => return fail(EXIT_ENGINE, e),
    };
    if let Err(e) = std::fs::create_dir_all(out) {
        return fail(EXIT_ENGINE, format!("{}: {e}", out.display()));
    }
    let report_path = out.join(format!("report.{}", format.extension()));
    if let Err(e) = write_report(&report, &report_path, format) {
        return fail(EXIT_ENGINE, format!("{}: {e}", report_path.display()));
    }
    let journal_path = out.join("journal.bin");
    if let Err(e) = report.journal.export(&journal_path) {
        return fail(EXIT_ENGINE, format!("{}: {e}", journal_path.display()));
    }
    if verbose > 0 {
        eprintln!("wrote {} and {}", report_path.display(), journal_path.display());
    }
    println!("termination: {}", report.outcome);
    println!("journal: {}", report.journal_head);
    if !report.checks.all_ok() {
        return fail(EXIT_ENGINE, format!("invariant checks failed: {:?}", report.checks));
    }
    match report.outcome {
        Outcome::Terminated {
            cause: TerminationCause::Matured,
            ..
        } => ExitCode::SUCCESS,
        Outcome::Terminated { .. } => ExitCode::from(EXIT_EARLY_TERMINATION),
        _ => ExitCode::from(EXIT_ENGINE),
    }
}

fn verify(path: &Path) -> ExitCode {
    match Journal::import(path) {
        Ok(j) if j.verify() => {
            println!("ok: {} blocks, head {}", j.len(), j.head_hex());
            ExitCode::SUCCESS
        }
        Ok(_) => fail(EXIT_INPUT, format!("{}: hash chain broken", path.display())),
        Err(e) => fail(EXIT_INPUT, format!("{}: {e}", path.display())),
    }
}

fn calibrate(path: &Path, q: f64, trials: usize, seed: Option<u64>) -> ExitCode {
    if !(q > 0.0 && q <= 1.0) {
        return fail(EXIT_INPUT, format!("--q must lie in (0, 1], got {q}"));
    }
    let mut scenario = match load(path) {
        Ok(s) => s,
        Err(code) => return code,
    };
    if let Some(seed) = seed {
        scenario.seed = seed;
    }
    match calibrate_buffer(&scenario, q, trials) {
        Ok(m) => {
            println!("{m}");
            ExitCode::SUCCESS
        }
        Err(e @ SimError::TooFewTrials(_)) => fail(EXIT_INPUT, e),
        Err(e) => fail(EXIT_ENGINE, e),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { scenario } => validate(&scenario, cli.verbose),
        Command::Run {
            scenario,
            seed,
            mode,
            out,
            format,
        } => run(&scenario, seed, mode, &out, format, cli.verbose),
        Command::Verify { journal } => verify(&journal),
        Command::Calibrate {
            scenario,
            q,
            trials,
            seed,
        } => calibrate(&scenario, q, trials, seed),
    }
}
