//! `gyrobundle` command-line runner.
//!
//! Exit codes: 0 pass, 1 threshold violation, 2 input error, 3 numerical abort.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gyrobundle::scenario::{parse_scenario, run, write_trajectory_csv};
use gyrobundle::verify::{compare_srj, verify_suite};
use gyrobundle::Error;

const PASS: u8 = 0;
const THRESHOLD: u8 = 1;
const INPUT: u8 = 2;
const ABORT: u8 = 3;

#[derive(Parser)]
#[command(name = "gyrobundle", version, about = "Spacecraft + single VSCMG simulation and verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file, or every `*.scn` file in a directory with --batch.
    Run {
        scenario: Option<PathBuf>,
        /// Directory for the trajectory CSV and report.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Run every scenario in this directory concurrently.
        #[arg(long)]
        batch: Option<PathBuf>,
    },
    /// Run the seeded property and oracle suite and print a pass/fail table.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Compare the geometric and Newtonian attitude equations term by term.
    CompareSrj {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
}

fn error_code(e: &Error) -> u8 {
    match e {
        Error::NumericalAbort { .. } | Error::NotPositiveDefinite(_) => ABORT,
        _ => INPUT,
    }
}

/// Runs one scenario and writes `<stem>.csv` and `<stem>.report` into `out`.
fn run_one(path: &Path, out: &Path) -> (u8, String) {
    let scenario = match parse_scenario(path) {
        Ok(s) => s,
        Err(e) => return (INPUT, format!("{}: {e}\n", path.display())),
    };
    let result = match run(&scenario) {
        Ok(r) => r,
        Err(e) => return (error_code(&e), format!("{}: {e}\n", path.display())),
    };
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    let write = || -> gyrobundle::Result<()> {
        fs::create_dir_all(out)?;
        if let Some(t) = &result.trajectory {
            write_trajectory_csv(t, BufWriter::new(File::create(out.join(format!("{stem}.csv")))?))?;
        }
        fs::write(out.join(format!("{stem}.report")), result.report.to_text())?;
        Ok(())
    };
    if let Err(e) = write() {
        return (INPUT, format!("{}: {e}\n", path.display()));
    }
    let code = if result.report.passed() { PASS } else { THRESHOLD };
    (code, format!("# {}\n{}", path.display(), result.report.to_text()))
}

fn run_batch(dir: &Path, out: &Path) -> Vec<(u8, String)> {
    let mut files: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "scn"))
            .collect(),
        Err(e) => return vec![(INPUT, format!("{}: {e}\n", dir.display()))],
    };
    files.sort();
    if files.is_empty() {
        return vec![(INPUT, format!("{}: no .scn files\n", dir.display()))];
    }
    std::thread::scope(|scope| {
        let handles: Vec<_> = files.iter().map(|f| scope.spawn(move || run_one(f, out))).collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or((ABORT, "worker panicked\n".to_string())))
            .collect()
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let results = match cli.command {
        Command::Run { scenario, out, batch } => match (scenario, batch) {
            (Some(file), None) => vec![run_one(&file, &out)],
            (None, Some(dir)) => run_batch(&dir, &out),
            (Some(_), Some(_)) => vec![(INPUT, "give either a scenario file or --batch, not both\n".to_string())],
            (None, None) => vec![(INPUT, "missing scenario file (or --batch dir)\n".to_string())],
        },
        Command::Verify { seed, trials } => {
            let rows = verify_suite(seed, trials.max(1));
            let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0);
            let mut text = format!("{:<width$}  {:>10}  {:>10}  result\n", "check", "residual", "tolerance");
            for r in &rows {
                let verdict = if r.passed() { "PASS" } else { "FAIL" };
                text += &format!("{:<width$}  {:>10.2e}  {:>10.0e}  {verdict}\n", r.name, r.residual, r.tolerance);
            }
            let code = if rows.iter().all(|r| r.passed()) { PASS } else { THRESHOLD };
            vec![(code, text)]
        }
        Command::CompareSrj { seed, trials } => {
            let c = compare_srj(None, seed, trials.max(1));
            let mut text = format!("states = {trials}\nrhs_residual_max = {:e}\n", c.rhs_residual_max);
            for (k, (label, v)) in c.terms.iter().enumerate() {
                text += &format!("term_{} = {v:e}  # {label}\n", k + 1);
            }
            let ok = c.rhs_residual_max < 1e-10 && c.term_residual_max() < 1e-13;
            text += &format!("status = {}\n", if ok { "pass" } else { "fail" });
            vec![(if ok { PASS } else { THRESHOLD }, text)]
        }
    };
    for (code, text) in &results {
        if *code == INPUT || *code == ABORT {
            eprint!("{text}");
        } else {
            print!("{text}");
        }
    }
    ExitCode::from(results.iter().map(|r| r.0).max().unwrap_or(PASS))
}
