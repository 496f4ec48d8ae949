//! Command-line front end: `verify`, `run`, and `trace` over `.fvf` files.
//!
//! Exit codes are shared by all subcommands: 0 on success (everything
//! verified, or no concrete trial failed), 1 on a verification or run
//! failure, 2 on a parse or static error (including unknown routines and
//! malformed flags). All results go to stdout; diagnostics go to stderr.
//! Identical invocations produce byte-identical stdout: routine output is
//! buffered and emitted in declaration order, and seeded runs draw from a
//! deterministic ChaCha8 stream.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::rc::Rc;

use clap::{Parser, Subcommand};

use fvf_core::choices::ValueSource;
use fvf_core::concrete::{self, RunOutcome};
use fvf_core::prover::Prover;
use fvf_core::symbolic::{svalid_program, svalid_routine, SymEnv};
use fvf_core::syntax::{parse_program, Program};

#[derive(Parser)]
#[command(name = "fvf")]
#[command(about = "Modular verifier for a small heap-manipulating language")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Verify every routine against its contract, then main
    Verify {
        /// Path to a .fvf program
        file: PathBuf,

        /// Print the full symbolic step log before the verdict
        #[arg(long)]
        trace: bool,

        /// Export each prover query as SMT-LIB 2 into this directory
        #[arg(long, value_name = "DIR")]
        smtlib_dir: Option<PathBuf>,
    },

    /// Run main concretely with annotations ignored
    Run {
        /// Path to a .fvf program
        file: PathBuf,

        /// Step depth bound; runs block when it is exhausted
        #[arg(long)]
        depth: u32,

        /// Comma-separated integers answering malloc draws in order
        #[arg(long, value_name = "CSV", conflicts_with_all = ["seed", "trials"])]
        choices: Option<String>,

        /// Seed for the deterministic random choice stream
        #[arg(long)]
        seed: Option<u64>,

        /// Repeat with per-trial streams derived from the seed
        #[arg(long, value_name = "T", requires = "seed")]
        trials: Option<u64>,

        /// Print one state line per executed command
        #[arg(long)]
        trace: bool,
    },

    /// Print the full symbolic step log of one routine
    Trace {
        /// Path to a .fvf program
        file: PathBuf,

        /// Routine name as declared
        #[arg(long)]
        routine: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Cmd::Verify {
            file,
            trace,
            smtlib_dir,
        } => cmd_verify(&file, trace, smtlib_dir),
        Cmd::Run {
            file,
            depth,
            choices,
            seed,
            trials,
            trace,
        } => cmd_run(&file, depth, choices, seed, trials, trace),
        Cmd::Trace { file, routine } => cmd_trace(&file, &routine),
    }
}

/// Reads and parses a program, reporting parse and static errors on
/// stderr with the conventional exit code.
fn load(file: &Path) -> Result<Rc<Program>, ExitCode> {
    let src = std::fs::read_to_string(file).map_err(|e| {
        eprintln!("{}: {e}", file.display());
        ExitCode::from(2)
    })?;
    let prog = parse_program(&src).map_err(|e| {
        eprintln!("{}: {e}", file.display());
        ExitCode::from(2)
    })?;
    Ok(Rc::new(prog))
}

fn cmd_verify(file: &Path, trace: bool, smtlib_dir: Option<PathBuf>) -> ExitCode {
    let prog = match load(file) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let prover = Rc::new(match smtlib_dir {
        Some(dir) => Prover::with_dump_dir(dir),
        None => Prover::new(),
    });
    let verdict = svalid_program(&prog, prover);
    if trace {
        for rv in verdict.all() {
            for line in &rv.trace {
                println!("{line}");
            }
        }
    }
    if verdict.valid() {
        println!("verified: {} routines, main ok", verdict.routines.len());
        ExitCode::SUCCESS
    } else {
        for rv in verdict.all().filter(|rv| !rv.valid) {
            println!("failed: {}", rv.name);
            for line in rv.failure.iter().flatten() {
                println!("{line}");
            }
        }
        ExitCode::from(1)
    }
}

fn cmd_run(
    file: &Path,
    depth: u32,
    choices: Option<String>,
    seed: Option<u64>,
    trials: Option<u64>,
    trace: bool,
) -> ExitCode {
    let prog = match load(file) {
        Ok(p) => p,
        Err(code) => return code,
    };
    match (choices, seed) {
        (Some(csv), None) => {
            let mut source = match ValueSource::script_csv(&csv) {
                Ok(s) => s,
                Err(e) => {
                    eprintln!("--choices: {e}");
                    return ExitCode::from(2);
                }
            };
            let report = concrete::run(&prog, depth, &mut source);
            if trace {
                for line in &report.trace {
                    println!("{line}");
                }
            }
            println!("{}", outcome_line(&report.outcome));
            match report.outcome {
                RunOutcome::Failed(_) => ExitCode::from(1),
                _ => ExitCode::SUCCESS,
            }
        }
        (None, Some(seed)) => {
            let trials = trials.unwrap_or(1);
            let mut completed = 0u64;
            let mut blocked = 0u64;
            let mut failed = 0u64;
            for trial in 0..trials {
                let mut source = ValueSource::random(seed, trial);
                let report = concrete::run(&prog, depth, &mut source);
                if trace && trials == 1 {
                    for line in &report.trace {
                        println!("{line}");
                    }
                }
                let line = outcome_line(&report.outcome);
                if trials == 1 {
                    println!("{line}");
                } else {
                    println!("trial {trial}: {line}");
                }
                match report.outcome {
                    RunOutcome::Completed(_) => completed += 1,
                    RunOutcome::Blocked(_) => blocked += 1,
                    RunOutcome::Failed(_) => {
                        failed += 1;
                        // A failed seeded trial is a soundness lead; hand the
                        // exact script back for deterministic replay.
                        let script: Vec<String> =
                            source.drawn().iter().map(|v| v.to_string()).collect();
                        println!("  replay: --choices \"{}\"", script.join(","));
                    }
                }
            }
            if trials > 1 {
                println!("trials: {trials}, ok {completed}, blocked {blocked}, failed {failed}");
            }
            if failed == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        _ => {
            eprintln!("run needs exactly one of --choices or --seed");
            ExitCode::from(2)
        }
    }
}

fn outcome_line(outcome: &RunOutcome) -> String {
    match outcome {
        RunOutcome::Completed(_) => "ok".to_string(),
        RunOutcome::Failed(m) => format!("failed: {m}"),
        RunOutcome::Blocked(m) if m.contains("choice source exhausted") => {
            format!("script-exhausted: {m}")
        }
        RunOutcome::Blocked(m) => format!("blocked: {m}"),
    }
}

fn cmd_trace(file: &Path, routine: &str) -> ExitCode {
    let prog = match load(file) {
        Ok(p) => p,
        Err(code) => return code,
    };
    let Some(def) = prog.routines.iter().find(|r| r.name == routine) else {
        eprintln!("unknown routine: {routine}");
        return ExitCode::from(2);
    };
    let env = SymEnv::new(prog.clone(), Rc::new(Prover::new()));
    let rv = svalid_routine(&env, def);
    for line in &rv.trace {
        println!("{line}");
    }
    if rv.valid {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
