use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cogniplay_core::platform::{journal_from_jsonl, PlatformSetup};
use cogniplay_sim::{replay, run_cohort, CohortConfig, Exports};

#[derive(Parser)]
#[command(
    name = "cogniplay",
    about = "Simulate learner cohorts and replay engine journals"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a cohort and write logs.csv, evaluations.csv, summary.json and journal.jsonl.
    Simulate {
        /// Cohort file; the shipped 37-learner cohort when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Rebuild engine state from a journal.
    Replay {
        #[arg(long)]
        log: PathBuf,
        /// Cohort file whose course and threshold the journal was made with.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory of a previous run whose exports must match the replay.
        #[arg(long)]
        check: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load(config: Option<&PathBuf>) -> Result<CohortConfig, Box<dyn std::error::Error>> {
    Ok(match config {
        Some(p) => CohortConfig::load(p)?,
        None => CohortConfig::reference_cohort(),
    })
}

fn run(cli: Cli) -> Result<bool, Box<dyn std::error::Error>> {
    match cli.cmd {
        Cmd::Simulate { config, seed, out } => {
            let mut cfg = load(config.as_ref())?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let run = run_cohort(&cfg)?;
            run.write(&out)?;
            let r = &run.report;
            println!(
                "n={} completed={} ({}%) responses={} attempts={} failed={}",
                r.cohort.n,
                r.cohort.completion_count,
                r.cohort.completion_pct,
                r.cohort.response_count,
                r.attempts,
                r.failed_attempts
            );
            for (core, pct) in &r.cohort.core_percentages {
                println!("  {core}: {} ({pct}%)", r.cohort.core_counts[core]);
            }
            for f in &r.failures {
                eprintln!("invariant failed: {f}");
            }
            Ok(r.failures.is_empty())
        }
        Cmd::Replay { log, config, check } => {
            let setup = match config {
                Some(p) => CohortConfig::load(&p)?.platform_setup()?,
                None => PlatformSetup::standard(),
            };
            let journal = journal_from_jsonl(&std::fs::read_to_string(&log)?)?;
            let platform = match replay(setup, &journal) {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("replay rejected: {e}");
                    return Ok(false);
                }
            };
            let mut ok = platform.personalization_violations().is_empty();
            for rt in platform.courses() {
                println!(
                    "course {}: {} learners, {} attempts, {} evaluations",
                    rt.graph.course_id,
                    rt.enrollments.len(),
                    rt.attempts.len(),
                    rt.evaluations.len()
                );
            }
            if let Some(dir) = check {
                let course = platform.courses().next().map(|rt| rt.graph.course_id);
                let e = Exports::of(&platform, course.ok_or("no course")?)?;
                for (name, fresh) in [
                    ("logs.csv", &e.logs_csv),
                    ("evaluations.csv", &e.evaluations_csv),
                ] {
                    let old = std::fs::read_to_string(dir.join(name))?;
                    if &old != fresh {
                        eprintln!("{name} differs from the replayed state");
                        ok = false;
                    }
                }
            }
            Ok(ok)
        }
    }
}
