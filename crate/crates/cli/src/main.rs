use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use collsym_cli::pipeline::{reparam_section, reverify, run_analyze, Overrides};
use collsym_cli::report::AnalysisReport;
use collsym_cli::spec::{parse_spec, Problem};

const EXIT_PASS: u8 = 0;
const EXIT_FAIL: u8 = 1;
const EXIT_INPUT: u8 = 2;

/// Lie and Noether point symmetries of ẍ + Γẋẋ + ω(t)V' = 0.
#[derive(Parser)]
#[command(name = "collsym", version)]
struct Cli {
    /// Seed for every random sample; overrides the spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Residual tolerance for verification; overrides the spec.
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Classify and verify the symmetries of a problem spec.
    Analyze {
        spec: PathBuf,
        #[arg(long)]
        lie: bool,
        #[arg(long)]
        noether: bool,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the analysis recorded in a report and compare.
    Verify { report: PathBuf },
    /// Pair a damping profile with ω (or back) and tabulate the time map.
    Reparam {
        spec: PathBuf,
        /// CSV with columns t, S, omega.
        #[arg(long)]
        out: PathBuf,
        /// Write the JSON report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn load(path: &PathBuf, overrides: &Overrides) -> Result<Problem, String> {
    let spec = parse_spec(path).map_err(|e| e.to_string())?;
    let mut problem = spec.validate().map_err(|e| e.to_string())?;
    overrides.apply(&mut problem);
    if let Some(t) = overrides.tol {
        if !(t > 0.0 && t.is_finite()) {
            return Err(format!("--tol must be positive, got {t}"));
        }
    }
    Ok(problem)
}

fn emit(report: &AnalysisReport, out: Option<&PathBuf>) -> Result<(), String> {
    let json = report.to_json();
    match out {
        Some(p) => std::fs::write(p, json + "\n").map_err(|e| format!("cannot write {}: {e}", p.display())),
        None => {
            println!("{json}");
            Ok(())
        }
    }
}

fn summary(report: &AnalysisReport) {
    for (name, status) in report.verdicts() {
        eprintln!("{status:?}\t{name}");
    }
    for e in &report.errors {
        eprintln!("error\t{e}");
    }
    eprintln!("{}", if report.pass { "all checks passed" } else { "verification failed" });
}

fn run(cli: Cli) -> Result<u8, (u8, String)> {
    let input = |e: String| (EXIT_INPUT, e);
    let mut overrides = Overrides { seed: cli.seed, tol: cli.tol, ..Overrides::default() };
    let verdict = |pass: bool| if pass { EXIT_PASS } else { EXIT_FAIL };
    match cli.command {
        Command::Analyze { spec, lie, noether, out } => {
            overrides.lie = lie;
            overrides.noether = noether;
            let problem = load(&spec, &overrides).map_err(input)?;
            let report = run_analyze(&problem);
            summary(&report);
            emit(&report, out.as_ref()).map_err(input)?;
            Ok(verdict(report.pass))
        }
        Command::Verify { report } => {
            let text = std::fs::read_to_string(&report).map_err(|e| input(format!("cannot read {}: {e}", report.display())))?;
            let (fresh, mismatches) = reverify(&text, &overrides).map_err(input)?;
            summary(&fresh);
            for m in &mismatches {
                eprintln!("mismatch\t{m}");
            }
            Ok(verdict(fresh.pass && mismatches.is_empty()))
        }
        Command::Reparam { spec, out, report } => {
            let mut problem = load(&spec, &overrides).map_err(input)?;
            problem.spec.analysis.lie = false;
            problem.spec.analysis.noether = false;
            problem.spec.analysis.reparam = true;
            let (_, table) = reparam_section(&problem).map_err(|e| (EXIT_FAIL, e.to_string()))?;
            std::fs::write(&out, table).map_err(|e| input(format!("cannot write {}: {e}", out.display())))?;
            let mut full = run_analyze(&problem);
            if let Some(r) = full.reparam.as_mut() {
                r.table = Some(out.display().to_string());
            }
            summary(&full);
            if let Some(p) = &report {
                emit(&full, Some(p)).map_err(input)?;
            }
            Ok(verdict(full.pass))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
