//! The `greff` command: check, elaborate, run and test GrEff programs.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{CommandFactory, Parser, Subcommand};
use greff_conformance::suite::{self, SuiteReport};
use greff_conformance::imprecisify;
use greff_core::core_lang::{check, print_term};
use greff_core::elaborate::{elab_program, Elaborated};
use greff_core::eval::{evaluate_observed, trace_line, Outcome, DEFAULT_FUEL};
use greff_core::surface::{parse_program, Program};

pub const EXIT_OK: i32 = 0;
pub const EXIT_STATIC: i32 = 1;
pub const EXIT_ERROR: i32 = 2;
pub const EXIT_FUEL: i32 = 3;
pub const EXIT_VIOLATION: i32 = 4;
pub const EXIT_UNCAUGHT: i32 = 5;
pub const EXIT_USAGE: i32 = 64;
pub const EXIT_IO: i32 = 74;
/// The machine got stuck on a term the checker accepted.
pub const EXIT_INTERNAL: i32 = 70;

#[derive(Parser, Debug)]
#[command(name = "greff", version, about = "Gradually typed effect handlers")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Parse, elaborate and typecheck; print the inferred effect and type.
    Check { file: PathBuf },
    /// Print the elaborated core term.
    Elab { file: PathBuf },
    /// Run a program and print its outcome.
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
        /// Print one line per fired rule to stderr.
        #[arg(long)]
        trace: bool,
    },
    /// Make random effect annotations imprecise and check both gradual
    /// guarantees on every pair.
    Graduality {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        cases: usize,
        #[arg(long, default_value_t = DEFAULT_FUEL, value_parser = clap::value_parser!(u64).range(1..))]
        fuel: u64,
    },
    /// Run every property batch.
    Conformance {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write one JSON record per case to this file.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write the example corpus into a directory.
    GenCorpus { dir: PathBuf },
}

/// Runs the command line `argv` (program name first) and returns the exit
/// code. Everything is printed to `out` and `err`.
pub fn run_command<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let mut text = e.render().to_string();
            if e.use_stderr() && !text.contains("Usage:") {
                text.push_str(&format!("\n{}\n", Cli::command().render_usage()));
            }
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "greff: {e:#}");
            EXIT_IO
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Check { file } => {
            let Some(e) = load(&file, err)? else { return Ok(EXIT_STATIC) };
            if let Err(te) = check(&e.sig, &Vec::new(), &e.term, &e.eff, &e.ty) {
                writeln!(err, "{}: elaborated term is ill-typed: {te}", file.display())?;
                return Ok(EXIT_STATIC);
            }
            writeln!(out, "({}, {})", e.eff, e.ty)?;
            Ok(EXIT_OK)
        }
        Command::Elab { file } => {
            let Some(e) = load(&file, err)? else { return Ok(EXIT_STATIC) };
            writeln!(out, "{}", print_term(&e.term))?;
            Ok(EXIT_OK)
        }
        Command::Run { file, fuel, trace } => {
            let Some(e) = load(&file, err)? else { return Ok(EXIT_STATIC) };
            let mut trace_err = None;
            let result = evaluate_observed(&e.sig, &e.term, fuel, &mut |m, rule| {
                if trace && trace_err.is_none() {
                    if let Err(x) = writeln!(err, "{}", trace_line(m, rule)) {
                        trace_err = Some(x);
                    }
                }
            });
            if let Some(x) = trace_err {
                return Err(x.into());
            }
            let ev = match result {
                Ok(ev) => ev,
                Err(stuck) => {
                    writeln!(err, "{}: {stuck}", file.display())?;
                    return Ok(EXIT_INTERNAL);
                }
            };
            writeln!(out, "{}", ev.outcome)?;
            if trace {
                writeln!(err, "{} steps", ev.steps)?;
            }
            Ok(match ev.outcome {
                Outcome::Value(_) => EXIT_OK,
                Outcome::Error => EXIT_ERROR,
                Outcome::FuelExhausted(_) => EXIT_FUEL,
                Outcome::UncaughtRaise(_) => EXIT_UNCAUGHT,
            })
        }
        Command::Graduality { file, seed, cases, fuel } => {
            let Some(p) = parse(&file, err)? else { return Ok(EXIT_STATIC) };
            if let Err(e) = elab_program(&p) {
                writeln!(err, "{}: {e}", file.display())?;
                return Ok(EXIT_STATIC);
            }
            if imprecisify(&p, seed).is_err() {
                writeln!(out, "no concrete effect annotations: nothing to check")?;
                return Ok(EXIT_OK);
            }
            let report = suite::graduality_of(&p, seed, cases, fuel);
            print_failures(&report, out)?;
            writeln!(out, "{}", report.summary())?;
            Ok(if report.passed() { EXIT_OK } else { EXIT_VIOLATION })
        }
        Command::Conformance { seed, report } => {
            let reports = suite::run_all(seed);
            let mut ok = true;
            for r in &reports {
                print_failures(r, out)?;
                writeln!(out, "{}{}", r.summary(), if r.passed() { "" } else { "  FAILED" })?;
                ok &= r.passed();
            }
            if let Some(path) = report {
                let text: String = reports.iter().map(SuiteReport::jsonl).collect();
                std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            }
            Ok(if ok { EXIT_OK } else { EXIT_VIOLATION })
        }
        Command::GenCorpus { dir } => {
            write_corpus(&dir)?;
            writeln!(out, "wrote {} files to {}", greff_core::corpus::files().len(), dir.display())?;
            Ok(EXIT_OK)
        }
    }
}

fn print_failures(r: &SuiteReport, out: &mut dyn Write) -> Result<()> {
    for rec in r.records.iter().filter(|x| x.status == suite::Status::Fail) {
        writeln!(out, "{} case {} (seed {}): {} {:?}", r.name, rec.case, rec.seed, rec.verdict, rec.outcomes)?;
        if let Some(d) = &rec.detail {
            writeln!(out, "  {d}")?;
        }
    }
    Ok(())
}

fn parse(file: &Path, err: &mut dyn Write) -> Result<Option<Program>> {
    let src = std::fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    match parse_program(&src) {
        Ok(p) => Ok(Some(p)),
        Err(e) => {
            writeln!(err, "{}: {e}", file.display())?;
            Ok(None)
        }
    }
}

/// Parses and elaborates `file`; static errors are reported to `err`.
fn load(file: &Path, err: &mut dyn Write) -> Result<Option<Elaborated>> {
    let Some(p) = parse(file, err)? else { return Ok(None) };
    match elab_program(&p) {
        Ok(e) => Ok(Some(e)),
        Err(e) => {
            writeln!(err, "{}: {e}", file.display())?;
            Ok(None)
        }
    }
}

/// Writes every corpus file into `dir`, creating it if needed.
pub fn write_corpus(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    for (name, body) in greff_core::corpus::files() {
        let path = dir.join(name);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
