//! One line per acceptance criterion; exits non-zero if any fails.

use std::path::PathBuf;
use std::time::{Duration, Instant};

use greff_cli::{run_command, EXIT_ERROR, EXIT_OK, EXIT_STATIC};
use greff_conformance::suite::{self, SuiteReport};
use greff_core::core_lang::Term;
use greff_core::elaborate::elab_program;
use greff_core::eval::{evaluate, reference, Outcome, DEFAULT_FUEL};
use greff_core::surface::parse_program;

const SEED: u64 = 0;

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name).display().to_string()
}

fn cli(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_command(std::iter::once("greff").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8_lossy(&out).into_owned() + &String::from_utf8_lossy(&err))
}

type Verdict = Result<String, String>;
type Criterion = (&'static str, Box<dyn Fn() -> Verdict>);

fn suites(reports: &[SuiteReport], at_least: usize) -> Verdict {
    let mut notes = Vec::new();
    for r in reports {
        if r.cases < at_least || !r.passed() {
            return Err(r.summary());
        }
        notes.push(format!("{} {}", r.name, r.cases));
    }
    Ok(format!("{}; 0 failures", notes.join(", ")))
}

fn combinations() -> Verdict {
    let start = Instant::now();
    for o in ['I', 'P'] {
        for s in ['I', 'P'] {
            for m in ['I', 'P'] {
                let name = format!("combo_{o}{s}{m}.greff");
                let (code, text) = cli(&["check", &corpus(&name)]);
                if code != EXIT_OK {
                    return Err(format!("{name}: exit {code}: {}", text.trim()));
                }
            }
        }
    }
    let took = start.elapsed();
    if took >= Duration::from_secs(1) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("8 combinations in {took:?}"))
}

fn scheduler() -> Verdict {
    let mut notes = Vec::new();
    for name in ["threads_imprecise.greff", "threads_precise.greff"] {
        let src = std::fs::read_to_string(corpus(name)).map_err(|e| e.to_string())?;
        let p = parse_program(&src).map_err(|e| format!("{name}: {e}"))?;
        let e = elab_program(&p).map_err(|e| format!("{name}: {e}"))?;
        let ev = evaluate(&e.sig, &e.term, DEFAULT_FUEL).map_err(|s| s.to_string())?;
        let want = Outcome::Value(Term::Str("1a2b".into()));
        if ev.outcome != want || ev.steps >= 10_000 {
            return Err(format!("{name}: {} after {} steps", ev.outcome, ev.steps));
        }
        let (ref_outcome, _) = reference::evaluate(&e.sig, &e.term, DEFAULT_FUEL)?;
        if ref_outcome != want {
            return Err(format!("{name}: reference evaluator gives {ref_outcome}"));
        }
        let (code, out) = cli(&["run", &corpus(name)]);
        if code != EXIT_OK || out.trim() != "\"1a2b\"" {
            return Err(format!("{name}: cli exit {code}: {}", out.trim()));
        }
        notes.push(format!("{name} {} steps", ev.steps));
    }
    Ok(notes.join(", "))
}

fn soundness() -> Verdict {
    let start = Instant::now();
    let r = suites(&[suite::soundness(SEED, 1000)], 1000)?;
    let took = start.elapsed();
    if took >= Duration::from_secs(60) {
        return Err(format!("took {took:?}"));
    }
    Ok(format!("{r} in {took:?}"))
}

fn graduality() -> Verdict {
    let r = suite::graduality(SEED, 300, DEFAULT_FUEL);
    let rate = r.inconclusive_rate();
    if r.cases < 300 || !r.passed() || rate >= 0.10 {
        return Err(format!("{}; inconclusive rate {:.1}%", r.summary(), rate * 100.0));
    }
    Ok(format!("{}; inconclusive rate {:.1}%", r.summary(), rate * 100.0))
}

fn negative() -> Verdict {
    let (code, out) = cli(&["run", &corpus("bad_downcast.greff")]);
    if code != EXIT_ERROR {
        return Err(format!("bad_downcast exit {code}: {}", out.trim()));
    }
    let (code, out) = cli(&["check", &corpus("bad_import.greff")]);
    if code != EXIT_STATIC {
        return Err(format!("bad_import exit {code}: {}", out.trim()));
    }
    Ok("bad_downcast exit 2, bad_import exit 1".into())
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("combination typechecking", Box::new(combinations)),
        ("scheduler execution", Box::new(scheduler)),
        ("well-typed output", Box::new(|| suites(&[suite::well_typed_output(SEED, 1000)], 1000))),
        ("empirical soundness", Box::new(soundness)),
        ("casts as handlers", Box::new(|| suites(&[suite::casts_as_handlers(SEED, 500)], 500))),
        (
            "retraction, functoriality, commutation, forwarding",
            Box::new(|| {
                suites(
                    &[
                        suite::retraction(SEED, 200),
                        suite::functoriality(SEED, 200),
                        suite::commutation(SEED, 200),
                        suite::forwarding(SEED, 200),
                        suite::function_casts(SEED, 200),
                    ],
                    200,
                )
            }),
        ),
        ("cast factorization", Box::new(|| suites(&[suite::factorization(SEED, 200)], 200))),
        ("gradual guarantees", Box::new(graduality)),
        ("negative tests", Box::new(negative)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(note) => println!("criterion {}: PASS  {name} ({note})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name} ({why})", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
