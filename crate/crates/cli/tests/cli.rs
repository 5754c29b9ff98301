use std::path::PathBuf;
use std::process::Command;

use greff_cli::{run_command, EXIT_ERROR, EXIT_FUEL, EXIT_OK, EXIT_STATIC, EXIT_USAGE};

fn corpus(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus").join(name).display().to_string()
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("greff").chain(args.iter().copied());
    let code = run_command(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn runs_imprecise_threads() {
    let (code, out, _) = run(&["run", &corpus("threads_imprecise.greff")]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.trim(), "\"1a2b\"");
}

#[test]
fn checks_every_combination() {
    for name in ["III", "IIP", "IPI", "IPP", "PII", "PIP", "PPI", "PPP"] {
        let (code, out, err) = run(&["check", &corpus(&format!("combo_{name}.greff"))]);
        assert_eq!(code, EXIT_OK, "{name}: {err}");
        // Main's handler annotation decides the program's effect.
        let eff = if name.ends_with('P') { "[]" } else { "?" };
        assert_eq!(out.trim(), format!("({eff}, str)"));
    }
}

#[test]
fn bad_downcast_is_a_runtime_error() {
    let (code, out, _) = run(&["run", &corpus("bad_downcast.greff")]);
    assert_eq!(code, EXIT_ERROR);
    assert_eq!(out.trim(), "error");
}

#[test]
fn bad_import_is_a_static_error() {
    for cmd in ["check", "run", "elab"] {
        let (code, out, err) = run(&[cmd, &corpus("bad_import.greff")]);
        assert_eq!(code, EXIT_STATIC);
        assert!(out.is_empty());
        assert!(err.contains("incompatible"), "{err}");
    }
}

#[test]
fn fuel_limit() {
    let (code, out, _) = run(&["run", "--fuel", "10", &corpus("threads_precise.greff")]);
    assert_eq!(code, EXIT_FUEL);
    assert_eq!(out.trim(), "fuel exhausted after 10 steps");
}

#[test]
fn trace_goes_to_stderr() {
    let (code, out, err) = run(&["run", "--trace", &corpus("bad_downcast.greff")]);
    assert_eq!(code, EXIT_ERROR);
    assert_eq!(out.trim(), "error");
    let lines: Vec<&str> = err.lines().collect();
    assert!(lines.iter().any(|l| l.contains("BadEffDnCast")));
    let steps: usize = lines.last().unwrap().trim_end_matches(" steps").parse().unwrap();
    assert_eq!(lines.len(), steps + 1);
}

#[test]
fn elab_prints_a_core_term() {
    let (code, out, _) = run(&["elab", &corpus("threads_precise.greff")]);
    assert_eq!(code, EXIT_OK);
    let src = out.trim();
    let t = greff_core::core_lang::parse_term(src).expect("printed core term parses");
    assert_eq!(greff_core::core_lang::print_term(&t), src);
}

#[test]
fn usage_errors() {
    for args in [vec![], vec!["frobnicate"], vec!["run"], vec!["run", "--fuel", "0", "x.greff"], vec!["run", "--fuel", "many", "x"]] {
        let (code, out, err) = run(&args);
        assert_eq!(code, EXIT_USAGE, "{args:?}");
        assert!(out.is_empty());
        assert!(err.contains("Usage:"), "{err}");
    }
}

#[test]
fn help_is_not_an_error() {
    let (code, out, _) = run(&["--help"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("graduality"));
}

#[test]
fn missing_file_is_reported() {
    let (code, _, err) = run(&["run", "/nonexistent/prog.greff"]);
    assert_ne!(code, EXIT_OK);
    assert!(err.contains("/nonexistent/prog.greff"));
}

#[test]
fn graduality_on_corpus() {
    let (code, out, _) = run(&["graduality", &corpus("combo_PPP.greff"), "--seed", "3", "--cases", "12"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(out.trim(), "graduality: 12 cases, 0 failures, 0 inconclusive");
    let (code, out, _) = run(&["graduality", &corpus("bad_import.greff")]);
    assert_eq!(code, EXIT_STATIC);
    assert!(out.is_empty());
}

#[test]
fn graduality_without_annotations() {
    let dir = std::env::temp_dir().join(format!("greff-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let f = dir.join("plain.greff");
    std::fs::write(&f, "main { true }").unwrap();
    let (code, out, _) = run(&["graduality", f.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    assert!(out.contains("nothing to check"));
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn outputs_are_deterministic() {
    for args in [
        vec!["run".to_string(), corpus("combo_IPI.greff")],
        vec!["graduality".to_string(), corpus("threads_precise.greff"), "--seed".into(), "9".into(), "--cases".into(), "5".into()],
    ] {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(run(&args), run(&args));
    }
}

#[test]
fn shipped_corpus_is_up_to_date() {
    for (name, body) in greff_core::corpus::files() {
        let on_disk = std::fs::read_to_string(corpus(&name)).unwrap_or_else(|e| panic!("{name}: {e}"));
        assert_eq!(on_disk, body, "{name} differs; regenerate with `greff gen-corpus corpus`");
    }
}

#[test]
fn gen_corpus_writes_every_file() {
    let dir = std::env::temp_dir().join(format!("greff-corpus-{}", std::process::id()));
    let (code, _, _) = run(&["gen-corpus", dir.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    let mut names: Vec<String> = std::fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    let mut want: Vec<String> = greff_core::corpus::files().into_iter().map(|(n, _)| n).collect();
    want.sort();
    assert_eq!(names, want);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_greff");
    let status = |args: &[&str]| Command::new(bin).args(args).output().unwrap();
    let o = status(&["run", &corpus("threads_imprecise.greff")]);
    assert_eq!(o.status.code(), Some(EXIT_OK));
    assert_eq!(String::from_utf8_lossy(&o.stdout).trim(), "\"1a2b\"");
    assert_eq!(status(&["run", &corpus("bad_downcast.greff")]).status.code(), Some(EXIT_ERROR));
    assert_eq!(status(&["check", &corpus("bad_import.greff")]).status.code(), Some(EXIT_STATIC));
    assert_eq!(status(&["nope"]).status.code(), Some(EXIT_USAGE));
}
