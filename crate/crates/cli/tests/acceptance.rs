//! Acceptance run: every criterion once, then the whole suite again for the
//! byte-for-byte determinism comparison. One PASS/FAIL line per criterion.

use std::process::ExitCode;

use itl_cli::commands::{run_suite, suite_artifacts, suite_bytes};
use itl_cli::report::Sink;
use itl_cli::verify::{determinism, CriterionResult};

const SEED: u64 = 1;

/// Wall-time limits in seconds, by criterion.
const TIME_LIMITS: [(u32, f64); 3] = [(1, 60.0), (2, 300.0), (5, 120.0)];

fn line(r: &CriterionResult, secs: Option<f64>, late: Option<f64>) -> bool {
    let pass = r.pass && late.is_none();
    let time = secs.map(|s| format!(" ({s:.1} s)")).unwrap_or_default();
    println!("criterion {:>2}: {} {}{time}", r.id, if pass { "PASS" } else { "FAIL" }, r.title);
    if let Some(e) = &r.error {
        println!("    error: {e}");
    }
    for c in r.checks.iter().filter(|c| !c.pass) {
        println!("    {} = {:e} not in [{:?}, {:?}]", c.name, c.value, c.lower, c.upper);
    }
    if let Some(limit) = late {
        println!("    over the {limit} s limit");
    }
    pass
}

fn main() -> ExitCode {
    let ids: Vec<u32> = (1..=9).collect();
    let first = run_suite(&ids, SEED);
    let mut ok = true;
    for (r, secs) in &first {
        let late = TIME_LIMITS.iter().find(|(id, lim)| *id == r.id && secs > lim).map(|&(_, lim)| lim);
        ok &= line(r, Some(*secs), late);
    }
    let first: Vec<CriterionResult> = first.into_iter().map(|(r, _)| r).collect();
    let second: Vec<CriterionResult> = run_suite(&ids, SEED).into_iter().map(|(r, _)| r).collect();
    let config = serde_json::json!({ "seed": SEED });
    let det = match (suite_bytes(&first, &config), suite_bytes(&second, &config)) {
        (Ok(a), Ok(b)) => determinism(&a, &b),
        (Err(e), _) | (_, Err(e)) => {
            println!("criterion 10: FAIL determinism\n    error: {e}");
            return ExitCode::FAILURE;
        }
    };
    ok &= line(&det, None, None);

    let mut all = first;
    all.push(det);
    let dir = tempfile::tempdir().expect("temporary directory");
    match suite_artifacts(&all, &config, false).and_then(|(t, r)| Sink::new(dir.path(), "verify").write(Some(&t), &r)) {
        Ok(_) => {}
        Err(e) => {
            println!("writing the report failed: {e}");
            ok = false;
        }
    }
    if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
