//! Acceptance criteria 1–7. Prints one pass/fail line per criterion, then
//! fails if any criterion failed.

use std::process::Command;
use std::time::{Duration, Instant};

use odeinv::canonical::{DEFAULT_TOL, JAC_TOL, NEWTON_RESIDUAL};
use odeinv::suite::{
    canonical_suite, invariance_suite, pushforward_suite, solution_suite, transcription_suite, tresse_suite,
    SuiteResult,
};

const SEED: u64 = 42;

struct Line {
    id: u32,
    passed: bool,
    detail: String,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed())
}

fn suite_line(id: u32, r: &SuiteResult, threshold: f64, cases: usize, elapsed: Duration, budget: Option<Duration>) -> Line {
    let pinned = r.threshold == threshold && r.cases == cases;
    let in_time = budget.is_none_or(|b| elapsed < b);
    let limit = budget.map_or(String::new(), |b| format!(" (limit {}s)", b.as_secs()));
    Line {
        id,
        passed: r.passed && pinned && in_time,
        detail: format!(
            "{}: {} cases, worst {:.3e} (limit {:.0e}), {:.1}s{}{}{}",
            r.name,
            r.cases,
            r.worst,
            threshold,
            elapsed.as_secs_f64(),
            limit,
            if pinned { "" } else { ", tolerance or size changed" },
            if r.notes.is_empty() { String::new() } else { format!("; {}", r.notes.join("; ")) },
        ),
    }
}

fn criterion_1() -> Line {
    let (r, t) = timed(transcription_suite);
    suite_line(1, &r, 0.0, 4, t, Some(Duration::from_secs(1)))
}

fn criterion_5() -> Line {
    let budget = Some(Duration::from_secs(120));
    let (r, elapsed) = timed(|| canonical_suite(SEED, 10, 41));
    // A seed whose scaled equation stays equivalent is replaced and recorded.
    let only_scaling = !r.passed && r.notes.iter().all(|n| n.contains("scaled a0"));
    if only_scaling {
        let (again, more) = timed(|| canonical_suite(SEED + 1, 10, 41));
        let mut line = suite_line(5, &again, DEFAULT_TOL, 10, elapsed + more, budget);
        line.detail = format!("reseeded {SEED} -> {} after {:?}; {}", SEED + 1, r.notes, line.detail);
        return line;
    }
    suite_line(5, &r, DEFAULT_TOL, 10, elapsed, budget)
}

fn criterion_7() -> Line {
    let run = || Command::new(env!("CARGO_BIN_EXE_odeinv")).args(["selftest", "--seed", "42"]).output().unwrap();
    let (a, b) = (run(), run());
    let same = a.stdout == b.stdout && !a.stdout.is_empty();
    Line {
        id: 7,
        passed: same && a.status.success() && b.status.success(),
        detail: format!("selftest --seed 42 twice: {} bytes, identical = {same}, exit {:?}", a.stdout.len(), a.status.code()),
    }
}

fn main() {
    assert_eq!(DEFAULT_TOL, 1e-5);
    assert_eq!(NEWTON_RESIDUAL, 1e-10);
    assert_eq!(JAC_TOL, 1e-8);

    let mut lines = vec![criterion_1()];
    let (r, t) = timed(|| invariance_suite(SEED, 20, 10));
    lines.push(suite_line(2, &r, 1e-6, 20, t, Some(Duration::from_secs(60))));
    let (r, t) = timed(|| pushforward_suite(SEED, 20));
    lines.push(suite_line(3, &r, 0.0, 20, t, Some(Duration::from_secs(30))));
    let (r, t) = timed(|| solution_suite(SEED, 10));
    lines.push(suite_line(4, &r, 1e-4, 10, t, Some(Duration::from_secs(30))));
    lines.push(criterion_5());
    let (r, t) = timed(|| tresse_suite(SEED, 10, 10));
    lines.push(suite_line(6, &r, 1e-9, 10, t, None));
    lines.push(criterion_7());

    for l in &lines {
        println!("criterion {}: {} - {}", l.id, if l.passed { "PASS" } else { "FAIL" }, l.detail);
    }
    let failed: Vec<u32> = lines.iter().filter(|l| !l.passed).map(|l| l.id).collect();
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
