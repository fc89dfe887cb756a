//! The acceptance criteria, each at its stated tolerance and instance count.
//! One status line per criterion goes straight to stdout so it shows up
//! even when the harness captures test output.

use std::io::Write;
use std::time::{Duration, Instant};

use amnm::harness::RunConfig;
use amnm::suite::{assemble, determinism_rows, run_criterion, summarize, Row, CRITERIA};

const SEED: u64 = 7;

/// Wall-clock limits per criterion; criterion 7 has none of its own.
const LIMITS: [Option<u64>; 7] = [Some(30), Some(120), Some(60), None, Some(30), Some(60), None];

fn say(line: String) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").unwrap();
    out.flush().unwrap();
}

fn report(id: u8, passed: bool, rows: &[Row], elapsed: Duration, extra: &str) {
    let name = CRITERIA[id as usize - 1].1;
    let limit = LIMITS[id as usize - 1].map_or(String::new(), |s| format!(" (limit {s} s)"));
    say(format!(
        "criterion {id} [{}] {name}: {} rows, {} failed, {:.1} s{limit}{extra}",
        if passed { "PASS" } else { "FAIL" },
        rows.len(),
        rows.iter().filter(|r| !r.passed).count(),
        elapsed.as_secs_f64(),
    ));
    for r in rows.iter().filter(|r| !r.passed).take(5) {
        say(format!("    failed: {} #{} ({})", r.lemma, r.instance, r.note.as_deref().unwrap_or("")));
    }
}

#[test]
fn acceptance_criteria() {
    let cfg = RunConfig::with_seed(SEED);
    let total = Instant::now();
    let mut all_rows = Vec::new();
    let mut verdicts = Vec::new();
    for id in 1..=6u8 {
        let start = Instant::now();
        let rows = run_criterion(id, &cfg).expect("criterion runs");
        let elapsed = start.elapsed();
        let mut passed = summarize(id, &rows).passed;
        let mut extra = String::new();
        if let Some(limit) = LIMITS[id as usize - 1] {
            if elapsed > Duration::from_secs(limit) {
                passed = false;
                extra = " (over the time limit)".into();
            }
        }
        if id == 3 {
            let conv = rows.iter().filter(|r| r.lemma == amnm::suite::CONVERGES);
            let (ok, n) = conv.fold((0, 0), |(ok, n), r| (ok + r.passed as usize, n + 1));
            extra = format!("{extra}, {ok}/{n} converged");
        }
        report(id, passed, &rows, elapsed, &extra);
        verdicts.push(passed);
        all_rows.extend(rows);
    }

    let start = Instant::now();
    let reference = assemble(&cfg, all_rows).to_json();
    let rows = determinism_rows(&cfg, &reference, &[1, 8]).expect("suite reruns");
    let passed = rows.iter().all(|r| r.passed);
    report(7, passed, &rows, start.elapsed(), "");
    verdicts.push(passed);

    let elapsed = total.elapsed();
    say(format!("full acceptance run: {:.1} s (limit 300 s)", elapsed.as_secs_f64()));
    assert!(verdicts.iter().all(|&v| v), "acceptance criteria failed: {verdicts:?}");
}
