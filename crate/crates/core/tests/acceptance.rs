//! Acceptance gate: runs every suite criterion at its stated scale and prints
//! one pass/fail line per criterion.

use urzeta_core::suite::{criterion_count, run_criterion};

#[test]
fn acceptance_criteria() {
    let mut all_ok = true;
    for id in 1..=criterion_count() {
        let t0 = std::time::Instant::now();
        let r = run_criterion(id);
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("criterion {:2} [{status}] {} ({:.1?})", r.id, r.name, t0.elapsed());
        if !r.passed {
            all_ok = false;
            for d in &r.details {
                if d.starts_with("FAIL") {
                    println!("    {d}");
                }
            }
        }
    }
    assert!(all_ok, "acceptance criteria failed");
}
