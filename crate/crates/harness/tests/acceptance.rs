//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//! Custom test harness so the lines are shown under plain `cargo test`.

use std::process::ExitCode;

use jkoflow_harness::accept::{Acceptance, CRITERIA};

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let acc = Acceptance::new(1);
    let results: Vec<_> = CRITERIA.iter().map(|&id| acc.run(id)).collect();
    println!();
    for r in &results {
        println!("{}", r.line());
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("\nacceptance: {} passed; {failed} failed", results.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
