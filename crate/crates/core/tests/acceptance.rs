//! Acceptance suite: runs every criterion and prints one line per check.
//!
//! Exits non-zero when a gating criterion fails and is not a documented
//! deviation. `QESTIM_ACCEPTANCE_SKIP_EXPLORATORY=1` skips the long qMLE run.

use std::process::ExitCode;

use qestim::selftest::{gating_ok, run_criterion, SelftestOptions, CRITERIA, EXPLORATORY};

fn main() -> ExitCode {
    let mut opts = SelftestOptions::default();
    if std::env::var("QESTIM_ACCEPTANCE_SKIP_EXPLORATORY").is_ok_and(|v| v == "1") {
        opts.include_exploratory = false;
    }
    println!("acceptance suite (seed {})", opts.seed);
    let mut outcomes = Vec::new();
    for &(id, _, _) in CRITERIA.iter() {
        if !opts.include_exploratory && EXPLORATORY.contains(&id) {
            println!("criterion {id:>2} skipped");
            continue;
        }
        let o = run_criterion(id, &opts).expect("known criterion");
        println!("{}", o.line());
        if o.seconds > o.budget_seconds {
            println!("             over its {:.0}s budget", o.budget_seconds);
        }
        outcomes.push(o);
    }
    for o in &outcomes {
        if let (false, Some(why)) = (o.passed, o.documented_deviation()) {
            println!("documented deviation, criterion {}: {why}", o.id);
        }
    }
    let passed = outcomes.iter().filter(|o| o.passed).count();
    println!("{passed}/{} criteria passed", outcomes.len());
    if gating_ok(&outcomes) {
        println!("acceptance: ok");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: FAILED");
        ExitCode::FAILURE
    }
}
