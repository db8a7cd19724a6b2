//! Acceptance suite: runs every criterion at its pinned tolerance and prints
//! one PASS/FAIL line each. Extra arguments select criteria by name or
//! number (`cargo test --test acceptance -- 4 growth-margin`); flags are
//! ignored so the usual test-runner options pass through harmlessly.
//!
//! The process exits non-zero when any selected criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use rumorlab::experiments::{Criterion, Settings};

fn main() -> ExitCode {
    let picked: Vec<Criterion> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .filter_map(|a| a.parse().ok())
        .collect();
    let selected = if picked.is_empty() { Criterion::ALL.to_vec() } else { picked };
    let settings = Settings::default();

    let mut failed = 0;
    let mut lines = Vec::new();
    for c in selected {
        let start = Instant::now();
        let line = match c.run(&settings) {
            Ok(rep) => {
                print!("{rep}");
                if !rep.passed {
                    failed += 1;
                }
                rep.line()
            }
            Err(e) => {
                failed += 1;
                format!("FAIL #{:<2} {}: error: {e}", c.number(), c.name())
            }
        };
        println!("    ({:.1} s)", start.elapsed().as_secs_f64());
        lines.push(line);
    }
    println!("\nacceptance summary");
    for l in &lines {
        println!("{l}");
    }
    println!("{} of {} criteria passed", lines.len() - failed, lines.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
