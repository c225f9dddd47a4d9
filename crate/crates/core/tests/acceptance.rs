//! Acceptance criteria 1-8 at full effort, one line per criterion. Runs
//! without the libtest harness so the lines always show in `cargo test`.

use std::process::ExitCode;

use gdcycles::verify::{self, Effort};

fn main() -> ExitCode {
    let checks = verify::run_suite("all", Effort::Full).expect("known suite");
    assert_eq!(checks.len(), 8);
    for c in &checks {
        println!("{c}");
    }
    let failed: Vec<u8> = checks.iter().filter(|c| !c.passed).map(|c| c.id).collect();
    if failed.is_empty() {
        println!("acceptance: 8/8 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
