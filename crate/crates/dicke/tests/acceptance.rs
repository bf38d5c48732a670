//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Extra arguments select criteria by number (`cargo test --test acceptance -- 2 5`).

use std::process::ExitCode;

use dicke::criteria::{self, CRITERIA};

const SEED: u64 = 1;

fn main() -> ExitCode {
    let picked: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let ids: Vec<u32> = CRITERIA.iter().copied().filter(|id| picked.is_empty() || picked.contains(id)).collect();
    let mut failed = 0;
    for id in &ids {
        match criteria::run(*id, SEED, None) {
            Ok(outcome) => {
                println!("{}", outcome.line());
                failed += usize::from(!outcome.pass);
            }
            Err(e) => {
                println!("criterion {id:>2} FAIL: error: {e}");
                failed += 1;
            }
        }
    }
    println!("acceptance: {} of {} criteria pass", ids.len() - failed, ids.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
