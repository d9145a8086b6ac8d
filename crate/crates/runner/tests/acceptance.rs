//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Criteria 8 (L = 10 tier) and 10 take hours and only run with `Z2DFL_SLOW=1`; the L = 8 tier
//! of criterion 8 always runs. The process exits non-zero if any executed criterion fails.

use std::time::Instant;

use z2dfl_runner::checks::{self, CheckResult};
use z2dfl_runner::config::{preset, ModeChoice};

fn slow_enabled() -> bool {
    std::env::var("Z2DFL_SLOW").is_ok_and(|v| v == "1")
}

fn timed(f: impl FnOnce() -> CheckResult) -> CheckResult {
    let start = Instant::now();
    let mut r = f();
    r.detail = format!("{} [{:.1}s]", r.detail, start.elapsed().as_secs_f64());
    println!("{r}");
    r
}

fn fig2_full() -> CheckResult {
    let mut cfg = preset("fig2").expect("preset");
    cfg.sector_mode = ModeChoice::Sample;
    checks::dissipative_enhancement(&cfg, 8)
}

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let wanted = |n: u8| filter.as_ref().is_none_or(|f| f == &n.to_string());
    let mut results = Vec::new();
    let fast: [(u8, fn() -> CheckResult); 7] = [
        (1, checks::indexing),
        (2, checks::duality),
        (3, checks::gauge_invariance),
        (4, checks::lindblad_invariants),
        (5, checks::steady_cross_method),
        (6, checks::analytic_fixtures),
        (7, checks::field_scan),
    ];
    for (n, f) in fast {
        if wanted(n) {
            results.push(timed(f));
        }
    }
    if wanted(8) {
        results.push(timed(|| checks::dissipative_enhancement(&preset("ci_small").expect("preset"), 8)));
        if slow_enabled() {
            results.push(timed(fig2_full));
        } else {
            println!("criterion  8 [SKIP] L=10 tier (sample of 128 sectors, about 2 h): set Z2DFL_SLOW=1");
        }
    }
    if wanted(9) {
        results.push(timed(checks::alpha_sweep));
    }
    if wanted(10) {
        if slow_enabled() {
            results.push(timed(checks::long_range_peaks));
        } else {
            println!("criterion 10 [SKIP] L=12 tier (several hours): set Z2DFL_SLOW=1");
        }
    }
    let failed: Vec<u8> = results.iter().filter(|r| !r.passed).map(|r| r.criterion).collect();
    println!("acceptance: {} checks run, {} failed {:?}", results.len(), failed.len(), failed);
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
