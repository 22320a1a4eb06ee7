//! Run the gradient suite: primitives, layers and whole models checked
//! against central differences.

use graphmil::harness::gradient_suite;

fn main() -> graphmil::Result<()> {
    let seed: u64 = std::env::args().nth(1).map_or(0, |s| s.parse().expect("seed"));
    let cases = gradient_suite(seed)?;
    let mut failures = 0;
    for case in &cases {
        println!(
            "{:<5} {:<40} max rel error {:.2e} (tol {:.0e}), {}/{} coordinates active",
            if case.passed() { "ok" } else { "FAIL" },
            case.name,
            case.report.max_rel_error,
            case.tolerance(),
            case.active,
            case.coordinates
        );
        failures += usize::from(!case.passed());
    }
    println!("{} cases, {failures} failed", cases.len());
    Ok(())
}
