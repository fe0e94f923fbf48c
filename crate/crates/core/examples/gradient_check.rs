//! Finite-difference check of every parameter of a small gated model.
//! Pass `--corrupt` to scale the analytic gradients and watch it fail.

fn main() {
    let corrupt = std::env::args().any(|a| a == "--corrupt");
    let (model, input, target) = pdac::cli::selfcheck_fixture(0).expect("fixture");
    let report = model
        .gradient_check(&input, target, 1e-5, 1e-4, if corrupt { 1.1 } else { 1.0 })
        .expect("gradient check");
    for p in &report.params {
        println!(
            "{:<28} {:>5} entries  max rel err {:.2e}",
            p.name, p.entries, p.max_rel_error
        );
    }
    println!(
        "passed: {}  (max rel err {:.2e})",
        report.passed(),
        report.max_rel_error()
    );
}
