//! Finite-difference verification of every trained score and loss path on
//! randomized small shapes, 20 seeds per case.

use advinfer_core::diagnostics::{gradient_integrity_suite, GRAD_REL_TOL};

#[test]
fn all_model_paths_pass_gradient_checks() {
    let start = std::time::Instant::now();
    let results = gradient_integrity_suite(20);
    assert_eq!(results.len(), 5 * 20);
    for r in &results {
        assert!(
            r.report.pass,
            "{} seed {} failed: {}",
            r.name, r.seed, r.report
        );
        assert!(r.report.worst_rel_err < GRAD_REL_TOL);
        assert!(r.report.coords_checked > 0);
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs_f64() < 120.0, "suite took {elapsed:?}, budget is 2 minutes");
    println!("gradient integrity: {} checks in {elapsed:?}", results.len());
}
