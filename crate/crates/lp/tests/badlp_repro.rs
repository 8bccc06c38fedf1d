//! Regression: a cut-heavy master problem (free columns tied by
//! equalities, coefficients spanning nine orders of magnitude) once came
//! back "optimal" with a 1.6e4 row violation hidden by row scaling.

use boreas_lp::{check_certificates, read_triplet_dir, solve_lp, SolveOptions, Status};
use std::path::Path;

#[test]
fn master_like_lp_is_solved_feasibly() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/master_cut_lp");
    let lp = read_triplet_dir(&dir).unwrap();
    let sol = solve_lp(&lp, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    let rep = check_certificates(&lp, &sol);
    assert!(
        rep.primal_residual <= 1e-6,
        "primal residual {:.3e}\n{rep:?}",
        rep.primal_residual
    );
    assert!(rep.bound_residual <= 1e-6, "{rep:?}");
    assert!(
        rep.duality_gap <= 1e-7 * (1.0 + sol.objective.abs()),
        "gap {:.3e}",
        rep.duality_gap
    );
}
