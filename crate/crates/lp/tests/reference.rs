//! Cross-checks of the simplex against independent oracles.
//!
//! Small random instances are compared with a brute-force vertex
//! enumeration that shares no code with the solver. Larger random
//! instances are feasible by construction and validated through their
//! optimality certificates, which prove optimality by LP duality alone.

use boreas_lp::{
    check_certificates, solve_lp, LpBuilder, RowSense, SolveOptions, SparseLp, Status,
};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

// ---------------------------------------------------------------------------
// Brute-force oracle: enumerate candidate active sets, solve densely, keep
// the best feasible vertex. Valid for fully boxed problems.
// ---------------------------------------------------------------------------

#[derive(Clone)]
struct DenseConstraint {
    coefs: Vec<f64>,
    rhs: f64,
}

fn enumerate_optimum(lp: &SparseLp) -> Option<(f64, Vec<f64>)> {
    let n = lp.num_cols;
    let m = lp.num_rows;
    // Dense rows.
    let mut rows = vec![vec![0.0; n]; m];
    for j in 0..n {
        for (i, v) in lp.col_iter(j) {
            rows[i][j] += v;
        }
    }
    // Candidate equalities: every row plus every finite bound.
    let mut candidates: Vec<DenseConstraint> = Vec::new();
    for i in 0..m {
        candidates.push(DenseConstraint {
            coefs: rows[i].clone(),
            rhs: lp.rhs[i],
        });
    }
    for j in 0..n {
        for bound in [lp.lower[j], lp.upper[j]] {
            if bound.is_finite() {
                let mut coefs = vec![0.0; n];
                coefs[j] = 1.0;
                candidates.push(DenseConstraint { coefs, rhs: bound });
            }
        }
    }

    let mut best: Option<(f64, Vec<f64>)> = None;
    let k = candidates.len();
    let mut chosen = vec![0usize; n];
    enumerate_subsets(k, n, &mut chosen, 0, 0, &mut |subset: &[usize]| {
        let a: Vec<Vec<f64>> = subset.iter().map(|&c| candidates[c].coefs.clone()).collect();
        let b: Vec<f64> = subset.iter().map(|&c| candidates[c].rhs).collect();
        if let Some(x) = dense_solve(a, b) {
            if feasible(lp, &rows, &x) {
                let obj: f64 = (0..n).map(|j| lp.objective[j] * x[j]).sum();
                match &best {
                    Some((bo, _)) if *bo <= obj => {}
                    _ => best = Some((obj, x)),
                }
            }
        }
    });
    best
}

fn enumerate_subsets(
    k: usize,
    want: usize,
    chosen: &mut Vec<usize>,
    start: usize,
    depth: usize,
    f: &mut impl FnMut(&[usize]),
) {
    if depth == want {
        f(&chosen[..depth]);
        return;
    }
    for c in start..k {
        chosen[depth] = c;
        enumerate_subsets(k, want, chosen, c + 1, depth + 1, f);
    }
}

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        // Partial pivot.
        let mut piv = col;
        for r in col + 1..n {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() < 1e-9 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn feasible(lp: &SparseLp, rows: &[Vec<f64>], x: &[f64]) -> bool {
    let tol = 1e-7;
    for j in 0..lp.num_cols {
        if x[j] < lp.lower[j] - tol || x[j] > lp.upper[j] + tol {
            return false;
        }
    }
    for i in 0..lp.num_rows {
        let act: f64 = (0..lp.num_cols).map(|j| rows[i][j] * x[j]).sum();
        let ok = match lp.senses[i] {
            RowSense::Le => act <= lp.rhs[i] + tol,
            RowSense::Ge => act >= lp.rhs[i] - tol,
            RowSense::Eq => (act - lp.rhs[i]).abs() <= tol,
        };
        if !ok {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// Hand-checked fixtures
// ---------------------------------------------------------------------------

#[test]
fn min_x_subject_to_x_ge_3() {
    let mut b = LpBuilder::new();
    let x = b.add_col(1.0, 0.0, f64::INFINITY);
    b.add_row(RowSense::Ge, 3.0, &[(x, 1.0)]);
    let lp = b.build();
    let sol = solve_lp(&lp, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.primal[x] - 3.0).abs() < 1e-9);
    assert!((sol.duals[0] - 1.0).abs() < 1e-9, "dual {}", sol.duals[0]);
}

#[test]
fn contradictory_bounds_are_infeasible() {
    let mut b = LpBuilder::new();
    let x = b.add_col(0.0, 0.0, f64::INFINITY);
    b.add_row(RowSense::Le, 1.0, &[(x, 1.0)]);
    b.add_row(RowSense::Ge, 2.0, &[(x, 1.0)]);
    let lp = b.build();
    let sol = solve_lp(&lp, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Infeasible);
}

#[test]
fn unbounded_direction_detected() {
    let mut b = LpBuilder::new();
    let x = b.add_col(-1.0, 0.0, f64::INFINITY);
    b.add_row(RowSense::Ge, 1.0, &[(x, 1.0)]);
    let lp = b.build();
    let sol = solve_lp(&lp, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Unbounded);
}

/// Five-arc max flow with hand value 5: s->a cap 3, s->b cap 2, a->b cap 1,
/// a->t cap 2, b->t cap 3. The min cut {s} vs rest has capacity 5.
#[test]
fn max_flow_fixture_solves_to_hand_value() {
    let mut b = LpBuilder::new();
    let f_sa = b.add_col(0.0, 0.0, 3.0);
    let f_sb = b.add_col(0.0, 0.0, 2.0);
    let f_ab = b.add_col(0.0, 0.0, 1.0);
    let f_at = b.add_col(-1.0, 0.0, 2.0);
    let f_bt = b.add_col(-1.0, 0.0, 3.0);
    // Conservation at a and b.
    b.add_row(RowSense::Eq, 0.0, &[(f_sa, 1.0), (f_ab, -1.0), (f_at, -1.0)]);
    b.add_row(RowSense::Eq, 0.0, &[(f_sb, 1.0), (f_ab, 1.0), (f_bt, -1.0)]);
    let lp = b.build();
    let sol = solve_lp(&lp, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.objective + 5.0).abs() < 1e-9, "flow {}", -sol.objective);
    let report = check_certificates(&lp, &sol);
    assert!(report.duality_gap <= 1e-7 * (1.0 + sol.objective.abs()));
}

#[test]
fn fixed_and_free_columns() {
    let mut b = LpBuilder::new();
    let x = b.add_col(1.0, 2.0, 2.0); // fixed
    let y = b.add_col(1.0, f64::NEG_INFINITY, f64::INFINITY); // free
    b.add_row(RowSense::Eq, 5.0, &[(x, 1.0), (y, 1.0)]);
    let lp = b.build();
    let sol = solve_lp(&lp, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    assert!((sol.primal[x] - 2.0).abs() < 1e-9);
    assert!((sol.primal[y] - 3.0).abs() < 1e-9);
}

// ---------------------------------------------------------------------------
// Randomized cross-checks
// ---------------------------------------------------------------------------

fn random_small_lp(rng: &mut ChaCha8Rng) -> SparseLp {
    let n = rng.gen_range(1..=4);
    let m = rng.gen_range(1..=4);
    let mut b = LpBuilder::new();
    for _ in 0..n {
        let lo = if rng.gen_bool(0.3) { -2.0 } else { 0.0 };
        let up = if rng.gen_bool(0.3) { 5.0 } else { 3.0 };
        let cost = rng.gen_range(-5..=5) as f64;
        b.add_col(cost, lo, up);
    }
    for _ in 0..m {
        let mut entries = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                let v = rng.gen_range(-3..=3) as f64;
                if v != 0.0 {
                    entries.push((j, v));
                }
            }
        }
        let sense = match rng.gen_range(0..3) {
            0 => RowSense::Le,
            1 => RowSense::Ge,
            _ => RowSense::Eq,
        };
        let rhs = rng.gen_range(-4..=6) as f64;
        b.add_row(sense, rhs, &entries);
    }
    b.build()
}

#[test]
fn small_random_lps_match_vertex_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut optimal = 0;
    let mut infeasible = 0;
    for case in 0..600 {
        let lp = random_small_lp(&mut rng);
        let sol = solve_lp(&lp, &SolveOptions::default()).unwrap();
        let oracle = enumerate_optimum(&lp);
        match (&oracle, sol.status) {
            (Some((obj, _)), Status::Optimal) => {
                optimal += 1;
                assert!(
                    (obj - sol.objective).abs() <= 1e-6 * (1.0 + obj.abs()),
                    "case {case}: oracle {obj}, solver {}",
                    sol.objective
                );
                let report = check_certificates(&lp, &sol);
                assert!(
                    report.duality_gap <= 1e-7 * (1.0 + sol.objective.abs()),
                    "case {case}: gap {}",
                    report.duality_gap
                );
                assert!(report.max_residual() <= 1e-6, "case {case}");
            }
            (None, Status::Infeasible) => {
                infeasible += 1;
            }
            (oracle, status) => {
                panic!(
                    "case {case}: oracle {:?} but solver status {:?}",
                    oracle.as_ref().map(|(o, _)| *o),
                    status
                );
            }
        }
    }
    // Both outcomes must actually be exercised.
    assert!(optimal > 100, "only {optimal} optimal cases");
    assert!(infeasible > 20, "only {infeasible} infeasible cases");
}

fn random_feasible_lp(rng: &mut ChaCha8Rng, max_dim: usize) -> SparseLp {
    let n = rng.gen_range(2..=max_dim);
    let m = rng.gen_range(2..=max_dim);
    let mut b = LpBuilder::new();
    let mut x0 = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.gen_range(-5.0..0.0);
        let up = lo + rng.gen_range(1.0..10.0);
        b.add_col(rng.gen_range(-10.0..10.0), lo, up);
        x0.push(rng.gen_range(lo..up));
    }
    for _ in 0..m {
        let mut entries = Vec::new();
        let mut activity = 0.0;
        for (j, &xj) in x0.iter().enumerate() {
            if rng.gen_bool(0.4) {
                let v = rng.gen_range(-4.0..4.0);
                entries.push((j, v));
                activity += v * xj;
            }
        }
        let (sense, rhs) = match rng.gen_range(0..3) {
            0 => (RowSense::Le, activity + rng.gen_range(0.0..5.0)),
            1 => (RowSense::Ge, activity - rng.gen_range(0.0..5.0)),
            _ => (RowSense::Eq, activity),
        };
        b.add_row(sense, rhs, &entries);
    }
    b.build()
}

#[test]
fn medium_random_lps_have_clean_certificates() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for case in 0..200 {
        let lp = random_feasible_lp(&mut rng, 30);
        let sol = solve_lp(&lp, &SolveOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal, "case {case} must be feasible");
        let report = check_certificates(&lp, &sol);
        let scale = 1.0 + sol.objective.abs();
        assert!(report.duality_gap <= 1e-7 * scale, "case {case}: {report:?}");
        assert!(report.complementarity <= 1e-6 * scale, "case {case}: {report:?}");
        assert!(report.primal_residual <= 1e-6, "case {case}: {report:?}");
        assert!(report.dual_residual <= 1e-6, "case {case}: {report:?}");
        assert!(report.dual_sign_violation <= 1e-6, "case {case}: {report:?}");
    }
}

#[test]
fn identical_input_gives_identical_solution_bytes() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let lp = random_feasible_lp(&mut rng, 25);
    let a = solve_lp(&lp, &SolveOptions::default()).unwrap();
    let b = solve_lp(&lp, &SolveOptions::default()).unwrap();
    assert_eq!(a.primal, b.primal);
    assert_eq!(a.duals, b.duals);
    assert_eq!(a.reduced_costs, b.reduced_costs);
    assert_eq!(a.objective.to_bits(), b.objective.to_bits());
}

#[test]
fn warm_start_matches_fresh_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for case in 0..50 {
        let mut lp = random_feasible_lp(&mut rng, 20);
        let mut solver = boreas_lp::Simplex::new(&lp, SolveOptions::default());
        let first = solver.solve().unwrap();
        assert_eq!(first.status, Status::Optimal);

        // Perturb one rhs and one bound pair, resolve warm, compare cold.
        let row = rng.gen_range(0..lp.num_rows);
        let col = rng.gen_range(0..lp.num_cols);
        let new_rhs = lp.rhs[row] + rng.gen_range(-1.0..1.0);
        let new_lo = lp.lower[col] - rng.gen_range(0.0..1.0);
        let new_up = lp.upper[col] + rng.gen_range(0.0..1.0);
        solver.set_rhs(row, new_rhs);
        solver.set_col_bounds(col, new_lo, new_up);
        let warm = solver.solve().unwrap();

        lp.rhs[row] = new_rhs;
        lp.lower[col] = new_lo;
        lp.upper[col] = new_up;
        let cold = solve_lp(&lp, &SolveOptions::default()).unwrap();
        assert_eq!(warm.status, cold.status, "case {case}");
        if cold.status == Status::Optimal {
            assert!(
                (warm.objective - cold.objective).abs() <= 1e-6 * (1.0 + cold.objective.abs()),
                "case {case}: warm {} cold {}",
                warm.objective,
                cold.objective
            );
        }
    }
}

#[test]
fn degenerate_ties_terminate() {
    // Many identical rows force degenerate pivots.
    let mut b = LpBuilder::new();
    let x = b.add_col(1.0, 0.0, f64::INFINITY);
    let y = b.add_col(1.0, 0.0, f64::INFINITY);
    let z = b.add_col(-1.0, 0.0, 10.0);
    for _ in 0..20 {
        b.add_row(RowSense::Ge, 1.0, &[(x, 1.0), (y, 1.0), (z, -1.0)]);
    }
    let lp = b.build();
    let sol = solve_lp(&lp, &SolveOptions::default()).unwrap();
    assert_eq!(sol.status, Status::Optimal);
    // min x + y - z s.t. x + y - z >= 1, z <= 10 => x+y = 11, z = 10, obj 1.
    assert!((sol.objective - 1.0).abs() < 1e-8, "obj {}", sol.objective);
}
