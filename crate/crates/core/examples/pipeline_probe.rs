//! Scale probe over the bundled fixture; prints sizes and timings.

use boreas_core::benders::{decompose, BendersOptions};
use boreas_core::climate::load_sample;
use boreas_core::cluster::*;
use boreas_core::model_io::load_system;
use boreas_core::program::*;
use boreas_lp::{solve_lp, SolveOptions, Status};
use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/toyeu");
    let system = load_system(&root.join("system")).unwrap();
    let sample = load_sample(&root.join("sample")).unwrap();
    println!(
        "system: {} regions, {} carriers, {} techs",
        system.regions.len(),
        system.carriers.len(),
        system.conversions.len()
    );

    // Deterministic solve of the first year for reference capacities.
    let flags = BuildFlags::default();
    let t0 = Instant::now();
    let det = build_deterministic(&system, &sample, 0, &flags).unwrap();
    println!(
        "deterministic LP: {} rows x {} cols, {} nnz (built in {:?})",
        det.lp.num_rows,
        det.lp.num_cols,
        det.lp.num_nonzeros(),
        t0.elapsed()
    );
    let t0 = Instant::now();
    let det_sol = solve_lp(&det.lp, &SolveOptions::default()).unwrap();
    println!(
        "deterministic solve: {:?} obj {:.4e} in {:?} ({} pivots)",
        det_sol.status,
        det_sol.objective,
        t0.elapsed(),
        det_sol.iterations
    );
    let det_plan = extract_solution(&system, &det, &det_sol, &flags).unwrap();
    let mut reference: BTreeMap<String, f64> = BTreeMap::new();
    for (tech, per_region) in &det_plan.capacities {
        reference.insert(tech.clone(), per_region.values().sum());
    }
    println!("reference capacities: {reference:?}");

    // Clustering.
    let t0 = Instant::now();
    let d = compute_distances(&sample, &reference).unwrap();
    let index = residual_demand_index(&sample, &reference).unwrap();
    let extremes = preselect_extremes(&index, 2).unwrap();
    println!("extremes: {:?} (labels {:?})", extremes, extremes.iter().map(|&(i, p)| (sample.years[i], p)).collect::<Vec<_>>());
    let mut repset = select_representatives(&d, 15, &extremes).unwrap();
    compute_probabilities(&mut repset, sample.num_years()).unwrap();
    println!(
        "clustering in {:?}: scenarios per period {:?}, objective {:.4e}",
        t0.elapsed(),
        repset.scenarios_per_period(),
        repset.objective
    );
    println!("combinations: {}", count_combinations(&repset.scenarios_per_period()));

    // Stochastic extensive form.
    let t0 = Instant::now();
    let arts = build_stochastic(&system, &repset, &sample, &flags).unwrap();
    println!(
        "stochastic LP: {} rows x {} cols, {} nnz (built in {:?})",
        arts.lp.num_rows,
        arts.lp.num_cols,
        arts.lp.num_nonzeros(),
        t0.elapsed()
    );
    let t0 = Instant::now();
    let sol = solve_lp(&arts.lp, &SolveOptions::default()).unwrap();
    println!(
        "monolith: {:?} obj {:.6e} in {:?} ({} pivots)",
        sol.status,
        sol.objective,
        t0.elapsed(),
        sol.iterations
    );
    assert_eq!(sol.status, Status::Optimal);
    let plan = extract_solution(&system, &arts, &sol, &flags).unwrap();
    println!("cost breakdown: {:?}", plan.cost_breakdown);
    for (sid, per_region) in &plan.storage {
        for (rid, sp) in per_region {
            println!(
                "storage {sid}/{rid}: size {:.2} (seas {:.2} mul {:.2}), l0_mul {:.2}, leeway {:.2}",
                sp.size_total, sp.size_season, sp.size_multi, sp.start_multi, sp.leeway
            );
        }
    }

    // Benders.
    let arts2 = build_stochastic(&system, &repset, &sample, &flags).unwrap();
    let t0 = Instant::now();
    let mut dec = decompose(
        arts2,
        BendersOptions {
            gap_target: 0.005,
            workers: 4,
            ..BendersOptions::default()
        },
    )
    .unwrap();
    println!("census: {:?}", dec.census);
    let (bplan, report) = dec.iterate(&system, &flags).unwrap();
    println!(
        "benders: {:?} in {:?}, {} iterations, final gap {:.5}, ub {:.6e}",
        report.status,
        t0.elapsed(),
        report.iterations.len(),
        report.final_gap,
        report.iterations.last().unwrap().upper_bound
    );
    println!(
        "benders vs monolith: {:.4}%",
        100.0 * (bplan.objective - sol.objective) / sol.objective
    );
}
