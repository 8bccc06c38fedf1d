//! Decomposition oracles: census arithmetic, cut tightness and validity,
//! and convergence against the monolithic solve.

mod common;

use boreas_core::benders::*;
use boreas_core::model::*;
use boreas_core::program::*;
use common::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Two-carrier system with a multi-year storage, a contract and scenario
/// spread; small enough for the monolith, rich enough to exercise all the
/// complicating-variable kinds.
fn fixture_system() -> (EnergySystem, ScenarioGrid) {
    let grid = TimeGrid { periods_per_year: 4, timesteps_per_period: 4 };
    let mut system = bare_system(grid);
    system.carriers.push(carrier("power", 1));
    system.carriers.push(carrier("fuel", 4));
    system.regions.push(region("r", &["power", "fuel"]));
    let mut wind = gen_tech("wind", "power", &["r"], 30.0, 0.0);
    wind.profile_metric = Some("cf".into());
    system.conversions.push(wind);
    let mut burner = gen_tech("burner", "power", &["r"], 4.0, 1.0);
    burner.inputs = BTreeMap::from([("fuel".into(), 2.0)]);
    burner.emission_factors = BTreeMap::from([("fuel".into(), 0.2)]);
    system.conversions.push(burner);
    let mut maker = gen_tech("fuel_maker", "fuel", &["r"], 6.0, 0.2);
    maker.inputs = BTreeMap::from([("power".into(), 1.4)]);
    system.conversions.push(maker);
    system.storages.push(long_store("tank", "fuel", &["r"]));
    system.contracts.push(ImportContract {
        id: "imp".into(),
        carrier: "fuel".into(),
        region: "r".into(),
        theta: 0.1,
        nu_base: 20.0,
        nu_flex: 24.0,
        emission_factor: 0.1,
    });
    system.demands.push(demand_static("power", "r", vec![1.0; 16]));
    system.emission_policy = Some(EmissionPolicy { cap: 2.0 });

    let base_cf = [0.9, 0.2, 0.6, 0.4];
    let seasonal = [1.0, 0.55, 0.8, 0.5];
    let cells = |p: usize| {
        vec![
            cell_with(
                "hi",
                0.5,
                &[("cf", "r", base_cf.iter().map(|v| v * seasonal[p]).collect())],
            ),
            cell_with(
                "lo",
                0.5,
                &[("cf", "r", base_cf.iter().map(|v| v * seasonal[p] * 0.45).collect())],
            ),
        ]
    };
    let grid = ScenarioGrid { periods: (0..4).map(cells).collect() };
    (system, grid)
}

#[test]
fn census_matches_structure() {
    let (system, grid) = fixture_system();
    let arts = build_program(&system, &grid, &BuildFlags::default()).unwrap();
    let dec = decompose(arts, BendersOptions::default()).unwrap();

    // One sub per period-scenario pair.
    assert_eq!(dec.subs.len(), 8);
    assert!(equation_equivalent(&dec));

    // One long-term storage in one region: P boundary levels, one
    // multi-year delta per represented month, one emission allowance each.
    assert_eq!(dec.census.seasonal_levels, 4);
    assert_eq!(dec.census.multi_year_deltas, 8);
    assert_eq!(dec.census.emissions, 8);
    // Capacities: wind, burner, fuel_maker, tank power in/out, seasonal
    // size, contract baseline.
    assert_eq!(dec.census.capacities, 3 + 2 + 1 + 1);
    assert_eq!(
        dec.census.total,
        dec.census.capacities + dec.census.seasonal_levels + dec.census.multi_year_deltas
            + dec.census.emissions
    );
}

#[test]
fn trivial_subgradients() {
    // Huge capacity, zero demand: zero cost, zero subgradient.
    let grid = TimeGrid { periods_per_year: 1, timesteps_per_period: 4 };
    let mut system = bare_system(grid);
    system.carriers.push(carrier("power", 1));
    system.regions.push(region("r", &["power"]));
    system.conversions.push(gen_tech("gen", "power", &["r"], 10.0, 1.0));
    system.demands.push(demand_static("power", "r", vec![0.0; 4]));
    let arts = build_program(&system, &single_scenario_grid(1), &BuildFlags::default()).unwrap();
    let mut dec = decompose(arts, BendersOptions::default()).unwrap();
    let sub = &mut dec.subs[0];
    let proposal = vec![1e6; sub.complicating.len()];
    let (phi, grad) = sub.solve(&proposal).unwrap();
    assert!(phi.abs() < 1e-9);
    assert!(grad.iter().all(|g| g.abs() < 1e-9));
}

#[test]
fn unserved_only_subgradient_is_the_penalty_slope() {
    let grid = TimeGrid { periods_per_year: 1, timesteps_per_period: 4 };
    let mut system = bare_system(grid);
    system.carriers.push(carrier("power", 1));
    system.regions.push(region("r", &["power"]));
    system.conversions.push(gen_tech("gen", "power", &["r"], 10.0, 1.0));
    system.demands.push(demand_static("power", "r", vec![2.0; 4]));
    let arts = build_program(&system, &single_scenario_grid(1), &BuildFlags::default()).unwrap();
    let cap_col = arts.col(&VarKey::ConvCap { tech: "gen".into(), region: "r".into() });
    let mut dec = decompose(arts, BendersOptions::default()).unwrap();
    let sub = &mut dec.subs[0];
    let k = sub.complicating.iter().position(|&j| j == cap_col).unwrap();

    // Below demand the marginal MW displaces unserved energy for all four
    // hours: slope -(13000 - 1) * 4.
    let mut proposal = vec![0.0; sub.complicating.len()];
    proposal[k] = 1.0;
    let (phi, grad) = sub.solve(&proposal).unwrap();
    let expected_phi = 4.0 * 1.0 + 4.0 * 13_000.0;
    assert!((phi - expected_phi).abs() < 1e-6, "phi {phi} vs {expected_phi}");
    let expected_slope = -(13_000.0 - 1.0) * 4.0;
    assert!(
        (grad[k] - expected_slope).abs() < 1e-6,
        "slope {} vs {expected_slope}",
        grad[k]
    );

    // Beyond demand the capacity is worthless.
    proposal[k] = 5.0;
    let (_, grad) = sub.solve(&proposal).unwrap();
    assert!(grad[k].abs() < 1e-9, "slope {} at slack capacity", grad[k]);
}

#[test]
fn cuts_are_tight_and_valid() {
    let (system, grid) = fixture_system();
    let arts = build_program(&system, &grid, &BuildFlags::default()).unwrap();
    let mut dec = decompose(arts, BendersOptions::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(17);

    for sub_idx in [0usize, 3, 7] {
        let sub = &mut dec.subs[sub_idx];
        let k = sub.complicating.len();
        // A mild, mostly feasible generating proposal.
        let x_k: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..2.0)).collect();
        let (phi_k, lambda) = sub.solve(&x_k).unwrap();

        // Tight at the generating point by construction; re-solve cold to
        // confirm against a fresh solver.
        let cold = sub.resolve_cold(&x_k).unwrap();
        assert!(
            (phi_k - cold).abs() <= 1e-6 * (1.0 + cold.abs()),
            "sub {sub_idx}: warm {phi_k} vs cold {cold}"
        );

        // Valid underestimator at 20 random proposals.
        for trial in 0..20 {
            let z: Vec<f64> = (0..k).map(|_| rng.gen_range(0.0..2.0)).collect();
            let cut_value = phi_k
                + lambda
                    .iter()
                    .zip(z.iter().zip(&x_k))
                    .map(|(l, (zj, xj))| l * (zj - xj))
                    .sum::<f64>();
            let actual = sub.resolve_cold(&z).unwrap();
            let scale = 1.0 + actual.abs();
            assert!(
                actual >= cut_value - 1e-6 * scale,
                "sub {sub_idx} trial {trial}: cut {cut_value} above resolve {actual}"
            );
        }
    }
}

#[test]
fn converges_to_monolithic_optimum() {
    let (system, grid) = fixture_system();
    let flags = BuildFlags::default();
    let arts_mono = build_program(&system, &grid, &flags).unwrap();
    let mono = solve(&arts_mono);

    let arts = build_program(&system, &grid, &flags).unwrap();
    let options = BendersOptions {
        gap_target: 1e-4,
        max_iterations: 400,
        ..BendersOptions::default()
    };
    let mut dec = decompose(arts, options).unwrap();
    let (plan, report) = dec.iterate(&system, &flags).unwrap();
    assert_eq!(report.status, ConvergenceStatus::Converged, "{report:?}");

    let ub = report.iterations.last().unwrap().upper_bound;
    assert!(
        (ub - mono.objective).abs() <= 2e-4 * (1.0 + mono.objective.abs()),
        "benders {ub} vs monolith {}",
        mono.objective
    );
    assert!((plan.objective - ub).abs() <= 1e-9 * (1.0 + ub.abs()));

    // Lower bounds never decrease; upper bounds never increase.
    for w in report.iterations.windows(2) {
        assert!(w[1].lower_bound >= w[0].lower_bound - 1e-9);
        assert!(w[1].upper_bound <= w[0].upper_bound + 1e-9);
    }
}

#[test]
fn single_sub_matches_monolith() {
    let grid = TimeGrid { periods_per_year: 1, timesteps_per_period: 4 };
    let mut system = bare_system(grid);
    system.carriers.push(carrier("power", 1));
    system.regions.push(region("r", &["power"]));
    system.conversions.push(gen_tech("gen", "power", &["r"], 10.0, 1.0));
    system.demands.push(demand_static("power", "r", vec![1.0; 4]));
    let flags = BuildFlags::default();
    let arts_mono = build_program(&system, &single_scenario_grid(1), &flags).unwrap();
    let mono = solve(&arts_mono);

    let arts = build_program(&system, &single_scenario_grid(1), &flags).unwrap();
    let mut dec = decompose(
        arts,
        BendersOptions { gap_target: 1e-7, ..BendersOptions::default() },
    )
    .unwrap();
    let (_, report) = dec.iterate(&system, &flags).unwrap();
    let ub = report.iterations.last().unwrap().upper_bound;
    assert!(
        (ub - mono.objective).abs() <= 1e-6 * (1.0 + mono.objective.abs()),
        "benders {ub} vs monolith {}",
        mono.objective
    );
}

#[test]
fn one_iteration_reports_not_converged() {
    let (system, grid) = fixture_system();
    let flags = BuildFlags::default();
    let arts = build_program(&system, &grid, &flags).unwrap();
    let mut dec = decompose(
        arts,
        BendersOptions { max_iterations: 1, ..BendersOptions::default() },
    )
    .unwrap();
    let (_, report) = dec.iterate(&system, &flags).unwrap();
    assert_eq!(report.iterations.len(), 1);
    assert_eq!(report.status, ConvergenceStatus::IterationLimit);
}

#[test]
fn infinite_radius_matches_unstabilized_run() {
    let (system, grid) = fixture_system();
    let flags = BuildFlags::default();

    let run = |stabilization: bool, radius: f64| {
        let arts = build_program(&system, &grid, &flags).unwrap();
        let mut dec = decompose(
            arts,
            BendersOptions {
                gap_target: 1e-3,
                stabilization,
                initial_radius: radius,
                ..BendersOptions::default()
            },
        )
        .unwrap();
        let (_, report) = dec.iterate(&system, &flags).unwrap();
        report
    };
    let plain = run(false, 1.0);
    let inf_run = run(true, f64::INFINITY);
    assert_eq!(plain.iterations.len(), inf_run.iterations.len());
    for (a, b) in plain.iterations.iter().zip(&inf_run.iterations) {
        assert_eq!(a.lower_bound.to_bits(), b.lower_bound.to_bits());
        assert_eq!(a.upper_bound.to_bits(), b.upper_bound.to_bits());
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let (system, grid) = fixture_system();
    let flags = BuildFlags::default();
    let run = |workers: usize| {
        let arts = build_program(&system, &grid, &flags).unwrap();
        let mut dec = decompose(
            arts,
            BendersOptions { workers, gap_target: 1e-3, ..BendersOptions::default() },
        )
        .unwrap();
        let (plan, report) = dec.iterate(&system, &flags).unwrap();
        (plan, report)
    };
    let (plan1, rep1) = run(1);
    let (plan4, rep4) = run(4);
    assert_eq!(rep1.iterations.len(), rep4.iterations.len());
    for (a, b) in rep1.iterations.iter().zip(&rep4.iterations) {
        assert_eq!(a.upper_bound.to_bits(), b.upper_bound.to_bits());
        assert_eq!(a.lower_bound.to_bits(), b.lower_bound.to_bits());
    }
    assert_eq!(
        serde_json::to_string(&plan1).unwrap(),
        serde_json::to_string(&plan4).unwrap()
    );
}

#[test]
fn stabilization_does_not_increase_iterations() {
    let (system, grid) = fixture_system();
    let flags = BuildFlags::default();
    let run = |stabilization: bool| {
        let arts = build_program(&system, &grid, &flags).unwrap();
        let mut dec = decompose(
            arts,
            BendersOptions { gap_target: 5e-3, stabilization, ..BendersOptions::default() },
        )
        .unwrap();
        let (_, report) = dec.iterate(&system, &flags).unwrap();
        report.iterations.len()
    };
    let with = run(true);
    let without = run(false);
    assert!(
        with <= without + 2,
        "stabilized {with} vs unstabilized {without} iterations"
    );
}
