//! Probability-weighted random-walk simulation of a finished plan.
//!
//! Each run draws one representative scenario per period and year,
//! independently across periods and years. Seasonal storage levels follow
//! the plan's fixed boundary profile; the multi-year account accumulates
//! the sampled scenario deltas. Level violations (below zero or above the
//! sized capacity) are recorded, never clipped: the simulator audits the
//! robust formulation, it does not re-dispatch.

use crate::program::PlanSolution;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub runs: usize,
    pub years: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            runs: 200,
            years: 100,
            seed: 0,
            workers: 1,
        }
    }
}

/// Draw one representative per period from its probability weights.
///
/// The stream advances by exactly one draw per period, so a fixed seed
/// reproduces the same sequence byte for byte.
pub fn sample_year(probabilities: &[Vec<f64>], rng: &mut impl Rng) -> Vec<usize> {
    probabilities
        .iter()
        .map(|rho| {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (s, &p) in rho.iter().enumerate() {
                acc += p;
                if u < acc {
                    return s;
                }
            }
            rho.len() - 1
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KpiRow {
    pub run: usize,
    pub year: usize,
    pub unserved_share: f64,
    pub curtailment_share: f64,
    pub thermal_share: f64,
    pub net_emissions: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub run: usize,
    pub year: usize,
    pub period: usize,
    /// Index into the sorted (storage, region) list of the report.
    pub storage: usize,
    pub level_seasonal: f64,
    pub level_multi: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ViolationCounts {
    /// Multi-year account below zero at a period boundary.
    pub depletion: usize,
    /// Multi-year account above its sized capacity.
    pub spill: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct KpiReport {
    pub config_runs: usize,
    pub config_years: usize,
    pub seed: u64,
    /// Convention marker: multi-year deltas already include the eta loss
    /// from the planning model, so the walk adds them unchanged.
    pub eta_convention: String,
    /// Sorted (storage, region) pairs indexed by `TrajectoryRow::storage`.
    pub storages: Vec<(String, String)>,
    pub kpis: Vec<KpiRow>,
    pub violations: ViolationCounts,
}

#[derive(Debug, Clone)]
pub struct Trajectories {
    pub rows: Vec<TrajectoryRow>,
}

struct StorageWalk {
    start_multi: f64,
    size_multi: f64,
    boundary_levels: Vec<f64>,
    delta_multi: Vec<Vec<f64>>,
}

/// Simulate `config.runs` independent runs of `config.years` years each.
pub fn simulate(
    plan: &PlanSolution,
    config: &SimulationConfig,
) -> Result<(KpiReport, Trajectories), crate::CoreError> {
    let periods = plan.blocks.len();
    let probabilities: Vec<Vec<f64>> = plan
        .blocks
        .iter()
        .map(|row| row.iter().map(|b| b.probability).collect())
        .collect();

    // Long-term storages in deterministic order.
    let mut walks: Vec<((String, String), StorageWalk)> = Vec::new();
    for (sid, per_region) in &plan.storage {
        for (rid, sp) in per_region {
            if sp.boundary_levels.is_empty() {
                continue;
            }
            if plan.multi_year && !sp.delta_multi.is_empty() {
                for (p, row) in sp.delta_multi.iter().enumerate() {
                    if row.len() != probabilities[p].len() {
                        return Err(crate::CoreError::MissingDelta {
                            storage: sid.clone(),
                            region: rid.clone(),
                            period: p,
                        });
                    }
                }
            }
            walks.push((
                (sid.clone(), rid.clone()),
                StorageWalk {
                    start_multi: sp.start_multi,
                    size_multi: sp.size_multi,
                    boundary_levels: sp.boundary_levels.clone(),
                    delta_multi: sp.delta_multi.clone(),
                },
            ));
        }
    }

    let run_one = |run: usize| -> (Vec<KpiRow>, Vec<TrajectoryRow>, ViolationCounts) {
        let mut rng = ChaCha12Rng::seed_from_u64(config.seed);
        rng.set_stream(run as u64 + 1);
        let mut kpis = Vec::with_capacity(config.years);
        let mut rows = Vec::with_capacity(config.years * periods * walks.len());
        let mut violations = ViolationCounts::default();
        // Account levels persist across years within a run.
        let mut levels: Vec<f64> = walks.iter().map(|(_, w)| w.start_multi).collect();

        for year in 0..config.years {
            let seq = sample_year(&probabilities, &mut rng);
            let mut demand = 0.0;
            let mut unserved = 0.0;
            let mut curtailment = 0.0;
            let mut potential = 0.0;
            let mut thermal = 0.0;
            let mut total_gen = 0.0;
            let mut emissions = 0.0;
            for (p, &s) in seq.iter().enumerate() {
                let block = &plan.blocks[p][s];
                demand += block.demand;
                unserved += block.unserved;
                curtailment += block.curtailment;
                potential += block.renewable_potential;
                thermal += block.thermal_generation;
                total_gen += block.total_generation;
                emissions += block.emissions;

                for (k, ((_key, walk), level)) in
                    walks.iter().zip(levels.iter_mut()).enumerate()
                {
                    // Seasonal level is the planned boundary profile; the
                    // multi-year account moves by the sampled delta.
                    if !walk.delta_multi.is_empty() {
                        *level += walk.delta_multi[p][s];
                        let tol = 1e-9 * (1.0 + walk.size_multi.abs());
                        if *level < -tol {
                            violations.depletion += 1;
                        }
                        if *level > walk.size_multi + tol {
                            violations.spill += 1;
                        }
                    }
                    rows.push(TrajectoryRow {
                        run,
                        year,
                        period: p,
                        storage: k,
                        level_seasonal: walk.boundary_levels[p],
                        level_multi: *level,
                    });
                }
            }
            kpis.push(KpiRow {
                run,
                year,
                unserved_share: if demand > 0.0 { unserved / demand } else { 0.0 },
                curtailment_share: if potential > 0.0 {
                    curtailment / potential
                } else {
                    0.0
                },
                thermal_share: if total_gen > 0.0 { thermal / total_gen } else { 0.0 },
                net_emissions: emissions,
            });
        }
        (kpis, rows, violations)
    };

    let workers = config.workers.max(1).min(config.runs.max(1));
    let mut per_run: Vec<Option<(Vec<KpiRow>, Vec<TrajectoryRow>, ViolationCounts)>> =
        (0..config.runs).map(|_| None).collect();
    if workers <= 1 {
        for (run, slot) in per_run.iter_mut().enumerate() {
            *slot = Some(run_one(run));
        }
    } else {
        let next = AtomicUsize::new(0);
        let slots: Vec<Mutex<&mut Option<_>>> = per_run.iter_mut().map(Mutex::new).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let run = next.fetch_add(1, Ordering::SeqCst);
                    if run >= slots.len() {
                        break;
                    }
                    **slots[run].lock().unwrap() = Some(run_one(run));
                });
            }
        });
    }

    let mut kpis = Vec::with_capacity(config.runs * config.years);
    let mut rows = Vec::new();
    let mut violations = ViolationCounts::default();
    for slot in per_run {
        let (k, t, v) = slot.expect("every run simulated");
        kpis.extend(k);
        rows.extend(t);
        violations.depletion += v.depletion;
        violations.spill += v.spill;
    }

    Ok((
        KpiReport {
            config_runs: config.runs,
            config_years: config.years,
            seed: config.seed,
            eta_convention: "deltas-include-eta".to_string(),
            storages: walks.into_iter().map(|(key, _)| key).collect(),
            kpis,
            violations,
        },
        Trajectories { rows },
    ))
}

// ---------------------------------------------------------------------------
// Percentiles and serialization
// ---------------------------------------------------------------------------

/// Nearest-rank percentile: the ceil(q * n)-th smallest sample.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PercentileRow {
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
    pub mean: f64,
}

fn distribution(values: impl Iterator<Item = f64>) -> PercentileRow {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    PercentileRow {
        p5: percentile(&v, 0.05),
        p50: percentile(&v, 0.50),
        p95: percentile(&v, 0.95),
        mean,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KpiSummary {
    pub unserved_share: PercentileRow,
    pub curtailment_share: PercentileRow,
    pub thermal_share: PercentileRow,
    pub net_emissions: PercentileRow,
    pub violations: ViolationCounts,
    pub eta_convention: String,
    /// Combined level distribution per (storage, region) and period.
    pub monthly_levels: BTreeMap<String, Vec<PercentileRow>>,
}

/// Percentile table per KPI plus per-calendar-period level distributions.
pub fn kpi_distributions(report: &KpiReport, trajectories: &Trajectories) -> KpiSummary {
    let mut monthly_levels = BTreeMap::new();
    let periods = trajectories
        .rows
        .iter()
        .map(|r| r.period + 1)
        .max()
        .unwrap_or(0);
    for (k, (sid, rid)) in report.storages.iter().enumerate() {
        let mut per_period: Vec<Vec<f64>> = vec![Vec::new(); periods];
        for row in trajectories.rows.iter().filter(|r| r.storage == k) {
            per_period[row.period].push(row.level_seasonal + row.level_multi);
        }
        let rows: Vec<PercentileRow> = per_period
            .into_iter()
            .map(|mut v| {
                if v.is_empty() {
                    v.push(0.0);
                }
                distribution(v.into_iter())
            })
            .collect();
        monthly_levels.insert(format!("{sid}/{rid}"), rows);
    }
    KpiSummary {
        unserved_share: distribution(report.kpis.iter().map(|k| k.unserved_share)),
        curtailment_share: distribution(report.kpis.iter().map(|k| k.curtailment_share)),
        thermal_share: distribution(report.kpis.iter().map(|k| k.thermal_share)),
        net_emissions: distribution(report.kpis.iter().map(|k| k.net_emissions)),
        violations: report.violations,
        eta_convention: report.eta_convention.clone(),
        monthly_levels,
    }
}

/// `run,year,kpi,value` CSV.
pub fn kpi_csv(report: &KpiReport) -> String {
    let mut out = String::from("run,year,kpi,value\n");
    for row in &report.kpis {
        out.push_str(&format!("{},{},unserved_share,{}\n", row.run, row.year, row.unserved_share));
        out.push_str(&format!(
            "{},{},curtailment_share,{}\n",
            row.run, row.year, row.curtailment_share
        ));
        out.push_str(&format!("{},{},thermal_share,{}\n", row.run, row.year, row.thermal_share));
        out.push_str(&format!("{},{},net_emissions,{}\n", row.run, row.year, row.net_emissions));
    }
    out
}

/// `run,year,period,storage,region,level_seasonal,level_multiyear` CSV.
pub fn trajectory_csv(report: &KpiReport, trajectories: &Trajectories) -> String {
    let mut out = String::from("run,year,period,storage,region,level_seasonal,level_multiyear\n");
    for row in &trajectories.rows {
        let (sid, rid) = &report.storages[row.storage];
        out.push_str(&format!(
            "{},{},{},{sid},{rid},{},{}\n",
            row.run, row.year, row.period, row.level_seasonal, row.level_multi
        ));
    }
    out
}
