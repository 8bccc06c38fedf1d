use super::{ProgramArtifacts, VarKey};
use crate::error::CoreError;
use crate::model::{DemandSource, EnergySystem, StorageClass};
use crate::series::{aggregate_series, SeriesKind};
use boreas_lp::{LpSolution, Status};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// First-stage sizing of one storage in one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoragePlan {
    pub power_in: f64,
    pub power_out: f64,
    pub size_total: f64,
    pub size_season: f64,
    pub size_multi: f64,
    pub start_season: f64,
    pub start_multi: f64,
    pub leeway: f64,
    /// Explicit level at the start of each period.
    pub boundary_levels: Vec<f64>,
    pub delta_season: Vec<f64>,
    /// `delta_multi[p][s]`; empty when the multi-year component is off.
    pub delta_multi: Vec<Vec<f64>>,
    pub eta: f64,
}

/// Aggregated operation of one period-scenario block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockOperation {
    pub label: String,
    pub probability: f64,
    pub extreme: bool,
    /// Total exogenous demand in MWh.
    pub demand: f64,
    pub unserved: f64,
    /// Renewable energy available but not converted.
    pub curtailment: f64,
    /// Available renewable energy at the chosen capacities.
    pub renewable_potential: f64,
    pub thermal_generation: f64,
    pub total_generation: f64,
    /// Net emissions actually caused (not the allowance).
    pub emissions: f64,
    /// Unweighted operational cost of the block.
    pub operational_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct CostBreakdown {
    pub investment: f64,
    pub imports: f64,
    pub variable: f64,
    pub unserved: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.investment + self.imports + self.variable + self.unserved
    }
}

/// First-stage plan plus per-scenario operation aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSolution {
    pub objective: f64,
    pub multi_year: bool,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// `capacities[tech][region]` in MW.
    pub capacities: BTreeMap<String, BTreeMap<String, f64>>,
    pub link_capacities: BTreeMap<String, f64>,
    /// Contracted baseline import rate per contract, MW.
    pub contract_baselines: BTreeMap<String, f64>,
    /// `storage[store][region]`.
    pub storage: BTreeMap<String, BTreeMap<String, StoragePlan>>,
    pub cost_breakdown: CostBreakdown,
    /// `blocks[period][scenario]`.
    pub blocks: Vec<Vec<BlockOperation>>,
    /// Period-scenario combinations covered implicitly (decimal string).
    pub combination_count: String,
}

/// Assemble a [`PlanSolution`] from an optimal extensive-form solution.
pub fn extract_solution(
    system: &EnergySystem,
    artifacts: &ProgramArtifacts,
    solution: &LpSolution,
    flags: &super::BuildFlags,
) -> Result<PlanSolution, CoreError> {
    if solution.status != Status::Optimal {
        return Err(CoreError::StatusNotOptimal(solution.status));
    }
    let x = &solution.primal;
    let value = |key: &VarKey| -> f64 { artifacts.index.col(key).map(|c| x[c]).unwrap_or(0.0) };

    let mut capacities: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for tech in &system.conversions {
        let per_region: BTreeMap<String, f64> = tech
            .regions
            .iter()
            .map(|r| {
                (
                    r.clone(),
                    value(&VarKey::ConvCap { tech: tech.id.clone(), region: r.clone() }),
                )
            })
            .collect();
        capacities.insert(tech.id.clone(), per_region);
    }

    let link_capacities: BTreeMap<String, f64> = system
        .links
        .iter()
        .map(|l| (l.id.clone(), value(&VarKey::LinkCap { link: l.id.clone() })))
        .collect();

    let contract_baselines: BTreeMap<String, f64> = system
        .contracts
        .iter()
        .map(|c| (c.id.clone(), value(&VarKey::ContractBase { contract: c.id.clone() })))
        .collect();

    let periods = artifacts.probabilities.len();
    let mut storage: BTreeMap<String, BTreeMap<String, StoragePlan>> = BTreeMap::new();
    for st in &system.storages {
        let mut per_region = BTreeMap::new();
        for region in &st.regions {
            let sid = st.id.clone();
            let rid = region.clone();
            let long = st.class == StorageClass::LongTerm;
            let has_multi = artifacts
                .index
                .col(&VarKey::StoreSizeMulti { store: sid.clone(), region: rid.clone() })
                .is_some();
            let boundary_levels: Vec<f64> = if long {
                (0..periods)
                    .map(|p| value(&VarKey::StoreBoundary { store: sid.clone(), region: rid.clone(), period: p }))
                    .collect()
            } else {
                Vec::new()
            };
            let delta_season: Vec<f64> = if long {
                (0..periods)
                    .map(|p| value(&VarKey::StoreDeltaSeason { store: sid.clone(), region: rid.clone(), period: p }))
                    .collect()
            } else {
                Vec::new()
            };
            let delta_multi: Vec<Vec<f64>> = if has_multi {
                (0..periods)
                    .map(|p| {
                        (0..artifacts.probabilities[p].len())
                            .map(|s| {
                                value(&VarKey::StoreDeltaMulti {
                                    store: sid.clone(),
                                    region: rid.clone(),
                                    period: p,
                                    scen: s,
                                })
                            })
                            .collect()
                    })
                    .collect()
            } else {
                Vec::new()
            };
            let size_total = value(&VarKey::StoreSizeTotal { store: sid.clone(), region: rid.clone() });
            per_region.insert(
                rid.clone(),
                StoragePlan {
                    power_in: value(&VarKey::StorePowerIn { store: sid.clone(), region: rid.clone() }),
                    power_out: value(&VarKey::StorePowerOut { store: sid.clone(), region: rid.clone() }),
                    size_total,
                    size_season: if long {
                        value(&VarKey::StoreSizeSeason { store: sid.clone(), region: rid.clone() })
                    } else {
                        size_total
                    },
                    size_multi: value(&VarKey::StoreSizeMulti { store: sid.clone(), region: rid.clone() }),
                    start_season: if long {
                        value(&VarKey::StoreBoundary { store: sid.clone(), region: rid.clone(), period: 0 })
                    } else {
                        0.0
                    },
                    start_multi: value(&VarKey::StoreStartMulti { store: sid.clone(), region: rid.clone() }),
                    leeway: value(&VarKey::StoreLeeway { store: sid.clone(), region: rid.clone() }),
                    boundary_levels,
                    delta_season,
                    delta_multi,
                    eta: st.eta,
                },
            );
        }
        storage.insert(st.id.clone(), per_region);
    }

    // Fuel carriers: held in long-term storage or imported under contract.
    // Thermal generation: fuel-consuming conversion serving a demand
    // carrier that is not itself a fuel.
    let fuel_carriers: std::collections::BTreeSet<&str> = system
        .storages
        .iter()
        .filter(|s| s.class == StorageClass::LongTerm)
        .map(|s| s.carrier.as_str())
        .chain(system.contracts.iter().map(|c| c.carrier.as_str()))
        .collect();
    let demand_carriers: std::collections::BTreeSet<&str> =
        system.demands.iter().map(|d| d.carrier.as_str()).collect();

    let t_base = system.grid.timesteps_per_period;
    let mut blocks: Vec<Vec<BlockOperation>> = Vec::with_capacity(periods);
    let mut expected_flex_cost = 0.0;
    let mut expected_unserved_cost = 0.0;
    let mut expected_variable = 0.0;
    for p in 0..periods {
        let mut row = Vec::new();
        for s in 0..artifacts.probabilities[p].len() {
            let rho = artifacts.probabilities[p][s];
            let cell = &artifacts.grid.periods[p][s];

            let mut demand_total = 0.0;
            let mut unserved_total = 0.0;
            let mut unserved_cost = 0.0;
            for d in &system.demands {
                let carrier = system.carrier(&d.carrier).unwrap();
                let steps = system.steps_per_period(carrier);
                let base: &[f64] = match &d.source {
                    DemandSource::Static(year) => &year[p * t_base..(p + 1) * t_base],
                    DemandSource::Metric(metric) => cell
                        .series
                        .get(&(metric.clone(), d.region.clone()))
                        .map(|v| v.as_slice())
                        .unwrap_or(&[]),
                };
                demand_total += base.iter().sum::<f64>();
                for step in 0..steps {
                    let u = value(&VarKey::Unserved {
                        carrier: d.carrier.clone(),
                        region: d.region.clone(),
                        period: p,
                        scen: s,
                        step,
                    });
                    unserved_total += u;
                    unserved_cost += u * d.unserved_cost;
                }
            }

            let mut curtailment = 0.0;
            let mut renewable_potential = 0.0;
            let mut thermal = 0.0;
            let mut total_gen = 0.0;
            let mut variable_cost = 0.0;
            let mut emissions = 0.0;
            for tech in &system.conversions {
                let res_op = tech
                    .inputs
                    .keys()
                    .chain(tech.outputs.keys())
                    .filter_map(|c| system.carrier(c))
                    .map(|c| c.resolution)
                    .min()
                    .unwrap_or(1);
                let steps_op = t_base / res_op;
                let renewable = tech.profile_metric.is_some() && tech.inputs.is_empty();
                let thermal_tech = tech
                    .inputs
                    .keys()
                    .any(|c| fuel_carriers.contains(c.as_str()))
                    && tech.outputs.keys().any(|c| {
                        demand_carriers.contains(c.as_str()) && !fuel_carriers.contains(c.as_str())
                    });
                let out_sum: f64 = tech.outputs.values().sum();
                let emis_rate: f64 = tech
                    .emission_factors
                    .iter()
                    .map(|(c, ef)| ef * tech.inputs.get(c).copied().unwrap_or(0.0))
                    .sum();
                for region in &tech.regions {
                    let avail: Option<Vec<f64>> = match &tech.profile_metric {
                        Some(metric) if renewable => cell
                            .series
                            .get(&(metric.clone(), region.clone()))
                            .map(|base| {
                                aggregate_series(base, res_op, SeriesKind::CapacityFactor)
                                    .unwrap_or_else(|_| vec![0.0; steps_op])
                            }),
                        _ => None,
                    };
                    let cap = value(&VarKey::ConvCap {
                        tech: tech.id.clone(),
                        region: region.clone(),
                    });
                    for step in 0..steps_op {
                        let y = value(&VarKey::Activity {
                            tech: tech.id.clone(),
                            region: region.clone(),
                            period: p,
                            scen: s,
                            step,
                        });
                        variable_cost += y * tech.var_cost;
                        emissions += y * emis_rate;
                        let produced = y * out_sum;
                        total_gen += produced;
                        if thermal_tech {
                            thermal += produced;
                        }
                        if let Some(avail) = &avail {
                            let potential = avail[step] * res_op as f64 * cap * out_sum;
                            renewable_potential += potential;
                            curtailment += (potential - produced).max(0.0);
                        }
                    }
                }
            }

            let mut flex_cost = 0.0;
            for contract in &system.contracts {
                let y_base = value(&VarKey::ImportBase { contract: contract.id.clone(), period: p, scen: s });
                let y_flex = value(&VarKey::ImportFlex { contract: contract.id.clone(), period: p, scen: s });
                emissions += contract.emission_factor * (y_base + y_flex);
                flex_cost += contract.nu_flex * y_flex;
            }
            let mut link_cost = 0.0;
            for link in &system.links {
                let carrier = system.carrier(&link.carrier).unwrap();
                for step in 0..system.steps_per_period(carrier) {
                    let fwd = value(&VarKey::LinkFlowFwd { link: link.id.clone(), period: p, scen: s, step });
                    let rev = value(&VarKey::LinkFlowRev { link: link.id.clone(), period: p, scen: s, step });
                    link_cost += link.var_cost * (fwd + rev);
                }
            }

            let operational_cost = variable_cost + link_cost + unserved_cost + flex_cost;
            expected_flex_cost += rho * flex_cost;
            expected_unserved_cost += rho * unserved_cost;
            expected_variable += rho * (variable_cost + link_cost);

            row.push(BlockOperation {
                label: cell.label.clone(),
                probability: rho,
                extreme: cell.extreme,
                demand: demand_total,
                unserved: unserved_total,
                curtailment,
                renewable_potential,
                thermal_generation: thermal,
                total_generation: total_gen,
                emissions,
                operational_cost,
            });
        }
        blocks.push(row);
    }

    // Investment: every first-stage cost except contract base costs.
    let mut investment = 0.0;
    let mut imports_base = 0.0;
    for (col, key) in artifacts.index.iter() {
        if !key.is_first_stage() {
            continue;
        }
        let cost = artifacts.unweighted_cost[col];
        if cost == 0.0 {
            continue;
        }
        match key {
            VarKey::ContractBaseCost { .. } => imports_base += cost * x[col],
            _ => investment += cost * x[col],
        }
    }

    let cost_breakdown = CostBreakdown {
        investment,
        imports: imports_base + expected_flex_cost,
        variable: expected_variable,
        unserved: expected_unserved_cost,
    };

    Ok(PlanSolution {
        objective: solution.objective,
        multi_year: flags.multi_year,
        alpha: flags.alpha,
        beta: flags.beta,
        gamma: flags.gamma,
        capacities,
        link_capacities,
        contract_baselines,
        storage,
        cost_breakdown,
        blocks,
        combination_count: artifacts.combination_count.to_string(),
    })
}
