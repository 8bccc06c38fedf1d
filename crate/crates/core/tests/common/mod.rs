//! Shared builders for synthetic systems and scenario grids.

use boreas_core::model::*;
use boreas_core::program::{ProgramArtifacts, ScenarioCell, ScenarioGrid};
use boreas_lp::{solve_lp, LpSolution, SolveOptions, Status};
use std::collections::BTreeMap;

pub fn carrier(id: &str, resolution: usize) -> Carrier {
    Carrier {
        id: id.into(),
        resolution,
        unit: "MWh".into(),
    }
}

pub fn region(id: &str, carriers: &[&str]) -> Region {
    Region {
        id: id.into(),
        carriers: carriers.iter().map(|c| c.to_string()).collect(),
    }
}

pub fn gen_tech(id: &str, out: &str, regions: &[&str], invest: f64, var: f64) -> ConversionTech {
    ConversionTech {
        id: id.into(),
        regions: regions.iter().map(|r| r.to_string()).collect(),
        inputs: BTreeMap::new(),
        outputs: BTreeMap::from([(out.to_string(), 1.0)]),
        invest_cost: invest,
        var_cost: var,
        capacity_min: 0.0,
        capacity_max: f64::INFINITY,
        emission_factors: BTreeMap::new(),
        must_run: false,
        profile_metric: None,
    }
}

pub fn long_store(id: &str, carrier: &str, regions: &[&str]) -> StorageTech {
    StorageTech {
        id: id.into(),
        carrier: carrier.into(),
        regions: regions.iter().map(|r| r.to_string()).collect(),
        class: StorageClass::LongTerm,
        charge_efficiency: 1.0,
        discharge_efficiency: 1.0,
        invest_cost_power: 0.001,
        invest_cost_energy: 0.001,
        multi_year: true,
        eta: 1.0,
        inflow_metric: None,
        power_min: 0.0,
        power_max: f64::INFINITY,
        energy_min: 0.0,
        energy_max: f64::INFINITY,
    }
}

pub fn demand_static(carrier: &str, region: &str, values: Vec<f64>) -> DemandSeries {
    DemandSeries {
        carrier: carrier.into(),
        region: region.into(),
        unserved_cost: DEFAULT_UNSERVED_COST,
        source: DemandSource::Static(values),
    }
}

pub fn bare_system(grid: TimeGrid) -> EnergySystem {
    EnergySystem {
        grid,
        carriers: Vec::new(),
        regions: Vec::new(),
        conversions: Vec::new(),
        storages: Vec::new(),
        links: Vec::new(),
        contracts: Vec::new(),
        demands: Vec::new(),
        emission_policy: None,
    }
}

pub fn cell(label: &str, probability: f64) -> ScenarioCell {
    ScenarioCell {
        label: label.into(),
        probability,
        extreme: false,
        series: BTreeMap::new(),
    }
}

pub fn cell_with(
    label: &str,
    probability: f64,
    series: &[(&str, &str, Vec<f64>)],
) -> ScenarioCell {
    ScenarioCell {
        label: label.into(),
        probability,
        extreme: false,
        series: series
            .iter()
            .map(|(m, r, v)| ((m.to_string(), r.to_string()), v.clone()))
            .collect(),
    }
}

/// Grid with one scenario per period and no climate series.
pub fn single_scenario_grid(periods: usize) -> ScenarioGrid {
    ScenarioGrid {
        periods: (0..periods).map(|_| vec![cell("base", 1.0)]).collect(),
    }
}

pub fn solve(artifacts: &ProgramArtifacts) -> LpSolution {
    let sol = solve_lp(&artifacts.lp, &SolveOptions::default()).expect("solver runs");
    assert_eq!(sol.status, Status::Optimal, "expected optimal");
    sol
}
