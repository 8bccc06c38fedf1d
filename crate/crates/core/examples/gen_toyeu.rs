//! Regenerate the bundled `toyeu` fixture: a three-region, four-carrier
//! system with nine conversion technologies and a five-year synthetic
//! climate sample. Deterministic; run from the workspace root with
//!
//! ```text
//! cargo run -p boreas-core --example gen_toyeu
//! ```

use boreas_core::climate::{save_sample, ClimateSample, MetricDef, MetricKind};
use boreas_core::model::*;
use boreas_core::model_io::save_system;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

const PERIODS: usize = 12;
const STEPS: usize = 72;
const YEARS: [i32; 5] = [2001, 2002, 2003, 2004, 2005];

fn main() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/toyeu");
    let system = build_system();
    let violations = validate(&system);
    assert!(violations.is_empty(), "fixture must validate: {violations:?}");
    save_system(&system, &root.join("system")).expect("write system");
    let sample = build_sample();
    save_sample(&sample, &root.join("sample")).expect("write sample");
    println!("wrote {}", root.display());
}

fn conv(
    id: &str,
    regions: &[&str],
    inputs: &[(&str, f64)],
    outputs: &[(&str, f64)],
    invest: f64,
    var: f64,
) -> ConversionTech {
    ConversionTech {
        id: id.into(),
        regions: regions.iter().map(|r| r.to_string()).collect(),
        inputs: inputs.iter().map(|(c, v)| (c.to_string(), *v)).collect(),
        outputs: outputs.iter().map(|(c, v)| (c.to_string(), *v)).collect(),
        invest_cost: invest,
        var_cost: var,
        capacity_min: 0.0,
        capacity_max: f64::INFINITY,
        emission_factors: BTreeMap::new(),
        must_run: false,
        profile_metric: None,
    }
}

fn build_system() -> EnergySystem {
    let mut wind = conv("wind", &["island", "north", "south"], &[], &[("electricity", 1.0)], 85.0, 0.0);
    wind.profile_metric = Some("wind_cf".into());
    let mut solar = conv("solar", &["north", "south"], &[], &[("electricity", 1.0)], 55.0, 0.0);
    solar.profile_metric = Some("solar_cf".into());
    let ccgt = conv("ccgt", &["north"], &[("gas", 1.8)], &[("electricity", 1.0)], 30.0, 2.0);
    let oil_turbine = conv("oil_turbine", &["north"], &[("oil", 2.2)], &[("electricity", 1.0)], 16.0, 3.0);
    let power_to_gas = conv("power_to_gas", &["north"], &[("electricity", 1.55)], &[("gas", 1.0)], 22.0, 0.1);
    let gas_to_oil = conv("gas_to_oil", &["north"], &[("gas", 1.25)], &[("oil", 1.0)], 10.0, 0.2);
    let mut heat_pump = conv("heat_pump", &["north"], &[("electricity", 0.32)], &[("heat", 1.0)], 38.0, 0.0);
    heat_pump.must_run = true;
    let gas_boiler = conv("gas_boiler", &["north"], &[("gas", 1.06)], &[("heat", 1.0)], 7.0, 0.5);
    let mut dac = conv("dac", &["north"], &[("electricity", 1.0)], &[], 14.0, 1.0);
    dac.emission_factors = BTreeMap::from([("electricity".to_string(), -0.45)]);

    let battery = StorageTech {
        id: "battery".into(),
        carrier: "electricity".into(),
        regions: vec!["north".into(), "south".into()],
        class: StorageClass::ShortTerm,
        charge_efficiency: 0.95,
        discharge_efficiency: 0.95,
        invest_cost_power: 10.0,
        invest_cost_energy: 6.0,
        multi_year: false,
        eta: 1.0,
        inflow_metric: None,
        power_min: 0.0,
        power_max: f64::INFINITY,
        energy_min: 0.0,
        energy_max: f64::INFINITY,
    };
    let gas_store = StorageTech {
        id: "gas_store".into(),
        carrier: "gas".into(),
        regions: vec!["north".into()],
        class: StorageClass::LongTerm,
        charge_efficiency: 0.99,
        discharge_efficiency: 0.99,
        invest_cost_power: 1.5,
        invest_cost_energy: 0.35,
        multi_year: false,
        eta: 1.0,
        inflow_metric: None,
        power_min: 0.0,
        power_max: f64::INFINITY,
        energy_min: 0.0,
        energy_max: f64::INFINITY,
    };
    let oil_store = StorageTech {
        id: "oil_store".into(),
        carrier: "oil".into(),
        regions: vec!["north".into()],
        class: StorageClass::LongTerm,
        charge_efficiency: 1.0,
        discharge_efficiency: 1.0,
        invest_cost_power: 0.8,
        invest_cost_energy: 0.04,
        multi_year: true,
        eta: 0.999,
        inflow_metric: None,
        power_min: 0.0,
        power_max: f64::INFINITY,
        energy_min: 0.0,
        energy_max: f64::INFINITY,
    };

    EnergySystem {
        grid: TimeGrid {
            periods_per_year: PERIODS,
            timesteps_per_period: STEPS,
        },
        carriers: vec![
            Carrier { id: "electricity".into(), resolution: 1, unit: "MWh".into() },
            Carrier { id: "gas".into(), resolution: 24, unit: "MWh".into() },
            Carrier { id: "heat".into(), resolution: 4, unit: "MWh".into() },
            Carrier { id: "oil".into(), resolution: 72, unit: "MWh".into() },
        ],
        regions: vec![
            Region { id: "island".into(), carriers: vec!["electricity".into()] },
            Region {
                id: "north".into(),
                carriers: vec!["electricity".into(), "gas".into(), "heat".into(), "oil".into()],
            },
            Region { id: "south".into(), carriers: vec!["electricity".into()] },
        ],
        conversions: vec![
            wind, solar, ccgt, oil_turbine, power_to_gas, gas_to_oil, heat_pump, gas_boiler, dac,
        ],
        storages: vec![battery, gas_store, oil_store],
        links: vec![
            ExchangeLink {
                id: "line_ns".into(),
                carrier: "electricity".into(),
                from: "north".into(),
                to: "south".into(),
                loss: 0.03,
                invest_cost: 9.0,
                var_cost: 0.05,
                existing: 2.0,
                capacity_min: 0.0,
                capacity_max: f64::INFINITY,
            },
            ExchangeLink {
                id: "line_si".into(),
                carrier: "electricity".into(),
                from: "south".into(),
                to: "island".into(),
                loss: 0.04,
                invest_cost: 9.0,
                var_cost: 0.05,
                existing: 1.0,
                capacity_min: 0.0,
                capacity_max: f64::INFINITY,
            },
        ],
        contracts: vec![
            ImportContract {
                id: "gas_import".into(),
                carrier: "gas".into(),
                region: "north".into(),
                theta: 0.10,
                nu_base: 30.0,
                nu_flex: 36.0,
                emission_factor: 0.20,
            },
            ImportContract {
                id: "oil_import".into(),
                carrier: "oil".into(),
                region: "north".into(),
                theta: 0.10,
                nu_base: 45.0,
                nu_flex: 54.0,
                emission_factor: 0.27,
            },
        ],
        demands: vec![
            DemandSeries {
                carrier: "electricity".into(),
                region: "island".into(),
                unserved_cost: DEFAULT_UNSERVED_COST,
                source: DemandSource::Static(elec_demand(0.9, 0.15)),
            },
            DemandSeries {
                carrier: "electricity".into(),
                region: "north".into(),
                unserved_cost: DEFAULT_UNSERVED_COST,
                source: DemandSource::Static(elec_demand(5.0, 0.8)),
            },
            DemandSeries {
                carrier: "electricity".into(),
                region: "south".into(),
                unserved_cost: DEFAULT_UNSERVED_COST,
                source: DemandSource::Static(elec_demand(3.0, 0.5)),
            },
            DemandSeries {
                carrier: "heat".into(),
                region: "north".into(),
                unserved_cost: DEFAULT_UNSERVED_COST,
                source: DemandSource::Metric("heat_demand".into()),
            },
            DemandSeries {
                carrier: "oil".into(),
                region: "north".into(),
                unserved_cost: DEFAULT_UNSERVED_COST,
                source: DemandSource::Static(vec![1.2; PERIODS * STEPS]),
            },
        ],
        emission_policy: Some(EmissionPolicy { cap: 0.0 }),
    }
}

/// Daily load shape with a seasonal swing, base timestep = one hour.
fn elec_demand(level: f64, winter_lift: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(PERIODS * STEPS);
    for p in 0..PERIODS {
        let season = (((p as f64 + 0.5) / PERIODS as f64) * 2.0 * PI).cos();
        for t in 0..STEPS {
            let hour = (t % 24) as f64;
            let daily = 0.85 + 0.3 * (((hour - 12.0) / 24.0) * 2.0 * PI).cos().max(-0.5);
            out.push(level * daily * (1.0 + winter_lift * 0.5 * (season + 0.3)));
        }
    }
    out
}

/// Deterministic pseudo-noise in [-1, 1] from integer coordinates.
fn wobble(a: usize, b: usize, c: usize) -> f64 {
    let x = (a as f64 * 12.9898 + b as f64 * 78.233 + c as f64 * 37.719).sin() * 43_758.547;
    2.0 * (x - x.floor()) - 1.0
}

fn build_sample() -> ClimateSample {
    let metrics = vec![
        MetricDef {
            name: "heat_demand".into(),
            kind: MetricKind::Demand,
            weight_tech: None,
            regions: vec!["north".into()],
        },
        MetricDef {
            name: "solar_cf".into(),
            kind: MetricKind::Supply,
            weight_tech: Some("solar".into()),
            regions: vec!["north".into(), "south".into()],
        },
        MetricDef {
            name: "wind_cf".into(),
            kind: MetricKind::Supply,
            weight_tech: Some("wind".into()),
            regions: vec!["island".into(), "north".into(), "south".into()],
        },
    ];

    // Year factors for winter wind: 2003 is the deficit year, 2005 the
    // surplus year.
    let wind_year = [1.0, 0.9, 0.62, 1.05, 1.3];
    let heat_year = [1.0, 1.05, 1.22, 0.95, 0.9];

    let mut series = BTreeMap::new();
    for (region_idx, region) in ["island", "north", "south"].iter().enumerate() {
        let mut data = vec![vec![Vec::with_capacity(STEPS); PERIODS]; YEARS.len()];
        for (y, cell_rows) in data.iter_mut().enumerate() {
            for (p, cell) in cell_rows.iter_mut().enumerate() {
                let season = (((p as f64 + 0.5) / PERIODS as f64) * 2.0 * PI).cos();
                // Winter-heavy mean with year-dependent winter amplitude.
                let winter_weight = 0.5 * (1.0 + season);
                let base = 0.28 + 0.18 * season;
                let year_amp = 1.0 + (wind_year[y] - 1.0) * (0.25 + 0.75 * winter_weight);
                for t in 0..STEPS {
                    let gust = 0.16 * (((t as f64) / 9.0 + region_idx as f64) * 2.0 * PI / 8.0).sin();
                    let noise = 0.08 * wobble(y * 1000 + p, t, region_idx);
                    let cf = (base * year_amp + gust + noise).clamp(0.01, 0.98);
                    cell.push(cf);
                }
            }
        }
        series.insert(("wind_cf".to_string(), region.to_string()), data);
    }
    for (region_idx, region) in ["north", "south"].iter().enumerate() {
        let mut data = vec![vec![Vec::with_capacity(STEPS); PERIODS]; YEARS.len()];
        for (y, cell_rows) in data.iter_mut().enumerate() {
            for (p, cell) in cell_rows.iter_mut().enumerate() {
                let season = -(((p as f64 + 0.5) / PERIODS as f64) * 2.0 * PI).cos();
                let base = (0.22 + 0.15 * season).max(0.03);
                for t in 0..STEPS {
                    let hour = (t % 24) as f64;
                    let sun = (((hour - 13.0) / 24.0) * 2.0 * PI).cos().max(0.0);
                    let noise = 1.0 + 0.03 * wobble(y * 2000 + p, t, region_idx + 7);
                    cell.push((base * 2.1 * sun * noise).clamp(0.0, 0.95));
                }
            }
        }
        series.insert(("solar_cf".to_string(), region.to_string()), data);
    }
    {
        let mut data = vec![vec![Vec::with_capacity(STEPS); PERIODS]; YEARS.len()];
        for (y, cell_rows) in data.iter_mut().enumerate() {
            for (p, cell) in cell_rows.iter_mut().enumerate() {
                let season = (((p as f64 + 0.5) / PERIODS as f64) * 2.0 * PI).cos();
                let winter_weight = 0.5 * (1.0 + season);
                let base = (2.4 + 2.6 * season).max(0.2);
                let year_amp = 1.0 + (heat_year[y] - 1.0) * winter_weight;
                for t in 0..STEPS {
                    let hour = (t % 24) as f64;
                    let daily = 1.0 + 0.25 * (((hour - 6.0) / 24.0) * 2.0 * PI).cos();
                    let noise = 1.0 + 0.05 * wobble(y * 3000 + p, t, 11);
                    cell.push((base * year_amp * daily * noise).max(0.0));
                }
            }
        }
        series.insert(("heat_demand".to_string(), "north".to_string()), data);
    }

    ClimateSample {
        years: YEARS.to_vec(),
        periods_per_year: PERIODS,
        timesteps_per_period: STEPS,
        metrics,
        series,
    }
}
