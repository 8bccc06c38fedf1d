//! Loading and canonical re-serialization of planning instances.
//!
//! A system directory holds one `system.toml` manifest plus one CSV per
//! static time series (`timestep,value`, zero-based timesteps, UTF-8, LF).
//! Loading sorts every entity list by id, so `load . save . load` is the
//! identity on the canonical form.

use crate::error::CoreError;
use crate::model::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const MANIFEST_NAME: &str = "system.toml";

fn default_unit() -> String {
    "MWh".to_string()
}
fn default_unserved() -> f64 {
    DEFAULT_UNSERVED_COST
}
fn default_eta() -> f64 {
    0.999
}
fn default_inf() -> f64 {
    f64::INFINITY
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    grid: TimeGrid,
    #[serde(default, rename = "carrier")]
    carriers: Vec<CarrierRec>,
    #[serde(default, rename = "region")]
    regions: Vec<RegionRec>,
    #[serde(default, rename = "conversion")]
    conversions: Vec<ConversionRec>,
    #[serde(default, rename = "storage")]
    storages: Vec<StorageRec>,
    #[serde(default, rename = "link")]
    links: Vec<LinkRec>,
    #[serde(default, rename = "contract")]
    contracts: Vec<ContractRec>,
    #[serde(default, rename = "demand")]
    demands: Vec<DemandRec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    emission: Option<EmissionPolicy>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CarrierRec {
    id: String,
    resolution: usize,
    #[serde(default = "default_unit")]
    unit: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RegionRec {
    id: String,
    carriers: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConversionRec {
    id: String,
    regions: Vec<String>,
    #[serde(default)]
    inputs: BTreeMap<String, f64>,
    #[serde(default)]
    outputs: BTreeMap<String, f64>,
    invest_cost: f64,
    #[serde(default)]
    var_cost: f64,
    #[serde(default)]
    capacity_min: f64,
    #[serde(default = "default_inf")]
    capacity_max: f64,
    #[serde(default)]
    emission_factors: BTreeMap<String, f64>,
    #[serde(default)]
    must_run: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    profile_metric: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StorageRec {
    id: String,
    carrier: String,
    regions: Vec<String>,
    class: StorageClass,
    charge_efficiency: f64,
    discharge_efficiency: f64,
    invest_cost_power: f64,
    invest_cost_energy: f64,
    #[serde(default)]
    multi_year: bool,
    #[serde(default = "default_eta")]
    eta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    inflow_metric: Option<String>,
    #[serde(default)]
    power_min: f64,
    #[serde(default = "default_inf")]
    power_max: f64,
    #[serde(default)]
    energy_min: f64,
    #[serde(default = "default_inf")]
    energy_max: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkRec {
    id: String,
    carrier: String,
    from: String,
    to: String,
    #[serde(default)]
    loss: f64,
    #[serde(default)]
    invest_cost: f64,
    #[serde(default)]
    var_cost: f64,
    #[serde(default)]
    existing: f64,
    #[serde(default)]
    capacity_min: f64,
    #[serde(default = "default_inf")]
    capacity_max: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContractRec {
    id: String,
    carrier: String,
    region: String,
    theta: f64,
    nu_base: f64,
    nu_flex: f64,
    #[serde(default)]
    emission_factor: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DemandRec {
    carrier: String,
    region: String,
    #[serde(default = "default_unserved")]
    unserved_cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    series: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    metric: Option<String>,
}

/// Read one `timestep,value` CSV with dense zero-based timesteps.
pub fn read_series_csv(path: &Path) -> Result<Vec<f64>, CoreError> {
    let text = fs::read_to_string(path)
        .map_err(|_| CoreError::MissingFile(path.display().to_string()))?;
    parse_series_csv(&text, &path.display().to_string())
}

/// Parse the body of a series CSV; exposed for fuzzing.
pub fn parse_series_csv(text: &str, name: &str) -> Result<Vec<f64>, CoreError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = rdr
        .headers()
        .map_err(|e| CoreError::schema(name, format!("bad header: {e}")))?;
    if headers.iter().collect::<Vec<_>>() != ["timestep", "value"] {
        return Err(CoreError::schema(name, "header must be `timestep,value`"));
    }
    let mut values = Vec::new();
    for (lineno, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| CoreError::schema(name, format!("line {}: {e}", lineno + 2)))?;
        if record.len() != 2 {
            return Err(CoreError::schema(name, format!("line {}: need 2 fields", lineno + 2)));
        }
        let t: usize = record[0]
            .trim()
            .parse()
            .map_err(|_| CoreError::schema(name, format!("line {}: bad timestep", lineno + 2)))?;
        if t != values.len() {
            return Err(CoreError::schema(
                name,
                format!("line {}: timesteps must be dense from 0, found {t}", lineno + 2),
            ));
        }
        let v: f64 = record[1]
            .trim()
            .parse()
            .map_err(|_| CoreError::schema(name, format!("line {}: bad value", lineno + 2)))?;
        if !v.is_finite() {
            return Err(CoreError::schema(name, format!("line {}: non-finite value", lineno + 2)));
        }
        values.push(v);
    }
    Ok(values)
}

pub fn write_series_csv(path: &Path, values: &[f64]) -> Result<(), CoreError> {
    let mut text = String::from("timestep,value\n");
    for (t, v) in values.iter().enumerate() {
        text.push_str(&format!("{t},{v}\n"));
    }
    fs::write(path, text).map_err(|e| CoreError::io(path.display().to_string(), e))
}

/// Parse a manifest from TOML text; exposed for fuzzing.
pub fn parse_manifest(text: &str) -> Result<EnergySystem, CoreError> {
    let manifest: Manifest =
        toml::from_str(text).map_err(|e| CoreError::schema(MANIFEST_NAME, e.to_string()))?;
    assemble(manifest, None)
}

/// Load a fully cross-referenced system from a directory.
pub fn load_system(dir: &Path) -> Result<EnergySystem, CoreError> {
    let manifest_path = dir.join(MANIFEST_NAME);
    let text = fs::read_to_string(&manifest_path)
        .map_err(|_| CoreError::MissingFile(manifest_path.display().to_string()))?;
    let manifest: Manifest =
        toml::from_str(&text).map_err(|e| CoreError::schema(MANIFEST_NAME, e.to_string()))?;
    assemble(manifest, Some(dir))
}

fn assemble(mut manifest: Manifest, dir: Option<&Path>) -> Result<EnergySystem, CoreError> {
    manifest.carriers.sort_by(|a, b| a.id.cmp(&b.id));
    manifest.regions.sort_by(|a, b| a.id.cmp(&b.id));
    manifest.conversions.sort_by(|a, b| a.id.cmp(&b.id));
    manifest.storages.sort_by(|a, b| a.id.cmp(&b.id));
    manifest.links.sort_by(|a, b| a.id.cmp(&b.id));
    manifest.contracts.sort_by(|a, b| a.id.cmp(&b.id));
    manifest
        .demands
        .sort_by(|a, b| (&a.carrier, &a.region).cmp(&(&b.carrier, &b.region)));

    check_unique("carrier", manifest.carriers.iter().map(|c| &c.id))?;
    check_unique("region", manifest.regions.iter().map(|r| &r.id))?;
    check_unique("conversion", manifest.conversions.iter().map(|c| &c.id))?;
    check_unique("storage", manifest.storages.iter().map(|s| &s.id))?;
    check_unique("link", manifest.links.iter().map(|l| &l.id))?;
    check_unique("contract", manifest.contracts.iter().map(|c| &c.id))?;
    let demand_keys: Vec<String> = manifest
        .demands
        .iter()
        .map(|d| format!("{}/{}", d.carrier, d.region))
        .collect();
    check_unique("demand", demand_keys.iter())?;

    let carrier_ids: Vec<&String> = manifest.carriers.iter().map(|c| &c.id).collect();
    let region_ids: Vec<&String> = manifest.regions.iter().map(|r| &r.id).collect();
    let require_carrier = |id: &String, from: &str| -> Result<(), CoreError> {
        if carrier_ids.contains(&id) {
            Ok(())
        } else {
            Err(CoreError::DanglingReference(id.clone(), from.to_string()))
        }
    };
    let require_region = |id: &String, from: &str| -> Result<(), CoreError> {
        if region_ids.contains(&id) {
            Ok(())
        } else {
            Err(CoreError::DanglingReference(id.clone(), from.to_string()))
        }
    };

    for r in &manifest.regions {
        for c in &r.carriers {
            require_carrier(c, &format!("region {}", r.id))?;
        }
    }
    for t in &manifest.conversions {
        for r in &t.regions {
            require_region(r, &format!("conversion {}", t.id))?;
        }
        for c in t.inputs.keys().chain(t.outputs.keys()).chain(t.emission_factors.keys()) {
            require_carrier(c, &format!("conversion {}", t.id))?;
        }
    }
    for s in &manifest.storages {
        require_carrier(&s.carrier, &format!("storage {}", s.id))?;
        for r in &s.regions {
            require_region(r, &format!("storage {}", s.id))?;
        }
    }
    for l in &manifest.links {
        require_carrier(&l.carrier, &format!("link {}", l.id))?;
        require_region(&l.from, &format!("link {}", l.id))?;
        require_region(&l.to, &format!("link {}", l.id))?;
    }
    for c in &manifest.contracts {
        require_carrier(&c.carrier, &format!("contract {}", c.id))?;
        require_region(&c.region, &format!("contract {}", c.id))?;
    }
    for d in &manifest.demands {
        require_carrier(&d.carrier, &format!("demand {}/{}", d.carrier, d.region))?;
        require_region(&d.region, &format!("demand {}/{}", d.carrier, d.region))?;
    }

    let demands = manifest
        .demands
        .iter()
        .map(|d| {
            let entity = format!("demand {}/{}", d.carrier, d.region);
            let source = match (&d.series, &d.metric) {
                (Some(file), None) => {
                    let dir = dir.ok_or_else(|| {
                        CoreError::schema(&entity, "static series need a system directory")
                    })?;
                    DemandSource::Static(read_series_csv(&dir.join(file))?)
                }
                (None, Some(metric)) => DemandSource::Metric(metric.clone()),
                _ => {
                    return Err(CoreError::schema(
                        &entity,
                        "exactly one of `series` or `metric` must be set",
                    ))
                }
            };
            Ok(DemandSeries {
                carrier: d.carrier.clone(),
                region: d.region.clone(),
                unserved_cost: d.unserved_cost,
                source,
            })
        })
        .collect::<Result<Vec<_>, CoreError>>()?;

    Ok(EnergySystem {
        grid: manifest.grid,
        carriers: manifest
            .carriers
            .into_iter()
            .map(|c| Carrier {
                id: c.id,
                resolution: c.resolution,
                unit: c.unit,
            })
            .collect(),
        regions: manifest
            .regions
            .into_iter()
            .map(|r| {
                let mut carriers = r.carriers;
                carriers.sort();
                carriers.dedup();
                Region { id: r.id, carriers }
            })
            .collect(),
        conversions: manifest
            .conversions
            .into_iter()
            .map(|t| {
                let mut regions = t.regions;
                regions.sort();
                regions.dedup();
                ConversionTech {
                    id: t.id,
                    regions,
                    inputs: t.inputs,
                    outputs: t.outputs,
                    invest_cost: t.invest_cost,
                    var_cost: t.var_cost,
                    capacity_min: t.capacity_min,
                    capacity_max: t.capacity_max,
                    emission_factors: t.emission_factors,
                    must_run: t.must_run,
                    profile_metric: t.profile_metric,
                }
            })
            .collect(),
        storages: manifest
            .storages
            .into_iter()
            .map(|s| {
                let mut regions = s.regions;
                regions.sort();
                regions.dedup();
                StorageTech {
                    id: s.id,
                    carrier: s.carrier,
                    regions,
                    class: s.class,
                    charge_efficiency: s.charge_efficiency,
                    discharge_efficiency: s.discharge_efficiency,
                    invest_cost_power: s.invest_cost_power,
                    invest_cost_energy: s.invest_cost_energy,
                    multi_year: s.multi_year,
                    eta: s.eta,
                    inflow_metric: s.inflow_metric,
                    power_min: s.power_min,
                    power_max: s.power_max,
                    energy_min: s.energy_min,
                    energy_max: s.energy_max,
                }
            })
            .collect(),
        links: manifest
            .links
            .into_iter()
            .map(|l| ExchangeLink {
                id: l.id,
                carrier: l.carrier,
                from: l.from,
                to: l.to,
                loss: l.loss,
                invest_cost: l.invest_cost,
                var_cost: l.var_cost,
                existing: l.existing,
                capacity_min: l.capacity_min,
                capacity_max: l.capacity_max,
            })
            .collect(),
        contracts: manifest
            .contracts
            .into_iter()
            .map(|c| ImportContract {
                id: c.id,
                carrier: c.carrier,
                region: c.region,
                theta: c.theta,
                nu_base: c.nu_base,
                nu_flex: c.nu_flex,
                emission_factor: c.emission_factor,
            })
            .collect(),
        demands,
        emission_policy: manifest.emission,
    })
}

fn check_unique<'a>(
    kind: &str,
    ids: impl Iterator<Item = &'a String>,
) -> Result<(), CoreError> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(CoreError::schema(
                format!("{kind} {id}"),
                "duplicate id".to_string(),
            ));
        }
    }
    Ok(())
}

/// Write the canonical form of `system` into `dir`: a sorted manifest and
/// one CSV per static demand series.
pub fn save_system(system: &EnergySystem, dir: &Path) -> Result<(), CoreError> {
    fs::create_dir_all(dir).map_err(|e| CoreError::io(dir.display().to_string(), e))?;
    let manifest = Manifest {
        grid: system.grid,
        carriers: system
            .carriers
            .iter()
            .map(|c| CarrierRec {
                id: c.id.clone(),
                resolution: c.resolution,
                unit: c.unit.clone(),
            })
            .collect(),
        regions: system
            .regions
            .iter()
            .map(|r| RegionRec {
                id: r.id.clone(),
                carriers: r.carriers.clone(),
            })
            .collect(),
        conversions: system
            .conversions
            .iter()
            .map(|t| ConversionRec {
                id: t.id.clone(),
                regions: t.regions.clone(),
                inputs: t.inputs.clone(),
                outputs: t.outputs.clone(),
                invest_cost: t.invest_cost,
                var_cost: t.var_cost,
                capacity_min: t.capacity_min,
                capacity_max: t.capacity_max,
                emission_factors: t.emission_factors.clone(),
                must_run: t.must_run,
                profile_metric: t.profile_metric.clone(),
            })
            .collect(),
        storages: system
            .storages
            .iter()
            .map(|s| StorageRec {
                id: s.id.clone(),
                carrier: s.carrier.clone(),
                regions: s.regions.clone(),
                class: s.class,
                charge_efficiency: s.charge_efficiency,
                discharge_efficiency: s.discharge_efficiency,
                invest_cost_power: s.invest_cost_power,
                invest_cost_energy: s.invest_cost_energy,
                multi_year: s.multi_year,
                eta: s.eta,
                inflow_metric: s.inflow_metric.clone(),
                power_min: s.power_min,
                power_max: s.power_max,
                energy_min: s.energy_min,
                energy_max: s.energy_max,
            })
            .collect(),
        links: system
            .links
            .iter()
            .map(|l| LinkRec {
                id: l.id.clone(),
                carrier: l.carrier.clone(),
                from: l.from.clone(),
                to: l.to.clone(),
                loss: l.loss,
                invest_cost: l.invest_cost,
                var_cost: l.var_cost,
                existing: l.existing,
                capacity_min: l.capacity_min,
                capacity_max: l.capacity_max,
            })
            .collect(),
        contracts: system
            .contracts
            .iter()
            .map(|c| ContractRec {
                id: c.id.clone(),
                carrier: c.carrier.clone(),
                region: c.region.clone(),
                theta: c.theta,
                nu_base: c.nu_base,
                nu_flex: c.nu_flex,
                emission_factor: c.emission_factor,
            })
            .collect(),
        demands: system
            .demands
            .iter()
            .map(|d| DemandRec {
                carrier: d.carrier.clone(),
                region: d.region.clone(),
                unserved_cost: d.unserved_cost,
                series: match &d.source {
                    DemandSource::Static(_) => Some(demand_file_name(d)),
                    DemandSource::Metric(_) => None,
                },
                metric: match &d.source {
                    DemandSource::Static(_) => None,
                    DemandSource::Metric(m) => Some(m.clone()),
                },
            })
            .collect(),
        emission: system.emission_policy,
    };
    let text = toml::to_string_pretty(&manifest)
        .map_err(|e| CoreError::schema(MANIFEST_NAME, e.to_string()))?;
    fs::write(dir.join(MANIFEST_NAME), text)
        .map_err(|e| CoreError::io(MANIFEST_NAME.to_string(), e))?;
    for d in &system.demands {
        if let DemandSource::Static(values) = &d.source {
            write_series_csv(&dir.join(demand_file_name(d)), values)?;
        }
    }
    Ok(())
}

fn demand_file_name(d: &DemandSeries) -> String {
    format!("demand_{}_{}.csv", d.carrier, d.region)
}
