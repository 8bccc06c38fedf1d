//! Loading, validation and canonical round-trip of planning instances.

use boreas_core::error::CoreError;
use boreas_core::model::*;
use boreas_core::model_io::{load_system, save_system};
use std::fs;
use std::path::Path;

fn write_mini_system(dir: &Path) {
    fs::create_dir_all(dir).unwrap();
    let manifest = r#"
[grid]
periods_per_year = 2
timesteps_per_period = 4

[[carrier]]
id = "electricity"
resolution = 1

[[carrier]]
id = "heat"
resolution = 2

[[region]]
id = "north"
carriers = ["electricity", "heat"]

[[region]]
id = "south"
carriers = ["electricity"]

[[conversion]]
id = "wind"
regions = ["north", "south"]
outputs = { electricity = 1.0 }
invest_cost = 50.0
profile_metric = "wind_cf"

[[conversion]]
id = "heater"
regions = ["north"]
inputs = { electricity = 1.0 }
outputs = { heat = 0.9 }
invest_cost = 10.0
var_cost = 0.5

[[storage]]
id = "battery"
carrier = "electricity"
regions = ["north"]
class = "short-term"
charge_efficiency = 0.9
discharge_efficiency = 0.9
invest_cost_power = 5.0
invest_cost_energy = 2.0

[[link]]
id = "line"
carrier = "electricity"
from = "north"
to = "south"
loss = 0.05
invest_cost = 3.0
existing = 1.0

[[contract]]
id = "gas_import"
carrier = "electricity"
region = "south"
theta = 0.1
nu_base = 40.0
nu_flex = 48.0

[[demand]]
carrier = "electricity"
region = "north"
series = "demand_electricity_north.csv"

[[demand]]
carrier = "heat"
region = "north"
metric = "heat_demand"

[emission]
cap = 0.0
"#;
    fs::write(dir.join("system.toml"), manifest).unwrap();
    let mut csv = String::from("timestep,value\n");
    for t in 0..8 {
        csv.push_str(&format!("{t},{}\n", 1.0 + t as f64 * 0.5));
    }
    fs::write(dir.join("demand_electricity_north.csv"), csv).unwrap();
}

#[test]
fn load_counts_and_sorted_order() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_system(dir.path());
    let system = load_system(dir.path()).unwrap();
    assert_eq!(system.carriers.len(), 2);
    assert_eq!(system.regions.len(), 2);
    assert_eq!(system.conversions.len(), 2);
    assert_eq!(system.storages.len(), 1);
    assert_eq!(system.links.len(), 1);
    assert_eq!(system.contracts.len(), 1);
    assert_eq!(system.demands.len(), 2);
    // Sorted by id.
    assert!(system.carriers.windows(2).all(|w| w[0].id < w[1].id));
    assert!(system.conversions.windows(2).all(|w| w[0].id < w[1].id));
    // Static series loaded in full.
    match &system.demands[0].source {
        DemandSource::Static(values) => assert_eq!(values.len(), 8),
        other => panic!("expected static demand, got {other:?}"),
    }
    assert_eq!(system.demands[0].unserved_cost, DEFAULT_UNSERVED_COST);
    assert_eq!(validate(&system), Vec::new());
}

#[test]
fn empty_directory_is_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    match load_system(dir.path()) {
        Err(CoreError::MissingFile(path)) => assert!(path.ends_with("system.toml")),
        other => panic!("expected MissingFile, got {other:?}"),
    }
}

#[test]
fn dangling_reference_is_reported_with_id() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_system(dir.path());
    let manifest = fs::read_to_string(dir.path().join("system.toml")).unwrap();
    let broken = manifest.replace(
        "regions = [\"north\", \"south\"]",
        "regions = [\"north\", \"wind_X\"]",
    );
    fs::write(dir.path().join("system.toml"), broken).unwrap();
    match load_system(dir.path()) {
        Err(CoreError::DanglingReference(id, _)) => assert_eq!(id, "wind_X"),
        other => panic!("expected DanglingReference, got {other:?}"),
    }
}

#[test]
fn missing_series_file_is_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_system(dir.path());
    fs::remove_file(dir.path().join("demand_electricity_north.csv")).unwrap();
    assert!(matches!(
        load_system(dir.path()),
        Err(CoreError::MissingFile(_))
    ));
}

#[test]
fn unknown_manifest_keys_are_schema_violations() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_system(dir.path());
    let manifest = fs::read_to_string(dir.path().join("system.toml")).unwrap();
    fs::write(
        dir.path().join("system.toml"),
        manifest + "\n[typo_section]\nfoo = 1\n",
    )
    .unwrap();
    assert!(matches!(
        load_system(dir.path()),
        Err(CoreError::SchemaViolation { .. })
    ));
}

#[test]
fn roundtrip_is_identity_on_canonical_form() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_system(dir.path());
    let system = load_system(dir.path()).unwrap();

    let out1 = tempfile::tempdir().unwrap();
    save_system(&system, out1.path()).unwrap();
    let reloaded = load_system(out1.path()).unwrap();
    assert_eq!(system, reloaded);

    // Canonical form is a fixed point: saving again yields identical bytes.
    let out2 = tempfile::tempdir().unwrap();
    save_system(&reloaded, out2.path()).unwrap();
    let a = fs::read_to_string(out1.path().join("system.toml")).unwrap();
    let b = fs::read_to_string(out2.path().join("system.toml")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn validation_flags_efficiency_and_price_inversion() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_system(dir.path());
    let system = load_system(dir.path()).unwrap();

    let mut bad = system.clone();
    bad.storages[0].charge_efficiency = 1.2;
    let violations = validate(&bad);
    assert!(
        violations.iter().any(|v| v.rule == "EfficiencyOutOfRange"),
        "{violations:?}"
    );

    let mut bad = system.clone();
    bad.contracts[0].nu_flex = bad.contracts[0].nu_base - 1.0;
    let violations = validate(&bad);
    assert!(
        violations.iter().any(|v| v.rule == "ContractPriceInversion"),
        "{violations:?}"
    );

    let mut bad = system.clone();
    bad.storages[0].multi_year = true;
    assert!(validate(&bad).iter().any(|v| v.rule == "ShortTermMultiYear"));

    let mut bad = system;
    bad.links[0].loss = 1.0;
    assert!(validate(&bad).iter().any(|v| v.rule == "LossOutOfRange"));
}

#[test]
fn validate_is_order_stable() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_system(dir.path());
    let mut system = load_system(dir.path()).unwrap();
    system.storages[0].charge_efficiency = 1.5;
    system.contracts[0].nu_flex = 0.0;
    system.links[0].loss = -0.1;
    let a = validate(&system);
    let b = validate(&system);
    assert_eq!(a, b);
    assert!(a.len() >= 3);
}

#[test]
fn no_supply_path_is_flagged() {
    let dir = tempfile::tempdir().unwrap();
    write_mini_system(dir.path());
    let mut system = load_system(dir.path()).unwrap();
    // Remove the heat producer; heat demand keeps only unserved energy.
    system.conversions.retain(|t| t.id != "heater");
    let violations = validate(&system);
    assert!(violations.iter().any(|v| v.rule == "NoSupplyPath"), "{violations:?}");
}
