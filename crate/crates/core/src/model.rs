//! Domain types for the planning instance and their validation rules.
//!
//! An [`EnergySystem`] is immutable after loading and safe to share across
//! threads. All entity lists are sorted by id, so two systems loaded from
//! the same canonical files compare equal.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Planning horizon: one year split into `periods_per_year` stochastically
/// independent periods of `timesteps_per_period` base timesteps (hours).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub periods_per_year: usize,
    pub timesteps_per_period: usize,
}

impl TimeGrid {
    /// Hours in a full year at desk scale.
    pub fn hours_per_year(&self) -> f64 {
        (self.periods_per_year * self.timesteps_per_period) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Carrier {
    pub id: String,
    /// Aggregation factor: base timesteps per carrier timestep.
    pub resolution: usize,
    pub unit: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub id: String,
    /// Carriers that balance at this region.
    pub carriers: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConversionTech {
    pub id: String,
    pub regions: Vec<String>,
    /// Carrier consumed per unit of activity (MWh per MWh).
    pub inputs: BTreeMap<String, f64>,
    /// Carrier produced per unit of activity.
    pub outputs: BTreeMap<String, f64>,
    /// EUR per MW and year.
    pub invest_cost: f64,
    /// EUR per MWh of activity.
    pub var_cost: f64,
    pub capacity_min: f64,
    pub capacity_max: f64,
    /// t CO2 per MWh of each carrier consumed; negative for capture.
    pub emission_factors: BTreeMap<String, f64>,
    /// Generation follows the demand profile of its output carrier.
    pub must_run: bool,
    /// Climate metric providing the per-timestep availability factor.
    pub profile_metric: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageClass {
    ShortTerm,
    LongTerm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageTech {
    pub id: String,
    pub carrier: String,
    pub regions: Vec<String>,
    pub class: StorageClass,
    pub charge_efficiency: f64,
    pub discharge_efficiency: f64,
    /// EUR per MW and year, applied to charge and discharge power each.
    pub invest_cost_power: f64,
    /// EUR per MWh and year on the total energy capacity.
    pub invest_cost_energy: f64,
    /// Whether the storage may carry a multi-year component.
    pub multi_year: bool,
    /// Loss correction applied when energy moves into the multi-year
    /// account.
    pub eta: f64,
    /// Climate metric with exogenous inflows (MWh per base timestep).
    pub inflow_metric: Option<String>,
    pub power_min: f64,
    pub power_max: f64,
    pub energy_min: f64,
    pub energy_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExchangeLink {
    pub id: String,
    pub carrier: String,
    pub from: String,
    pub to: String,
    /// Fraction of the flow lost in transit.
    pub loss: f64,
    pub invest_cost: f64,
    /// EUR per MWh transported.
    pub var_cost: f64,
    /// Capacity available without investment (MW).
    pub existing: f64,
    pub capacity_min: f64,
    pub capacity_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportContract {
    pub id: String,
    pub carrier: String,
    pub region: String,
    /// Maximum flexible imports relative to the baseline.
    pub theta: f64,
    /// Marginal price of baseline imports, EUR per MWh.
    pub nu_base: f64,
    /// Marginal price of flexible imports, EUR per MWh.
    pub nu_flex: f64,
    /// Net t CO2 per MWh imported.
    pub emission_factor: f64,
}

pub const DEFAULT_UNSERVED_COST: f64 = 13_000.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandSeries {
    pub carrier: String,
    pub region: String,
    /// EUR per MWh of unmet demand.
    pub unserved_cost: f64,
    pub source: DemandSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DemandSource {
    /// Fixed per-base-timestep demand for one year, identical every year.
    Static(Vec<f64>),
    /// Climate-driven demand taken from a sample metric.
    Metric(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmissionPolicy {
    /// Expected net emissions per year, t CO2.
    pub cap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergySystem {
    pub grid: TimeGrid,
    pub carriers: Vec<Carrier>,
    pub regions: Vec<Region>,
    pub conversions: Vec<ConversionTech>,
    pub storages: Vec<StorageTech>,
    pub links: Vec<ExchangeLink>,
    pub contracts: Vec<ImportContract>,
    pub demands: Vec<DemandSeries>,
    pub emission_policy: Option<EmissionPolicy>,
}

impl EnergySystem {
    pub fn carrier(&self, id: &str) -> Option<&Carrier> {
        self.carriers.iter().find(|c| c.id == id)
    }

    pub fn region(&self, id: &str) -> Option<&Region> {
        self.regions.iter().find(|r| r.id == id)
    }

    /// Carrier timesteps per period.
    pub fn steps_per_period(&self, carrier: &Carrier) -> usize {
        self.grid.timesteps_per_period / carrier.resolution
    }

    /// `(carrier, region)` pairs that balance, in deterministic order.
    pub fn balances(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for region in &self.regions {
            for carrier in &region.carriers {
                out.push((carrier.clone(), region.id.clone()));
            }
        }
        out.sort();
        out
    }

    pub fn demand_for(&self, carrier: &str, region: &str) -> Option<&DemandSeries> {
        self.demands
            .iter()
            .find(|d| d.carrier == carrier && d.region == region)
    }
}

/// A broken validation rule; data, not an error.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub entity: String,
    pub rule: String,
    pub detail: String,
}

impl Violation {
    fn new(entity: impl Into<String>, rule: &str, detail: impl Into<String>) -> Violation {
        Violation {
            entity: entity.into(),
            rule: rule.to_string(),
            detail: detail.into(),
        }
    }
}

/// Check every type invariant; the list is empty iff the system is sound.
/// Pure and order-stable: the same input yields the same list.
pub fn validate(system: &EnergySystem) -> Vec<Violation> {
    let mut out = Vec::new();
    let t = system.grid.timesteps_per_period;
    if system.grid.periods_per_year == 0 || t == 0 {
        out.push(Violation::new("grid", "EmptyGrid", "periods and timesteps must be positive"));
    }

    for c in &system.carriers {
        if c.resolution == 0 || t % c.resolution != 0 {
            out.push(Violation::new(
                &c.id,
                "ResolutionMismatch",
                format!("resolution {} does not divide {}", c.resolution, t),
            ));
        }
    }

    let carrier_ids: BTreeSet<&str> = system.carriers.iter().map(|c| c.id.as_str()).collect();
    let balances: BTreeSet<(&str, &str)> = system
        .regions
        .iter()
        .flat_map(|r| r.carriers.iter().map(move |c| (c.as_str(), r.id.as_str())))
        .collect();
    let check_balanced = |entity: &str, carrier: &str, region: &str, out: &mut Vec<Violation>| {
        if !balances.contains(&(carrier, region)) {
            out.push(Violation::new(
                entity,
                "CarrierNotBalancedAtRegion",
                format!("carrier {carrier:?} does not balance in region {region:?}"),
            ));
        }
    };
    let _ = carrier_ids;

    for tech in &system.conversions {
        let any_nonzero = tech
            .inputs
            .values()
            .chain(tech.outputs.values())
            .any(|&v| v != 0.0);
        if !any_nonzero {
            out.push(Violation::new(&tech.id, "NoConversionCoefficient", "all coefficients zero"));
        }
        if tech.invest_cost < 0.0 || tech.var_cost < 0.0 {
            out.push(Violation::new(&tech.id, "NegativeCost", "costs must be nonnegative"));
        }
        if tech.capacity_min > tech.capacity_max {
            out.push(Violation::new(
                &tech.id,
                "CapacityBoundsInverted",
                format!("min {} > max {}", tech.capacity_min, tech.capacity_max),
            ));
        }
        if tech.must_run && tech.outputs.len() != 1 {
            out.push(Violation::new(
                &tech.id,
                "MustRunNeedsSingleOutput",
                "must-run generation follows the demand profile of exactly one output carrier",
            ));
        }
        // The finest touched resolution must nest inside every other
        // touched resolution so that operating steps align with balances.
        let touched: Vec<usize> = tech
            .inputs
            .keys()
            .chain(tech.outputs.keys())
            .filter_map(|c| system.carrier(c))
            .map(|c| c.resolution)
            .collect();
        if let Some(&finest) = touched.iter().min() {
            if finest > 0 {
                for &r in &touched {
                    if r % finest != 0 {
                        out.push(Violation::new(
                            &tech.id,
                            "ResolutionNotNested",
                            format!("resolution {r} is not a multiple of {finest}"),
                        ));
                    }
                }
            }
        }
        for region in &tech.regions {
            for carrier in tech.inputs.keys().chain(tech.outputs.keys()) {
                check_balanced(&tech.id, carrier, region, &mut out);
            }
        }
    }

    for s in &system.storages {
        for (label, eff) in [("charge", s.charge_efficiency), ("discharge", s.discharge_efficiency)] {
            if !(eff > 0.0 && eff <= 1.0) {
                out.push(Violation::new(
                    &s.id,
                    "EfficiencyOutOfRange",
                    format!("{label} efficiency {eff} outside (0, 1]"),
                ));
            }
        }
        if !(s.eta > 0.0 && s.eta <= 1.0) {
            out.push(Violation::new(
                &s.id,
                "EtaOutOfRange",
                format!("eta {} outside (0, 1]", s.eta),
            ));
        }
        if s.class == StorageClass::ShortTerm && s.multi_year {
            out.push(Violation::new(
                &s.id,
                "ShortTermMultiYear",
                "short-term storages never carry a multi-year component",
            ));
        }
        if s.invest_cost_power < 0.0 || s.invest_cost_energy < 0.0 {
            out.push(Violation::new(&s.id, "NegativeCost", "costs must be nonnegative"));
        }
        if s.power_min > s.power_max || s.energy_min > s.energy_max {
            out.push(Violation::new(&s.id, "CapacityBoundsInverted", "min above max"));
        }
        for region in &s.regions {
            check_balanced(&s.id, &s.carrier, region, &mut out);
        }
    }

    for l in &system.links {
        if l.from == l.to {
            out.push(Violation::new(&l.id, "SelfLink", "from equals to"));
        }
        if !(0.0..1.0).contains(&l.loss) {
            out.push(Violation::new(
                &l.id,
                "LossOutOfRange",
                format!("loss {} outside [0, 1)", l.loss),
            ));
        }
        if l.invest_cost < 0.0 || l.var_cost < 0.0 {
            out.push(Violation::new(&l.id, "NegativeCost", "costs must be nonnegative"));
        }
        if l.capacity_min > l.capacity_max {
            out.push(Violation::new(&l.id, "CapacityBoundsInverted", "min above max"));
        }
        check_balanced(&l.id, &l.carrier, &l.from, &mut out);
        check_balanced(&l.id, &l.carrier, &l.to, &mut out);
    }

    for c in &system.contracts {
        if c.theta < 0.0 {
            out.push(Violation::new(&c.id, "NegativeTheta", format!("theta {}", c.theta)));
        }
        if c.nu_flex < c.nu_base {
            out.push(Violation::new(
                &c.id,
                "ContractPriceInversion",
                format!("nu_flex {} below nu_base {}", c.nu_flex, c.nu_base),
            ));
        }
        check_balanced(&c.id, &c.carrier, &c.region, &mut out);
    }

    let year_len = system.grid.periods_per_year * t;
    for d in &system.demands {
        let entity = format!("demand {}/{}", d.carrier, d.region);
        if d.unserved_cost < 0.0 || !d.unserved_cost.is_finite() {
            out.push(Violation::new(&entity, "UnservedCostOutOfRange", format!("{}", d.unserved_cost)));
        }
        if let DemandSource::Static(values) = &d.source {
            if values.len() != year_len {
                out.push(Violation::new(
                    &entity,
                    "SeriesLengthMismatch",
                    format!("expected {year_len} values, found {}", values.len()),
                ));
            }
            if values.iter().any(|v| *v < 0.0 || !v.is_finite()) {
                out.push(Violation::new(&entity, "NegativeDemand", "demand must be nonnegative"));
            }
        }
        check_balanced(&entity, &d.carrier, &d.region, &mut out);

        // A demand needs some supply path besides priced unserved energy.
        let has_path = system
            .conversions
            .iter()
            .any(|tech| tech.outputs.contains_key(&d.carrier) && tech.regions.contains(&d.region))
            || system
                .storages
                .iter()
                .any(|s| s.carrier == d.carrier && s.regions.contains(&d.region))
            || system
                .links
                .iter()
                .any(|l| l.carrier == d.carrier && (l.to == d.region || l.from == d.region))
            || system
                .contracts
                .iter()
                .any(|c| c.carrier == d.carrier && c.region == d.region);
        if !has_path {
            out.push(Violation::new(
                &entity,
                "NoSupplyPath",
                "only unserved energy can meet this demand",
            ));
        }
    }

    if let Some(policy) = &system.emission_policy {
        if !policy.cap.is_finite() {
            out.push(Violation::new("emission", "CapNotFinite", format!("{}", policy.cap)));
        }
    }

    out
}
