//! Extensive-form LP construction for deterministic and period-scenario
//! stochastic planning, with the robust seasonal/multi-year storage split
//! and fuel supply contracts.

mod build;
mod extract;

pub use build::{build_deterministic, build_program, build_stochastic, BuildFlags};
pub use extract::{extract_solution, BlockOperation, CostBreakdown, PlanSolution, StoragePlan};

use crate::climate::ClimateSample;
use crate::cluster::RepresentativeSet;
use crate::error::CoreError;
use crate::model::EnergySystem;
use boreas_lp::SparseLp;
use num_bigint::BigUint;
use std::collections::BTreeMap;

/// Decision variable identity. First-stage keys carry no period/scenario
/// coordinates; second-stage keys do.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum VarKey {
    // First stage.
    ConvCap { tech: String, region: String },
    StorePowerIn { store: String, region: String },
    StorePowerOut { store: String, region: String },
    /// Energy capacity of the seasonal component.
    StoreSizeSeason { store: String, region: String },
    /// Energy capacity of the multi-year component.
    StoreSizeMulti { store: String, region: String },
    /// Total energy capacity.
    StoreSizeTotal { store: String, region: String },
    /// Explicit level at the start of a period; period 0 is the seasonal
    /// starting level.
    StoreBoundary { store: String, region: String, period: usize },
    /// Starting level of the multi-year account.
    StoreStartMulti { store: String, region: String },
    /// Total starting level (seasonal plus multi-year).
    StoreStartTotal { store: String, region: String },
    /// Free capacity above the starting level of the multi-year account.
    StoreLeeway { store: String, region: String },
    StoreDeltaSeason { store: String, region: String, period: usize },
    StoreDeltaMulti { store: String, region: String, period: usize, scen: usize },
    StoreWorst { store: String, region: String, period: usize },
    StoreBest { store: String, region: String, period: usize },
    LinkCap { link: String },
    /// Contracted baseline import rate (MW).
    ContractBase { contract: String },
    /// First-stage take-or-pay cost of a contract.
    ContractBaseCost { contract: String },
    /// Emission allowance of one period-scenario.
    Emission { period: usize, scen: usize },
    // Second stage.
    Activity { tech: String, region: String, period: usize, scen: usize, step: usize },
    StoreChargeBal { store: String, region: String, period: usize, scen: usize, step: usize },
    StoreDischargeBal { store: String, region: String, period: usize, scen: usize, step: usize },
    /// Transfer from the multi-year account into the explicit level.
    StoreFromMulti { store: String, region: String, period: usize, scen: usize, step: usize },
    /// Transfer from the explicit level into the multi-year account.
    StoreToMulti { store: String, region: String, period: usize, scen: usize, step: usize },
    StoreLevel { store: String, region: String, period: usize, scen: usize, step: usize },
    StoreSpill { store: String, region: String, period: usize, scen: usize, step: usize },
    LinkFlowFwd { link: String, period: usize, scen: usize, step: usize },
    LinkFlowRev { link: String, period: usize, scen: usize, step: usize },
    ImportBase { contract: String, period: usize, scen: usize },
    ImportFlex { contract: String, period: usize, scen: usize },
    Unserved { carrier: String, region: String, period: usize, scen: usize, step: usize },
}

impl VarKey {
    /// Period-scenario block of a second-stage key.
    pub fn block(&self) -> Option<(usize, usize)> {
        use VarKey::*;
        match self {
            Activity { period, scen, .. }
            | StoreChargeBal { period, scen, .. }
            | StoreDischargeBal { period, scen, .. }
            | StoreFromMulti { period, scen, .. }
            | StoreToMulti { period, scen, .. }
            | StoreLevel { period, scen, .. }
            | StoreSpill { period, scen, .. }
            | LinkFlowFwd { period, scen, .. }
            | LinkFlowRev { period, scen, .. }
            | ImportBase { period, scen, .. }
            | ImportFlex { period, scen, .. }
            | Unserved { period, scen, .. } => Some((*period, *scen)),
            _ => None,
        }
    }

    pub fn is_first_stage(&self) -> bool {
        self.block().is_none()
    }
}

/// Stable bijection between variable identities and LP columns.
#[derive(Debug, Default, Clone)]
pub struct DecisionIndex {
    keys: Vec<VarKey>,
    by_key: BTreeMap<VarKey, usize>,
}

impl DecisionIndex {
    pub fn insert(&mut self, key: VarKey, col: usize) {
        assert_eq!(col, self.keys.len(), "columns must be added in order");
        let prev = self.by_key.insert(key.clone(), col);
        assert!(prev.is_none(), "duplicate variable key {key:?}");
        self.keys.push(key);
    }

    pub fn col(&self, key: &VarKey) -> Option<usize> {
        self.by_key.get(key).copied()
    }

    pub fn key(&self, col: usize) -> &VarKey {
        &self.keys[col]
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &VarKey)> {
        self.keys.iter().enumerate().map(|(i, k)| (i, k))
    }
}

/// Constraint provenance: the governing equation family plus a readable
/// locator.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RowTag {
    pub equation: &'static str,
    pub detail: String,
}

impl RowTag {
    pub fn new(equation: &'static str, detail: impl Into<String>) -> RowTag {
        RowTag {
            equation,
            detail: detail.into(),
        }
    }
}

/// One operational scenario of one period.
#[derive(Debug, Clone)]
pub struct ScenarioCell {
    pub label: String,
    pub probability: f64,
    pub extreme: bool,
    /// `(metric, region)` series for this period at base resolution.
    pub series: BTreeMap<(String, String), Vec<f64>>,
}

/// Scenario data per period, the operational input of the builder.
#[derive(Debug, Clone)]
pub struct ScenarioGrid {
    pub periods: Vec<Vec<ScenarioCell>>,
}

impl ScenarioGrid {
    pub fn scenario_counts(&self) -> Vec<usize> {
        self.periods.iter().map(|p| p.len()).collect()
    }

    pub fn combination_count(&self) -> BigUint {
        crate::cluster::count_combinations(&self.scenario_counts())
    }

    /// Degenerate single-scenario grid from one sampled year.
    pub fn deterministic(sample: &ClimateSample, year_idx: usize) -> ScenarioGrid {
        let periods = (0..sample.periods_per_year)
            .map(|p| {
                vec![ScenarioCell {
                    label: format!("y{}", sample.years[year_idx]),
                    probability: 1.0,
                    extreme: false,
                    series: sample
                        .series
                        .iter()
                        .map(|(key, data)| (key.clone(), data[year_idx][p].clone()))
                        .collect(),
                }]
            })
            .collect();
        ScenarioGrid { periods }
    }

    /// Scenario grid of a representative set; zero-probability entries are
    /// dropped.
    pub fn from_repset(
        repset: &RepresentativeSet,
        sample: &ClimateSample,
    ) -> Result<ScenarioGrid, CoreError> {
        if repset.periods.len() != sample.periods_per_year {
            return Err(CoreError::schema(
                "repset",
                format!(
                    "{} periods vs sample {}",
                    repset.periods.len(),
                    sample.periods_per_year
                ),
            ));
        }
        let mut periods = Vec::with_capacity(repset.periods.len());
        for (p, entries) in repset.periods.iter().enumerate() {
            let sum: f64 = entries.iter().map(|e| e.probability).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(CoreError::ProbabilityMismatch { period: p, sum });
            }
            let mut cells = Vec::new();
            for e in entries {
                if e.probability <= 0.0 {
                    log::debug!(
                        "dropping zero-probability representative year {} in period {p}",
                        sample.years[e.year_idx]
                    );
                    continue;
                }
                cells.push(ScenarioCell {
                    label: format!("y{}", sample.years[e.year_idx]),
                    probability: e.probability,
                    extreme: e.extreme,
                    series: sample
                        .series
                        .iter()
                        .map(|(key, data)| (key.clone(), data[e.year_idx][p].clone()))
                        .collect(),
                });
            }
            periods.push(cells);
        }
        Ok(ScenarioGrid { periods })
    }
}

/// The built program: matrix, index, provenance and probabilities.
#[derive(Debug)]
pub struct ProgramArtifacts {
    pub lp: SparseLp,
    /// The scenario data the program was built from.
    pub grid: ScenarioGrid,
    pub index: DecisionIndex,
    pub row_tags: Vec<RowTag>,
    /// Block of each row; `None` for first-stage-only rows.
    pub row_block: Vec<Option<(usize, usize)>>,
    /// Block of each column; `None` for first-stage columns.
    pub col_block: Vec<Option<(usize, usize)>>,
    /// Objective coefficient without the probability weight.
    pub unweighted_cost: Vec<f64>,
    /// `probabilities[p][s]`.
    pub probabilities: Vec<Vec<f64>>,
    pub block_labels: Vec<Vec<String>>,
    pub combination_count: BigUint,
}

impl ProgramArtifacts {
    pub fn col(&self, key: &VarKey) -> usize {
        self.index
            .col(key)
            .unwrap_or_else(|| panic!("unknown variable {key:?}"))
    }

    pub fn num_blocks(&self) -> usize {
        self.probabilities.iter().map(|p| p.len()).sum()
    }

    /// Equation tags present in the program.
    pub fn equation_set(&self) -> std::collections::BTreeSet<&'static str> {
        self.row_tags.iter().map(|t| t.equation).collect()
    }
}

/// Static checks used by the energy system loader and tests: a usable
/// system must reference only metrics that the sample provides.
pub fn check_metrics(system: &EnergySystem, sample: &ClimateSample) -> Result<(), CoreError> {
    let mut required: Vec<(String, String)> = Vec::new();
    for tech in &system.conversions {
        if let Some(metric) = &tech.profile_metric {
            for region in &tech.regions {
                required.push((metric.clone(), region.clone()));
            }
        }
    }
    for storage in &system.storages {
        if let Some(metric) = &storage.inflow_metric {
            for region in &storage.regions {
                required.push((metric.clone(), region.clone()));
            }
        }
    }
    for demand in &system.demands {
        if let crate::model::DemandSource::Metric(metric) = &demand.source {
            required.push((metric.clone(), demand.region.clone()));
        }
    }
    for (metric, region) in required {
        if !sample.series.contains_key(&(metric.clone(), region.clone())) {
            return Err(CoreError::DanglingReference(
                format!("{metric}.{region}"),
                "climate sample".to_string(),
            ));
        }
    }
    if system.grid.periods_per_year != sample.periods_per_year
        || system.grid.timesteps_per_period != sample.timesteps_per_period
    {
        return Err(CoreError::schema(
            "sample",
            "sample grid does not match the system grid",
        ));
    }
    Ok(())
}
