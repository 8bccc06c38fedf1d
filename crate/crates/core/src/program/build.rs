use super::{DecisionIndex, ProgramArtifacts, RowTag, ScenarioCell, ScenarioGrid, VarKey};
use crate::climate::ClimateSample;
use crate::cluster::RepresentativeSet;
use crate::error::CoreError;
use crate::model::*;
use crate::series::{aggregate_series, SeriesKind};
use boreas_lp::{LpBuilder, RowSense};
use std::collections::BTreeMap;

/// Switches and safety margins of the robust storage formulation.
#[derive(Debug, Clone, Copy)]
pub struct BuildFlags {
    /// Master switch for the multi-year component.
    pub multi_year: bool,
    /// Expected-level margin: inverse of the years a depleted store needs
    /// to refill.
    pub alpha: f64,
    /// Repetitions of the worst-case year covered by the starting level.
    pub beta: f64,
    /// Repetitions of the best-case year covered by the leeway.
    pub gamma: f64,
}

impl Default for BuildFlags {
    fn default() -> Self {
        BuildFlags {
            multi_year: true,
            alpha: 0.01,
            beta: 1.0,
            gamma: 1.0,
        }
    }
}

/// Build the extensive form for a scenario grid.
pub fn build_program(
    system: &EnergySystem,
    grid: &ScenarioGrid,
    flags: &BuildFlags,
) -> Result<ProgramArtifacts, CoreError> {
    Builder::new(system, grid, flags)?.run()
}

/// Single-year deterministic planning problem.
pub fn build_deterministic(
    system: &EnergySystem,
    sample: &ClimateSample,
    year_idx: usize,
    flags: &BuildFlags,
) -> Result<ProgramArtifacts, CoreError> {
    super::check_metrics(system, sample)?;
    let grid = ScenarioGrid::deterministic(sample, year_idx);
    build_program(system, &grid, flags)
}

/// Period-scenario stochastic program from a representative set.
pub fn build_stochastic(
    system: &EnergySystem,
    repset: &RepresentativeSet,
    sample: &ClimateSample,
    flags: &BuildFlags,
) -> Result<ProgramArtifacts, CoreError> {
    super::check_metrics(system, sample)?;
    let grid = ScenarioGrid::from_repset(repset, sample)?;
    build_program(system, &grid, flags)
}

struct Builder<'a> {
    system: &'a EnergySystem,
    grid: &'a ScenarioGrid,
    flags: &'a BuildFlags,
    lp: LpBuilder,
    index: DecisionIndex,
    row_tags: Vec<RowTag>,
    row_block: Vec<Option<(usize, usize)>>,
    col_block: Vec<Option<(usize, usize)>>,
    unweighted_cost: Vec<f64>,
    /// Base-resolution demand per (carrier, region) and (period, scenario).
    demand_base: BTreeMap<(String, String), Vec<Vec<Vec<f64>>>>,
    /// Peak demand rate in MW per (carrier, region) over the whole grid.
    demand_peak: BTreeMap<(String, String), f64>,
}

const INF: f64 = f64::INFINITY;

impl<'a> Builder<'a> {
    fn new(
        system: &'a EnergySystem,
        grid: &'a ScenarioGrid,
        flags: &'a BuildFlags,
    ) -> Result<Builder<'a>, CoreError> {
        if grid.periods.len() != system.grid.periods_per_year {
            return Err(CoreError::schema(
                "grid",
                format!(
                    "{} scenario periods vs {} system periods",
                    grid.periods.len(),
                    system.grid.periods_per_year
                ),
            ));
        }
        for (p, cells) in grid.periods.iter().enumerate() {
            if cells.is_empty() {
                return Err(CoreError::schema("grid", format!("period {p} has no scenarios")));
            }
            let sum: f64 = cells.iter().map(|c| c.probability).sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(CoreError::ProbabilityMismatch { period: p, sum });
            }
        }

        let steps = system.grid.timesteps_per_period;
        let mut demand_base = BTreeMap::new();
        let mut demand_peak = BTreeMap::new();
        for d in &system.demands {
            let key = (d.carrier.clone(), d.region.clone());
            let mut per_period: Vec<Vec<Vec<f64>>> = Vec::with_capacity(grid.periods.len());
            let mut peak_rate = 0.0f64;
            for (p, cells) in grid.periods.iter().enumerate() {
                let mut per_scen = Vec::with_capacity(cells.len());
                for cell in cells {
                    let base: Vec<f64> = match &d.source {
                        DemandSource::Static(year) => {
                            year[p * steps..(p + 1) * steps].to_vec()
                        }
                        DemandSource::Metric(metric) => cell
                            .series
                            .get(&(metric.clone(), d.region.clone()))
                            .ok_or_else(|| {
                                CoreError::DanglingReference(
                                    format!("{metric}.{}", d.region),
                                    format!("demand {}/{}", d.carrier, d.region),
                                )
                            })?
                            .clone(),
                    };
                    if base.len() != steps {
                        return Err(CoreError::schema(
                            format!("demand {}/{}", d.carrier, d.region),
                            format!("period series length {} vs {steps}", base.len()),
                        ));
                    }
                    for &v in &base {
                        peak_rate = peak_rate.max(v);
                    }
                    per_scen.push(base);
                }
                per_period.push(per_scen);
            }
            demand_base.insert(key.clone(), per_period);
            demand_peak.insert(key, peak_rate);
        }

        Ok(Builder {
            system,
            grid,
            flags,
            lp: LpBuilder::new(),
            index: DecisionIndex::default(),
            row_tags: Vec::new(),
            row_block: Vec::new(),
            col_block: Vec::new(),
            unweighted_cost: Vec::new(),
            demand_base,
            demand_peak,
        })
    }

    fn probability(&self, p: usize, s: usize) -> f64 {
        self.grid.periods[p][s].probability
    }

    fn add_var(
        &mut self,
        key: VarKey,
        unweighted_cost: f64,
        lower: f64,
        upper: f64,
    ) -> usize {
        let block = key.block();
        let weighted = match block {
            Some((p, s)) => unweighted_cost * self.probability(p, s),
            None => unweighted_cost,
        };
        let col = self.lp.add_col(weighted, lower, upper);
        self.index.insert(key, col);
        self.col_block.push(block);
        self.unweighted_cost.push(unweighted_cost);
        col
    }

    fn add_row(
        &mut self,
        tag: RowTag,
        block: Option<(usize, usize)>,
        sense: RowSense,
        rhs: f64,
        entries: &[(usize, f64)],
    ) -> usize {
        let row = self.lp.add_row(sense, rhs, entries);
        self.row_tags.push(tag);
        self.row_block.push(block);
        row
    }

    fn storage_multi_year(&self, s: &StorageTech) -> bool {
        self.flags.multi_year && s.multi_year && s.class == StorageClass::LongTerm
    }

    /// Operating resolution of a conversion tech: the finest resolution
    /// among the carriers it touches.
    fn operating_resolution(&self, tech: &ConversionTech) -> usize {
        tech.inputs
            .keys()
            .chain(tech.outputs.keys())
            .filter_map(|c| self.system.carrier(c))
            .map(|c| c.resolution)
            .min()
            .unwrap_or(1)
    }

    /// Availability of one tech in one scenario cell at operating
    /// resolution.
    fn availability(
        &self,
        tech: &ConversionTech,
        region: &str,
        cell: &ScenarioCell,
        res_op: usize,
    ) -> Result<Vec<f64>, CoreError> {
        let steps_op = self.system.grid.timesteps_per_period / res_op;
        match &tech.profile_metric {
            None => Ok(vec![1.0; steps_op]),
            Some(metric) => {
                let base = cell
                    .series
                    .get(&(metric.clone(), region.to_string()))
                    .ok_or_else(|| {
                        CoreError::DanglingReference(
                            format!("{metric}.{region}"),
                            format!("conversion {}", tech.id),
                        )
                    })?;
                aggregate_series(base, res_op, SeriesKind::CapacityFactor)
            }
        }
    }

    fn run(mut self) -> Result<ProgramArtifacts, CoreError> {
        self.first_stage_columns();
        self.second_stage_columns()?;
        self.capacity_and_mustrun_rows()?;
        self.storage_rows()?;
        self.contract_rows();
        self.balance_rows()?;
        self.emission_rows();

        let probabilities: Vec<Vec<f64>> = self
            .grid
            .periods
            .iter()
            .map(|cells| cells.iter().map(|c| c.probability).collect())
            .collect();
        let block_labels: Vec<Vec<String>> = self
            .grid
            .periods
            .iter()
            .map(|cells| cells.iter().map(|c| c.label.clone()).collect())
            .collect();
        let combination_count = self.grid.combination_count();

        let lp = self.lp.build();
        lp.validate()?;

        // Cross-check the block classification against the matrix: no row
        // may touch more than one period-scenario block. A row emitted in
        // block context can lose all second-stage entries (for instance an
        // emission row in a system without emitters); it then belongs to
        // the first stage.
        let mut derived: Vec<Option<(usize, usize)>> = vec![None; lp.num_rows];
        for j in 0..lp.num_cols {
            if let Some(block) = self.col_block[j] {
                for (i, _) in lp.col_iter(j) {
                    match derived[i] {
                        None => derived[i] = Some(block),
                        Some(b) => assert_eq!(
                            b, block,
                            "row {i} ({:?}) spans blocks {b:?} and {block:?}",
                            self.row_tags[i]
                        ),
                    }
                }
            }
        }
        for (i, (emitted, scanned)) in self.row_block.iter_mut().zip(&derived).enumerate() {
            match (*emitted, *scanned) {
                (Some(_), None) => *emitted = None,
                (None, Some(_)) => panic!(
                    "first-stage row {i} ({:?}) touches block columns",
                    self.row_tags[i]
                ),
                (a, b) => assert_eq!(a, b, "row {i} ({:?}) block mismatch", self.row_tags[i]),
            }
        }

        Ok(ProgramArtifacts {
            lp,
            grid: self.grid.clone(),
            index: self.index,
            row_tags: self.row_tags,
            row_block: self.row_block,
            col_block: self.col_block,
            unweighted_cost: self.unweighted_cost,
            probabilities,
            block_labels,
            combination_count,
        })
    }

    fn first_stage_columns(&mut self) {
        let periods = self.grid.periods.len();
        for tech in &self.system.conversions {
            for region in &tech.regions {
                self.add_var(
                    VarKey::ConvCap {
                        tech: tech.id.clone(),
                        region: region.clone(),
                    },
                    tech.invest_cost,
                    tech.capacity_min,
                    tech.capacity_max,
                );
            }
        }
        for storage in &self.system.storages {
            let multi = self.storage_multi_year(storage);
            for region in &storage.regions {
                let sid = storage.id.clone();
                let rid = region.clone();
                self.add_var(
                    VarKey::StorePowerIn { store: sid.clone(), region: rid.clone() },
                    storage.invest_cost_power,
                    storage.power_min,
                    storage.power_max,
                );
                self.add_var(
                    VarKey::StorePowerOut { store: sid.clone(), region: rid.clone() },
                    storage.invest_cost_power,
                    storage.power_min,
                    storage.power_max,
                );
                self.add_var(
                    VarKey::StoreSizeTotal { store: sid.clone(), region: rid.clone() },
                    storage.invest_cost_energy,
                    storage.energy_min,
                    storage.energy_max,
                );
                if storage.class == StorageClass::LongTerm {
                    self.add_var(
                        VarKey::StoreSizeSeason { store: sid.clone(), region: rid.clone() },
                        0.0,
                        0.0,
                        INF,
                    );
                    for p in 0..periods {
                        self.add_var(
                            VarKey::StoreBoundary { store: sid.clone(), region: rid.clone(), period: p },
                            0.0,
                            -INF,
                            INF,
                        );
                        self.add_var(
                            VarKey::StoreDeltaSeason { store: sid.clone(), region: rid.clone(), period: p },
                            0.0,
                            -INF,
                            INF,
                        );
                    }
                    if multi {
                        self.add_var(
                            VarKey::StoreSizeMulti { store: sid.clone(), region: rid.clone() },
                            0.0,
                            0.0,
                            INF,
                        );
                        self.add_var(
                            VarKey::StoreStartMulti { store: sid.clone(), region: rid.clone() },
                            0.0,
                            0.0,
                            INF,
                        );
                        self.add_var(
                            VarKey::StoreStartTotal { store: sid.clone(), region: rid.clone() },
                            0.0,
                            0.0,
                            INF,
                        );
                        self.add_var(
                            VarKey::StoreLeeway { store: sid.clone(), region: rid.clone() },
                            0.0,
                            0.0,
                            INF,
                        );
                        for p in 0..periods {
                            self.add_var(
                                VarKey::StoreWorst { store: sid.clone(), region: rid.clone(), period: p },
                                0.0,
                                -INF,
                                INF,
                            );
                            self.add_var(
                                VarKey::StoreBest { store: sid.clone(), region: rid.clone(), period: p },
                                0.0,
                                -INF,
                                INF,
                            );
                            for s in 0..self.grid.periods[p].len() {
                                self.add_var(
                                    VarKey::StoreDeltaMulti {
                                        store: sid.clone(),
                                        region: rid.clone(),
                                        period: p,
                                        scen: s,
                                    },
                                    0.0,
                                    -INF,
                                    INF,
                                );
                            }
                        }
                    }
                }
            }
        }
        for link in &self.system.links {
            self.add_var(
                VarKey::LinkCap { link: link.id.clone() },
                link.invest_cost,
                link.capacity_min,
                link.capacity_max,
            );
        }
        for contract in &self.system.contracts {
            self.add_var(
                VarKey::ContractBase { contract: contract.id.clone() },
                0.0,
                0.0,
                INF,
            );
            self.add_var(
                VarKey::ContractBaseCost { contract: contract.id.clone() },
                1.0,
                -INF,
                INF,
            );
        }
        for p in 0..periods {
            for s in 0..self.grid.periods[p].len() {
                self.add_var(VarKey::Emission { period: p, scen: s }, 0.0, -INF, INF);
            }
        }
    }

    fn second_stage_columns(&mut self) -> Result<(), CoreError> {
        let t_base = self.system.grid.timesteps_per_period;
        for p in 0..self.grid.periods.len() {
            for s in 0..self.grid.periods[p].len() {
                for tech in &self.system.conversions {
                    let res_op = self.operating_resolution(tech);
                    for region in &tech.regions {
                        for step in 0..t_base / res_op {
                            self.add_var(
                                VarKey::Activity {
                                    tech: tech.id.clone(),
                                    region: region.clone(),
                                    period: p,
                                    scen: s,
                                    step,
                                },
                                tech.var_cost,
                                0.0,
                                INF,
                            );
                        }
                    }
                }
                for storage in &self.system.storages {
                    let carrier = self
                        .system
                        .carrier(&storage.carrier)
                        .ok_or_else(|| {
                            CoreError::DanglingReference(
                                storage.carrier.clone(),
                                format!("storage {}", storage.id),
                            )
                        })?;
                    let steps_s = self.system.steps_per_period(carrier);
                    let multi = self.storage_multi_year(storage);
                    for region in &storage.regions {
                        for step in 0..steps_s {
                            let coords = (storage.id.clone(), region.clone(), p, s, step);
                            self.add_var(
                                VarKey::StoreChargeBal {
                                    store: coords.0.clone(),
                                    region: coords.1.clone(),
                                    period: p,
                                    scen: s,
                                    step,
                                },
                                0.0,
                                0.0,
                                INF,
                            );
                            self.add_var(
                                VarKey::StoreDischargeBal {
                                    store: coords.0.clone(),
                                    region: coords.1.clone(),
                                    period: p,
                                    scen: s,
                                    step,
                                },
                                0.0,
                                0.0,
                                INF,
                            );
                            self.add_var(
                                VarKey::StoreLevel {
                                    store: coords.0.clone(),
                                    region: coords.1.clone(),
                                    period: p,
                                    scen: s,
                                    step,
                                },
                                0.0,
                                0.0,
                                INF,
                            );
                            if multi {
                                self.add_var(
                                    VarKey::StoreFromMulti {
                                        store: coords.0.clone(),
                                        region: coords.1.clone(),
                                        period: p,
                                        scen: s,
                                        step,
                                    },
                                    0.0,
                                    0.0,
                                    INF,
                                );
                                self.add_var(
                                    VarKey::StoreToMulti {
                                        store: coords.0.clone(),
                                        region: coords.1.clone(),
                                        period: p,
                                        scen: s,
                                        step,
                                    },
                                    0.0,
                                    0.0,
                                    INF,
                                );
                            }
                            if storage.inflow_metric.is_some() {
                                self.add_var(
                                    VarKey::StoreSpill {
                                        store: coords.0,
                                        region: coords.1,
                                        period: p,
                                        scen: s,
                                        step,
                                    },
                                    0.0,
                                    0.0,
                                    INF,
                                );
                            }
                        }
                    }
                }
                for link in &self.system.links {
                    let carrier = self.system.carrier(&link.carrier).unwrap();
                    for step in 0..self.system.steps_per_period(carrier) {
                        self.add_var(
                            VarKey::LinkFlowFwd { link: link.id.clone(), period: p, scen: s, step },
                            link.var_cost,
                            0.0,
                            INF,
                        );
                        self.add_var(
                            VarKey::LinkFlowRev { link: link.id.clone(), period: p, scen: s, step },
                            link.var_cost,
                            0.0,
                            INF,
                        );
                    }
                }
                for contract in &self.system.contracts {
                    self.add_var(
                        VarKey::ImportBase { contract: contract.id.clone(), period: p, scen: s },
                        0.0,
                        0.0,
                        INF,
                    );
                    self.add_var(
                        VarKey::ImportFlex { contract: contract.id.clone(), period: p, scen: s },
                        contract.nu_flex,
                        0.0,
                        INF,
                    );
                }
                for d in &self.system.demands {
                    let carrier = self.system.carrier(&d.carrier).unwrap();
                    for step in 0..self.system.steps_per_period(carrier) {
                        self.add_var(
                            VarKey::Unserved {
                                carrier: d.carrier.clone(),
                                region: d.region.clone(),
                                period: p,
                                scen: s,
                                step,
                            },
                            d.unserved_cost,
                            0.0,
                            INF,
                        );
                    }
                }
            }
        }
        Ok(())
    }

    fn capacity_and_mustrun_rows(&mut self) -> Result<(), CoreError> {
        let t_base = self.system.grid.timesteps_per_period;
        for p in 0..self.grid.periods.len() {
            for s in 0..self.grid.periods[p].len() {
                for tech in &self.system.conversions {
                    let res_op = self.operating_resolution(tech);
                    let steps_op = t_base / res_op;
                    for region in &tech.regions {
                        let cap = self.index.col(&VarKey::ConvCap {
                            tech: tech.id.clone(),
                            region: region.clone(),
                        }).unwrap();
                        if tech.must_run {
                            // Output follows the demand profile of the
                            // single output carrier, scaled by capacity.
                            let out_carrier = tech.outputs.keys().next().cloned().unwrap_or_default();
                            let key = (out_carrier, region.clone());
                            let peak = self.demand_peak.get(&key).copied().unwrap_or(0.0);
                            let base = self
                                .demand_base
                                .get(&key)
                                .map(|d| d[p][s].clone())
                                .unwrap_or_else(|| vec![0.0; t_base]);
                            let profile = aggregate_series(&base, res_op, SeriesKind::Demand)?;
                            for step in 0..steps_op {
                                let y = self.index.col(&VarKey::Activity {
                                    tech: tech.id.clone(),
                                    region: region.clone(),
                                    period: p,
                                    scen: s,
                                    step,
                                }).unwrap();
                                let rate = if peak > 0.0 { profile[step] / peak } else { 0.0 };
                                self.add_row(
                                    RowTag::new("3c", format!("mustrun:{}:{}:{p}:{s}:{step}", tech.id, region)),
                                    Some((p, s)),
                                    RowSense::Eq,
                                    0.0,
                                    &[(y, 1.0), (cap, -rate)],
                                );
                            }
                        } else {
                            let avail = {
                                let cell = &self.grid.periods[p][s];
                                self.availability(tech, region, cell, res_op)?
                            };
                            for step in 0..steps_op {
                                let y = self.index.col(&VarKey::Activity {
                                    tech: tech.id.clone(),
                                    region: region.clone(),
                                    period: p,
                                    scen: s,
                                    step,
                                }).unwrap();
                                self.add_row(
                                    RowTag::new("3c", format!("cap:{}:{}:{p}:{s}:{step}", tech.id, region)),
                                    Some((p, s)),
                                    RowSense::Le,
                                    0.0,
                                    &[(y, 1.0), (cap, -avail[step] * res_op as f64)],
                                );
                            }
                        }
                    }
                }
                for link in &self.system.links {
                    let carrier = self.system.carrier(&link.carrier).unwrap();
                    let res = carrier.resolution as f64;
                    let cap = self.index.col(&VarKey::LinkCap { link: link.id.clone() }).unwrap();
                    for step in 0..self.system.steps_per_period(carrier) {
                        for (dir, key) in [
                            ("fwd", VarKey::LinkFlowFwd { link: link.id.clone(), period: p, scen: s, step }),
                            ("rev", VarKey::LinkFlowRev { link: link.id.clone(), period: p, scen: s, step }),
                        ] {
                            let flow = self.index.col(&key).unwrap();
                            self.add_row(
                                RowTag::new("3c", format!("linkcap:{}:{dir}:{p}:{s}:{step}", link.id)),
                                Some((p, s)),
                                RowSense::Le,
                                link.existing * res,
                                &[(flow, 1.0), (cap, -res)],
                            );
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn storage_rows(&mut self) -> Result<(), CoreError> {
        let periods = self.grid.periods.len();
        for storage in &self.system.storages {
            let carrier = self.system.carrier(&storage.carrier).unwrap().clone();
            let steps_s = self.system.steps_per_period(&carrier);
            let res = carrier.resolution as f64;
            let multi = self.storage_multi_year(storage);
            for region in &storage.regions {
                let sid = &storage.id;
                let col =
                    |b: &Builder, key: VarKey| b.index.col(&key).expect("column registered");
                let x_in = col(self, VarKey::StorePowerIn { store: sid.clone(), region: region.clone() });
                let x_out = col(self, VarKey::StorePowerOut { store: sid.clone(), region: region.clone() });
                let x_size = col(self, VarKey::StoreSizeTotal { store: sid.clone(), region: region.clone() });

                // Operational rows per (p, s, step).
                for p in 0..periods {
                    for s in 0..self.grid.periods[p].len() {
                        let inflow: Option<Vec<f64>> = match &storage.inflow_metric {
                            Some(metric) => {
                                let base = self.grid.periods[p][s]
                                    .series
                                    .get(&(metric.clone(), region.clone()))
                                    .ok_or_else(|| {
                                        CoreError::DanglingReference(
                                            format!("{metric}.{region}"),
                                            format!("storage {sid}"),
                                        )
                                    })?;
                                Some(aggregate_series(base, carrier.resolution, SeriesKind::Demand)?)
                            }
                            None => None,
                        };
                        for step in 0..steps_s {
                            let charge = col(self, VarKey::StoreChargeBal { store: sid.clone(), region: region.clone(), period: p, scen: s, step });
                            let discharge = col(self, VarKey::StoreDischargeBal { store: sid.clone(), region: region.clone(), period: p, scen: s, step });
                            let level = col(self, VarKey::StoreLevel { store: sid.clone(), region: region.clone(), period: p, scen: s, step });

                            let (tag_in, tag_out, tag_lvl) = match storage.class {
                                StorageClass::ShortTerm => ("5b", "5c", "5d"),
                                StorageClass::LongTerm => ("6b", "6c", "12a"),
                            };
                            self.add_row(
                                RowTag::new(tag_in, format!("chargecap:{sid}:{region}:{p}:{s}:{step}")),
                                Some((p, s)),
                                RowSense::Le,
                                0.0,
                                &[(charge, 1.0), (x_in, -res)],
                            );
                            self.add_row(
                                RowTag::new(tag_out, format!("dischargecap:{sid}:{region}:{p}:{s}:{step}")),
                                Some((p, s)),
                                RowSense::Le,
                                0.0,
                                &[(discharge, 1.0), (x_out, -res)],
                            );
                            let level_cap_col = match storage.class {
                                StorageClass::ShortTerm => x_size,
                                StorageClass::LongTerm => col(self, VarKey::StoreSizeSeason { store: sid.clone(), region: region.clone() }),
                            };
                            self.add_row(
                                RowTag::new(tag_lvl, format!("levelcap:{sid}:{region}:{p}:{s}:{step}")),
                                Some((p, s)),
                                RowSense::Le,
                                0.0,
                                &[(level, 1.0), (level_cap_col, -1.0)],
                            );

                            // Level recursion.
                            let mut entries: Vec<(usize, f64)> = vec![
                                (level, 1.0),
                                (charge, -storage.charge_efficiency),
                                (discharge, 1.0 / storage.discharge_efficiency),
                            ];
                            if multi {
                                let from_mul = col(self, VarKey::StoreFromMulti { store: sid.clone(), region: region.clone(), period: p, scen: s, step });
                                let to_mul = col(self, VarKey::StoreToMulti { store: sid.clone(), region: region.clone(), period: p, scen: s, step });
                                entries.push((from_mul, -1.0));
                                entries.push((to_mul, 1.0));
                            }
                            if storage.inflow_metric.is_some() {
                                let spill = col(self, VarKey::StoreSpill { store: sid.clone(), region: region.clone(), period: p, scen: s, step });
                                entries.push((spill, 1.0));
                            }
                            let tag = match storage.class {
                                StorageClass::ShortTerm => "5a",
                                StorageClass::LongTerm => "6a",
                            };
                            match (storage.class, step) {
                                (StorageClass::ShortTerm, 0) => {
                                    // Cyclic wrap to the period's last step.
                                    let last = col(self, VarKey::StoreLevel { store: sid.clone(), region: region.clone(), period: p, scen: s, step: steps_s - 1 });
                                    entries.push((last, -1.0));
                                }
                                (StorageClass::LongTerm, 0) => {
                                    let boundary = col(self, VarKey::StoreBoundary { store: sid.clone(), region: region.clone(), period: p });
                                    entries.push((boundary, -1.0));
                                }
                                (_, _) => {
                                    let prev = col(self, VarKey::StoreLevel { store: sid.clone(), region: region.clone(), period: p, scen: s, step: step - 1 });
                                    entries.push((prev, -1.0));
                                }
                            }
                            let rhs = inflow.as_ref().map(|f| f[step]).unwrap_or(0.0);
                            self.add_row(
                                RowTag::new(tag, format!("level:{sid}:{region}:{p}:{s}:{step}")),
                                Some((p, s)),
                                RowSense::Eq,
                                rhs,
                                &entries,
                            );
                        }

                        if storage.class == StorageClass::LongTerm {
                            // End-of-period level equals the next boundary
                            // in every scenario.
                            let last = col(self, VarKey::StoreLevel { store: sid.clone(), region: region.clone(), period: p, scen: s, step: steps_s - 1 });
                            let next = col(self, VarKey::StoreBoundary { store: sid.clone(), region: region.clone(), period: (p + 1) % periods });
                            self.add_row(
                                RowTag::new("7a", format!("endlevel:{sid}:{region}:{p}:{s}")),
                                Some((p, s)),
                                RowSense::Eq,
                                0.0,
                                &[(last, 1.0), (next, -1.0)],
                            );
                            if multi {
                                // Net change of the multi-year account.
                                let delta = col(self, VarKey::StoreDeltaMulti { store: sid.clone(), region: region.clone(), period: p, scen: s });
                                let mut entries = vec![(delta, 1.0)];
                                for step in 0..steps_s {
                                    let to_mul = col(self, VarKey::StoreToMulti { store: sid.clone(), region: region.clone(), period: p, scen: s, step });
                                    let from_mul = col(self, VarKey::StoreFromMulti { store: sid.clone(), region: region.clone(), period: p, scen: s, step });
                                    entries.push((to_mul, -storage.eta));
                                    entries.push((from_mul, 1.0));
                                }
                                self.add_row(
                                    RowTag::new("7b", format!("mudelta:{sid}:{region}:{p}:{s}")),
                                    Some((p, s)),
                                    RowSense::Eq,
                                    0.0,
                                    &entries,
                                );
                            }
                        }
                    }
                }

                if storage.class != StorageClass::LongTerm {
                    continue;
                }

                // First-stage structure of the long-term split.
                let x_seas = col(self, VarKey::StoreSizeSeason { store: sid.clone(), region: region.clone() });
                for p in 0..periods {
                    let b_this = col(self, VarKey::StoreBoundary { store: sid.clone(), region: region.clone(), period: p });
                    let b_next = col(self, VarKey::StoreBoundary { store: sid.clone(), region: region.clone(), period: (p + 1) % periods });
                    let delta = col(self, VarKey::StoreDeltaSeason { store: sid.clone(), region: region.clone(), period: p });
                    // For the last period this wraps to boundary 0 and
                    // closes the yearly profile.
                    self.add_row(
                        RowTag::new("7a", format!("seasdelta:{sid}:{region}:{p}")),
                        None,
                        RowSense::Eq,
                        0.0,
                        &[(delta, 1.0), (b_next, -1.0), (b_this, 1.0)],
                    );
                    // Boundary levels stay within the seasonal capacity.
                    self.add_row(
                        RowTag::new("12a", format!("boundcap:{sid}:{region}:{p}")),
                        None,
                        RowSense::Le,
                        0.0,
                        &[(b_this, 1.0), (x_seas, -1.0)],
                    );
                    // Seasonal path stays nonnegative: l0_seas plus the
                    // cumulative deltas up to each period.
                    let mut entries = vec![(
                        col(self, VarKey::StoreBoundary { store: sid.clone(), region: region.clone(), period: 0 }),
                        1.0,
                    )];
                    for q in 0..=p {
                        entries.push((
                            col(self, VarKey::StoreDeltaSeason { store: sid.clone(), region: region.clone(), period: q }),
                            1.0,
                        ));
                    }
                    self.add_row(
                        RowTag::new("10a0", format!("seaspath:{sid}:{region}:{p}")),
                        None,
                        RowSense::Ge,
                        0.0,
                        &entries,
                    );
                }

                if !multi {
                    // Total size is the seasonal component alone.
                    self.add_row(
                        RowTag::new("12b", format!("size:{sid}:{region}")),
                        None,
                        RowSense::Eq,
                        0.0,
                        &[(x_size, 1.0), (x_seas, -1.0)],
                    );
                    continue;
                }

                let x_mul = col(self, VarKey::StoreSizeMulti { store: sid.clone(), region: region.clone() });
                let l0_mul = col(self, VarKey::StoreStartMulti { store: sid.clone(), region: region.clone() });
                let l0_total = col(self, VarKey::StoreStartTotal { store: sid.clone(), region: region.clone() });
                let leeway = col(self, VarKey::StoreLeeway { store: sid.clone(), region: region.clone() });
                let b0 = col(self, VarKey::StoreBoundary { store: sid.clone(), region: region.clone(), period: 0 });

                // Expected multi-year delta covers the refill margin.
                let mut entries = vec![(l0_total, -self.flags.alpha)];
                for p in 0..periods {
                    for s in 0..self.grid.periods[p].len() {
                        let delta = col(self, VarKey::StoreDeltaMulti { store: sid.clone(), region: region.clone(), period: p, scen: s });
                        entries.push((delta, self.probability(p, s)));
                    }
                }
                self.add_row(
                    RowTag::new("8", format!("expect:{sid}:{region}")),
                    None,
                    RowSense::Ge,
                    0.0,
                    &entries,
                );

                for p in 0..periods {
                    let worst = col(self, VarKey::StoreWorst { store: sid.clone(), region: region.clone(), period: p });
                    let best = col(self, VarKey::StoreBest { store: sid.clone(), region: region.clone(), period: p });
                    for s in 0..self.grid.periods[p].len() {
                        let delta = col(self, VarKey::StoreDeltaMulti { store: sid.clone(), region: region.clone(), period: p, scen: s });
                        self.add_row(
                            RowTag::new("9a", format!("worst:{sid}:{region}:{p}:{s}")),
                            None,
                            RowSense::Le,
                            0.0,
                            &[(worst, 1.0), (delta, -1.0)],
                        );
                        self.add_row(
                            RowTag::new("9c", format!("best:{sid}:{region}:{p}:{s}")),
                            None,
                            RowSense::Ge,
                            0.0,
                            &[(best, 1.0), (delta, -1.0)],
                        );
                    }
                    self.add_row(
                        RowTag::new("9b", format!("worstsign:{sid}:{region}:{p}")),
                        None,
                        RowSense::Le,
                        0.0,
                        &[(worst, 1.0)],
                    );
                    self.add_row(
                        RowTag::new("9d", format!("bestsign:{sid}:{region}:{p}")),
                        None,
                        RowSense::Ge,
                        0.0,
                        &[(best, 1.0)],
                    );
                }

                // Starting level split and worst-case coverage.
                self.add_row(
                    RowTag::new("10", format!("startsum:{sid}:{region}")),
                    None,
                    RowSense::Eq,
                    0.0,
                    &[(l0_total, 1.0), (b0, -1.0), (l0_mul, -1.0)],
                );
                let mut entries = vec![(l0_mul, 1.0)];
                for p in 0..periods {
                    let worst = col(self, VarKey::StoreWorst { store: sid.clone(), region: region.clone(), period: p });
                    entries.push((worst, self.flags.beta));
                }
                self.add_row(
                    RowTag::new("10a", format!("startworst:{sid}:{region}")),
                    None,
                    RowSense::Ge,
                    0.0,
                    &entries,
                );
                for p_hat in 0..periods {
                    let mut entries = vec![(l0_mul, 1.0)];
                    for p in 0..=p_hat {
                        let worst = col(self, VarKey::StoreWorst { store: sid.clone(), region: region.clone(), period: p });
                        entries.push((worst, 1.0));
                    }
                    self.add_row(
                        RowTag::new("10b", format!("startpath:{sid}:{region}:{p_hat}")),
                        None,
                        RowSense::Ge,
                        0.0,
                        &entries,
                    );
                }

                // Leeway against the best case.
                let mut entries = vec![(leeway, 1.0)];
                for p in 0..periods {
                    let best = col(self, VarKey::StoreBest { store: sid.clone(), region: region.clone(), period: p });
                    entries.push((best, -self.flags.gamma));
                }
                self.add_row(
                    RowTag::new("11a", format!("leeway:{sid}:{region}")),
                    None,
                    RowSense::Ge,
                    0.0,
                    &entries,
                );
                for p_hat in 0..periods {
                    let mut entries = vec![(leeway, 1.0)];
                    for p in 0..=p_hat {
                        let best = col(self, VarKey::StoreBest { store: sid.clone(), region: region.clone(), period: p });
                        entries.push((best, -1.0));
                    }
                    self.add_row(
                        RowTag::new("11b", format!("leewaypath:{sid}:{region}:{p_hat}")),
                        None,
                        RowSense::Ge,
                        0.0,
                        &entries,
                    );
                }

                // Sizes.
                self.add_row(
                    RowTag::new("11c", format!("sizemulti:{sid}:{region}")),
                    None,
                    RowSense::Eq,
                    0.0,
                    &[(x_mul, 1.0), (l0_mul, -1.0), (leeway, -1.0)],
                );
                self.add_row(
                    RowTag::new("12b", format!("size:{sid}:{region}")),
                    None,
                    RowSense::Eq,
                    0.0,
                    &[(x_size, 1.0), (x_seas, -1.0), (x_mul, -1.0)],
                );
            }
        }
        Ok(())
    }

    fn contract_rows(&mut self) {
        let t_period = self.system.grid.timesteps_per_period as f64;
        let hours_year = self.system.grid.hours_per_year();
        for contract in &self.system.contracts {
            let base = self.index.col(&VarKey::ContractBase { contract: contract.id.clone() }).unwrap();
            let cost = self.index.col(&VarKey::ContractBaseCost { contract: contract.id.clone() }).unwrap();
            // Take-or-pay: the baseline is paid in full regardless of use.
            self.add_row(
                RowTag::new("1a_3", format!("basecost:{}", contract.id)),
                None,
                RowSense::Eq,
                0.0,
                &[(cost, 1.0), (base, -hours_year * contract.nu_base)],
            );
            for p in 0..self.grid.periods.len() {
                for s in 0..self.grid.periods[p].len() {
                    let y_base = self.index.col(&VarKey::ImportBase { contract: contract.id.clone(), period: p, scen: s }).unwrap();
                    let y_flex = self.index.col(&VarKey::ImportFlex { contract: contract.id.clone(), period: p, scen: s }).unwrap();
                    self.add_row(
                        RowTag::new("1a_1", format!("base:{}:{p}:{s}", contract.id)),
                        Some((p, s)),
                        RowSense::Le,
                        0.0,
                        &[(y_base, 1.0), (base, -t_period)],
                    );
                    self.add_row(
                        RowTag::new("1a_2", format!("flex:{}:{p}:{s}", contract.id)),
                        Some((p, s)),
                        RowSense::Le,
                        0.0,
                        &[(y_flex, 1.0), (base, -t_period * contract.theta)],
                    );
                }
            }
        }
    }

    fn balance_rows(&mut self) -> Result<(), CoreError> {
        let balances = self.system.balances();
        for (carrier_id, region_id) in balances {
            let carrier = self.system.carrier(&carrier_id).unwrap().clone();
            let steps = self.system.steps_per_period(&carrier);
            let demand = self.system.demand_for(&carrier_id, &region_id).cloned();

            for p in 0..self.grid.periods.len() {
                for s in 0..self.grid.periods[p].len() {
                    let demand_agg: Option<Vec<f64>> = match &demand {
                        Some(_) => {
                            let base = &self.demand_base[&(carrier_id.clone(), region_id.clone())][p][s];
                            Some(aggregate_series(base, carrier.resolution, SeriesKind::Demand)?)
                        }
                        None => None,
                    };
                    for step in 0..steps {
                        let mut entries: Vec<(usize, f64)> = Vec::new();

                        for tech in &self.system.conversions {
                            if !tech.regions.contains(&region_id) {
                                continue;
                            }
                            let out_coef = tech.outputs.get(&carrier_id).copied().unwrap_or(0.0);
                            let in_coef = tech.inputs.get(&carrier_id).copied().unwrap_or(0.0);
                            let net = out_coef - in_coef;
                            if net == 0.0 {
                                continue;
                            }
                            let res_op = self.operating_resolution(tech);
                            // Operating steps inside this carrier step.
                            let per_step = carrier.resolution / res_op;
                            let first = step * per_step;
                            for t in first..first + per_step {
                                let y = self.index.col(&VarKey::Activity {
                                    tech: tech.id.clone(),
                                    region: region_id.clone(),
                                    period: p,
                                    scen: s,
                                    step: t,
                                }).unwrap();
                                entries.push((y, net));
                            }
                        }

                        for storage in &self.system.storages {
                            if storage.carrier != carrier_id || !storage.regions.contains(&region_id) {
                                continue;
                            }
                            let charge = self.index.col(&VarKey::StoreChargeBal { store: storage.id.clone(), region: region_id.clone(), period: p, scen: s, step }).unwrap();
                            let discharge = self.index.col(&VarKey::StoreDischargeBal { store: storage.id.clone(), region: region_id.clone(), period: p, scen: s, step }).unwrap();
                            entries.push((discharge, 1.0));
                            entries.push((charge, -1.0));
                        }

                        for link in &self.system.links {
                            if link.carrier != carrier_id {
                                continue;
                            }
                            let fwd = self.index.col(&VarKey::LinkFlowFwd { link: link.id.clone(), period: p, scen: s, step }).unwrap();
                            let rev = self.index.col(&VarKey::LinkFlowRev { link: link.id.clone(), period: p, scen: s, step }).unwrap();
                            if link.from == region_id {
                                entries.push((fwd, -1.0));
                                entries.push((rev, 1.0 - link.loss));
                            } else if link.to == region_id {
                                entries.push((fwd, 1.0 - link.loss));
                                entries.push((rev, -1.0));
                            }
                        }

                        for contract in &self.system.contracts {
                            if contract.carrier != carrier_id || contract.region != region_id {
                                continue;
                            }
                            let y_base = self.index.col(&VarKey::ImportBase { contract: contract.id.clone(), period: p, scen: s }).unwrap();
                            let y_flex = self.index.col(&VarKey::ImportFlex { contract: contract.id.clone(), period: p, scen: s }).unwrap();
                            let share = 1.0 / steps as f64;
                            entries.push((y_base, share));
                            entries.push((y_flex, share));
                        }

                        let mut rhs = 0.0;
                        if let Some(demand_agg) = &demand_agg {
                            rhs = demand_agg[step];
                            let unserved = self.index.col(&VarKey::Unserved {
                                carrier: carrier_id.clone(),
                                region: region_id.clone(),
                                period: p,
                                scen: s,
                                step,
                            }).unwrap();
                            entries.push((unserved, 1.0));
                        }

                        if entries.is_empty() {
                            return Err(CoreError::UnbalancedCarrier {
                                carrier: carrier_id.clone(),
                                region: region_id.clone(),
                            });
                        }
                        self.add_row(
                            RowTag::new("3c", format!("bal:{carrier_id}:{region_id}:{p}:{s}:{step}")),
                            Some((p, s)),
                            RowSense::Ge,
                            rhs,
                            &entries,
                        );
                    }
                }
            }
        }
        Ok(())
    }

    fn emission_rows(&mut self) {
        for p in 0..self.grid.periods.len() {
            for s in 0..self.grid.periods[p].len() {
                let mut entries: Vec<(usize, f64)> = Vec::new();
                for tech in &self.system.conversions {
                    let res_op = self.operating_resolution(tech);
                    let steps_op = self.system.grid.timesteps_per_period / res_op;
                    let rate: f64 = tech
                        .emission_factors
                        .iter()
                        .map(|(carrier, ef)| {
                            ef * tech.inputs.get(carrier).copied().unwrap_or(0.0)
                        })
                        .sum();
                    if rate == 0.0 {
                        continue;
                    }
                    for region in &tech.regions {
                        for step in 0..steps_op {
                            let y = self.index.col(&VarKey::Activity {
                                tech: tech.id.clone(),
                                region: region.clone(),
                                period: p,
                                scen: s,
                                step,
                            }).unwrap();
                            entries.push((y, rate));
                        }
                    }
                }
                for contract in &self.system.contracts {
                    if contract.emission_factor == 0.0 {
                        continue;
                    }
                    let y_base = self.index.col(&VarKey::ImportBase { contract: contract.id.clone(), period: p, scen: s }).unwrap();
                    let y_flex = self.index.col(&VarKey::ImportFlex { contract: contract.id.clone(), period: p, scen: s }).unwrap();
                    entries.push((y_base, contract.emission_factor));
                    entries.push((y_flex, contract.emission_factor));
                }
                let e = self.index.col(&VarKey::Emission { period: p, scen: s }).unwrap();
                entries.push((e, -1.0));
                self.add_row(
                    RowTag::new("3c", format!("emis:{p}:{s}")),
                    Some((p, s)),
                    RowSense::Le,
                    0.0,
                    &entries,
                );
            }
        }
        if let Some(policy) = &self.system.emission_policy {
            let mut entries: Vec<(usize, f64)> = Vec::new();
            for p in 0..self.grid.periods.len() {
                for s in 0..self.grid.periods[p].len() {
                    let e = self.index.col(&VarKey::Emission { period: p, scen: s }).unwrap();
                    entries.push((e, self.probability(p, s)));
                }
            }
            self.add_row(
                RowTag::new("3c", "emcap".to_string()),
                None,
                RowSense::Le,
                policy.cap,
                &entries,
            );
        }
    }
}
