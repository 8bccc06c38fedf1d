//! Stabilized Benders decomposition with variable splitting.
//!
//! The extensive form splits mechanically along the period-scenario blocks
//! of [`ProgramArtifacts`]: rows touching exactly one block become a
//! sub-problem, everything else stays in the top problem. First-stage
//! columns referenced inside a sub-problem (capacities, period boundary
//! levels, multi-year deltas, emission allowances) get a local copy pinned
//! by a fixing row whose dual is the cut subgradient. Sub-problems carry
//! priced elastic slacks on the level-linking, delta and emission rows so
//! that every proposal stays feasible (complete recourse); the penalty
//! sits far above any marginal system cost, so optimal plans leave them
//! idle and only optimality cuts are ever needed.

use crate::error::CoreError;
use crate::model::EnergySystem;
use crate::program::{extract_solution, BuildFlags, PlanSolution, ProgramArtifacts, VarKey};
use boreas_lp::{LpBuilder, LpSolution, RowSense, Simplex, SolveOptions, SparseLp, Status};
use log::{debug, info, warn};
use serde::Serialize;
use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

#[derive(Debug, Clone)]
pub struct BendersOptions {
    /// Relative optimality gap at which iteration stops.
    pub gap_target: f64,
    pub max_iterations: usize,
    pub workers: usize,
    pub stabilization: bool,
    /// Initial trust-region radius relative to `max(1, |incumbent_j|)`.
    pub initial_radius: f64,
    /// Drop cuts after this many consecutive inactive iterations.
    pub cut_age_limit: usize,
    /// Stop when the gap has not improved for this many iterations.
    pub stall_window: usize,
    /// Price of the elastic recourse slacks, EUR per MWh.
    pub elastic_penalty: f64,
    pub lp: SolveOptions,
}

impl Default for BendersOptions {
    fn default() -> Self {
        BendersOptions {
            gap_target: 0.005,
            max_iterations: 200,
            workers: 1,
            stabilization: true,
            initial_radius: 1.0,
            cut_age_limit: 50,
            stall_window: 30,
            elastic_penalty: 50_000.0,
            lp: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConvergenceStatus {
    Converged,
    IterationLimit,
    Stalled,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lower_bound: f64,
    pub upper_bound: f64,
    pub gap: f64,
    pub radius: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub iterations: Vec<IterationRecord>,
    pub status: ConvergenceStatus,
    pub final_gap: f64,
    pub cuts_added: usize,
    pub cuts_dropped: usize,
}

/// Complicating-variable counts of the variable-splitting scheme.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ComplicatingCensus {
    pub capacities: usize,
    /// Period boundary levels carrying the seasonal profile.
    pub seasonal_levels: usize,
    pub multi_year_deltas: usize,
    pub emissions: usize,
    pub total: usize,
}

/// One optimality cut: `phi_{sub} >= rhs + sum lambda_j x_j`.
#[derive(Debug, Clone)]
pub struct Cut {
    pub sub_id: usize,
    pub iteration: usize,
    /// `(original first-stage column, lambda)`.
    pub coefficients: Vec<(usize, f64)>,
    pub rhs: f64,
    /// Sub objective at the generating proposal.
    pub objective: f64,
    inactive_streak: usize,
}

impl Cut {
    #[doc(hidden)]
    pub fn new_for_tests(
        sub_id: usize,
        iteration: usize,
        coefficients: Vec<(usize, f64)>,
        rhs: f64,
        objective: f64,
    ) -> Cut {
        Cut {
            sub_id,
            iteration,
            coefficients,
            rhs,
            objective,
            inactive_streak: 0,
        }
    }
}

/// Operational problem of one representative period-scenario.
pub struct SubProblem {
    pub id: usize,
    pub block: (usize, usize),
    pub probability: f64,
    pub label: String,
    /// Original first-stage columns fixed in this sub, sorted.
    pub complicating: Vec<usize>,
    fixing_rows: Vec<usize>,
    /// `(original column, local column)` of the block's own variables.
    block_cols: Vec<(usize, usize)>,
    lp: SparseLp,
    solver: Simplex,
    elastic_cols: Vec<usize>,
    last_primal: Vec<f64>,
}

impl SubProblem {
    /// Solve for a proposal over this sub's complicating columns. Returns
    /// the objective and the subgradient per complicating column.
    pub fn solve(&mut self, proposal: &[f64]) -> Result<(f64, Vec<f64>), CoreError> {
        assert_eq!(proposal.len(), self.complicating.len());
        for (&row, &value) in self.fixing_rows.iter().zip(proposal.iter()) {
            self.solver.set_rhs(row, value);
            self.lp.rhs[row] = value;
        }
        let sol = self.solver.solve().map_err(CoreError::Solver)?;
        if sol.status != Status::Optimal {
            return Err(CoreError::StatusNotOptimal(sol.status));
        }
        let grad = self.fixing_rows.iter().map(|&r| sol.duals[r]).collect();
        self.last_primal = sol.primal;
        Ok((sol.objective, grad))
    }

    /// Fresh solve of a copy; used by cut validity checks.
    pub fn resolve_cold(&self, proposal: &[f64]) -> Result<f64, CoreError> {
        let mut lp = self.lp.clone();
        for (&row, &value) in self.fixing_rows.iter().zip(proposal.iter()) {
            lp.rhs[row] = value;
        }
        let sol = boreas_lp::solve_lp(&lp, &SolveOptions::default()).map_err(CoreError::Solver)?;
        if sol.status != Status::Optimal {
            return Err(CoreError::StatusNotOptimal(sol.status));
        }
        Ok(sol.objective)
    }

    fn elastic_usage(&self, primal: &[f64]) -> f64 {
        self.elastic_cols.iter().map(|&c| primal[c]).sum()
    }
}

/// Top problem over the first-stage columns plus one epigraph per sub.
pub struct TopProblem {
    base: LpBuilder,
    base_row_count: usize,
    /// Original column ids in top order.
    pub first_cols: Vec<usize>,
    orig_to_top: BTreeMap<usize, usize>,
    /// Epigraph column for sub k sits at `phi_offset + k`.
    phi_offset: usize,
    pub cuts: Vec<Cut>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl TopProblem {
    pub fn top_index_of(&self, orig: usize) -> usize {
        self.orig_to_top[&orig]
    }

    pub fn lower_pub(&self, t: usize) -> f64 {
        self.lower[t]
    }

    pub fn upper_pub(&self, t: usize) -> f64 {
        self.upper[t]
    }

    /// Materialize the LP with all current cuts and an optional
    /// trust-region box around `center`.
    pub fn build_lp(&self, trust: Option<(&[f64], f64)>) -> SparseLp {
        let mut b = self.base.clone();
        for cut in &self.cuts {
            let phi = self.phi_offset + cut.sub_id;
            let mut entries: Vec<(usize, f64)> = vec![(phi, 1.0)];
            for &(orig, lambda) in &cut.coefficients {
                entries.push((self.orig_to_top[&orig], -lambda));
            }
            b.add_row(RowSense::Ge, cut.rhs, &entries);
        }
        if let Some((center, radius)) = trust {
            for t in 0..self.first_cols.len() {
                let scale = center[t].abs().max(1.0);
                let lo = (center[t] - radius * scale).max(self.lower[t]);
                let up = (center[t] + radius * scale).min(self.upper[t]);
                b.set_bounds(t, lo, up);
            }
        }
        b.build()
    }
}

pub struct Decomposition {
    pub artifacts: ProgramArtifacts,
    pub top: TopProblem,
    pub subs: Vec<SubProblem>,
    pub census: ComplicatingCensus,
    options: BendersOptions,
}

/// Split built artifacts into a top problem and one sub per block.
pub fn decompose(
    artifacts: ProgramArtifacts,
    options: BendersOptions,
) -> Result<Decomposition, CoreError> {
    let lp = &artifacts.lp;
    let n = lp.num_cols;

    let mut blocks: Vec<(usize, usize)> = Vec::new();
    for (p, row) in artifacts.probabilities.iter().enumerate() {
        for s in 0..row.len() {
            blocks.push((p, s));
        }
    }
    let block_id: BTreeMap<(usize, usize), usize> =
        blocks.iter().enumerate().map(|(k, &b)| (b, k)).collect();

    let first_cols: Vec<usize> = (0..n).filter(|&j| artifacts.col_block[j].is_none()).collect();
    let orig_to_top: BTreeMap<usize, usize> =
        first_cols.iter().enumerate().map(|(t, &j)| (j, t)).collect();

    let mut row_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); lp.num_rows];
    for j in 0..n {
        for (i, v) in lp.col_iter(j) {
            row_entries[i].push((j, v));
        }
    }

    let mut top_builder = LpBuilder::new();
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for &j in &first_cols {
        top_builder.add_col(lp.objective[j], lp.lower[j], lp.upper[j]);
        lower.push(lp.lower[j]);
        upper.push(lp.upper[j]);
    }
    let phi_offset = first_cols.len();
    for &(p, s) in &blocks {
        // Sub objectives are sums of nonnegative terms, so zero is a valid
        // initial epigraph bound.
        top_builder.add_col(artifacts.probabilities[p][s], 0.0, f64::INFINITY);
    }
    for (i, block) in artifacts.row_block.iter().enumerate() {
        if block.is_none() {
            let entries: Vec<(usize, f64)> = row_entries[i]
                .iter()
                .map(|&(j, v)| (orig_to_top[&j], v))
                .collect();
            top_builder.add_row(lp.senses[i], lp.rhs[i], &entries);
        }
    }
    let base_row_count = top_builder.num_rows();

    let mut subs: Vec<SubProblem> = Vec::new();
    for (&(p, s), &id) in &block_id {
        let mut b = LpBuilder::new();
        let mut local_of: BTreeMap<usize, usize> = BTreeMap::new();
        let mut block_cols: Vec<(usize, usize)> = Vec::new();
        let mut complicating: Vec<usize> = Vec::new();

        for j in 0..n {
            if artifacts.col_block[j] == Some((p, s)) {
                assert!(
                    artifacts.unweighted_cost[j] >= 0.0,
                    "column {j} has negative cost; epigraph bound would be invalid"
                );
                let local = b.add_col(artifacts.unweighted_cost[j], lp.lower[j], lp.upper[j]);
                local_of.insert(j, local);
                block_cols.push((j, local));
            }
        }
        for (i, block) in artifacts.row_block.iter().enumerate() {
            if *block != Some((p, s)) {
                continue;
            }
            for &(j, _) in &row_entries[i] {
                if artifacts.col_block[j].is_none() && !local_of.contains_key(&j) {
                    complicating.push(j);
                    local_of.insert(j, usize::MAX);
                }
            }
        }
        complicating.sort_unstable();
        for &j in &complicating {
            let local = b.add_col(0.0, f64::NEG_INFINITY, f64::INFINITY);
            local_of.insert(j, local);
        }

        let mut elastic_cols: Vec<usize> = Vec::new();
        for (i, block) in artifacts.row_block.iter().enumerate() {
            if *block != Some((p, s)) {
                continue;
            }
            let mut entries: Vec<(usize, f64)> = row_entries[i]
                .iter()
                .map(|&(j, v)| (local_of[&j], v))
                .collect();
            let tag = &artifacts.row_tags[i];
            let elastic = matches!(tag.equation, "7a" | "7b")
                || (tag.equation == "3c" && tag.detail.starts_with("emis:"));
            if elastic {
                // Relieving slacks: raise the left side of >= rows, lower
                // it for <= rows, both ways for equalities.
                if lp.senses[i] != RowSense::Le {
                    let up = b.add_col(options.elastic_penalty, 0.0, f64::INFINITY);
                    entries.push((up, 1.0));
                    elastic_cols.push(up);
                }
                if lp.senses[i] != RowSense::Ge {
                    let down = b.add_col(options.elastic_penalty, 0.0, f64::INFINITY);
                    entries.push((down, -1.0));
                    elastic_cols.push(down);
                }
            }
            b.add_row(lp.senses[i], lp.rhs[i], &entries);
        }

        let mut fixing_rows = Vec::new();
        for &j in &complicating {
            let row = b.add_row(RowSense::Eq, 0.0, &[(local_of[&j], 1.0)]);
            fixing_rows.push(row);
        }

        let sub_lp = b.build();
        sub_lp.validate()?;
        let solver = Simplex::new(&sub_lp, options.lp.clone());
        subs.push(SubProblem {
            id,
            block: (p, s),
            probability: artifacts.probabilities[p][s],
            label: artifacts.block_labels[p][s].clone(),
            complicating,
            fixing_rows,
            block_cols,
            lp: sub_lp,
            solver,
            elastic_cols,
            last_primal: Vec::new(),
        });
    }
    subs.sort_by_key(|s| s.id);

    let mut census = ComplicatingCensus::default();
    let mut seen: std::collections::BTreeSet<usize> = std::collections::BTreeSet::new();
    for sub in &subs {
        for &j in &sub.complicating {
            if !seen.insert(j) {
                continue;
            }
            match artifacts.index.key(j) {
                VarKey::StoreBoundary { .. } => census.seasonal_levels += 1,
                VarKey::StoreDeltaMulti { .. } => census.multi_year_deltas += 1,
                VarKey::Emission { .. } => census.emissions += 1,
                _ => census.capacities += 1,
            }
            census.total += 1;
        }
    }
    info!(
        "decomposed into {} subs; complicating: {} capacities, {} boundary levels, {} multi-year deltas, {} emissions",
        subs.len(),
        census.capacities,
        census.seasonal_levels,
        census.multi_year_deltas,
        census.emissions
    );

    Ok(Decomposition {
        artifacts,
        top: TopProblem {
            base: top_builder,
            base_row_count,
            first_cols,
            orig_to_top,
            phi_offset,
            cuts: Vec::new(),
            lower,
            upper,
        },
        subs,
        census,
        options,
    })
}

/// The split covers every extensive-form row exactly once (fixing rows
/// excluded).
pub fn equation_equivalent(decomposition: &Decomposition) -> bool {
    let total_rows = decomposition.artifacts.lp.num_rows;
    let top_rows = decomposition.top.base_row_count;
    let sub_rows: usize = decomposition
        .subs
        .iter()
        .map(|s| s.lp.num_rows - s.fixing_rows.len())
        .sum();
    top_rows + sub_rows == total_rows
}

impl Decomposition {
    pub fn options(&self) -> &BendersOptions {
        &self.options
    }

    pub fn first_stage_cost_pub(&self, proposal: &[f64]) -> f64 {
        self.first_stage_cost(proposal)
    }

    pub fn artifacts_key(&self, col: usize) -> &crate::program::VarKey {
        self.artifacts.index.key(col)
    }

    fn first_stage_cost(&self, proposal: &[f64]) -> f64 {
        self.top
            .first_cols
            .iter()
            .enumerate()
            .map(|(t, &j)| self.artifacts.lp.objective[j] * proposal[t])
            .sum()
    }

    /// Solve every sub at a proposal; merge is in sub-id order, so results
    /// do not depend on worker scheduling.
    fn evaluate_subs(&mut self, proposal: &[f64]) -> Result<Vec<(f64, Vec<f64>)>, CoreError> {
        let per_sub_values: Vec<Vec<f64>> = self
            .subs
            .iter()
            .map(|sub| {
                sub.complicating
                    .iter()
                    .map(|orig| proposal[self.top.orig_to_top[orig]])
                    .collect()
            })
            .collect();

        let workers = self.options.workers.max(1).min(self.subs.len().max(1));
        if workers <= 1 {
            let mut out = Vec::with_capacity(self.subs.len());
            for (sub, values) in self.subs.iter_mut().zip(&per_sub_values) {
                out.push(sub.solve(values)?);
            }
            return Ok(out);
        }

        let next = AtomicUsize::new(0);
        let results: Vec<Mutex<Option<Result<(f64, Vec<f64>), CoreError>>>> =
            (0..self.subs.len()).map(|_| Mutex::new(None)).collect();
        let work: Vec<Mutex<&mut SubProblem>> = self.subs.iter_mut().map(Mutex::new).collect();
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let k = next.fetch_add(1, Ordering::SeqCst);
                    if k >= work.len() {
                        break;
                    }
                    let result = work[k].lock().unwrap().solve(&per_sub_values[k]);
                    *results[k].lock().unwrap() = Some(result);
                });
            }
        });
        results
            .into_iter()
            .map(|slot| slot.into_inner().unwrap().expect("worker stored a result"))
            .collect()
    }

    /// Run the cutting-plane loop until the gap target, the iteration
    /// limit, or a stall.
    pub fn iterate(
        &mut self,
        system: &EnergySystem,
        flags: &BuildFlags,
    ) -> Result<(PlanSolution, ConvergenceReport), CoreError> {
        let t0 = std::time::Instant::now();
        let mut lower_bound = f64::NEG_INFINITY;
        let mut upper_bound = f64::INFINITY;
        let mut incumbent: Option<Vec<f64>> = None;
        let mut incumbent_sub_primals: Vec<Vec<f64>> = Vec::new();
        let mut radius = self.options.initial_radius;
        let mut records: Vec<IterationRecord> = Vec::new();
        let mut cuts_added = 0usize;
        let mut cuts_dropped = 0usize;
        let mut best_gap = f64::INFINITY;
        let mut stall = 0usize;
        let mut status = ConvergenceStatus::IterationLimit;

        for iteration in 0..self.options.max_iterations {
            // Unrestricted top problem for a valid global lower bound.
            let top_lp = self.top.build_lp(None);
            let top_sol = boreas_lp::solve_lp(&top_lp, &self.options.lp)?;
            if top_sol.status != Status::Optimal {
                return Err(CoreError::StatusNotOptimal(top_sol.status));
            }
            lower_bound = lower_bound.max(top_sol.objective);

            // Proposal, possibly restricted to the trust region.
            let proposal: Vec<f64> = match (&incumbent, self.options.stabilization) {
                (Some(center), true) if radius.is_finite() => {
                    let tr_lp = self.top.build_lp(Some((center.as_slice(), radius)));
                    let tr_sol = boreas_lp::solve_lp(&tr_lp, &self.options.lp)?;
                    if tr_sol.status != Status::Optimal {
                        return Err(CoreError::StatusNotOptimal(tr_sol.status));
                    }
                    tr_sol.primal[..self.top.first_cols.len()].to_vec()
                }
                _ => top_sol.primal[..self.top.first_cols.len()].to_vec(),
            };

            let evaluations = self.evaluate_subs(&proposal)?;
            let mut true_cost = self.first_stage_cost(&proposal);
            for (sub, (phi, _)) in self.subs.iter().zip(&evaluations) {
                true_cost += sub.probability * phi;
            }

            let serious = !upper_bound.is_finite()
                || upper_bound - true_cost > 0.01 * (upper_bound - lower_bound).max(0.0);
            if true_cost < upper_bound {
                upper_bound = true_cost;
                incumbent = Some(proposal.clone());
                incumbent_sub_primals = self.subs.iter().map(|s| s.last_primal.clone()).collect();
            }
            if self.options.stabilization {
                radius = if serious {
                    radius * 2.0
                } else {
                    (radius * 0.5).max(1e-4)
                };
            }

            for (sub, (phi, grad)) in self.subs.iter().zip(&evaluations) {
                let mut rhs = *phi;
                let mut coefficients = Vec::with_capacity(grad.len());
                for (&orig, &lambda) in sub.complicating.iter().zip(grad.iter()) {
                    coefficients.push((orig, lambda));
                    rhs -= lambda * proposal[self.top.orig_to_top[&orig]];
                }
                self.top.cuts.push(Cut {
                    sub_id: sub.id,
                    iteration,
                    coefficients,
                    rhs,
                    objective: *phi,
                    inactive_streak: 0,
                });
                cuts_added += 1;
            }

            // Age cuts against the unrestricted top solution: a cut with a
            // zero dual was not supporting the bound this iteration. The
            // newest cuts are not in `top_lp` yet and keep streak zero.
            let cuts_in_lp = self.top.cuts.len() - self.subs.len();
            for (k, cut) in self.top.cuts.iter_mut().take(cuts_in_lp).enumerate() {
                let dual = top_sol.duals[self.top.base_row_count + k];
                if dual.abs() <= 1e-12 {
                    cut.inactive_streak += 1;
                } else {
                    cut.inactive_streak = 0;
                }
            }
            let before = self.top.cuts.len();
            let age_limit = self.options.cut_age_limit;
            self.top.cuts.retain(|c| c.inactive_streak < age_limit);
            cuts_dropped += before - self.top.cuts.len();

            let gap = (upper_bound - lower_bound) / upper_bound.abs().max(1e-9);
            records.push(IterationRecord {
                iteration,
                lower_bound,
                upper_bound,
                gap,
                radius: if self.options.stabilization {
                    radius
                } else {
                    f64::INFINITY
                },
                seconds: t0.elapsed().as_secs_f64(),
            });
            debug!("iter {iteration}: lb {lower_bound:.6e} ub {upper_bound:.6e} gap {gap:.5}");

            if gap <= self.options.gap_target {
                status = ConvergenceStatus::Converged;
                break;
            }
            if gap < best_gap - 1e-12 {
                best_gap = gap;
                stall = 0;
            } else {
                stall += 1;
                if stall >= self.options.stall_window {
                    status = ConvergenceStatus::Stalled;
                    break;
                }
            }
        }

        let incumbent = incumbent.ok_or_else(|| {
            CoreError::Infeasible("no incumbent; max_iterations must be at least 1".into())
        })?;

        for (sub, primal) in self.subs.iter().zip(&incumbent_sub_primals) {
            let usage = sub.elastic_usage(primal);
            if usage > 1e-6 {
                warn!(
                    "sub {} uses {usage:.3e} MWh of elastic recourse at the incumbent",
                    sub.id
                );
            }
        }

        // Assemble an extensive-form primal vector for extraction.
        let n = self.artifacts.lp.num_cols;
        let mut primal = vec![0.0; n];
        for (t, &j) in self.top.first_cols.iter().enumerate() {
            primal[j] = incumbent[t];
        }
        for (sub, sub_primal) in self.subs.iter().zip(&incumbent_sub_primals) {
            for &(orig, local) in &sub.block_cols {
                primal[orig] = sub_primal[local];
            }
        }
        let synthetic = LpSolution {
            status: Status::Optimal,
            primal,
            duals: vec![0.0; self.artifacts.lp.num_rows],
            reduced_costs: vec![0.0; n],
            objective: upper_bound,
            iterations: records.len(),
        };
        let plan = extract_solution(system, &self.artifacts, &synthetic, flags)?;

        let final_gap = records.last().map(|r| r.gap).unwrap_or(f64::INFINITY);
        Ok((
            plan,
            ConvergenceReport {
                iterations: records,
                status,
                final_gap,
                cuts_added,
                cuts_dropped,
            },
        ))
    }
}

/// Serialize a convergence report as the `iter,lb,ub,gap,radius,seconds`
/// CSV. Wall-clock seconds are only written when `timing` is set, keeping
/// default outputs byte-reproducible.
pub fn report_to_csv(report: &ConvergenceReport, timing: bool) -> String {
    let mut out = String::from("iter,lb,ub,gap,radius,seconds\n");
    for r in &report.iterations {
        let seconds = if timing { r.seconds } else { 0.0 };
        out.push_str(&format!(
            "{},{},{},{},{},{:.3}\n",
            r.iteration, r.lower_bound, r.upper_bound, r.gap, r.radius, seconds
        ));
    }
    out
}
