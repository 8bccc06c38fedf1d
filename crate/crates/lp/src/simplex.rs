//! Two-phase revised simplex for bounded-variable LPs.
//!
//! Rows are turned into equalities with one logical (slack) column each, so
//! the working problem is `min c'x  s.t. Ax = b, l <= x <= u` over
//! structural plus logical columns. Phase 1 minimizes the total bound
//! violation of the basic variables (composite objective, no artificials),
//! which also gives warm starts after bound or rhs changes. Phase 2 prices
//! with Dantzig rule, a Harris-style two-pass ratio test, and falls back to
//! Bland's rule after a run of non-improving pivots.

use crate::lu::{btran_etas, ftran_etas, Eta, Factor};
use crate::problem::{RowSense, SparseLp};
use crate::{LpError, LpSolution, Status};
use log::{debug, trace};

/// Solver tolerances and limits.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Primal feasibility tolerance on bound violations.
    pub feas_tol: f64,
    /// Dual feasibility tolerance on reduced costs.
    pub opt_tol: f64,
    /// Harris ratio-test bound relaxation.
    pub ratio_delta: f64,
    /// Refactorize the basis after this many eta updates.
    pub refactor_every: usize,
    /// Engage Bland's rule after this many non-improving pivots.
    pub bland_after: usize,
    /// Hard pivot limit; `None` scales with the problem size.
    pub max_iterations: Option<usize>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            feas_tol: 1e-7,
            opt_tol: 1e-7,
            ratio_delta: 1e-9,
            refactor_every: 100,
            bland_after: 1000,
            max_iterations: None,
        }
    }
}

/// Solve an LP from scratch. The integrality mask must be all-false; use
/// [`crate::solve_mip`] for problems with integer columns.
pub fn solve_lp(lp: &SparseLp, options: &SolveOptions) -> Result<LpSolution, LpError> {
    lp.validate()?;
    if lp.has_integral() {
        return Err(LpError::InvalidProblem(
            "integrality mask set; use solve_mip".into(),
        ));
    }
    let mut solver = Simplex::new(lp, options.clone());
    solver.solve()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarStatus {
    Basic(usize),
    AtLower,
    AtUpper,
    /// Nonbasic free variable pinned at zero.
    Free,
}

/// Reusable simplex engine. Keeps the basis between solves so that small
/// right-hand-side or bound updates resolve quickly.
pub struct Simplex {
    opts: SolveOptions,
    m: usize,
    n_struct: usize,
    n_total: usize,
    // Working matrix in CSC (structural columns scaled, then logicals).
    col_ptr: Vec<usize>,
    row_ind: Vec<usize>,
    values: Vec<f64>,
    // Row-major copy for pivot-row extraction.
    csr_ptr: Vec<usize>,
    csr_ind: Vec<usize>,
    csr_val: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    row_scale: Vec<f64>,
    col_scale: Vec<f64>,
    /// Per-variable feasibility tolerance in scaled units, equivalent to
    /// `feas_tol` in original units.
    feas_scaled: Vec<f64>,
    /// Scaled-to-original conversion per variable (column scale for
    /// structurals, inverse row scale for logicals).
    unit_weight: Vec<f64>,
    // Basis state.
    basis: Vec<usize>,
    status: Vec<VarStatus>,
    xval: Vec<f64>,
    factor: Factor,
    etas: Vec<Eta>,
    has_basis: bool,
    // Reduced costs for the current phase.
    dj: Vec<f64>,
    iterations: usize,
    // Scratch buffers.
    work_col: Vec<f64>,
    work_row: Vec<f64>,
    alpha: Vec<f64>,
    alpha_touched: Vec<usize>,
}

const INF: f64 = f64::INFINITY;

impl Simplex {
    pub fn new(lp: &SparseLp, opts: SolveOptions) -> Simplex {
        let m = lp.num_rows;
        let n = lp.num_cols;
        let n_total = n + m;

        // Geometric equilibration over the structural matrix, scales
        // rounded to powers of two so scaling is exactly invertible.
        let (row_scale, col_scale) = equilibrate(lp);

        let mut col_ptr = Vec::with_capacity(n_total + 1);
        let mut row_ind = Vec::with_capacity(lp.num_nonzeros() + m);
        let mut values = Vec::with_capacity(lp.num_nonzeros() + m);
        col_ptr.push(0);
        for j in 0..n {
            for (i, v) in lp.col_iter(j) {
                row_ind.push(i);
                values.push(v * row_scale[i] * col_scale[j]);
            }
            col_ptr.push(row_ind.len());
        }
        for i in 0..m {
            row_ind.push(i);
            values.push(1.0);
            col_ptr.push(row_ind.len());
        }

        // CSR mirror.
        let mut csr_ptr = vec![0usize; m + 1];
        for &i in &row_ind {
            csr_ptr[i + 1] += 1;
        }
        for i in 0..m {
            csr_ptr[i + 1] += csr_ptr[i];
        }
        let mut csr_ind = vec![0usize; row_ind.len()];
        let mut csr_val = vec![0.0f64; row_ind.len()];
        let mut fill = csr_ptr.clone();
        for j in 0..n_total {
            for k in col_ptr[j]..col_ptr[j + 1] {
                let i = row_ind[k];
                csr_ind[fill[i]] = j;
                csr_val[fill[i]] = values[k];
                fill[i] += 1;
            }
        }

        let mut cost = vec![0.0; n_total];
        let mut lower = vec![0.0; n_total];
        let mut upper = vec![0.0; n_total];
        for j in 0..n {
            cost[j] = lp.objective[j] * col_scale[j];
            lower[j] = lp.lower[j] / col_scale[j];
            upper[j] = lp.upper[j] / col_scale[j];
        }
        for i in 0..m {
            let j = n + i;
            let (lo, up) = match lp.senses[i] {
                RowSense::Le => (0.0, INF),
                RowSense::Ge => (-INF, 0.0),
                RowSense::Eq => (0.0, 0.0),
            };
            lower[j] = lo;
            upper[j] = up;
        }
        let rhs: Vec<f64> = (0..m).map(|i| lp.rhs[i] * row_scale[i]).collect();

        let mut unit_weight = vec![1.0; n_total];
        let mut feas_scaled = vec![0.0; n_total];
        for j in 0..n {
            unit_weight[j] = col_scale[j];
            feas_scaled[j] = opts.feas_tol / col_scale[j];
        }
        for i in 0..m {
            unit_weight[n + i] = 1.0 / row_scale[i];
            feas_scaled[n + i] = opts.feas_tol * row_scale[i];
        }

        Simplex {
            opts,
            m,
            n_struct: n,
            n_total,
            col_ptr,
            row_ind,
            values,
            csr_ptr,
            csr_ind,
            csr_val,
            cost,
            lower,
            upper,
            rhs,
            row_scale,
            col_scale,
            feas_scaled,
            unit_weight,
            basis: Vec::new(),
            status: Vec::new(),
            xval: vec![0.0; n_total],
            factor: Factor::new(),
            etas: Vec::new(),
            has_basis: false,
            dj: vec![0.0; n_total],
            iterations: 0,
            work_col: vec![0.0; m],
            work_row: vec![0.0; m.max(1)],
            alpha: vec![0.0; n_total],
            alpha_touched: Vec::new(),
        }
    }

    /// Replace the right-hand side of one row, keeping the basis.
    pub fn set_rhs(&mut self, row: usize, value: f64) {
        self.rhs[row] = value * self.row_scale[row];
    }

    /// Replace the bounds of one structural column, keeping the basis.
    pub fn set_col_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        assert!(col < self.n_struct);
        self.lower[col] = lower / self.col_scale[col];
        self.upper[col] = upper / self.col_scale[col];
    }

    /// Replace the objective coefficient of one structural column.
    pub fn set_cost(&mut self, col: usize, cost: f64) {
        assert!(col < self.n_struct);
        self.cost[col] = cost * self.col_scale[col];
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Solve from the current state; uses the previous basis when present.
    pub fn solve(&mut self) -> Result<LpSolution, LpError> {
        let iter_limit = self
            .opts
            .max_iterations
            .unwrap_or(50_000 + 40 * (self.m + self.n_total));

        if !self.has_basis {
            self.initial_basis();
        } else {
            // Warm start: nonbasic values may be stale after bound changes.
            for j in 0..self.n_total {
                match self.status[j] {
                    VarStatus::AtLower => {
                        if self.lower[j].is_finite() {
                            self.xval[j] = self.lower[j];
                        } else {
                            self.status[j] = VarStatus::Free;
                            self.xval[j] = 0.0;
                        }
                    }
                    VarStatus::AtUpper => {
                        if self.upper[j].is_finite() {
                            self.xval[j] = self.upper[j];
                        } else {
                            self.status[j] = VarStatus::Free;
                            self.xval[j] = 0.0;
                        }
                    }
                    VarStatus::Free => {
                        self.xval[j] = 0.0;
                    }
                    VarStatus::Basic(_) => {}
                }
            }
        }
        self.refactorize()?;

        let mut phase1_iters = 0usize;
        loop {
            // Phase 1 until primal feasible.
            let status = self.run_phase(true, iter_limit)?;
            match status {
                PhaseOutcome::Feasible => {}
                PhaseOutcome::ProvenInfeasible => {
                    return Ok(self.extract(Status::Infeasible));
                }
                PhaseOutcome::IterationLimit => {
                    return Ok(self.extract(Status::IterationLimit));
                }
                PhaseOutcome::Unbounded => {
                    return Err(LpError::NumericalBreakdown(
                        "phase 1 reported an unbounded ray".into(),
                    ));
                }
            }
            // Phase 2 on the true objective.
            let status = self.run_phase(false, iter_limit)?;
            match status {
                PhaseOutcome::Feasible => {
                    // Optimal, unless refreshed feasibility drifted.
                    if self.total_infeasibility() > self.feas_threshold() {
                        phase1_iters += 1;
                        if phase1_iters > 5 {
                            return Err(LpError::NumericalBreakdown(
                                "feasibility could not be restored".into(),
                            ));
                        }
                        continue;
                    }
                    return Ok(self.extract(Status::Optimal));
                }
                PhaseOutcome::Unbounded => {
                    return Ok(self.extract(Status::Unbounded));
                }
                PhaseOutcome::IterationLimit => {
                    return Ok(self.extract(Status::IterationLimit));
                }
                PhaseOutcome::ProvenInfeasible => unreachable!(),
            }
        }
    }

    fn feas_threshold(&self) -> f64 {
        let bscale = (0..self.m).fold(1.0f64, |a, i| {
            a.max((self.rhs[i] / self.row_scale[i]).abs())
        });
        self.opts.feas_tol * bscale * 10.0
    }

    fn initial_basis(&mut self) {
        self.basis = (0..self.m).map(|i| self.n_struct + i).collect();
        self.status = (0..self.n_total)
            .map(|j| {
                if j >= self.n_struct {
                    VarStatus::Basic(j - self.n_struct)
                } else {
                    nonbasic_home(self.lower[j], self.upper[j])
                }
            })
            .collect();
        for j in 0..self.n_total {
            self.xval[j] = match self.status[j] {
                VarStatus::AtLower => self.lower[j],
                VarStatus::AtUpper => self.upper[j],
                _ => 0.0,
            };
        }
        self.has_basis = true;
    }

    /// Recompute the factorization and basic values from scratch.
    fn refactorize(&mut self) -> Result<(), LpError> {
        let report = self
            .factor
            .factorize(self.m, &self.col_ptr, &self.row_ind, &self.values, &self.basis);
        if !report.is_ok() {
            // Basis repair: dependent columns leave, slacks of uncovered
            // rows enter in their place.
            debug!(
                "basis repair: {} dependent columns",
                report.failed_slots.len()
            );
            for (&slot, &row) in report.failed_slots.iter().zip(&report.unpivoted_rows) {
                let out_var = self.basis[slot];
                self.status[out_var] = nonbasic_home(self.lower[out_var], self.upper[out_var]);
                self.xval[out_var] = match self.status[out_var] {
                    VarStatus::AtLower => self.lower[out_var],
                    VarStatus::AtUpper => self.upper[out_var],
                    _ => 0.0,
                };
                let slack = self.n_struct + row;
                self.basis[slot] = slack;
                self.status[slack] = VarStatus::Basic(slot);
            }
            let report2 = self.factor.factorize(
                self.m,
                &self.col_ptr,
                &self.row_ind,
                &self.values,
                &self.basis,
            );
            if !report2.is_ok() {
                return Err(LpError::NumericalBreakdown(
                    "basis repair failed; matrix is structurally singular".into(),
                ));
            }
        }
        self.etas.clear();
        trace!("refactorized, factor nnz {}", self.factor.nnz());
        self.recompute_basic_values();
        Ok(())
    }

    fn recompute_basic_values(&mut self) {
        let mut work = std::mem::take(&mut self.work_col);
        work.copy_from_slice(&self.rhs);
        // Subtract the nonbasic contribution.
        for j in 0..self.n_total {
            if !matches!(self.status[j], VarStatus::Basic(_)) {
                let xj = self.xval[j];
                if xj != 0.0 {
                    for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                        work[self.row_ind[k]] -= self.values[k] * xj;
                    }
                }
            }
        }
        self.factor.ftran(&mut work);
        ftran_etas(&self.etas, &mut work);
        for slot in 0..self.m {
            self.xval[self.basis[slot]] = work[slot];
        }
        work.iter_mut().for_each(|v| *v = 0.0);
        self.work_col = work;
    }

    /// Total bound violation of the basic variables in original units.
    fn total_infeasibility(&self) -> f64 {
        let mut total = 0.0;
        for slot in 0..self.m {
            let j = self.basis[slot];
            let x = self.xval[j];
            let viol = if x < self.lower[j] {
                self.lower[j] - x
            } else if x > self.upper[j] {
                x - self.upper[j]
            } else {
                0.0
            };
            total += viol * self.unit_weight[j];
        }
        total
    }

    /// Phase-1 cost on a basic variable: negative below lower (an increase
    /// reduces the violation), positive above upper.
    fn phase1_cost(&self, j: usize) -> f64 {
        let x = self.xval[j];
        if x < self.lower[j] - self.feas_scaled[j] {
            -1.0
        } else if x > self.upper[j] + self.feas_scaled[j] {
            1.0
        } else {
            0.0
        }
    }

    /// Recompute reduced costs for the requested phase.
    fn refresh_reduced_costs(&mut self, phase1: bool) {
        let mut pi = std::mem::take(&mut self.work_col);
        pi.iter_mut().for_each(|v| *v = 0.0);
        for slot in 0..self.m {
            let j = self.basis[slot];
            pi[slot] = if phase1 {
                self.phase1_cost(j)
            } else {
                self.cost[j]
            };
        }
        btran_etas(&self.etas, &mut pi);
        self.factor.btran(&mut pi);
        for j in 0..self.n_total {
            if matches!(self.status[j], VarStatus::Basic(_)) {
                self.dj[j] = 0.0;
                continue;
            }
            let base = if phase1 { 0.0 } else { self.cost[j] };
            let mut d = base;
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                d -= self.values[k] * pi[self.row_ind[k]];
            }
            self.dj[j] = d;
        }
        pi.iter_mut().for_each(|v| *v = 0.0);
        self.work_col = pi;
    }

    /// Dantzig pricing. Returns the entering column and its direction
    /// (+1 increase, -1 decrease), or `None` at phase optimality.
    fn price(&self, bland: bool) -> Option<(usize, f64)> {
        let tol = self.opts.opt_tol;
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n_total {
            let (dir, viol) = match self.status[j] {
                VarStatus::Basic(_) => continue,
                VarStatus::AtLower => {
                    if self.lower[j] == self.upper[j] {
                        continue;
                    }
                    (1.0, -self.dj[j])
                }
                VarStatus::AtUpper => {
                    if self.lower[j] == self.upper[j] {
                        continue;
                    }
                    (-1.0, self.dj[j])
                }
                VarStatus::Free => {
                    if self.dj[j] > 0.0 {
                        (-1.0, self.dj[j])
                    } else {
                        (1.0, -self.dj[j])
                    }
                }
            };
            if viol > tol {
                if bland {
                    return Some((j, dir));
                }
                match best {
                    Some((_, _, v)) if v >= viol => {}
                    _ => best = Some((j, dir, viol)),
                }
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    /// Solve `B z = a_q`; result lives in slot space in `self.work_col`.
    fn ftran_column(&mut self, q: usize) {
        let mut work = std::mem::take(&mut self.work_col);
        work.iter_mut().for_each(|v| *v = 0.0);
        for k in self.col_ptr[q]..self.col_ptr[q + 1] {
            work[self.row_ind[k]] = self.values[k];
        }
        self.factor.ftran(&mut work);
        ftran_etas(&self.etas, &mut work);
        self.work_col = work;
    }

    /// Ratio test along the entering direction.
    ///
    /// `dir` is +1 when the entering variable increases. Returns the step
    /// length and blocking slot, `None` for a bound flip of the entering
    /// variable, or `Unbounded`.
    fn ratio_test(&self, q: usize, dir: f64, phase1: bool, bland: bool) -> RatioOutcome {
        let z = &self.work_col;
        let delta = self.opts.ratio_delta;

        // The entering variable's own range.
        let own_range = if self.lower[q].is_finite() && self.upper[q].is_finite() {
            self.upper[q] - self.lower[q]
        } else {
            INF
        };

        // Collect blocking candidates: (theta, slot, |z|).
        // Basic value moves by -dir * z_i * t.
        let mut theta_rel = own_range + delta;
        let mut candidates: Vec<(f64, usize, f64)> = Vec::new();
        for slot in 0..self.m {
            let zi = z[slot];
            if zi.abs() < 1e-11 {
                continue;
            }
            let j = self.basis[slot];
            let move_down = dir * zi > 0.0;
            let x = self.xval[j];
            let feas = self.feas_scaled[j];
            let dist = if phase1 {
                // Infeasible variables block when reaching the bound they
                // violate; feasible ones block at the bound ahead.
                if x < self.lower[j] - feas {
                    if move_down {
                        continue; // moves further below; slope already priced
                    }
                    self.lower[j] - x
                } else if x > self.upper[j] + feas {
                    if !move_down {
                        continue;
                    }
                    x - self.upper[j]
                } else if move_down {
                    if !self.lower[j].is_finite() {
                        continue;
                    }
                    x - self.lower[j]
                } else {
                    if !self.upper[j].is_finite() {
                        continue;
                    }
                    self.upper[j] - x
                }
            } else if move_down {
                if !self.lower[j].is_finite() {
                    continue;
                }
                x - self.lower[j]
            } else {
                if !self.upper[j].is_finite() {
                    continue;
                }
                self.upper[j] - x
            };
            let theta = (dist.max(0.0) + delta) / (dir * zi).abs();
            let theta_exact = dist.max(0.0) / (dir * zi).abs();
            candidates.push((theta_exact, slot, zi.abs()));
            if theta < theta_rel {
                theta_rel = theta;
            }
        }

        if candidates.is_empty() && own_range.is_infinite() {
            return RatioOutcome::Unbounded;
        }

        if bland {
            // Exact smallest ratio; ties by smallest variable index.
            let mut best: Option<(f64, usize)> = None;
            for &(theta, slot, _) in &candidates {
                match best {
                    Some((t, s)) => {
                        if theta < t - 1e-15
                            || (theta <= t + 1e-15 && self.basis[slot] < self.basis[s])
                        {
                            best = Some((theta, slot));
                        }
                    }
                    None => best = Some((theta, slot)),
                }
            }
            return match best {
                Some((theta, slot)) if theta <= own_range => RatioOutcome::Pivot(theta, slot),
                _ => RatioOutcome::BoundFlip(own_range),
            };
        }

        // Harris pass 2: among candidates within the relaxed step, take the
        // one with the largest pivot magnitude for stability.
        let mut best: Option<(f64, usize, f64)> = None;
        for &(theta, slot, zabs) in &candidates {
            if theta <= theta_rel {
                match best {
                    Some((_, bslot, bz)) => {
                        if zabs > bz || (zabs == bz && slot < bslot) {
                            best = Some((theta, slot, zabs));
                        }
                    }
                    None => best = Some((theta, slot, zabs)),
                }
            }
        }
        match best {
            Some((theta, slot, _)) if theta <= own_range => {
                RatioOutcome::Pivot(theta.max(0.0), slot)
            }
            _ => {
                if own_range.is_infinite() {
                    RatioOutcome::Unbounded
                } else {
                    RatioOutcome::BoundFlip(own_range)
                }
            }
        }
    }

    /// Extract the pivot row `alpha = e_r' B^-1 A_N` into `self.alpha`.
    fn compute_pivot_row(&mut self, slot: usize) {
        let mut rho = std::mem::take(&mut self.work_row);
        rho.iter_mut().for_each(|v| *v = 0.0);
        rho[slot] = 1.0;
        btran_etas(&self.etas, &mut rho);
        self.factor.btran(&mut rho);

        for &j in &self.alpha_touched {
            self.alpha[j] = 0.0;
        }
        self.alpha_touched.clear();
        for i in 0..self.m {
            let r = rho[i];
            if r == 0.0 {
                continue;
            }
            for k in self.csr_ptr[i]..self.csr_ptr[i + 1] {
                let j = self.csr_ind[k];
                if self.alpha[j] == 0.0 {
                    self.alpha_touched.push(j);
                }
                self.alpha[j] += r * self.csr_val[k];
            }
            rho[i] = 0.0;
        }
        self.work_row = rho;
    }

    fn run_phase(&mut self, phase1: bool, iter_limit: usize) -> Result<PhaseOutcome, LpError> {
        self.refresh_reduced_costs(phase1);
        let mut since_refresh = 0usize;
        let mut fresh = true;
        let mut non_improving = 0usize;
        let mut last_merit = if phase1 {
            self.total_infeasibility()
        } else {
            self.objective_value()
        };

        loop {
            if phase1 && self.total_infeasibility() <= self.feas_threshold() {
                return Ok(PhaseOutcome::Feasible);
            }
            if self.iterations >= iter_limit {
                return Ok(PhaseOutcome::IterationLimit);
            }

            let bland = non_improving >= self.opts.bland_after;
            let Some((q, dir)) = self.price(bland) else {
                if !fresh {
                    // Confirm optimality with exact reduced costs.
                    self.refactorize()?;
                    self.refresh_reduced_costs(phase1);
                    since_refresh = 0;
                    fresh = true;
                    continue;
                }
                return if phase1 {
                    if self.total_infeasibility() <= self.feas_threshold() {
                        Ok(PhaseOutcome::Feasible)
                    } else {
                        Ok(PhaseOutcome::ProvenInfeasible)
                    }
                } else {
                    Ok(PhaseOutcome::Feasible)
                };
            };

            self.ftran_column(q);
            match self.ratio_test(q, dir, phase1, bland) {
                RatioOutcome::Unbounded => {
                    if !fresh {
                        // Reduced costs may have drifted since the last
                        // refactorization; confirm on a clean basis.
                        self.refactorize()?;
                        self.refresh_reduced_costs(phase1);
                        since_refresh = 0;
                        fresh = true;
                        continue;
                    }
                    return Ok(PhaseOutcome::Unbounded);
                }
                RatioOutcome::BoundFlip(range) => {
                    // Entering variable jumps to its opposite bound.
                    let step = dir * range;
                    for slot in 0..self.m {
                        let zi = self.work_col[slot];
                        if zi != 0.0 {
                            let jb = self.basis[slot];
                            self.xval[jb] -= step * zi;
                        }
                    }
                    self.xval[q] += step;
                    self.status[q] = match self.status[q] {
                        VarStatus::AtLower => VarStatus::AtUpper,
                        VarStatus::AtUpper => VarStatus::AtLower,
                        other => other,
                    };
                    self.iterations += 1;
                    fresh = false;
                    if phase1 {
                        // Basic variables may have crossed bounds, which
                        // changes the phase-1 cost vector.
                        self.refresh_reduced_costs(phase1);
                    }
                }
                RatioOutcome::Pivot(theta, slot) => {
                    self.pivot(q, dir, theta, slot, phase1)?;
                    since_refresh += 1;
                    fresh = false;
                    if since_refresh >= self.opts.refactor_every {
                        self.refactorize()?;
                        self.refresh_reduced_costs(phase1);
                        since_refresh = 0;
                        fresh = true;
                    } else if phase1 {
                        // Phase-1 costs depend on which variables are
                        // infeasible, so refresh after every pivot.
                        self.refresh_reduced_costs(phase1);
                    }
                }
            }

            let merit = if phase1 {
                self.total_infeasibility()
            } else {
                self.objective_value()
            };
            if merit < last_merit - 1e-12 * (1.0 + last_merit.abs()) {
                non_improving = 0;
            } else {
                non_improving += 1;
                if non_improving == self.opts.bland_after {
                    trace!("engaging Bland's rule after {non_improving} stalls");
                }
            }
            last_merit = merit;
        }
    }

    /// Execute a basis change: entering q moves by `dir*theta`, the basic
    /// variable in `slot` leaves at the bound it hit.
    fn pivot(
        &mut self,
        q: usize,
        dir: f64,
        theta: f64,
        slot: usize,
        phase1: bool,
    ) -> Result<(), LpError> {
        let zr = self.work_col[slot];
        if zr.abs() < 1e-11 {
            return Err(LpError::NumericalBreakdown(format!(
                "pivot element {zr:.3e} too small"
            )));
        }
        let step = dir * theta;
        let leaving = self.basis[slot];

        for s in 0..self.m {
            let zi = self.work_col[s];
            if zi != 0.0 {
                let jb = self.basis[s];
                self.xval[jb] -= step * zi;
            }
        }
        self.xval[q] += step;

        // Leaving variable settles on the bound it reached.
        let xl = self.xval[leaving];
        let to_lower = if self.lower[leaving].is_finite() && self.upper[leaving].is_finite() {
            (xl - self.lower[leaving]).abs() <= (xl - self.upper[leaving]).abs()
        } else {
            self.lower[leaving].is_finite()
        };
        if to_lower {
            self.xval[leaving] = self.lower[leaving];
            self.status[leaving] = VarStatus::AtLower;
        } else {
            self.xval[leaving] = self.upper[leaving];
            self.status[leaving] = VarStatus::AtUpper;
        }

        self.basis[slot] = q;
        self.status[q] = VarStatus::Basic(slot);

        // Update reduced costs along the pivot row (phase 2 only; phase 1
        // refreshes because its costs are state-dependent).
        if !phase1 {
            self.compute_pivot_row(slot);
            let dq = self.dj[q];
            let theta_d = dq / zr;
            for idx in 0..self.alpha_touched.len() {
                let j = self.alpha_touched[idx];
                if matches!(self.status[j], VarStatus::Basic(_)) {
                    continue;
                }
                self.dj[j] -= theta_d * self.alpha[j];
            }
            self.dj[leaving] = -theta_d;
            self.dj[q] = 0.0;
        }

        // Record the eta for subsequent solves.
        let mut col = Vec::new();
        for s in 0..self.m {
            let v = self.work_col[s];
            if s != slot && v != 0.0 {
                col.push((s, v));
            }
        }
        self.etas.push(Eta {
            slot,
            diag: zr,
            col,
        });
        self.iterations += 1;
        Ok(())
    }

    fn objective_value(&self) -> f64 {
        (0..self.n_total).map(|j| self.cost[j] * self.xval[j]).sum()
    }

    /// Max row residual `|A x - b|` of the tracked values, scaled space.
    pub fn residual_norm(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.m {
            let mut activity = 0.0;
            for k in self.csr_ptr[i]..self.csr_ptr[i + 1] {
                activity += self.csr_val[k] * self.xval[self.csr_ind[k]];
            }
            worst = worst.max((activity - self.rhs[i]).abs());
        }
        worst
    }

    /// Build the user-facing solution, undoing the scaling.
    fn extract(&mut self, status: Status) -> LpSolution {
        let residual = self.residual_norm();
        if residual > 1e-6 {
            debug!("extract with scaled row residual {residual:.3e}");
        }
        // pi = B^-T c_B with the true objective.
        let mut pi = vec![0.0; self.m];
        for slot in 0..self.m {
            pi[slot] = self.cost[self.basis[slot]];
        }
        btran_etas(&self.etas, &mut pi);
        self.factor.btran(&mut pi);

        let mut primal = vec![0.0; self.n_struct];
        for j in 0..self.n_struct {
            primal[j] = self.xval[j] * self.col_scale[j];
        }
        let mut duals = vec![0.0; self.m];
        for i in 0..self.m {
            duals[i] = pi[i] * self.row_scale[i];
        }
        let mut reduced = vec![0.0; self.n_struct];
        for j in 0..self.n_struct {
            let mut d = self.cost[j];
            for k in self.col_ptr[j]..self.col_ptr[j + 1] {
                d -= self.values[k] * pi[self.row_ind[k]];
            }
            reduced[j] = d / self.col_scale[j];
        }
        // Scaled cost times scaled value is the unscaled product.
        let objective = self.objective_value();

        LpSolution {
            status,
            primal,
            duals,
            reduced_costs: reduced,
            objective,
            iterations: self.iterations,
        }
    }
}

fn nonbasic_home(lower: f64, upper: f64) -> VarStatus {
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => {
            if lower.abs() <= upper.abs() {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            }
        }
        (true, false) => VarStatus::AtLower,
        (false, true) => VarStatus::AtUpper,
        (false, false) => VarStatus::Free,
    }
}

enum RatioOutcome {
    /// Step length and blocking basis slot.
    Pivot(f64, usize),
    /// The entering variable travels its whole range.
    BoundFlip(f64),
    Unbounded,
}

enum PhaseOutcome {
    Feasible,
    ProvenInfeasible,
    Unbounded,
    IterationLimit,
}

/// Geometric mean equilibration, scales rounded to powers of two.
fn equilibrate(lp: &SparseLp) -> (Vec<f64>, Vec<f64>) {
    let m = lp.num_rows;
    let n = lp.num_cols;
    let mut row_scale = vec![1.0f64; m];
    let mut col_scale = vec![1.0f64; n];
    if lp.num_nonzeros() == 0 {
        return (row_scale, col_scale);
    }
    for _ in 0..4 {
        let mut row_min = vec![INF; m];
        let mut row_max = vec![0.0f64; m];
        for j in 0..n {
            for (i, v) in lp.col_iter(j) {
                let a = (v * row_scale[i] * col_scale[j]).abs();
                if a > 0.0 {
                    row_min[i] = row_min[i].min(a);
                    row_max[i] = row_max[i].max(a);
                }
            }
        }
        for i in 0..m {
            if row_max[i] > 0.0 {
                let s = 1.0 / (row_min[i] * row_max[i]).sqrt();
                row_scale[i] *= round_pow2(s);
            }
        }
        let mut col_min = vec![INF; n];
        let mut col_max = vec![0.0f64; n];
        for j in 0..n {
            for (i, v) in lp.col_iter(j) {
                let a = (v * row_scale[i] * col_scale[j]).abs();
                if a > 0.0 {
                    col_min[j] = col_min[j].min(a);
                    col_max[j] = col_max[j].max(a);
                }
            }
        }
        for j in 0..n {
            if col_max[j] > 0.0 {
                let s = 1.0 / (col_min[j] * col_max[j]).sqrt();
                col_scale[j] *= round_pow2(s);
            }
        }
    }
    (row_scale, col_scale)
}

fn round_pow2(s: f64) -> f64 {
    if s <= 0.0 || !s.is_finite() {
        return 1.0;
    }
    let e = s.log2().round() as i32;
    (2.0f64).powi(e.clamp(-8, 8))
}
