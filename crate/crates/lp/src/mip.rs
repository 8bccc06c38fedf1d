//! Best-first branch and bound on the integral columns of a [`SparseLp`].

use crate::problem::SparseLp;
use crate::simplex::{Simplex, SolveOptions};
use crate::{LpError, LpSolution, Status};
use log::debug;
use std::cmp::Ordering;
use std::collections::BinaryHeap;

#[derive(Debug, Clone)]
pub struct MipOptions {
    pub lp: SolveOptions,
    /// Relative optimality gap at which the search stops.
    pub gap: f64,
    /// Tolerance deciding whether a relaxation value counts as integral.
    pub int_tol: f64,
    pub node_limit: usize,
}

impl Default for MipOptions {
    fn default() -> Self {
        MipOptions {
            lp: SolveOptions::default(),
            gap: 0.0,
            int_tol: 1e-6,
            node_limit: 100_000,
        }
    }
}

struct Node {
    /// LP bound inherited from the parent relaxation.
    bound: f64,
    /// Tie-break and deterministic ordering: insertion sequence number.
    seq: usize,
    /// Tightened bounds on integral columns: `(col, lower, upper)`.
    fixings: Vec<(usize, f64, f64)>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.bound == other.bound && self.seq == other.seq
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; invert for best-first (lowest bound).
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Solve a mixed binary/integer program by best-first branch and bound.
///
/// Branching is deterministic: the fractional integral column with the
/// lowest index is split, and the down-branch is enqueued first. Returns
/// the incumbent once the relative gap between it and the best open bound
/// drops to `options.gap`.
pub fn solve_mip(lp: &SparseLp, options: &MipOptions) -> Result<LpSolution, LpError> {
    solve_mip_traced(lp, options).map(|(sol, _)| sol)
}

/// Like [`solve_mip`], additionally returning the sequence of node bounds
/// in processing order (non-decreasing for the best-first strategy).
pub fn solve_mip_traced(
    lp: &SparseLp,
    options: &MipOptions,
) -> Result<(LpSolution, Vec<f64>), LpError> {
    lp.validate()?;
    let int_cols: Vec<usize> = (0..lp.num_cols).filter(|&j| lp.integral[j]).collect();
    if int_cols.is_empty() {
        return crate::simplex::solve_lp(lp, &options.lp).map(|s| (s, Vec::new()));
    }

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut seq = 0usize;
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq,
        fixings: Vec::new(),
    });

    let mut incumbent: Option<LpSolution> = None;
    let mut nodes_processed = 0usize;
    let mut iterations = 0usize;
    // Monotone global lower bound over the explored tree.
    let mut global_lb = f64::NEG_INFINITY;
    let mut bound_trace: Vec<f64> = Vec::new();

    while let Some(node) = heap.pop() {
        // The heap top is the best open bound; together with the incumbent
        // it defines the proof gap.
        let open_bound = node.bound;
        if let Some(inc) = &incumbent {
            global_lb = global_lb.max(open_bound.min(inc.objective));
            if gap_closed(inc.objective, open_bound, options.gap) {
                break;
            }
        } else {
            global_lb = global_lb.max(open_bound);
        }
        bound_trace.push(global_lb);

        nodes_processed += 1;
        if nodes_processed > options.node_limit {
            return Err(LpError::NodeLimit(options.node_limit));
        }

        // Solve the relaxation with the node's bound tightenings.
        let mut relaxed = lp.clone();
        relaxed.integral.iter_mut().for_each(|b| *b = false);
        for &(j, lo, up) in &node.fixings {
            relaxed.lower[j] = lo;
            relaxed.upper[j] = up;
        }
        let mut solver = Simplex::new(&relaxed, options.lp.clone());
        let sol = solver.solve()?;
        iterations += sol.iterations;
        match sol.status {
            Status::Infeasible => continue,
            Status::Optimal => {}
            Status::Unbounded => {
                return Err(LpError::NumericalBreakdown(
                    "unbounded relaxation in branch and bound".into(),
                ));
            }
            Status::IterationLimit => {
                return Err(LpError::NumericalBreakdown(
                    "relaxation hit the iteration limit".into(),
                ));
            }
        }

        // Prune against the incumbent.
        if let Some(inc) = &incumbent {
            if sol.objective >= inc.objective - absolute_gap(inc.objective, options.gap) {
                continue;
            }
        }

        // Find the first fractional integral column.
        let fractional = int_cols
            .iter()
            .copied()
            .find(|&j| (sol.primal[j] - sol.primal[j].round()).abs() > options.int_tol);

        match fractional {
            None => {
                let better = incumbent
                    .as_ref()
                    .map(|inc| sol.objective < inc.objective - 1e-12 * (1.0 + inc.objective.abs()))
                    .unwrap_or(true);
                if better {
                    debug!(
                        "new incumbent {:.6e} after {} nodes",
                        sol.objective, nodes_processed
                    );
                    incumbent = Some(sol);
                }
            }
            Some(j) => {
                let xj = sol.primal[j];
                let floor = xj.floor();
                let (node_lo, node_up) = node
                    .fixings
                    .iter()
                    .find(|&&(c, _, _)| c == j)
                    .map(|&(_, lo, up)| (lo, up))
                    .unwrap_or((lp.lower[j], lp.upper[j]));

                // Down branch first, then up.
                let mut down = node.fixings.clone();
                down.retain(|&(c, _, _)| c != j);
                down.push((j, node_lo, floor));
                seq += 1;
                heap.push(Node {
                    bound: sol.objective,
                    seq,
                    fixings: down,
                });

                let mut up = node.fixings;
                up.retain(|&(c, _, _)| c != j);
                up.push((j, floor + 1.0, node_up));
                seq += 1;
                heap.push(Node {
                    bound: sol.objective,
                    seq,
                    fixings: up,
                });
            }
        }
    }

    match incumbent {
        Some(mut sol) => {
            sol.iterations = iterations;
            Ok((sol, bound_trace))
        }
        None => Ok((
            LpSolution {
                status: Status::Infeasible,
                primal: vec![0.0; lp.num_cols],
                duals: vec![0.0; lp.num_rows],
                reduced_costs: vec![0.0; lp.num_cols],
                objective: f64::INFINITY,
                iterations,
            },
            bound_trace,
        )),
    }
}

fn absolute_gap(incumbent: f64, rel_gap: f64) -> f64 {
    rel_gap * incumbent.abs().max(1.0) + 1e-9 * (1.0 + incumbent.abs())
}

fn gap_closed(incumbent: f64, open_bound: f64, rel_gap: f64) -> bool {
    incumbent - open_bound <= absolute_gap(incumbent, rel_gap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{LpBuilder, RowSense};

    /// 4-item knapsack against exhaustive enumeration.
    #[test]
    fn knapsack_matches_enumeration() {
        let weights = [3.0, 4.0, 5.0, 6.0];
        let values = [4.0, 5.0, 7.0, 9.0];
        let capacity = 10.0;

        let mut b = LpBuilder::new();
        let cols: Vec<usize> = values
            .iter()
            .map(|&v| b.add_integer_col(-v, 0.0, 1.0))
            .collect();
        let entries: Vec<(usize, f64)> =
            cols.iter().zip(weights.iter()).map(|(&c, &w)| (c, w)).collect();
        b.add_row(RowSense::Le, capacity, &entries);
        let lp = b.build();

        let sol = solve_mip(&lp, &MipOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);

        let mut best = 0.0f64;
        for mask in 0u32..16 {
            let w: f64 = (0..4)
                .filter(|&k| mask & (1 << k) != 0)
                .map(|k| weights[k])
                .sum();
            if w <= capacity {
                let v: f64 = (0..4)
                    .filter(|&k| mask & (1 << k) != 0)
                    .map(|k| values[k])
                    .sum();
                best = best.max(v);
            }
        }
        assert!((sol.objective + best).abs() < 1e-9, "mip {} enum {}", sol.objective, best);
    }

    /// An integral relaxation returns without branching.
    #[test]
    fn integral_relaxation_short_circuits() {
        let mut b = LpBuilder::new();
        let x = b.add_integer_col(1.0, 0.0, 10.0);
        b.add_row(RowSense::Ge, 3.0, &[(x, 1.0)]);
        let lp = b.build();
        let sol = solve_mip(&lp, &MipOptions::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!((sol.primal[x] - 3.0).abs() < 1e-9);
    }
}
