use crate::problem::{RowSense, SparseLp};
use crate::LpSolution;

/// Max-norm residual report for an optimal primal/dual pair.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    /// Largest violation of `Ax {<=,=,>=} b` over all rows.
    pub primal_residual: f64,
    /// Largest bound violation over all columns.
    pub bound_residual: f64,
    /// Largest violation of `d = c - A'y` against the reported reduced costs.
    pub dual_residual: f64,
    /// Largest complementary slackness violation:
    /// `|y_i| * row_slack_i` and `|d_j| * distance-to-bound_j`.
    pub complementarity: f64,
    /// Largest wrong-signed dual or reduced cost (sign violations).
    pub dual_sign_violation: f64,
    /// `|c'x - dual objective|`.
    pub duality_gap: f64,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

impl CertificateReport {
    pub fn max_residual(&self) -> f64 {
        self.primal_residual
            .max(self.bound_residual)
            .max(self.dual_residual)
            .max(self.dual_sign_violation)
    }
}

/// Verify an `Optimal` solution against the problem data from first
/// principles: residuals, signs, complementary slackness and the duality
/// gap, all reported as max norms.
pub fn check_certificates(lp: &SparseLp, sol: &LpSolution) -> CertificateReport {
    let m = lp.num_rows;
    let n = lp.num_cols;
    assert_eq!(sol.primal.len(), n);
    assert_eq!(sol.duals.len(), m);

    // Row activities.
    let mut activity = vec![0.0f64; m];
    for j in 0..n {
        let xj = sol.primal[j];
        if xj != 0.0 {
            for (i, v) in lp.col_iter(j) {
                activity[i] += v * xj;
            }
        }
    }

    let mut primal_residual = 0.0f64;
    let mut complementarity = 0.0f64;
    let mut dual_sign = 0.0f64;
    let mut dual_objective = 0.0f64;
    for i in 0..m {
        let slack = lp.rhs[i] - activity[i];
        let viol = match lp.senses[i] {
            RowSense::Le => (-slack).max(0.0),
            RowSense::Ge => slack.max(0.0),
            RowSense::Eq => slack.abs(),
        };
        primal_residual = primal_residual.max(viol);
        let y = sol.duals[i];
        // Shadow-price convention for a minimisation problem: <= rows have
        // nonpositive duals, >= rows nonnegative.
        let sign_viol = match lp.senses[i] {
            RowSense::Le => y.max(0.0),
            RowSense::Ge => (-y).max(0.0),
            RowSense::Eq => 0.0,
        };
        dual_sign = dual_sign.max(sign_viol);
        if lp.senses[i] != RowSense::Eq {
            complementarity = complementarity.max((y * slack).abs());
        }
        dual_objective += y * lp.rhs[i];
    }

    let mut bound_residual = 0.0f64;
    let mut dual_residual = 0.0f64;
    for j in 0..n {
        let xj = sol.primal[j];
        let (lo, up) = (lp.lower[j], lp.upper[j]);
        if lo.is_finite() {
            bound_residual = bound_residual.max(lo - xj);
        }
        if up.is_finite() {
            bound_residual = bound_residual.max(xj - up);
        }

        // Recompute the reduced cost and compare with the reported one.
        let mut d = lp.objective[j];
        for (i, v) in lp.col_iter(j) {
            d -= v * sol.duals[i];
        }
        dual_residual = dual_residual.max((d - sol.reduced_costs[j]).abs());

        // Sign and complementarity of the reduced cost: d >= 0 when the
        // column sits at its lower bound, d <= 0 at its upper bound.
        let at_lower = lo.is_finite() && (xj - lo).abs() <= 1e-9 * (1.0 + lo.abs());
        let at_upper = up.is_finite() && (xj - up).abs() <= 1e-9 * (1.0 + up.abs());
        if at_lower && at_upper {
            // Fixed column: any sign is valid.
        } else if at_lower {
            dual_sign = dual_sign.max(-d);
        } else if at_upper {
            dual_sign = dual_sign.max(d);
        } else {
            complementarity =
                complementarity.max(d.abs() * interior_gap(lo, up, xj).min(1.0));
        }

        // Bound contribution to the dual objective.
        if at_lower {
            dual_objective += d * lo;
        } else if at_upper {
            dual_objective += d * up;
        }
    }

    let primal_objective: f64 = (0..n).map(|j| lp.objective[j] * sol.primal[j]).sum();

    CertificateReport {
        primal_residual,
        bound_residual,
        dual_residual,
        complementarity,
        dual_sign_violation: dual_sign,
        duality_gap: (primal_objective - dual_objective).abs(),
        primal_objective,
        dual_objective,
    }
}

fn interior_gap(lo: f64, up: f64, x: f64) -> f64 {
    let mut gap = f64::INFINITY;
    if lo.is_finite() {
        gap = gap.min(x - lo);
    }
    if up.is_finite() {
        gap = gap.min(up - x);
    }
    if gap.is_finite() {
        gap.abs()
    } else {
        1.0
    }
}
