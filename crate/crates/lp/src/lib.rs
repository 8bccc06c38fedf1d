//! Sparse linear programming kernel.
//!
//! A two-phase revised simplex solver for problems in the form
//!
//! ```text
//!     min  c'x
//!     s.t. a_i'x {<=,=,>=} b_i    for every row i
//!          l <= x <= u
//! ```
//!
//! with exact basic dual values, a best-first branch-and-bound layer for
//! binary/integer columns, certificate checking for primal/dual residuals,
//! and readers/writers for a sparse triplet dump plus MPS export.
//!
//! Dual values follow the shadow-price convention: `duals[i]` is the
//! derivative of the optimal objective with respect to `rhs[i]`. For a
//! minimisation problem this means duals on `>=` rows are nonnegative and
//! duals on `<=` rows are nonpositive.

mod certify;
mod io;
mod lu;
mod mip;
mod problem;
mod simplex;

pub use certify::{check_certificates, CertificateReport};
pub use io::{read_triplet_dir, write_mps, write_triplet_dir};
pub use mip::{solve_mip, solve_mip_traced, MipOptions};
pub use problem::{LpBuilder, RowSense, SparseLp};
pub use simplex::{solve_lp, Simplex, SolveOptions};

use thiserror::Error;

/// Termination status of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Primal/dual solution of an LP or MIP.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: Status,
    /// Value per structural column.
    pub primal: Vec<f64>,
    /// Shadow price per row (see crate docs for the sign convention).
    pub duals: Vec<f64>,
    /// Reduced cost per structural column.
    pub reduced_costs: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl LpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("node limit of {0} reached in branch and bound")]
    NodeLimit(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error in {file}:{line}: {reason}")]
    Parse {
        file: String,
        line: usize,
        reason: String,
    },
}
