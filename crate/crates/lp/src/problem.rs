use crate::LpError;

/// Sense of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSense {
    Le,
    Eq,
    Ge,
}

impl RowSense {
    pub fn as_str(self) -> &'static str {
        match self {
            RowSense::Le => "<=",
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
        }
    }

    pub fn parse(s: &str) -> Option<RowSense> {
        match s {
            "<=" | "L" | "le" => Some(RowSense::Le),
            "=" | "E" | "eq" => Some(RowSense::Eq),
            ">=" | "G" | "ge" => Some(RowSense::Ge),
            _ => None,
        }
    }
}

/// A linear program in compressed sparse column form.
#[derive(Debug, Clone)]
pub struct SparseLp {
    pub num_rows: usize,
    pub num_cols: usize,
    pub objective: Vec<f64>,
    /// CSC column pointers, length `num_cols + 1`.
    pub col_ptr: Vec<usize>,
    pub row_ind: Vec<usize>,
    pub values: Vec<f64>,
    pub senses: Vec<RowSense>,
    pub rhs: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Integrality mask; `true` marks a column required to be integral.
    pub integral: Vec<bool>,
}

impl SparseLp {
    /// Iterate the nonzeros of one column as `(row, value)` pairs.
    pub fn col_iter(&self, j: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.col_ptr[j];
        let hi = self.col_ptr[j + 1];
        self.row_ind[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    pub fn num_nonzeros(&self) -> usize {
        self.values.len()
    }

    pub fn has_integral(&self) -> bool {
        self.integral.iter().any(|&b| b)
    }

    /// Check structural invariants: consistent dimensions, finite matrix,
    /// objective and rhs entries, ordered bounds.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.num_cols;
        let m = self.num_rows;
        let dims_ok = self.objective.len() == n
            && self.col_ptr.len() == n + 1
            && self.lower.len() == n
            && self.upper.len() == n
            && self.integral.len() == n
            && self.senses.len() == m
            && self.rhs.len() == m
            && self.row_ind.len() == self.values.len()
            && self.col_ptr[n] == self.values.len();
        if !dims_ok {
            return Err(LpError::InvalidProblem("inconsistent dimensions".into()));
        }
        for w in self.col_ptr.windows(2) {
            if w[0] > w[1] {
                return Err(LpError::InvalidProblem("column pointers not sorted".into()));
            }
        }
        for (k, (&i, &v)) in self.row_ind.iter().zip(&self.values).enumerate() {
            if i >= m {
                return Err(LpError::InvalidProblem(format!(
                    "entry {k} references row {i} out of {m}"
                )));
            }
            if !v.is_finite() {
                return Err(LpError::InvalidProblem(format!(
                    "entry {k} has non-finite coefficient {v}"
                )));
            }
        }
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(LpError::InvalidProblem(format!(
                    "objective[{j}] is non-finite"
                )));
            }
        }
        for (i, &b) in self.rhs.iter().enumerate() {
            if !b.is_finite() {
                return Err(LpError::InvalidProblem(format!("rhs[{i}] is non-finite")));
            }
        }
        for j in 0..n {
            let (lo, up) = (self.lower[j], self.upper[j]);
            if lo.is_nan() || up.is_nan() || lo == f64::INFINITY || up == f64::NEG_INFINITY {
                return Err(LpError::InvalidProblem(format!("bounds of column {j}")));
            }
            if lo > up {
                return Err(LpError::InvalidProblem(format!(
                    "column {j} has lower {lo} > upper {up}"
                )));
            }
        }
        Ok(())
    }
}

/// Incremental builder assembling a [`SparseLp`] row by row.
#[derive(Debug, Clone, Default)]
pub struct LpBuilder {
    costs: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integral: Vec<bool>,
    rows: Vec<RowData>,
}

#[derive(Debug, Clone)]
struct RowData {
    sense: RowSense,
    rhs: f64,
    entries: Vec<(usize, f64)>,
}

impl LpBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_cols(&self) -> usize {
        self.costs.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn add_col(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        let j = self.costs.len();
        self.costs.push(cost);
        self.lower.push(lower);
        self.upper.push(upper);
        self.integral.push(false);
        j
    }

    pub fn add_integer_col(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        let j = self.add_col(cost, lower, upper);
        self.integral[j] = true;
        j
    }

    /// Add a row; duplicate column references are summed.
    pub fn add_row(&mut self, sense: RowSense, rhs: f64, entries: &[(usize, f64)]) -> usize {
        let i = self.rows.len();
        self.rows.push(RowData {
            sense,
            rhs,
            entries: entries.to_vec(),
        });
        i
    }

    pub fn set_cost(&mut self, col: usize, cost: f64) {
        self.costs[col] = cost;
    }

    pub fn add_cost(&mut self, col: usize, cost: f64) {
        self.costs[col] += cost;
    }

    pub fn set_bounds(&mut self, col: usize, lower: f64, upper: f64) {
        self.lower[col] = lower;
        self.upper[col] = upper;
    }

    pub fn build(self) -> SparseLp {
        let n = self.costs.len();
        let m = self.rows.len();
        // Accumulate per-column entry lists from the row-major input.
        let mut per_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in &row.entries {
                assert!(j < n, "row {i} references unknown column {j}");
                per_col[j].push((i, v));
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_ind = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for entries in per_col.iter_mut() {
            entries.sort_by_key(|&(i, _)| i);
            let mut k = 0;
            while k < entries.len() {
                let (i, mut v) = entries[k];
                let mut k2 = k + 1;
                while k2 < entries.len() && entries[k2].0 == i {
                    v += entries[k2].1;
                    k2 += 1;
                }
                if v != 0.0 {
                    row_ind.push(i);
                    values.push(v);
                }
                k = k2;
            }
            col_ptr.push(row_ind.len());
        }
        SparseLp {
            num_rows: m,
            num_cols: n,
            objective: self.costs,
            col_ptr,
            row_ind,
            values,
            senses: self.rows.iter().map(|r| r.sense).collect(),
            rhs: self.rows.iter().map(|r| r.rhs).collect(),
            lower: self.lower,
            upper: self.upper,
            integral: self.integral,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builder_merges_duplicate_entries() {
        let mut b = LpBuilder::new();
        let x = b.add_col(1.0, 0.0, 10.0);
        let y = b.add_col(2.0, 0.0, 10.0);
        b.add_row(RowSense::Le, 5.0, &[(x, 1.0), (y, 1.0), (x, 2.0)]);
        let lp = b.build();
        lp.validate().unwrap();
        assert_eq!(lp.num_nonzeros(), 2);
        let col: Vec<_> = lp.col_iter(x).collect();
        assert_eq!(col, vec![(0, 3.0)]);
    }

    #[test]
    fn validate_rejects_nan_coefficient() {
        let mut b = LpBuilder::new();
        let x = b.add_col(1.0, 0.0, 1.0);
        b.add_row(RowSense::Eq, 1.0, &[(x, f64::NAN)]);
        let lp = b.build();
        assert!(lp.validate().is_err());
    }

    #[test]
    fn validate_rejects_crossed_bounds() {
        let mut b = LpBuilder::new();
        b.add_col(1.0, 2.0, 1.0);
        let lp = b.build();
        assert!(lp.validate().is_err());
    }
}
