//! Sparse LU factorization of simplex basis matrices with product-form
//! eta updates.
//!
//! Left-looking elimination (Gilbert-Peierls): each basis column is solved
//! against the partial L factor using a depth-first reach over the pivoted
//! part of the pattern, then a partial pivot is chosen among the remaining
//! rows. Columns are processed in ascending fill-in order which keeps the
//! mostly-triangular bases of staircase LPs cheap.

/// One elementary product-form update: basis slot `slot` was replaced and
/// `col` holds the solved entering column `B^-1 a` in slot space.
#[derive(Debug, Clone)]
pub struct Eta {
    pub slot: usize,
    pub diag: f64,
    /// Entries `(slot, value)` of the solved column, excluding the diagonal.
    pub col: Vec<(usize, f64)>,
}

/// LU factors of a basis matrix taken from a CSC matrix.
#[derive(Debug, Default)]
pub struct Factor {
    m: usize,
    /// `perm[k]` = original row pivoted at elimination step k.
    perm: Vec<usize>,
    /// `pinv[row]` = elimination step that pivoted `row`, or `usize::MAX`.
    pinv: Vec<usize>,
    /// `slot_of_step[k]` = basis slot eliminated at step k.
    slot_of_step: Vec<usize>,
    /// `step_of_slot[slot]` = elimination step of a basis slot.
    step_of_slot: Vec<usize>,
    // L stored by column (unit diagonal implicit), row indices are original.
    l_ptr: Vec<usize>,
    l_ind: Vec<u32>,
    l_val: Vec<f64>,
    // U stored by column in elimination-step space; diagonal kept separate.
    u_ptr: Vec<usize>,
    u_ind: Vec<u32>,
    u_val: Vec<f64>,
    u_diag: Vec<f64>,
    scratch: Vec<f64>,
}

/// Outcome of a factorization attempt.
pub struct FactorReport {
    /// Basis slots whose columns turned out linearly dependent.
    pub failed_slots: Vec<usize>,
    /// Rows left without a pivot; pair them with `failed_slots` for repair.
    pub unpivoted_rows: Vec<usize>,
}

impl FactorReport {
    pub fn is_ok(&self) -> bool {
        self.failed_slots.is_empty()
    }
}

impl Factor {
    pub fn new() -> Self {
        Self::default()
    }

    /// Factorize the basis given by `basis[slot] = column index` into the
    /// CSC matrix `(col_ptr, row_ind, values)` with `m` rows.
    pub fn factorize(
        &mut self,
        m: usize,
        col_ptr: &[usize],
        row_ind: &[usize],
        values: &[f64],
        basis: &[usize],
    ) -> FactorReport {
        assert_eq!(basis.len(), m);
        self.m = m;
        self.perm.clear();
        self.pinv.clear();
        self.pinv.resize(m, usize::MAX);
        self.slot_of_step.clear();
        self.step_of_slot.clear();
        self.step_of_slot.resize(m, usize::MAX);
        self.l_ptr.clear();
        self.l_ptr.push(0);
        self.l_ind.clear();
        self.l_val.clear();
        self.u_ptr.clear();
        self.u_ptr.push(0);
        self.u_ind.clear();
        self.u_val.clear();
        self.u_diag.clear();

        // Cheap fill heuristic: eliminate sparse columns first.
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by_key(|&s| {
            let j = basis[s];
            (col_ptr[j + 1] - col_ptr[j], s)
        });

        let mut x = vec![0.0f64; m];
        let mut reach: Vec<usize> = Vec::with_capacity(64);
        let mut touched: Vec<usize> = Vec::with_capacity(64);
        let mut dfs_stack: Vec<(usize, usize)> = Vec::with_capacity(64);
        let mut visited = vec![u32::MAX; m];
        let mut failed_slots = Vec::new();

        for (pass, &slot) in order.iter().enumerate() {
            let pass_mark = pass as u32;
            let j = basis[slot];
            reach.clear();
            touched.clear();

            // Symbolic: depth-first reach over already-pivoted columns.
            for k in col_ptr[j]..col_ptr[j + 1] {
                let row = row_ind[k];
                if visited[row] == pass_mark {
                    continue;
                }
                dfs_stack.push((row, 0));
                while let Some(&(r, next)) = dfs_stack.last() {
                    visited[r] = pass_mark;
                    let step = self.pinv[r];
                    if step == usize::MAX {
                        touched.push(r);
                        dfs_stack.pop();
                        continue;
                    }
                    let lo = self.l_ptr[step];
                    let hi = self.l_ptr[step + 1];
                    let mut cursor = next;
                    let mut pushed = false;
                    while lo + cursor < hi {
                        let child = self.l_ind[lo + cursor] as usize;
                        cursor += 1;
                        if visited[child] != pass_mark {
                            dfs_stack.last_mut().unwrap().1 = cursor;
                            dfs_stack.push((child, 0));
                            pushed = true;
                            break;
                        }
                    }
                    if !pushed {
                        // Post-order: all descendants done.
                        reach.push(step);
                        touched.push(r);
                        dfs_stack.pop();
                    }
                }
            }

            // Numeric: scatter the column and run the reach in topological
            // order (post-order already is one for this DAG).
            for k in col_ptr[j]..col_ptr[j + 1] {
                x[row_ind[k]] += values[k];
            }
            for &step in reach.iter().rev() {
                let pr = self.perm[step];
                let val = x[pr];
                if val != 0.0 {
                    for k in self.l_ptr[step]..self.l_ptr[step + 1] {
                        x[self.l_ind[k] as usize] -= self.l_val[k] * val;
                    }
                }
            }

            // Pivot among rows not yet pivoted.
            let mut pivot_row = usize::MAX;
            let mut pivot_abs = 0.0f64;
            for &r in &touched {
                if self.pinv[r] == usize::MAX {
                    let a = x[r].abs();
                    if a > pivot_abs || (a == pivot_abs && a > 0.0 && r < pivot_row) {
                        pivot_abs = a;
                        pivot_row = r;
                    }
                }
            }

            if pivot_abs <= 1e-11 {
                // Dependent column; clean workspace and record for repair.
                for &r in &touched {
                    x[r] = 0.0;
                }
                failed_slots.push(slot);
                continue;
            }

            let step = self.perm.len();
            let pivot = x[pivot_row];

            // Reach steps sorted ascending form the U column.
            reach.sort_unstable();
            for &t in &reach {
                let v = x[self.perm[t]];
                if v != 0.0 {
                    self.u_ind.push(t as u32);
                    self.u_val.push(v);
                }
            }
            self.u_ptr.push(self.u_ind.len());
            self.u_diag.push(pivot);

            for &r in &touched {
                if self.pinv[r] == usize::MAX && r != pivot_row {
                    let v = x[r];
                    if v != 0.0 {
                        self.l_ind.push(r as u32);
                        self.l_val.push(v / pivot);
                    }
                }
                x[r] = 0.0;
            }
            self.l_ptr.push(self.l_ind.len());

            self.perm.push(pivot_row);
            self.pinv[pivot_row] = step;
            self.slot_of_step.push(slot);
            self.step_of_slot[slot] = step;
        }

        let unpivoted_rows: Vec<usize> = (0..m).filter(|&r| self.pinv[r] == usize::MAX).collect();
        FactorReport {
            failed_slots,
            unpivoted_rows,
        }
    }

    /// Solve `B z = v` in place. `v` enters in row space and leaves as `z`
    /// in basis-slot space.
    pub fn ftran(&mut self, work: &mut [f64]) {
        let steps = self.perm.len();
        debug_assert_eq!(work.len(), self.m);
        // w = L^-1 v, expressed on pivot rows.
        for step in 0..steps {
            let val = work[self.perm[step]];
            if val != 0.0 {
                for k in self.l_ptr[step]..self.l_ptr[step + 1] {
                    work[self.l_ind[k] as usize] -= self.l_val[k] * val;
                }
            }
        }
        // Gather into step space, then back-substitute U y = w.
        self.scratch.clear();
        self.scratch.resize(steps, 0.0);
        let y = &mut self.scratch;
        for step in 0..steps {
            y[step] = work[self.perm[step]];
            work[self.perm[step]] = 0.0;
        }
        for step in (0..steps).rev() {
            let v = y[step];
            if v != 0.0 {
                let yv = v / self.u_diag[step];
                y[step] = yv;
                for k in self.u_ptr[step]..self.u_ptr[step + 1] {
                    y[self.u_ind[k] as usize] -= self.u_val[k] * yv;
                }
            }
        }
        // Scatter into slot space.
        for step in 0..steps {
            let v = y[step];
            if v != 0.0 {
                work[self.slot_of_step[step]] = v;
            }
        }
    }

    /// Solve `B' pi = c` in place. `c` enters in basis-slot space and leaves
    /// as `pi` in row space.
    pub fn btran(&mut self, work: &mut [f64]) {
        let steps = self.perm.len();
        debug_assert_eq!(work.len(), self.m);
        // Gather to step space and solve U' w = c.
        self.scratch.clear();
        self.scratch.resize(steps, 0.0);
        let w = &mut self.scratch;
        for step in 0..steps {
            w[step] = work[self.slot_of_step[step]];
            work[self.slot_of_step[step]] = 0.0;
        }
        for step in 0..steps {
            let mut acc = w[step];
            for k in self.u_ptr[step]..self.u_ptr[step + 1] {
                acc -= self.u_val[k] * w[self.u_ind[k] as usize];
            }
            w[step] = acc / self.u_diag[step];
        }
        // Solve L' pi = w, scattering onto pivot rows.
        for step in (0..steps).rev() {
            let mut acc = w[step];
            for k in self.l_ptr[step]..self.l_ptr[step + 1] {
                acc -= self.l_val[k] * work[self.l_ind[k] as usize];
            }
            work[self.perm[step]] = acc;
        }
    }

    pub fn nnz(&self) -> usize {
        self.l_ind.len() + self.u_ind.len() + self.u_diag.len()
    }
}

/// Apply the eta file after [`Factor::ftran`]: `work` is `B0^-1 v` in slot
/// space and becomes `B^-1 v` for the current basis.
pub fn ftran_etas(etas: &[Eta], work: &mut [f64]) {
    for eta in etas {
        let wr = work[eta.slot];
        if wr == 0.0 {
            continue;
        }
        let alpha = wr / eta.diag;
        for &(i, v) in &eta.col {
            work[i] -= alpha * v;
        }
        work[eta.slot] = alpha;
    }
}

/// Apply the transposed eta file before [`Factor::btran`].
pub fn btran_etas(etas: &[Eta], work: &mut [f64]) {
    for eta in etas.iter().rev() {
        let mut dot = 0.0;
        for &(i, v) in &eta.col {
            dot += v * work[i];
        }
        work[eta.slot] = (work[eta.slot] - dot) / eta.diag;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_csc(a: &[&[f64]]) -> (usize, Vec<usize>, Vec<usize>, Vec<f64>) {
        let m = a.len();
        let n = a[0].len();
        let mut col_ptr = vec![0usize];
        let mut row_ind = Vec::new();
        let mut values = Vec::new();
        for j in 0..n {
            for (i, row) in a.iter().enumerate() {
                if row[j] != 0.0 {
                    row_ind.push(i);
                    values.push(row[j]);
                }
            }
            col_ptr.push(row_ind.len());
        }
        (m, col_ptr, row_ind, values)
    }

    #[test]
    fn factorize_and_solve_small() {
        let a: &[&[f64]] = &[
            &[2.0, 1.0, 0.0],
            &[0.0, 3.0, 1.0],
            &[1.0, 0.0, 4.0],
        ];
        let (m, cp, ri, vv) = dense_to_csc(a);
        let mut f = Factor::new();
        let rep = f.factorize(m, &cp, &ri, &vv, &[0, 1, 2]);
        assert!(rep.is_ok());

        // Solve B z = e1 and verify against the dense inverse.
        let mut w = vec![1.0, 0.0, 0.0];
        f.ftran(&mut w);
        // B z = e1 => 2 z0 + z1 = 1, 3 z1 + z2 = 0, z0 + 4 z2 = 0
        for (i, row) in a.iter().enumerate() {
            let lhs: f64 = (0..3).map(|j| row[j] * w[j]).sum();
            let rhs = if i == 0 { 1.0 } else { 0.0 };
            assert!((lhs - rhs).abs() < 1e-12, "row {i}: {lhs} vs {rhs}");
        }

        // B' pi = c
        let c = vec![1.0, -2.0, 0.5];
        let mut pi = c.clone();
        f.btran(&mut pi);
        for j in 0..3 {
            let lhs: f64 = (0..3).map(|i| a[i][j] * pi[i]).sum();
            assert!((lhs - c[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_singular_basis() {
        let a: &[&[f64]] = &[
            &[1.0, 2.0, 0.0],
            &[2.0, 4.0, 0.0],
            &[0.0, 0.0, 1.0],
        ];
        let (m, cp, ri, vv) = dense_to_csc(a);
        let mut f = Factor::new();
        let rep = f.factorize(m, &cp, &ri, &vv, &[0, 1, 2]);
        assert_eq!(rep.failed_slots.len(), 1);
        assert_eq!(rep.unpivoted_rows.len(), 1);
    }

    #[test]
    fn eta_updates_match_refactorization() {
        // Random-ish 4x4 system, replace one column via eta and compare.
        let a: &[&[f64]] = &[
            &[4.0, 1.0, 0.0, 2.0, 1.0],
            &[0.0, 3.0, 1.0, 0.0, 2.0],
            &[1.0, 0.0, 5.0, 1.0, 0.0],
            &[0.0, 2.0, 0.0, 3.0, 1.0],
        ];
        let (m, cp, ri, vv) = dense_to_csc(a);
        let mut f = Factor::new();
        assert!(f.factorize(m, &cp, &ri, &vv, &[0, 1, 2, 3]).is_ok());

        // Entering column 4 replaces slot 1.
        let mut z = vec![0.0; m];
        for k in cp[4]..cp[5] {
            z[ri[k]] = vv[k];
        }
        f.ftran(&mut z);
        let slot = 1;
        let eta = Eta {
            slot,
            diag: z[slot],
            col: (0..m)
                .filter(|&i| i != slot && z[i] != 0.0)
                .map(|i| (i, z[i]))
                .collect(),
        };

        let mut f2 = Factor::new();
        assert!(f2.factorize(m, &cp, &ri, &vv, &[0, 4, 2, 3]).is_ok());

        let rhs = vec![1.0, -1.0, 2.0, 0.5];
        let mut via_eta = rhs.clone();
        f.ftran(&mut via_eta);
        ftran_etas(std::slice::from_ref(&eta), &mut via_eta);
        let mut direct = rhs.clone();
        f2.ftran(&mut direct);
        for i in 0..m {
            assert!((via_eta[i] - direct[i]).abs() < 1e-10);
        }

        let c = vec![0.5, 1.0, -2.0, 1.5];
        let mut via_eta_t = c.clone();
        btran_etas(std::slice::from_ref(&eta), &mut via_eta_t);
        f.btran(&mut via_eta_t);
        let mut direct_t = c.clone();
        f2.btran(&mut direct_t);
        for i in 0..m {
            assert!((via_eta_t[i] - direct_t[i]).abs() < 1e-10);
        }
    }
}
