//! Bounded-variable primal simplex on a dense LU-factorized basis.
//!
//! Variables carry individual `[lower, upper]` bounds (upper may be
//! infinite); every row gets a logical variable so the working form is
//! `A x + y = b`. Phase 1 minimizes the total bound violation of basic
//! variables (composite objective, no artificial columns), phase 2 the
//! real cost. Dantzig pricing with a Bland fallback after a degenerate
//! stall; the basis is held as a dense LU factorization plus a short
//! product-form eta chain, refactorized periodically.
//!
//! The solver keeps its state between calls: callers may tighten or relax
//! variable bounds and re-optimize from the current basis, which is what
//! the branch-and-bound driver does at every node.

// index loops drive several parallel arrays throughout
#![allow(clippy::needless_range_loop)]

/// Pivot magnitude below which a column entry is not eligible.
const PIVOT_TOL: f64 = 1e-10;
/// Bound / feasibility tolerance.
const FEAS_TOL: f64 = 1e-9;
/// Reduced-cost optimality tolerance.
const COST_TOL: f64 = 1e-9;
/// Refactorize after this many eta updates.
const REFACTOR_EVERY: usize = 64;
/// Switch to Bland's rule after this many consecutive degenerate pivots.
const STALL_LIMIT: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Le,
    Ge,
    Eq,
}

/// A linear program over bounded variables; rows are sparse.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub rows: Vec<SparseRow>,
}

#[derive(Debug, Clone)]
pub struct SparseRow {
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

impl LinearProgram {
    pub fn new(n_vars: usize) -> Self {
        Self {
            objective: vec![0.0; n_vars],
            lower: vec![0.0; n_vars],
            upper: vec![f64::INFINITY; n_vars],
            rows: Vec::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coeffs: Vec<(usize, f64)>, kind: RowKind, rhs: f64) -> usize {
        debug_assert!(coeffs.iter().all(|&(j, _)| j < self.n_vars()));
        self.rows.push(SparseRow { coeffs, kind, rhs });
        self.rows.len() - 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    /// Structural variable values (logicals excluded).
    pub x: Vec<f64>,
    pub iterations: usize,
}

#[derive(Debug, thiserror::Error)]
pub enum LpError {
    #[error("infeasible: residual bound violation {residual:.3e} on rows {rows:?}")]
    Infeasible { residual: f64, rows: Vec<usize> },

    #[error("unbounded improving direction on variable {0}")]
    Unbounded(usize),

    #[error("iteration limit {0} exhausted")]
    IterationLimit(usize),

    #[error("basis matrix is numerically singular")]
    SingularBasis,
}

/// Dense LU factorization (PA = LU, partial pivoting) with an eta chain
/// for post-factorization pivots.
struct LuBasis {
    m: usize,
    /// Row-major packed LU: L strictly below diagonal (unit), U on/above.
    lu: Vec<f64>,
    /// Pivot row chosen at each elimination step (applied in order).
    pivots: Vec<usize>,
    /// Product-form updates applied after the LU solve.
    etas: Vec<Eta>,
}

struct Eta {
    row: usize,
    scale: Vec<f64>,
}

impl LuBasis {
    fn identity(m: usize) -> Self {
        let mut lu = vec![0.0; m * m];
        for i in 0..m {
            lu[i * m + i] = 1.0;
        }
        Self { m, lu, pivots: (0..m).collect(), etas: Vec::new() }
    }

    /// Factorize the dense row-major matrix `mat` (consumed).
    fn factorize(m: usize, mut mat: Vec<f64>) -> Result<Self, LpError> {
        let mut pivots = Vec::with_capacity(m);
        for k in 0..m {
            // partial pivoting on column k
            let mut best = k;
            let mut best_abs = mat[k * m + k].abs();
            for r in (k + 1)..m {
                let a = mat[r * m + k].abs();
                if a > best_abs {
                    best_abs = a;
                    best = r;
                }
            }
            if best_abs < PIVOT_TOL {
                return Err(LpError::SingularBasis);
            }
            if best != k {
                for c in 0..m {
                    mat.swap(k * m + c, best * m + c);
                }
            }
            pivots.push(best);
            let pivot = mat[k * m + k];
            for r in (k + 1)..m {
                let factor = mat[r * m + k] / pivot;
                mat[r * m + k] = factor;
                if factor != 0.0 {
                    let (head, tail) = mat.split_at_mut(r * m);
                    let krow = &head[k * m..k * m + m];
                    let rrow = &mut tail[..m];
                    for c in (k + 1)..m {
                        rrow[c] -= factor * krow[c];
                    }
                }
            }
        }
        Ok(Self { m, lu: mat, pivots, etas: Vec::new() })
    }

    /// Solve B x = v (in place), i.e. x = E_k ... E_1 U^-1 L^-1 P v.
    fn ftran(&self, v: &mut [f64]) {
        let m = self.m;
        for (k, &p) in self.pivots.iter().enumerate() {
            if p != k {
                v.swap(k, p);
            }
        }
        // forward: L y = v
        for i in 1..m {
            let row = &self.lu[i * m..i * m + i];
            let mut acc = 0.0;
            for (l, x) in row.iter().zip(v.iter()) {
                acc += l * x;
            }
            v[i] -= acc;
        }
        // backward: U x = y
        for i in (0..m).rev() {
            let row = &self.lu[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for c in (i + 1)..m {
                acc += row[c] * v[c];
            }
            v[i] = (v[i] - acc) / row[i];
        }
        for eta in &self.etas {
            let pivot_val = v[eta.row];
            if pivot_val != 0.0 {
                for (x, s) in v.iter_mut().zip(&eta.scale) {
                    *x += s * pivot_val;
                }
            }
        }
    }

    /// Solve B^T pi = c (in place).
    fn btran(&self, c: &mut [f64]) {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let mut acc = 0.0;
            for (x, s) in c.iter().zip(&eta.scale) {
                acc += x * s;
            }
            c[eta.row] += acc;
        }
        // U^T y = c (forward order, strided column access)
        for i in 0..m {
            let mut acc = 0.0;
            for r in 0..i {
                acc += self.lu[r * m + i] * c[r];
            }
            c[i] = (c[i] - acc) / self.lu[i * m + i];
        }
        // L^T z = y (backward order, unit diagonal)
        for i in (0..m).rev() {
            let mut acc = 0.0;
            for r in (i + 1)..m {
                acc += self.lu[r * m + i] * c[r];
            }
            c[i] -= acc;
        }
        for (k, &p) in self.pivots.iter().enumerate().rev() {
            if p != k {
                c.swap(k, p);
            }
        }
    }

    /// Record a pivot: the variable entering at `row` has FTRAN column `col`.
    fn push_eta(&mut self, row: usize, col: &[f64]) {
        let pivot = col[row];
        let mut scale: Vec<f64> = col.iter().map(|&v| -v / pivot).collect();
        scale[row] = 1.0 / pivot - 1.0;
        self.etas.push(Eta { row, scale });
    }

    fn needs_refactor(&self) -> bool {
        self.etas.len() >= REFACTOR_EVERY
    }
}

pub struct Simplex {
    n_struct: usize,
    m: usize,
    n_total: usize,
    /// Structural columns, sparse.
    cols: Vec<Vec<(usize, f64)>>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    basis: LuBasis,
    /// Basic variable per row.
    basic: Vec<usize>,
    status: Vec<VarStatus>,
    /// Values of basic variables by row position.
    xb: Vec<f64>,
    pub iterations: usize,
    iteration_limit: usize,
}

enum ColumnRef<'a> {
    Struct(&'a [(usize, f64)]),
    Logical(usize),
}

impl Simplex {
    pub fn new(lp: &LinearProgram) -> Self {
        let n_struct = lp.n_vars();
        let m = lp.rows.len();
        let n_total = n_struct + m;

        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_struct];
        let mut rhs = Vec::with_capacity(m);
        let mut lower = lp.lower.clone();
        let mut upper = lp.upper.clone();
        let mut cost = lp.objective.clone();
        for (r, row) in lp.rows.iter().enumerate() {
            for &(j, v) in &row.coeffs {
                if v != 0.0 {
                    cols[j].push((r, v));
                }
            }
            rhs.push(row.rhs);
            let (lo, hi) = match row.kind {
                RowKind::Le => (0.0, f64::INFINITY),
                RowKind::Ge => (f64::NEG_INFINITY, 0.0),
                RowKind::Eq => (0.0, 0.0),
            };
            lower.push(lo);
            upper.push(hi);
            cost.push(0.0);
        }

        let mut s = Self {
            n_struct,
            m,
            n_total,
            cols,
            cost,
            lower,
            upper,
            rhs,
            basis: LuBasis::identity(m),
            basic: (0..m).map(|r| n_struct + r).collect(),
            status: Vec::new(),
            xb: vec![0.0; m],
            iterations: 0,
            iteration_limit: 500_000,
        };
        s.status = (0..n_total).map(|j| s.default_nonbasic_status(j)).collect();
        for r in 0..m {
            s.status[n_struct + r] = VarStatus::Basic;
        }
        s.recompute_xb();
        s
    }

    /// Nonbasic status at the finite bound nearest zero.
    fn default_nonbasic_status(&self, j: usize) -> VarStatus {
        let l = self.lower[j];
        let u = self.upper[j];
        if l.is_finite() && (!u.is_finite() || l.abs() <= u.abs()) {
            VarStatus::AtLower
        } else if u.is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::AtLower // free variable, treated as 0 while nonbasic
        }
    }

    #[inline]
    fn nonbasic_value(&self, j: usize) -> f64 {
        match self.status[j] {
            VarStatus::AtLower => {
                if self.lower[j].is_finite() {
                    self.lower[j]
                } else {
                    0.0
                }
            }
            VarStatus::AtUpper => self.upper[j],
            VarStatus::Basic => unreachable!("nonbasic_value on basic var"),
        }
    }

    fn column(&self, j: usize) -> ColumnRef<'_> {
        if j < self.n_struct {
            ColumnRef::Struct(&self.cols[j])
        } else {
            ColumnRef::Logical(j - self.n_struct)
        }
    }

    fn ftran_column(&self, j: usize) -> Vec<f64> {
        let mut v = vec![0.0; self.m];
        match self.column(j) {
            ColumnRef::Struct(entries) => {
                for &(r, val) in entries {
                    v[r] = val;
                }
            }
            ColumnRef::Logical(r) => v[r] = 1.0,
        }
        self.basis.ftran(&mut v);
        v
    }

    fn dot_column(&self, j: usize, pi: &[f64]) -> f64 {
        match self.column(j) {
            ColumnRef::Struct(entries) => entries.iter().map(|&(r, v)| pi[r] * v).sum(),
            ColumnRef::Logical(r) => pi[r],
        }
    }

    fn recompute_xb(&mut self) {
        let mut r = self.rhs.clone();
        for j in 0..self.n_total {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let xj = self.nonbasic_value(j);
            if xj == 0.0 {
                continue;
            }
            match self.column(j) {
                ColumnRef::Struct(entries) => {
                    for &(row, v) in entries {
                        r[row] -= v * xj;
                    }
                }
                ColumnRef::Logical(row) => r[row] -= xj,
            }
        }
        self.basis.ftran(&mut r);
        self.xb = r;
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.m;
        let mut mat = vec![0.0; m * m];
        for (pos, &j) in self.basic.iter().enumerate() {
            match self.column(j) {
                ColumnRef::Struct(entries) => {
                    for &(r, v) in entries {
                        mat[r * m + pos] = v;
                    }
                }
                ColumnRef::Logical(r) => mat[r * m + pos] = 1.0,
            }
        }
        self.basis = LuBasis::factorize(m, mat)?;
        Ok(())
    }

    fn refactor_or_reset(&mut self) {
        if self.refactor().is_err() {
            self.reset_to_logical_basis();
        }
        self.recompute_xb();
    }

    fn reset_to_logical_basis(&mut self) {
        for j in 0..self.n_total {
            self.status[j] = if j < self.n_struct {
                self.default_nonbasic_status(j)
            } else {
                VarStatus::Basic
            };
        }
        for r in 0..self.m {
            self.basic[r] = self.n_struct + r;
        }
        self.basis = LuBasis::identity(self.m);
    }

    pub fn set_var_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        assert!(j < self.n_struct, "only structural bounds may change");
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.status[j] != VarStatus::Basic {
            self.status[j] = self.default_nonbasic_status(j);
        }
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn basis_snapshot(&self) -> Vec<VarStatus> {
        self.status.clone()
    }

    /// Restore a snapshot (must contain exactly one basic per row).
    pub fn load_basis(&mut self, status: &[VarStatus]) {
        assert_eq!(status.len(), self.n_total);
        let basics: Vec<usize> =
            (0..self.n_total).filter(|&j| status[j] == VarStatus::Basic).collect();
        assert_eq!(basics.len(), self.m, "snapshot must have exactly one basic per row");
        self.status = status.to_vec();
        // re-snap nonbasic statuses onto current bounds
        for j in 0..self.n_struct {
            if self.status[j] != VarStatus::Basic {
                self.status[j] = self.default_nonbasic_status(j);
            }
        }
        self.basic = basics;
        self.refactor_or_reset();
    }

    fn violation(&self, row: usize) -> f64 {
        let j = self.basic[row];
        let x = self.xb[row];
        if x < self.lower[j] - FEAS_TOL {
            self.lower[j] - x
        } else if x > self.upper[j] + FEAS_TOL {
            x - self.upper[j]
        } else {
            0.0
        }
    }

    fn total_infeasibility(&self) -> f64 {
        (0..self.m).map(|r| self.violation(r)).sum()
    }

    /// Optimize from the current basis: phase 1 if needed, then phase 2.
    pub fn optimize(&mut self) -> Result<LpSolution, LpError> {
        self.refactor_or_reset();

        if self.total_infeasibility() > FEAS_TOL {
            self.run_phase(true)?;
            if self.total_infeasibility() > 1e-7 {
                let rows: Vec<usize> =
                    (0..self.m).filter(|&r| self.violation(r) > 1e-7).collect();
                return Err(LpError::Infeasible { residual: self.total_infeasibility(), rows });
            }
        }
        self.run_phase(false)?;

        let x = self.values();
        Ok(LpSolution { objective: self.objective_value(&x), x, iterations: self.iterations })
    }

    pub fn values(&self) -> Vec<f64> {
        let mut x = vec![0.0; self.n_struct];
        for (j, v) in x.iter_mut().enumerate() {
            if self.status[j] != VarStatus::Basic {
                *v = self.nonbasic_value(j);
            }
        }
        for (row, &j) in self.basic.iter().enumerate() {
            if j < self.n_struct {
                x[j] = self.xb[row];
            }
        }
        x
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.cost).map(|(xv, c)| xv * c).sum()
    }

    fn run_phase(&mut self, phase1: bool) -> Result<(), LpError> {
        let mut stall = 0usize;
        loop {
            self.iterations += 1;
            if self.iterations > self.iteration_limit {
                return Err(LpError::IterationLimit(self.iteration_limit));
            }
            if self.basis.needs_refactor() {
                self.refactor()?;
                self.recompute_xb();
            }
            if phase1 && self.total_infeasibility() <= FEAS_TOL {
                return Ok(());
            }

            let mut cb = vec![0.0; self.m];
            for (r, c) in cb.iter_mut().enumerate() {
                let j = self.basic[r];
                *c = if phase1 {
                    if self.xb[r] < self.lower[j] - FEAS_TOL {
                        -1.0
                    } else if self.xb[r] > self.upper[j] + FEAS_TOL {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    self.cost[j]
                };
            }
            let mut pi = cb;
            self.basis.btran(&mut pi);

            let use_bland = stall >= STALL_LIMIT;
            let mut entering: Option<(usize, f64, bool)> = None;
            for j in 0..self.n_total {
                let st = self.status[j];
                if st == VarStatus::Basic {
                    continue;
                }
                // fixed variables cannot move
                if self.upper[j] - self.lower[j] <= 0.0 && self.lower[j].is_finite() {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let d = cj - self.dot_column(j, &pi);
                let (eligible, from_lower) = match st {
                    VarStatus::AtLower => (d < -COST_TOL, true),
                    VarStatus::AtUpper => (d > COST_TOL, false),
                    VarStatus::Basic => unreachable!(),
                };
                if !eligible {
                    continue;
                }
                if use_bland {
                    entering = Some((j, d.abs(), from_lower));
                    break;
                }
                match &entering {
                    Some((_, score, _)) if d.abs() <= *score => {}
                    _ => entering = Some((j, d.abs(), from_lower)),
                }
            }
            let Some((j_in, _, from_lower)) = entering else {
                return Ok(()); // optimal, or phase-1 stationary (checked by caller)
            };

            let col = self.ftran_column(j_in);
            let sigma = if from_lower { 1.0 } else { -1.0 };

            // ratio test: basic row r changes at rate -sigma * col[r]
            let mut t_best = f64::INFINITY;
            let mut leave: Option<(usize, VarStatus)> = None;
            let mut best_pivot = 0.0f64;
            for r in 0..self.m {
                let rate = -sigma * col[r];
                if rate.abs() < PIVOT_TOL {
                    continue;
                }
                let jb = self.basic[r];
                let xv = self.xb[r];
                let lo = self.lower[jb];
                let hi = self.upper[jb];
                // A row blocks when the move carries it onto a bound ahead
                // of it: the far bound if it is inside its range, or the
                // violated bound if the move is restoring feasibility. A
                // variable moving deeper into violation has no breakpoint.
                let (limit, hits) = if rate > 0.0 {
                    if xv < lo - FEAS_TOL {
                        (lo, VarStatus::AtLower)
                    } else if xv > hi + FEAS_TOL {
                        continue;
                    } else if hi.is_finite() {
                        (hi, VarStatus::AtUpper)
                    } else {
                        continue;
                    }
                } else if xv > hi + FEAS_TOL {
                    (hi, VarStatus::AtUpper)
                } else if xv < lo - FEAS_TOL {
                    continue;
                } else if lo.is_finite() {
                    (lo, VarStatus::AtLower)
                } else {
                    continue;
                };
                let t_r = ((limit - xv) / rate).max(0.0);
                let replace = if t_r < t_best - 1e-12 {
                    true
                } else {
                    t_r <= t_best + 1e-12 && col[r].abs() > best_pivot
                };
                if replace {
                    t_best = t_r;
                    leave = Some((r, hits));
                    best_pivot = col[r].abs();
                }
            }

            let span = self.upper[j_in] - self.lower[j_in];
            let t_flip = if span.is_finite() { span } else { f64::INFINITY };

            if t_flip <= t_best + 1e-12 && t_flip.is_finite() {
                for r in 0..self.m {
                    self.xb[r] -= sigma * col[r] * t_flip;
                }
                self.status[j_in] =
                    if from_lower { VarStatus::AtUpper } else { VarStatus::AtLower };
                stall = if t_flip < 1e-12 { stall + 1 } else { 0 };
                continue;
            }

            let Some((r_out, hit_status)) = leave else {
                return Err(LpError::Unbounded(j_in));
            };

            let t = t_best;
            for r in 0..self.m {
                self.xb[r] -= sigma * col[r] * t;
            }
            let j_out = self.basic[r_out];
            let entering_value =
                if from_lower { self.lower[j_in] + t } else { self.upper[j_in] - t };
            self.status[j_out] = hit_status;
            self.status[j_in] = VarStatus::Basic;
            self.basic[r_out] = j_in;
            self.basis.push_eta(r_out, &col);
            self.xb[r_out] = entering_value;
            stall = if t < 1e-12 { stall + 1 } else { 0 };
        }
    }
}


#[cfg(test)]
mod lu_tests {
    use super::*;

    fn mat_vec(m: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
        (0..m).map(|r| (0..m).map(|c| a[r * m + c] * x[c]).sum()).collect()
    }

    fn mat_t_vec(m: usize, a: &[f64], x: &[f64]) -> Vec<f64> {
        (0..m).map(|c| (0..m).map(|r| a[r * m + c] * x[r]).sum()).collect()
    }

    #[test]
    fn lu_solves_match_direct_matrix() {
        let m = 5;
        let mut state = 123u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        let a: Vec<f64> = (0..m * m).map(|_| next()).collect();
        let basis = LuBasis::factorize(m, a.clone()).unwrap();
        for trial in 0..5 {
            let v: Vec<f64> = (0..m).map(|_| next()).collect();
            let mut x = v.clone();
            basis.ftran(&mut x);
            let back = mat_vec(m, &a, &x);
            for (b, want) in back.iter().zip(&v) {
                assert!((b - want).abs() < 1e-9, "ftran trial {trial}");
            }
            let mut pi = v.clone();
            basis.btran(&mut pi);
            let back_t = mat_t_vec(m, &a, &pi);
            for (b, want) in back_t.iter().zip(&v) {
                assert!((b - want).abs() < 1e-9, "btran trial {trial}");
            }
        }
    }

    #[test]
    fn eta_chain_matches_refactorized_basis() {
        let m = 6;
        let mut state = 777u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        };
        // start from a random nonsingular matrix
        let mut a: Vec<f64> = (0..m * m).map(|_| next()).collect();
        for i in 0..m {
            a[i * m + i] += 3.0; // diagonal dominance
        }
        let mut basis = LuBasis::factorize(m, a.clone()).unwrap();

        // replace columns one at a time through the eta path
        for step in 0..4 {
            let r_out = (step * 2 + 1) % m;
            let new_col: Vec<f64> = (0..m).map(|_| next()).collect();
            // ftran the new column in the CURRENT basis
            let mut col = new_col.clone();
            basis.ftran(&mut col);
            basis.push_eta(r_out, &col);
            // mirror the change in the dense matrix
            for r in 0..m {
                a[r * m + r_out] = new_col[r];
            }
            // compare against a from-scratch factorization
            let fresh = LuBasis::factorize(m, a.clone()).unwrap();
            for probe in 0..m {
                let mut v = vec![0.0; m];
                v[probe] = 1.0;
                let mut via_eta = v.clone();
                basis.ftran(&mut via_eta);
                let mut via_fresh = v.clone();
                fresh.ftran(&mut via_fresh);
                for (x, y) in via_eta.iter().zip(&via_fresh) {
                    assert!(
                        (x - y).abs() < 1e-8,
                        "step {step} probe {probe} ftran: {x} vs {y}"
                    );
                }
                let mut bt_eta = v.clone();
                basis.btran(&mut bt_eta);
                let mut bt_fresh = v;
                fresh.btran(&mut bt_fresh);
                for (x, y) in bt_eta.iter().zip(&bt_fresh) {
                    assert!(
                        (x - y).abs() < 1e-8,
                        "step {step} probe {probe} btran: {x} vs {y}"
                    );
                }
            }
        }
    }
}

#[cfg(test)]
mod optimality_regression_tests {
    use super::*;

    fn replication_lp(n: usize, seed: u64) -> LinearProgram {
        let mut state = seed.wrapping_mul(0x9e3779b97f4a7c15) | 1;
        let mut next = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let mut priors: Vec<f64> = (0..n).map(|_| 0.2 + next()).collect();
        let total: f64 = priors.iter().sum();
        for p in priors.iter_mut() {
            *p /= total;
        }
        let coeffs: Vec<(f64, f64)> =
            (0..n).map(|_| (0.002 * (next() - 0.5), 0.6 + 0.9 * next())).collect();
        let beta_target: f64 = (0..n).map(|k| priors[k] * coeffs[k].1).sum();
        let alpha_target: f64 = (0..n).map(|k| priors[k] * coeffs[k].0).sum();
        let w = |i: usize| i;
        let z = |i: usize| n + i;
        let zmax = 2 * n;
        let mut lp = LinearProgram::new(2 * n + 1);
        for i in 0..n {
            lp.upper[w(i)] = 1.0;
            lp.objective[z(i)] = 1.0 / n as f64;
        }
        lp.objective[zmax] = 1.0;
        for i in 0..n {
            lp.add_row(vec![(w(i), 1.0), (z(i), -1.0)], RowKind::Le, priors[i]);
            lp.add_row(vec![(w(i), -1.0), (z(i), -1.0)], RowKind::Le, -priors[i]);
            lp.add_row(vec![(z(i), 1.0), (zmax, -1.0)], RowKind::Le, 0.0);
        }
        lp.add_row((0..n).map(|i| (w(i), coeffs[i].1)).collect(), RowKind::Eq, beta_target);
        lp.add_row((0..n).map(|i| (w(i), coeffs[i].0)).collect(), RowKind::Eq, alpha_target);
        lp.add_row((0..n).map(|i| (w(i), 1.0)).collect(), RowKind::Eq, 1.0);
        lp
    }

    #[test]
    fn final_state_is_self_consistent() {
        let lp = replication_lp(5, 5);
        let mut s = Simplex::new(&lp);
        let sol = s.optimize().unwrap();
        println!("objective {} after {} iterations", sol.objective, sol.iterations);

        // xb drift: recompute from a fresh factorization
        let xb_inc = s.xb.clone();
        s.refactor().unwrap();
        s.recompute_xb();
        let mut max_drift = 0.0f64;
        for (a, b) in xb_inc.iter().zip(&s.xb) {
            max_drift = max_drift.max((a - b).abs());
        }
        println!("max xb drift {max_drift}");

        // reduced costs from the fresh factorization
        let mut cb = vec![0.0; s.m];
        for (r, c) in cb.iter_mut().enumerate() {
            *c = s.cost[s.basic[r]];
        }
        let mut pi = cb;
        s.basis.btran(&mut pi);
        let mut worst: (usize, f64) = (usize::MAX, 0.0);
        for j in 0..s.n_total {
            if s.status[j] == VarStatus::Basic {
                continue;
            }
            // fixed variables cannot move, so their duals are unconstrained
            if s.upper[j] - s.lower[j] <= 0.0 && s.lower[j].is_finite() {
                continue;
            }
            let d = s.cost[j] - s.dot_column(j, &pi);
            let bad = match s.status[j] {
                VarStatus::AtLower => (-d).max(0.0),
                VarStatus::AtUpper => d.max(0.0),
                VarStatus::Basic => 0.0,
            };
            if bad > worst.1 {
                worst = (j, bad);
            }
        }
        println!("worst dual violation: var {} by {}", worst.0, worst.1);
        assert!(worst.1 < 1e-7, "claimed optimum has an improving direction");
    }
}
