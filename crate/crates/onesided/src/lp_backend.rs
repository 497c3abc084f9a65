//! A small, deterministic linear-programming backend.
//!
//! Every optimization in this crate is a modest dense LP (tens to a few
//! thousand rows), and reproducibility matters more than raw speed: strategy
//! extraction reads primal values off the solution, tests freeze objective
//! values, and the same program must give the same answer on every run. So
//! instead of binding an external solver, the crate bundles a two-phase
//! dense simplex with no randomized or time-dependent behavior: Dantzig
//! pricing with a largest-pivot ratio tie-break, switching to Bland's
//! anti-cycling rule during long degenerate runs, with the basis inverse
//! periodically refactorized from scratch and every termination verdict
//! re-verified against a fresh factorization.
//!
//! [`LinearProgram`] carries the problem in its natural form: an objective
//! sense, a dense cost vector, rows with a relation in `{<=, =, >=}`, and
//! per-variable bounds where the lower bound may be `0` or `-inf` and the
//! upper `+inf` or finite. Free variables (game values, per-state value
//! caps) are kept as ordinary variables; the solver converts to standard
//! form internally and maps the solution back, so `primal[j]` always refers
//! to the variable as declared.
//!
//! Phase 1 minimizes the sum of artificial variables directly (no big-M
//! penalties, which would drag an arbitrary magnitude into the pivoting
//! arithmetic); phase 2 then optimizes the true objective with artificial
//! columns barred from entering.
//!
//! ```
//! use onesided::lp_backend::{LinearProgram, LpStatus, Relation, Sense};
//!
//! // maximize v subject to v <= 1 and v <= 2, v free
//! let mut lp = LinearProgram::new(Sense::Maximize, 1);
//! lp.set_objective(0, 1.0);
//! lp.make_free(0);
//! lp.add_row(Relation::Le, 1.0, &[(0, 1.0)]);
//! lp.add_row(Relation::Le, 2.0, &[(0, 1.0)]);
//! let sol = lp.solve()?;
//! assert_eq!(sol.status, LpStatus::Optimal);
//! assert!((sol.objective - 1.0).abs() < 1e-9);
//! # Ok::<(), onesided::Error>(())
//! ```

use std::fmt;

use crate::{Error, Result};

/// A returned primal must satisfy every row at least this tightly; phase 1
/// declares infeasibility when its optimum exceeds it.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-8;

/// Reduced costs closer to zero than this count as optimal.
pub const OPTIMALITY_TOLERANCE: f64 = 1e-9;

/// Smallest magnitude accepted as a pivot element.
pub const PIVOT_TOLERANCE: f64 = 1e-10;

/// Pivots between from-scratch recomputations of the basis inverse.
const REFACTOR_INTERVAL: usize = 40;

/// Optimization direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

/// Constraint relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Eq => "=",
            Relation::Ge => ">=",
        })
    }
}

/// One constraint row, stored dense.
#[derive(Clone, Debug)]
pub struct Row {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// Terminal state of a solve.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Result of [`LinearProgram::solve`].
///
/// `primal` and `objective` are meaningful only when `status` is
/// [`LpStatus::Optimal`]; otherwise `primal` is empty and `objective` is
/// NaN. `dual` carries one multiplier per row, signed so that the dual
/// objective `sum(dual[i] * rhs[i])` equals `objective`; it is `None` when
/// any variable has a finite nonzero bound, where that identity would need
/// bound corrections the backend does not track.
#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    pub primal: Vec<f64>,
    pub objective: f64,
    pub dual: Option<Vec<f64>>,
    pub iterations: usize,
}

/// A dense linear program over variables `x0..x{n-1}`.
///
/// Variables start with bounds `[0, +inf)`; adjust with [`make_free`] or
/// [`set_bounds`]. Rows are added one at a time from sparse entries.
///
/// [`make_free`]: LinearProgram::make_free
/// [`set_bounds`]: LinearProgram::set_bounds
#[derive(Clone, Debug)]
pub struct LinearProgram {
    sense: Sense,
    objective: Vec<f64>,
    rows: Vec<Row>,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl LinearProgram {
    pub fn new(sense: Sense, num_vars: usize) -> LinearProgram {
        LinearProgram {
            sense,
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
            lower: vec![0.0; num_vars],
            upper: vec![f64::INFINITY; num_vars],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn sense(&self) -> Sense {
        self.sense
    }

    /// Sets the objective coefficient of one variable.
    pub fn set_objective(&mut self, var: usize, coeff: f64) {
        self.objective[var] = coeff;
    }

    /// Removes both bounds from a variable.
    pub fn make_free(&mut self, var: usize) {
        self.lower[var] = f64::NEG_INFINITY;
        self.upper[var] = f64::INFINITY;
    }

    /// Sets explicit bounds; use `(-inf, +inf)` for free variables.
    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) {
        self.lower[var] = lower;
        self.upper[var] = upper;
    }

    /// Appends a constraint from sparse `(variable, coefficient)` entries.
    pub fn add_row(&mut self, relation: Relation, rhs: f64, entries: &[(usize, f64)]) {
        let mut coeffs = vec![0.0; self.num_vars()];
        for &(var, coeff) in entries {
            coeffs[var] += coeff;
        }
        self.rows.push(Row {
            coeffs,
            relation,
            rhs,
        });
    }

    /// Plain-text dump, one constraint per line, for debugging fixtures.
    pub fn dump(&self) -> String {
        let term = |coeff: f64, var: usize| format!("{coeff}*x{var}");
        let linear = |coeffs: &[f64]| {
            let terms: Vec<String> = coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(j, c)| term(*c, j))
                .collect();
            if terms.is_empty() {
                "0".to_string()
            } else {
                terms.join(" + ")
            }
        };
        let mut out = String::new();
        let sense = match self.sense {
            Sense::Maximize => "maximize",
            Sense::Minimize => "minimize",
        };
        out.push_str(&format!("{sense} {}\n", linear(&self.objective)));
        out.push_str("subject to\n");
        for row in &self.rows {
            out.push_str(&format!(
                "  {} {} {}\n",
                linear(&row.coeffs),
                row.relation,
                row.rhs
            ));
        }
        out.push_str("bounds\n");
        for j in 0..self.num_vars() {
            let (l, u) = (self.lower[j], self.upper[j]);
            if l == f64::NEG_INFINITY && u == f64::INFINITY {
                out.push_str(&format!("  x{j} free\n"));
            } else if l == 0.0 && u == f64::INFINITY {
                // default bound, omit
            } else {
                out.push_str(&format!("  x{j} in [{l}, {u}]\n"));
            }
        }
        out
    }

    /// Solves by two-phase dense simplex with Bland's rule.
    ///
    /// Errors only on a numeric stall (iteration cap); infeasibility and
    /// unboundedness are ordinary statuses, not errors.
    pub fn solve(&self) -> Result<LpSolution> {
        for j in 0..self.num_vars() {
            if self.lower[j].is_nan() || self.upper[j].is_nan() {
                return Err(Error::InvalidArgument(format!("NaN bound on x{j}")));
            }
            if self.lower[j] > self.upper[j] {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    primal: Vec::new(),
                    objective: f64::NAN,
                    dual: None,
                    iterations: 0,
                });
            }
        }
        Standardized::build(self).solve(self)
    }
}

/// How an internal standard-form column maps back to an original variable.
#[derive(Clone, Copy, Debug)]
enum ColMap {
    /// `x = t` (lower bound 0).
    Plain(usize),
    /// `x = l + t` for finite lower bound `l`.
    Shifted(usize, f64),
    /// `x = u - t` for a variable only bounded above.
    Mirrored(usize, f64),
    /// Positive part of a free variable, `x += t`.
    PosPart(usize),
    /// Negative part of a free variable, `x -= t`.
    NegPart(usize),
}

/// The standard-form problem `min c.t  s.t.  A t = b, t >= 0` plus the
/// bookkeeping to translate solutions back.
struct Standardized {
    /// Column-major constraint matrix, slack and artificial columns last.
    cols: Vec<Vec<f64>>,
    b: Vec<f64>,
    cost: Vec<f64>,
    col_map: Vec<ColMap>,
    /// Index of the first artificial column.
    first_artificial: usize,
    /// +-1 per row of the final system: -1 where the row was negated to
    /// make `b` nonnegative. Bound rows appended for two-sided variables
    /// carry a 0 here so dual extraction skips them.
    row_sign: Vec<f64>,
    /// Rows that correspond 1:1 to the caller's rows (the prefix).
    original_rows: usize,
    /// True when every bound is 0 or infinite, i.e. duals are exact.
    duals_exact: bool,
    /// Basis column per row.
    basis: Vec<usize>,
    /// Dense row-major inverse of the basis matrix.
    binv: Vec<f64>,
    xb: Vec<f64>,
}

impl Standardized {
    fn build(lp: &LinearProgram) -> Standardized {
        let n = lp.num_vars();
        let mut col_map = Vec::new();
        let mut duals_exact = true;
        // (structural column, coefficient sign) pairs per original variable,
        // plus pending upper-bound rows in structural space.
        let mut bound_rows: Vec<(usize, f64)> = Vec::new();
        let mut var_cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        let mut rhs_shift: Vec<f64> = vec![0.0; n];
        for j in 0..n {
            let (l, u) = (lp.lower[j], lp.upper[j]);
            match (l.is_finite(), u.is_finite()) {
                (true, false) => {
                    if l == 0.0 {
                        var_cols[j].push((col_map.len(), 1.0));
                        col_map.push(ColMap::Plain(j));
                    } else {
                        duals_exact = false;
                        rhs_shift[j] = l;
                        var_cols[j].push((col_map.len(), 1.0));
                        col_map.push(ColMap::Shifted(j, l));
                    }
                }
                (false, false) => {
                    var_cols[j].push((col_map.len(), 1.0));
                    col_map.push(ColMap::PosPart(j));
                    var_cols[j].push((col_map.len(), -1.0));
                    col_map.push(ColMap::NegPart(j));
                }
                (false, true) => {
                    duals_exact = false;
                    rhs_shift[j] = u;
                    var_cols[j].push((col_map.len(), -1.0));
                    col_map.push(ColMap::Mirrored(j, u));
                }
                (true, true) => {
                    duals_exact = false;
                    rhs_shift[j] = l;
                    let t = col_map.len();
                    var_cols[j].push((t, 1.0));
                    col_map.push(ColMap::Shifted(j, l));
                    bound_rows.push((t, u - l));
                }
            }
        }
        let n_struct = col_map.len();

        // Rows in structural space: the caller's rows, then bound rows.
        struct PendingRow {
            coeffs: Vec<f64>,
            relation: Relation,
            rhs: f64,
            original: bool,
        }
        let mut pending: Vec<PendingRow> = Vec::new();
        for row in &lp.rows {
            let mut coeffs = vec![0.0; n_struct];
            let mut rhs = row.rhs;
            for (j, &a) in row.coeffs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                rhs -= a * rhs_shift[j];
                for &(t, sign) in &var_cols[j] {
                    coeffs[t] += a * sign;
                }
            }
            pending.push(PendingRow {
                coeffs,
                relation: row.relation,
                rhs,
                original: true,
            });
        }
        for &(t, cap) in &bound_rows {
            let mut coeffs = vec![0.0; n_struct];
            coeffs[t] = 1.0;
            pending.push(PendingRow {
                coeffs,
                relation: Relation::Le,
                rhs: cap,
                original: false,
            });
        }

        let m = pending.len();
        let original_rows = lp.rows.len();
        let mut row_sign = vec![0.0; m];
        let mut b = vec![0.0; m];

        // Count slack/surplus and artificial columns to size the matrix.
        let mut n_slack = 0;
        let mut n_art = 0;
        for row in &pending {
            let negate = row.rhs < 0.0;
            let rel = match (row.relation, negate) {
                (Relation::Le, true) | (Relation::Ge, false) => Relation::Ge,
                (Relation::Le, false) | (Relation::Ge, true) => Relation::Le,
                (Relation::Eq, _) => Relation::Eq,
            };
            match rel {
                Relation::Le => n_slack += 1,
                Relation::Ge => {
                    n_slack += 1;
                    n_art += 1;
                }
                Relation::Eq => n_art += 1,
            }
        }
        let total = n_struct + n_slack + n_art;
        let first_artificial = n_struct + n_slack;

        let mut cols = vec![vec![0.0; m]; total];
        let mut basis = vec![usize::MAX; m];
        let mut next_slack = n_struct;
        let mut next_art = first_artificial;
        for (i, row) in pending.iter().enumerate() {
            let negate = row.rhs < 0.0;
            let s = if negate { -1.0 } else { 1.0 };
            if row.original {
                row_sign[i] = s;
            }
            b[i] = row.rhs * s;
            for (t, &a) in row.coeffs.iter().enumerate() {
                if a != 0.0 {
                    cols[t][i] = a * s;
                }
            }
            let rel = match (row.relation, negate) {
                (Relation::Le, true) | (Relation::Ge, false) => Relation::Ge,
                (Relation::Le, false) | (Relation::Ge, true) => Relation::Le,
                (Relation::Eq, _) => Relation::Eq,
            };
            match rel {
                Relation::Le => {
                    cols[next_slack][i] = 1.0;
                    basis[i] = next_slack;
                    next_slack += 1;
                }
                Relation::Ge => {
                    cols[next_slack][i] = -1.0;
                    next_slack += 1;
                    cols[next_art][i] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
                Relation::Eq => {
                    cols[next_art][i] = 1.0;
                    basis[i] = next_art;
                    next_art += 1;
                }
            }
        }

        // Phase-2 cost over internal columns, always a minimization.
        let flip = match lp.sense {
            Sense::Maximize => -1.0,
            Sense::Minimize => 1.0,
        };
        let mut cost = vec![0.0; total];
        for (t, map) in col_map.iter().enumerate() {
            let (j, sign) = match *map {
                ColMap::Plain(j) | ColMap::Shifted(j, _) | ColMap::PosPart(j) => (j, 1.0),
                ColMap::Mirrored(j, _) | ColMap::NegPart(j) => (j, -1.0),
            };
            cost[t] = flip * sign * lp.objective[j];
        }

        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        let xb = b.clone();

        Standardized {
            cols,
            b,
            cost,
            col_map,
            first_artificial,
            row_sign,
            original_rows,
            duals_exact,
            basis,
            binv,
            xb,
        }
    }

    fn num_rows(&self) -> usize {
        self.b.len()
    }

    fn num_cols(&self) -> usize {
        self.cols.len()
    }

    /// `B^-1 * column`.
    fn ftran(&self, col: usize) -> Vec<f64> {
        let m = self.num_rows();
        let a = &self.cols[col];
        let mut out = vec![0.0; m];
        for (i, slot) in out.iter_mut().enumerate() {
            let row = &self.binv[i * m..(i + 1) * m];
            let mut acc = 0.0;
            for (r, &br) in row.iter().enumerate() {
                if br != 0.0 {
                    acc += br * a[r];
                }
            }
            *slot = acc;
        }
        out
    }

    /// `cost_B * B^-1`, the simplex multipliers for a given cost vector.
    fn multipliers(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.num_rows();
        let mut y = vec![0.0; m];
        for (i, &bi) in self.basis.iter().enumerate() {
            let cb = cost[bi];
            if cb == 0.0 {
                continue;
            }
            let row = &self.binv[i * m..(i + 1) * m];
            for (r, &br) in row.iter().enumerate() {
                y[r] += cb * br;
            }
        }
        y
    }

    fn pivot(&mut self, row: usize, col: usize, direction: &[f64]) {
        let m = self.num_rows();
        let piv = direction[row];
        let inv = 1.0 / piv;
        for r in 0..m {
            self.binv[row * m + r] *= inv;
        }
        self.xb[row] *= inv;
        for i in 0..m {
            if i == row {
                continue;
            }
            let factor = direction[i];
            if factor == 0.0 {
                continue;
            }
            let (head, tail) = self.binv.split_at_mut(row.max(i) * m);
            let (target, source) = if i < row {
                (&mut head[i * m..i * m + m], &tail[..m])
            } else {
                (&mut tail[..m], &head[row * m..row * m + m])
            };
            for (t, &s) in target.iter_mut().zip(source.iter()) {
                *t -= factor * s;
            }
            self.xb[i] -= factor * self.xb[row];
        }
        self.basis[row] = col;
    }

    /// Rebuilds `binv` and `xb` from the current basis by Gauss-Jordan
    /// elimination with partial pivoting. The incremental pivot updates
    /// drift on long degenerate runs; recomputing from scratch restores
    /// them, and every termination verdict is re-checked against a fresh
    /// inverse before it is believed.
    fn refactorize(&mut self) -> Result<()> {
        let m = self.num_rows();
        let w = 2 * m;
        let mut aug = vec![0.0; m * w];
        for i in 0..m {
            for (r, &bi) in self.basis.iter().enumerate() {
                aug[i * w + r] = self.cols[bi][i];
            }
            aug[i * w + m + i] = 1.0;
        }
        for col in 0..m {
            let mut best = col;
            let mut best_abs = aug[col * w + col].abs();
            for r in col + 1..m {
                let v = aug[r * w + col].abs();
                if v > best_abs {
                    best = r;
                    best_abs = v;
                }
            }
            if best_abs <= PIVOT_TOLERANCE {
                return Err(Error::Solver(
                    "numerically singular basis during refactorization".into(),
                ));
            }
            if best != col {
                for c in 0..w {
                    aug.swap(col * w + c, best * w + c);
                }
            }
            let inv = 1.0 / aug[col * w + col];
            for c in 0..w {
                aug[col * w + c] *= inv;
            }
            for r in 0..m {
                if r == col {
                    continue;
                }
                let f = aug[r * w + col];
                if f == 0.0 {
                    continue;
                }
                for c in 0..w {
                    aug[r * w + c] -= f * aug[col * w + c];
                }
            }
        }
        for i in 0..m {
            for r in 0..m {
                self.binv[i * m + r] = aug[i * w + m + r];
            }
        }
        for i in 0..m {
            let row = &self.binv[i * m..(i + 1) * m];
            self.xb[i] = row.iter().zip(&self.b).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }

    /// Runs simplex iterations until the given cost is optimal.
    ///
    /// Returns `Ok(true)` at optimality, `Ok(false)` when unbounded.
    fn iterate(
        &mut self,
        cost: &[f64],
        allow_artificials: bool,
        iterations: &mut usize,
    ) -> Result<bool> {
        let m = self.num_rows();
        let ncols = self.num_cols();
        let limit = 200 * (m + ncols) + 10_000;
        let mut in_basis = vec![false; ncols];
        for &bi in &self.basis {
            in_basis[bi] = true;
        }
        let mut pivots_since_refactor = 0;
        let mut fresh = false;
        // Dantzig entering with largest-pivot tie-breaking is the fast,
        // numerically kind default; a long run of degenerate pivots switches
        // to strict Bland (least index in, least index out), which cannot
        // cycle, until the objective moves again.
        let mut bland_mode = false;
        let mut degenerate_run = 0;
        loop {
            if *iterations > limit {
                return Err(Error::Solver(format!(
                    "simplex exceeded {limit} iterations"
                )));
            }
            if pivots_since_refactor >= REFACTOR_INTERVAL {
                self.refactorize()?;
                pivots_since_refactor = 0;
                fresh = true;
            }
            let y = self.multipliers(cost);
            let mut entering: Option<(usize, f64)> = None;
            for j in 0..ncols {
                if in_basis[j] || (!allow_artificials && j >= self.first_artificial) {
                    continue;
                }
                let mut reduced = cost[j];
                for (r, &a) in self.cols[j].iter().enumerate() {
                    if a != 0.0 {
                        reduced -= y[r] * a;
                    }
                }
                if reduced < -OPTIMALITY_TOLERANCE {
                    if bland_mode {
                        entering = Some((j, reduced));
                        break;
                    }
                    if entering.is_none_or(|(_, best)| reduced < best) {
                        entering = Some((j, reduced));
                    }
                }
            }
            let Some((col, _)) = entering else {
                if fresh {
                    return Ok(true);
                }
                self.refactorize()?;
                pivots_since_refactor = 0;
                fresh = true;
                continue;
            };
            let d = self.ftran(col);
            // Ratio test. Rows still holding an artificial variable may also
            // leave on a negative direction entry: they sit at value zero,
            // and letting them grow again would silently lose feasibility.
            let mut leave: Option<(f64, f64, usize, usize)> = None;
            for r in 0..m {
                let dr = d[r];
                let is_artificial = self.basis[r] >= self.first_artificial;
                let theta = if dr > PIVOT_TOLERANCE {
                    self.xb[r].max(0.0) / dr
                } else if !allow_artificials && is_artificial && dr < -PIVOT_TOLERANCE {
                    0.0
                } else {
                    continue;
                };
                let better = match leave {
                    None => true,
                    Some((best, pivot_abs, var, _)) => {
                        if bland_mode {
                            theta < best || (theta == best && self.basis[r] < var)
                        } else {
                            let slack = OPTIMALITY_TOLERANCE * (1.0 + best.abs());
                            theta < best - slack
                                || (theta <= best + slack && dr.abs() > pivot_abs)
                        }
                    }
                };
                if better {
                    leave = Some((theta, dr.abs(), self.basis[r], r));
                }
            }
            let Some((theta, _, _, row)) = leave else {
                if fresh {
                    return Ok(false);
                }
                self.refactorize()?;
                pivots_since_refactor = 0;
                fresh = true;
                continue;
            };
            if theta <= PIVOT_TOLERANCE {
                degenerate_run += 1;
                if degenerate_run > 2 * m + 10 {
                    bland_mode = true;
                }
            } else {
                degenerate_run = 0;
                bland_mode = false;
            }
            in_basis[self.basis[row]] = false;
            in_basis[col] = true;
            self.pivot(row, col, &d);
            *iterations += 1;
            pivots_since_refactor += 1;
            fresh = false;
        }
    }

    fn solve(mut self, lp: &LinearProgram) -> Result<LpSolution> {
        let mut iterations = 0;

        // Phase 1: minimize the sum of artificial values.
        let mut phase1 = vec![0.0; self.num_cols()];
        for c in phase1.iter_mut().skip(self.first_artificial) {
            *c = 1.0;
        }
        let has_artificials = self.first_artificial < self.num_cols();
        if has_artificials {
            let optimal = self.iterate(&phase1, true, &mut iterations)?;
            debug_assert!(optimal, "phase 1 is bounded below by zero");
            let infeasibility: f64 = self
                .basis
                .iter()
                .zip(&self.xb)
                .filter(|(&bi, _)| bi >= self.first_artificial)
                .map(|(_, &x)| x)
                .sum();
            if infeasibility > FEASIBILITY_TOLERANCE {
                return Ok(LpSolution {
                    status: LpStatus::Infeasible,
                    primal: Vec::new(),
                    objective: f64::NAN,
                    dual: None,
                    iterations,
                });
            }
            self.expel_artificials();
        }

        // Phase 2 on the real objective.
        let cost = self.cost.clone();
        let optimal = self.iterate(&cost, false, &mut iterations)?;
        if !optimal {
            return Ok(LpSolution {
                status: LpStatus::Unbounded,
                primal: Vec::new(),
                objective: f64::NAN,
                dual: None,
                iterations,
            });
        }

        // Recover the primal in original variable space.
        let mut primal = vec![0.0; lp.num_vars()];
        for (t, map) in self.col_map.iter().enumerate() {
            let value = self
                .basis
                .iter()
                .position(|&bi| bi == t)
                .map_or(0.0, |r| self.xb[r].max(0.0));
            match *map {
                ColMap::Plain(j) => primal[j] += value,
                ColMap::Shifted(j, l) => primal[j] = l + value,
                ColMap::Mirrored(j, u) => primal[j] = u - value,
                ColMap::PosPart(j) => primal[j] += value,
                ColMap::NegPart(j) => primal[j] -= value,
            }
        }
        let objective: f64 = lp
            .objective
            .iter()
            .zip(&primal)
            .map(|(c, x)| c * x)
            .sum();

        let dual = self.duals_exact.then(|| {
            let flip = match lp.sense {
                Sense::Maximize => -1.0,
                Sense::Minimize => 1.0,
            };
            let y = self.multipliers(&cost);
            (0..self.original_rows)
                .map(|i| flip * self.row_sign[i] * y[i])
                .collect()
        });

        Ok(LpSolution {
            status: LpStatus::Optimal,
            primal,
            objective,
            dual,
            iterations,
        })
    }

    /// After phase 1, swaps basic artificials for structural columns where a
    /// usable pivot exists. Rows with no such pivot are redundant and keep
    /// their artificial basic at zero; the phase-2 ratio test pins it there.
    fn expel_artificials(&mut self) {
        let m = self.num_rows();
        for row in 0..m {
            if self.basis[row] < self.first_artificial {
                continue;
            }
            for j in 0..self.first_artificial {
                if self.basis.contains(&j) {
                    continue;
                }
                let binv_row = &self.binv[row * m..(row + 1) * m];
                let mut dr = 0.0;
                for (r, &a) in self.cols[j].iter().enumerate() {
                    if a != 0.0 {
                        dr += binv_row[r] * a;
                    }
                }
                if dr.abs() > PIVOT_TOLERANCE {
                    let d = self.ftran(j);
                    self.pivot(row, j, &d);
                    break;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(actual: f64, expected: f64, tolerance: f64) {
        assert!(
            (actual - expected).abs() <= tolerance,
            "expected {expected}, got {actual}"
        );
    }

    /// Each returned primal must satisfy every row to the documented slack.
    fn assert_primal_feasible(lp: &LinearProgram, sol: &LpSolution) {
        for (i, row) in lp.rows.iter().enumerate() {
            let lhs: f64 = row
                .coeffs
                .iter()
                .zip(&sol.primal)
                .map(|(a, x)| a * x)
                .sum();
            let slack = FEASIBILITY_TOLERANCE * (1.0 + row.rhs.abs());
            let ok = match row.relation {
                Relation::Le => lhs <= row.rhs + slack,
                Relation::Ge => lhs >= row.rhs - slack,
                Relation::Eq => (lhs - row.rhs).abs() <= slack,
            };
            assert!(ok, "row {i}: {lhs} {} {}", row.relation, row.rhs);
        }
    }

    #[test]
    fn free_variable_capped_by_two_rows() {
        let mut lp = LinearProgram::new(Sense::Maximize, 1);
        lp.set_objective(0, 1.0);
        lp.make_free(0);
        lp.add_row(Relation::Le, 1.0, &[(0, 1.0)]);
        lp.add_row(Relation::Le, 2.0, &[(0, 1.0)]);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, 1.0, 1e-9);
        assert_close(sol.primal[0], 1.0, 1e-9);
        assert_primal_feasible(&lp, &sol);
    }

    #[test]
    fn free_variable_can_go_negative() {
        let mut lp = LinearProgram::new(Sense::Minimize, 1);
        lp.set_objective(0, 1.0);
        lp.make_free(0);
        lp.add_row(Relation::Ge, -3.0, &[(0, 1.0)]);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.primal[0], -3.0, 1e-9);
    }

    #[test]
    fn matching_pennies_value_and_strategy() {
        // maximize v subject to x0 - x1 >= v, -x0 + x1 >= v, x0 + x1 = 1.
        let mut lp = LinearProgram::new(Sense::Maximize, 3);
        lp.set_objective(2, 1.0);
        lp.make_free(2);
        lp.add_row(Relation::Ge, 0.0, &[(0, 1.0), (1, -1.0), (2, -1.0)]);
        lp.add_row(Relation::Ge, 0.0, &[(0, -1.0), (1, 1.0), (2, -1.0)]);
        lp.add_row(Relation::Eq, 1.0, &[(0, 1.0), (1, 1.0)]);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, 0.0, 1e-9);
        assert_close(sol.primal[0], 0.5, 1e-9);
        assert_close(sol.primal[1], 0.5, 1e-9);
        assert_primal_feasible(&lp, &sol);
    }

    #[test]
    fn infeasible_box() {
        let mut lp = LinearProgram::new(Sense::Maximize, 1);
        lp.add_row(Relation::Ge, 1.0, &[(0, 1.0)]);
        lp.add_row(Relation::Le, 0.0, &[(0, 1.0)]);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
        assert!(sol.objective.is_nan());
    }

    #[test]
    fn unbounded_ray() {
        let mut lp = LinearProgram::new(Sense::Minimize, 1);
        lp.set_objective(0, 1.0);
        lp.make_free(0);
        lp.add_row(Relation::Le, 0.0, &[(0, 1.0)]);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn beale_degeneracy_terminates_at_the_optimum() {
        // A classic cycling trap for non-Bland pivoting.
        let mut lp = LinearProgram::new(Sense::Minimize, 4);
        lp.set_objective(0, -0.75);
        lp.set_objective(1, 150.0);
        lp.set_objective(2, -0.02);
        lp.set_objective(3, 6.0);
        lp.add_row(
            Relation::Le,
            0.0,
            &[(0, 0.25), (1, -60.0), (2, -0.04), (3, 9.0)],
        );
        lp.add_row(
            Relation::Le,
            0.0,
            &[(0, 0.5), (1, -90.0), (2, -0.02), (3, 3.0)],
        );
        lp.add_row(Relation::Le, 1.0, &[(2, 1.0)]);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, -0.05, 1e-9);
        assert_close(sol.primal[0], 0.04, 1e-9);
        assert_close(sol.primal[2], 1.0, 1e-9);
        assert_primal_feasible(&lp, &sol);
    }

    #[test]
    fn two_sided_bounds_and_mirrored_variables() {
        let mut lp = LinearProgram::new(Sense::Maximize, 1);
        lp.set_objective(0, 1.0);
        lp.set_bounds(0, 0.0, 2.5);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.primal[0], 2.5, 1e-9);
        assert!(sol.dual.is_none(), "shifted bounds give no duals");

        let mut lp = LinearProgram::new(Sense::Maximize, 1);
        lp.set_objective(0, 1.0);
        lp.set_bounds(0, f64::NEG_INFINITY, 3.0);
        let sol = lp.solve().unwrap();
        assert_close(sol.primal[0], 3.0, 1e-9);
    }

    #[test]
    fn crossed_bounds_are_infeasible() {
        let mut lp = LinearProgram::new(Sense::Minimize, 1);
        lp.set_bounds(0, 2.0, 1.0);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn equality_only_system_pins_the_point() {
        let mut lp = LinearProgram::new(Sense::Minimize, 2);
        lp.set_objective(0, 1.0);
        lp.set_objective(1, 1.0);
        lp.add_row(Relation::Eq, 1.0, &[(0, 1.0), (1, 1.0)]);
        lp.add_row(Relation::Eq, 0.25, &[(0, 1.0)]);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.primal[0], 0.25, 1e-9);
        assert_close(sol.primal[1], 0.75, 1e-9);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        // The second row is the first row doubled; its artificial can never
        // be pivoted out, and must stay pinned at zero through phase 2.
        let mut lp = LinearProgram::new(Sense::Maximize, 2);
        lp.set_objective(0, 3.0);
        lp.set_objective(1, 1.0);
        lp.add_row(Relation::Eq, 1.0, &[(0, 1.0), (1, 1.0)]);
        lp.add_row(Relation::Eq, 2.0, &[(0, 2.0), (1, 2.0)]);
        lp.add_row(Relation::Le, 0.75, &[(0, 1.0)]);
        let sol = lp.solve().unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert_close(sol.objective, 3.0 * 0.75 + 0.25, 1e-9);
        assert_primal_feasible(&lp, &sol);
    }

    #[test]
    fn duals_match_the_objective_on_zero_sum_games() {
        // Random matrix games: always feasible and bounded, duals exact.
        let mut state = 0x2545f4914f6cdd1du64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for trial in 0..40 {
            let rows = 2 + (next() * 4.0) as usize;
            let cols = 2 + (next() * 4.0) as usize;
            let payoff: Vec<Vec<f64>> = (0..rows)
                .map(|_| (0..cols).map(|_| next() * 10.0 - 5.0).collect())
                .collect();
            // maximize v s.t. for each column c: sum_r x_r payoff[r][c] >= v.
            let mut lp = LinearProgram::new(Sense::Maximize, rows + 1);
            lp.set_objective(rows, 1.0);
            lp.make_free(rows);
            for c in 0..cols {
                let mut entries: Vec<(usize, f64)> =
                    (0..rows).map(|r| (r, payoff[r][c])).collect();
                entries.push((rows, -1.0));
                lp.add_row(Relation::Ge, 0.0, &entries);
            }
            let entries: Vec<(usize, f64)> = (0..rows).map(|r| (r, 1.0)).collect();
            lp.add_row(Relation::Eq, 1.0, &entries);
            let sol = lp.solve().unwrap();
            assert_eq!(sol.status, LpStatus::Optimal, "trial {trial}");
            assert_primal_feasible(&lp, &sol);
            let dual = sol.dual.as_ref().expect("duals available");
            let dual_objective: f64 = dual
                .iter()
                .zip(lp.rows.iter())
                .map(|(y, row)| y * row.rhs)
                .sum();
            assert_close(dual_objective, sol.objective, 1e-7 * (1.0 + sol.objective.abs()));
        }
    }

    #[test]
    fn identical_programs_solve_bit_identically() {
        let build = || {
            let mut lp = LinearProgram::new(Sense::Maximize, 3);
            lp.set_objective(2, 1.0);
            lp.make_free(2);
            lp.add_row(Relation::Ge, 0.0, &[(0, 1.0), (1, -1.0), (2, -1.0)]);
            lp.add_row(Relation::Ge, 0.0, &[(0, -1.0), (1, 1.0), (2, -1.0)]);
            lp.add_row(Relation::Eq, 1.0, &[(0, 1.0), (1, 1.0)]);
            lp
        };
        let a = build().solve().unwrap();
        let b = build().solve().unwrap();
        assert_eq!(a.objective.to_bits(), b.objective.to_bits());
        assert_eq!(a.iterations, b.iterations);
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a.primal), bits(&b.primal));
    }

    #[test]
    fn dump_is_one_constraint_per_line() {
        let mut lp = LinearProgram::new(Sense::Maximize, 2);
        lp.set_objective(0, 1.0);
        lp.make_free(1);
        lp.add_row(Relation::Le, 4.5, &[(0, 3.0), (1, -1.0)]);
        lp.add_row(Relation::Eq, 1.0, &[(0, 1.0)]);
        let dump = lp.dump();
        assert!(dump.contains("3*x0 + -1*x1 <= 4.5"));
        assert!(dump.contains("1*x0 = 1"));
        assert!(dump.contains("x1 free"));
    }
}
