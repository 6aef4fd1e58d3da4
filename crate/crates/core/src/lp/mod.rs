//! Small dense linear programs.
//!
//! [`solve_lp`] maximizes `c·x` subject to linear rows (`≤`, `=`, `≥`) and
//! per-variable bounds. Internally the problem is rewritten into standard
//! equality form with nonnegative variables and solved by a two-phase revised
//! simplex that keeps an explicit dense basis inverse. Pivoting follows
//! Bland's rule (lowest-index entering column, lowest-index leaving basic
//! variable among ratio ties), so the method terminates on degenerate
//! problems and is deterministic.
//!
//! The transport problems in this crate have at most a few hundred rows, where
//! a dense inverse is both simple and fast.

pub mod dense;

use thiserror::Error;

use dense::Lu;

/// Primal feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Reduced-cost tolerance for optimality.
pub const OPTIMALITY_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

impl Relation {
    fn flipped(self) -> Self {
        match self {
            Relation::Le => Relation::Ge,
            Relation::Ge => Relation::Le,
            Relation::Eq => Relation::Eq,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize objective·x` subject to `constraints` and `bounds`.
///
/// Bounds default to `[0, +inf)`; either side may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub constraints: Vec<Constraint>,
    pub bounds: Vec<(f64, f64)>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("objective coefficient {index} is not finite")]
    NonFiniteObjective { index: usize },
    #[error("constraint {row} has a non-finite coefficient or rhs")]
    NonFiniteConstraint { row: usize },
    #[error("constraint {row} has {got} coefficients, expected {expected}")]
    DimensionMismatch { row: usize, expected: usize, got: usize },
    #[error("bounds for variable {var} are NaN")]
    NanBound { var: usize },
    #[error("bounds vector has {got} entries, expected {expected}")]
    BoundsLength { expected: usize, got: usize },
    #[error("simplex exceeded {limit} pivots")]
    PivotLimit { limit: usize },
    #[error("basis matrix became singular: {0}")]
    SingularBasis(#[from] dense::DenseError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Present iff `status == Optimal`.
    pub x: Option<Vec<f64>>,
    /// `objective·x`, present iff `status == Optimal`.
    pub objective_value: Option<f64>,
    /// One multiplier per original constraint row.
    pub duals: Option<Vec<f64>>,
    /// Objective of the dual problem priced at `duals` (and at the bound multipliers).
    pub dual_objective: Option<f64>,
    /// Largest violation of any constraint row or bound at `x`.
    pub max_violation: f64,
    pub pivots: usize,
}

impl LpSolution {
    fn without_point(status: LpStatus, pivots: usize) -> Self {
        Self {
            status,
            x: None,
            objective_value: None,
            duals: None,
            dual_objective: None,
            max_violation: 0.0,
            pivots,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

impl LpProblem {
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            constraints: Vec::new(),
            bounds: vec![(0.0, f64::INFINITY); n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_constraint(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn set_bounds(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.bounds[var] = (lower, upper);
        self
    }

    pub fn set_free(&mut self, var: usize) -> &mut Self {
        self.set_bounds(var, f64::NEG_INFINITY, f64::INFINITY)
    }

    fn validate(&self) -> Result<(), LpError> {
        let nv = self.num_vars();
        if let Some(index) = self.objective.iter().position(|c| !c.is_finite()) {
            return Err(LpError::NonFiniteObjective { index });
        }
        if self.bounds.len() != nv {
            return Err(LpError::BoundsLength { expected: nv, got: self.bounds.len() });
        }
        if let Some(var) = self.bounds.iter().position(|(l, u)| l.is_nan() || u.is_nan()) {
            return Err(LpError::NanBound { var });
        }
        for (row, c) in self.constraints.iter().enumerate() {
            if c.coeffs.len() != nv {
                return Err(LpError::DimensionMismatch { row, expected: nv, got: c.coeffs.len() });
            }
            if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
                return Err(LpError::NonFiniteConstraint { row });
            }
        }
        Ok(())
    }

    /// Largest violation of rows and bounds at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for c in &self.constraints {
            let lhs: f64 = c.coeffs.iter().zip(x).map(|(a, v)| a * v).sum();
            let v = match c.relation {
                Relation::Le => lhs - c.rhs,
                Relation::Ge => c.rhs - lhs,
                Relation::Eq => (lhs - c.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (&(l, u), &v) in self.bounds.iter().zip(x) {
            worst = worst.max(l - v).max(v - u);
        }
        worst
    }
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    /// x = lower + z
    Shift { col: usize, lower: f64 },
    /// x = upper - z
    Mirror { col: usize, upper: f64 },
    /// x = z⁺ - z⁻
    Split { pos: usize, neg: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ColKind {
    Structural,
    Slack,
    Artificial,
}

/// `maximize cost·z  s.t.  A z = b, z ≥ 0, b ≥ 0`, columns stored sparsely.
struct StandardForm {
    rows: usize,
    cols: Vec<Vec<(usize, f64)>>,
    kind: Vec<ColKind>,
    cost: Vec<f64>,
    b: Vec<f64>,
    initial_basis: Vec<usize>,
    /// +1 or -1 per standard row; first `original_rows` entries map to the input rows.
    row_sign: Vec<f64>,
    original_rows: usize,
    var_map: Vec<VarMap>,
    objective_offset: f64,
}

impl StandardForm {
    fn build(p: &LpProblem) -> Option<Self> {
        let mut var_map = Vec::with_capacity(p.num_vars());
        let mut structural = 0usize;
        let mut objective_offset = 0.0;
        let mut cost = Vec::new();
        // (column, upper - lower) rows for doubly bounded variables.
        let mut upper_rows = Vec::new();
        for (j, &(lower, upper)) in p.bounds.iter().enumerate() {
            if lower > upper {
                return None;
            }
            let c = p.objective[j];
            if lower.is_finite() {
                var_map.push(VarMap::Shift { col: structural, lower });
                objective_offset += c * lower;
                cost.push(c);
                if upper.is_finite() {
                    upper_rows.push((structural, upper - lower));
                }
                structural += 1;
            } else if upper.is_finite() {
                var_map.push(VarMap::Mirror { col: structural, upper });
                objective_offset += c * upper;
                cost.push(-c);
                structural += 1;
            } else {
                var_map.push(VarMap::Split { pos: structural, neg: structural + 1 });
                cost.push(c);
                cost.push(-c);
                structural += 2;
            }
        }

        // Dense rows over structural columns, then sign-normalized.
        let mut dense_rows: Vec<(Vec<f64>, Relation, f64)> = Vec::new();
        for c in &p.constraints {
            let mut row = vec![0.0; structural];
            let mut rhs = c.rhs;
            for (j, &a) in c.coeffs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                match var_map[j] {
                    VarMap::Shift { col, lower } => {
                        row[col] += a;
                        rhs -= a * lower;
                    }
                    VarMap::Mirror { col, upper } => {
                        row[col] -= a;
                        rhs -= a * upper;
                    }
                    VarMap::Split { pos, neg } => {
                        row[pos] += a;
                        row[neg] -= a;
                    }
                }
            }
            dense_rows.push((row, c.relation, rhs));
        }
        for &(col, width) in &upper_rows {
            let mut row = vec![0.0; structural];
            row[col] = 1.0;
            dense_rows.push((row, Relation::Le, width));
        }

        let rows = dense_rows.len();
        let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); structural];
        let mut kind = vec![ColKind::Structural; structural];
        let mut b = Vec::with_capacity(rows);
        let mut row_sign = Vec::with_capacity(rows);
        let mut initial_basis = Vec::with_capacity(rows);
        let mut relations = Vec::with_capacity(rows);
        for (i, (row, rel, rhs)) in dense_rows.into_iter().enumerate() {
            let (sign, rel, rhs) = if rhs < 0.0 { (-1.0, rel.flipped(), -rhs) } else { (1.0, rel, rhs) };
            for (j, a) in row.into_iter().enumerate() {
                if a != 0.0 {
                    cols[j].push((i, sign * a));
                }
            }
            b.push(rhs);
            row_sign.push(sign);
            relations.push(rel);
        }
        for (i, rel) in relations.iter().enumerate() {
            match rel {
                Relation::Le => {
                    cols.push(vec![(i, 1.0)]);
                    kind.push(ColKind::Slack);
                    cost.push(0.0);
                    initial_basis.push(cols.len() - 1);
                }
                Relation::Ge => {
                    cols.push(vec![(i, -1.0)]);
                    kind.push(ColKind::Slack);
                    cost.push(0.0);
                    cols.push(vec![(i, 1.0)]);
                    kind.push(ColKind::Artificial);
                    cost.push(0.0);
                    initial_basis.push(cols.len() - 1);
                }
                Relation::Eq => {
                    cols.push(vec![(i, 1.0)]);
                    kind.push(ColKind::Artificial);
                    cost.push(0.0);
                    initial_basis.push(cols.len() - 1);
                }
            }
        }

        Some(Self {
            rows,
            cols,
            kind,
            cost,
            b,
            initial_basis,
            row_sign,
            original_rows: p.constraints.len(),
            var_map,
            objective_offset,
        })
    }
}

enum PhaseEnd {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    sf: &'a StandardForm,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    since_refactor: usize,
    pivots: usize,
    pivot_limit: usize,
}

impl<'a> Simplex<'a> {
    fn new(sf: &'a StandardForm) -> Self {
        let m = sf.rows;
        let mut is_basic = vec![false; sf.cols.len()];
        for &j in &sf.initial_basis {
            is_basic[j] = true;
        }
        // Initial basis columns are unit vectors, so B⁻¹ = I and x_B = b.
        let mut binv = vec![0.0; m * m];
        for i in 0..m {
            binv[i * m + i] = 1.0;
        }
        Self {
            sf,
            basis: sf.initial_basis.clone(),
            is_basic,
            binv,
            xb: sf.b.clone(),
            since_refactor: 0,
            pivots: 0,
            pivot_limit: 50_000 + 50 * (m + sf.cols.len()),
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let m = self.sf.rows;
        if m == 0 {
            return Ok(());
        }
        let mut bmat = vec![0.0; m * m];
        for (k, &j) in self.basis.iter().enumerate() {
            for &(i, a) in &self.sf.cols[j] {
                bmat[i * m + k] = a;
            }
        }
        let lu = Lu::factorize(m, bmat)?;
        self.binv = lu.inverse();
        self.xb = lu.solve(&self.sf.b);
        self.since_refactor = 0;
        Ok(())
    }

    fn prices(&self, cost: &[f64]) -> Vec<f64> {
        let m = self.sf.rows;
        let mut y = vec![0.0; m];
        for (k, &j) in self.basis.iter().enumerate() {
            let cb = cost[j];
            if cb != 0.0 {
                let row = &self.binv[k * m..(k + 1) * m];
                for (yi, &v) in y.iter_mut().zip(row) {
                    *yi += cb * v;
                }
            }
        }
        y
    }

    fn column(&self, j: usize) -> Vec<f64> {
        let m = self.sf.rows;
        let mut w = vec![0.0; m];
        for &(r, a) in &self.sf.cols[j] {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi += self.binv[i * m + r] * a;
            }
        }
        w
    }

    fn pivot(&mut self, r: usize, q: usize, w: &[f64]) {
        let m = self.sf.rows;
        let piv = w[r];
        for v in &mut self.binv[r * m..(r + 1) * m] {
            *v /= piv;
        }
        self.xb[r] /= piv;
        let (pivot_row, xr) = (self.binv[r * m..(r + 1) * m].to_vec(), self.xb[r]);
        for i in 0..m {
            if i == r || w[i] == 0.0 {
                continue;
            }
            let f = w[i];
            for (v, &p) in self.binv[i * m..(i + 1) * m].iter_mut().zip(&pivot_row) {
                *v -= f * p;
            }
            self.xb[i] -= f * xr;
        }
        self.is_basic[self.basis[r]] = false;
        self.is_basic[q] = true;
        self.basis[r] = q;
        self.pivots += 1;
        self.since_refactor += 1;
    }

    fn run(&mut self, cost: &[f64], allow_artificial: bool) -> Result<PhaseEnd, LpError> {
        loop {
            if self.pivots > self.pivot_limit {
                return Err(LpError::PivotLimit { limit: self.pivot_limit });
            }
            if self.since_refactor >= REFACTOR_EVERY {
                self.refactor()?;
            }
            let y = self.prices(cost);
            let entering = (0..self.sf.cols.len()).find(|&j| {
                if self.is_basic[j] || (!allow_artificial && self.sf.kind[j] == ColKind::Artificial) {
                    return false;
                }
                let d = cost[j] - self.sf.cols[j].iter().map(|&(i, a)| y[i] * a).sum::<f64>();
                d > OPTIMALITY_TOL
            });
            let Some(q) = entering else {
                return Ok(PhaseEnd::Optimal);
            };
            let w = self.column(q);
            let mut leave: Option<(usize, f64)> = None;
            for (i, &wi) in w.iter().enumerate() {
                if wi <= PIVOT_TOL {
                    continue;
                }
                let ratio = self.xb[i].max(0.0) / wi;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        let tie = (ratio - best).abs() <= 1e-12 * (1.0 + best);
                        if ratio < best && !tie || tie && self.basis[i] < self.basis[r] {
                            Some((i, ratio.min(best)))
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(PhaseEnd::Unbounded);
            };
            self.pivot(r, q, &w);
        }
    }

    /// Pivots zero-level artificials out of the basis where a structural or
    /// slack column has a nonzero entry in their row. Rows where none exists
    /// are redundant and keep their artificial at zero.
    fn drive_out_artificials(&mut self) -> Result<(), LpError> {
        let m = self.sf.rows;
        for r in 0..m {
            if self.sf.kind[self.basis[r]] != ColKind::Artificial {
                continue;
            }
            let row = self.binv[r * m..(r + 1) * m].to_vec();
            let candidate = (0..self.sf.cols.len()).find(|&j| {
                !self.is_basic[j]
                    && self.sf.kind[j] != ColKind::Artificial
                    && self.sf.cols[j].iter().map(|&(i, a)| row[i] * a).sum::<f64>().abs() > PIVOT_TOL
            });
            if let Some(q) = candidate {
                let w = self.column(q);
                self.pivot(r, q, &w);
            }
        }
        self.refactor()
    }
}

/// Maximizes the problem. Infeasible and unbounded problems are reported
/// through [`LpStatus`]; errors are reserved for malformed input.
pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution, LpError> {
    problem.validate()?;
    let Some(sf) = StandardForm::build(problem) else {
        return Ok(LpSolution::without_point(LpStatus::Infeasible, 0));
    };
    let mut simplex = Simplex::new(&sf);

    if sf.kind.contains(&ColKind::Artificial) {
        let phase1: Vec<f64> = sf
            .kind
            .iter()
            .map(|k| if *k == ColKind::Artificial { -1.0 } else { 0.0 })
            .collect();
        simplex.run(&phase1, true)?;
        simplex.refactor()?;
        let infeasibility: f64 = simplex
            .basis
            .iter()
            .zip(&simplex.xb)
            .filter(|(j, _)| sf.kind[**j] == ColKind::Artificial)
            .map(|(_, v)| v.max(0.0))
            .sum();
        let scale = 1.0 + sf.b.iter().fold(0.0_f64, |a, v| a.max(*v));
        if infeasibility > FEASIBILITY_TOL * scale {
            return Ok(LpSolution::without_point(LpStatus::Infeasible, simplex.pivots));
        }
        simplex.drive_out_artificials()?;
    }

    if let PhaseEnd::Unbounded = simplex.run(&sf.cost, false)? {
        return Ok(LpSolution::without_point(LpStatus::Unbounded, simplex.pivots));
    }
    simplex.refactor()?;

    let mut z = vec![0.0; sf.cols.len()];
    for (&j, &v) in simplex.basis.iter().zip(&simplex.xb) {
        z[j] = v.max(0.0);
    }
    let x: Vec<f64> = sf
        .var_map
        .iter()
        .map(|m| match *m {
            VarMap::Shift { col, lower } => lower + z[col],
            VarMap::Mirror { col, upper } => upper - z[col],
            VarMap::Split { pos, neg } => z[pos] - z[neg],
        })
        .collect();
    let objective_value: f64 = problem.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let y = simplex.prices(&sf.cost);
    let dual_objective = sf.objective_offset + y.iter().zip(&sf.b).map(|(a, b)| a * b).sum::<f64>();
    let duals = (0..sf.original_rows).map(|i| y[i] * sf.row_sign[i]).collect();

    Ok(LpSolution {
        status: LpStatus::Optimal,
        max_violation: problem.violation(&x),
        x: Some(x),
        objective_value: Some(objective_value),
        duals: Some(duals),
        dual_objective: Some(dual_objective),
        pivots: simplex.pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimum(p: &LpProblem) -> (Vec<f64>, f64) {
        let s = solve_lp(p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        (s.x.unwrap(), s.objective_value.unwrap())
    }

    #[test]
    fn single_upper_bound_row() {
        let mut p = LpProblem::maximize(vec![1.0]);
        p.add_constraint(vec![1.0], Relation::Le, 3.0);
        let (x, v) = optimum(&p);
        assert!((x[0] - 3.0).abs() < 1e-12);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn simplex_on_two_variables() {
        let mut p = LpProblem::maximize(vec![1.0, 1.0]);
        p.add_constraint(vec![1.0, 1.0], Relation::Le, 1.0);
        let (_, v) = optimum(&p);
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_problem_with_duals() {
        // max 3x + 5y  s.t. x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18  ->  (2, 6), 36; duals (0, 1.5, 1)
        let mut p = LpProblem::maximize(vec![3.0, 5.0]);
        p.add_constraint(vec![1.0, 0.0], Relation::Le, 4.0);
        p.add_constraint(vec![0.0, 2.0], Relation::Le, 12.0);
        p.add_constraint(vec![3.0, 2.0], Relation::Le, 18.0);
        let s = solve_lp(&p).unwrap();
        let x = s.x.as_ref().unwrap();
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 6.0).abs() < 1e-12);
        assert!((s.objective_value.unwrap() - 36.0).abs() < 1e-12);
        let y = s.duals.unwrap();
        assert!(y[0].abs() < 1e-12 && (y[1] - 1.5).abs() < 1e-12 && (y[2] - 1.0).abs() < 1e-12);
        assert!((s.dual_objective.unwrap() - 36.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_ge_rows_need_phase_one() {
        // max -x - 2y  s.t. x + y = 2, x ≥ 0.5, y ≥ 0.25  ->  x = 1.75, y = 0.25
        let mut p = LpProblem::maximize(vec![-1.0, -2.0]);
        p.add_constraint(vec![1.0, 1.0], Relation::Eq, 2.0);
        p.add_constraint(vec![1.0, 0.0], Relation::Ge, 0.5);
        p.add_constraint(vec![0.0, 1.0], Relation::Ge, 0.25);
        let (x, v) = optimum(&p);
        assert!((x[0] - 1.75).abs() < 1e-12 && (x[1] - 0.25).abs() < 1e-12);
        assert!((v + 2.25).abs() < 1e-12);
    }

    #[test]
    fn free_and_mirrored_bounds() {
        // max x + y with x free, y ≤ 2 (no lower), x - y ≤ 1, x + 2y ≤ 4  ->  x = 2, y = 1
        let mut p = LpProblem::maximize(vec![1.0, 1.0]);
        p.set_free(0);
        p.set_bounds(1, f64::NEG_INFINITY, 2.0);
        p.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0);
        p.add_constraint(vec![1.0, 2.0], Relation::Le, 4.0);
        let (x, v) = optimum(&p);
        assert!((x[0] - 2.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
        assert!((v - 3.0).abs() < 1e-12);
    }

    #[test]
    fn boxed_variable_uses_upper_row() {
        let mut p = LpProblem::maximize(vec![2.0, -1.0]);
        p.set_bounds(0, -1.0, 1.5);
        p.set_bounds(1, -3.0, 3.0);
        let (x, v) = optimum(&p);
        assert_eq!(x, vec![1.5, -3.0]);
        assert!((v - 6.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded_statuses() {
        let mut p = LpProblem::maximize(vec![1.0]);
        p.add_constraint(vec![1.0], Relation::Le, 1.0);
        p.add_constraint(vec![1.0], Relation::Ge, 2.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);

        let mut p = LpProblem::maximize(vec![1.0, 0.0]);
        p.add_constraint(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Unbounded);

        let mut p = LpProblem::maximize(vec![1.0]);
        p.set_bounds(0, 2.0, 1.0);
        assert_eq!(solve_lp(&p).unwrap().status, LpStatus::Infeasible);
    }

    #[test]
    fn redundant_equalities_are_tolerated() {
        // Two copies of the same equality row.
        let mut p = LpProblem::maximize(vec![1.0, 2.0]);
        p.add_constraint(vec![1.0, 1.0], Relation::Eq, 1.0);
        p.add_constraint(vec![2.0, 2.0], Relation::Eq, 2.0);
        let (x, v) = optimum(&p);
        assert!((x[1] - 1.0).abs() < 1e-12);
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cycling_example_terminates() {
        // Beale's classic cycling instance; optimum 0.05 at x = (0.04, 0, 1, 0).
        let mut p = LpProblem::maximize(vec![0.75, -150.0, 0.02, -6.0]);
        p.add_constraint(vec![0.25, -60.0, -0.04, 9.0], Relation::Le, 0.0);
        p.add_constraint(vec![0.5, -90.0, -0.02, 3.0], Relation::Le, 0.0);
        p.add_constraint(vec![0.0, 0.0, 1.0, 0.0], Relation::Le, 1.0);
        let (_, v) = optimum(&p);
        assert!((v - 0.05).abs() < 1e-12);
    }

    #[test]
    fn malformed_inputs_are_errors() {
        let mut p = LpProblem::maximize(vec![1.0, f64::NAN]);
        assert!(matches!(solve_lp(&p), Err(LpError::NonFiniteObjective { index: 1 })));
        p.objective[1] = 0.0;
        p.add_constraint(vec![1.0], Relation::Le, 1.0);
        assert!(matches!(solve_lp(&p), Err(LpError::DimensionMismatch { row: 0, .. })));
    }
}
