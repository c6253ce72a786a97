//! Dense two-phase simplex with Bland's anti-cycling rule.
//!
//! Problems are stated as
//!
//! ```text
//! minimize    c·x
//! subject to  A_eq x  = b_eq
//!             A_ub x <= b_ub
//!             x_j >= l_j   or x_j free
//! ```
//!
//! The solver is a pure function of its input and holds no shared state.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, GlabError, Result};

/// Lower bound on a single variable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum VarBound {
    Free,
    Lower(f64),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub eq_matrix: Vec<Vec<f64>>,
    pub eq_rhs: Vec<f64>,
    /// Rows read as `row · x <= rhs`.
    pub ineq_matrix: Vec<Vec<f64>>,
    pub ineq_rhs: Vec<f64>,
    pub bounds: Vec<VarBound>,
}

impl LpProblem {
    /// A problem over `v` nonnegative variables with no constraints yet.
    pub fn new(objective: Vec<f64>) -> Self {
        let v = objective.len();
        LpProblem {
            objective,
            bounds: vec![VarBound::Lower(0.0); v],
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_eq(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.eq_matrix.push(row);
        self.eq_rhs.push(rhs);
        self
    }

    pub fn add_le(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.ineq_matrix.push(row);
        self.ineq_rhs.push(rhs);
        self
    }

    pub fn add_ge(&mut self, row: Vec<f64>, rhs: f64) -> &mut Self {
        self.add_le(row.into_iter().map(|a| -a).collect(), -rhs)
    }

    fn validate(&self) -> Result<()> {
        let v = self.num_vars();
        if self.bounds.len() != v {
            return invalid(format!("{} bounds for {} variables", self.bounds.len(), v));
        }
        if self.eq_matrix.len() != self.eq_rhs.len() || self.ineq_matrix.len() != self.ineq_rhs.len() {
            return invalid("row count and rhs length differ");
        }
        for row in self.eq_matrix.iter().chain(&self.ineq_matrix) {
            if row.len() != v {
                return invalid(format!("row of length {} in a {}-variable problem", row.len(), v));
            }
            if row.iter().any(|a| !a.is_finite()) {
                return invalid("non-finite constraint coefficient");
            }
        }
        if self.eq_rhs.iter().chain(&self.ineq_rhs).any(|b| !b.is_finite()) {
            return invalid("non-finite right-hand side");
        }
        if self.objective.iter().any(|c| !c.is_finite()) {
            return invalid("non-finite objective coefficient");
        }
        for b in &self.bounds {
            if let VarBound::Lower(l) = b {
                if !l.is_finite() {
                    return invalid("non-finite lower bound");
                }
            }
        }
        Ok(())
    }

    /// Largest absolute constraint violation of `x` (rows and bounds).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let dot = |row: &[f64]| row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
        let mut worst = 0.0f64;
        for (row, b) in self.eq_matrix.iter().zip(&self.eq_rhs) {
            worst = worst.max((dot(row) - b).abs());
        }
        for (row, b) in self.ineq_matrix.iter().zip(&self.ineq_rhs) {
            worst = worst.max(dot(row) - b);
        }
        for (xj, bound) in x.iter().zip(&self.bounds) {
            if let VarBound::Lower(l) = bound {
                worst = worst.max(l - xj);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Empty unless `status` is optimal.
    pub point: Vec<f64>,
    /// `+inf` when infeasible, `-inf` when unbounded.
    pub objective_value: f64,
}

/// Tolerances used by the simplex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LpOptions {
    pub feasibility_tol: f64,
    pub pivot_tol: f64,
    /// A reduced cost must be below `-optimality_tol` to enter the basis.
    pub optimality_tol: f64,
    pub max_iterations: usize,
}

impl Default for LpOptions {
    fn default() -> Self {
        LpOptions {
            feasibility_tol: 1e-8,
            pivot_tol: 1e-12,
            optimality_tol: 1e-10,
            max_iterations: 50_000,
        }
    }
}

pub fn solve_lp(problem: &LpProblem) -> Result<LpSolution> {
    solve_lp_with(problem, &LpOptions::default())
}

/// Column of the standard form: which original variable it comes from and with what sign.
#[derive(Clone, Copy)]
enum ColumnKind {
    Original { var: usize, sign: f64 },
    Slack,
    Artificial,
}

struct Tableau {
    rows: usize,
    cols: usize,
    // rows x (cols + 1); last entry of each row is the rhs
    data: Vec<f64>,
    obj: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * (self.cols + 1) + j]
    }

    #[inline]
    fn rhs(&self, i: usize) -> f64 {
        self.data[i * (self.cols + 1) + self.cols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.cols + 1;
        let p = self.data[r * w + c];
        for v in &mut self.data[r * w..(r + 1) * w] {
            *v /= p;
        }
        let (before, rest) = self.data.split_at_mut(r * w);
        let (prow, after) = rest.split_at_mut(w);
        for row in before.chunks_exact_mut(w).chain(after.chunks_exact_mut(w)) {
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(prow.iter()) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        let f = self.obj[c];
        if f != 0.0 {
            for (v, pv) in self.obj.iter_mut().zip(prow.iter()) {
                *v -= f * pv;
            }
            self.obj[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Reduced costs of `cost` with respect to the current basis; last entry is `-objective`.
    fn price(&mut self, cost: &[f64]) {
        let w = self.cols + 1;
        self.obj = cost.to_vec();
        self.obj.push(0.0);
        for i in 0..self.rows {
            let cb = cost[self.basis[i]];
            if cb != 0.0 {
                let row = &self.data[i * w..(i + 1) * w];
                for (o, a) in self.obj.iter_mut().zip(row) {
                    *o -= cb * a;
                }
            }
        }
    }

    /// Runs Bland's rule until optimal. `allowed` masks which columns may enter.
    fn run(&mut self, allowed: &[bool], opts: &LpOptions, iterations: &mut usize) -> Result<Option<LpStatus>> {
        loop {
            *iterations += 1;
            if *iterations > opts.max_iterations {
                return Err(GlabError::NumericalFailure(format!(
                    "simplex exceeded {} iterations",
                    opts.max_iterations
                )));
            }
            let entering = (0..self.cols).find(|&j| allowed[j] && self.obj[j] < -opts.optimality_tol);
            let Some(c) = entering else {
                return Ok(None);
            };
            let mut best: Option<(usize, f64)> = None;
            let mut tiny_positive = false;
            for i in 0..self.rows {
                let a = self.at(i, c);
                if a > opts.pivot_tol {
                    let ratio = self.rhs(i).max(0.0) / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                            if ratio < br && !tie || tie && self.basis[i] < self.basis[bi] {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                } else if a > 0.0 {
                    tiny_positive = true;
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, c),
                None if tiny_positive => {
                    return Err(GlabError::NumericalFailure(
                        "no pivot above tolerance in the entering column".into(),
                    ))
                }
                None => return Ok(Some(LpStatus::Unbounded)),
            }
        }
    }
}

pub fn solve_lp_with(problem: &LpProblem, opts: &LpOptions) -> Result<LpSolution> {
    problem.validate()?;
    let v = problem.num_vars();

    // standard-form columns for the original variables
    let mut kinds: Vec<ColumnKind> = Vec::new();
    let mut shift = vec![0.0; v];
    for (j, b) in problem.bounds.iter().enumerate() {
        match *b {
            VarBound::Free => {
                kinds.push(ColumnKind::Original { var: j, sign: 1.0 });
                kinds.push(ColumnKind::Original { var: j, sign: -1.0 });
            }
            VarBound::Lower(l) => {
                shift[j] = l;
                kinds.push(ColumnKind::Original { var: j, sign: 1.0 });
            }
        }
    }
    let n_orig = kinds.len();
    let n_eq = problem.eq_matrix.len();
    let n_ub = problem.ineq_matrix.len();
    let rows = n_eq + n_ub;

    // row data in terms of the standard columns, before slacks/artificials
    let mut std_rows: Vec<Vec<f64>> = Vec::with_capacity(rows);
    let mut rhs: Vec<f64> = Vec::with_capacity(rows);
    for (row, b) in problem
        .eq_matrix
        .iter()
        .zip(&problem.eq_rhs)
        .chain(problem.ineq_matrix.iter().zip(&problem.ineq_rhs))
    {
        let mut r = Vec::with_capacity(n_orig);
        for k in &kinds {
            if let ColumnKind::Original { var, sign } = *k {
                r.push(sign * row[var]);
            }
        }
        let shifted: f64 = row.iter().zip(&shift).map(|(a, s)| a * s).sum();
        std_rows.push(r);
        rhs.push(b - shifted);
    }

    for _ in 0..n_ub {
        kinds.push(ColumnKind::Slack);
    }
    let flipped: Vec<bool> = rhs.iter().map(|&b| b < 0.0).collect();
    // slack rows that stay nonnegative start with the slack basic; all others need an artificial
    let needs_art: Vec<bool> = (0..rows).map(|i| i < n_eq || flipped[i]).collect();
    let n_art = needs_art.iter().filter(|&&a| a).count();
    for _ in 0..n_art {
        kinds.push(ColumnKind::Artificial);
    }
    let cols = kinds.len();
    let w = cols + 1;

    let mut data = vec![0.0; rows * w];
    let mut basis = vec![0usize; rows];
    let mut art = n_orig + n_ub;
    for i in 0..rows {
        let sgn = if flipped[i] { -1.0 } else { 1.0 };
        let row = &mut data[i * w..(i + 1) * w];
        for (k, a) in std_rows[i].iter().enumerate() {
            row[k] = sgn * a;
        }
        if i >= n_eq {
            row[n_orig + (i - n_eq)] = sgn;
        }
        row[cols] = sgn * rhs[i];
        if needs_art[i] {
            row[art] = 1.0;
            basis[i] = art;
            art += 1;
        } else {
            basis[i] = n_orig + (i - n_eq);
        }
    }

    let mut tab = Tableau { rows, cols, data, obj: Vec::new(), basis };
    let mut iterations = 0usize;

    // phase 1
    if n_art > 0 {
        let cost1: Vec<f64> = kinds
            .iter()
            .map(|k| if matches!(k, ColumnKind::Artificial) { 1.0 } else { 0.0 })
            .collect();
        tab.price(&cost1);
        let all = vec![true; cols];
        tab.run(&all, opts, &mut iterations)?;
        let infeas = -tab.obj[cols];
        if infeas > opts.feasibility_tol {
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                point: Vec::new(),
                objective_value: f64::INFINITY,
            });
        }
        // drive remaining artificials out of the basis
        for i in 0..rows {
            if matches!(kinds[tab.basis[i]], ColumnKind::Artificial) {
                let mut best = None;
                let mut best_abs = opts.pivot_tol;
                for j in 0..n_orig + n_ub {
                    let a = tab.at(i, j).abs();
                    if a > best_abs {
                        best_abs = a;
                        best = Some(j);
                    }
                }
                if let Some(j) = best {
                    tab.pivot(i, j);
                }
                // otherwise the row is redundant; the artificial stays basic at zero
            }
        }
    }

    // phase 2
    let cost2: Vec<f64> = kinds
        .iter()
        .map(|k| match *k {
            ColumnKind::Original { var, sign } => sign * problem.objective[var],
            _ => 0.0,
        })
        .collect();
    tab.price(&cost2);
    let allowed: Vec<bool> = kinds.iter().map(|k| !matches!(k, ColumnKind::Artificial)).collect();
    if let Some(LpStatus::Unbounded) = tab.run(&allowed, opts, &mut iterations)? {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            point: Vec::new(),
            objective_value: f64::NEG_INFINITY,
        });
    }

    // basic values, refined against the original standard-form rows
    let mut xs = vec![0.0; cols];
    for i in 0..rows {
        xs[tab.basis[i]] = tab.rhs(i);
    }
    refine_basic_values(&tab.basis, &kinds, &std_rows, &rhs, n_eq, &mut xs);

    let mut x = shift.clone();
    for (k, kind) in kinds.iter().enumerate() {
        if let ColumnKind::Original { var, sign } = *kind {
            x[var] += sign * xs[k];
        }
    }
    let violation = problem.max_violation(&x);
    if violation > opts.feasibility_tol {
        return Err(GlabError::NumericalFailure(format!(
            "optimal point violates constraints by {violation:e}"
        )));
    }
    let objective_value = problem.objective.iter().zip(&x).map(|(c, xi)| c * xi).sum();
    Ok(LpSolution { status: LpStatus::Optimal, point: x, objective_value })
}

/// Re-solves `B x_B = b` with the original coefficients to shed accumulated pivoting error.
fn refine_basic_values(
    basis: &[usize],
    kinds: &[ColumnKind],
    std_rows: &[Vec<f64>],
    rhs: &[f64],
    n_eq: usize,
    xs: &mut [f64],
) {
    let rows = basis.len();
    if rows == 0 {
        return;
    }
    let n_orig = std_rows.first().map_or(0, |r| r.len());
    let column = |j: usize, i: usize| -> f64 {
        match kinds[j] {
            ColumnKind::Original { .. } => std_rows[i][j],
            ColumnKind::Slack => {
                if i >= n_eq && j - n_orig == i - n_eq {
                    1.0
                } else {
                    0.0
                }
            }
            ColumnKind::Artificial => f64::NAN,
        }
    };
    if basis.iter().any(|&j| matches!(kinds[j], ColumnKind::Artificial)) {
        return;
    }
    let b = DMatrix::from_fn(rows, rows, |i, k| column(basis[k], i));
    let rhs = DVector::from_column_slice(rhs);
    if let Some(sol) = b.lu().solve(&rhs) {
        let close = basis
            .iter()
            .enumerate()
            .all(|(k, &j)| (sol[k] - xs[j]).abs() <= 1e-6 * (1.0 + xs[j].abs()));
        if close {
            for (k, &j) in basis.iter().enumerate() {
                xs[j] = if sol[k] < 0.0 && sol[k] > -1e-9 { 0.0 } else { sol[k] };
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forced_by_constraint() {
        let mut p = LpProblem::new(vec![1.0, 1.0]);
        p.add_ge(vec![1.0, 1.0], 1.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn contradictory_bounds() {
        let mut p = LpProblem::new(vec![0.0]);
        p.add_le(vec![1.0], -1.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Infeasible);
        assert!(s.point.is_empty());
    }

    #[test]
    fn unbounded_ray() {
        let mut p = LpProblem::new(vec![-1.0]);
        p.bounds = vec![VarBound::Free];
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Unbounded);
    }

    #[test]
    fn dimension_mismatch() {
        let mut p = LpProblem::new(vec![1.0, 2.0]);
        p.add_le(vec![1.0], 1.0);
        assert!(matches!(solve_lp(&p), Err(GlabError::InvalidInput(_))));
    }

    #[test]
    fn equality_with_free_variables() {
        // min |x| + |y| written with free variables: x = a - b style via equality
        let mut p = LpProblem::new(vec![0.0, 0.0, 1.0, 1.0]);
        p.bounds = vec![VarBound::Free, VarBound::Free, VarBound::Lower(0.0), VarBound::Lower(0.0)];
        p.add_eq(vec![1.0, 0.0, 0.0, 0.0], 3.0);
        p.add_eq(vec![0.0, 1.0, 0.0, 0.0], -2.0);
        p.add_le(vec![1.0, 0.0, -1.0, 0.0], 0.0);
        p.add_le(vec![-1.0, 0.0, -1.0, 0.0], 0.0);
        p.add_le(vec![0.0, 1.0, 0.0, -1.0], 0.0);
        p.add_le(vec![0.0, -1.0, 0.0, -1.0], 0.0);
        let s = solve_lp(&p).unwrap();
        assert!((s.objective_value - 5.0).abs() < 1e-10);
    }

    #[test]
    fn shifted_lower_bounds() {
        let mut p = LpProblem::new(vec![1.0, 2.0]);
        p.bounds = vec![VarBound::Lower(1.5), VarBound::Lower(-2.0)];
        let s = solve_lp(&p).unwrap();
        assert!((s.objective_value - (1.5 - 4.0)).abs() < 1e-12);
        assert_eq!(s.point, vec![1.5, -2.0]);
    }

    #[test]
    fn redundant_equalities() {
        let mut p = LpProblem::new(vec![1.0, 1.0]);
        p.add_eq(vec![1.0, 1.0], 2.0);
        p.add_eq(vec![2.0, 2.0], 4.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value - 2.0).abs() < 1e-10);
    }

    #[test]
    fn degenerate_cycling_instance() {
        // Beale's classic cycling example; Bland's rule must terminate
        let mut p = LpProblem::new(vec![-0.75, 150.0, -0.02, 6.0]);
        p.add_le(vec![0.25, -60.0, -0.04, 9.0], 0.0);
        p.add_le(vec![0.5, -90.0, -0.02, 3.0], 0.0);
        p.add_le(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let s = solve_lp(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective_value + 0.05).abs() < 1e-10);
    }

    #[test]
    fn deterministic() {
        let mut p = LpProblem::new(vec![1.0, -1.0, 0.5]);
        p.add_le(vec![1.0, 1.0, 1.0], 4.0);
        p.add_ge(vec![1.0, -2.0, 0.0], -3.0);
        let a = solve_lp(&p).unwrap();
        let b = solve_lp(&p).unwrap();
        assert_eq!(a, b);
    }
}
