//! Sparse linear programs with variable bounds, and the solutions the
//! solvers hand back.

use serde::{Deserialize, Serialize};

use crate::error::LpError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    Minimize,
    Maximize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKind {
    /// `a·x <= rhs`
    Le,
    /// `a·x == rhs`
    Eq,
    /// `a·x >= rhs`
    Ge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: String,
    pub obj: f64,
    pub lower: f64,
    /// May be `f64::INFINITY`.
    pub upper: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub name: String,
    /// `(column, coefficient)` pairs, sorted by column, no explicit zeros.
    pub coeffs: Vec<(usize, f64)>,
    pub kind: RowKind,
    pub rhs: f64,
}

/// A linear program `opt c·x + c0` subject to row constraints and
/// `lower <= x <= upper`.
///
/// All data must be finite except column upper bounds. The objective
/// constant `c0` is carried along and added to every reported objective
/// value; it never influences the optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub sense: Sense,
    pub name: String,
    columns: Vec<Column>,
    rows: Vec<Row>,
    objective_constant: f64,
}

impl LpProblem {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            name: "LP".to_string(),
            columns: Vec::new(),
            rows: Vec::new(),
            objective_constant: 0.0,
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn add_column(&mut self, name: impl Into<String>, obj: f64, lower: f64, upper: f64) -> usize {
        self.columns.push(Column {
            name: name.into(),
            obj,
            lower,
            upper,
        });
        self.columns.len() - 1
    }

    /// Adds a row. Duplicate column entries are summed and zeros dropped.
    pub fn add_row(
        &mut self,
        name: impl Into<String>,
        coeffs: impl IntoIterator<Item = (usize, f64)>,
        kind: RowKind,
        rhs: f64,
    ) -> usize {
        let mut coeffs: Vec<(usize, f64)> = coeffs.into_iter().collect();
        coeffs.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (j, a) in coeffs {
            match merged.last_mut() {
                Some((last, acc)) if *last == j => *acc += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(Row {
            name: name.into(),
            coeffs: merged,
            kind,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn set_objective_constant(&mut self, c0: f64) {
        self.objective_constant = c0;
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Row] {
        &self.rows
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn set_column_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.columns[j].lower = lower;
        self.columns[j].upper = upper;
    }

    pub fn set_rhs(&mut self, i: usize, rhs: f64) {
        self.rows[i].rhs = rhs;
    }

    /// Checks dimensions and finiteness.
    pub fn validate(&self) -> Result<(), LpError> {
        let n = self.columns.len();
        if !self.objective_constant.is_finite() {
            return Err(LpError::InvalidData("objective constant is not finite".into()));
        }
        for (j, col) in self.columns.iter().enumerate() {
            if !col.obj.is_finite() || !col.lower.is_finite() {
                return Err(LpError::InvalidData(format!(
                    "column {j} ({}) has a non-finite cost or lower bound",
                    col.name
                )));
            }
            if col.upper.is_nan() || col.upper == f64::NEG_INFINITY || col.upper < col.lower {
                return Err(LpError::InvalidData(format!(
                    "column {j} ({}) has bounds [{}, {}]",
                    col.name, col.lower, col.upper
                )));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::InvalidData(format!("row {i} ({}) has a non-finite rhs", row.name)));
            }
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(LpError::Dimension(format!(
                        "row {i} ({}) references column {j} but there are {n} columns",
                        row.name
                    )));
                }
                if !a.is_finite() {
                    return Err(LpError::InvalidData(format!(
                        "row {i} ({}) has a non-finite coefficient",
                        row.name
                    )));
                }
            }
        }
        Ok(())
    }

    /// `c·x + c0`.
    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.columns.iter().zip(x).map(|(c, v)| c.obj * v).sum::<f64>() + self.objective_constant
    }

    /// Row activities `a_i·x`.
    pub fn row_activity(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.coeffs.iter().map(|&(j, a)| a * x[j]).sum())
            .collect()
    }

    /// Largest violation of any row or bound at `x`.
    pub fn max_primal_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0_f64;
        for (row, act) in self.rows.iter().zip(self.row_activity(x)) {
            let v = match row.kind {
                RowKind::Le => act - row.rhs,
                RowKind::Ge => row.rhs - act,
                RowKind::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (col, &v) in self.columns.iter().zip(x) {
            worst = worst.max(col.lower - v).max(v - col.upper);
        }
        worst
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarStatus {
    Basic,
    AtLower,
    AtUpper,
}

/// Solver output.
///
/// Row prices are `∂ objective / ∂ rhs` in the problem's own sense, and
/// reduced costs are `c_j - Σ_i price_i a_ij`. Both are empty when the
/// producer does not compute duals (the brute-force oracle).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: Status,
    pub x: Vec<f64>,
    /// Includes the objective constant.
    pub objective: f64,
    pub row_prices: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub col_status: Vec<VarStatus>,
    pub iterations: usize,
}

impl LpSolution {
    pub(crate) fn without_point(status: Status, n_rows: usize, n_cols: usize, iterations: usize) -> Self {
        Self {
            status,
            x: vec![0.0; n_cols],
            objective: f64::NAN,
            row_prices: vec![0.0; n_rows],
            reduced_costs: vec![0.0; n_cols],
            col_status: vec![VarStatus::AtLower; n_cols],
            iterations,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }

    /// Primal, dual and complementarity residuals of this solution
    /// against `problem`.
    pub fn kkt(&self, problem: &LpProblem) -> KktResiduals {
        kkt_residuals(problem, &self.x, &self.row_prices, &self.reduced_costs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KktResiduals {
    pub primal: f64,
    pub dual: f64,
    pub complementarity: f64,
    /// `|objective - (c0 + Σ price_i rhs_i + Σ_j r_j x_j)|`.
    pub duality_identity: f64,
}

pub(crate) fn kkt_residuals(problem: &LpProblem, x: &[f64], prices: &[f64], reduced: &[f64]) -> KktResiduals {
    let primal = problem.max_primal_violation(x);
    // A maximization flips every sign condition of the minimization case.
    let s = match problem.sense {
        Sense::Minimize => 1.0,
        Sense::Maximize => -1.0,
    };
    let activity = problem.row_activity(x);
    let mut dual = 0.0_f64;
    let mut comp = 0.0_f64;
    for ((row, &y), act) in problem.rows().iter().zip(prices).zip(&activity) {
        let y = s * y;
        match row.kind {
            RowKind::Le => dual = dual.max(y),
            RowKind::Ge => dual = dual.max(-y),
            RowKind::Eq => {}
        }
        if row.kind != RowKind::Eq {
            comp = comp.max((y * (row.rhs - act)).abs());
        }
    }
    for ((col, &r), &v) in problem.columns().iter().zip(reduced).zip(x) {
        let r = s * r;
        let at_lower = (v - col.lower).abs();
        let at_upper = if col.upper.is_finite() { (col.upper - v).abs() } else { f64::INFINITY };
        // r > 0 is only allowed at the lower bound, r < 0 only at the upper bound.
        if r > 0.0 {
            comp = comp.max(r * at_lower);
        } else if r < 0.0 {
            if col.upper.is_infinite() {
                dual = dual.max(-r);
            } else {
                comp = comp.max(-r * at_upper);
            }
        }
    }
    let identity = {
        let priced: f64 = problem.rows().iter().zip(prices).map(|(row, y)| y * row.rhs).sum();
        let bounds: f64 = reduced.iter().zip(x).map(|(r, v)| r * v).sum();
        let obj = problem.objective_value(x);
        (obj - (problem.objective_constant() + priced + bounds)).abs()
    };
    KktResiduals {
        primal,
        dual,
        complementarity: comp,
        duality_identity: identity,
    }
}
